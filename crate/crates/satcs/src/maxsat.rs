//! Exact weighted MaxSAT on top of the CDCL solver. The optimization is a
//! solution-improving linear search: find any model of the hard clauses, read
//! off its soft cost, forbid that cost or worse through cardinality bounds
//! over per-weight indicator counters, and repeat until unsatisfiable. The
//! last incumbent is optimal. A brute-force enumerator serves as the oracle.

use crate::cnf::{soft_cost, Clause, Literal, Model, WeightedCnf};
use crate::satsolver::{SolveResult, Solver};

use thiserror::Error;

/// Enumeration guard for the brute-force oracle.
pub const BRUTE_FORCE_VAR_LIMIT: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaxSatError {
    #[error("{0} variables exceed the brute-force limit of {BRUTE_FORCE_VAR_LIMIT}")]
    GuardExceeded(usize),
}

/// Result of an exact optimization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptResult {
    /// A model of all hard clauses with minimum soft cost.
    Optimal(Model, u64),
    /// The hard clauses alone are unsatisfiable.
    Infeasible,
}

impl OptResult {
    pub fn cost(&self) -> Option<u64> {
        match self {
            OptResult::Optimal(_, c) => Some(*c),
            OptResult::Infeasible => None,
        }
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            OptResult::Optimal(m, _) => Some(m),
            OptResult::Infeasible => None,
        }
    }
}

/// Builds a totalizer tree over `lits` and returns its unary outputs:
/// `outs[j]` is true iff at least j+1 of the literals are true. Both
/// implication directions are emitted, so the outputs are functionally
/// determined by the inputs. Fresh variables come from `next_var`, which
/// holds the highest allocated variable index.
fn build_totalizer(
    next_var: &mut usize,
    clauses: &mut Vec<Clause>,
    lits: &[Literal],
) -> Vec<Literal> {
    if lits.len() == 1 {
        return vec![lits[0]];
    }
    let mid = lits.len() / 2;
    let left = build_totalizer(next_var, clauses, &lits[..mid]);
    let right = build_totalizer(next_var, clauses, &lits[mid..]);
    let (nl, nr) = (left.len(), right.len());
    let n = nl + nr;
    let outs: Vec<Literal> = (0..n)
        .map(|_| {
            *next_var += 1;
            Literal::positive(*next_var)
        })
        .collect();
    for i in 0..n {
        // count >= i+1 implies outs[i]: every split a+b = i+1.
        for a in 0..=nl.min(i + 1) {
            let b = i + 1 - a;
            if b > nr {
                continue;
            }
            let mut cl = Vec::with_capacity(3);
            if a > 0 {
                cl.push(!left[a - 1]);
            }
            if b > 0 {
                cl.push(!right[b - 1]);
            }
            cl.push(outs[i]);
            clauses.push(Clause::new(cl));
        }
        // count <= i implies not outs[i]: every split a+b = i.
        for a in 0..=nl.min(i) {
            let b = i - a;
            if b > nr {
                continue;
            }
            let mut cl = Vec::with_capacity(3);
            if a < nl {
                cl.push(left[a]);
            }
            if b < nr {
                cl.push(right[b]);
            }
            cl.push(!outs[i]);
            clauses.push(Clause::new(cl));
        }
    }
    outs
}

/// Clauses enforcing that at most `k` of the literals are true, totalizer
/// style with functionally determined auxiliary variables. `next_var` is the
/// fresh-variable counter (holding the current highest allocated variable).
pub fn encode_atmost_k(next_var: &mut usize, literals: &[Literal], k: usize) -> Vec<Clause> {
    assert!(k <= literals.len(), "bound exceeds literal count");
    let mut clauses = Vec::new();
    if k == literals.len() {
        return clauses; // vacuous
    }
    if k == 0 {
        return literals.iter().map(|&l| Clause::new(vec![!l])).collect();
    }
    let outs = build_totalizer(next_var, &mut clauses, literals);
    for &o in &outs[k..] {
        clauses.push(Clause::new(vec![!o]));
    }
    clauses
}

/// One weight class of soft-clause indicators with its unary counter.
struct Stratum {
    weight: u64,
    lits: Vec<Literal>,
    outs: Vec<Literal>,
}

/// Incremental descent bound: a totalizer per weight stratum, tightened with
/// one clause per minimal infeasible count profile.
struct CostBound {
    strata: Vec<Stratum>,
    built: bool,
}

impl CostBound {
    fn new(indicators: &[(Literal, u64)]) -> Self {
        let mut strata: Vec<Stratum> = Vec::new();
        for &(l, w) in indicators {
            match strata.iter_mut().find(|s| s.weight == w) {
                Some(s) => s.lits.push(l),
                None => strata.push(Stratum { weight: w, lits: vec![l], outs: Vec::new() }),
            }
        }
        // Descending weight order; makes every generated cover minimal.
        strata.sort_by(|a, b| b.weight.cmp(&a.weight));
        CostBound { strata, built: false }
    }

    fn ensure_built(&mut self, solver: &mut Solver) {
        if self.built {
            return;
        }
        for s in &mut self.strata {
            let mut next_var = solver.num_vars();
            let mut clauses = Vec::new();
            s.outs = build_totalizer(&mut next_var, &mut clauses, &s.lits);
            solver.ensure_vars(next_var);
            for c in &clauses {
                solver.add_clause(c.literals());
            }
        }
        self.built = true;
    }

    /// Forbids every indicator profile with total weight >= `target`, leaving
    /// exactly the assignments of weighted indicator cost <= target - 1.
    fn constrain_below(&mut self, solver: &mut Solver, target: u64) {
        debug_assert!(target >= 1);
        self.ensure_built(solver);
        let mut acc = vec![0usize; self.strata.len()];
        let mut covers: Vec<Vec<usize>> = Vec::new();
        self.gen_covers(0, target, &mut acc, &mut covers);
        for cover in covers {
            let clause: Vec<Literal> = cover
                .iter()
                .enumerate()
                .filter(|&(_, &a)| a > 0)
                .map(|(s, &a)| !self.strata[s].outs[a - 1])
                .collect();
            solver.add_clause(&clause);
        }
    }

    /// Minimal profiles (a_1..a_S) with sum of weight_s * a_s >= `remaining`.
    /// Strata are weight-descending, so completing a stratum with the exact
    /// ceiling keeps every earlier coordinate necessary.
    fn gen_covers(&self, s: usize, remaining: u64, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if s == self.strata.len() {
            return;
        }
        let weight = self.strata[s].weight;
        let n = self.strata[s].lits.len() as u64;
        let need = remaining.div_ceil(weight);
        if need <= n {
            acc[s] = need as usize;
            for a in acc[s + 1..].iter_mut() {
                *a = 0;
            }
            out.push(acc.clone());
        }
        let upper = n.min(need.saturating_sub(1));
        for a in 0..=upper {
            acc[s] = a as usize;
            self.gen_covers(s + 1, remaining - a * weight, acc, out);
        }
        acc[s] = 0;
    }
}

/// Exact minimum-cost solve; reports each strictly improving incumbent cost
/// through `on_incumbent` before optimality is proven.
pub fn solve_maxsat_with(w: &WeightedCnf, mut on_incumbent: impl FnMut(u64)) -> OptResult {
    let mut solver = Solver::new();
    solver.ensure_vars(w.num_vars());
    for c in w.hard() {
        if !solver.add_clause(c.literals()) {
            return OptResult::Infeasible;
        }
    }

    // Indicator literal per soft clause: true whenever the clause counts as
    // falsified. Unit clauses indicate through their negation; non-unit
    // clauses get one fresh relay each. Empty soft clauses always count.
    let mut base_cost = 0u64;
    let mut indicators: Vec<(Literal, u64)> = Vec::new();
    for (c, weight) in w.soft() {
        match c.literals() {
            [] => base_cost += weight,
            [l] => indicators.push((!*l, *weight)),
            lits => {
                let relay = Literal::positive(solver.new_var());
                let mut cl = lits.to_vec();
                cl.push(relay);
                if !solver.add_clause(&cl) {
                    return OptResult::Infeasible;
                }
                indicators.push((relay, *weight));
            }
        }
    }

    let mut bound = CostBound::new(&indicators);
    let mut best: Option<(Model, u64)> = None;
    loop {
        match solver.solve(&[]) {
            SolveResult::Unsat(_) => break,
            SolveResult::Sat(m) => {
                let cost = soft_cost(w, &m).expect("solver model is total");
                debug_assert!(best.as_ref().is_none_or(|(_, prev)| cost < *prev));
                on_incumbent(cost);
                let target = cost - base_cost;
                best = Some((m, cost));
                if target == 0 {
                    break;
                }
                bound.constrain_below(&mut solver, target);
            }
        }
    }
    match best {
        Some((m, cost)) => OptResult::Optimal(m, cost),
        None => OptResult::Infeasible,
    }
}

/// Exact minimum-cost solve over the weighted formula.
pub fn solve_maxsat(w: &WeightedCnf) -> OptResult {
    solve_maxsat_with(w, |_| {})
}

/// Exhaustive oracle with the same contract as [`solve_maxsat`]; rejects
/// formulas beyond [`BRUTE_FORCE_VAR_LIMIT`] variables.
pub fn brute_force_maxsat(w: &WeightedCnf) -> Result<OptResult, MaxSatError> {
    let nv = w.num_vars();
    if nv > BRUTE_FORCE_VAR_LIMIT {
        return Err(MaxSatError::GuardExceeded(nv));
    }
    let mut best: Option<(Model, u64)> = None;
    for pattern in 0..1u64 << nv {
        let m = Model::from_pattern(nv, pattern);
        if !w.hard().iter().all(|c| c.satisfied_by(&m)) {
            continue;
        }
        let cost = soft_cost(w, &m).expect("total model");
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((m, cost));
        }
    }
    Ok(match best {
        Some((m, cost)) => OptResult::Optimal(m, cost),
        None => OptResult::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::evaluate;
    use crate::testutil::propagate_extension;

    fn lit(v: i64) -> Literal {
        Literal::from_dimacs(v).unwrap()
    }

    fn clause(vs: &[i64]) -> Clause {
        Clause::new(vs.iter().map(|&v| lit(v)).collect())
    }

    fn check_optimal(w: &WeightedCnf, result: &OptResult) {
        if let OptResult::Optimal(m, cost) = result {
            let hard = w.hard_formula();
            assert!(evaluate(&hard, m).unwrap(), "model violates hard clauses");
            assert_eq!(soft_cost(w, m).unwrap(), *cost, "reported cost mismatch");
        }
    }

    #[test]
    fn forced_falsification() {
        let mut w = WeightedCnf::new(1);
        w.add_hard(clause(&[1]));
        w.add_soft(clause(&[-1]), 1);
        let r = solve_maxsat(&w);
        check_optimal(&w, &r);
        assert_eq!(r.cost(), Some(1));
        assert!(r.model().unwrap().value(1));
    }

    #[test]
    fn unconstrained_softs_cost_zero() {
        let mut w = WeightedCnf::new(2);
        w.add_soft(clause(&[-1]), 1);
        w.add_soft(clause(&[-2]), 1);
        let r = solve_maxsat(&w);
        check_optimal(&w, &r);
        assert_eq!(r.cost(), Some(0));
    }

    #[test]
    fn infeasible_hard_clauses() {
        let mut w = WeightedCnf::new(1);
        w.add_hard(clause(&[1]));
        w.add_hard(clause(&[-1]));
        w.add_soft(clause(&[-1]), 1);
        assert_eq!(solve_maxsat(&w), OptResult::Infeasible);
        assert_eq!(brute_force_maxsat(&w).unwrap(), OptResult::Infeasible);
    }

    #[test]
    fn brute_force_guard() {
        let w = WeightedCnf::new(25);
        assert_eq!(brute_force_maxsat(&w), Err(MaxSatError::GuardExceeded(25)));
    }

    #[test]
    fn stratified_weights_are_not_minimized_lexicographically() {
        // Minimizing the heavy stratum first would pick cost 4; the true
        // optimum pays the single weight-3 clause.
        let mut w = WeightedCnf::new(3);
        w.add_hard(clause(&[1, 2]));
        w.add_hard(clause(&[1, 3]));
        w.add_soft(clause(&[-1]), 3);
        w.add_soft(clause(&[-2]), 2);
        w.add_soft(clause(&[-3]), 2);
        let r = solve_maxsat(&w);
        check_optimal(&w, &r);
        assert_eq!(r.cost(), Some(3));
        assert_eq!(r.cost(), brute_force_maxsat(&w).unwrap().cost());
    }

    #[test]
    fn incumbents_strictly_decrease() {
        let mut w = WeightedCnf::new(5);
        w.add_hard(clause(&[5, 1]));
        w.add_hard(clause(&[-1, 2]));
        w.add_hard(clause(&[-2, 3]));
        for v in 1..=5i64 {
            w.add_soft(clause(&[-v]), 1);
        }
        let mut incumbents = Vec::new();
        let r = solve_maxsat_with(&w, |c| incumbents.push(c));
        check_optimal(&w, &r);
        assert_eq!(r.cost(), Some(1));
        assert!(incumbents.windows(2).all(|ab| ab[1] < ab[0]), "{incumbents:?}");
        assert_eq!(*incumbents.last().unwrap(), 1);
    }

    #[test]
    fn empty_soft_clause_contributes_constant_cost() {
        let mut w = WeightedCnf::new(1);
        w.add_soft(Clause::empty(), 5);
        w.add_soft(clause(&[-1]), 1);
        let r = solve_maxsat(&w);
        check_optimal(&w, &r);
        assert_eq!(r.cost(), Some(5));
        assert_eq!(brute_force_maxsat(&w).unwrap().cost(), Some(5));
    }

    #[test]
    fn atmost_k_vacuous_and_zero() {
        let lits: Vec<Literal> = (1..=4).map(Literal::positive).collect();
        let mut next_var = 4;
        assert!(encode_atmost_k(&mut next_var, &lits, 4).is_empty());
        let zero = encode_atmost_k(&mut next_var, &lits, 0);
        assert_eq!(zero.len(), 4);
        assert!(zero.iter().all(|c| c.len() == 1 && !c.literals()[0].is_positive()));
    }

    #[test]
    fn atmost_three_of_six_characterizes_popcount() {
        let lits: Vec<Literal> = (1..=6).map(Literal::positive).collect();
        let mut next_var = 6;
        let clauses = encode_atmost_k(&mut next_var, &lits, 3);
        for pattern in 0..64u64 {
            let fixed: Vec<Literal> = lits
                .iter()
                .enumerate()
                .map(|(i, &l)| if pattern >> i & 1 == 1 { l } else { !l })
                .collect();
            let extension = propagate_extension(next_var, &clauses, &fixed);
            assert_eq!(extension.is_some(), pattern.count_ones() <= 3, "pattern {pattern:06b}");
        }
    }

    /// SplitMix64; deterministic instance generation for oracle comparison.
    fn splitmix(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn random_wcnf(state: &mut u64, unit_soft_only: bool) -> WeightedCnf {
        let nv = 4 + (splitmix(state) % 8) as usize; // 4..=11
        let mut w = WeightedCnf::new(nv);
        let nhard = (splitmix(state) % 25) as usize;
        for _ in 0..nhard {
            let len = 1 + (splitmix(state) % 3) as usize;
            let mut lits = Vec::new();
            for _ in 0..len {
                let v = (splitmix(state) % nv as u64) as usize + 1;
                lits.push(Literal::new(v, splitmix(state) % 2 == 0));
            }
            w.add_hard(Clause::new(lits));
        }
        let nsoft = 1 + (splitmix(state) % 10) as usize;
        for _ in 0..nsoft {
            let weight = if unit_soft_only { 1 } else { 1 + splitmix(state) % 7 };
            let len = if unit_soft_only { 1 } else { 1 + (splitmix(state) % 3) as usize };
            let mut lits = Vec::new();
            for _ in 0..len {
                let v = (splitmix(state) % nv as u64) as usize + 1;
                lits.push(Literal::new(v, splitmix(state) % 2 == 0));
            }
            w.add_soft(Clause::new(lits), weight);
        }
        w
    }

    #[test]
    fn agrees_with_brute_force_on_unit_soft_wcnfs() {
        let mut state = 0xFEED;
        for _ in 0..40 {
            let w = random_wcnf(&mut state, true);
            let fast = solve_maxsat(&w);
            check_optimal(&w, &fast);
            let slow = brute_force_maxsat(&w).unwrap();
            assert_eq!(fast.cost(), slow.cost(), "{w:?}");
        }
    }

    #[test]
    fn agrees_with_brute_force_on_weighted_wcnfs() {
        let mut state = 0xBEEF;
        for _ in 0..40 {
            let w = random_wcnf(&mut state, false);
            let fast = solve_maxsat(&w);
            check_optimal(&w, &fast);
            let slow = brute_force_maxsat(&w).unwrap();
            assert_eq!(fast.cost(), slow.cost(), "{w:?}");
        }
    }

    #[test]
    fn encoder_output_optimum_matches_signal_enumeration() {
        use crate::encoder::{decode_model, encode_instance};
        use crate::model::{measure, BinarySignal, DesignMatrix, SensingInstance};

        let entries = [
            1u8, 0, 1, 1, 0, 1, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1,
            0, 1, 1, 0,
        ];
        let matrix = DesignMatrix::new(4, 8, entries.iter().map(|&e| e == 1).collect()).unwrap();
        let x = BinarySignal::from_digits(&[0, 1, 0, 0, 0, 1, 0, 0]).unwrap();
        let y = measure(&matrix, &x).unwrap();
        let inst = SensingInstance::new(matrix.clone(), y.clone(), Some(x), None).unwrap();
        let enc = encode_instance(&inst);
        let r = solve_maxsat(&enc.wcnf);
        check_optimal(&enc.wcnf, &r);

        // Exhaustive minimum sparsity over all 256 signals.
        let min_sparsity = (0..256u64)
            .filter_map(|p| {
                let bits: Vec<bool> = (0..8).map(|j| p >> j & 1 == 1).collect();
                let cand = BinarySignal::new(bits).unwrap();
                (measure(&matrix, &cand).unwrap() == y).then(|| cand.sparsity() as u64)
            })
            .min()
            .unwrap();
        assert_eq!(r.cost(), Some(min_sparsity));
        let recovered = decode_model(r.model().unwrap(), 8);
        assert_eq!(measure(&matrix, &recovered).unwrap(), y);
        assert_eq!(recovered.sparsity() as u64, min_sparsity);
    }
}
