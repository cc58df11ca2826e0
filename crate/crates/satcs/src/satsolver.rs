//! Complete CDCL SAT solver: two-watched-literal propagation, activity-based
//! branching, geometric restarts, learned-clause deletion, and assumption
//! handling with final-conflict cores. Deterministic: no randomized choices.

use crate::cnf::{CnfFormula, Literal, Model};

/// Outcome of a solve call. An `Unsat` core is a subset of the supplied
/// assumptions whose conjunction with the formula is unsatisfiable; it is
/// empty when the formula alone is unsatisfiable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat(Vec<Literal>),
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            SolveResult::Sat(m) => Some(m),
            SolveResult::Unsat(_) => None,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SolverStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learnt_deleted: u64,
}

#[derive(Debug, Clone)]
struct SClause {
    lits: Vec<Literal>,
    learnt: bool,
    activity: f64,
    removed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: usize,
    blocker: Literal,
}

fn lit_index(l: Literal) -> usize {
    l.variable() * 2 + usize::from(!l.is_positive())
}

/// Incremental CDCL solver. One solver is single-threaded and stateful across
/// calls; clauses and variables may be added between solves.
pub struct Solver {
    num_vars: usize,
    db: Vec<SClause>,
    watches: Vec<Vec<Watcher>>,
    // Per-variable state, indexed 1..=num_vars.
    values: Vec<Option<bool>>,
    reason: Vec<Option<usize>>,
    level: Vec<usize>,
    activity: Vec<f64>,
    phase: Vec<bool>,
    seen: Vec<bool>,
    heap: std::collections::BinaryHeap<(u64, usize)>,
    trail: Vec<Literal>,
    trail_lim: Vec<usize>,
    qhead: usize,
    ok: bool,
    var_inc: f64,
    cla_inc: f64,
    live_learnts: usize,
    max_learnts: f64,
    pub stats: SolverStats,
    /// When > 0, restart/reduce events are logged to stderr.
    pub verbosity: u32,
}

const VAR_DECAY: f64 = 0.95;
const CLA_DECAY: f64 = 0.999;
const RESTART_FIRST: u64 = 100;
const RESTART_INC: f64 = 1.5;
const LEARNT_GROW: f64 = 1.1;

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            num_vars: 0,
            db: Vec::new(),
            watches: vec![Vec::new(); 2],
            values: vec![None],
            reason: vec![None],
            level: vec![0],
            activity: vec![0.0],
            phase: vec![false],
            seen: vec![false],
            heap: std::collections::BinaryHeap::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            ok: true,
            var_inc: 1.0,
            cla_inc: 1.0,
            live_learnts: 0,
            max_learnts: 1000.0,
            stats: SolverStats::default(),
            verbosity: 0,
        }
    }

    pub fn from_formula(f: &CnfFormula) -> Self {
        let mut s = Self::new();
        s.ensure_vars(f.num_vars());
        for c in f.clauses() {
            s.add_clause(c.literals());
        }
        s
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Allocates the next fresh variable and returns its index.
    pub fn new_var(&mut self) -> usize {
        self.num_vars += 1;
        self.values.push(None);
        self.reason.push(None);
        self.level.push(0);
        self.activity.push(0.0);
        self.phase.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.push((0.0f64.to_bits(), self.num_vars));
        self.num_vars
    }

    pub fn ensure_vars(&mut self, n: usize) {
        while self.num_vars < n {
            self.new_var();
        }
    }

    fn lit_value(&self, l: Literal) -> Option<bool> {
        self.values[l.variable()].map(|b| b == l.is_positive())
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// Adds a clause; returns false when the solver is now known unsatisfiable.
    /// Duplicate literals are dropped, tautologies skipped, literals already
    /// false at the root removed.
    pub fn add_clause(&mut self, lits: &[Literal]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let mut c: Vec<Literal> = Vec::with_capacity(lits.len());
        for &l in lits {
            assert!(l.variable() <= self.num_vars, "literal beyond allocated variables");
            if c.contains(&!l) {
                return true; // tautology
            }
            if c.contains(&l) || self.lit_value(l) == Some(false) {
                continue;
            }
            if self.lit_value(l) == Some(true) {
                return true; // already satisfied at the root
            }
            c.push(l);
        }
        match c.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.unchecked_enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach_clause(c, false);
                true
            }
        }
    }

    fn attach_clause(&mut self, lits: Vec<Literal>, learnt: bool) -> usize {
        debug_assert!(lits.len() >= 2);
        let cref = self.db.len();
        self.watches[lit_index(!lits[0])].push(Watcher { cref, blocker: lits[1] });
        self.watches[lit_index(!lits[1])].push(Watcher { cref, blocker: lits[0] });
        if learnt {
            self.live_learnts += 1;
        }
        self.db.push(SClause { lits, learnt, activity: 0.0, removed: false });
        cref
    }

    fn unchecked_enqueue(&mut self, l: Literal, reason: Option<usize>) {
        let v = l.variable();
        debug_assert!(self.values[v].is_none());
        self.values[v] = Some(l.is_positive());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn new_decision_level(&mut self) {
        self.trail_lim.push(self.trail.len());
    }

    fn cancel_until(&mut self, target: usize) {
        if self.decision_level() <= target {
            return;
        }
        let keep = self.trail_lim[target];
        for i in (keep..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.variable();
            self.values[v] = None;
            self.reason[v] = None;
            self.phase[v] = l.is_positive();
            self.heap.push((self.activity[v].to_bits(), v));
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(target);
        self.qhead = self.trail.len();
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let widx = lit_index(p);
            let mut ws = std::mem::take(&mut self.watches[widx]);
            let false_lit = !p;
            let mut i = 0;
            let mut conflict = None;
            while i < ws.len() {
                let Watcher { cref, blocker } = ws[i];
                if self.lit_value(blocker) == Some(true) {
                    i += 1;
                    continue;
                }
                if self.db[cref].removed {
                    ws.swap_remove(i);
                    continue;
                }
                if self.db[cref].lits[0] == false_lit {
                    self.db[cref].lits.swap(0, 1);
                }
                debug_assert_eq!(self.db[cref].lits[1], false_lit);
                let first = self.db[cref].lits[0];
                if first != blocker && self.lit_value(first) == Some(true) {
                    ws[i].blocker = first;
                    i += 1;
                    continue;
                }
                let mut rewatched = false;
                for k in 2..self.db[cref].lits.len() {
                    if self.lit_value(self.db[cref].lits[k]) != Some(false) {
                        self.db[cref].lits.swap(1, k);
                        let new_watch = self.db[cref].lits[1];
                        self.watches[lit_index(!new_watch)].push(Watcher { cref, blocker: first });
                        ws.swap_remove(i);
                        rewatched = true;
                        break;
                    }
                }
                if rewatched {
                    continue;
                }
                if self.lit_value(first) == Some(false) {
                    conflict = Some(cref);
                    self.qhead = self.trail.len();
                    break;
                }
                self.unchecked_enqueue(first, Some(cref));
                i += 1;
            }
            self.watches[widx] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
            // Stored heap keys are stale after rescaling; rebuild.
            let entries: Vec<(u64, usize)> = (1..=self.num_vars)
                .filter(|&v| self.values[v].is_none())
                .map(|v| (self.activity[v].to_bits(), v))
                .collect();
            self.heap = entries.into_iter().collect();
        } else {
            self.heap.push((self.activity[v].to_bits(), v));
        }
    }

    fn bump_clause(&mut self, cref: usize) {
        self.db[cref].activity += self.cla_inc;
        if self.db[cref].activity > 1e20 {
            for c in self.db.iter_mut() {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn decay_activities(&mut self) {
        self.var_inc /= VAR_DECAY;
        self.cla_inc /= CLA_DECAY;
    }

    /// First-UIP conflict analysis; returns the learnt clause (asserting
    /// literal first) and the backtrack level.
    fn analyze(&mut self, mut confl: usize) -> (Vec<Literal>, usize) {
        let mut learnt: Vec<Literal> = vec![Literal::positive(1)]; // placeholder slot
        let mut to_clear: Vec<usize> = Vec::new();
        let mut path_c = 0usize;
        let mut p: Option<Literal> = None;
        let mut index = self.trail.len();

        loop {
            if self.db[confl].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            for k in start..self.db[confl].lits.len() {
                let q = self.db[confl].lits[k];
                let v = q.variable();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    to_clear.push(v);
                    self.bump_var(v);
                    if self.level[v] >= self.decision_level() {
                        path_c += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].variable()] {
                    break;
                }
            }
            let pl = self.trail[index];
            self.seen[pl.variable()] = false;
            path_c -= 1;
            p = Some(pl);
            if path_c == 0 {
                break;
            }
            confl = self.reason[pl.variable()].expect("propagated literal has a reason");
        }
        learnt[0] = !p.unwrap();

        // Local minimization: drop literals whose reason lies within the clause.
        let mut j = 1;
        for i in 1..learnt.len() {
            let q = learnt[i];
            let v = q.variable();
            let keep = match self.reason[v] {
                None => true,
                Some(cr) => self.db[cr].lits[1..]
                    .iter()
                    .any(|&r| !self.seen[r.variable()] && self.level[r.variable()] > 0),
            };
            if keep {
                learnt[j] = q;
                j += 1;
            }
        }
        learnt.truncate(j);

        for v in to_clear {
            self.seen[v] = false;
        }

        let bt_level = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].variable()] > self.level[learnt[max_i].variable()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].variable()]
        };
        (learnt, bt_level)
    }

    /// Explains why assumption `p` is false: walks the implication graph back
    /// to the assumption decisions. Returns the involved assumptions.
    fn analyze_final(&mut self, p: Literal) -> Vec<Literal> {
        let mut core = vec![p];
        if self.decision_level() == 0 {
            return core;
        }
        self.seen[p.variable()] = true;
        for i in (self.trail_lim[0]..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.variable();
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                None => core.push(l),
                Some(cr) => {
                    for &q in &self.db[cr].lits[1..] {
                        if self.level[q.variable()] > 0 {
                            self.seen[q.variable()] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[p.variable()] = false;
        core
    }

    fn pick_branch(&mut self) -> Option<Literal> {
        while let Some((bits, v)) = self.heap.pop() {
            if self.values[v].is_none() && self.activity[v].to_bits() == bits {
                self.stats.decisions += 1;
                return Some(Literal::new(v, self.phase[v]));
            }
        }
        None
    }

    fn reduce_db(&mut self) {
        let mut candidates: Vec<usize> = (0..self.db.len())
            .filter(|&i| {
                let c = &self.db[i];
                c.learnt && !c.removed && c.lits.len() > 2 && !self.is_locked(i)
            })
            .collect();
        candidates.sort_by(|&a, &b| {
            self.db[a]
                .activity
                .partial_cmp(&self.db[b].activity)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let drop_count = candidates.len() / 2;
        for &cref in &candidates[..drop_count] {
            self.db[cref].removed = true;
            self.live_learnts -= 1;
            self.stats.learnt_deleted += 1;
        }
        if self.verbosity > 0 {
            eprintln!(
                "c reduce: dropped {drop_count} learnt clauses, {} live",
                self.live_learnts
            );
        }
    }

    fn is_locked(&self, cref: usize) -> bool {
        let first = self.db[cref].lits[0];
        self.reason[first.variable()] == Some(cref) && self.lit_value(first) == Some(true)
    }

    fn extract_model(&self) -> Model {
        Model::new((1..=self.num_vars).map(|v| self.values[v].unwrap_or(false)).collect())
    }

    /// Decides satisfiability under the given assumptions. Sound and complete;
    /// the model of a `Sat` answer satisfies every clause and every assumption.
    pub fn solve(&mut self, assumptions: &[Literal]) -> SolveResult {
        for a in assumptions {
            assert!(a.variable() <= self.num_vars, "assumption beyond allocated variables");
        }
        if !self.ok {
            return SolveResult::Unsat(Vec::new());
        }
        self.cancel_until(0);
        if self.max_learnts < self.db.len() as f64 / 3.0 {
            self.max_learnts = self.db.len() as f64 / 3.0;
        }
        let mut restart_limit = RESTART_FIRST;
        let mut conflicts_since = 0u64;

        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_since += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SolveResult::Unsat(Vec::new());
                }
                let (learnt, bt_level) = self.analyze(confl);
                self.cancel_until(bt_level);
                if learnt.len() == 1 {
                    self.unchecked_enqueue(learnt[0], None);
                } else {
                    let asserting = learnt[0];
                    let cref = self.attach_clause(learnt, true);
                    self.bump_clause(cref);
                    self.unchecked_enqueue(asserting, Some(cref));
                }
                self.decay_activities();
            } else {
                if conflicts_since >= restart_limit {
                    conflicts_since = 0;
                    restart_limit = (restart_limit as f64 * RESTART_INC) as u64;
                    self.max_learnts *= LEARNT_GROW;
                    self.stats.restarts += 1;
                    if self.verbosity > 0 {
                        eprintln!(
                            "c restart {} after {} conflicts",
                            self.stats.restarts, self.stats.conflicts
                        );
                    }
                    self.cancel_until(0);
                    continue;
                }
                if self.live_learnts as f64 >= self.max_learnts + self.trail.len() as f64 {
                    self.reduce_db();
                }
                let mut next = None;
                while self.decision_level() < assumptions.len() {
                    let p = assumptions[self.decision_level()];
                    match self.lit_value(p) {
                        Some(true) => self.new_decision_level(),
                        Some(false) => return SolveResult::Unsat(self.analyze_final(p)),
                        None => {
                            next = Some(p);
                            break;
                        }
                    }
                }
                let next = match next.or_else(|| self.pick_branch()) {
                    Some(l) => l,
                    None => return SolveResult::Sat(self.extract_model()),
                };
                self.new_decision_level();
                self.unchecked_enqueue(next, None);
            }
        }
    }
}
