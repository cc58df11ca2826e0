//! The l1 comparison method: minimize the coordinate sum subject to Ax = y
//! and the box 0 <= x <= 1, solved by a dense two-phase simplex over exact
//! rationals with Bland's rule, then thresholded to a binary signal. Exact
//! arithmetic removes every tolerance choice from the comparison.

use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::model::{BinarySignal, DesignMatrix, MeasurementVector, Method, RecoveryReport, SensingInstance};

/// A relaxed signal: N exact rationals, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalSignal {
    values: Vec<BigRational>,
}

impl FractionalSignal {
    pub fn new(values: Vec<BigRational>) -> Self {
        assert!(
            values.iter().all(|v| !v.is_negative() && *v <= BigRational::one()),
            "fractional signal entries must lie in [0, 1]"
        );
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn objective(&self) -> BigRational {
        self.values.iter().sum()
    }
}

/// Result of the linear program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum L1Outcome {
    Solution(FractionalSignal),
    Infeasible,
}

impl L1Outcome {
    pub fn solution(&self) -> Option<&FractionalSignal> {
        match self {
            L1Outcome::Solution(s) => Some(s),
            L1Outcome::Infeasible => None,
        }
    }
}

fn ratio(n: usize) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Dense simplex tableau with an incrementally maintained reduced-cost row.
/// Column layout: N signal variables, N box slacks, m artificials; the last
/// column is the right-hand side.
struct Tableau {
    rows: Vec<Vec<BigRational>>,
    cost: Vec<BigRational>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let factor = self.rows[row][col].clone();
        debug_assert!(!factor.is_zero());
        for v in self.rows[row].iter_mut() {
            *v /= &factor;
        }
        let pivot_row = self.rows[row].clone();
        for (r, other) in self.rows.iter_mut().enumerate() {
            if r == row || other[col].is_zero() {
                continue;
            }
            let scale = other[col].clone();
            for (v, p) in other.iter_mut().zip(&pivot_row) {
                *v -= &scale * p;
            }
        }
        if !self.cost[col].is_zero() {
            let scale = self.cost[col].clone();
            for (v, p) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= &scale * p;
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: enter the lowest-index improving column, leave on the
    /// minimum ratio breaking ties by lowest basis variable. Cycling-free.
    fn optimize(&mut self, allowed: impl Fn(usize) -> bool) {
        loop {
            let entering = (0..self.ncols).find(|&j| allowed(j) && self.cost[j].is_negative());
            let Some(col) = entering else { return };
            let mut leave: Option<(BigRational, usize, usize)> = None;
            for r in 0..self.rows.len() {
                if !self.rows[r][col].is_positive() {
                    continue;
                }
                let ratio = &self.rows[r][self.ncols] / &self.rows[r][col];
                let candidate = (ratio, self.basis[r], r);
                let better = match &leave {
                    None => true,
                    Some((best, var, _)) => {
                        candidate.0 < *best || (candidate.0 == *best && candidate.1 < *var)
                    }
                };
                if better {
                    leave = Some(candidate);
                }
            }
            let (_, _, row) = leave.expect("objective is bounded on the box polytope");
            self.pivot(row, col);
        }
    }

    /// Rebuilds the reduced-cost row for the objective `var_cost`.
    fn set_costs(&mut self, var_cost: impl Fn(usize) -> BigRational) {
        self.cost = (0..=self.ncols).map(|j| if j < self.ncols { var_cost(j) } else { BigRational::zero() }).collect();
        for r in 0..self.rows.len() {
            let cb = var_cost(self.basis[r]);
            if cb.is_zero() {
                continue;
            }
            for (v, p) in self.cost.iter_mut().zip(&self.rows[r]) {
                *v -= &cb * p;
            }
        }
    }
}

/// Exact optimal basic solution of min sum(x) s.t. Ax = y, 0 <= x <= 1, or
/// `Infeasible` when no such x exists.
pub fn solve_l1(matrix: &DesignMatrix, y: &MeasurementVector) -> L1Outcome {
    assert_eq!(y.len(), matrix.num_rows(), "measurement count must match rows");
    let m = matrix.num_rows();
    let n = matrix.num_cols();
    let ncols = 2 * n + m;
    let nrows = m + n;

    let mut rows = vec![vec![BigRational::zero(); ncols + 1]; nrows];
    for i in 0..m {
        for j in 0..n {
            if matrix.entry(i, j) {
                rows[i][j] = BigRational::one();
            }
        }
        rows[i][2 * n + i] = BigRational::one();
        rows[i][ncols] = ratio(y.value(i));
    }
    for j in 0..n {
        rows[m + j][j] = BigRational::one();
        rows[m + j][n + j] = BigRational::one();
        rows[m + j][ncols] = BigRational::one();
    }
    let basis: Vec<usize> = (0..m).map(|i| 2 * n + i).chain((0..n).map(|j| n + j)).collect();
    let mut t = Tableau { rows, cost: Vec::new(), basis, ncols };

    // Phase 1: minimize the artificial total down to zero.
    t.set_costs(|j| if j >= 2 * n { BigRational::one() } else { BigRational::zero() });
    t.optimize(|_| true);
    if !t.cost[ncols].is_zero() {
        return L1Outcome::Infeasible;
    }
    // Pivot leftover zero-valued artificials out where possible; rows that
    // offer no pivot are redundant and stay inert.
    for r in 0..t.rows.len() {
        if t.basis[r] >= 2 * n {
            if let Some(col) = (0..2 * n).find(|&j| !t.rows[r][j].is_zero()) {
                t.pivot(r, col);
            }
        }
    }

    // Phase 2: the real objective, artificial columns banned.
    t.set_costs(|j| if j < n { BigRational::one() } else { BigRational::zero() });
    t.optimize(|j| j < 2 * n);

    let mut values = vec![BigRational::zero(); n];
    for r in 0..t.rows.len() {
        if t.basis[r] < n {
            values[t.basis[r]] = t.rows[r][ncols].clone();
        }
    }
    L1Outcome::Solution(FractionalSignal::new(values))
}

/// Rounds a fractional signal at `threshold`: bit j is 1 iff value_j >= threshold.
/// Ties round up.
pub fn binarize(xf: &FractionalSignal, threshold: &BigRational) -> BinarySignal {
    BinarySignal::new(xf.values().iter().map(|v| v >= threshold).collect())
        .expect("fractional signal is nonempty")
}

/// The default rounding threshold, one half.
pub fn default_threshold() -> BigRational {
    BigRational::new(1.into(), 2.into())
}

/// Full l1 recovery: solve the LP, threshold at one half, compare to the
/// truth when present. `None` means the LP was infeasible (no recovery; the
/// benchmark counts it as error 1).
pub fn recover_l1(inst: &SensingInstance) -> Option<RecoveryReport> {
    let start = Instant::now();
    match solve_l1(inst.matrix(), inst.measurements()) {
        L1Outcome::Infeasible => None,
        L1Outcome::Solution(xf) => {
            let recovered = binarize(&xf, &default_threshold());
            Some(RecoveryReport::new(Method::L1, recovered, inst.truth(), start.elapsed()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{measure, SensingInstance};

    fn matrix(m: usize, n: usize, entries: &[u8]) -> DesignMatrix {
        DesignMatrix::new(m, n, entries.iter().map(|&e| e == 1).collect()).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn solved(outcome: L1Outcome) -> FractionalSignal {
        match outcome {
            L1Outcome::Solution(s) => s,
            L1Outcome::Infeasible => panic!("expected a solution"),
        }
    }

    fn check_feasible(matrix: &DesignMatrix, y: &MeasurementVector, xf: &FractionalSignal) {
        for i in 0..matrix.num_rows() {
            let lhs: BigRational = (0..matrix.num_cols())
                .filter(|&j| matrix.entry(i, j))
                .map(|j| xf.values()[j].clone())
                .sum();
            assert_eq!(lhs, ratio(y.value(i)), "row {i} violated");
        }
    }

    #[test]
    fn identity_instance_recovers_exactly() {
        let a = DesignMatrix::identity(3).unwrap();
        let y = MeasurementVector::new(vec![1, 0, 1]);
        let xf = solved(solve_l1(&a, &y));
        assert_eq!(xf.values(), &[rat(1, 1), rat(0, 1), rat(1, 1)]);
        assert_eq!(xf.objective(), rat(2, 1));
    }

    #[test]
    fn zero_measurements_give_zero_signal() {
        let a = matrix(2, 4, &[1, 1, 0, 1, 0, 1, 1, 1]);
        let y = MeasurementVector::new(vec![0, 0]);
        let xf = solved(solve_l1(&a, &y));
        assert!(xf.values().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn hand_checked_three_variable_program() {
        // min x1+x2+x3 s.t. x1+x2 = 1, x2+x3 = 2 in the unit box: x2 = x3 = 1
        // is forced by the second row, so x1 = 0 and the optimum is 2.
        let a = matrix(2, 3, &[1, 1, 0, 0, 1, 1]);
        let y = MeasurementVector::new(vec![1, 2]);
        let xf = solved(solve_l1(&a, &y));
        check_feasible(&a, &y, &xf);
        assert_eq!(xf.objective(), rat(2, 1));
        assert_eq!(xf.values(), &[rat(0, 1), rat(1, 1), rat(1, 1)]);
    }

    #[test]
    fn infeasible_when_row_exceeds_support() {
        // x1 = 2 is outside the box.
        let a = matrix(1, 2, &[1, 0]);
        let y = MeasurementVector::new(vec![2]);
        assert_eq!(solve_l1(&a, &y), L1Outcome::Infeasible);
    }

    #[test]
    fn infeasible_on_contradictory_rows() {
        let a = matrix(2, 2, &[1, 1, 1, 1]);
        let y = MeasurementVector::new(vec![0, 2]);
        assert_eq!(solve_l1(&a, &y), L1Outcome::Infeasible);
    }

    #[test]
    fn solution_satisfies_equalities_exactly() {
        let a = matrix(3, 6, &[1, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 0, 0, 1, 1]);
        let truth = BinarySignal::from_digits(&[1, 0, 0, 1, 0, 0]).unwrap();
        let y = measure(&a, &truth).unwrap();
        let xf = solved(solve_l1(&a, &y));
        check_feasible(&a, &y, &xf);
    }

    #[test]
    fn objective_lower_bounds_every_feasible_binary_signal() {
        let a = matrix(2, 5, &[1, 1, 0, 1, 0, 0, 1, 1, 0, 1]);
        let truth = BinarySignal::from_digits(&[0, 1, 1, 0, 0]).unwrap();
        let y = measure(&a, &truth).unwrap();
        let xf = solved(solve_l1(&a, &y));
        for pattern in 0..32u64 {
            let bits: Vec<bool> = (0..5).map(|j| pattern >> j & 1 == 1).collect();
            let cand = BinarySignal::new(bits).unwrap();
            if measure(&a, &cand).unwrap() == y {
                assert!(xf.objective() <= ratio(cand.sparsity()));
            }
        }
    }

    #[test]
    fn binarize_cases() {
        let already = FractionalSignal::new(vec![rat(1, 1), rat(0, 1), rat(1, 1)]);
        assert_eq!(binarize(&already, &default_threshold()).to_string(), "101");

        let halves = FractionalSignal::new(vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(binarize(&halves, &default_threshold()).to_string(), "11");

        let mixed = FractionalSignal::new(vec![rat(1, 3), rat(2, 3), rat(1, 2)]);
        assert_eq!(binarize(&mixed, &default_threshold()).to_string(), "011");
    }

    #[test]
    fn binarize_is_monotone_in_threshold() {
        let xf = FractionalSignal::new(vec![rat(1, 4), rat(2, 4), rat(3, 4), rat(1, 1)]);
        let mut prev_ones = usize::MAX;
        for denom in 1..=8 {
            let threshold = rat(denom, 8);
            let ones = binarize(&xf, &threshold).sparsity();
            assert!(ones <= prev_ones, "raising the threshold created a 1");
            prev_ones = ones;
        }
    }

    #[test]
    fn recover_l1_on_determined_system() {
        let a = DesignMatrix::identity(4).unwrap();
        let truth = BinarySignal::from_digits(&[1, 0, 1, 1]).unwrap();
        let y = measure(&a, &truth).unwrap();
        let inst = SensingInstance::new(a, y, Some(truth), None).unwrap();
        let report = recover_l1(&inst).unwrap();
        assert_eq!(report.method, Method::L1);
        assert_eq!(report.exact, Some(true));
        assert_eq!(report.cost, 3);
    }

    #[test]
    fn recover_l1_zero_signal() {
        let a = matrix(2, 3, &[1, 1, 0, 0, 1, 1]);
        let inst =
            SensingInstance::new(a, MeasurementVector::new(vec![0, 0]), None, None).unwrap();
        let report = recover_l1(&inst).unwrap();
        assert_eq!(report.cost, 0);
        assert_eq!(report.exact, None); // no truth to compare against
    }

    /// Vertex-enumeration oracle: the optimum over all vertices of the box
    /// polytope {0 <= x <= 1, Ax = y}. Every vertex fixes the variables
    /// outside a full-column-rank free set at a bound.
    fn vertex_minimum(matrix: &DesignMatrix, y: &MeasurementVector) -> Option<BigRational> {
        let m = matrix.num_rows();
        let n = matrix.num_cols();
        assert!(n <= 12);
        let mut best: Option<BigRational> = None;
        for free_mask in 0u32..1 << n {
            let free: Vec<usize> = (0..n).filter(|j| free_mask >> j & 1 == 1).collect();
            if free.len() > m {
                continue;
            }
            let rest: Vec<usize> = (0..n).filter(|j| free_mask >> j & 1 == 0).collect();
            let rest_mask_bits = rest.len();
            for assign in 0u32..1 << rest_mask_bits {
                // Augmented system over the free variables.
                let mut aug: Vec<Vec<BigRational>> =
                    vec![vec![BigRational::zero(); free.len() + 1]; m];
                for i in 0..m {
                    for (c, &j) in free.iter().enumerate() {
                        if matrix.entry(i, j) {
                            aug[i][c] = BigRational::one();
                        }
                    }
                    let mut rhs = ratio(y.value(i));
                    for (b, &j) in rest.iter().enumerate() {
                        if assign >> b & 1 == 1 && matrix.entry(i, j) {
                            rhs -= BigRational::one();
                        }
                    }
                    aug[i][free.len()] = rhs;
                }
                if let Some(xs) = solve_unique(&mut aug, free.len()) {
                    if xs.iter().all(|v| !v.is_negative() && *v <= BigRational::one()) {
                        let obj: BigRational = xs.iter().sum::<BigRational>()
                            + ratio(assign.count_ones() as usize);
                        if best.as_ref().is_none_or(|b| obj < *b) {
                            best = Some(obj);
                        }
                    }
                }
            }
        }
        best
    }

    /// Gaussian elimination; `None` if the system is inconsistent or the
    /// coefficient matrix is rank-deficient in its `k` unknowns.
    fn solve_unique(aug: &mut [Vec<BigRational>], k: usize) -> Option<Vec<BigRational>> {
        let m = aug.len();
        let mut pivot_row = 0;
        let mut pivots = Vec::new();
        for col in 0..k {
            let Some(r) = (pivot_row..m).find(|&r| !aug[r][col].is_zero()) else {
                return None; // rank-deficient free set
            };
            aug.swap(pivot_row, r);
            let norm = aug[pivot_row][col].clone();
            for v in aug[pivot_row].iter_mut() {
                *v /= &norm;
            }
            for r in 0..m {
                if r != pivot_row && !aug[r][col].is_zero() {
                    let s = aug[r][col].clone();
                    let prow = aug[pivot_row].clone();
                    for (v, p) in aug[r].iter_mut().zip(&prow) {
                        *v -= &s * p;
                    }
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        // Remaining rows must be all-zero including the right-hand side.
        for r in pivot_row..m {
            if !aug[r][k].is_zero() {
                return None;
            }
        }
        Some((0..k).map(|c| aug[c][k].clone()).collect())
    }

    #[test]
    fn simplex_matches_vertex_enumeration_on_small_instances() {
        let cases: Vec<(usize, usize, Vec<u8>, Vec<usize>)> = vec![
            (2, 4, vec![1, 1, 0, 1, 0, 1, 1, 0], vec![1, 1]),
            (3, 5, vec![1, 0, 1, 1, 0, 0, 1, 1, 0, 1, 1, 1, 0, 0, 1], vec![2, 1, 1]),
            (2, 3, vec![1, 1, 0, 0, 1, 1], vec![1, 2]),
            (3, 4, vec![1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 0], vec![2, 1, 1]),
        ];
        for (m, n, entries, yv) in cases {
            let a = matrix(m, n, &entries);
            let y = MeasurementVector::new(yv);
            let lp = solve_l1(&a, &y);
            let oracle = vertex_minimum(&a, &y);
            match (lp, oracle) {
                (L1Outcome::Solution(xf), Some(best)) => {
                    check_feasible(&a, &y, &xf);
                    assert_eq!(xf.objective(), best);
                }
                (L1Outcome::Infeasible, None) => {}
                (lp, oracle) => panic!("feasibility disagreement: {lp:?} vs {oracle:?}"),
            }
        }
    }
}
