//! Domain types shared by every other module: binary signals, binary design
//! matrices, integer measurement vectors, sensing instances and recovery
//! reports, plus the line-oriented instance file format.

use std::fmt;
use std::time::Duration;

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("instance parse error at line {line}: {msg}")]
pub struct InstanceParseError {
    pub line: usize,
    pub msg: String,
}

/// The unknown (or recovered) vector x in {0,1}^N.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySignal {
    bits: Vec<bool>,
}

impl BinarySignal {
    pub fn new(bits: Vec<bool>) -> Result<Self, ModelError> {
        if bits.is_empty() {
            return Err(ModelError::InvalidValue("signal must have length >= 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn zero(len: usize) -> Result<Self, ModelError> {
        Self::new(vec![false; len])
    }

    /// Builds a signal from 0/1 digits.
    pub fn from_digits(digits: &[u8]) -> Result<Self, ModelError> {
        let bits = digits
            .iter()
            .map(|&d| match d {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(ModelError::InvalidValue(format!("signal entry {other} is not 0/1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn bit(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of nonzero entries.
    pub fn sparsity(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for BinarySignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// Binary design (coding) matrix A in {0,1}^{m x N}, stored dense row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<bool>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<bool>) -> Result<Self, ModelError> {
        if rows == 0 || cols == 0 {
            return Err(ModelError::InvalidValue("matrix dimensions must be >= 1".into()));
        }
        if entries.len() != rows * cols {
            return Err(ModelError::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn identity(n: usize) -> Result<Self, ModelError> {
        let mut entries = vec![false; n * n];
        for i in 0..n {
            entries[i * n + i] = true;
        }
        Self::new(n, n, entries)
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Column indices j with A_ij = 1, ascending.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        self.row(i)
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect()
    }
}

/// Measurement vector y; each entry is a row inner product, so it lies in [0, N].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementVector {
    values: Vec<usize>,
}

impl MeasurementVector {
    pub fn new(values: Vec<usize>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> usize {
        self.values[i]
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }
}

/// y_i = <A_i., x> for every row i.
pub fn measure(matrix: &DesignMatrix, signal: &BinarySignal) -> Result<MeasurementVector, ModelError> {
    if signal.len() != matrix.num_cols() {
        return Err(ModelError::DimensionMismatch(format!(
            "signal length {} does not match matrix column count {}",
            signal.len(),
            matrix.num_cols()
        )));
    }
    let values = (0..matrix.num_rows())
        .map(|i| {
            matrix
                .row(i)
                .iter()
                .zip(signal.bits())
                .filter(|&(&a, &x)| a && x)
                .count()
        })
        .collect();
    Ok(MeasurementVector::new(values))
}

/// Hamming distance between the signals divided by N.
pub fn recovery_error(x: &BinarySignal, xhat: &BinarySignal) -> Result<Ratio<u64>, ModelError> {
    if x.len() != xhat.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "signal lengths {} and {} differ",
            x.len(),
            xhat.len()
        )));
    }
    let differing = x
        .bits()
        .iter()
        .zip(xhat.bits())
        .filter(|&(a, b)| a != b)
        .count() as u64;
    Ok(Ratio::new(differing, x.len() as u64))
}

/// Generation metadata carried by synthetic instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMeta {
    pub seed: u64,
    pub bernoulli_p: Ratio<u64>,
    pub sparsity: usize,
}

/// A sensing problem: the matrix, its measurements, and (when known) the truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingInstance {
    matrix: DesignMatrix,
    measurements: MeasurementVector,
    truth: Option<BinarySignal>,
    meta: Option<InstanceMeta>,
}

impl SensingInstance {
    pub fn new(
        matrix: DesignMatrix,
        measurements: MeasurementVector,
        truth: Option<BinarySignal>,
        meta: Option<InstanceMeta>,
    ) -> Result<Self, ModelError> {
        if measurements.len() != matrix.num_rows() {
            return Err(ModelError::DimensionMismatch(format!(
                "measurement count {} does not match row count {}",
                measurements.len(),
                matrix.num_rows()
            )));
        }
        if let Some(v) = measurements.values().iter().find(|&&v| v > matrix.num_cols()) {
            return Err(ModelError::InvalidValue(format!(
                "measurement {v} exceeds column count {}",
                matrix.num_cols()
            )));
        }
        if let Some(x) = &truth {
            if measure(&matrix, x)? != measurements {
                return Err(ModelError::InvalidValue(
                    "ground truth does not reproduce the measurements".into(),
                ));
            }
            if let Some(meta) = &meta {
                if x.sparsity() != meta.sparsity {
                    return Err(ModelError::InvalidValue(format!(
                        "truth sparsity {} does not match recorded sparsity {}",
                        x.sparsity(),
                        meta.sparsity
                    )));
                }
            }
        }
        Ok(Self { matrix, measurements, truth, meta })
    }

    pub fn matrix(&self) -> &DesignMatrix {
        &self.matrix
    }

    pub fn measurements(&self) -> &MeasurementVector {
        &self.measurements
    }

    pub fn truth(&self) -> Option<&BinarySignal> {
        self.truth.as_ref()
    }

    pub fn meta(&self) -> Option<&InstanceMeta> {
        self.meta.as_ref()
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.num_rows()
    }

    pub fn num_cols(&self) -> usize {
        self.matrix.num_cols()
    }
}

/// Recovery method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sat,
    L1,
    Brute,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Sat => "sat",
            Method::L1 => "l1",
            Method::Brute => "brute",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sat" => Ok(Method::Sat),
            "l1" => Ok(Method::L1),
            "brute" => Ok(Method::Brute),
            other => Err(ModelError::InvalidValue(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Outcome of one recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub method: Method,
    pub recovered: BinarySignal,
    /// Sparsity of the recovered signal.
    pub cost: usize,
    /// Whether the recovered signal equals the truth; `None` when no truth is known.
    pub exact: Option<bool>,
    pub elapsed: Duration,
}

impl RecoveryReport {
    pub fn new(
        method: Method,
        recovered: BinarySignal,
        truth: Option<&BinarySignal>,
        elapsed: Duration,
    ) -> Self {
        let cost = recovered.sparsity();
        let exact = truth.map(|t| *t == recovered);
        Self { method, recovered, cost, exact, elapsed }
    }
}

/// Serializes an instance in the line-oriented text format:
/// `cs <m> <N>`, then `y <m integers>`, then m rows of N 0/1 digits,
/// then optionally `x <N 0/1 digits>`. Single spaces, LF-terminated lines.
pub fn write_instance(inst: &SensingInstance) -> String {
    let m = inst.num_rows();
    let n = inst.num_cols();
    let mut out = String::new();
    out.push_str(&format!("cs {m} {n}\n"));
    out.push('y');
    for v in inst.measurements().values() {
        out.push_str(&format!(" {v}"));
    }
    out.push('\n');
    for i in 0..m {
        let row: Vec<String> = inst.matrix().row(i).iter().map(|&b| u8::from(b).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    if let Some(x) = inst.truth() {
        out.push('x');
        for &b in x.bits() {
            out.push_str(&format!(" {}", u8::from(b)));
        }
        out.push('\n');
    }
    out
}

/// Parses the instance text format; errors carry 1-based line numbers.
pub fn parse_instance(text: &str) -> Result<SensingInstance, InstanceParseError> {
    let err = |line: usize, msg: String| InstanceParseError { line, msg };
    let mut lines = text.lines().enumerate();

    let (lno, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing header line".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 3 || fields[0] != "cs" {
        return Err(err(lno + 1, format!("expected `cs <m> <N>`, got `{header}`")));
    }
    let m: usize = fields[1]
        .parse()
        .map_err(|_| err(lno + 1, format!("bad row count `{}`", fields[1])))?;
    let n: usize = fields[2]
        .parse()
        .map_err(|_| err(lno + 1, format!("bad column count `{}`", fields[2])))?;
    if m == 0 || n == 0 {
        return Err(err(lno + 1, "dimensions must be >= 1".into()));
    }

    let (lno, yline) = lines.next().ok_or_else(|| err(2, "missing measurement line".into()))?;
    let mut yfields = yline.split(' ');
    if yfields.next() != Some("y") {
        return Err(err(lno + 1, format!("expected `y <m integers>`, got `{yline}`")));
    }
    let values: Vec<usize> = yfields
        .map(|t| t.parse().map_err(|_| err(lno + 1, format!("bad measurement `{t}`"))))
        .collect::<Result<_, _>>()?;
    if values.len() != m {
        return Err(err(lno + 1, format!("expected {m} measurements, got {}", values.len())));
    }

    let mut entries = Vec::with_capacity(m * n);
    for i in 0..m {
        let (lno, row) = lines
            .next()
            .ok_or_else(|| err(2 + m, format!("missing matrix row {}", i + 1)))?;
        let digits: Vec<&str> = row.split(' ').collect();
        if digits.len() != n {
            return Err(err(lno + 1, format!("expected {n} digits in row, got {}", digits.len())));
        }
        for d in digits {
            match d {
                "0" => entries.push(false),
                "1" => entries.push(true),
                other => return Err(err(lno + 1, format!("matrix entry `{other}` is not 0/1"))),
            }
        }
    }

    let mut truth = None;
    if let Some((lno, xline)) = lines.next() {
        let mut xfields = xline.split(' ');
        if xfields.next() != Some("x") {
            return Err(err(lno + 1, format!("expected `x <N 0/1 digits>`, got `{xline}`")));
        }
        let mut bits = Vec::with_capacity(n);
        for t in xfields {
            match t {
                "0" => bits.push(false),
                "1" => bits.push(true),
                other => return Err(err(lno + 1, format!("signal entry `{other}` is not 0/1"))),
            }
        }
        if bits.len() != n {
            return Err(err(lno + 1, format!("expected {n} signal digits, got {}", bits.len())));
        }
        truth = Some(BinarySignal::new(bits).map_err(|e| err(lno + 1, e.to_string()))?);
        if let Some((lno, extra)) = lines.next() {
            return Err(err(lno + 1, format!("unexpected trailing line `{extra}`")));
        }
    }

    let matrix = DesignMatrix::new(m, n, entries).map_err(|e| err(1, e.to_string()))?;
    SensingInstance::new(matrix, MeasurementVector::new(values), truth, None)
        .map_err(|e| err(1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(bits: &[u8]) -> BinarySignal {
        BinarySignal::from_digits(bits).unwrap()
    }

    #[test]
    fn measure_identity() {
        let a = DesignMatrix::identity(3).unwrap();
        let x = sig(&[1, 0, 1]);
        assert_eq!(measure(&a, &x).unwrap().values(), &[1, 0, 1]);
    }

    #[test]
    fn measure_zero_signal() {
        let a = DesignMatrix::new(2, 3, vec![true, true, false, false, true, true]).unwrap();
        let x = sig(&[0, 0, 0]);
        assert_eq!(measure(&a, &x).unwrap().values(), &[0, 0]);
    }

    #[test]
    fn measure_by_hand() {
        // Hand summation, checked exhaustively below.
        let a = DesignMatrix::new(2, 3, vec![true, true, false, false, true, true]).unwrap();
        let x = sig(&[1, 1, 0]);
        assert_eq!(measure(&a, &x).unwrap().values(), &[2, 1]);
    }

    #[test]
    fn measure_matches_exhaustive_summation() {
        let a = DesignMatrix::new(2, 3, vec![true, true, false, false, true, true]).unwrap();
        for pattern in 0u32..8 {
            let bits: Vec<bool> = (0..3).map(|j| pattern >> j & 1 == 1).collect();
            let x = BinarySignal::new(bits.clone()).unwrap();
            let y = measure(&a, &x).unwrap();
            for i in 0..2 {
                let expect: usize = (0..3).filter(|&j| a.entry(i, j) && bits[j]).count();
                assert_eq!(y.value(i), expect);
            }
        }
    }

    #[test]
    fn measure_rejects_dimension_mismatch() {
        let a = DesignMatrix::identity(3).unwrap();
        let x = sig(&[1, 0]);
        assert!(matches!(measure(&a, &x), Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn sparsity_counts_ones() {
        assert_eq!(sig(&[0, 0, 0, 0]).sparsity(), 0);
        assert_eq!(sig(&[1, 1, 1]).sparsity(), 3);
        assert_eq!(sig(&[1, 0, 1, 1, 0, 1, 0, 1]).sparsity(), 5);
    }

    #[test]
    fn recovery_error_cases() {
        let x = sig(&[1, 0, 1, 0]);
        assert_eq!(recovery_error(&x, &x).unwrap(), Ratio::new(0, 4));
        let zero = sig(&[0, 0, 0, 0]);
        let ones = sig(&[1, 1, 1, 1]);
        assert_eq!(recovery_error(&zero, &ones).unwrap(), Ratio::new(1, 1));
        assert_eq!(recovery_error(&x, &ones).unwrap(), Ratio::new(1, 2));
        assert!(recovery_error(&x, &sig(&[1])).is_err());
    }

    #[test]
    fn sparsity_equals_error_from_zero_times_n() {
        let x = sig(&[1, 0, 1, 1, 0, 1]);
        let zero = BinarySignal::zero(6).unwrap();
        let err = recovery_error(&zero, &x).unwrap();
        assert_eq!(Ratio::from_integer(x.sparsity() as u64), err * Ratio::from_integer(6));
    }

    #[test]
    fn measure_additive_on_disjoint_supports() {
        let a = DesignMatrix::new(2, 4, vec![true, false, true, true, true, true, false, true]).unwrap();
        let x1 = sig(&[1, 0, 0, 1]);
        let x2 = sig(&[0, 1, 1, 0]);
        let both = sig(&[1, 1, 1, 1]);
        let y1 = measure(&a, &x1).unwrap();
        let y2 = measure(&a, &x2).unwrap();
        let y = measure(&a, &both).unwrap();
        for i in 0..2 {
            assert_eq!(y.value(i), y1.value(i) + y2.value(i));
        }
    }

    #[test]
    fn instance_roundtrip_bytes() {
        let a = DesignMatrix::new(2, 3, vec![true, true, false, false, true, true]).unwrap();
        let x = sig(&[1, 1, 0]);
        let y = measure(&a, &x).unwrap();
        let inst = SensingInstance::new(a, y, Some(x), None).unwrap();
        let text = write_instance(&inst);
        assert_eq!(text, "cs 2 3\ny 2 1\n1 1 0\n0 1 1\nx 1 1 0\n");
        let parsed = parse_instance(&text).unwrap();
        assert_eq!(parsed, inst);
        assert_eq!(write_instance(&parsed), text);
    }

    #[test]
    fn instance_roundtrip_without_truth() {
        let a = DesignMatrix::identity(2).unwrap();
        let inst = SensingInstance::new(a, MeasurementVector::new(vec![1, 0]), None, None).unwrap();
        let text = write_instance(&inst);
        let parsed = parse_instance(&text).unwrap();
        assert_eq!(parsed, inst);
        assert_eq!(write_instance(&parsed), text);
    }

    #[test]
    fn instance_parse_errors_carry_line_numbers() {
        assert_eq!(parse_instance("nope\n").unwrap_err().line, 1);
        assert_eq!(parse_instance("cs 1 2\nz 1\n").unwrap_err().line, 2);
        assert_eq!(parse_instance("cs 1 2\ny 1\n0 2\n").unwrap_err().line, 3);
        assert_eq!(parse_instance("cs 1 2\ny 1\n1 0\nx 1 1\njunk\n").unwrap_err().line, 5);
        // Truth inconsistent with measurements is rejected.
        assert!(parse_instance("cs 1 2\ny 0\n1 1\nx 1 0\n").is_err());
    }

    #[test]
    fn instance_rejects_out_of_range_measurement() {
        let a = DesignMatrix::identity(2).unwrap();
        let res = SensingInstance::new(a, MeasurementVector::new(vec![3, 0]), None, None);
        assert!(matches!(res, Err(ModelError::InvalidValue(_))));
    }
}
