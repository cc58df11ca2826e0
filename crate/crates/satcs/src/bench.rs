//! Instance generation and the two benchmark experiments: minimum
//! measurements per sparsity rate (oversampling factor) and mean recovery
//! error per compression rate. Also hosts the brute-force l0 oracle.
//!
//! All randomness comes from a keyed SplitMix64 counter hash, so every
//! experiment output is a pure function of its configuration: matrix entry
//! (i, j) is Bernoulli from `counter_hash(seed, [MATRIX_TAG, i, j])`, the
//! signal support from a partial Fisher-Yates shuffle seeded by
//! `counter_hash(seed, [SIGNAL_TAG])`, and per-trial instance seeds are
//! derived from the master seed and the cell coordinates.

use std::time::Instant;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::encoder::{decode_model, encode_instance};
use crate::l1baseline::recover_l1;
use crate::maxsat::{solve_maxsat, OptResult};
use crate::model::{
    measure, recovery_error, BinarySignal, DesignMatrix, InstanceMeta, MeasurementVector, Method,
    RecoveryReport, SensingInstance,
};

/// Column guard for the exhaustive l0 search.
pub const BRUTE_FORCE_SIGNAL_LIMIT: usize = 24;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} columns exceed the brute-force limit of {BRUTE_FORCE_SIGNAL_LIMIT}")]
    GuardExceeded(usize),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config error: {0}")]
    Config(String),
}

const MATRIX_TAG: u64 = 0x4d41_5452;
const SIGNAL_TAG: u64 = 0x5349_474e;
const TRIAL_TAG: u64 = 0x5452_4941;
const SIZE_TAG: u64 = 0x5349_5a45;

fn splitmix_finalize(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed SplitMix64 chain: deterministic across platforms and runs.
pub fn counter_hash(seed: u64, words: &[u64]) -> u64 {
    let mut h = splitmix_finalize(seed);
    for &w in words {
        h = splitmix_finalize(h ^ w);
    }
    h
}

/// Sequential SplitMix64 stream for shuffles.
struct Stream(u64);

impl Stream {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        splitmix_finalize(self.0)
    }
}

/// hash < p as an exact rational comparison: hash/2^64 < num/den.
fn bernoulli(hash: u64, p: Ratio<u64>) -> bool {
    (hash as u128) * (*p.denom() as u128) < (*p.numer() as u128) << 64
}

/// Deterministic random instance: A is i.i.d. Bernoulli(p_b) keyed by
/// (seed, row, col); x is uniform over weight-s signals keyed by the seed;
/// y = Ax; the truth and generation metadata are stored.
pub fn gen_instance(
    n: usize,
    m: usize,
    s: usize,
    p_b: Ratio<u64>,
    seed: u64,
) -> Result<SensingInstance, BenchError> {
    if n == 0 || m == 0 {
        return Err(BenchError::InvalidParameter("dimensions must be >= 1".into()));
    }
    if s > n {
        return Err(BenchError::InvalidParameter(format!("sparsity {s} exceeds length {n}")));
    }
    if p_b.numer() == &0 || p_b > Ratio::from_integer(1) {
        return Err(BenchError::InvalidParameter(format!("bernoulli p {p_b} outside (0, 1]")));
    }

    let entries: Vec<bool> = (0..m)
        .flat_map(|i| {
            (0..n).map(move |j| {
                bernoulli(counter_hash(seed, &[MATRIX_TAG, i as u64, j as u64]), p_b)
            })
        })
        .collect();
    let matrix = DesignMatrix::new(m, n, entries).expect("dimensions validated");

    let mut stream = Stream(counter_hash(seed, &[SIGNAL_TAG]));
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = i + (stream.next() % (n - i) as u64) as usize;
        indices.swap(i, j);
    }
    let mut bits = vec![false; n];
    for &j in &indices[..s] {
        bits[j] = true;
    }
    let truth = BinarySignal::new(bits).expect("n >= 1");
    let y = measure(&matrix, &truth).expect("dimensions match");
    let meta = InstanceMeta { seed, bernoulli_p: p_b, sparsity: s };
    Ok(SensingInstance::new(matrix, y, Some(truth), Some(meta)).expect("consistent by construction"))
}

/// Exhaustive minimum-sparsity search: enumerates supports by increasing
/// weight (lexicographic within a weight) and returns the first feasible
/// signal, or `None` when no signal reproduces the measurements.
pub fn brute_force_l0(
    matrix: &DesignMatrix,
    y: &MeasurementVector,
) -> Result<Option<BinarySignal>, BenchError> {
    let n = matrix.num_cols();
    if n > BRUTE_FORCE_SIGNAL_LIMIT {
        return Err(BenchError::GuardExceeded(n));
    }
    let m = matrix.num_rows();
    let row_masks: Vec<u32> = (0..m)
        .map(|i| {
            matrix
                .row_support(i)
                .iter()
                .fold(0u32, |acc, &j| acc | 1 << j)
        })
        .collect();
    let feasible = |mask: u32| {
        (0..m).all(|i| (row_masks[i] & mask).count_ones() as usize == y.value(i))
    };

    for k in 0..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let mask = combo.iter().fold(0u32, |acc, &j| acc | 1 << j);
            if feasible(mask) {
                let bits = (0..n).map(|j| mask >> j & 1 == 1).collect();
                return Ok(Some(BinarySignal::new(bits).expect("n >= 1")));
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    Ok(None)
}

/// Advances to the next k-combination of 0..n in lexicographic order;
/// false once the last combination has been visited.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for t in i + 1..k {
                combo[t] = combo[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Runs one recovery method on an instance. `None` means the method reported
/// the instance infeasible (cannot happen for generated instances).
pub fn recover(method: Method, inst: &SensingInstance) -> Result<Option<RecoveryReport>, BenchError> {
    let start = Instant::now();
    match method {
        Method::Sat => {
            let enc = encode_instance(inst);
            match solve_maxsat(&enc.wcnf) {
                OptResult::Infeasible => Ok(None),
                OptResult::Optimal(model, _) => {
                    let recovered = decode_model(&model, inst.num_cols());
                    Ok(Some(RecoveryReport::new(
                        Method::Sat,
                        recovered,
                        inst.truth(),
                        start.elapsed(),
                    )))
                }
            }
        }
        Method::L1 => Ok(recover_l1(inst)),
        Method::Brute => match brute_force_l0(inst.matrix(), inst.measurements())? {
            None => Ok(None),
            Some(recovered) => Ok(Some(RecoveryReport::new(
                Method::Brute,
                recovered,
                inst.truth(),
                start.elapsed(),
            ))),
        },
    }
}

fn trial_seed(master: u64, s: usize, m: usize, trial: usize) -> u64 {
    counter_hash(master, &[TRIAL_TAG, s as u64, m as u64, trial as u64])
}

/// Smallest m in 1..=N for which `method` exactly recovers all `trials`
/// fresh instances generated at that m. Exact recovery means bitwise equality
/// with the truth. Returns `(N, false)` when even m = N fails; instances are
/// keyed by (seed, s, m, trial) only, so every method sees identical sets.
pub fn min_measurements(
    method: Method,
    n: usize,
    s: usize,
    p_b: Ratio<u64>,
    trials: usize,
    seed: u64,
) -> Result<(usize, bool), BenchError> {
    if trials == 0 {
        return Err(BenchError::InvalidParameter("trials must be >= 1".into()));
    }
    for m in 1..=n {
        let mut all_exact = true;
        for trial in 0..trials {
            let inst = gen_instance(n, m, s, p_b, trial_seed(seed, s, m, trial))?;
            let exact = match recover(method, &inst)? {
                Some(report) => report.exact == Some(true),
                None => false,
            };
            if !exact {
                all_exact = false;
                break;
            }
        }
        if all_exact {
            return Ok((m, true));
        }
    }
    Ok((n, false))
}

/// Which experiment a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Oversampling,
    ErrorVsCompression,
}

/// Everything an experiment needs; outputs are a pure function of this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_lo: usize,
    pub n_hi: usize,
    pub sparsity_rates: Vec<Ratio<u64>>,
    pub compression_rates: Vec<Ratio<u64>>,
    pub bernoulli_p: Ratio<u64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials == 0 {
            return Err(BenchError::InvalidParameter("trials must be >= 1".into()));
        }
        if self.n_lo == 0 || self.n_lo > self.n_hi {
            return Err(BenchError::InvalidParameter("need 1 <= n_lo <= n_hi".into()));
        }
        let one = Ratio::from_integer(1);
        for r in self.sparsity_rates.iter().chain(&self.compression_rates) {
            if r.numer() == &0 || *r > one {
                return Err(BenchError::InvalidParameter(format!("rate {r} outside (0, 1]")));
            }
        }
        if self.methods.is_empty() {
            return Err(BenchError::InvalidParameter("method set is empty".into()));
        }
        Ok(())
    }
}

/// The m column carries an integer measurement count (oversampling rows) or
/// an m/N compression rate (error rows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MCell {
    Count(usize),
    Rate(Ratio<u64>),
}

/// One output point of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub n: usize,
    pub s: usize,
    pub p_b: Ratio<u64>,
    pub m: MCell,
    pub metric: f64,
    pub trials: usize,
    pub seed: u64,
}

fn rate_to_count(rate: Ratio<u64>, n: usize) -> usize {
    let scaled = (rate * Ratio::from_integer(n as u64)).round().to_integer() as usize;
    scaled.clamp(1, n)
}

/// m / (s ln(N/s)), the measurement budget normalized by the information
/// scale. Natural logarithm.
pub fn oversampling_factor(n: usize, s: usize, m: usize) -> f64 {
    m as f64 / (s as f64 * (n as f64 / s as f64).ln())
}

/// Minimum measurements for exact recovery, swept over sparsity rates and
/// methods; one row per (rate, method) with the oversampling factor metric.
pub fn oversampling_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    cfg.validate()?;
    let n = cfg.n_hi;
    let cells: Vec<(usize, Ratio<u64>, Method)> = cfg
        .sparsity_rates
        .iter()
        .flat_map(|&rate| cfg.methods.iter().map(move |&method| (rate, method)))
        .enumerate()
        .map(|(i, (rate, method))| (i, rate, method))
        .collect();
    let mut rows: Vec<(usize, ResultRow)> = cells
        .into_par_iter()
        .map(|(idx, rate, method)| {
            let s = rate_to_count(rate, n);
            let (m_min, _found) = min_measurements(method, n, s, cfg.bernoulli_p, cfg.trials, cfg.seed)?;
            Ok((
                idx,
                ResultRow {
                    method,
                    n,
                    s,
                    p_b: cfg.bernoulli_p,
                    m: MCell::Count(m_min),
                    metric: oversampling_factor(n, s, m_min),
                    trials: cfg.trials,
                    seed: cfg.seed,
                },
            ))
        })
        .collect::<Result<_, BenchError>>()?;
    rows.sort_by_key(|(idx, _)| *idx);
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

/// Mean recovery error per compression rate and method. Each trial draws its
/// signal size uniformly from [n_lo, n_hi]; the row's N and s columns record
/// the nominal upper-end configuration.
pub fn error_vs_compression_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    cfg.validate()?;
    let srate = *cfg.sparsity_rates.first().ok_or_else(|| {
        BenchError::InvalidParameter("error experiment needs one sparsity rate".into())
    })?;
    let cells: Vec<(usize, Ratio<u64>, Method)> = cfg
        .compression_rates
        .iter()
        .flat_map(|&rate| cfg.methods.iter().map(move |&method| (rate, method)))
        .enumerate()
        .map(|(i, (rate, method))| (i, rate, method))
        .collect();
    let mut rows: Vec<(usize, ResultRow)> = cells
        .into_par_iter()
        .map(|(idx, rate, method)| {
            let mut total = Ratio::<u64>::from_integer(0);
            for trial in 0..cfg.trials {
                let span = (cfg.n_hi - cfg.n_lo + 1) as u64;
                let key = [SIZE_TAG, *rate.numer(), *rate.denom(), trial as u64];
                let n_trial = cfg.n_lo + (counter_hash(cfg.seed, &key) % span) as usize;
                let s_trial = rate_to_count(srate, n_trial);
                let m_trial = rate_to_count(rate, n_trial);
                let inst_seed = counter_hash(cfg.seed, &[
                    TRIAL_TAG,
                    *rate.numer(),
                    *rate.denom(),
                    trial as u64,
                ]);
                let inst = gen_instance(n_trial, m_trial, s_trial, cfg.bernoulli_p, inst_seed)?;
                let err = match recover(method, &inst)? {
                    Some(report) => {
                        recovery_error(inst.truth().expect("generated"), &report.recovered)
                            .expect("equal lengths")
                    }
                    None => Ratio::from_integer(1),
                };
                total += err;
            }
            let mean = total / Ratio::from_integer(cfg.trials as u64);
            Ok((
                idx,
                ResultRow {
                    method,
                    n: cfg.n_hi,
                    s: rate_to_count(srate, cfg.n_hi),
                    p_b: cfg.bernoulli_p,
                    m: MCell::Rate(rate),
                    metric: mean.to_f64().expect("small rational"),
                    trials: cfg.trials,
                    seed: cfg.seed,
                },
            ))
        })
        .collect::<Result<_, BenchError>>()?;
    rows.sort_by_key(|(idx, _)| *idx);
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

/// Dispatches on the configured experiment kind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    match cfg.kind {
        ExperimentKind::Oversampling => oversampling_experiment(cfg),
        ExperimentKind::ErrorVsCompression => error_vs_compression_experiment(cfg),
    }
}

/// Decimal with 6 significant digits; integers stay as emitted by rounding.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:e}", x.abs());
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = 5 - exp;
    if decimals > 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    }
}

fn rational_sig6(r: Ratio<u64>) -> String {
    format_sig6(r.to_f64().expect("small rational"))
}

fn csv_field(raw: String) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

/// CSV text for a result table: pinned header, RFC 4180 quoting, rationals
/// as decimals with 6 significant digits.
pub fn csv_text(rows: &[ResultRow]) -> String {
    let mut out = String::from("method,N,s,p_B,m,metric,trials,seed\n");
    for row in rows {
        let m = match row.m {
            MCell::Count(c) => c.to_string(),
            MCell::Rate(r) => rational_sig6(r),
        };
        let fields = [
            row.method.tag().to_string(),
            row.n.to_string(),
            row.s.to_string(),
            rational_sig6(row.p_b),
            m,
            format_sig6(row.metric),
            row.trials.to_string(),
            row.seed.to_string(),
        ];
        let line: Vec<String> = fields.into_iter().map(csv_field).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes the table to `path`; I/O failures carry the path.
pub fn write_csv(rows: &[ResultRow], path: &str) -> Result<(), BenchError> {
    std::fs::write(path, csv_text(rows))
        .map_err(|source| BenchError::Io { path: path.to_string(), source })
}

/// Named presets mirroring the benchmark figures.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let r = |n, d| Ratio::new(n, d);
    match name {
        "fig3" => Some(ExperimentConfig {
            kind: ExperimentKind::Oversampling,
            n_lo: 30,
            n_hi: 30,
            sparsity_rates: (1..=5).map(|k| r(k, 10)).collect(),
            compression_rates: Vec::new(),
            bernoulli_p: r(1, 2),
            trials: 10,
            seed: 42,
            methods: vec![Method::Sat, Method::L1],
        }),
        "fig4" => Some(ExperimentConfig {
            kind: ExperimentKind::ErrorVsCompression,
            n_lo: 20,
            n_hi: 30,
            sparsity_rates: vec![r(1, 2)],
            compression_rates: (1..=10).map(|k| r(k, 10)).collect(),
            bernoulli_p: r(1, 2),
            trials: 10,
            seed: 42,
            methods: vec![Method::Sat, Method::L1],
        }),
        "fig5" => Some(ExperimentConfig {
            kind: ExperimentKind::ErrorVsCompression,
            n_lo: 20,
            n_hi: 30,
            sparsity_rates: vec![r(3, 10)],
            compression_rates: (1..=10).map(|k| r(k, 10)).collect(),
            bernoulli_p: r(3, 10),
            trials: 10,
            seed: 42,
            methods: vec![Method::Sat, Method::L1],
        }),
        "smoke" => Some(ExperimentConfig {
            kind: ExperimentKind::Oversampling,
            n_lo: 10,
            n_hi: 10,
            sparsity_rates: vec![r(1, 5), r(2, 5)],
            compression_rates: Vec::new(),
            bernoulli_p: r(1, 2),
            trials: 3,
            seed: 42,
            methods: vec![Method::Sat, Method::L1, Method::Brute],
        }),
        _ => None,
    }
}

/// Exact rational from `p/q`, a decimal like `0.35`, or an integer.
pub fn parse_rational(text: &str) -> Result<Ratio<u64>, BenchError> {
    let bad = || BenchError::Config(format!("cannot parse rational `{text}`"));
    if let Some((num, den)) = text.split_once('/') {
        let n: u64 = num.trim().parse().map_err(|_| bad())?;
        let d: u64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let int_part: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let frac_part: u64 = frac.parse().map_err(|_| bad())?;
        return Ok(Ratio::new(int_part * den + frac_part, den));
    }
    let n: u64 = text.trim().parse().map_err(|_| bad())?;
    Ok(Ratio::from_integer(n))
}

/// Parses the `key=value` experiment config format. Keys: experiment
/// (oversampling|error), n or n_lo/n_hi, rates, compression, pb, trials,
/// seed, methods. Lines starting with `#` are comments.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = ExperimentConfig {
        kind: ExperimentKind::Oversampling,
        n_lo: 30,
        n_hi: 30,
        sparsity_rates: Vec::new(),
        compression_rates: Vec::new(),
        bernoulli_p: Ratio::new(1, 2),
        trials: 10,
        seed: 42,
        methods: vec![Method::Sat, Method::L1],
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let int = |v: &str| -> Result<u64, BenchError> {
            v.parse().map_err(|_| BenchError::Config(format!("line {}: bad integer `{v}`", i + 1)))
        };
        let rates = |v: &str| -> Result<Vec<Ratio<u64>>, BenchError> {
            v.split(',').map(|t| parse_rational(t.trim())).collect()
        };
        match key {
            "experiment" => {
                cfg.kind = match value {
                    "oversampling" => ExperimentKind::Oversampling,
                    "error" => ExperimentKind::ErrorVsCompression,
                    other => {
                        return Err(BenchError::Config(format!(
                            "line {}: unknown experiment `{other}`",
                            i + 1
                        )))
                    }
                }
            }
            "n" => {
                cfg.n_lo = int(value)? as usize;
                cfg.n_hi = cfg.n_lo;
            }
            "n_lo" => cfg.n_lo = int(value)? as usize,
            "n_hi" => cfg.n_hi = int(value)? as usize,
            "rates" => cfg.sparsity_rates = rates(value)?,
            "compression" => cfg.compression_rates = rates(value)?,
            "pb" => cfg.bernoulli_p = parse_rational(value)?,
            "trials" => cfg.trials = int(value)? as usize,
            "seed" => cfg.seed = int(value)?,
            "methods" => {
                cfg.methods = value
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<Method>().map_err(|e| {
                            BenchError::Config(format!("line {}: {e}", i + 1))
                        })
                    })
                    .collect::<Result<_, _>>()?
            }
            other => {
                return Err(BenchError::Config(format!("line {}: unknown key `{other}`", i + 1)))
            }
        }
    }
    if cfg.sparsity_rates.is_empty() {
        return Err(BenchError::Config("config sets no sparsity rates".into()));
    }
    if cfg.kind == ExperimentKind::ErrorVsCompression && cfg.compression_rates.is_empty() {
        return Err(BenchError::Config("error experiment needs compression rates".into()));
    }
    Ok(cfg)
}
