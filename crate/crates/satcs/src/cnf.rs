//! Propositional formulas in clausal form: literals, clauses, plain CNF,
//! weighted CNF with hard/soft split, evaluation semantics, and the DIMACS
//! CNF / classic WCNF text formats.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("model covers {model_vars} variables but the formula has {formula_vars}")]
    PartialModel { model_vars: usize, formula_vars: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("DIMACS parse error at line {line}: {msg}")]
pub struct DimacsError {
    pub line: usize,
    pub msg: String,
}

/// A variable (1-based) or its negation, packed as `var << 1 | negated`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal(u32);

impl Literal {
    pub fn new(variable: usize, positive: bool) -> Self {
        assert!(variable >= 1, "variables are 1-based");
        assert!(variable < (1 << 30), "variable index too large");
        Literal((variable as u32) << 1 | u32::from(!positive))
    }

    pub fn positive(variable: usize) -> Self {
        Self::new(variable, true)
    }

    pub fn negative(variable: usize) -> Self {
        Self::new(variable, false)
    }

    pub fn variable(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Signed DIMACS form: +var for positive, -var for negative.
    pub fn to_dimacs(self) -> i64 {
        let v = self.variable() as i64;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        Some(Self::new(value.unsigned_abs() as usize, value > 0))
    }

    /// True under `m` iff the underlying variable agrees with the polarity.
    pub fn satisfied_by(self, m: &Model) -> bool {
        m.value(self.variable()) == self.is_positive()
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        Literal(self.0 ^ 1)
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Disjunction of literals. The empty clause is permitted and unsatisfiable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    lits: Vec<Literal>,
}

impl Clause {
    pub fn new(lits: Vec<Literal>) -> Self {
        Self { lits }
    }

    pub fn empty() -> Self {
        Self { lits: Vec::new() }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn satisfied_by(&self, m: &Model) -> bool {
        self.lits.iter().any(|l| l.satisfied_by(m))
    }

    /// Literals with duplicates removed, first occurrence order kept.
    fn deduped(&self) -> Vec<Literal> {
        let mut seen = Vec::new();
        for &l in &self.lits {
            if !seen.contains(&l) {
                seen.push(l);
            }
        }
        seen
    }
}

impl From<Vec<Literal>> for Clause {
    fn from(lits: Vec<Literal>) -> Self {
        Clause::new(lits)
    }
}

/// Conjunction of clauses over variables `1..=num_vars`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: usize) -> Self {
        assert!(num_vars >= 1, "formulas have at least one variable");
        Self { num_vars, clauses: Vec::new() }
    }

    pub fn from_clauses(num_vars: usize, clauses: Vec<Clause>) -> Self {
        let mut f = Self::new(num_vars);
        for c in clauses {
            f.add_clause(c);
        }
        f
    }

    pub fn add_clause(&mut self, clause: Clause) {
        debug_assert!(
            clause.literals().iter().all(|l| l.variable() <= self.num_vars),
            "literal out of variable range"
        );
        self.clauses.push(clause);
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }
}

/// Weighted CNF: hard clauses must hold, soft clauses carry falsification weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedCnf {
    num_vars: usize,
    hard: Vec<Clause>,
    soft: Vec<(Clause, u64)>,
}

impl WeightedCnf {
    pub fn new(num_vars: usize) -> Self {
        assert!(num_vars >= 1, "formulas have at least one variable");
        Self { num_vars, hard: Vec::new(), soft: Vec::new() }
    }

    pub fn add_hard(&mut self, clause: Clause) {
        debug_assert!(clause.literals().iter().all(|l| l.variable() <= self.num_vars));
        self.hard.push(clause);
    }

    pub fn add_soft(&mut self, clause: Clause, weight: u64) {
        assert!(weight >= 1, "soft weights are positive");
        debug_assert!(clause.literals().iter().all(|l| l.variable() <= self.num_vars));
        self.soft.push((clause, weight));
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn hard(&self) -> &[Clause] {
        &self.hard
    }

    pub fn soft(&self) -> &[(Clause, u64)] {
        &self.soft
    }

    /// Serialization weight marking hard clauses: one more than the soft total.
    pub fn top(&self) -> u64 {
        1 + self.soft.iter().map(|(_, w)| w).sum::<u64>()
    }

    pub fn hard_formula(&self) -> CnfFormula {
        CnfFormula::from_clauses(self.num_vars, self.hard.clone())
    }
}

/// Total truth assignment over variables `1..=num_vars`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn new(values: Vec<bool>) -> Self {
        Self { values }
    }

    pub fn all_false(num_vars: usize) -> Self {
        Self { values: vec![false; num_vars] }
    }

    /// Model encoding the low `num_vars` bits of `pattern`; handy for enumeration.
    pub fn from_pattern(num_vars: usize, pattern: u64) -> Self {
        assert!(num_vars <= 63);
        Self { values: (0..num_vars).map(|i| pattern >> i & 1 == 1).collect() }
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, variable: usize) -> bool {
        self.values[variable - 1]
    }

    pub fn set(&mut self, variable: usize, value: bool) {
        self.values[variable - 1] = value;
    }
}

/// True iff every clause of `f` has a satisfied literal under `m`.
pub fn evaluate(f: &CnfFormula, m: &Model) -> Result<bool, CnfError> {
    if m.num_vars() < f.num_vars() {
        return Err(CnfError::PartialModel { model_vars: m.num_vars(), formula_vars: f.num_vars() });
    }
    Ok(f.clauses().iter().all(|c| c.satisfied_by(m)))
}

/// Sum of the weights of soft clauses falsified by `m`. Hard clauses are ignored.
pub fn soft_cost(w: &WeightedCnf, m: &Model) -> Result<u64, CnfError> {
    if m.num_vars() < w.num_vars() {
        return Err(CnfError::PartialModel { model_vars: m.num_vars(), formula_vars: w.num_vars() });
    }
    Ok(w.soft()
        .iter()
        .filter(|(c, _)| !c.satisfied_by(m))
        .map(|&(_, weight)| weight)
        .sum())
}

fn push_clause_line(out: &mut String, prefix: Option<u64>, clause: &Clause) {
    if let Some(w) = prefix {
        out.push_str(&w.to_string());
        out.push(' ');
    }
    for l in clause.deduped() {
        out.push_str(&l.to_dimacs().to_string());
        out.push(' ');
    }
    out.push_str("0\n");
}

/// DIMACS CNF text. Duplicate literals within a clause are dropped on output.
pub fn emit_dimacs_cnf(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars(), f.clauses().len());
    for c in f.clauses() {
        push_clause_line(&mut out, None, c);
    }
    out
}

/// Classic DIMACS WCNF text; hard clauses carry the top weight, emitted first.
pub fn emit_wcnf(w: &WeightedCnf) -> String {
    let top = w.top();
    let mut out = format!("p wcnf {} {} {}\n", w.num_vars(), w.hard().len() + w.soft().len(), top);
    for c in w.hard() {
        push_clause_line(&mut out, Some(top), c);
    }
    for (c, weight) in w.soft() {
        push_clause_line(&mut out, Some(*weight), c);
    }
    out
}

/// Token stream over DIMACS text tracking 1-based line numbers.
struct Tokens<'a> {
    inner: std::iter::Peekable<std::vec::IntoIter<(usize, &'a str)>>,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('c') {
                continue;
            }
            for t in line.split_whitespace() {
                toks.push((i + 1, t));
            }
        }
        Self { inner: toks.into_iter().peekable(), last_line: 1 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let t = self.inner.next();
        if let Some((line, _)) = t {
            self.last_line = line;
        }
        t
    }

    fn peek_line(&mut self) -> Option<usize> {
        self.inner.peek().map(|&(line, _)| line)
    }
}

fn parse_int<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T, DimacsError> {
    tok.parse()
        .map_err(|_| DimacsError { line, msg: format!("bad {what} `{tok}`") })
}

fn parse_clause_body(
    toks: &mut Tokens,
    num_vars: usize,
    start_line: usize,
) -> Result<Clause, DimacsError> {
    let mut lits = Vec::new();
    loop {
        let (line, tok) = toks.next().ok_or(DimacsError {
            line: start_line,
            msg: "clause not terminated by 0".into(),
        })?;
        let value: i64 = parse_int(line, tok, "literal")?;
        match Literal::from_dimacs(value) {
            None => return Ok(Clause::new(lits)),
            Some(l) => {
                if l.variable() > num_vars {
                    return Err(DimacsError {
                        line,
                        msg: format!("literal {value} exceeds declared variable count {num_vars}"),
                    });
                }
                lits.push(l);
            }
        }
    }
}

/// Parses DIMACS CNF; errors carry 1-based line numbers.
pub fn parse_dimacs_cnf(text: &str) -> Result<CnfFormula, DimacsError> {
    let mut toks = Tokens::new(text);
    let (line, p) = toks.next().ok_or(DimacsError { line: 1, msg: "missing header".into() })?;
    let kind = toks.next();
    if p != "p" || kind.map(|(_, t)| t) != Some("cnf") {
        return Err(DimacsError { line, msg: "expected `p cnf <vars> <clauses>` header".into() });
    }
    let (l1, t1) = toks.next().ok_or(DimacsError { line, msg: "truncated header".into() })?;
    let num_vars: usize = parse_int(l1, t1, "variable count")?;
    let (l2, t2) = toks.next().ok_or(DimacsError { line, msg: "truncated header".into() })?;
    let num_clauses: usize = parse_int(l2, t2, "clause count")?;
    if num_vars == 0 {
        return Err(DimacsError { line: l1, msg: "variable count must be >= 1".into() });
    }

    let mut f = CnfFormula::new(num_vars);
    for _ in 0..num_clauses {
        let start = toks.peek_line().ok_or(DimacsError {
            line: toks.last_line,
            msg: format!("expected {num_clauses} clauses"),
        })?;
        f.add_clause(parse_clause_body(&mut toks, num_vars, start)?);
    }
    if let Some((line, tok)) = toks.next() {
        return Err(DimacsError { line, msg: format!("unexpected trailing token `{tok}`") });
    }
    Ok(f)
}

/// Parses classic WCNF; weight == top marks hard, weight > top is an error.
pub fn parse_wcnf(text: &str) -> Result<WeightedCnf, DimacsError> {
    let mut toks = Tokens::new(text);
    let (line, p) = toks.next().ok_or(DimacsError { line: 1, msg: "missing header".into() })?;
    let kind = toks.next();
    if p != "p" || kind.map(|(_, t)| t) != Some("wcnf") {
        return Err(DimacsError {
            line,
            msg: "expected `p wcnf <vars> <clauses> <top>` header".into(),
        });
    }
    let (l1, t1) = toks.next().ok_or(DimacsError { line, msg: "truncated header".into() })?;
    let num_vars: usize = parse_int(l1, t1, "variable count")?;
    let (l2, t2) = toks.next().ok_or(DimacsError { line, msg: "truncated header".into() })?;
    let num_clauses: usize = parse_int(l2, t2, "clause count")?;
    let (l3, t3) = toks.next().ok_or(DimacsError { line, msg: "truncated header".into() })?;
    let top: u64 = parse_int(l3, t3, "top weight")?;
    if num_vars == 0 {
        return Err(DimacsError { line: l1, msg: "variable count must be >= 1".into() });
    }
    if top == 0 {
        return Err(DimacsError { line: l3, msg: "top weight must be >= 1".into() });
    }

    let mut w = WeightedCnf::new(num_vars);
    for _ in 0..num_clauses {
        let start = toks.peek_line().ok_or(DimacsError {
            line: toks.last_line,
            msg: format!("expected {num_clauses} clauses"),
        })?;
        let (wline, wtok) = toks.next().unwrap();
        let weight: u64 = parse_int(wline, wtok, "clause weight")?;
        if weight == 0 {
            return Err(DimacsError { line: wline, msg: "clause weight must be >= 1".into() });
        }
        if weight > top {
            return Err(DimacsError {
                line: wline,
                msg: format!("soft weight {weight} exceeds top {top}"),
            });
        }
        let clause = parse_clause_body(&mut toks, num_vars, start)?;
        if weight == top {
            w.add_hard(clause);
        } else {
            w.add_soft(clause, weight);
        }
    }
    if let Some((line, tok)) = toks.next() {
        return Err(DimacsError { line, msg: format!("unexpected trailing token `{tok}`") });
    }
    Ok(w)
}
