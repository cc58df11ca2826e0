//! Reduction from a sensing instance to weighted CNF. Each measurement row
//! becomes a population-count adder tree over the selected signal variables
//! (hard clauses); sparsity is rewarded by one unit negative soft clause per
//! signal variable. Hard clauses dominate any soft total on serialization, so
//! the optimum of the weighted formula is exactly the sparsest feasible signal.

use crate::cnf::{Clause, Literal, Model, WeightedCnf};
use crate::model::{BinarySignal, SensingInstance};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("population count requires at least one input literal")]
    EmptyInput,
}

/// Little-endian vector of literals denoting an unsigned integer.
/// `max_value` is a proven upper bound on the denoted value in any model of
/// the accompanying context clauses; adders use it to avoid dead carry bits.
#[derive(Debug, Clone)]
pub struct BitVector {
    bits: Vec<Literal>,
    max_value: u64,
}

impl BitVector {
    /// Wraps raw literals; nothing is known about them, so the bound is full range.
    pub fn from_literals(bits: Vec<Literal>) -> Self {
        assert!(!bits.is_empty() && bits.len() < 63);
        let max_value = (1u64 << bits.len()) - 1;
        Self { bits, max_value }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bit(&self, i: usize) -> Literal {
        self.bits[i]
    }

    pub fn bits(&self) -> &[Literal] {
        &self.bits
    }

    pub fn max_value(&self) -> u64 {
        self.max_value
    }

    /// Value denoted under a total model.
    pub fn value_under(&self, m: &Model) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, l)| l.satisfied_by(m))
            .map(|(i, _)| 1u64 << i)
            .sum()
    }
}

/// Accumulates hard clauses and fresh Tseitin variables during one encoding.
/// Signal variables occupy indices `1..=num_inputs`.
#[derive(Debug)]
pub struct EncoderContext {
    next_var: usize,
    clauses: Vec<Clause>,
    num_inputs: usize,
}

impl EncoderContext {
    pub fn new(num_inputs: usize) -> Self {
        assert!(num_inputs >= 1);
        Self { next_var: num_inputs + 1, clauses: Vec::new(), num_inputs }
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    /// The signal variable for column `j` (0-based column, 1-based variable).
    pub fn input_literal(&self, j: usize) -> Literal {
        assert!(j < self.num_inputs);
        Literal::positive(j + 1)
    }

    pub fn num_vars(&self) -> usize {
        self.next_var - 1
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn into_clauses(self) -> Vec<Clause> {
        self.clauses
    }

    fn fresh(&mut self) -> Literal {
        let v = self.next_var;
        self.next_var += 1;
        Literal::positive(v)
    }

    fn add(&mut self, lits: Vec<Literal>) {
        self.clauses.push(Clause::new(lits));
    }

    /// out <-> XOR of ins (2 or 3 inputs): one clause per input pattern.
    fn define_xor(&mut self, out: Literal, ins: &[Literal]) {
        debug_assert!(matches!(ins.len(), 2 | 3));
        for pattern in 0..1u32 << ins.len() {
            let parity = pattern.count_ones() % 2 == 1;
            let mut lits: Vec<Literal> = ins
                .iter()
                .enumerate()
                .map(|(i, &l)| if pattern >> i & 1 == 1 { !l } else { l })
                .collect();
            lits.push(if parity { out } else { !out });
            self.add(lits);
        }
    }

    /// out <-> a AND b (3 clauses).
    fn define_and(&mut self, out: Literal, a: Literal, b: Literal) {
        self.add(vec![!a, !b, out]);
        self.add(vec![a, !out]);
        self.add(vec![b, !out]);
    }

    /// out <-> at least two of a, b, c (6 clauses).
    fn define_majority(&mut self, out: Literal, a: Literal, b: Literal, c: Literal) {
        self.add(vec![!a, !b, out]);
        self.add(vec![!a, !c, out]);
        self.add(vec![!b, !c, out]);
        self.add(vec![a, b, !out]);
        self.add(vec![a, c, !out]);
        self.add(vec![b, c, !out]);
    }

    /// A fresh literal constrained false; denotes the value zero.
    fn constant_zero(&mut self) -> BitVector {
        let z = self.fresh();
        self.add(vec![!z]);
        BitVector { bits: vec![z], max_value: 0 }
    }
}

/// sum = a XOR b, carry = a AND b over fresh variables.
pub fn encode_half_adder(ctx: &mut EncoderContext, a: Literal, b: Literal) -> (Literal, Literal) {
    let sum = ctx.fresh();
    let carry = ctx.fresh();
    ctx.define_xor(sum, &[a, b]);
    ctx.define_and(carry, a, b);
    (sum, carry)
}

/// sum = a XOR b XOR cin, carry = majority(a, b, cin) over fresh variables.
pub fn encode_full_adder(
    ctx: &mut EncoderContext,
    a: Literal,
    b: Literal,
    cin: Literal,
) -> (Literal, Literal) {
    let sum = ctx.fresh();
    let carry = ctx.fresh();
    ctx.define_xor(sum, &[a, b, cin]);
    ctx.define_majority(carry, a, b, cin);
    (sum, carry)
}

/// Ripple addition of two bit vectors; the shorter operand is zero-extended.
/// The result denotes value(u) + value(v) in every model of the context.
/// Positions with a single incoming signal pass it through unchanged, and no
/// carry is generated past the width needed for `u.max_value + v.max_value`,
/// so a full-range operand pair yields width `max(widths) + 1`.
pub fn encode_ripple_add(ctx: &mut EncoderContext, u: &BitVector, v: &BitVector) -> BitVector {
    let max_value = u.max_value + v.max_value;
    let out_width = bit_width(max_value);
    let mut bits = Vec::with_capacity(out_width);
    let mut carry: Option<Literal> = None;
    for pos in 0..out_width {
        let mut ops: Vec<Literal> = Vec::with_capacity(3);
        if pos < u.width() {
            ops.push(u.bit(pos));
        }
        if pos < v.width() {
            ops.push(v.bit(pos));
        }
        if let Some(c) = carry.take() {
            ops.push(c);
        }
        let last = pos + 1 == out_width;
        match ops.len() {
            0 => bits.push(ctx.constant_zero().bit(0)),
            1 => bits.push(ops[0]),
            2 => {
                if last {
                    // The carry out of the top position is unreachable under
                    // the max-value bound; only the sum bit is defined.
                    let sum = ctx.fresh();
                    ctx.define_xor(sum, &ops);
                    bits.push(sum);
                } else {
                    let (sum, c) = encode_half_adder(ctx, ops[0], ops[1]);
                    bits.push(sum);
                    carry = Some(c);
                }
            }
            _ => {
                if last {
                    let sum = ctx.fresh();
                    ctx.define_xor(sum, &ops);
                    bits.push(sum);
                } else {
                    let (sum, c) = encode_full_adder(ctx, ops[0], ops[1], ops[2]);
                    bits.push(sum);
                    carry = Some(c);
                }
            }
        }
    }
    BitVector { bits, max_value }
}

fn bit_width(value: u64) -> usize {
    match value {
        0 => 1,
        v => 64 - v.leading_zeros() as usize,
    }
}

/// Hamming-weight circuit: a left-to-right balanced adder tree over the input
/// literals. Result width is exactly `floor(log2 k) + 1` for k inputs.
pub fn encode_popcount(
    ctx: &mut EncoderContext,
    inputs: &[Literal],
) -> Result<BitVector, EncodeError> {
    if inputs.is_empty() {
        return Err(EncodeError::EmptyInput);
    }
    let mut level: Vec<BitVector> = inputs
        .iter()
        .map(|&l| BitVector { bits: vec![l], max_value: 1 })
        .collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            match pair {
                [u, v] => next.push(encode_ripple_add(ctx, u, v)),
                [odd] => next.push(odd.clone()), // promoted unchanged
                _ => unreachable!(),
            }
        }
        level = next;
    }
    Ok(level.pop().expect("nonempty level"))
}

/// Population count over the signal variables selected by one matrix row.
/// An empty support yields a width-1 constant-zero vector.
pub fn encode_row(ctx: &mut EncoderContext, support: &[usize]) -> BitVector {
    if support.is_empty() {
        return ctx.constant_zero();
    }
    let lits: Vec<Literal> = support.iter().map(|&j| ctx.input_literal(j)).collect();
    encode_popcount(ctx, &lits).expect("nonempty support")
}

/// Fixes `z` to the constant `c` with unit clauses over its bits. A constant
/// beyond the representable range adds the empty clause: the formula becomes
/// unsatisfiable rather than erroring out.
pub fn constrain_equal_constant(ctx: &mut EncoderContext, z: &BitVector, c: u64) {
    if z.width() < 64 && c >> z.width() != 0 {
        ctx.add(Vec::new());
        return;
    }
    for (i, &bit) in z.bits().iter().enumerate() {
        if c >> i & 1 == 1 {
            ctx.add(vec![bit]);
        } else {
            ctx.add(vec![!bit]);
        }
    }
}

/// Maps signal indices (1-based) to formula variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableMap {
    entries: Vec<(usize, usize)>,
}

impl VariableMap {
    pub fn identity(n: usize) -> Self {
        Self { entries: (1..=n).map(|j| (j, j)).collect() }
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    /// Sidecar text format: one `x <j> <var>` line per signal index.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for &(j, var) in &self.entries {
            out.push_str(&format!("x {j} {var}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 3 || fields[0] != "x" {
                return Err(format!("line {}: expected `x <j> <var>`", i + 1));
            }
            let j = fields[1].parse().map_err(|_| format!("line {}: bad index", i + 1))?;
            let var = fields[2].parse().map_err(|_| format!("line {}: bad variable", i + 1))?;
            entries.push((j, var));
        }
        Ok(Self { entries })
    }
}

/// The weighted formula for an instance plus its signal variable map.
#[derive(Debug, Clone)]
pub struct EncodedInstance {
    pub wcnf: WeightedCnf,
    pub var_map: VariableMap,
}

/// Builds the weighted CNF for an instance: variables `1..=N` are the signal;
/// hard clauses constrain every row's popcount to the measured value; soft
/// clauses are the N unit negations, weight 1 each, so the serialized top
/// weight is N + 1.
pub fn encode_instance(inst: &SensingInstance) -> EncodedInstance {
    let n = inst.num_cols();
    let mut ctx = EncoderContext::new(n);
    for i in 0..inst.num_rows() {
        let support = inst.matrix().row_support(i);
        let z = encode_row(&mut ctx, &support);
        constrain_equal_constant(&mut ctx, &z, inst.measurements().value(i) as u64);
    }
    let mut wcnf = WeightedCnf::new(ctx.num_vars());
    for clause in ctx.into_clauses() {
        wcnf.add_hard(clause);
    }
    for j in 0..n {
        wcnf.add_soft(Clause::new(vec![Literal::negative(j + 1)]), 1);
    }
    EncodedInstance { wcnf, var_map: VariableMap::identity(n) }
}

/// Reads the signal bits off a model: bit j is the value of variable j+1.
pub fn decode_model(m: &Model, n: usize) -> BinarySignal {
    BinarySignal::new((1..=n).map(|v| m.value(v)).collect()).expect("n >= 1")
}
