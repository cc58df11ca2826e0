//! Exact sparse recovery for binary compressive sensing.
//!
//! The toolkit reduces the l0 recovery problem over binary signals and binary
//! design matrices to weighted MaxSAT: adder circuits constrain each
//! measurement to equal the Hamming weight of the selected matrix row entries
//! (the hard part), and unit negative soft clauses over the signal variables
//! reward sparsity. An exact CDCL SAT solver plus a solution-improving descent
//! make the optimization complete. An exact rational-simplex l1 baseline, a
//! brute-force oracle and a benchmark harness round out the toolkit.

pub mod bench;
pub mod cnf;
pub mod encoder;
pub mod l1baseline;
pub mod maxsat;
pub mod model;
pub mod satsolver;

#[cfg(test)]
pub(crate) mod testutil;
