//! Test-only oracles shared by unit tests. They deliberately avoid the CDCL
//! solver so that circuit encodings can be checked by an independent path.

use crate::cnf::{Clause, Literal};

/// Unit-propagation oracle: fixes the given literals, propagates to a
/// fixpoint, and reports the resulting assignment or a conflict. Tseitin
/// circuits propagate to a total assignment from fixed inputs, so for them
/// this decides extension existence without search.
pub fn propagate_extension(
    num_vars: usize,
    clauses: &[Clause],
    fixed: &[Literal],
) -> Option<Vec<Option<bool>>> {
    let mut assign: Vec<Option<bool>> = vec![None; num_vars + 1];
    for &l in fixed {
        assign[l.variable()] = Some(l.is_positive());
    }
    loop {
        let mut changed = false;
        for c in clauses {
            let mut unassigned = Vec::new();
            let mut satisfied = false;
            for &l in c.literals() {
                match assign[l.variable()] {
                    Some(v) if v == l.is_positive() => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => unassigned.push(l),
                }
            }
            if satisfied {
                continue;
            }
            match unassigned.len() {
                0 => return None,
                1 => {
                    let l = unassigned[0];
                    assign[l.variable()] = Some(l.is_positive());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return Some(assign);
        }
    }
}
