//! Exhaustive enumeration over free binaries, each leaf solved as an LP.

use rayon::prelude::*;

use super::simplex::{DenseLp, LpStatus};
use crate::model::{MilpModel, Sense};
use crate::{Error, Result};

pub const DEFAULT_ORACLE_CAP: usize = 16;
const TIE_TOL: f64 = 1e-9;
/// Slack allowed on rows checked before a leaf LP is set up.
const SCREEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal {
        objective: f64,
        x: Vec<f64>,
        /// Values of the enumerated binaries, in model order.
        assignment: Vec<u8>,
    },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub outcome: OracleOutcome,
    pub free_binaries: usize,
    pub leaves: usize,
}

/// Solves `model` to proven optimality by enumerating every assignment of its
/// free binaries. Ties within `1e-9` go to the lexicographically smallest
/// assignment.
pub fn oracle_solve(model: &MilpModel, cap: usize) -> Result<OracleResult> {
    let free = model.free_binaries();
    if free.len() > cap {
        return Err(Error::OracleCapExceeded { free: free.len(), cap });
    }
    let base = DenseLp::from_model(model);
    let screens = binary_screens(model, &free);
    let leaves = 1usize << free.len();
    let results: Vec<(u64, LpStatus)> = (0..leaves as u64)
        .into_par_iter()
        .map(|mask| {
            // Bit k is the k-th free binary, most significant first, so mask
            // order is lexicographic order of assignments.
            let bit = |k: usize| ((mask >> (free.len() - 1 - k)) & 1) as f64;
            if screens.iter().any(|s| !s.holds(&bit)) {
                return (mask, LpStatus::Infeasible);
            }
            let mut lp = base.clone();
            for (k, &j) in free.iter().enumerate() {
                lp.lower[j] = bit(k);
                lp.upper[j] = bit(k);
            }
            (mask, lp.solve())
        })
        .collect();

    let mut best: Option<(u64, f64, Vec<f64>)> = None;
    for (mask, status) in results {
        match status {
            LpStatus::Optimal { objective, x } => {
                let better = match &best {
                    None => true,
                    Some((_, b, _)) => objective < b - TIE_TOL,
                };
                if better {
                    best = Some((mask, objective, x));
                }
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                return Ok(OracleResult {
                    outcome: OracleOutcome::Unbounded,
                    free_binaries: free.len(),
                    leaves,
                });
            }
            LpStatus::Failed(msg) => {
                return Err(Error::Solver(format!("oracle leaf {mask:b}: {msg}")));
            }
        }
    }
    let outcome = match best {
        None => OracleOutcome::Infeasible,
        Some((mask, objective, x)) => OracleOutcome::Optimal {
            objective,
            x,
            assignment: (0..free.len())
                .map(|k| ((mask >> (free.len() - 1 - k)) & 1) as u8)
                .collect(),
        },
    };
    Ok(OracleResult {
        outcome,
        free_binaries: free.len(),
        leaves,
    })
}

/// A row touching only free binaries and fixed variables, so a leaf's
/// assignment decides it without an LP.
struct Screen {
    terms: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
}

impl Screen {
    fn holds(&self, bit: &impl Fn(usize) -> f64) -> bool {
        let act: f64 = self.terms.iter().map(|&(k, a)| a * bit(k)).sum();
        match self.sense {
            Sense::Le => act <= self.rhs + SCREEN_TOL,
            Sense::Ge => act >= self.rhs - SCREEN_TOL,
            Sense::Eq => (act - self.rhs).abs() <= SCREEN_TOL,
        }
    }
}

fn binary_screens(model: &MilpModel, free: &[usize]) -> Vec<Screen> {
    let pos: std::collections::HashMap<usize, usize> = free.iter().enumerate().map(|(k, &j)| (j, k)).collect();
    model
        .rows
        .iter()
        .filter_map(|r| {
            let mut terms = Vec::new();
            let mut rhs = r.rhs;
            for &(j, a) in &r.coeffs {
                if let Some(&k) = pos.get(&j) {
                    terms.push((k, a));
                } else if model.vars[j].is_fixed() {
                    rhs -= a * model.vars[j].lower;
                } else {
                    return None;
                }
            }
            Some(Screen {
                terms,
                sense: r.sense,
                rhs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Tag, VarKind};

    #[test]
    fn knapsack_by_enumeration() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4 -> a, c (8).
        let mut m = MilpModel::new("k");
        let v: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|n| m.add_var((*n).into(), VarKind::Binary, 0.0, 1.0, None).unwrap())
            .collect();
        m.add_row(
            "cap".into(),
            Tag::Budget,
            vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)],
            Sense::Le,
            4.0,
        );
        m.objective = vec![(v[0], -5.0), (v[1], -4.0), (v[2], -3.0)];
        let r = oracle_solve(&m, 16).unwrap();
        match r.outcome {
            OracleOutcome::Optimal {
                objective, assignment, ..
            } => {
                assert!((objective + 8.0).abs() < 1e-9);
                assert_eq!(assignment, vec![1, 0, 1]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(r.leaves, 8);
    }

    #[test]
    fn ties_pick_smallest_assignment() {
        let mut m = MilpModel::new("t");
        let a = m.add_var("a".into(), VarKind::Binary, 0.0, 1.0, None).unwrap();
        let b = m.add_var("b".into(), VarKind::Binary, 0.0, 1.0, None).unwrap();
        m.add_row("one".into(), Tag::Budget, vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.0);
        let r = oracle_solve(&m, 16).unwrap();
        match r.outcome {
            OracleOutcome::Optimal { assignment, .. } => assert_eq!(assignment, vec![0, 1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cap_is_enforced() {
        let mut m = MilpModel::new("c");
        for k in 0..3 {
            m.add_var(format!("z{k}"), VarKind::Binary, 0.0, 1.0, None).unwrap();
        }
        let err = oracle_solve(&m, 2).unwrap_err();
        assert!(err.to_string().contains("oracle cap exceeded"), "{err}");
    }
}
