//! Transport plans: integral per-slice moves, their marginals, and the plan
//! file format.

use crate::instance::{Instance, VertexId};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Exact plan cost as a scaled rational: `value = scaled / denom`.
#[derive(Debug, Clone)]
pub struct PlanCost {
    pub scaled: BigInt,
    pub denom: u64,
}

impl PlanCost {
    pub fn zero(denom: u64) -> PlanCost {
        PlanCost {
            scaled: BigInt::from(0),
            denom,
        }
    }

    pub fn from_scaled(scaled: impl Into<BigInt>, denom: u64) -> PlanCost {
        PlanCost {
            scaled: scaled.into(),
            denom,
        }
    }

    pub fn to_f64(&self) -> f64 {
        // Good to f64 precision for every cost that fits; huge exponential
        // costs degrade gracefully to the nearest float.
        let (sign, digits) = self.scaled.to_u64_digits();
        let mut value = 0.0f64;
        for &d in digits.iter().rev() {
            value = value * 1.8446744073709552e19 + d as f64;
        }
        if sign == num_bigint::Sign::Minus {
            value = -value;
        }
        value / self.denom as f64
    }
}

impl PartialEq for PlanCost {
    fn eq(&self, other: &Self) -> bool {
        // Cross-multiplied comparison keeps exactness across denominators.
        &self.scaled * BigInt::from(other.denom) == &other.scaled * BigInt::from(self.denom)
    }
}
impl Eq for PlanCost {}

impl PartialOrd for PlanCost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PlanCost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.scaled * BigInt::from(other.denom)).cmp(&(&other.scaled * BigInt::from(self.denom)))
    }
}

impl std::fmt::Display for PlanCost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// An executable transport: `slices[t-1]` lists the unit moves `(i, j)` taken
/// between time `t-1` and `t`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportPlan {
    horizon: usize,
    slices: Vec<Vec<(VertexId, VertexId)>>,
    /// Occupancy vectors q_0..q_T implied by the slices (empty when T = 0).
    marginals: Vec<Vec<u32>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("plan has {got} slices but declares horizon {horizon}")]
    SliceCountMismatch { horizon: usize, got: usize },
    #[error("vertex {0} out of range (K = {1})")]
    VertexOutOfRange(usize, usize),
}

impl TransportPlan {
    /// An empty plan over horizon zero.
    pub fn empty() -> TransportPlan {
        TransportPlan {
            horizon: 0,
            slices: Vec::new(),
            marginals: Vec::new(),
        }
    }

    pub fn new(
        vertex_count: usize,
        slices: Vec<Vec<(VertexId, VertexId)>>,
    ) -> Result<TransportPlan, PlanError> {
        let horizon = slices.len();
        let mut sorted = slices;
        for slice in &mut sorted {
            slice.sort_unstable();
            for &(i, j) in slice.iter() {
                if i >= vertex_count {
                    return Err(PlanError::VertexOutOfRange(i, vertex_count));
                }
                if j >= vertex_count {
                    return Err(PlanError::VertexOutOfRange(j, vertex_count));
                }
            }
        }
        let marginals = compute_marginals(vertex_count, &sorted);
        Ok(TransportPlan {
            horizon,
            slices: sorted,
            marginals,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Moves of slice `t` (1-based time index).
    pub fn slice(&self, t: usize) -> &[(VertexId, VertexId)] {
        &self.slices[t - 1]
    }

    pub fn slices(&self) -> &[Vec<(VertexId, VertexId)>] {
        &self.slices
    }

    /// Occupancy counts at time `t` (0..=T). Empty plan has no marginals.
    pub fn marginal(&self, t: usize) -> &[u32] {
        &self.marginals[t]
    }

    pub fn marginals(&self) -> &[Vec<u32>] {
        &self.marginals
    }

    /// Largest time index carrying a non-wait move.
    pub fn makespan(&self) -> usize {
        for t in (1..=self.horizon).rev() {
            if self.slices[t - 1].iter().any(|&(i, j)| i != j) {
                return t;
            }
        }
        0
    }

    /// Total number of non-wait unit moves.
    pub fn move_count(&self) -> usize {
        self.slices
            .iter()
            .map(|s| s.iter().filter(|&&(i, j)| i != j).count())
            .sum()
    }

    /// Exact cost of the plan under the instance's cost table.
    pub fn cost(&self, instance: &Instance) -> PlanCost {
        let mut total = BigInt::from(0);
        for (idx, slice) in self.slices.iter().enumerate() {
            let t = idx + 1;
            for &(i, j) in slice {
                if let Some(e) = instance.edge_index(i, j) {
                    total += instance.costs().cost_big(e, t);
                }
            }
        }
        PlanCost::from_scaled(total, instance.costs().denom)
    }
}

fn compute_marginals(vertex_count: usize, slices: &[Vec<(usize, usize)>]) -> Vec<Vec<u32>> {
    if slices.is_empty() {
        return Vec::new();
    }
    let mut marginals = Vec::with_capacity(slices.len() + 1);
    let mut q0 = vec![0u32; vertex_count];
    for &(i, _) in &slices[0] {
        q0[i] += 1;
    }
    marginals.push(q0);
    for slice in slices {
        let mut q = vec![0u32; vertex_count];
        for &(_, j) in slice {
            q[j] += 1;
        }
        marginals.push(q);
    }
    marginals
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    horizon: usize,
    slices: Vec<PlanSlice>,
    cost: f64,
    makespan: usize,
}

#[derive(Serialize, Deserialize)]
struct PlanSlice {
    t: usize,
    moves: Vec<[usize; 2]>,
}

#[derive(Debug, Error)]
pub enum PlanIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Canonical plan file text: `{horizon, slices, cost, makespan}`.
pub fn plan_to_json(plan: &TransportPlan, cost: &PlanCost) -> String {
    let file = PlanFile {
        horizon: plan.horizon(),
        slices: plan
            .slices
            .iter()
            .enumerate()
            .map(|(idx, moves)| PlanSlice {
                t: idx + 1,
                moves: moves.iter().map(|&(i, j)| [i, j]).collect(),
            })
            .collect(),
        cost: cost.to_f64(),
        makespan: plan.makespan(),
    };
    serde_json::to_string_pretty(&file).expect("plan serialization cannot fail")
}

pub fn save_plan(plan: &TransportPlan, cost: &PlanCost, path: impl AsRef<Path>) -> Result<(), PlanIoError> {
    std::fs::write(path, plan_to_json(plan, cost))?;
    Ok(())
}

/// Load a plan file; the declared cost/makespan are returned as stated, the
/// slices are re-validated against `vertex_count`.
pub fn load_plan(
    path: impl AsRef<Path>,
    vertex_count: usize,
) -> Result<(TransportPlan, f64), PlanIoError> {
    let text = std::fs::read_to_string(path)?;
    let file: PlanFile = serde_json::from_str(&text).map_err(|e| PlanIoError::Parse(e.to_string()))?;
    let mut slices = vec![Vec::new(); file.horizon];
    for slice in file.slices {
        if slice.t == 0 || slice.t > file.horizon {
            return Err(PlanIoError::Parse(format!(
                "slice index t={} outside horizon {}",
                slice.t, file.horizon
            )));
        }
        slices[slice.t - 1] = slice.moves.iter().map(|&[i, j]| (i, j)).collect();
    }
    Ok((TransportPlan::new(vertex_count, slices)?, file.cost))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn makespan_ignores_trailing_waits() {
        let plan = TransportPlan::new(
            3,
            vec![
                vec![(0, 1), (2, 2)],
                vec![(1, 1), (2, 2)],
                vec![(1, 1), (2, 2)],
            ],
        )
        .unwrap();
        assert_eq!(plan.makespan(), 1);
        assert_eq!(plan.move_count(), 1);
        assert_eq!(plan.marginal(0), &[1, 0, 1]);
        assert_eq!(plan.marginal(3), &[0, 1, 1]);
    }

    #[test]
    fn cost_comparison_crosses_denominators() {
        let a = PlanCost::from_scaled(3, 2); // 1.5
        let b = PlanCost::from_scaled(1_500_000, 1_000_000); // 1.5
        let c = PlanCost::from_scaled(2, 1); // 2.0
        assert_eq!(a, b);
        assert!(a < c);
    }
}
