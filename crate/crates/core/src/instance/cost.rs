//! Cost models and their resolution to exact scaled-integer tables.
//!
//! All solver arithmetic runs on scaled integers (`scaled / denom` is the
//! real-valued cost), so strict cost inequalities survive without floating
//! point slack. The exponential-makespan variant grows like `B^t` and is
//! evaluated in big-integer arithmetic.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Denominator used for cost models with arbitrary real parameters.
pub const DEFAULT_COST_DENOM: u64 = 1_000_000;

/// Candidate denominators tried in order when resolving models whose
/// parameters are usually simple fractions (uniform and exponential bases).
const SMALL_DENOMS: [u64; 10] = [1, 2, 4, 5, 8, 10, 20, 100, 1000, DEFAULT_COST_DENOM];

/// Edge length entry for the metric cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeLength {
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

/// One per-edge per-time entry of a tabulated cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabulatedEntry {
    pub from: usize,
    pub to: usize,
    pub t: usize,
    pub cost: f64,
}

/// Cost model attached to an instance.
///
/// Non-edges carry no cost entry at all; they are simply absent from the
/// edge set rather than being represented by a large sentinel value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CostModel {
    /// Constant costs: one price per move, one per non-target wait, one per
    /// wait on a target vertex.
    Uniform {
        move_cost: f64,
        wait_nontarget: f64,
        wait_target: f64,
    },
    /// Moves priced by an edge-length function, waits constant.
    Metric {
        lengths: Vec<EdgeLength>,
        wait_nontarget: f64,
        wait_target: f64,
    },
    /// Fully tabulated per-edge per-time costs. Times past the last tabulated
    /// step reuse the final column.
    Tabulated { entries: Vec<TabulatedEntry> },
    /// Per-cell random arrival and wait costs drawn deterministically from
    /// the seed: arrival ~ U[arrival_min, arrival_max] per destination cell,
    /// wait ~ U[wait_min, wait_max] per cell, waits on targets cost zero.
    NonUniformRandom {
        arrival_min: f64,
        arrival_max: f64,
        wait_min: f64,
        wait_max: f64,
        seed: u64,
    },
    /// Time-separated costs `B^t * base(i,j)` used to make min-cost plans
    /// also minimum-makespan.
    ExponentialMakespan {
        base_move: f64,
        base_wait_nontarget: f64,
        base: u64,
    },
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::Uniform {
            move_cost: 1.0,
            wait_nontarget: 0.5,
            wait_target: 0.0,
        }
    }
}

impl CostModel {
    pub fn variant_name(&self) -> &'static str {
        match self {
            CostModel::Uniform { .. } => "uniform",
            CostModel::Metric { .. } => "metric",
            CostModel::Tabulated { .. } => "tabulated",
            CostModel::NonUniformRandom { .. } => "non_uniform_random",
            CostModel::ExponentialMakespan { .. } => "exponential_makespan",
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, CostModel::ExponentialMakespan { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("cost value {0} is not finite")]
    NonFinite(f64),
    #[error("cost value {0} is negative")]
    Negative(f64),
    #[error("metric model is missing a length for edge {from}->{to}")]
    MissingLength { from: usize, to: usize },
    #[error("tabulated model has no entry for edge {from}->{to} at t={t}")]
    MissingTabulated { from: usize, to: usize, t: usize },
    #[error("tabulated model has no entries")]
    EmptyTable,
    #[error("exponential base must be at least 2, got {0}")]
    BaseTooSmall(u64),
    #[error("random cost range [{0}, {1}] is invalid")]
    BadRange(f64, f64),
}

fn check_value(v: f64) -> Result<f64, CostError> {
    if !v.is_finite() {
        return Err(CostError::NonFinite(v));
    }
    if v < 0.0 {
        return Err(CostError::Negative(v));
    }
    Ok(v)
}

/// Smallest denominator from `SMALL_DENOMS` that turns every value into an
/// exact integer, falling back to the default scale.
fn pick_denom(values: &[f64]) -> u64 {
    for &d in &SMALL_DENOMS {
        let ok = values.iter().all(|&v| {
            let scaled = v * d as f64;
            scaled.fract() == 0.0 && scaled.abs() < 9e15
        });
        if ok {
            return d;
        }
    }
    DEFAULT_COST_DENOM
}

fn scale(v: f64, denom: u64) -> i64 {
    (v * denom as f64).round() as i64
}

#[derive(Debug, Clone)]
enum TableKind {
    /// Time-independent per-edge costs.
    Static(Vec<i64>),
    /// `[t-1][edge]` costs for t = 1..=max_t; later times clamp to the last row.
    TimeVarying(Vec<Vec<i64>>),
    /// `base[edge] * B^t`.
    Exponential { base: Vec<i64>, b: u64 },
}

/// Resolved scaled-integer costs for one instance: `value = scaled / denom`.
#[derive(Debug, Clone)]
pub struct ScaledCostTable {
    pub denom: u64,
    kind: TableKind,
}

impl ScaledCostTable {
    pub(crate) fn resolve(
        model: &CostModel,
        edges: &[(usize, usize)],
        is_target: &[bool],
    ) -> Result<ScaledCostTable, CostError> {
        match model {
            CostModel::Uniform {
                move_cost,
                wait_nontarget,
                wait_target,
            } => {
                let mv = check_value(*move_cost)?;
                let wn = check_value(*wait_nontarget)?;
                let wt = check_value(*wait_target)?;
                let denom = pick_denom(&[mv, wn, wt]);
                let per_edge = edges
                    .iter()
                    .map(|&(i, j)| {
                        if i != j {
                            scale(mv, denom)
                        } else if is_target[i] {
                            scale(wt, denom)
                        } else {
                            scale(wn, denom)
                        }
                    })
                    .collect();
                Ok(ScaledCostTable {
                    denom,
                    kind: TableKind::Static(per_edge),
                })
            }
            CostModel::Metric {
                lengths,
                wait_nontarget,
                wait_target,
            } => {
                let wn = check_value(*wait_nontarget)?;
                let wt = check_value(*wait_target)?;
                let denom = DEFAULT_COST_DENOM;
                let mut lookup = std::collections::HashMap::new();
                for entry in lengths {
                    check_value(entry.length)?;
                    lookup.insert((entry.from, entry.to), entry.length);
                }
                let mut per_edge = Vec::with_capacity(edges.len());
                for &(i, j) in edges {
                    if i == j {
                        per_edge.push(scale(if is_target[i] { wt } else { wn }, denom));
                    } else {
                        let d = lookup
                            .get(&(i, j))
                            .copied()
                            .ok_or(CostError::MissingLength { from: i, to: j })?;
                        per_edge.push(scale(d, denom));
                    }
                }
                Ok(ScaledCostTable {
                    denom,
                    kind: TableKind::Static(per_edge),
                })
            }
            CostModel::Tabulated { entries } => {
                if entries.is_empty() {
                    return Err(CostError::EmptyTable);
                }
                let denom = DEFAULT_COST_DENOM;
                let max_t = entries.iter().map(|e| e.t).max().unwrap_or(1).max(1);
                let mut lookup = std::collections::HashMap::new();
                for entry in entries {
                    check_value(entry.cost)?;
                    lookup.insert((entry.from, entry.to, entry.t), entry.cost);
                }
                let mut rows = Vec::with_capacity(max_t);
                for t in 1..=max_t {
                    let mut row = Vec::with_capacity(edges.len());
                    for &(i, j) in edges {
                        let c = lookup.get(&(i, j, t)).copied().ok_or(
                            CostError::MissingTabulated { from: i, to: j, t },
                        )?;
                        row.push(scale(c, denom));
                    }
                    rows.push(row);
                }
                Ok(ScaledCostTable {
                    denom,
                    kind: TableKind::TimeVarying(rows),
                })
            }
            CostModel::NonUniformRandom {
                arrival_min,
                arrival_max,
                wait_min,
                wait_max,
                seed,
            } => {
                if !(arrival_min.is_finite() && arrival_max.is_finite() && arrival_min <= arrival_max) {
                    return Err(CostError::BadRange(*arrival_min, *arrival_max));
                }
                if !(wait_min.is_finite() && wait_max.is_finite() && wait_min <= wait_max) {
                    return Err(CostError::BadRange(*wait_min, *wait_max));
                }
                check_value(*arrival_min)?;
                check_value(*wait_min)?;
                let denom = DEFAULT_COST_DENOM;
                let k = is_target.len();
                // Draw order fixed: all arrivals first, then all waits.
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let arrival: Vec<f64> = (0..k)
                    .map(|_| rng.random_range(*arrival_min..=*arrival_max))
                    .collect();
                let wait: Vec<f64> = (0..k)
                    .map(|_| rng.random_range(*wait_min..=*wait_max))
                    .collect();
                let per_edge = edges
                    .iter()
                    .map(|&(i, j)| {
                        if i != j {
                            scale(arrival[j], denom)
                        } else if is_target[i] {
                            0
                        } else {
                            scale(wait[i], denom)
                        }
                    })
                    .collect();
                Ok(ScaledCostTable {
                    denom,
                    kind: TableKind::Static(per_edge),
                })
            }
            CostModel::ExponentialMakespan {
                base_move,
                base_wait_nontarget,
                base,
            } => {
                let mv = check_value(*base_move)?;
                let wn = check_value(*base_wait_nontarget)?;
                if *base < 2 {
                    return Err(CostError::BaseTooSmall(*base));
                }
                let denom = pick_denom(&[mv, wn, 0.0]);
                let per_edge = edges
                    .iter()
                    .map(|&(i, j)| {
                        if i != j {
                            scale(mv, denom)
                        } else if is_target[i] {
                            0
                        } else {
                            scale(wn, denom)
                        }
                    })
                    .collect();
                Ok(ScaledCostTable {
                    denom,
                    kind: TableKind::Exponential {
                        base: per_edge,
                        b: *base,
                    },
                })
            }
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.kind, TableKind::Exponential { .. })
    }

    /// Scaled cost of traversing the edge arriving at time `t` (t >= 1), as a
    /// plain integer. `None` for the exponential variant, whose values need
    /// big-integer arithmetic.
    pub fn cost_i64(&self, edge: usize, t: usize) -> Option<i64> {
        match &self.kind {
            TableKind::Static(row) => Some(row[edge]),
            TableKind::TimeVarying(rows) => {
                let idx = t.max(1).min(rows.len()) - 1;
                Some(rows[idx][edge])
            }
            TableKind::Exponential { .. } => None,
        }
    }

    /// Scaled cost as a big integer; defined for every variant.
    pub fn cost_big(&self, edge: usize, t: usize) -> BigInt {
        match &self.kind {
            TableKind::Exponential { base, b } => {
                BigInt::from(base[edge]) * BigInt::from(*b).pow(t.max(1) as u32)
            }
            _ => BigInt::from(self.cost_i64(edge, t).unwrap()),
        }
    }

    /// Real-valued cost, derived from the scaled representation.
    pub fn cost_f64(&self, edge: usize, t: usize) -> f64 {
        match &self.kind {
            TableKind::Exponential { base, b } => {
                base[edge] as f64 * (*b as f64).powi(t.max(1) as i32) / self.denom as f64
            }
            _ => self.cost_i64(edge, t).unwrap() as f64 / self.denom as f64,
        }
    }

    /// Number of distinct tabulated time steps (1 for time-independent models).
    pub fn time_steps(&self) -> usize {
        match &self.kind {
            TableKind::TimeVarying(rows) => rows.len(),
            _ => 1,
        }
    }

    /// Whether costs depend on the time index at all.
    pub fn time_dependent(&self) -> bool {
        match &self.kind {
            TableKind::Static(_) => false,
            TableKind::TimeVarying(rows) => rows.len() > 1,
            TableKind::Exponential { .. } => true,
        }
    }

    /// Smallest strictly positive scaled cost at time `t` over the given edges.
    pub fn min_positive_i64(&self, edges: &[(usize, usize)], t: usize) -> Option<i64> {
        (0..edges.len())
            .filter_map(|e| self.cost_i64(e, t))
            .filter(|&c| c > 0)
            .min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_edges() -> Vec<(usize, usize)> {
        // 2-vertex path with self-loops, vertex 1 is the target.
        vec![(0, 0), (0, 1), (1, 0), (1, 1)]
    }

    #[test]
    fn uniform_resolves_to_small_denominator() {
        let model = CostModel::default();
        let table = ScaledCostTable::resolve(&model, &simple_edges(), &[false, true]).unwrap();
        assert_eq!(table.denom, 2);
        assert_eq!(table.cost_i64(0, 1), Some(1)); // wait at non-target
        assert_eq!(table.cost_i64(1, 1), Some(2)); // move
        assert_eq!(table.cost_i64(3, 1), Some(0)); // wait at target
    }

    #[test]
    fn non_uniform_is_deterministic_in_seed() {
        let model = CostModel::NonUniformRandom {
            arrival_min: 0.6,
            arrival_max: 1.0,
            wait_min: 0.1,
            wait_max: 0.5,
            seed: 11,
        };
        let edges = simple_edges();
        let a = ScaledCostTable::resolve(&model, &edges, &[false, true]).unwrap();
        let b = ScaledCostTable::resolve(&model, &edges, &[false, true]).unwrap();
        for e in 0..edges.len() {
            assert_eq!(a.cost_i64(e, 1), b.cost_i64(e, 1));
        }
        // Ordering from the ranges: waits < arrivals, target wait zero.
        assert_eq!(a.cost_i64(3, 1), Some(0));
        assert!(a.cost_i64(0, 1).unwrap() < a.cost_i64(1, 1).unwrap());
    }

    #[test]
    fn exponential_costs_grow_as_powers() {
        let model = CostModel::ExponentialMakespan {
            base_move: 1.0,
            base_wait_nontarget: 0.5,
            base: 7,
        };
        let table = ScaledCostTable::resolve(&model, &simple_edges(), &[false, true]).unwrap();
        assert!(table.cost_i64(1, 3).is_none());
        assert_eq!(table.cost_big(1, 3), BigInt::from(2 * 7i64.pow(3)));
        assert_eq!(table.cost_big(3, 9), BigInt::from(0));
    }

    #[test]
    fn tabulated_requires_full_coverage() {
        let entries = vec![TabulatedEntry {
            from: 0,
            to: 1,
            t: 1,
            cost: 1.0,
        }];
        let err = ScaledCostTable::resolve(
            &CostModel::Tabulated { entries },
            &simple_edges(),
            &[false, true],
        )
        .unwrap_err();
        assert!(matches!(err, CostError::MissingTabulated { .. }));
    }
}
