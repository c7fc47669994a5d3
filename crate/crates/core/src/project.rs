//! Shadow-guided pruning and the integral projection: restrict the
//! time-expanded graph to arcs the fractional transport actually uses, bias
//! costs toward heavy shadow mass, and re-solve the exact flow problem with
//! a retention-relaxation fallback when pruning cuts feasibility.

use crate::exact::{self, SolveError, SolveReport};
use crate::instance::Instance;
use crate::plan::TransportPlan;
use crate::sinkhorn::ShadowTransport;
use crate::timeexp::{self, TegArcKind};
use num_bigint::BigInt;
use std::time::Instant;

/// How many arcs survive per slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RetentionPolicy {
    /// Keep arcs with shadow mass strictly above the threshold.
    Threshold(f64),
    /// Keep the top fraction of arcs per slice ranked by shadow mass.
    KeepFraction(f64),
}

/// Parameters of the pruned projection.
#[derive(Debug, Clone, Copy)]
pub struct P3Params {
    /// Shadow-bias weight in the modified cost.
    pub lambda: f64,
    /// Log guard keeping the bias finite on zero-mass arcs.
    pub delta: f64,
    pub retention: RetentionPolicy,
}

impl Default for P3Params {
    fn default() -> Self {
        P3Params {
            lambda: 0.0,
            delta: 1e-6,
            retention: RetentionPolicy::KeepFraction(0.4),
        }
    }
}

/// Per-slice kept arc sets with retention statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    pub horizon: usize,
    pub edge_count: usize,
    kept: Vec<Vec<bool>>,
    /// Fraction of arcs kept in each slice.
    pub kept_per_slice: Vec<f64>,
    /// Kept arcs over all movement arcs.
    pub kept_fraction: f64,
}

impl PruneMask {
    pub fn keeps(&self, t: usize, edge: usize) -> bool {
        self.kept[t - 1][edge]
    }

    /// Kept edge indices of slice `t`, ascending.
    pub fn kept_edges(&self, t: usize) -> Vec<usize> {
        self.kept[t - 1]
            .iter()
            .enumerate()
            .filter_map(|(e, &k)| k.then_some(e))
            .collect()
    }

    /// Mask keeping everything.
    pub fn full(horizon: usize, edge_count: usize) -> PruneMask {
        PruneMask {
            horizon,
            edge_count,
            kept: vec![vec![true; edge_count]; horizon],
            kept_per_slice: vec![1.0; horizon],
            kept_fraction: 1.0,
        }
    }
}

#[derive(serde::Serialize)]
struct MaskFile<'a> {
    schema_version: u32,
    horizon: usize,
    kept_fraction: f64,
    kept_per_slice: &'a [f64],
    slices: Vec<MaskSlice>,
}

#[derive(serde::Serialize)]
struct MaskSlice {
    t: usize,
    edges: Vec<usize>,
}

/// Prune-mask dump: per-slice kept edge index lists for reproducibility.
pub fn mask_to_json(mask: &PruneMask) -> String {
    let file = MaskFile {
        schema_version: 1,
        horizon: mask.horizon,
        kept_fraction: mask.kept_fraction,
        kept_per_slice: &mask.kept_per_slice,
        slices: (1..=mask.horizon)
            .map(|t| MaskSlice {
                t,
                edges: mask.kept_edges(t),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("mask serialization")
}

/// Prune movement arcs per slice according to the policy. Self-loops are
/// always force-retained so settled robots can keep waiting.
pub fn prune(instance: &Instance, shadow: &ShadowTransport, policy: RetentionPolicy) -> PruneMask {
    let edge_count = instance.edge_count();
    let horizon = shadow.horizon;
    let mut kept = Vec::with_capacity(horizon);
    let mut kept_per_slice = Vec::with_capacity(horizon);
    let mut kept_total = 0usize;

    for t in 1..=horizon {
        let slice = shadow.slice(t);
        let mut keep = vec![false; edge_count];
        match policy {
            RetentionPolicy::Threshold(eta) => {
                for e in 0..edge_count {
                    keep[e] = slice[e] > eta;
                }
            }
            RetentionPolicy::KeepFraction(f) => {
                let f = f.clamp(0.0, 1.0);
                let want = ((f * edge_count as f64).ceil() as usize).min(edge_count);
                // Rank by mass descending, ties by edge index for determinism.
                let mut order: Vec<usize> = (0..edge_count).collect();
                order.sort_by(|&a, &b| {
                    slice[b]
                        .total_cmp(&slice[a])
                        .then_with(|| a.cmp(&b))
                });
                for &e in order.iter().take(want) {
                    keep[e] = true;
                }
            }
        }
        for (e, &(i, j)) in instance.edges().iter().enumerate() {
            if i == j {
                keep[e] = true;
            }
        }
        let count = keep.iter().filter(|&&k| k).count();
        kept_total += count;
        kept_per_slice.push(count as f64 / edge_count as f64);
        kept.push(keep);
    }

    PruneMask {
        horizon,
        edge_count,
        kept,
        kept_per_slice,
        kept_fraction: kept_total as f64 / (edge_count * horizon) as f64,
    }
}

/// Scaled-integer cost overlay per `[t-1][edge]`.
pub struct CostOverlay {
    pub denom: u64,
    table: Option<Vec<Vec<i64>>>,
}

impl CostOverlay {
    /// Overlay cost; `None` means the base table applies unchanged.
    pub fn cost(&self, edge: usize, t: usize, instance: &Instance) -> i64 {
        match &self.table {
            Some(rows) => rows[t - 1][edge],
            None => instance
                .costs()
                .cost_i64(edge, t)
                .expect("base overlay requires plain integer costs"),
        }
    }

    pub fn is_base(&self) -> bool {
        self.table.is_none()
    }
}

/// Build the shadow-biased cost overlay `c - lambda * log(mass + delta)`.
///
/// Wait-at-target arcs are exempt from the bias so the zero-cost anchor of
/// the wait-below-move ordering survives; each slice is then shifted to keep
/// every biased entry strictly positive. With `lambda = 0` the base costs
/// pass through untouched, denominator included.
pub fn modified_costs(
    instance: &Instance,
    shadow: &ShadowTransport,
    lambda: f64,
    delta: f64,
) -> CostOverlay {
    if lambda == 0.0 {
        return CostOverlay {
            denom: instance.costs().denom,
            table: None,
        };
    }
    let denom = crate::instance::DEFAULT_COST_DENOM;
    let edge_count = instance.edge_count();
    let mut rows = Vec::with_capacity(shadow.horizon);
    for t in 1..=shadow.horizon {
        let slice = shadow.slice(t);
        let mut biased = vec![0.0f64; edge_count];
        let mut min_biased = f64::INFINITY;
        let mut min_positive_base = f64::INFINITY;
        for (e, &(i, j)) in instance.edges().iter().enumerate() {
            let base = instance.costs().cost_f64(e, t);
            if base > 0.0 {
                min_positive_base = min_positive_base.min(base);
            }
            if i == j && instance.is_target(i) {
                biased[e] = 0.0;
            } else {
                let v = base - lambda * (slice[e] + delta).ln();
                biased[e] = v;
                min_biased = min_biased.min(v);
            }
        }
        let anchor = if min_positive_base.is_finite() {
            0.5 * min_positive_base
        } else {
            1.0 / denom as f64
        };
        let shift = if min_biased < anchor {
            anchor - min_biased
        } else {
            0.0
        };
        let row: Vec<i64> = instance
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| {
                if i == j && instance.is_target(i) {
                    0
                } else {
                    (((biased[e] + shift) * denom as f64).round() as i64).max(1)
                }
            })
            .collect();
        rows.push(row);
    }
    CostOverlay {
        denom,
        table: Some(rows),
    }
}

/// Solve the pruned projection: prune by the shadow, apply the biased costs,
/// solve exactly, and relax retention by 1.5x on infeasibility until the
/// full graph is reached.
pub fn solve_p3(
    instance: &Instance,
    shadow: &ShadowTransport,
    params: P3Params,
) -> Result<(TransportPlan, SolveReport), SolveError> {
    let start = Instant::now();
    if instance.costs().is_exponential() && params.lambda != 0.0 {
        return Err(SolveError::InvalidInstance(
            "shadow bias over exponential cost schedules is not supported".into(),
        ));
    }
    let overlay = modified_costs(instance, shadow, params.lambda, params.delta);
    let needed = instance.robot_count();
    let horizon = shadow.horizon;

    let mut policy = params.retention;
    let mut retries = 0usize;
    loop {
        let mask = prune(instance, shadow, policy);
        let teg = timeexp::build_masked(instance, horizon, Some(&mask))?;

        let solved = if instance.costs().is_exponential() {
            exact::solve_on_graph(&teg, needed, |arc| match arc.kind {
                TegArcKind::Movement => instance.costs().cost_big(arc.edge as usize, arc.t),
                TegArcKind::Internal => BigInt::from(0),
            })
        } else {
            exact::solve_on_graph(&teg, needed, |arc| match arc.kind {
                TegArcKind::Movement => overlay.cost(arc.edge as usize, arc.t, instance),
                TegArcKind::Internal => 0i64,
            })
            .map(|(plan, cost, aug)| (plan, BigInt::from(cost), aug))
        };

        match solved {
            Ok((plan, _overlay_cost, augmentations)) => {
                // Report the plan's cost under the instance's own model so
                // gaps against the exact solve compare like for like.
                let cost = plan.cost(instance);
                let report = SolveReport {
                    makespan: plan.makespan(),
                    moves: plan.move_count(),
                    horizon,
                    wall_time: start.elapsed(),
                    augmentations,
                    kept_fraction: mask.kept_fraction,
                    retries,
                    gap_vs_p1: None,
                    cost,
                };
                return Ok((plan, report));
            }
            Err(SolveError::Infeasible { .. }) if mask.kept_fraction < 1.0 => {
                retries += 1;
                let next = (mask.kept_fraction * 1.5).min(1.0);
                policy = RetentionPolicy::KeepFraction(next);
            }
            Err(err) => return Err(err),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_grid;
    use crate::sinkhorn::{run, SinkhornParams};
    use crate::verify;

    fn shadow_for(instance: &Instance, horizon: usize) -> ShadowTransport {
        run(
            instance,
            horizon,
            SinkhornParams {
                max_sweeps: 200,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn keep_everything_is_the_full_edge_set() {
        let inst = generate_grid(3, 3, 0, 2, 4).unwrap();
        let shadow = shadow_for(&inst, 4);
        let mask = prune(&inst, &shadow, RetentionPolicy::KeepFraction(1.0));
        assert_eq!(mask.kept_fraction, 1.0);
        for t in 1..=4 {
            assert_eq!(mask.kept_edges(t).len(), inst.edge_count());
        }
    }

    #[test]
    fn huge_threshold_leaves_only_self_loops() {
        let inst = generate_grid(3, 3, 0, 2, 4).unwrap();
        let shadow = shadow_for(&inst, 4);
        let max_mass = shadow
            .slices
            .iter()
            .flatten()
            .fold(0.0f64, |a, &b| a.max(b));
        let mask = prune(&inst, &shadow, RetentionPolicy::Threshold(max_mass + 1.0));
        for t in 1..=4 {
            let kept = mask.kept_edges(t);
            let loops: Vec<usize> = inst
                .edges()
                .iter()
                .enumerate()
                .filter_map(|(e, &(i, j))| (i == j).then_some(e))
                .collect();
            assert_eq!(kept, loops, "slice {t}");
        }
    }

    #[test]
    fn lambda_zero_passes_base_costs_through() {
        let inst = generate_grid(3, 3, 0, 2, 4).unwrap();
        let shadow = shadow_for(&inst, 4);
        let overlay = modified_costs(&inst, &shadow, 0.0, 1e-6);
        assert!(overlay.is_base());
        assert_eq!(overlay.denom, inst.costs().denom);
    }

    #[test]
    fn uniform_shadow_shifts_costs_by_a_constant() {
        let inst = generate_grid(3, 3, 0, 2, 4).unwrap();
        let mut shadow = shadow_for(&inst, 2);
        for slice in &mut shadow.slices {
            slice.fill(0.5);
        }
        let overlay = modified_costs(&inst, &shadow, 1.0, 1e-6);
        // Pairwise differences between biased arcs equal the base-cost
        // differences: the bias degenerates to a per-slice constant.
        let mut arcs = inst
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| !(i == j && inst.is_target(i)));
        let (first, &(i0, j0)) = arcs.next().unwrap();
        let base_first = inst.costs().cost_f64(first, 1);
        let _ = (i0, j0);
        for (e, _) in arcs {
            let base_diff = inst.costs().cost_f64(e, 1) - base_first;
            let overlay_diff = (overlay.cost(e, 1, &inst) - overlay.cost(first, 1, &inst)) as f64
                / overlay.denom as f64;
            assert!(
                (overlay_diff - base_diff).abs() < 1e-6,
                "edge {e}: {overlay_diff} vs {base_diff}"
            );
        }
    }

    #[test]
    fn shadow_bias_prefers_heavy_arcs() {
        let inst = generate_grid(3, 3, 0, 2, 4).unwrap();
        let mut shadow = shadow_for(&inst, 2);
        // Find two move arcs and separate their masses sharply.
        let moves: Vec<usize> = inst
            .edges()
            .iter()
            .enumerate()
            .filter_map(|(e, &(i, j))| (i != j).then_some(e))
            .collect();
        shadow.slices[0][moves[0]] = 0.9;
        shadow.slices[0][moves[1]] = 1e-9;
        let overlay = modified_costs(&inst, &shadow, 1.0, 1e-6);
        let heavy = overlay.cost(moves[0], 1, &inst);
        let dark = overlay.cost(moves[1], 1, &inst);
        // Same base cost, so the heavy arc must be strictly cheaper by about
        // log(0.9 / delta) before scaling.
        assert!(heavy < dark);
        let diff = (dark - heavy) as f64 / overlay.denom as f64;
        let expected = (0.9f64 + 1e-6).ln() - (1e-9f64 + 1e-6).ln();
        assert!((diff - expected).abs() < 1e-3, "diff {diff} expected {expected}");
    }

    #[test]
    fn full_keep_and_zero_lambda_recover_the_exact_cost() {
        for seed in [1, 6, 12] {
            let inst = generate_grid(4, 4, 2, 3, seed).unwrap();
            let horizon = 6;
            let (_, p1) = exact::solve_p1(&inst, horizon).unwrap();
            let shadow = shadow_for(&inst, horizon);
            let (plan, p3) = solve_p3(
                &inst,
                &shadow,
                P3Params {
                    lambda: 0.0,
                    delta: 1e-6,
                    retention: RetentionPolicy::KeepFraction(1.0),
                },
            )
            .unwrap();
            assert_eq!(p1.cost, p3.cost, "seed {seed}");
            assert!(verify::check_plan(&inst, &plan).unwrap().passed());
        }
    }

    #[test]
    fn pruned_solves_stay_integral_and_cost_at_least_p1() {
        for seed in [3, 7, 19] {
            let inst = generate_grid(4, 4, 0, 3, seed).unwrap();
            let horizon = 6;
            let (_, p1) = exact::solve_p1(&inst, horizon).unwrap();
            let shadow = shadow_for(&inst, horizon);
            let (plan, p3) = solve_p3(&inst, &shadow, P3Params::default()).unwrap();
            let report = verify::check_plan(&inst, &plan).unwrap();
            assert!(report.passed(), "seed {seed}: {:?}", report.failed_checks());
            assert!(p3.cost >= p1.cost, "seed {seed}");
            assert!(p3.kept_fraction <= 1.0 && p3.kept_fraction > 0.0);
        }
    }

    #[test]
    fn fallback_relaxes_until_feasible() {
        let inst = generate_grid(4, 4, 0, 3, 23).unwrap();
        let horizon = 5;
        let shadow = shadow_for(&inst, horizon);
        // Start from a retention so tight only waits survive; the fallback
        // must recover feasibility.
        let (plan, report) = solve_p3(
            &inst,
            &shadow,
            P3Params {
                lambda: 0.0,
                delta: 1e-6,
                retention: RetentionPolicy::KeepFraction(0.0),
            },
        )
        .unwrap();
        assert!(report.retries > 0);
        assert!(verify::check_plan(&inst, &plan).unwrap().passed());
    }
}
