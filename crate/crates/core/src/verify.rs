//! Solver-independent plan auditing: executability constraints, collision
//! freedom, and exact metrics. Consumes only the instance and the plan, so
//! it can audit plans produced by any backend or loaded from files.

use crate::instance::{cost_ordering_holds, Instance};
use crate::plan::{PlanCost, TransportPlan};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("plan does not fit the instance: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Hard checks gate executability; soft ones witness optimality and only
    /// harden under the strict wait-below-move cost ordering.
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckOutcome>,
    pub cost: f64,
    #[serde(skip)]
    pub exact_cost: PlanCost,
    pub makespan: usize,
    pub moves: usize,
    /// Whether the strict cost ordering held, which is what makes the swap
    /// and cycle checks hard.
    pub strict_costs: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }

    pub fn failed_checks(&self) -> Vec<&CheckOutcome> {
        self.checks
            .iter()
            .filter(|c| c.hard && !c.passed)
            .collect()
    }
}

fn push(
    checks: &mut Vec<CheckOutcome>,
    name: &'static str,
    passed: bool,
    hard: bool,
    detail: impl Into<String>,
) {
    checks.push(CheckOutcome {
        name,
        passed,
        hard,
        detail: detail.into(),
    });
}

/// Audit a plan against every executability constraint plus the collision
/// witnesses.
pub fn check_plan(
    instance: &Instance,
    plan: &TransportPlan,
) -> Result<VerificationReport, VerifyError> {
    let k = instance.vertex_count();
    let horizon = plan.horizon();
    for slice in plan.slices() {
        for &(i, j) in slice {
            if i >= k || j >= k {
                return Err(VerifyError::DimensionMismatch(format!(
                    "move {i}->{j} outside vertex range {k}"
                )));
            }
        }
    }

    let strict_costs = cost_ordering_holds(instance, horizon.max(1));
    let mut checks = Vec::new();

    // Boundary marginals: first row marginal is the robot set, last column
    // marginal the target set. A zero-horizon plan must start settled.
    if horizon == 0 {
        let settled = instance.robots_on_targets();
        push(
            &mut checks,
            "boundary",
            settled,
            true,
            if settled {
                "empty plan with robots already on targets".to_string()
            } else {
                "empty plan but robots are not on targets".to_string()
            },
        );
    } else {
        let q0 = plan.marginal(0);
        let qt = plan.marginal(horizon);
        let start_ok = (0..k).all(|v| q0[v] == u32::from(instance.is_robot(v)));
        let end_ok = (0..k).all(|v| qt[v] == u32::from(instance.is_target(v)));
        push(
            &mut checks,
            "boundary",
            start_ok && end_ok,
            true,
            format!("start matches robots: {start_ok}, end matches targets: {end_ok}"),
        );
        push(
            &mut checks,
            "targets_reached",
            end_ok,
            true,
            if end_ok {
                "every target vertex holds exactly one robot at T".to_string()
            } else {
                "some target is unoccupied at T".to_string()
            },
        );
    }

    // Gluing: arriving and departing marginals agree between slices. The
    // marginals are recomputed from raw slices, so this checks the slices
    // themselves, not cached state.
    let mut gluing_ok = true;
    for t in 1..horizon {
        let mut arrive = vec![0u32; k];
        for &(_, j) in plan.slice(t) {
            arrive[j] += 1;
        }
        let mut depart = vec![0u32; k];
        for &(i, _) in plan.slice(t + 1) {
            depart[i] += 1;
        }
        if arrive != depart {
            gluing_ok = false;
            break;
        }
    }
    push(
        &mut checks,
        "gluing",
        gluing_ok,
        true,
        "mass arriving at each layer departs from it",
    );

    // Capacity and integrality: single occupancy at every time.
    let capacity_ok = horizon == 0
        || (0..=horizon).all(|t| plan.marginal(t).iter().all(|&c| c <= 1));
    push(
        &mut checks,
        "capacity",
        capacity_ok,
        true,
        "vertex occupancy never exceeds one",
    );

    // Edge support.
    let mut off_support = Vec::new();
    for t in 1..=horizon {
        for &(i, j) in plan.slice(t) {
            if instance.edge_index(i, j).is_none() {
                off_support.push((t, i, j));
            }
        }
    }
    push(
        &mut checks,
        "edge_support",
        off_support.is_empty(),
        true,
        if off_support.is_empty() {
            "all moves ride instance edges".to_string()
        } else {
            format!("moves off the edge set: {off_support:?}")
        },
    );

    // Swap witness: no pair simultaneously exchanges vertices.
    let mut swaps = Vec::new();
    for t in 1..=horizon {
        let slice = plan.slice(t);
        let set: std::collections::HashSet<(usize, usize)> = slice.iter().copied().collect();
        for &(i, j) in slice {
            if i < j && set.contains(&(j, i)) {
                swaps.push((t, i, j));
            }
        }
    }
    push(
        &mut checks,
        "swap_free",
        swaps.is_empty(),
        strict_costs,
        if swaps.is_empty() {
            "no head-on exchanges".to_string()
        } else {
            format!("swaps at {swaps:?}")
        },
    );

    // Cycle witness: non-wait moves of one slice never close a directed
    // cycle. Out-degree is at most one once capacity holds, so following
    // successors finds any cycle.
    let mut cycles = false;
    for t in 1..=horizon {
        let mut succ = vec![usize::MAX; k];
        for &(i, j) in plan.slice(t) {
            if i != j {
                succ[i] = j;
            }
        }
        let mut state = vec![0u8; k]; // 0 fresh, 1 in progress, 2 done
        for start in 0..k {
            if state[start] != 0 {
                continue;
            }
            let mut v = start;
            let mut trail = Vec::new();
            while v != usize::MAX && state[v] == 0 {
                state[v] = 1;
                trail.push(v);
                v = succ[v];
            }
            if v != usize::MAX && state[v] == 1 {
                cycles = true;
            }
            for w in trail {
                state[w] = 2;
            }
        }
        if cycles {
            break;
        }
    }
    push(
        &mut checks,
        "cycle_free",
        !cycles,
        strict_costs,
        if cycles {
            "a slice contains a rotation of non-wait moves".to_string()
        } else {
            "no slice-level rotations".to_string()
        },
    );

    let exact_cost = plan.cost(instance);
    Ok(VerificationReport {
        cost: exact_cost.to_f64(),
        exact_cost,
        makespan: plan.makespan(),
        moves: plan.move_count(),
        strict_costs,
        checks,
    })
}

/// Exact plan metrics: scaled-integer cost, makespan, move count.
pub fn metrics(instance: &Instance, plan: &TransportPlan) -> (PlanCost, usize, usize) {
    (plan.cost(instance), plan.makespan(), plan.move_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::instance::{generate_grid, CostModel, Instance};
    use crate::plan::TransportPlan;

    fn settled() -> Instance {
        let grid = generate_grid(2, 2, 0, 1, 3).unwrap();
        Instance::new(
            grid.vertex_count(),
            grid.edges().to_vec(),
            vec![],
            vec![1],
            vec![1],
            2,
            CostModel::default(),
            Some(2),
            Some(2),
        )
        .unwrap()
    }

    #[test]
    fn all_wait_plan_passes_with_zero_metrics() {
        let inst = settled();
        let plan = TransportPlan::new(4, vec![vec![(1, 1)], vec![(1, 1)]]).unwrap();
        let report = check_plan(&inst, &plan).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.makespan, 0);
        assert_eq!(report.moves, 0);
        assert_eq!(report.cost, 0.0);
    }

    #[test]
    fn hand_built_swap_is_flagged() {
        let inst = Instance::new(
            2,
            vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            vec![],
            vec![0, 1],
            vec![0, 1],
            1,
            CostModel::default(),
            None,
            None,
        )
        .unwrap();
        let plan = TransportPlan::new(2, vec![vec![(0, 1), (1, 0)]]).unwrap();
        let report = check_plan(&inst, &plan).unwrap();
        let swap = report.checks.iter().find(|c| c.name == "swap_free").unwrap();
        assert!(!swap.passed);
        assert!(swap.hard); // default costs satisfy the strict ordering
        assert!(!report.passed());
    }

    #[test]
    fn solver_output_passes_and_metrics_agree() {
        for seed in [2, 5, 8, 13] {
            let inst = generate_grid(3, 3, 1, 2, seed).unwrap();
            let Ok((plan, solve_report)) = exact::solve_p1(&inst, 4) else {
                continue;
            };
            let report = check_plan(&inst, &plan).unwrap();
            assert!(report.passed(), "seed {seed}: {:?}", report.failed_checks());
            assert_eq!(report.exact_cost, solve_report.cost, "seed {seed}");
            let (cost, makespan, moves) = metrics(&inst, &plan);
            assert_eq!(cost, solve_report.cost);
            assert_eq!(makespan, solve_report.makespan);
            assert_eq!(moves, solve_report.moves);
        }
    }

    #[test]
    fn swap_check_softens_without_strict_ordering() {
        let inst = Instance::new(
            2,
            vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            vec![],
            vec![0, 1],
            vec![0, 1],
            1,
            CostModel::Uniform {
                move_cost: 1.0,
                wait_nontarget: 0.5,
                wait_target: 0.3,
            },
            None,
            None,
        )
        .unwrap();
        let plan = TransportPlan::new(2, vec![vec![(0, 1), (1, 0)]]).unwrap();
        let report = check_plan(&inst, &plan).unwrap();
        assert!(!report.strict_costs);
        let swap = report.checks.iter().find(|c| c.name == "swap_free").unwrap();
        assert!(!swap.passed);
        assert!(!swap.hard);
        assert!(report.passed());
    }
}
