//! Exact integral solver: min-cost flow on the time-expanded graph, plus the
//! two minimum-makespan routes (exponential cost schedule and horizon
//! search).

use crate::instance::Instance;
use crate::mcf::{FlowCost, FlowNetwork};
use crate::plan::{PlanCost, TransportPlan};
use crate::timeexp::{self, TegArcKind, TegError, TimeExpandedGraph};
use num_bigint::BigInt;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible at horizon {horizon}: only {routed} of {needed} robots can reach targets")]
    Infeasible {
        horizon: usize,
        routed: usize,
        needed: usize,
    },
    #[error("instance is not solvable as given: {0}")]
    InvalidInstance(String),
    #[error("internal solver invariant violated: {0}")]
    Internal(String),
}

impl From<TegError> for SolveError {
    fn from(err: TegError) -> Self {
        match err {
            TegError::HorizonZeroWithUnreachedTargets => SolveError::Infeasible {
                horizon: 0,
                routed: 0,
                needed: 0,
            },
            other => SolveError::Internal(other.to_string()),
        }
    }
}

/// Metrics of one solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub cost: PlanCost,
    pub makespan: usize,
    pub moves: usize,
    pub horizon: usize,
    pub wall_time: Duration,
    pub augmentations: usize,
    /// Fraction of movement arcs retained (1.0 for unpruned solves).
    pub kept_fraction: f64,
    /// Retention relaxations needed before feasibility (pruned solves only).
    pub retries: usize,
    /// Gap against a reference optimum, filled by pipeline callers.
    pub gap_vs_p1: Option<f64>,
}

fn hard_check(instance: &Instance) -> Result<(), SolveError> {
    if instance.robots().len() != instance.targets().len() {
        return Err(SolveError::InvalidInstance(format!(
            "robots ({}) and targets ({}) must balance",
            instance.robots().len(),
            instance.targets().len()
        )));
    }
    for &r in instance.robots() {
        if instance.is_obstacle(r) {
            return Err(SolveError::InvalidInstance(format!(
                "robot on obstacle vertex {r}"
            )));
        }
    }
    for &g in instance.targets() {
        if instance.is_obstacle(g) {
            return Err(SolveError::InvalidInstance(format!(
                "target on obstacle vertex {g}"
            )));
        }
    }
    Ok(())
}

/// Quick max-flow feasibility check on an already built graph.
pub(crate) fn graph_feasible(teg: &TimeExpandedGraph, needed: usize) -> usize {
    if teg.horizon == 0 {
        return needed;
    }
    let mut net: FlowNetwork<i64> = FlowNetwork::new(teg.node_count + 2);
    let source = teg.node_count;
    let sink = teg.node_count + 1;
    for arc in &teg.arcs {
        net.add_arc(arc.tail as usize, arc.head as usize, 1, 0);
    }
    for (node, &s) in teg.supplies.iter().enumerate() {
        if s > 0 {
            net.add_arc(source, node, s, 0);
        } else if s < 0 {
            net.add_arc(node, sink, -s, 0);
        }
    }
    net.max_flow(source, sink) as usize
}

/// Is the instance routable within `horizon` steps?
pub fn feasible(instance: &Instance, horizon: usize) -> Result<bool, SolveError> {
    hard_check(instance)?;
    if horizon == 0 {
        return Ok(instance.robots_on_targets());
    }
    let teg = timeexp::build(instance, horizon)?;
    Ok(graph_feasible(&teg, instance.robot_count()) == instance.robot_count())
}

/// Solve the min-cost transport over the given graph with per-arc costs.
/// Returns the plan, the total scaled cost and augmentation count.
pub(crate) fn solve_on_graph<C, F>(
    teg: &TimeExpandedGraph,
    needed: usize,
    arc_cost: F,
) -> Result<(TransportPlan, C, usize), SolveError>
where
    C: FlowCost,
    F: Fn(&crate::timeexp::TegArc) -> C,
{
    if teg.horizon == 0 {
        return Ok((TransportPlan::empty(), C::zero(), 0));
    }

    // Fail fast on infeasibility before paying for the cost search.
    let routable = graph_feasible(teg, needed);
    if routable < needed {
        return Err(SolveError::Infeasible {
            horizon: teg.horizon,
            routed: routable,
            needed,
        });
    }

    let mut net: FlowNetwork<C> = FlowNetwork::new(teg.node_count + 2);
    let source = teg.node_count;
    let sink = teg.node_count + 1;
    for arc in &teg.arcs {
        net.add_arc(arc.tail as usize, arc.head as usize, 1, arc_cost(arc));
    }
    for (node, &s) in teg.supplies.iter().enumerate() {
        if s > 0 {
            net.add_arc(source, node, s, C::zero());
        } else if s < 0 {
            net.add_arc(node, sink, -s, C::zero());
        }
    }
    let outcome = net.min_cost_flow(source, sink, needed as i32);
    if outcome.flow != needed as i32 {
        return Err(SolveError::Internal(format!(
            "feasibility pre-pass routed {needed} units but the cost pass routed {}",
            outcome.flow
        )));
    }
    let flows: Vec<i32> = (0..teg.arcs.len())
        .map(|i| net.flow_on(2 * i as u32))
        .collect();
    let plan = timeexp::flow_to_plan(teg, &flows)?;
    Ok((plan, outcome.cost, outcome.augmentations))
}

/// Minimum-cost integral transport over `horizon` steps under the instance's
/// own cost model.
pub fn solve_p1(
    instance: &Instance,
    horizon: usize,
) -> Result<(TransportPlan, SolveReport), SolveError> {
    hard_check(instance)?;
    let start = Instant::now();
    let teg = timeexp::build(instance, horizon)?;
    let costs = instance.costs();
    let needed = instance.robot_count();

    let (plan, cost, augmentations) = if costs.is_exponential() {
        let (plan, cost, augmentations) = solve_on_graph(&teg, needed, |arc| match arc.kind {
            TegArcKind::Movement => costs.cost_big(arc.edge as usize, arc.t),
            TegArcKind::Internal => BigInt::from(0),
        })?;
        (plan, cost, augmentations)
    } else {
        let (plan, cost, augmentations) = solve_on_graph(&teg, needed, |arc| match arc.kind {
            TegArcKind::Movement => costs
                .cost_i64(arc.edge as usize, arc.t)
                .expect("non-exponential table"),
            TegArcKind::Internal => 0i64,
        })?;
        (plan, BigInt::from(cost), augmentations)
    };

    let report = SolveReport {
        cost: PlanCost::from_scaled(cost, costs.denom),
        makespan: plan.makespan(),
        moves: plan.move_count(),
        horizon,
        wall_time: start.elapsed(),
        augmentations,
        kept_fraction: 1.0,
        retries: 0,
        gap_vs_p1: None,
    };
    Ok((plan, report))
}

/// Smallest feasible horizon via binary search over `[0, N + K - 1]`, plus
/// the optimal plan at that horizon.
pub fn min_makespan_search(
    instance: &Instance,
) -> Result<(usize, TransportPlan, SolveReport), SolveError> {
    hard_check(instance)?;
    if instance.robots_on_targets() {
        let (plan, report) = solve_p1(instance, 0)?;
        return Ok((0, plan, report));
    }

    let upper = instance.robot_count() + instance.vertex_count() - 1;
    if !feasible(instance, upper)? {
        return Err(SolveError::Infeasible {
            horizon: upper,
            routed: 0,
            needed: instance.robot_count(),
        });
    }

    // Invariant: infeasible at lo, feasible at hi.
    let mut lo = 0usize;
    let mut hi = upper;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(instance, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (plan, report) = solve_p1(instance, hi)?;
    Ok((hi, plan, report))
}

/// Horizon cap documented for the exponential route: `B^t` cost words grow
/// linearly in `t` and the potentials follow suit.
pub const EXPONENTIAL_HORIZON_CAP: usize = 64;

/// Solve with the time-separated cost schedule `B^t * base(i, j)` built from
/// the instance's own base costs. The optimal plan's motion provably stops at
/// the minimum makespan; all arithmetic is exact big-integer.
pub fn solve_makespan_exponential(
    instance: &Instance,
    horizon: usize,
) -> Result<(TransportPlan, SolveReport), SolveError> {
    hard_check(instance)?;
    if horizon > EXPONENTIAL_HORIZON_CAP {
        return Err(SolveError::InvalidInstance(format!(
            "horizon {horizon} exceeds the exponential-cost cap {EXPONENTIAL_HORIZON_CAP}; use the horizon search instead"
        )));
    }
    let start = Instant::now();
    let costs = instance.costs();

    // Base costs: the instance's own scaled costs at t = 1.
    let base: Vec<BigInt> = (0..instance.edge_count())
        .map(|e| costs.cost_big(e, 1))
        .collect();
    let mut base_min: Option<BigInt> = None;
    let mut base_sum = BigInt::from(0);
    for (e, &(i, j)) in instance.edges().iter().enumerate() {
        base_sum += &base[e];
        if i != j && base_min.as_ref().is_none_or(|m| &base[e] < m) {
            base_min = Some(base[e].clone());
        }
    }
    let base_min = base_min.ok_or_else(|| {
        SolveError::InvalidInstance("no movement edges to time-separate".into())
    })?;
    if base_min <= BigInt::from(0) {
        return Err(SolveError::InvalidInstance(
            "time separation needs strictly positive move costs".into(),
        ));
    }
    // Smallest B with (B - 1) * base_min > sum of all base costs.
    let b: BigInt = base_sum.clone() / base_min.clone() + 2;

    let teg = timeexp::build(instance, horizon)?;
    let (plan, cost, augmentations) = solve_on_graph(&teg, instance.robot_count(), |arc| {
        match arc.kind {
            TegArcKind::Movement => base[arc.edge as usize].clone() * b.clone().pow(arc.t as u32),
            TegArcKind::Internal => BigInt::from(0),
        }
    })?;

    let report = SolveReport {
        cost: PlanCost::from_scaled(cost, costs.denom),
        makespan: plan.makespan(),
        moves: plan.move_count(),
        horizon,
        wall_time: start.elapsed(),
        augmentations,
        kept_fraction: 1.0,
        retries: 0,
        gap_vs_p1: None,
    };
    Ok((plan, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_grid, CostModel, Instance};
    use crate::oracle;

    fn settled_instance() -> Instance {
        let grid = generate_grid(2, 2, 0, 1, 3).unwrap();
        Instance::new(
            grid.vertex_count(),
            grid.edges().to_vec(),
            vec![],
            vec![1],
            vec![1],
            4,
            CostModel::default(),
            Some(2),
            Some(2),
        )
        .unwrap()
    }

    #[test]
    fn settled_robots_wait_for_free() {
        let inst = settled_instance();
        let (plan, report) = solve_p1(&inst, 3).unwrap();
        assert_eq!(report.cost, PlanCost::zero(report.cost.denom));
        assert_eq!(plan.makespan(), 0);
        assert_eq!(plan.move_count(), 0);
    }

    #[test]
    fn forced_move_on_two_path() {
        let inst = generate_grid(1, 2, 0, 1, 1).unwrap();
        let (plan, report) = solve_p1(&inst, 1).unwrap();
        assert_eq!(report.cost, PlanCost::from_scaled(2, 2));
        assert_eq!(plan.move_count(), 1);
        assert_eq!(plan.slice(1).len(), 1);
    }

    #[test]
    fn cost_matches_oracle_on_small_instances() {
        for seed in 0..25 {
            let inst = generate_grid(3, 3, 1, 2, seed).unwrap();
            for horizon in 2..=4 {
                let oracle_cost = oracle::brute_force_min_cost(&inst, horizon);
                let solved = solve_p1(&inst, horizon);
                match (oracle_cost, solved) {
                    (Ok(oc), Ok((_, report))) => {
                        assert_eq!(oc, report.cost, "seed {seed} T {horizon}");
                    }
                    (Err(oracle::OracleError::Infeasible), Err(SolveError::Infeasible { .. })) => {}
                    (o, s) => panic!("divergence at seed {seed} T {horizon}: {o:?} vs {s:?}"),
                }
            }
        }
    }

    #[test]
    fn makespan_search_matches_oracle() {
        for seed in 0..20 {
            let inst = generate_grid(3, 3, 1, 2, seed).unwrap();
            let oracle_ms = oracle::brute_force_min_makespan(&inst);
            let search = min_makespan_search(&inst);
            match (oracle_ms, search) {
                (Ok(oms), Ok((t_star, _, _))) => {
                    assert_eq!(oms, t_star, "seed {seed}");
                    assert!(t_star < inst.robot_count() + inst.vertex_count());
                }
                (Err(oracle::OracleError::Infeasible), Err(SolveError::Infeasible { .. })) => {}
                (o, s) => panic!("divergence at seed {seed}: {o:?} vs {s:?}"),
            }
        }
    }

    #[test]
    fn exponential_costs_stop_motion_at_min_makespan() {
        for seed in [0, 3, 9, 14] {
            let inst = generate_grid(3, 3, 0, 2, seed).unwrap();
            let (t_star, _, _) = min_makespan_search(&inst).unwrap();
            let (plan, _) = solve_makespan_exponential(&inst, t_star + 3).unwrap();
            assert_eq!(plan.makespan(), t_star, "seed {seed}");
        }
    }

    #[test]
    fn cost_non_increasing_in_horizon() {
        let inst = generate_grid(3, 3, 0, 2, 21).unwrap();
        let mut prev: Option<PlanCost> = None;
        for horizon in 2..=6 {
            if let Ok((_, report)) = solve_p1(&inst, horizon) {
                if let Some(p) = prev.take() {
                    assert!(report.cost <= p);
                }
                prev = Some(report.cost);
            }
        }
    }

    #[test]
    fn disconnected_instance_is_infeasible() {
        // Two isolated vertices, robot on one, target on the other.
        let inst = Instance::new(
            2,
            vec![(0, 0), (1, 1)],
            vec![],
            vec![0],
            vec![1],
            3,
            CostModel::default(),
            None,
            None,
        )
        .unwrap();
        assert!(matches!(
            solve_p1(&inst, 3),
            Err(SolveError::Infeasible { .. })
        ));
        assert!(matches!(
            min_makespan_search(&inst),
            Err(SolveError::Infeasible { .. })
        ));
    }
}
