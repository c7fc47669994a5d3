//! Node-split time-expanded flow network and the mapping between unit flows
//! and transport plans.
//!
//! Layers 0 and T hold one plain node per vertex; every intermediate layer
//! holds an in/out pair joined by a capacity-1 internal arc, which is the
//! sole mechanism enforcing the one-robot-per-vertex rule. Node and arc
//! counts follow the closed forms `2KT` and `K(T-1)` internal arcs.

use crate::instance::Instance;
use crate::plan::{PlanError, TransportPlan};
use crate::project::PruneMask;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TegArcKind {
    /// Edge traversal arriving at layer `t`.
    Movement,
    /// In-node to out-node arc inside layer `t`.
    Internal,
}

#[derive(Debug, Clone, Copy)]
pub struct TegArc {
    pub kind: TegArcKind,
    /// Arrival layer for movement arcs, the layer itself for internal arcs.
    pub t: usize,
    pub from_vertex: usize,
    pub to_vertex: usize,
    /// Canonical edge index for movement arcs; unused for internal arcs.
    pub edge: u32,
    pub tail: u32,
    pub head: u32,
}

/// The layered flow network for one instance and horizon.
#[derive(Debug)]
pub struct TimeExpandedGraph {
    pub vertex_count: usize,
    pub horizon: usize,
    pub node_count: usize,
    /// Arcs in deterministic order: per arrival layer t = 1..=T, movement
    /// arcs in canonical edge order, then the internal arcs of layer t.
    pub arcs: Vec<TegArc>,
    /// Net supply per node: +1 at robot start nodes, -1 at target end nodes.
    pub supplies: Vec<i32>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TegError {
    #[error("horizon 0 with robots not already on targets")]
    HorizonZeroWithUnreachedTargets,
    #[error("flow on arc {arc} is {value}, expected 0 or 1")]
    NonIntegralFlow { arc: usize, value: i32 },
    #[error("flow conservation violated at node {node} (imbalance {imbalance})")]
    ConservationViolation { node: usize, imbalance: i32 },
    #[error("plan does not fit this graph: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl TimeExpandedGraph {
    /// Node holding departures from vertex `v` at layer `t` (t < T).
    pub fn out_node(&self, t: usize, v: usize) -> usize {
        let k = self.vertex_count;
        if t == 0 {
            v
        } else {
            // intermediate layer: in-block then out-block
            k + 2 * k * (t - 1) + k + v
        }
    }

    /// Node receiving arrivals at vertex `v` at layer `t` (t >= 1).
    pub fn in_node(&self, t: usize, v: usize) -> usize {
        let k = self.vertex_count;
        if t == self.horizon {
            k + 2 * k * (self.horizon - 1) + v
        } else {
            k + 2 * k * (t - 1) + v
        }
    }

    pub fn movement_arc_count(&self) -> usize {
        self.arcs
            .iter()
            .filter(|a| a.kind == TegArcKind::Movement)
            .count()
    }

    pub fn internal_arc_count(&self) -> usize {
        self.arcs
            .iter()
            .filter(|a| a.kind == TegArcKind::Internal)
            .count()
    }
}

/// Build the full time-expanded graph for `horizon` steps.
pub fn build(instance: &Instance, horizon: usize) -> Result<TimeExpandedGraph, TegError> {
    build_masked(instance, horizon, None)
}

/// Build the time-expanded graph keeping only movement arcs allowed by the
/// mask (all arcs when `mask` is `None`). Internal arcs are always present.
pub fn build_masked(
    instance: &Instance,
    horizon: usize,
    mask: Option<&PruneMask>,
) -> Result<TimeExpandedGraph, TegError> {
    let k = instance.vertex_count();

    if horizon == 0 {
        if !instance.robots_on_targets() {
            return Err(TegError::HorizonZeroWithUnreachedTargets);
        }
        // Degenerate graph: one layer, no arcs, balanced supplies.
        return Ok(TimeExpandedGraph {
            vertex_count: k,
            horizon: 0,
            node_count: k,
            arcs: Vec::new(),
            supplies: vec![0; k],
        });
    }

    let node_count = 2 * k * horizon;
    let mut graph = TimeExpandedGraph {
        vertex_count: k,
        horizon,
        node_count,
        arcs: Vec::new(),
        supplies: vec![0; node_count],
    };

    for t in 1..=horizon {
        for (e, &(i, j)) in instance.edges().iter().enumerate() {
            if let Some(mask) = mask {
                if !mask.keeps(t, e) {
                    continue;
                }
            }
            let tail = graph.out_node(t - 1, i) as u32;
            let head = graph.in_node(t, j) as u32;
            graph.arcs.push(TegArc {
                kind: TegArcKind::Movement,
                t,
                from_vertex: i,
                to_vertex: j,
                edge: e as u32,
                tail,
                head,
            });
        }
        if t < horizon {
            for v in 0..k {
                let tail = graph.in_node(t, v) as u32;
                let head = graph.out_node(t, v) as u32;
                graph.arcs.push(TegArc {
                    kind: TegArcKind::Internal,
                    t,
                    from_vertex: v,
                    to_vertex: v,
                    edge: u32::MAX,
                    tail,
                    head,
                });
            }
        }
    }

    for &r in instance.robots() {
        let node = graph.out_node(0, r);
        graph.supplies[node] += 1;
    }
    for &g in instance.targets() {
        let node = graph.in_node(horizon, g);
        graph.supplies[node] -= 1;
    }
    Ok(graph)
}

/// Reconstruct the transport plan from per-arc unit flows (indexed like
/// `teg.arcs`). Verifies integrality and conservation first; failures here
/// indicate solver bugs, not user error.
pub fn flow_to_plan(teg: &TimeExpandedGraph, flows: &[i32]) -> Result<TransportPlan, TegError> {
    if flows.len() != teg.arcs.len() {
        return Err(TegError::DimensionMismatch(format!(
            "{} flow values for {} arcs",
            flows.len(),
            teg.arcs.len()
        )));
    }
    let mut imbalance: Vec<i32> = teg.supplies.clone();
    for (idx, (arc, &f)) in teg.arcs.iter().zip(flows).enumerate() {
        if f != 0 && f != 1 {
            return Err(TegError::NonIntegralFlow { arc: idx, value: f });
        }
        imbalance[arc.tail as usize] -= f;
        imbalance[arc.head as usize] += f;
    }
    if let Some((node, &value)) = imbalance.iter().enumerate().find(|&(_, &v)| v != 0) {
        return Err(TegError::ConservationViolation {
            node,
            imbalance: value,
        });
    }

    let mut slices = vec![Vec::new(); teg.horizon];
    for (arc, &f) in teg.arcs.iter().zip(flows) {
        if f == 1 && arc.kind == TegArcKind::Movement {
            slices[arc.t - 1].push((arc.from_vertex, arc.to_vertex));
        }
    }
    Ok(TransportPlan::new(teg.vertex_count, slices)?)
}

/// Inverse of [`flow_to_plan`]: movement arcs carry the plan's unit moves and
/// internal arcs carry the implied occupancy.
pub fn plan_to_flow(teg: &TimeExpandedGraph, plan: &TransportPlan) -> Result<Vec<i32>, TegError> {
    if plan.horizon() != teg.horizon {
        return Err(TegError::DimensionMismatch(format!(
            "plan horizon {} vs graph horizon {}",
            plan.horizon(),
            teg.horizon
        )));
    }
    let mut move_set = std::collections::HashSet::new();
    for t in 1..=teg.horizon {
        for &(i, j) in plan.slice(t) {
            move_set.insert((t, i, j));
        }
    }
    let mut flows = vec![0i32; teg.arcs.len()];
    let mut matched = 0usize;
    for (idx, arc) in teg.arcs.iter().enumerate() {
        match arc.kind {
            TegArcKind::Movement => {
                if move_set.contains(&(arc.t, arc.from_vertex, arc.to_vertex)) {
                    flows[idx] = 1;
                    matched += 1;
                }
            }
            TegArcKind::Internal => {
                flows[idx] = plan.marginal(arc.t)[arc.from_vertex] as i32;
            }
        }
    }
    let plan_moves: usize = (1..=teg.horizon).map(|t| plan.slice(t).len()).sum();
    if matched != plan_moves {
        return Err(TegError::DimensionMismatch(format!(
            "{} plan moves have no matching arc",
            plan_moves - matched
        )));
    }
    Ok(flows)
}

/// Plain-text debug dump of the network, one arc per line.
pub fn dump_arcs(teg: &TimeExpandedGraph) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# nodes={} horizon={} arcs={}",
        teg.node_count,
        teg.horizon,
        teg.arcs.len()
    );
    for arc in &teg.arcs {
        let kind = match arc.kind {
            TegArcKind::Movement => "move",
            TegArcKind::Internal => "hold",
        };
        let _ = writeln!(
            out,
            "{kind} t={} {}->{} nodes {}->{}",
            arc.t, arc.from_vertex, arc.to_vertex, arc.tail, arc.head
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_grid;

    fn path2() -> Instance {
        generate_grid(1, 2, 0, 1, 1).unwrap()
    }

    #[test]
    fn two_vertex_path_horizon_one() {
        let teg = build(&path2(), 1).unwrap();
        assert_eq!(teg.node_count, 4);
        assert_eq!(teg.internal_arc_count(), 0);
        // Two self-loops plus both directions of the path edge.
        assert_eq!(teg.movement_arc_count(), 4);
        assert_eq!(teg.supplies.iter().filter(|&&s| s == 1).count(), 1);
        assert_eq!(teg.supplies.iter().filter(|&&s| s == -1).count(), 1);
    }

    #[test]
    fn two_vertex_path_horizon_two() {
        let teg = build(&path2(), 2).unwrap();
        assert_eq!(teg.node_count, 2 * 2 * 2);
        assert_eq!(teg.internal_arc_count(), 2);
        assert_eq!(teg.movement_arc_count(), 8);
    }

    #[test]
    fn grid_counts_match_closed_forms() {
        let inst = generate_grid(3, 3, 0, 2, 7).unwrap();
        let horizon = 3;
        let teg = build(&inst, horizon).unwrap();
        let k = 9;
        assert_eq!(teg.node_count, 2 * k * horizon);
        assert_eq!(teg.internal_arc_count(), k * (horizon - 1));
        assert_eq!(teg.movement_arc_count(), inst.edge_count() * horizon);
    }

    #[test]
    fn horizon_zero_requires_settled_robots() {
        let err = build(&path2(), 0).unwrap_err();
        assert_eq!(err, TegError::HorizonZeroWithUnreachedTargets);
    }

    #[test]
    fn forced_path_round_trips() {
        let inst = path2();
        let teg = build(&inst, 1).unwrap();
        let (robot, target) = (inst.robots()[0], inst.targets()[0]);
        let mut flows = vec![0; teg.arcs.len()];
        let idx = teg
            .arcs
            .iter()
            .position(|a| a.from_vertex == robot && a.to_vertex == target)
            .unwrap();
        flows[idx] = 1;
        let plan = flow_to_plan(&teg, &flows).unwrap();
        assert_eq!(plan.slice(1), &[(robot, target)]);
        assert_eq!(plan_to_flow(&teg, &plan).unwrap(), flows);
    }

    #[test]
    fn zero_robots_yield_an_all_wait_empty_plan() {
        let inst = crate::instance::Instance::new(
            2,
            vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            vec![],
            vec![],
            vec![],
            2,
            crate::instance::CostModel::default(),
            None,
            None,
        )
        .unwrap();
        let teg = build(&inst, 2).unwrap();
        let plan = flow_to_plan(&teg, &vec![0; teg.arcs.len()]).unwrap();
        assert_eq!(plan.horizon(), 2);
        assert!(plan.slices().iter().all(|s| s.is_empty()));
        assert_eq!(plan.move_count(), 0);
    }

    #[test]
    fn conservation_violations_are_caught() {
        let inst = path2();
        let teg = build(&inst, 1).unwrap();
        let mut flows = vec![0; teg.arcs.len()];
        // Push along a self-loop that does not serve the target demand.
        let idx = teg
            .arcs
            .iter()
            .position(|a| a.from_vertex == a.to_vertex && a.from_vertex == inst.robots()[0])
            .unwrap();
        flows[idx] = 1;
        let err = flow_to_plan(&teg, &flows).unwrap_err();
        assert!(matches!(err, TegError::ConservationViolation { .. }));
    }
}
