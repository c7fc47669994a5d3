//! Brute-force ground truth on tiny instances.
//!
//! States are occupancy bitmasks (anonymous robots), one step is an exact
//! min-cost perfect matching between consecutive occupancies through the
//! edge set. Rotations and simultaneous swaps are admitted as feasible here
//! on purpose: the occupancy dynamics mirror the flow polytope, and cost
//! alone is what rules such motions out of optima.

use crate::instance::Instance;
use crate::plan::PlanCost;
use std::collections::BTreeSet;
use thiserror::Error;

/// Hard enumeration limits; beyond them the oracle refuses rather than
/// silently truncating.
pub const MAX_VERTICES: usize = 16;
pub const MAX_ROBOTS: usize = 3;
pub const MAX_HORIZON: usize = 6;

/// Set of occupied vertices packed into a bit word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupancy(pub u32);

impl Occupancy {
    pub fn from_vertices(vs: &[usize]) -> Occupancy {
        Occupancy(vs.iter().fold(0u32, |m, &v| m | (1 << v)))
    }

    pub fn vertices(self) -> Vec<usize> {
        (0..32).filter(|&v| self.0 & (1 << v) != 0).collect()
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for brute force (K = {k}, N = {n}, T = {t})")]
    BudgetExceeded { k: usize, n: usize, t: usize },
    #[error("target occupancy unreachable")]
    Infeasible,
    #[error("cost model needs big-integer arithmetic; the oracle only prices plain integer tables")]
    UnsupportedCosts,
}

fn check_budget(instance: &Instance, t: usize) -> Result<(), OracleError> {
    let k = instance.vertex_count();
    let n = instance.robot_count();
    if k > MAX_VERTICES || n > MAX_ROBOTS || t > MAX_HORIZON {
        return Err(OracleError::BudgetExceeded { k, n, t });
    }
    Ok(())
}

fn check_costs(instance: &Instance) -> Result<(), OracleError> {
    if instance.costs().is_exponential() {
        return Err(OracleError::UnsupportedCosts);
    }
    Ok(())
}

/// Minimum cost of one slice moving occupancy `from` to occupancy `to` at
/// time `t`: the cheapest perfect matching through the edge set, scaled
/// integers. `None` when no matching exists.
fn min_step_cost(instance: &Instance, from: &[usize], to: &[usize], t: usize) -> Option<i64> {
    best_over_matchings(instance, from, to, t, &mut |_| {})
}

type ArcVisitor<'a> = &'a mut dyn FnMut(&[(usize, usize)]);

/// Enumerate all perfect matchings (N <= 3, so at most 6 permutations),
/// returning the minimum cost and feeding every optimal matching's arcs to
/// `on_optimal` on a second pass.
fn best_over_matchings(
    instance: &Instance,
    from: &[usize],
    to: &[usize],
    t: usize,
    on_optimal: ArcVisitor<'_>,
) -> Option<i64> {
    let n = from.len();
    debug_assert_eq!(n, to.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<i64> = None;
    let mut assignments: Vec<(i64, Vec<(usize, usize)>)> = Vec::new();

    permute(&mut order, 0, &mut |perm| {
        let mut cost = 0i64;
        let mut arcs = Vec::with_capacity(n);
        for (slot, &p) in perm.iter().enumerate() {
            let (i, j) = (from[slot], to[p]);
            match instance.edge_index(i, j) {
                Some(e) => {
                    cost += instance
                        .costs()
                        .cost_i64(e, t)
                        .expect("oracle requires plain integer costs");
                    arcs.push((i, j));
                }
                None => return,
            }
        }
        if best.as_ref().is_none_or(|&b| cost < b) {
            best = Some(cost);
        }
        assignments.push((cost, arcs));
    });

    if let Some(b) = best {
        for (cost, arcs) in &assignments {
            if *cost == b {
                on_optimal(arcs);
            }
        }
    }
    best
}

fn permute(order: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == order.len() {
        visit(order);
        return;
    }
    for i in k..order.len() {
        order.swap(k, i);
        permute(order, k + 1, visit);
        order.swap(k, i);
    }
}

fn all_occupancies(k: usize, n: usize) -> Vec<Occupancy> {
    (0u32..(1 << k))
        .filter(|m| m.count_ones() as usize == n)
        .map(Occupancy)
        .collect()
}

/// All reachable successor occupancies of `state` with their minimum slice
/// costs at time `t`.
pub fn step_transitions(
    state: Occupancy,
    instance: &Instance,
    t: usize,
) -> Result<Vec<(Occupancy, i64)>, OracleError> {
    check_budget(instance, 1)?;
    check_costs(instance)?;
    let from = state.vertices();
    let n = from.len();
    let k = instance.vertex_count();
    let mut out = Vec::new();
    for succ in all_occupancies(k, n) {
        if let Some(cost) = min_step_cost(instance, &from, &succ.vertices(), t) {
            out.push((succ, cost));
        }
    }
    Ok(out)
}

/// Does any perfect matching move `from` to `to` through the edge set?
fn feasible_step(instance: &Instance, from: &[usize], to: &[usize]) -> bool {
    let n = from.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut found = false;
    permute(&mut order, 0, &mut |perm| {
        if found {
            return;
        }
        if perm
            .iter()
            .enumerate()
            .all(|(slot, &p)| instance.edge_index(from[slot], to[p]).is_some())
        {
            found = true;
        }
    });
    found
}

fn dp_min<FCost>(
    instance: &Instance,
    horizon: usize,
    step_cost: FCost,
) -> Result<i64, OracleError>
where
    FCost: Fn(&[usize], &[usize], usize) -> Option<i64>,
{
    check_budget(instance, horizon)?;
    check_costs(instance)?;
    let start = Occupancy::from_vertices(instance.robots());
    let goal = Occupancy::from_vertices(instance.targets());
    let states = all_occupancies(instance.vertex_count(), instance.robot_count());
    let index: std::collections::HashMap<Occupancy, usize> =
        states.iter().enumerate().map(|(i, &s)| (s, i)).collect();

    let mut dist: Vec<Option<i64>> = vec![None; states.len()];
    dist[index[&start]] = Some(0);
    for t in 1..=horizon {
        let mut next: Vec<Option<i64>> = vec![None; states.len()];
        for (si, s) in states.iter().enumerate() {
            let Some(d) = dist[si] else { continue };
            let from = s.vertices();
            for (ti, target_state) in states.iter().enumerate() {
                if let Some(c) = step_cost(&from, &target_state.vertices(), t) {
                    let nd = d + c;
                    if next[ti].is_none_or(|cur| nd < cur) {
                        next[ti] = Some(nd);
                    }
                }
            }
        }
        dist = next;
    }
    dist[index[&goal]].ok_or(OracleError::Infeasible)
}

/// Exact minimum plan cost over the horizon, as a scaled integer matching
/// the instance's cost denominator.
pub fn brute_force_min_cost(instance: &Instance, horizon: usize) -> Result<PlanCost, OracleError> {
    if horizon == 0 {
        return if instance.robots_on_targets() {
            Ok(PlanCost::zero(instance.costs().denom))
        } else {
            Err(OracleError::Infeasible)
        };
    }
    let scaled = dp_min(instance, horizon, |from, to, t| {
        min_step_cost(instance, from, to, t)
    })?;
    Ok(PlanCost::from_scaled(scaled, instance.costs().denom))
}

/// Exact minimum number of non-wait moves needed within the horizon.
pub fn brute_force_min_moves(instance: &Instance, horizon: usize) -> Result<usize, OracleError> {
    if horizon == 0 {
        return if instance.robots_on_targets() {
            Ok(0)
        } else {
            Err(OracleError::Infeasible)
        };
    }
    let moves = dp_min(instance, horizon, |from, to, t| {
        move_count_step(instance, from, to, t)
    })?;
    Ok(moves as usize)
}

fn move_count_step(instance: &Instance, from: &[usize], to: &[usize], t: usize) -> Option<i64> {
    // Minimum number of non-wait arcs over all feasible matchings.
    let n = from.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<i64> = None;
    let _ = t;
    permute(&mut order, 0, &mut |perm| {
        let mut moves = 0i64;
        for (slot, &p) in perm.iter().enumerate() {
            let (i, j) = (from[slot], to[p]);
            if instance.edge_index(i, j).is_none() {
                return;
            }
            if i != j {
                moves += 1;
            }
        }
        if best.is_none_or(|b| moves < b) {
            best = Some(moves);
        }
    });
    best
}

/// Smallest horizon whose occupancy dynamics reach the target set: a
/// breadth-first search over occupancies using cost-free reachability.
pub fn brute_force_min_makespan(instance: &Instance) -> Result<usize, OracleError> {
    check_budget(instance, 1)?;
    let start = Occupancy::from_vertices(instance.robots());
    let goal = Occupancy::from_vertices(instance.targets());
    if start == goal {
        return Ok(0);
    }
    let bound = instance.robot_count() + instance.vertex_count() - 1;
    let states = all_occupancies(instance.vertex_count(), instance.robot_count());
    let mut frontier = vec![start];
    let mut seen = std::collections::HashSet::new();
    seen.insert(start);
    for depth in 1..=bound {
        let mut next = Vec::new();
        for state in frontier {
            let from = state.vertices();
            for &succ in &states {
                if seen.contains(&succ) && succ != goal {
                    continue;
                }
                if feasible_step(instance, &from, &succ.vertices()) {
                    if succ == goal {
                        return Ok(depth);
                    }
                    if seen.insert(succ) {
                        next.push(succ);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Err(OracleError::Infeasible)
}

/// Union of time-stamped arcs `(t, i, j)` that appear in at least one
/// minimum-cost plan over the horizon.
pub fn optimal_arc_union(
    instance: &Instance,
    horizon: usize,
) -> Result<BTreeSet<(usize, usize, usize)>, OracleError> {
    check_budget(instance, horizon)?;
    check_costs(instance)?;
    let start = Occupancy::from_vertices(instance.robots());
    let goal = Occupancy::from_vertices(instance.targets());
    let states = all_occupancies(instance.vertex_count(), instance.robot_count());
    let index: std::collections::HashMap<Occupancy, usize> =
        states.iter().enumerate().map(|(i, &s)| (s, i)).collect();

    // forward[t][s]: cheapest cost to reach s after t steps.
    let mut forward: Vec<Vec<Option<i64>>> = vec![vec![None; states.len()]; horizon + 1];
    forward[0][index[&start]] = Some(0);
    // Cache per-step min costs between occupancy pairs.
    let mut step_costs: Vec<Vec<Vec<Option<i64>>>> = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let mut table = vec![vec![None; states.len()]; states.len()];
        for (si, s) in states.iter().enumerate() {
            let from = s.vertices();
            for (ti, target_state) in states.iter().enumerate() {
                table[si][ti] = min_step_cost(instance, &from, &target_state.vertices(), t);
            }
        }
        for si in 0..states.len() {
            let Some(d) = forward[t - 1][si] else { continue };
            for ti in 0..states.len() {
                if let Some(c) = table[si][ti] {
                    let nd = d + c;
                    if forward[t][ti].is_none_or(|cur| nd < cur) {
                        forward[t][ti] = Some(nd);
                    }
                }
            }
        }
        step_costs.push(table);
    }
    let opt = forward[horizon][index[&goal]].ok_or(OracleError::Infeasible)?;

    // backward[t][s]: cheapest cost from s at time t to the goal at T.
    let mut backward: Vec<Vec<Option<i64>>> = vec![vec![None; states.len()]; horizon + 1];
    backward[horizon][index[&goal]] = Some(0);
    for t in (0..horizon).rev() {
        for si in 0..states.len() {
            for ti in 0..states.len() {
                if let (Some(c), Some(b)) = (step_costs[t][si][ti], backward[t + 1][ti]) {
                    let nb = c + b;
                    if backward[t][si].is_none_or(|cur| nb < cur) {
                        backward[t][si] = Some(nb);
                    }
                }
            }
        }
    }

    let mut union = BTreeSet::new();
    for t in 1..=horizon {
        for (si, s) in states.iter().enumerate() {
            let Some(f) = forward[t - 1][si] else { continue };
            for (ti, target_state) in states.iter().enumerate() {
                let (Some(c), Some(b)) = (step_costs[t - 1][si][ti], backward[t][ti]) else {
                    continue;
                };
                if f + c + b == opt {
                    // Every optimal matching of this optimal transition
                    // contributes its arcs.
                    best_over_matchings(
                        instance,
                        &s.vertices(),
                        &target_state.vertices(),
                        t,
                        &mut |arcs| {
                            for &(i, j) in arcs {
                                union.insert((t, i, j));
                            }
                        },
                    );
                }
            }
        }
    }
    Ok(union)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_grid, CostModel};

    #[test]
    fn settled_robots_cost_nothing() {
        let inst = generate_grid(2, 2, 0, 1, 3).unwrap();
        // Force robots onto targets by rebuilding with equal sets.
        let inst = crate::instance::Instance::new(
            inst.vertex_count(),
            inst.edges().to_vec(),
            vec![],
            vec![0],
            vec![0],
            4,
            CostModel::default(),
            Some(2),
            Some(2),
        )
        .unwrap();
        let cost = brute_force_min_cost(&inst, 3).unwrap();
        assert_eq!(cost, PlanCost::zero(cost.denom));
        assert_eq!(brute_force_min_makespan(&inst).unwrap(), 0);
    }

    #[test]
    fn forced_move_costs_one_move() {
        let inst = generate_grid(1, 2, 0, 1, 1).unwrap();
        let cost = brute_force_min_cost(&inst, 1).unwrap();
        assert_eq!(cost, PlanCost::from_scaled(2, 2)); // move cost 1.0
        assert_eq!(brute_force_min_makespan(&inst).unwrap(), 1);
        assert_eq!(brute_force_min_moves(&inst, 1).unwrap(), 1);
    }

    #[test]
    fn path_distance_sets_makespan() {
        // 1x4 path, robot on one end, target on the other.
        let inst = crate::instance::Instance::new(
            4,
            vec![
                (0, 0),
                (0, 1),
                (1, 0),
                (1, 1),
                (1, 2),
                (2, 1),
                (2, 2),
                (2, 3),
                (3, 2),
                (3, 3),
            ],
            vec![],
            vec![0],
            vec![3],
            6,
            CostModel::default(),
            None,
            None,
        )
        .unwrap();
        assert_eq!(brute_force_min_makespan(&inst).unwrap(), 3);
    }

    #[test]
    fn single_robot_on_path_has_two_successors() {
        let inst = generate_grid(1, 2, 0, 1, 1).unwrap();
        let state = Occupancy::from_vertices(instance_robots(&inst));
        let succ = step_transitions(state, &inst, 1).unwrap();
        assert_eq!(succ.len(), 2);
    }

    fn instance_robots(inst: &Instance) -> &[usize] {
        inst.robots()
    }

    #[test]
    fn staying_put_costs_the_non_target_waits() {
        // Robots on one target and one plain cell; holding still for a step
        // costs exactly the plain cell's wait.
        let grid = generate_grid(2, 2, 0, 1, 3).unwrap();
        let inst = crate::instance::Instance::new(
            grid.vertex_count(),
            grid.edges().to_vec(),
            vec![],
            vec![0, 3],
            vec![1, 3],
            3,
            CostModel::default(),
            Some(2),
            Some(2),
        )
        .unwrap();
        let state = Occupancy::from_vertices(&[0, 3]);
        let succ = step_transitions(state, &inst, 1).unwrap();
        let (_, stay_cost) = succ.iter().find(|(s, _)| *s == state).unwrap();
        // Vertex 3 is a target (free wait); vertex 0 pays 0.5, scaled by 2.
        assert_eq!(*stay_cost, 1);
    }

    #[test]
    fn rotation_on_a_cycle_is_feasible() {
        // Directed 3-cycle with self-loops; robots on 0 and 1, targets on 1 and 2.
        let inst = crate::instance::Instance::new(
            3,
            vec![
                (0, 0),
                (0, 1),
                (1, 1),
                (1, 2),
                (2, 0),
                (2, 2),
            ],
            vec![],
            vec![0, 1],
            vec![1, 2],
            3,
            CostModel::default(),
            None,
            None,
        )
        .unwrap();
        let state = Occupancy::from_vertices(&[0, 1]);
        let succ = step_transitions(state, &inst, 1).unwrap();
        // The rotated occupancy {1, 2} must be reachable at the cost of two moves.
        let rotated = Occupancy::from_vertices(&[1, 2]);
        let (_, cost) = succ.iter().find(|(s, _)| *s == rotated).unwrap();
        assert_eq!(*cost, 2 * 2); // two moves at scaled cost 2 each
    }

    #[test]
    fn budget_is_a_hard_error() {
        let inst = generate_grid(5, 5, 0, 2, 1).unwrap();
        let err = brute_force_min_cost(&inst, 2).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExceeded { .. }));
    }

    #[test]
    fn dp_value_non_increasing_in_horizon() {
        let inst = generate_grid(3, 3, 0, 2, 11).unwrap();
        let mut prev: Option<PlanCost> = None;
        for t in 2..=5 {
            if let Ok(c) = brute_force_min_cost(&inst, t) {
                if let Some(p) = prev.take() {
                    assert!(c <= p, "cost increased from {p:?} to {c:?} at T={t}");
                }
                prev = Some(c);
            }
        }
        assert!(prev.is_some());
    }
}
