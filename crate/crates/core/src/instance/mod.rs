//! Problem instances: motion graph, robots, targets, costs, generators and
//! validators.

mod cost;
pub mod io;

pub use cost::{CostError, CostModel, EdgeLength, ScaledCostTable, TabulatedEntry, DEFAULT_COST_DENOM};

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type VertexId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("vertex {0} out of range (K = {1})")]
    VertexOutOfRange(usize, usize),
    #[error("duplicate {kind} vertex {vertex}")]
    Duplicate { kind: &'static str, vertex: usize },
    #[error("duplicate edge {0}->{1}")]
    DuplicateEdge(usize, usize),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("grid {width}x{height} cannot hold {obstacles} obstacles plus {robots} robots and as many distinct targets")]
    CapacityExceeded {
        width: usize,
        height: usize,
        obstacles: usize,
        robots: usize,
    },
    #[error("grid dimensions must be at least 1x1")]
    EmptyGrid,
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A MAPF instance: a directed motion graph with self-loops, robot and target
/// vertex sets, a default horizon, and a cost model.
///
/// Instances are immutable after construction and safe to share across
/// threads.
#[derive(Clone)]
pub struct Instance {
    width: Option<usize>,
    height: Option<usize>,
    vertex_count: usize,
    /// Sorted, unique directed edges including self-loops; this ordering is
    /// the canonical edge index used everywhere downstream.
    edges: Vec<(VertexId, VertexId)>,
    out_edges: Vec<Vec<u32>>,
    in_edges: Vec<Vec<u32>>,
    edge_lookup: std::collections::HashMap<(u32, u32), u32>,
    obstacles: Vec<VertexId>,
    robots: Vec<VertexId>,
    targets: Vec<VertexId>,
    is_obstacle: Vec<bool>,
    is_robot: Vec<bool>,
    is_target: Vec<bool>,
    horizon: usize,
    cost_model: CostModel,
    costs: ScaledCostTable,
    motion_connected: bool,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.vertex_count == other.vertex_count
            && self.edges == other.edges
            && self.obstacles == other.obstacles
            && self.robots == other.robots
            && self.targets == other.targets
            && self.horizon == other.horizon
            && self.cost_model == other.cost_model
    }
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Instance")
            .field("vertices", &self.vertex_count)
            .field("edges", &self.edges.len())
            .field("obstacles", &self.obstacles.len())
            .field("robots", &self.robots.len())
            .field("targets", &self.targets.len())
            .field("horizon", &self.horizon)
            .field("cost_model", &self.cost_model.variant_name())
            .finish()
    }
}

fn sorted_unique(
    kind: &'static str,
    mut vs: Vec<usize>,
    k: usize,
) -> Result<Vec<usize>, InstanceError> {
    vs.sort_unstable();
    for w in vs.windows(2) {
        if w[0] == w[1] {
            return Err(InstanceError::Duplicate {
                kind,
                vertex: w[0],
            });
        }
    }
    if let Some(&v) = vs.iter().find(|&&v| v >= k) {
        return Err(InstanceError::VertexOutOfRange(v, k));
    }
    Ok(vs)
}

impl Instance {
    /// Build an instance from explicit parts. Structural checks only (index
    /// bounds, duplicates); semantic requirements are reported by
    /// [`validate`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        vertex_count: usize,
        mut edges: Vec<(VertexId, VertexId)>,
        obstacles: Vec<VertexId>,
        robots: Vec<VertexId>,
        targets: Vec<VertexId>,
        horizon: usize,
        cost_model: CostModel,
        width: Option<usize>,
        height: Option<usize>,
    ) -> Result<Instance, InstanceError> {
        let obstacles = sorted_unique("obstacle", obstacles, vertex_count)?;
        let robots = sorted_unique("robot", robots, vertex_count)?;
        let targets = sorted_unique("target", targets, vertex_count)?;
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(InstanceError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        for &(i, j) in &edges {
            if i >= vertex_count {
                return Err(InstanceError::VertexOutOfRange(i, vertex_count));
            }
            if j >= vertex_count {
                return Err(InstanceError::VertexOutOfRange(j, vertex_count));
            }
        }

        let mut is_obstacle = vec![false; vertex_count];
        for &v in &obstacles {
            is_obstacle[v] = true;
        }
        let mut is_robot = vec![false; vertex_count];
        for &v in &robots {
            is_robot[v] = true;
        }
        let mut is_target = vec![false; vertex_count];
        for &v in &targets {
            is_target[v] = true;
        }

        let mut out_edges = vec![Vec::new(); vertex_count];
        let mut in_edges = vec![Vec::new(); vertex_count];
        let mut edge_lookup = std::collections::HashMap::with_capacity(edges.len());
        for (idx, &(i, j)) in edges.iter().enumerate() {
            out_edges[i].push(idx as u32);
            in_edges[j].push(idx as u32);
            edge_lookup.insert((i as u32, j as u32), idx as u32);
        }

        let costs = ScaledCostTable::resolve(&cost_model, &edges, &is_target)?;
        let motion_connected = connected_non_obstacle(vertex_count, &edges, &is_obstacle);

        Ok(Instance {
            width,
            height,
            vertex_count,
            edges,
            out_edges,
            in_edges,
            edge_lookup,
            obstacles,
            robots,
            targets,
            is_obstacle,
            is_robot,
            is_target,
            horizon,
            cost_model,
            costs,
            motion_connected,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }
    pub fn width(&self) -> Option<usize> {
        self.width
    }
    pub fn height(&self) -> Option<usize> {
        self.height
    }
    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
    pub fn obstacles(&self) -> &[VertexId] {
        &self.obstacles
    }
    pub fn robots(&self) -> &[VertexId] {
        &self.robots
    }
    pub fn targets(&self) -> &[VertexId] {
        &self.targets
    }
    pub fn robot_count(&self) -> usize {
        self.robots.len()
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn cost_model(&self) -> &CostModel {
        &self.cost_model
    }
    pub fn costs(&self) -> &ScaledCostTable {
        &self.costs
    }
    pub fn is_obstacle(&self, v: VertexId) -> bool {
        self.is_obstacle[v]
    }
    pub fn is_robot(&self, v: VertexId) -> bool {
        self.is_robot[v]
    }
    pub fn is_target(&self, v: VertexId) -> bool {
        self.is_target[v]
    }
    /// Whether the whole non-obstacle subgraph is one connected component.
    pub fn motion_graph_connected(&self) -> bool {
        self.motion_connected
    }
    /// Edge indices leaving `v`, in canonical order.
    pub fn out_edges(&self, v: VertexId) -> &[u32] {
        &self.out_edges[v]
    }
    /// Edge indices entering `v`, in canonical order.
    pub fn in_edges(&self, v: VertexId) -> &[u32] {
        &self.in_edges[v]
    }
    pub fn edge_endpoints(&self, edge: usize) -> (VertexId, VertexId) {
        self.edges[edge]
    }
    pub fn edge_index(&self, from: VertexId, to: VertexId) -> Option<usize> {
        self.edge_lookup
            .get(&(from as u32, to as u32))
            .map(|&e| e as usize)
    }

    /// Same instance with a different default horizon.
    pub fn with_horizon(mut self, horizon: usize) -> Instance {
        self.horizon = horizon;
        self
    }

    /// Same instance with a different cost model (costs re-resolved).
    pub fn with_cost_model(self, cost_model: CostModel) -> Result<Instance, InstanceError> {
        Instance::new(
            self.vertex_count,
            self.edges,
            self.obstacles,
            self.robots,
            self.targets,
            self.horizon,
            cost_model,
            self.width,
            self.height,
        )
    }

    /// True when robots and targets coincide as sets.
    pub fn robots_on_targets(&self) -> bool {
        self.robots == self.targets
    }
}

fn connected_non_obstacle(k: usize, edges: &[(usize, usize)], is_obstacle: &[bool]) -> bool {
    let free: Vec<usize> = (0..k).filter(|&v| !is_obstacle[v]).collect();
    if free.is_empty() {
        return true;
    }
    let mut adj = vec![Vec::new(); k];
    for &(i, j) in edges {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; k];
    let mut queue = std::collections::VecDeque::new();
    seen[free[0]] = true;
    queue.push_back(free[0]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] && !is_obstacle[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == free.len()
}

/// Generate a 4-neighbor grid instance with obstacles, robots and targets
/// placed uniformly at random without overlap, deterministically from the
/// seed. Vertex ids are row-major.
pub fn generate_grid(
    width: usize,
    height: usize,
    obstacles: usize,
    robots: usize,
    seed: u64,
) -> Result<Instance, GenerateError> {
    if width == 0 || height == 0 {
        return Err(GenerateError::EmptyGrid);
    }
    let k = width * height;
    if obstacles + 2 * robots > k {
        return Err(GenerateError::CapacityExceeded {
            width,
            height,
            obstacles,
            robots,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, k, obstacles + 2 * robots).into_vec();
    let obstacle_cells: Vec<usize> = picked[..obstacles].to_vec();
    let robot_cells: Vec<usize> = picked[obstacles..obstacles + robots].to_vec();
    let target_cells: Vec<usize> = picked[obstacles + robots..].to_vec();

    let mut blocked = vec![false; k];
    for &c in &obstacle_cells {
        blocked[c] = true;
    }

    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let v = y * width + x;
            if blocked[v] {
                continue;
            }
            edges.push((v, v));
            let mut push = |u: usize| {
                if !blocked[u] {
                    edges.push((v, u));
                }
            };
            if x + 1 < width {
                push(v + 1);
            }
            if x > 0 {
                push(v - 1);
            }
            if y + 1 < height {
                push(v + width);
            }
            if y > 0 {
                push(v - width);
            }
        }
    }

    let horizon = 2 * (width + height);
    Ok(Instance::new(
        k,
        edges,
        obstacle_cells,
        robot_cells,
        target_cells,
        horizon,
        CostModel::default(),
        Some(width),
        Some(height),
    )?)
}

/// One named validation check with its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`validate`]: hard checks plus advisory warnings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(ValidationCheck {
            name,
            passed,
            detail: detail.into(),
        });
    }
}

/// Check instance well-formedness. Report-only: nothing here mutates or
/// rejects the instance.
pub fn validate(instance: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let k = instance.vertex_count;

    let missing_loop: Vec<usize> = (0..k)
        .filter(|&v| !instance.is_obstacle[v] && instance.edge_index(v, v).is_none())
        .collect();
    report.push(
        "self_loops",
        missing_loop.is_empty(),
        if missing_loop.is_empty() {
            "every non-obstacle vertex can wait".to_string()
        } else {
            format!("vertices without self-loop: {missing_loop:?}")
        },
    );

    let ordering = cost_ordering_holds(instance, instance.horizon.max(1));
    report.push(
        "cost_ordering",
        ordering,
        if ordering {
            "0 = target wait < non-target wait < move".to_string()
        } else {
            "wait/move cost ordering violated".to_string()
        },
    );

    let n = instance.robots.len();
    let m = instance.targets.len();
    report.push(
        "balanced",
        n == m,
        format!("robots = {n}, targets = {m}"),
    );

    let robots_clear = instance.robots.iter().all(|&v| !instance.is_obstacle[v]);
    let targets_clear = instance.targets.iter().all(|&v| !instance.is_obstacle[v]);
    report.push(
        "off_obstacles",
        robots_clear && targets_clear,
        "robots and targets avoid obstacle cells",
    );

    let obstacle_edges: Vec<(usize, usize)> = instance
        .edges
        .iter()
        .copied()
        .filter(|&(i, j)| instance.is_obstacle[i] || instance.is_obstacle[j])
        .collect();
    report.push(
        "obstacles_isolated",
        obstacle_edges.is_empty(),
        if obstacle_edges.is_empty() {
            "obstacles have no incident edges".to_string()
        } else {
            format!("{} edges touch obstacles", obstacle_edges.len())
        },
    );

    // Robots and targets must share one connected component of the motion
    // graph for any horizon to be feasible.
    let reachable = component_of_robots(instance);
    let all_reachable = instance
        .robots
        .iter()
        .chain(instance.targets.iter())
        .all(|&v| reachable[v]);
    report.push(
        "connected",
        all_reachable,
        if all_reachable {
            "robots and targets share a component".to_string()
        } else {
            "some robot or target is cut off".to_string()
        },
    );

    // Half occupancy or more leaves no slack for the structural feasibility
    // argument; the solver still checks feasibility constructively.
    if 2 * n >= k && n > 0 {
        report.warnings.push(format!(
            "N = {n} reaches K/2 = {}; feasibility is only checked constructively",
            k / 2
        ));
    }

    report
}

fn component_of_robots(instance: &Instance) -> Vec<bool> {
    let k = instance.vertex_count;
    let mut seen = vec![false; k];
    let mut queue = std::collections::VecDeque::new();
    if let Some(&start) = instance.robots.first() {
        seen[start] = true;
        queue.push_back(start);
    }
    let mut undirected = vec![Vec::new(); k];
    for &(i, j) in &instance.edges {
        if i != j {
            undirected[i].push(j);
            undirected[j].push(i);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &undirected[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Does the strict ordering `0 = c_jj (target) < c_ii (non-target) < c_ij`
/// hold for every time step up to `horizon`?
pub fn cost_ordering_holds(instance: &Instance, horizon: usize) -> bool {
    let steps = effective_steps(instance, horizon);
    for t in steps {
        let mut max_wait = BigInt::from(0);
        let mut min_move: Option<BigInt> = None;
        let mut has_nontarget_wait = false;
        for (e, &(i, j)) in instance.edges.iter().enumerate() {
            let c = instance.costs.cost_big(e, t);
            if i == j {
                if instance.is_target[i] {
                    if c != BigInt::from(0) {
                        return false;
                    }
                } else {
                    has_nontarget_wait = true;
                    if c <= BigInt::from(0) {
                        return false;
                    }
                    if c > max_wait {
                        max_wait = c;
                    }
                }
            } else if min_move.as_ref().is_none_or(|m| &c < m) {
                min_move = Some(c);
            }
        }
        if let Some(mv) = min_move {
            if has_nontarget_wait && max_wait >= mv {
                return false;
            }
            if mv <= BigInt::from(0) {
                return false;
            }
        }
    }
    true
}

/// Which time steps carry distinct cost information up to `horizon`.
fn effective_steps(instance: &Instance, horizon: usize) -> Vec<usize> {
    if instance.costs.time_dependent() {
        (1..=horizon.max(1)).collect()
    } else {
        vec![1]
    }
}

/// Optional structural cost properties, each checked over all t <= horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CostConditionReport {
    pub strict_ordering: bool,
    pub no_oscillations: bool,
    pub temporal_urgency: bool,
    pub temporal_subadditivity: bool,
    pub shortest_path_form: bool,
    pub horizon_checked: usize,
}

/// Evaluate the optional cost conditions over the instance horizon.
pub fn validate_cost_conditions(instance: &Instance) -> CostConditionReport {
    let horizon = instance.horizon.max(2);
    let costs = &instance.costs;
    let edges = instance.edges();

    let strict_ordering = cost_ordering_holds(instance, horizon);

    let mut no_oscillations = true;
    let mut temporal_urgency = true;
    let mut temporal_subadditivity = true;

    for t in 1..horizon {
        for (e, &(i, j)) in edges.iter().enumerate() {
            let now = costs.cost_big(e, t);
            let later = costs.cost_big(e, t + 1);
            if now > later {
                temporal_urgency = false;
            }
            if i == j {
                continue;
            }
            // Oscillation i -> j -> i versus waiting at i twice.
            if let (Some(back), Some(wait)) =
                (instance.edge_index(j, i), instance.edge_index(i, i))
            {
                let osc = now.clone() + costs.cost_big(back, t + 1);
                let stay = costs.cost_big(wait, t) + costs.cost_big(wait, t + 1);
                if stay >= osc {
                    no_oscillations = false;
                }
            }
            // Detour i -> k at t then k -> j at t+1 versus direct i -> j at t.
            for &ek in instance.out_edges(i) {
                let (_, k_mid) = instance.edge_endpoints(ek as usize);
                if let Some(e2) = instance.edge_index(k_mid, j) {
                    let detour = costs.cost_big(ek as usize, t) + costs.cost_big(e2, t + 1);
                    if now > detour {
                        temporal_subadditivity = false;
                    }
                }
            }
        }
    }

    // Metric form: move costs are a time-independent positive length.
    let mut shortest_path_form = !costs.is_exponential();
    if shortest_path_form {
        for (e, &(i, j)) in edges.iter().enumerate() {
            if i == j {
                continue;
            }
            let c1 = costs.cost_i64(e, 1).unwrap_or(0);
            if c1 <= 0 {
                shortest_path_form = false;
                break;
            }
            for t in 2..=costs.time_steps() {
                if costs.cost_i64(e, t) != Some(c1) {
                    shortest_path_form = false;
                    break;
                }
            }
        }
    }

    CostConditionReport {
        strict_ordering,
        no_oscillations,
        temporal_urgency,
        temporal_subadditivity,
        shortest_path_form,
        horizon_checked: horizon,
    }
}
