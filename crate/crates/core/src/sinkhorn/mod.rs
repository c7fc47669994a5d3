//! Entropic relaxation via iterative proportional scaling.
//!
//! The relaxed problem couples per-step transports through shared scaling
//! vectors: each slice has the form `diag(u_t) * G_t * diag(v_t)` over a
//! normalized Gibbs kernel `G_t`. One sweep projects onto the starting
//! marginal, forward consistency between consecutive slices, the terminal
//! marginal, and backward consistency, in that order. Capacity bounds are
//! deliberately not enforced here; the integral projection downstream
//! restores them.

pub mod kl;

use crate::instance::Instance;
use thiserror::Error;

/// Epsilon below which the log-domain path engages automatically.
pub const STABILIZE_BELOW_EPSILON: f64 = 0.15;

/// Residual floor treated as converged.
pub const RESIDUAL_FLOOR: f64 = 1e-9;

/// Sweep window for the stabilization stopping rule.
const STABILIZATION_WINDOW: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SinkhornError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("damping must lie in (0, 1], got {0}")]
    BadDamping(f64),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("scalings diverged at sweep {sweep}; retry with the stabilized mode")]
    Diverged { sweep: usize },
    #[error("shadow has {got} slices, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shadow parse error: {0}")]
    Parse(String),
}

/// Normalized Gibbs kernel per time slice, kept in both linear and log form.
pub struct GibbsKernel {
    pub epsilon: f64,
    pub horizon: usize,
    /// Normalized entries per `[t-1][edge]`.
    lin: Vec<Vec<f64>>,
    /// Log of normalized entries per `[t-1][edge]`.
    log: Vec<Vec<f64>>,
    /// Per-slice log normalizer `log z_t`.
    pub log_z: Vec<f64>,
}

impl GibbsKernel {
    pub fn lin_slice(&self, t: usize) -> &[f64] {
        &self.lin[t - 1]
    }
    pub fn log_slice(&self, t: usize) -> &[f64] {
        &self.log[t - 1]
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut buffer = Vec::new();
    for v in values {
        if v > max {
            max = v;
        }
        buffer.push(v);
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = buffer.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Build the normalized Gibbs kernel `exp(-c/eps) / z_t` on the edge support,
/// computed in the log domain so small epsilons do not underflow.
pub fn gibbs_kernel(
    instance: &Instance,
    horizon: usize,
    epsilon: f64,
) -> Result<GibbsKernel, SinkhornError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(SinkhornError::NonPositiveEpsilon(epsilon));
    }
    if horizon == 0 {
        return Err(SinkhornError::ZeroHorizon);
    }
    let edge_count = instance.edge_count();
    let distinct = if instance.costs().time_dependent() {
        horizon
    } else {
        1
    };

    let mut lin = Vec::with_capacity(horizon);
    let mut log = Vec::with_capacity(horizon);
    let mut log_z = Vec::with_capacity(horizon);
    for t in 1..=distinct {
        let raw: Vec<f64> = (0..edge_count)
            .map(|e| -instance.costs().cost_f64(e, t) / epsilon)
            .collect();
        let z = log_sum_exp(raw.iter().copied());
        let log_slice: Vec<f64> = raw.iter().map(|&v| v - z).collect();
        let lin_slice: Vec<f64> = log_slice.iter().map(|&v| v.exp()).collect();
        lin.push(lin_slice);
        log.push(log_slice);
        log_z.push(z);
    }
    // Time-independent costs share one slice across the horizon.
    while lin.len() < horizon {
        lin.push(lin[0].clone());
        log.push(log[0].clone());
        log_z.push(log_z[0]);
    }
    Ok(GibbsKernel {
        epsilon,
        horizon,
        lin,
        log,
        log_z,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilizedMode {
    /// Log domain engages when epsilon is small.
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy)]
pub struct SinkhornParams {
    pub epsilon: f64,
    /// Damping exponent in (0, 1]; 1 is the undamped projection.
    pub damping: f64,
    pub max_sweeps: usize,
    /// Absolute residual target; sweeping also stops when the trailing
    /// window of residuals stabilizes without reaching it.
    pub tol: f64,
    pub stabilized: StabilizedMode,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            epsilon: 0.2,
            damping: 1.0,
            max_sweeps: 1000,
            tol: 1e-3,
            stabilized: StabilizedMode::Auto,
        }
    }
}

/// Scaling vectors for every slice. In log mode the stored values are logs;
/// `linear_u`/`linear_v` recover the linear-domain scalings either way.
pub struct ScalingState {
    pub log_domain: bool,
    /// `u[t-1]`, `v[t-1]` for t = 1..=T.
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub sweeps: usize,
}

impl ScalingState {
    pub fn linear_u(&self, t: usize) -> Vec<f64> {
        let raw = &self.u[t - 1];
        if self.log_domain {
            raw.iter().map(|&x| x.exp()).collect()
        } else {
            raw.clone()
        }
    }
    pub fn linear_v(&self, t: usize) -> Vec<f64> {
        let raw = &self.v[t - 1];
        if self.log_domain {
            raw.iter().map(|&x| x.exp()).collect()
        } else {
            raw.clone()
        }
    }
}

/// The fractional transport produced by the sweeps, with its convergence
/// trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowTransport {
    pub horizon: usize,
    pub epsilon: f64,
    /// Nonnegative mass per `[t-1][edge]`.
    pub slices: Vec<Vec<f64>>,
    /// Residual after each completed sweep.
    pub trace: Vec<f64>,
    pub final_residual: f64,
    pub sweeps: usize,
}

impl ShadowTransport {
    pub fn slice(&self, t: usize) -> &[f64] {
        &self.slices[t - 1]
    }

    /// Row marginal of slice `t` (mass leaving each vertex).
    pub fn row_marginal(&self, instance: &Instance, t: usize) -> Vec<f64> {
        let mut q = vec![0.0; instance.vertex_count()];
        for (e, &(i, _)) in instance.edges().iter().enumerate() {
            q[i] += self.slices[t - 1][e];
        }
        q
    }

    /// Column marginal of slice `t` (mass arriving at each vertex).
    pub fn col_marginal(&self, instance: &Instance, t: usize) -> Vec<f64> {
        let mut q = vec![0.0; instance.vertex_count()];
        for (e, &(_, j)) in instance.edges().iter().enumerate() {
            q[j] += self.slices[t - 1][e];
        }
        q
    }
}

/// Sweep driver. Kept public so tests can step the projections one at a time.
pub struct Sinkhorn<'a> {
    instance: &'a Instance,
    pub kernel: GibbsKernel,
    pub params: SinkhornParams,
    pub state: ScalingState,
    mu: Vec<f64>,
    nu: Vec<f64>,
}

impl<'a> Sinkhorn<'a> {
    pub fn new(
        instance: &'a Instance,
        horizon: usize,
        params: SinkhornParams,
    ) -> Result<Sinkhorn<'a>, SinkhornError> {
        if !(params.damping > 0.0 && params.damping <= 1.0) {
            return Err(SinkhornError::BadDamping(params.damping));
        }
        let kernel = gibbs_kernel(instance, horizon, params.epsilon)?;
        let log_domain = match params.stabilized {
            StabilizedMode::On => true,
            StabilizedMode::Off => false,
            StabilizedMode::Auto => params.epsilon < STABILIZE_BELOW_EPSILON,
        };
        let k = instance.vertex_count();
        let neutral = if log_domain { 0.0 } else { 1.0 };
        let mut mu = vec![0.0; k];
        for &r in instance.robots() {
            mu[r] = 1.0;
        }
        let mut nu = vec![0.0; k];
        for &g in instance.targets() {
            nu[g] = 1.0;
        }
        let mut solver = Sinkhorn {
            instance,
            kernel,
            params,
            state: ScalingState {
                log_domain,
                u: vec![vec![neutral; k]; horizon],
                v: vec![vec![neutral; k]; horizon],
                sweeps: 0,
            },
            mu,
            nu,
        };
        // Boundary normalization with the zero-ratio convention: entries off
        // the robot/target supports start (and stay) at zero, so the slices
        // never carry phantom mass from unoccupied boundary vertices.
        let dead = if log_domain { f64::NEG_INFINITY } else { 0.0 };
        for i in 0..k {
            if solver.mu[i] == 0.0 {
                solver.state.u[0][i] = dead;
            }
            if solver.nu[i] == 0.0 {
                solver.state.v[horizon - 1][i] = dead;
            }
        }
        solver.project_start();
        solver.project_end();
        Ok(solver)
    }

    fn horizon(&self) -> usize {
        self.kernel.horizon
    }

    /// `[G_t v]_i` over out-edges of each vertex.
    fn kernel_v(&self, t: usize) -> Vec<f64> {
        let k = self.instance.vertex_count();
        let v = &self.state.v[t - 1];
        if self.state.log_domain {
            let logk = self.kernel.log_slice(t);
            (0..k)
                .map(|i| {
                    log_sum_exp(self.instance.out_edges(i).iter().map(|&e| {
                        let (_, j) = self.instance.edge_endpoints(e as usize);
                        logk[e as usize] + v[j]
                    }))
                })
                .collect()
        } else {
            let lin = self.kernel.lin_slice(t);
            (0..k)
                .map(|i| {
                    self.instance
                        .out_edges(i)
                        .iter()
                        .map(|&e| {
                            let (_, j) = self.instance.edge_endpoints(e as usize);
                            lin[e as usize] * v[j]
                        })
                        .sum()
                })
                .collect()
        }
    }

    /// `[G_t^T u]_j` over in-edges of each vertex.
    fn kernel_t_u(&self, t: usize) -> Vec<f64> {
        let k = self.instance.vertex_count();
        let u = &self.state.u[t - 1];
        if self.state.log_domain {
            let logk = self.kernel.log_slice(t);
            (0..k)
                .map(|j| {
                    log_sum_exp(self.instance.in_edges(j).iter().map(|&e| {
                        let (i, _) = self.instance.edge_endpoints(e as usize);
                        logk[e as usize] + u[i]
                    }))
                })
                .collect()
        } else {
            let lin = self.kernel.lin_slice(t);
            (0..k)
                .map(|j| {
                    self.instance
                        .in_edges(j)
                        .iter()
                        .map(|&e| {
                            let (i, _) = self.instance.edge_endpoints(e as usize);
                            lin[e as usize] * u[i]
                        })
                        .sum()
                })
                .collect()
        }
    }

    /// Starting marginal projection: scale `u_1` so the first row marginal
    /// matches the robot distribution on its support.
    pub fn project_start(&mut self) {
        let denom = self.kernel_v(1);
        let log_domain = self.state.log_domain;
        let u1 = &mut self.state.u[0];
        for (i, &m) in self.mu.iter().enumerate() {
            if m == 1.0 {
                if log_domain {
                    if denom[i] > f64::NEG_INFINITY {
                        u1[i] = -denom[i];
                    }
                } else if denom[i] > 0.0 {
                    u1[i] = 1.0 / denom[i];
                }
            }
        }
    }

    /// Terminal marginal projection: scale `v_T` so the last column marginal
    /// matches the target distribution on its support.
    pub fn project_end(&mut self) {
        let horizon = self.horizon();
        let denom = self.kernel_t_u(horizon);
        let log_domain = self.state.log_domain;
        let vt = &mut self.state.v[horizon - 1];
        for (j, &m) in self.nu.iter().enumerate() {
            if m == 1.0 {
                if log_domain {
                    if denom[j] > f64::NEG_INFINITY {
                        vt[j] = -denom[j];
                    }
                } else if denom[j] > 0.0 {
                    vt[j] = 1.0 / denom[j];
                }
            }
        }
    }

    /// Departing marginal of layer `t` computed from slice `t` (mass that
    /// arrived), in the linear domain.
    pub fn q_out(&self, t: usize) -> Vec<f64> {
        let ktu = self.kernel_t_u(t);
        let v = &self.state.v[t - 1];
        if self.state.log_domain {
            ktu.iter()
                .zip(v)
                .map(|(&a, &b)| (a + b).exp())
                .collect()
        } else {
            ktu.iter().zip(v).map(|(&a, &b)| a * b).collect()
        }
    }

    /// Departing marginal of layer `t` computed from slice `t+1` (mass about
    /// to leave), in the linear domain.
    pub fn q_in(&self, t: usize) -> Vec<f64> {
        let kv = self.kernel_v(t + 1);
        let u = &self.state.u[t];
        if self.state.log_domain {
            kv.iter().zip(u).map(|(&a, &b)| (a + b).exp()).collect()
        } else {
            kv.iter().zip(u).map(|(&a, &b)| a * b).collect()
        }
    }

    /// Forward consistency projection across layers t = 1..T-1.
    ///
    /// The correction `gamma = sqrt(q_in / q_out)` multiplies `v_t` and
    /// divides `u_{t+1}`. A zero denominator leaves the scalings untouched; a
    /// zero numerator kills the receiving scaling outright (the projection's
    /// continuous limit) and skips the unbounded inverse factor.
    pub fn project_forward(&mut self) {
        let eta = self.params.damping;
        for t in 1..self.horizon() {
            if self.state.log_domain {
                let log_q_out: Vec<f64> = {
                    let ktu = self.kernel_t_u(t);
                    ktu.iter()
                        .zip(&self.state.v[t - 1])
                        .map(|(&a, &b)| a + b)
                        .collect()
                };
                let log_q_in: Vec<f64> = {
                    let kv = self.kernel_v(t + 1);
                    kv.iter().zip(&self.state.u[t]).map(|(&a, &b)| a + b).collect()
                };
                for i in 0..log_q_out.len() {
                    if log_q_out[i] == f64::NEG_INFINITY {
                        continue;
                    }
                    let gamma = 0.5 * (log_q_in[i] - log_q_out[i]);
                    if gamma == f64::NEG_INFINITY {
                        self.state.v[t - 1][i] = f64::NEG_INFINITY;
                    } else if gamma.is_finite() {
                        self.state.v[t - 1][i] += eta * gamma;
                        self.state.u[t][i] -= eta * gamma;
                    }
                }
            } else {
                let q_out = self.q_out(t);
                let q_in = self.q_in(t);
                for i in 0..q_out.len() {
                    if q_out[i] <= 0.0 {
                        continue;
                    }
                    let factor = (q_in[i] / q_out[i]).sqrt().powf(eta);
                    if factor == 0.0 {
                        self.state.v[t - 1][i] = 0.0;
                    } else if factor.is_finite() {
                        self.state.v[t - 1][i] *= factor;
                        self.state.u[t][i] /= factor;
                    }
                }
            }
        }
    }

    /// Backward consistency projection across layers t = T-1..1; the roles of
    /// the two marginals swap and corrections land on `u_{t+1}`.
    pub fn project_backward(&mut self) {
        let eta = self.params.damping;
        for t in (1..self.horizon()).rev() {
            if self.state.log_domain {
                let log_q_out: Vec<f64> = {
                    let kv = self.kernel_v(t + 1);
                    kv.iter().zip(&self.state.u[t]).map(|(&a, &b)| a + b).collect()
                };
                let log_q_in: Vec<f64> = {
                    let ktu = self.kernel_t_u(t);
                    ktu.iter()
                        .zip(&self.state.v[t - 1])
                        .map(|(&a, &b)| a + b)
                        .collect()
                };
                for i in 0..log_q_out.len() {
                    if log_q_out[i] == f64::NEG_INFINITY {
                        continue;
                    }
                    let gamma = 0.5 * (log_q_in[i] - log_q_out[i]);
                    if gamma == f64::NEG_INFINITY {
                        self.state.u[t][i] = f64::NEG_INFINITY;
                    } else if gamma.is_finite() {
                        self.state.u[t][i] += eta * gamma;
                        self.state.v[t - 1][i] -= eta * gamma;
                    }
                }
            } else {
                let q_out = self.q_in(t);
                let q_in = self.q_out(t);
                for i in 0..q_out.len() {
                    if q_out[i] <= 0.0 {
                        continue;
                    }
                    let factor = (q_in[i] / q_out[i]).sqrt().powf(eta);
                    if factor == 0.0 {
                        self.state.u[t][i] = 0.0;
                    } else if factor.is_finite() {
                        self.state.u[t][i] *= factor;
                        self.state.v[t - 1][i] /= factor;
                    }
                }
            }
        }
    }

    /// Residual after a sweep: worst gluing violation plus both boundary
    /// violations, all in the linear domain.
    pub fn residual(&self) -> f64 {
        let horizon = self.horizon();
        let mut glue = 0.0f64;
        for t in 1..horizon {
            let q_out = self.q_out(t);
            let q_in = self.q_in(t);
            let gap = q_out
                .iter()
                .zip(&q_in)
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            glue = glue.max(gap);
        }
        let start_gap = {
            let kv = self.kernel_v(1);
            let u = &self.state.u[0];
            (0..kv.len())
                .map(|i| {
                    let row = if self.state.log_domain {
                        (kv[i] + u[i]).exp()
                    } else {
                        kv[i] * u[i]
                    };
                    (row - self.mu[i]).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let end_gap = {
            let ktu = self.kernel_t_u(horizon);
            let v = &self.state.v[horizon - 1];
            (0..ktu.len())
                .map(|j| {
                    let col = if self.state.log_domain {
                        (ktu[j] + v[j]).exp()
                    } else {
                        ktu[j] * v[j]
                    };
                    (col - self.nu[j]).abs()
                })
                .fold(0.0f64, f64::max)
        };
        glue + start_gap + end_gap
    }

    /// One full sweep; returns the post-sweep residual.
    pub fn sweep(&mut self) -> Result<f64, SinkhornError> {
        self.project_start();
        self.project_forward();
        self.project_end();
        self.project_backward();
        self.state.sweeps += 1;
        if !self.state.log_domain {
            let finite = self
                .state
                .u
                .iter()
                .chain(self.state.v.iter())
                .all(|layer| layer.iter().all(|x| x.is_finite()));
            if !finite {
                return Err(SinkhornError::Diverged {
                    sweep: self.state.sweeps,
                });
            }
        }
        Ok(self.residual())
    }

    /// Current shadow transport.
    pub fn shadow(&self) -> ShadowTransport {
        let horizon = self.horizon();
        let mut slices = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let u = &self.state.u[t - 1];
            let v = &self.state.v[t - 1];
            let slice: Vec<f64> = if self.state.log_domain {
                let logk = self.kernel.log_slice(t);
                self.instance
                    .edges()
                    .iter()
                    .enumerate()
                    .map(|(e, &(i, j))| (u[i] + logk[e] + v[j]).exp())
                    .collect()
            } else {
                let lin = self.kernel.lin_slice(t);
                self.instance
                    .edges()
                    .iter()
                    .enumerate()
                    .map(|(e, &(i, j))| u[i] * lin[e] * v[j])
                    .collect()
            };
            slices.push(slice);
        }
        ShadowTransport {
            horizon,
            epsilon: self.params.epsilon,
            slices,
            trace: Vec::new(),
            final_residual: f64::NAN,
            sweeps: self.state.sweeps,
        }
    }

    /// Sweep until the stopping rule fires: residual at or under the target,
    /// relative stabilization of the trailing window, or the sweep budget.
    pub fn run_to_convergence(&mut self) -> Result<ShadowTransport, SinkhornError> {
        let target = self.params.tol.max(RESIDUAL_FLOOR);
        let mut trace = Vec::new();
        loop {
            let r = self.sweep()?;
            trace.push(r);
            let stop = r < target
                || trace.len() >= self.params.max_sweeps
                || stabilized(&trace);
            if stop {
                let mut shadow = self.shadow();
                shadow.final_residual = r;
                shadow.trace = trace;
                return Ok(shadow);
            }
        }
    }
}

/// Relative stabilization tolerance for the plateau rule.
const PLATEAU_REL_TOL: f64 = 1e-3;

/// Has the residual plateaued over the trailing window?
fn stabilized(trace: &[f64]) -> bool {
    if trace.len() < STABILIZATION_WINDOW + 1 {
        return false;
    }
    let window = &trace[trace.len() - (STABILIZATION_WINDOW + 1)..];
    let max = window.iter().copied().fold(f64::MIN, f64::max);
    let min = window.iter().copied().fold(f64::MAX, f64::min);
    max > 0.0 && (max - min) <= PLATEAU_REL_TOL * max
}

/// Run the full sweep loop with the given parameters.
pub fn run(
    instance: &Instance,
    horizon: usize,
    params: SinkhornParams,
) -> Result<ShadowTransport, SinkhornError> {
    let mut solver = Sinkhorn::new(instance, horizon, params)?;
    solver.run_to_convergence()
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ShadowFile {
    schema_version: u32,
    horizon: usize,
    epsilon: f64,
    sweeps: usize,
    final_residual: f64,
    slices: Vec<ShadowSlice>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ShadowSlice {
    t: usize,
    entries: Vec<(usize, usize, f64)>,
}

/// Shadow dump: sparse per-slice entries on the instance's edges.
pub fn shadow_to_json(instance: &Instance, shadow: &ShadowTransport) -> String {
    let file = ShadowFile {
        schema_version: 1,
        horizon: shadow.horizon,
        epsilon: shadow.epsilon,
        sweeps: shadow.sweeps,
        final_residual: shadow.final_residual,
        slices: (1..=shadow.horizon)
            .map(|t| ShadowSlice {
                t,
                entries: instance
                    .edges()
                    .iter()
                    .enumerate()
                    .filter(|(e, _)| shadow.slice(t)[*e] > 0.0)
                    .map(|(e, &(i, j))| (i, j, shadow.slice(t)[e]))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("shadow serialization")
}

pub fn shadow_from_json(instance: &Instance, text: &str) -> Result<ShadowTransport, SinkhornError> {
    let file: ShadowFile =
        serde_json::from_str(text).map_err(|e| SinkhornError::Parse(e.to_string()))?;
    let mut slices = vec![vec![0.0; instance.edge_count()]; file.horizon];
    for slice in &file.slices {
        if slice.t == 0 || slice.t > file.horizon {
            return Err(SinkhornError::DimensionMismatch {
                expected: file.horizon,
                got: slice.t,
            });
        }
        for &(i, j, mass) in &slice.entries {
            match instance.edge_index(i, j) {
                Some(e) => slices[slice.t - 1][e] = mass,
                None => {
                    return Err(SinkhornError::Parse(format!(
                        "shadow entry {i}->{j} is not an instance edge"
                    )))
                }
            }
        }
    }
    Ok(ShadowTransport {
        horizon: file.horizon,
        epsilon: file.epsilon,
        slices,
        trace: Vec::new(),
        final_residual: file.final_residual,
        sweeps: file.sweeps,
    })
}

/// Residual trace as `sweep,residual` CSV.
pub fn trace_to_csv(shadow: &ShadowTransport) -> String {
    let mut out = String::from("sweep,residual\n");
    for (idx, r) in shadow.trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", idx + 1, r));
    }
    out
}
