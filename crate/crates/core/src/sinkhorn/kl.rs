//! Numeric witnesses for the two relative-entropy identities behind the
//! entropic formulation: the chain decomposition of path-space KL into
//! per-slice terms, and the reduction of a slice KL against a normalized
//! Gibbs kernel into entropy + cost + normalizer terms.
//!
//! Each check computes both sides through independent routes (explicit path
//! tensor summation on one side, the decomposed formula on the other) and
//! returns the pair for equality assertion by the caller.

use super::{gibbs_kernel, ShadowTransport, SinkhornError};
use crate::instance::Instance;
use thiserror::Error;

/// Largest path tensor the decomposition check will materialize.
pub const MAX_TENSOR_ENTRIES: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KlError {
    #[error("path tensor would hold {entries:.0} entries (limit {limit:.0})")]
    TensorTooLarge { entries: f64, limit: f64 },
    #[error("slice has mass {mass} on non-edge {from}->{to}")]
    SupportMismatch { from: usize, to: usize, mass: f64 },
    #[error("shadow and instance disagree: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Sinkhorn(#[from] SinkhornError),
}

fn xlogy(x: f64, ratio: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * ratio.ln()
    }
}

/// A normalized Markov chain over vertices: initial distribution plus
/// row-stochastic step kernels, with the implied joint two-marginals.
struct Chain {
    initial: Vec<f64>,
    /// `kernels[t-1][i][j]`: transition probability at step t.
    kernels: Vec<Vec<Vec<f64>>>,
    /// `marginals[t][i]`: distribution at time t.
    marginals: Vec<Vec<f64>>,
    /// `joints[t-1][i][j] = marginals[t-1][i] * kernels[t-1][i][j]`.
    joints: Vec<Vec<Vec<f64>>>,
}

/// Normalize per-slice edge masses into a consistent Markov chain. Total
/// mass is taken from slice 1; rows with zero outgoing mass keep an all-zero
/// kernel row (they carry no probability).
fn chain_from_slices(
    instance: &Instance,
    slices: &[Vec<f64>],
) -> Result<Chain, KlError> {
    let k = instance.vertex_count();
    let horizon = slices.len();
    let mass: f64 = slices[0].iter().sum();
    if mass <= 0.0 {
        return Err(KlError::DimensionMismatch("first slice carries no mass".into()));
    }

    let mut kernels = Vec::with_capacity(horizon);
    for slice in slices {
        if slice.len() != instance.edge_count() {
            return Err(KlError::DimensionMismatch(format!(
                "slice has {} entries for {} edges",
                slice.len(),
                instance.edge_count()
            )));
        }
        let mut row_sum = vec![0.0f64; k];
        for (e, &(i, _)) in instance.edges().iter().enumerate() {
            row_sum[i] += slice[e];
        }
        let mut kernel = vec![vec![0.0f64; k]; k];
        for (e, &(i, j)) in instance.edges().iter().enumerate() {
            if row_sum[i] > 0.0 {
                kernel[i][j] = slice[e] / row_sum[i];
            }
        }
        kernels.push(kernel);
    }

    let mut initial = vec![0.0f64; k];
    for (e, &(i, _)) in instance.edges().iter().enumerate() {
        initial[i] += slices[0][e] / mass;
    }

    let mut marginals = vec![initial.clone()];
    let mut joints = Vec::with_capacity(horizon);
    for kernel in &kernels {
        let prev = marginals.last().unwrap().clone();
        let mut joint = vec![vec![0.0f64; k]; k];
        let mut next = vec![0.0f64; k];
        for i in 0..k {
            for j in 0..k {
                let m = prev[i] * kernel[i][j];
                joint[i][j] = m;
                next[j] += m;
            }
        }
        joints.push(joint);
        marginals.push(next);
    }

    Ok(Chain {
        initial,
        kernels,
        marginals,
        joints,
    })
}

fn kl_vec(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| xlogy(a, a / b))
        .sum()
}

fn kl_matrix(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(pr, qr)| kl_vec(pr, qr))
        .sum()
}

/// Check the path-space KL decomposition on a tiny instance.
///
/// The left side sums `P log(P/G)` over the full `K^(T+1)` path tensor built
/// from two consistent Markov chains: the shadow's slices (normalized into a
/// chain) and the Gibbs kernel chain at the shadow's epsilon. The right side
/// evaluates the decomposed form: per-step joint KL terms plus the initial
/// marginal KL minus the intermediate marginal KL terms.
pub fn kl_decomposition_check(
    instance: &Instance,
    shadow: &ShadowTransport,
) -> Result<(f64, f64), KlError> {
    let k = instance.vertex_count();
    let horizon = shadow.horizon;
    let entries = (k as f64).powi(horizon as i32 + 1);
    if entries > MAX_TENSOR_ENTRIES {
        return Err(KlError::TensorTooLarge {
            entries,
            limit: MAX_TENSOR_ENTRIES,
        });
    }

    let plan_chain = chain_from_slices(instance, &shadow.slices)?;
    let kernel = gibbs_kernel(instance, horizon, shadow.epsilon)?;
    let gibbs_slices: Vec<Vec<f64>> = (1..=horizon)
        .map(|t| kernel.lin_slice(t).to_vec())
        .collect();
    let reference_chain = chain_from_slices(instance, &gibbs_slices)?;

    // Left route: explicit tensor summation over all paths.
    let mut lhs = 0.0f64;
    let mut path = vec![0usize; horizon + 1];
    loop {
        let mut p = plan_chain.initial[path[0]];
        let mut g = reference_chain.initial[path[0]];
        for t in 1..=horizon {
            if p == 0.0 {
                break;
            }
            p *= plan_chain.kernels[t - 1][path[t - 1]][path[t]];
            g *= reference_chain.kernels[t - 1][path[t - 1]][path[t]];
        }
        lhs += xlogy(p, p / g);

        // Odometer over the path indices.
        let mut pos = horizon + 1;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < k {
                break;
            }
            path[pos] = 0;
        }
        if pos == 0 && path[0] == 0 {
            break;
        }
    }

    // Right route: decomposed sum.
    let mut rhs = kl_vec(&plan_chain.initial, &reference_chain.initial);
    for t in 1..=horizon {
        rhs += kl_matrix(&plan_chain.joints[t - 1], &reference_chain.joints[t - 1]);
        rhs -= kl_vec(
            &plan_chain.marginals[t - 1],
            &reference_chain.marginals[t - 1],
        );
    }

    Ok((lhs, rhs))
}

/// Check the Gibbs reduction of a single slice KL.
///
/// Left: `KL(slice/N || normalized Gibbs kernel)` summed over the sparse
/// entries. Right: `(1/N) sum p log p + (1/N) sum p c / eps + log(1/N) +
/// log z_t`. Entries of the slice must sit on instance edges and total `n`.
pub fn kl_gibbs_identity_check(
    instance: &Instance,
    t: usize,
    slice: &[(usize, usize, f64)],
    epsilon: f64,
    n: f64,
) -> Result<(f64, f64), KlError> {
    let kernel = gibbs_kernel(instance, t.max(1), epsilon)?;
    let lin = kernel.lin_slice(t.max(1));

    let mut lhs = 0.0f64;
    let mut entropy = 0.0f64;
    let mut cost_term = 0.0f64;
    for &(i, j, mass) in slice {
        let Some(e) = instance.edge_index(i, j) else {
            return Err(KlError::SupportMismatch { from: i, to: j, mass });
        };
        if mass == 0.0 {
            continue;
        }
        let p = mass / n;
        lhs += xlogy(p, p / lin[e]);
        entropy += xlogy(mass, mass);
        cost_term += mass * instance.costs().cost_f64(e, t.max(1)) / epsilon;
    }
    let rhs = entropy / n + cost_term / n + (1.0 / n).ln() + kernel.log_z[t.max(1) - 1];
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_grid, CostModel, Instance};
    use crate::sinkhorn::{run, SinkhornParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn complete_instance(k: usize) -> Instance {
        let mut edges = Vec::new();
        for i in 0..k {
            for j in 0..k {
                edges.push((i, j));
            }
        }
        Instance::new(
            k,
            edges,
            vec![],
            vec![0],
            vec![k - 1],
            2,
            CostModel::default(),
            None,
            None,
        )
        .unwrap()
    }

    fn random_shadow(instance: &Instance, horizon: usize, seed: u64) -> ShadowTransport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slices = (0..horizon)
            .map(|_| {
                (0..instance.edge_count())
                    .map(|_| rng.random_range(0.05..1.0))
                    .collect()
            })
            .collect();
        ShadowTransport {
            horizon,
            epsilon: 0.7,
            slices,
            trace: Vec::new(),
            final_residual: 0.0,
            sweeps: 0,
        }
    }

    #[test]
    fn identical_chains_have_zero_divergence() {
        let inst = complete_instance(2);
        let kernel = crate::sinkhorn::gibbs_kernel(&inst, 2, 0.7).unwrap();
        let shadow = ShadowTransport {
            horizon: 2,
            epsilon: 0.7,
            slices: (1..=2).map(|t| kernel.lin_slice(t).to_vec()).collect(),
            trace: Vec::new(),
            final_residual: 0.0,
            sweeps: 0,
        };
        let (lhs, rhs) = kl_decomposition_check(&inst, &shadow).unwrap();
        assert!(lhs.abs() < 1e-12, "lhs {lhs}");
        assert!(rhs.abs() < 1e-12, "rhs {rhs}");
    }

    #[test]
    fn decomposition_matches_tensor_on_random_chains() {
        for seed in 0..20 {
            let inst = complete_instance(2);
            let shadow = random_shadow(&inst, 2, seed);
            let (lhs, rhs) = kl_decomposition_check(&inst, &shadow).unwrap();
            let scale = lhs.abs().max(1e-12);
            assert!(
                (lhs - rhs).abs() / scale < 1e-10,
                "seed {seed}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn decomposition_holds_for_converged_shadows() {
        let inst = complete_instance(3);
        let shadow = run(
            &inst,
            2,
            SinkhornParams {
                epsilon: 0.4,
                max_sweeps: 200,
                ..Default::default()
            },
        )
        .unwrap();
        let (lhs, rhs) = kl_decomposition_check(&inst, &shadow).unwrap();
        let scale = lhs.abs().max(1e-12);
        assert!((lhs - rhs).abs() / scale < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn tensor_budget_is_enforced() {
        let inst = generate_grid(4, 4, 0, 2, 3).unwrap();
        let shadow = random_shadow(&inst, 4, 1);
        let err = kl_decomposition_check(&inst, &shadow).unwrap_err();
        assert!(matches!(err, KlError::TensorTooLarge { .. }));
    }

    #[test]
    fn gibbs_identity_zero_when_slice_is_scaled_kernel() {
        let inst = complete_instance(2);
        let kernel = crate::sinkhorn::gibbs_kernel(&inst, 1, 0.9).unwrap();
        let n = 2.0;
        let slice: Vec<(usize, usize, f64)> = inst
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| (i, j, n * kernel.lin_slice(1)[e]))
            .collect();
        let (lhs, rhs) = kl_gibbs_identity_check(&inst, 1, &slice, 0.9, n).unwrap();
        assert!(lhs.abs() < 1e-12, "lhs {lhs}");
        assert!(rhs.abs() < 1e-10, "rhs {rhs}");
    }

    #[test]
    fn gibbs_identity_on_random_slices() {
        let inst = complete_instance(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in 0..20 {
            let mut masses: Vec<f64> = (0..inst.edge_count())
                .map(|_| rng.random_range(0.01..1.0))
                .collect();
            let total: f64 = masses.iter().sum();
            let n = 2.0;
            for m in &mut masses {
                *m *= n / total;
            }
            let slice: Vec<(usize, usize, f64)> = inst
                .edges()
                .iter()
                .enumerate()
                .map(|(e, &(i, j))| (i, j, masses[e]))
                .collect();
            let (lhs, rhs) = kl_gibbs_identity_check(&inst, 1, &slice, 0.35, n).unwrap();
            let scale = lhs.abs().max(1e-12);
            assert!(
                (lhs - rhs).abs() / scale < 1e-10,
                "case {case}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn off_support_mass_is_rejected() {
        let inst = generate_grid(2, 2, 0, 1, 1).unwrap();
        // Diagonal moves are not edges in a 4-neighbor grid.
        let err = kl_gibbs_identity_check(&inst, 1, &[(0, 3, 0.5)], 0.5, 1.0).unwrap_err();
        assert!(matches!(err, KlError::SupportMismatch { .. }));
    }

    #[test]
    fn concentrated_slice_matches_closed_form() {
        let inst = complete_instance(2);
        let kernel = crate::sinkhorn::gibbs_kernel(&inst, 1, 0.6).unwrap();
        let e = inst.edge_index(0, 1).unwrap();
        let n = 1.0;
        let (lhs, rhs) = kl_gibbs_identity_check(&inst, 1, &[(0, 1, n)], 0.6, n).unwrap();
        let expected = (1.0 / (n * kernel.lin_slice(1)[e])).ln();
        assert!((lhs - expected).abs() < 1e-12);
        assert!((rhs - expected).abs() < 1e-10);
    }
}
