use super::{OccupancyTable, TabularMdp, TabularPolicy};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use ndarray::{Array2, Array3};

/// Closed-form discounted state occupancy under `policy`.
///
/// With P the (s, a) -> s' transition rows and P_pi the state-to-state
/// matrix under the policy, the occupancy is
/// O = (1 - gamma) * P * (I - gamma * P_pi)^{-1}.
pub fn exact_occupancy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<OccupancyTable> {
    check_policy_shape(mdp, policy)?;
    let ns = mdp.num_states;
    let na = mdp.num_actions;
    let gamma = mdp.discount;

    let p_pi = mdp.policy_transition(policy);
    let mut m = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for sn in 0..ns {
            m[(s, sn)] -= gamma * p_pi[[s, sn]];
        }
    }

    // Solve X * M = P row-block-wise by solving M^T X^T = P^T.
    let mut p_flat = DMatrix::<f64>::zeros(ns, ns * na);
    for s in 0..ns {
        for a in 0..na {
            for sn in 0..ns {
                p_flat[(sn, s * na + a)] = mdp.transition[[s, a, sn]];
            }
        }
    }
    let lu = m.transpose().lu();
    let solved = lu
        .solve(&p_flat)
        .ok_or_else(|| Error::Numerical("singular occupancy solve".into()))?;

    let residual = (m.transpose() * &solved - &p_flat).abs().max();
    if residual > 1e-8 {
        return Err(Error::Numerical(format!(
            "occupancy solve residual {residual:.3e} exceeds 1e-8"
        )));
    }

    let scale = 1.0 - gamma;
    let mut probs = Array3::<f64>::zeros((ns, na, ns));
    for s in 0..ns {
        for a in 0..na {
            for sn in 0..ns {
                probs[[s, a, sn]] = scale * solved[(sn, s * na + a)];
            }
        }
    }
    OccupancyTable::new(probs)
}

/// One application of the InfoNCE Bellman operator:
/// (T C)(s, a, .) = (1 - gamma) p(s'=. | s, a) + gamma E_{s', a'}[C(s', a', .)].
pub fn apply_infonce_bellman(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    c: &OccupancyTable,
) -> Result<OccupancyTable> {
    check_policy_shape(mdp, policy)?;
    let ns = mdp.num_states;
    let na = mdp.num_actions;
    if c.dims() != (ns, na, ns) {
        return Err(Error::ShapeMismatch(format!(
            "occupancy table is {:?}, MDP wants ({ns}, {na}, {ns})",
            c.dims()
        )));
    }
    let gamma = mdp.discount;

    // Policy-averaged table: E_a'[C(s', a', .)] per next state s'.
    let mut avg = Array2::<f64>::zeros((ns, ns));
    for sn in 0..ns {
        for a in 0..na {
            let w = policy.probs[[sn, a]];
            if w == 0.0 {
                continue;
            }
            for f in 0..ns {
                avg[[sn, f]] += w * c.probs[[sn, a, f]];
            }
        }
    }

    let mut out = Array3::<f64>::zeros((ns, na, ns));
    for s in 0..ns {
        for a in 0..na {
            for sn in 0..ns {
                let p = mdp.transition[[s, a, sn]];
                if p == 0.0 {
                    continue;
                }
                out[[s, a, sn]] += (1.0 - gamma) * p;
                for f in 0..ns {
                    out[[s, a, f]] += gamma * p * avg[[sn, f]];
                }
            }
        }
    }
    OccupancyTable::new(out)
}

/// Mean absolute elementwise difference between two occupancy tables,
/// averaged over all (s, a, s_future) entries.
pub fn occupancy_error(estimate: &OccupancyTable, truth: &OccupancyTable) -> Result<f64> {
    occupancy_error_raw(estimate.probs.view(), truth.probs.view())
}

/// Same error metric for arrays whose rows are not necessarily valid
/// distributions, such as a successor table mid-training.
pub fn occupancy_error_raw(
    estimate: ndarray::ArrayView3<f64>,
    truth: ndarray::ArrayView3<f64>,
) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let total: f64 = estimate
        .iter()
        .zip(truth.iter())
        .map(|(&e, &t)| (e - t).abs())
        .sum();
    Ok(total / estimate.len() as f64)
}

/// Exact (1 - gamma)-normalized action values for a reward granted on
/// entering each future state: Q(s, a) = sum_f p(f | s, a) r(f).
pub fn exact_q(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    reward: &[f64],
) -> Result<Array2<f64>> {
    if reward.len() != mdp.num_states {
        return Err(Error::ShapeMismatch(format!(
            "reward has {} entries for {} states",
            reward.len(),
            mdp.num_states
        )));
    }
    let occ = exact_occupancy(mdp, policy)?;
    let mut q = Array2::<f64>::zeros((mdp.num_states, mdp.num_actions));
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            q[[s, a]] = (0..mdp.num_states)
                .map(|f| occ.probs[[s, a, f]] * reward[f])
                .sum();
        }
    }
    Ok(q)
}

fn check_policy_shape(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<()> {
    if policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions {
        return Err(Error::ShapeMismatch(format!(
            "policy is {}x{}, MDP wants {}x{}",
            policy.num_states(),
            policy.num_actions(),
            mdp.num_states,
            mdp.num_actions
        )));
    }
    Ok(())
}
