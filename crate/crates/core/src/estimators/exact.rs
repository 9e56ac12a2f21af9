use super::convert::classifier_rows;
use crate::error::{Error, Result};
use crate::mdp::{apply_infonce_bellman, exact_occupancy, OccupancyTable, TabularMdp, TabularPolicy};
use ndarray::{Array2, ArrayView1, ArrayView3};

fn check_weights(mdp: &TabularMdp, rho: &Array2<f64>) -> Result<()> {
    if rho.dim() != (mdp.num_states, mdp.num_actions) {
        return Err(Error::ShapeMismatch(format!(
            "anchor weights are {:?}, MDP wants ({}, {})",
            rho.dim(),
            mdp.num_states,
            mdp.num_actions
        )));
    }
    if rho.iter().any(|&p| p < 0.0) || (rho.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(
            "anchor weights must form a distribution over (s, a)".into(),
        ));
    }
    Ok(())
}

fn expected_ce(rho: &Array2<f64>, labels: &OccupancyTable, classifier: &ndarray::Array3<f64>) -> f64 {
    let (ns, na, nf) = classifier.dim();
    let mut loss = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let w = rho[[s, a]];
            if w == 0.0 {
                continue;
            }
            for f in 0..nf {
                let l = labels.probs[[s, a, f]];
                if l > 0.0 {
                    loss -= w * l * classifier[[s, a, f]].ln();
                }
            }
        }
    }
    loss
}

/// Population-level temporal-difference contrastive loss, with softmax
/// denominators replaced by exact expectations over the state prior.
/// The bootstrapped labels use the classifier itself, held constant:
/// the label row for (s, a) is one application of the occupancy Bellman
/// operator to the classifier.
pub fn td_infonce_loss_exact(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    critic: ArrayView3<f64>,
    rho: &Array2<f64>,
    marginal: ArrayView1<f64>,
) -> Result<f64> {
    check_weights(mdp, rho)?;
    let classifier = classifier_rows(critic, marginal)?;
    let as_table = OccupancyTable::new(classifier.clone())?;
    let labels = apply_infonce_bellman(mdp, policy, &as_table)?;
    Ok(expected_ce(rho, &labels, &classifier))
}

/// Population-level Monte Carlo contrastive loss: the label row for
/// (s, a) is the true discounted occupancy row.
pub fn mc_infonce_loss_exact(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    critic: ArrayView3<f64>,
    rho: &Array2<f64>,
    marginal: ArrayView1<f64>,
) -> Result<f64> {
    check_weights(mdp, rho)?;
    let classifier = classifier_rows(critic, marginal)?;
    let labels = exact_occupancy(mdp, policy)?;
    Ok(expected_ce(rho, &labels, &classifier))
}

/// The critic the contrastive losses share at their optimum:
/// log occupancy minus log prior, plus an arbitrary per-anchor offset.
pub fn optimal_critic(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    marginal: ArrayView1<f64>,
    anchor_offset: impl Fn(usize, usize) -> f64,
) -> Result<ndarray::Array3<f64>> {
    let occ = exact_occupancy(mdp, policy)?;
    let (ns, na, nf) = occ.dims();
    let mut critic = ndarray::Array3::zeros((ns, na, nf));
    for s in 0..ns {
        for a in 0..na {
            for f in 0..nf {
                let p = occ.probs[[s, a, f]];
                if p <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "occupancy row ({s}, {a}) has zero mass at {f}; \
                         the log-ratio critic is undefined"
                    )));
                }
                critic[[s, a, f]] = p.ln() - marginal[f].ln() + anchor_offset(s, a);
            }
        }
    }
    Ok(critic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array3};

    fn uniform_rho(mdp: &TabularMdp) -> Array2<f64> {
        Array2::from_elem(
            (mdp.num_states, mdp.num_actions),
            1.0 / (mdp.num_states * mdp.num_actions) as f64,
        )
    }

    #[test]
    fn losses_agree_at_the_optimal_critic() {
        let mdp = TabularMdp::cycle(2, 0.5).unwrap();
        let policy = TabularPolicy::uniform(2, 1);
        let marginal = array![0.4, 0.6];
        let rho = uniform_rho(&mdp);
        let critic =
            optimal_critic(&mdp, &policy, marginal.view(), |s, a| {
                0.3 * s as f64 - 0.1 * a as f64
            })
            .unwrap();
        let td =
            td_infonce_loss_exact(&mdp, &policy, critic.view(), &rho, marginal.view())
                .unwrap();
        let mc =
            mc_infonce_loss_exact(&mdp, &policy, critic.view(), &rho, marginal.view())
                .unwrap();
        assert_abs_diff_eq!(td, mc, epsilon = 1e-12);
    }

    #[test]
    fn losses_differ_away_from_the_optimum() {
        let mdp = TabularMdp::cycle(3, 0.7).unwrap();
        let policy = TabularPolicy::uniform(3, 1);
        let marginal = Array1::from_elem(3, 1.0 / 3.0);
        let rho = uniform_rho(&mdp);
        let mut critic = Array3::zeros((3, 1, 3));
        critic[[0, 0, 1]] = 1.0;
        critic[[2, 0, 0]] = -0.5;
        let td =
            td_infonce_loss_exact(&mdp, &policy, critic.view(), &rho, marginal.view())
                .unwrap();
        let mc =
            mc_infonce_loss_exact(&mdp, &policy, critic.view(), &rho, marginal.view())
                .unwrap();
        assert!((td - mc).abs() > 1e-3, "td {td} vs mc {mc}");
    }

    #[test]
    fn mc_loss_at_optimum_is_the_occupancy_entropy_term() {
        let mdp = TabularMdp::cycle(2, 0.5).unwrap();
        let policy = TabularPolicy::uniform(2, 1);
        let marginal = array![0.5, 0.5];
        let rho = uniform_rho(&mdp);
        let critic = optimal_critic(&mdp, &policy, marginal.view(), |_, _| 0.0).unwrap();
        let mc =
            mc_infonce_loss_exact(&mdp, &policy, critic.view(), &rho, marginal.view())
                .unwrap();
        // Rows are (1/3, 2/3) up to symmetry; the expected cross entropy
        // of a row with itself is its entropy.
        let h = -(1.0 / 3.0) * (1.0f64 / 3.0).ln() - (2.0 / 3.0) * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(mc, h, epsilon = 1e-12);
    }
}
