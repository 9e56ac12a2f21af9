use super::repr::RepresentationPair;
use crate::error::{Error, Result};
use crate::mdp::OccupancyTable;
use ndarray::{Array2, Array3, ArrayView1, ArrayView3};

/// Turn dense critic values into occupancy rows against a state prior:
///
///   p(s_future | anchor) = prior(s_future) e^{f} / sum_s prior(s) e^{f}
///
/// computed over all states with max-subtraction.
pub fn classifier_rows(critic: ArrayView3<f64>, prior: ArrayView1<f64>) -> Result<Array3<f64>> {
    let (ns, na, nf) = critic.dim();
    if prior.len() != nf {
        return Err(Error::ShapeMismatch(format!(
            "prior has {} entries for {nf} future states",
            prior.len()
        )));
    }
    if prior.iter().any(|&p| p < 0.0) || (prior.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(
            "prior must be a distribution".into(),
        ));
    }
    if prior.iter().any(|&p| p == 0.0) {
        log::warn!(
            "state prior has zero-mass entries; those future states are unrepresentable"
        );
    }
    let mut out = Array3::zeros((ns, na, nf));
    for s in 0..ns {
        for a in 0..na {
            let row = critic.slice(ndarray::s![s, a, ..]);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for f in 0..nf {
                let v = prior[f] * (row[f] - max).exp();
                out[[s, a, f]] = v;
                sum += v;
            }
            if !(sum > 0.0) {
                return Err(Error::Numerical(format!(
                    "classifier row ({s}, {a}) has no mass"
                )));
            }
            for f in 0..nf {
                out[[s, a, f]] /= sum;
            }
        }
    }
    Ok(out)
}

/// Occupancy estimate of a learned critic under the empirical state
/// marginal of the training data.
pub fn occupancy_from_critic(
    reps: &RepresentationPair,
    marginal: ArrayView1<f64>,
) -> Result<OccupancyTable> {
    let critic = reps.critic_table();
    OccupancyTable::new(classifier_rows(critic.view(), marginal)?)
}

/// Action values implied by a learned critic for a reward granted on
/// entering each future state.
pub fn q_from_representations(
    reps: &RepresentationPair,
    marginal: ArrayView1<f64>,
    reward: &[f64],
) -> Result<Array2<f64>> {
    let occ = occupancy_from_critic(reps, marginal)?;
    let (ns, na, nf) = occ.dims();
    if reward.len() != nf {
        return Err(Error::ShapeMismatch(format!(
            "reward has {} entries for {nf} states",
            reward.len()
        )));
    }
    let mut q = Array2::zeros((ns, na));
    for s in 0..ns {
        for a in 0..na {
            q[[s, a]] = (0..nf)
                .map(|f| occ.probs[[s, a, f]] * reward[f])
                .sum();
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::repr::{init_representations, AnchorSpace};
    use crate::estimators::EstimatorConfig;
    use crate::mdp::{exact_occupancy, exact_q, TabularMdp, TabularPolicy};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1, Array3};

    #[test]
    fn constant_critic_returns_the_prior() {
        let critic = Array3::from_elem((2, 2, 3), 4.2);
        let prior = array![0.5, 0.3, 0.2];
        let rows = classifier_rows(critic.view(), prior.view()).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                for f in 0..3 {
                    assert_abs_diff_eq!(rows[[s, a, f]], prior[f], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn two_state_hand_case() {
        let mut critic = Array3::zeros((1, 1, 2));
        critic[[0, 0, 0]] = 2.0f64.ln();
        critic[[0, 0, 1]] = 0.0;
        let prior = array![0.5, 0.5];
        let rows = classifier_rows(critic.view(), prior.view()).unwrap();
        assert_abs_diff_eq!(rows[[0, 0, 0]], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[[0, 0, 1]], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn optimal_critic_recovers_occupancy_exactly() {
        let mdp = TabularMdp::cycle(3, 0.8).unwrap();
        let policy = TabularPolicy::uniform(3, 1);
        let occ = exact_occupancy(&mdp, &policy).unwrap();
        let marginal: Array1<f64> = array![0.2, 0.5, 0.3];
        let mut critic = Array3::<f64>::zeros((3, 1, 3));
        for s in 0..3 {
            for f in 0..3 {
                // Add an anchor-dependent constant to exercise shift
                // invariance of the row softmax.
                critic[[s, 0, f]] =
                    occ.probs[[s, 0, f]].ln() - marginal[f].ln() + 0.7 * s as f64;
            }
        }
        let rows = classifier_rows(critic.view(), marginal.view()).unwrap();
        for (a, b) in rows.iter().zip(occ.probs.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rows_are_distributions_for_wild_critic_values() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let critic = Array3::from_shape_fn((3, 2, 4), |_| rng.gen_range(-200.0..200.0));
        let prior = array![0.25, 0.25, 0.25, 0.25];
        let rows = classifier_rows(critic.view(), prior.view()).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                let sum: f64 = (0..4).map(|f| rows[[s, a, f]]).sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn learned_representation_path_is_consistent() {
        let config = EstimatorConfig {
            repr_dim: 3,
            ..Default::default()
        };
        let (reps, _) = init_representations(&config, AnchorSpace::plain(4, 2), 2).unwrap();
        let marginal = Array1::from_elem(4, 0.25);
        let occ = occupancy_from_critic(&reps, marginal.view()).unwrap();
        assert_eq!(occ.dims(), (4, 2, 4));
    }

    #[test]
    fn q_examples() {
        let mdp = TabularMdp::cycle(2, 0.5).unwrap();
        let policy = TabularPolicy::uniform(2, 1);
        let occ = exact_occupancy(&mdp, &policy).unwrap();
        let marginal: Array1<f64> = array![0.5, 0.5];

        let config = EstimatorConfig {
            repr_dim: 2,
            ..Default::default()
        };
        let (mut reps, _) =
            init_representations(&config, AnchorSpace::plain(2, 1), 0).unwrap();
        // Encode the optimal critic in rank-2 tables: phi rows select a
        // basis vector per anchor, psi columns store the log-ratios.
        for s in 0..2 {
            reps.phi.row_mut(s).fill(0.0);
            reps.phi[[s, s]] = 1.0;
            for f in 0..2 {
                reps.psi[[f, s]] = occ.probs[[s, 0, f]].ln() - marginal[f].ln();
            }
        }

        let ones = q_from_representations(&reps, marginal.view(), &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(ones[[0, 0]], 1.0, epsilon = 1e-12);

        let q = q_from_representations(&reps, marginal.view(), &[0.0, 1.0]).unwrap();
        let truth = exact_q(&mdp, &policy, &[0.0, 1.0]).unwrap();
        for (a, b) in q.iter().zip(truth.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }
}
