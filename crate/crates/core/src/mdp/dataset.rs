use super::{sample_index, TabularMdp, TabularPolicy};
use crate::error::{Error, Result};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One rollout: `states.len() == actions.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Episode {
    pub fn num_transitions(&self) -> usize {
        self.actions.len()
    }
}

/// Episodic transition data with the empirical state marginal.
#[derive(Debug, Clone)]
pub struct TransitionDataset {
    pub num_states: usize,
    pub num_actions: usize,
    pub episodes: Vec<Episode>,
    /// Normalized visit counts over every stored state.
    pub empirical_marginal: Array1<f64>,
    pub policy_id: String,
    pub seed: u64,
    /// Flat (episode, step) index over transitions.
    flat: Vec<(u32, u32)>,
    /// Every stored state in order, for marginal sampling.
    state_pool: Vec<u32>,
}

impl TransitionDataset {
    pub fn from_episodes(
        episodes: Vec<Episode>,
        num_states: usize,
        num_actions: usize,
        policy_id: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if episodes.iter().map(Episode::num_transitions).sum::<usize>() == 0 {
            return Err(Error::Dataset("dataset holds no transitions".into()));
        }
        let mut counts = vec![0.0f64; num_states];
        let mut flat = Vec::new();
        let mut state_pool = Vec::new();
        for (e, ep) in episodes.iter().enumerate() {
            if ep.states.len() != ep.actions.len() + 1 {
                return Err(Error::Dataset(format!(
                    "episode {e}: {} states for {} actions",
                    ep.states.len(),
                    ep.actions.len()
                )));
            }
            for &s in &ep.states {
                if s >= num_states {
                    return Err(Error::Dataset(format!(
                        "episode {e}: state {s} out of range"
                    )));
                }
                counts[s] += 1.0;
                state_pool.push(s as u32);
            }
            for &a in &ep.actions {
                if a >= num_actions {
                    return Err(Error::Dataset(format!(
                        "episode {e}: action {a} out of range"
                    )));
                }
            }
            for t in 0..ep.num_transitions() {
                flat.push((e as u32, t as u32));
            }
        }
        let total: f64 = counts.iter().sum();
        let empirical_marginal = Array1::from_vec(counts) / total;
        Ok(Self {
            num_states,
            num_actions,
            episodes,
            empirical_marginal,
            policy_id: policy_id.into(),
            seed,
            flat,
            state_pool,
        })
    }

    pub fn num_transitions(&self) -> usize {
        self.flat.len()
    }

    /// The (s, a, s') triple at flat transition index `i`.
    pub fn transition(&self, i: usize) -> (usize, usize, usize) {
        let (e, t) = self.flat[i];
        let ep = &self.episodes[e as usize];
        let t = t as usize;
        (ep.states[t], ep.actions[t], ep.states[t + 1])
    }

    pub fn sample_transition_index<R: Rng>(&self, rng: &mut R) -> usize {
        rng.gen_range(0..self.flat.len())
    }

    /// A state drawn from the empirical marginal (uniform over stored states).
    pub fn sample_marginal_state<R: Rng>(&self, rng: &mut R) -> usize {
        self.state_pool[rng.gen_range(0..self.state_pool.len())] as usize
    }

    /// A discounted future state of transition `i` within its episode:
    /// s_{t+delta} with delta ~ Geometric(1 - gamma), resampled until the
    /// offset stays inside the episode.
    pub fn sample_future_state<R: Rng>(&self, i: usize, gamma: f64, rng: &mut R) -> usize {
        let (e, t) = self.flat[i];
        let ep = &self.episodes[e as usize];
        let remaining = ep.num_transitions() - t as usize;
        for _ in 0..64 {
            let delta = sample_geometric(gamma, rng);
            if delta <= remaining {
                return ep.states[t as usize + delta];
            }
        }
        ep.states[t as usize + 1]
    }

    /// Check that every stored transition has positive probability under `mdp`.
    pub fn validate_support(&self, mdp: &TabularMdp) -> Result<()> {
        for i in 0..self.num_transitions() {
            let (s, a, sn) = self.transition(i);
            if mdp.transition[[s, a, sn]] <= 0.0 {
                return Err(Error::Dataset(format!(
                    "transition ({s}, {a}, {sn}) has zero probability in the MDP"
                )));
            }
        }
        Ok(())
    }
}

/// delta ~ Geometric(1 - gamma) on {1, 2, ...}: P(delta = k) = (1-gamma) gamma^{k-1}.
pub(crate) fn sample_geometric<R: Rng>(gamma: f64, rng: &mut R) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    let u: f64 = rng.gen();
    1 + ((1.0 - u).ln() / gamma.ln()).floor() as usize
}

/// Roll out `count` transitions in episodes of at most `episode_len`
/// steps, restarting from the initial distribution between episodes.
pub fn sample_transitions(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    count: usize,
    episode_len: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    if count == 0 {
        return Err(Error::Dataset("requested an empty dataset".into()));
    }
    if episode_len == 0 {
        return Err(Error::Dataset("episode_len must be positive".into()));
    }
    if policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions {
        return Err(Error::ShapeMismatch(format!(
            "policy is {}x{}, MDP wants {}x{}",
            policy.num_states(),
            policy.num_actions(),
            mdp.num_states,
            mdp.num_actions
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::new();
    let mut remaining = count;
    while remaining > 0 {
        let steps = episode_len.min(remaining);
        let mut states = Vec::with_capacity(steps + 1);
        let mut actions = Vec::with_capacity(steps);
        let mut s = sample_index(
            mdp.initial_dist.as_slice().expect("contiguous p0"),
            &mut rng,
        );
        states.push(s);
        for _ in 0..steps {
            let a = policy.sample_action(s, &mut rng);
            let row = mdp.transition.slice(ndarray::s![s, a, ..]);
            let sn = sample_index(row.as_slice().expect("contiguous row"), &mut rng);
            actions.push(a);
            states.push(sn);
            s = sn;
        }
        episodes.push(Episode { states, actions });
        remaining -= steps;
    }
    TransitionDataset::from_episodes(
        episodes,
        mdp.num_states,
        mdp.num_actions,
        "behavior",
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn deterministic_cycle_rollout() {
        let mdp = TabularMdp::cycle(2, 0.5).unwrap();
        let policy = TabularPolicy::uniform(2, 1);
        let data = sample_transitions(&mdp, &policy, 4, 4, 0).unwrap();
        assert_eq!(data.num_transitions(), 4);
        let triples: Vec<_> = (0..4).map(|i| data.transition(i)).collect();
        assert_eq!(
            triples,
            vec![(0, 0, 1), (1, 0, 0), (0, 0, 1), (1, 0, 0)]
        );
    }

    #[test]
    fn empty_request_is_an_error() {
        let mdp = TabularMdp::cycle(2, 0.5).unwrap();
        let policy = TabularPolicy::uniform(2, 1);
        assert!(sample_transitions(&mdp, &policy, 0, 4, 0).is_err());
    }

    #[test]
    fn self_loop_marginal() {
        let mut p = ndarray::Array3::<f64>::zeros((1, 1, 1));
        p[[0, 0, 0]] = 1.0;
        let mdp = TabularMdp::new(p, array![1.0], 0.5).unwrap();
        let policy = TabularPolicy::uniform(1, 1);
        let data = sample_transitions(&mdp, &policy, 10, 5, 3).unwrap();
        assert_abs_diff_eq!(data.empirical_marginal[0], 1.0);
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = crate::mdp::GridworldSpec::open(3, 3);
        let mdp = crate::mdp::build_gridworld(&spec, 0.9).unwrap();
        let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
        let a = sample_transitions(&mdp, &policy, 200, 50, 17).unwrap();
        let b = sample_transitions(&mdp, &policy, 200, 50, 17).unwrap();
        assert_eq!(a.episodes, b.episodes);
        let c = sample_transitions(&mdp, &policy, 200, 50, 18).unwrap();
        assert_ne!(a.episodes, c.episodes);
    }

    #[test]
    fn marginal_matches_visit_counts() {
        let spec = crate::mdp::GridworldSpec::open(2, 2);
        let mdp = crate::mdp::build_gridworld(&spec, 0.9).unwrap();
        let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
        let data = sample_transitions(&mdp, &policy, 100, 10, 5).unwrap();
        let mut counts = vec![0.0; 4];
        let mut total = 0.0;
        for ep in &data.episodes {
            for &s in &ep.states {
                counts[s] += 1.0;
                total += 1.0;
            }
        }
        for s in 0..4 {
            assert_abs_diff_eq!(data.empirical_marginal[s], counts[s] / total, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(data.empirical_marginal.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn geometric_future_stays_in_episode() {
        use rand::SeedableRng;
        let mdp = TabularMdp::cycle(8, 0.9).unwrap();
        let policy = TabularPolicy::uniform(8, 1);
        let data = sample_transitions(&mdp, &policy, 100, 20, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let i = data.sample_transition_index(&mut rng);
            let f = data.sample_future_state(i, 0.9, &mut rng);
            assert!(f < 8);
        }
    }

    #[test]
    fn geometric_offsets_have_the_right_mean() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gamma = 0.9;
        let n = 20_000;
        let mut sum = 0.0;
        let mut ones = 0usize;
        for _ in 0..n {
            let d = sample_geometric(gamma, &mut rng);
            sum += d as f64;
            if d == 1 {
                ones += 1;
            }
        }
        assert_abs_diff_eq!(sum / n as f64, 10.0, epsilon = 0.3);
        assert_abs_diff_eq!(ones as f64 / n as f64, 0.1, epsilon = 0.01);
    }

    #[test]
    fn support_validation_catches_corruption() {
        let mdp = TabularMdp::cycle(2, 0.5).unwrap();
        let bad = TransitionDataset::from_episodes(
            vec![Episode {
                states: vec![0, 0],
                actions: vec![0],
            }],
            2,
            1,
            "manual",
            0,
        )
        .unwrap();
        assert!(bad.validate_support(&mdp).is_err());
    }
}
