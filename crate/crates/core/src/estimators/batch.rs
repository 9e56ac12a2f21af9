use crate::error::{Error, Result};
use crate::mdp::{TabularPolicy, TransitionDataset};
use rand::Rng;

/// Batch for temporal-difference losses: transitions with SARSA next
/// actions and future states drawn from the dataset marginal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TdBatch {
    pub s: Vec<usize>,
    pub a: Vec<usize>,
    pub s_next: Vec<usize>,
    pub a_next: Vec<usize>,
    pub s_future: Vec<usize>,
}

impl TdBatch {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.s.len();
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch needs at least 2 rows, got {n}"
            )));
        }
        if [
            self.a.len(),
            self.s_next.len(),
            self.a_next.len(),
            self.s_future.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::ShapeMismatch("ragged batch columns".into()));
        }
        Ok(())
    }
}

/// Batch for Monte Carlo losses: each row's future state comes from the
/// same trajectory at a geometric offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McBatch {
    pub s: Vec<usize>,
    pub a: Vec<usize>,
    pub s_future: Vec<usize>,
}

impl McBatch {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.s.len();
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch needs at least 2 rows, got {n}"
            )));
        }
        if self.a.len() != n || self.s_future.len() != n {
            return Err(Error::ShapeMismatch("ragged batch columns".into()));
        }
        Ok(())
    }
}

/// Draw a TD batch: uniform transitions, fresh SARSA actions from the
/// evaluated policy at the next state, marginal future states.
pub fn sample_td_batch<R: Rng>(
    dataset: &TransitionDataset,
    policy: &TabularPolicy,
    n: usize,
    rng: &mut R,
) -> TdBatch {
    let mut batch = TdBatch {
        s: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        s_next: Vec::with_capacity(n),
        a_next: Vec::with_capacity(n),
        s_future: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let i = dataset.sample_transition_index(rng);
        let (s, a, sn) = dataset.transition(i);
        batch.s.push(s);
        batch.a.push(a);
        batch.s_next.push(sn);
        batch.a_next.push(policy.sample_action(sn, rng));
        batch.s_future.push(dataset.sample_marginal_state(rng));
    }
    batch
}

/// Draw an MC batch: uniform transitions with within-trajectory futures
/// at geometric offsets.
pub fn sample_mc_batch<R: Rng>(
    dataset: &TransitionDataset,
    gamma: f64,
    n: usize,
    rng: &mut R,
) -> McBatch {
    let mut batch = McBatch {
        s: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        s_future: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let i = dataset.sample_transition_index(rng);
        let (s, a, _) = dataset.transition(i);
        batch.s.push(s);
        batch.a.push(a);
        batch.s_future.push(dataset.sample_future_state(i, gamma, rng));
    }
    batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_gridworld, sample_transitions, GridworldSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (crate::mdp::TabularMdp, TabularPolicy, TransitionDataset) {
        let mdp = build_gridworld(&GridworldSpec::open(3, 3), 0.9).unwrap();
        let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
        let data = sample_transitions(&mdp, &policy, 500, 50, 0).unwrap();
        (mdp, policy, data)
    }

    #[test]
    fn td_batch_is_deterministic_given_rng_seed() {
        let (_, policy, data) = fixture();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = sample_td_batch(&data, &policy, 16, &mut r1);
        let b = sample_td_batch(&data, &policy, 16, &mut r2);
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn td_batch_rows_are_dataset_transitions() {
        let (mdp, policy, data) = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = sample_td_batch(&data, &policy, 64, &mut rng);
        for i in 0..batch.len() {
            assert!(mdp.transition[[batch.s[i], batch.a[i], batch.s_next[i]]] > 0.0);
            assert!(batch.a_next[i] < mdp.num_actions);
            assert!(batch.s_future[i] < mdp.num_states);
        }
    }

    #[test]
    fn mc_batch_futures_lie_in_state_space() {
        let (_, _, data) = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = sample_mc_batch(&data, 0.9, 64, &mut rng);
        batch.validate().unwrap();
        assert!(batch.s_future.iter().all(|&f| f < 9));
    }

    #[test]
    fn ragged_batch_rejected() {
        let bad = TdBatch {
            s: vec![0, 1],
            a: vec![0, 0],
            s_next: vec![1],
            a_next: vec![0, 0],
            s_future: vec![0, 1],
        };
        assert!(bad.validate().is_err());
    }
}
