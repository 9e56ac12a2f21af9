use super::policy::GcPolicyParams;
use crate::error::{Error, Result};
use crate::mdp::TransitionDataset;
use rand::Rng;

/// A batch for goal-conditioned critic and actor updates. Commanded
/// goals are drawn from the whole-dataset state marginal, independent
/// of the anchor transition, so every (state, goal) combination gets
/// gradient mass even when the two never share an episode. The
/// contrastive future states also come from the marginal. `a_policy`
/// and `a_next` are fresh draws from the current policy at (s, g) and
/// (s_next, g).
#[derive(Debug, Clone)]
pub struct GcBatch {
    pub s: Vec<usize>,
    pub a: Vec<usize>,
    pub s_next: Vec<usize>,
    pub g: Vec<usize>,
    pub s_future: Vec<usize>,
    pub a_policy: Vec<usize>,
    pub a_next: Vec<usize>,
}

impl GcBatch {
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
                "contrastive batch needs at least 2 rows, got {n}"
            )));
        }
        if [
            self.a.len(),
            self.s_next.len(),
            self.g.len(),
            self.s_future.len(),
            self.a_policy.len(),
            self.a_next.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::ShapeMismatch("ragged batch columns".into()));
        }
        Ok(())
    }
}

/// A batch for the Monte Carlo goal-conditioned critic. The goal is a
/// hindsight future of the anchor transition, drawn from the same
/// trajectory with a geometric offset, and doubles as the positive
/// column of the contrastive task: the critic scores phi(s, a) against
/// psi(g) directly.
#[derive(Debug, Clone)]
pub struct GcMcBatch {
    pub s: Vec<usize>,
    pub a: Vec<usize>,
    pub g: Vec<usize>,
}

impl GcMcBatch {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

fn check_source(dataset: &TransitionDataset, policy: &GcPolicyParams) -> Result<()> {
    if policy.num_states() != dataset.num_states
        || policy.num_goals() != dataset.num_states
        || policy.num_actions() != dataset.num_actions
    {
        return Err(Error::ShapeMismatch(format!(
            "policy table {}x{}x{} does not match dataset over {} states and {} actions",
            policy.num_states(),
            policy.num_goals(),
            policy.num_actions(),
            dataset.num_states,
            dataset.num_actions
        )));
    }
    Ok(())
}

/// Draw a goal-conditioned TD batch from an episodic dataset.
pub fn sample_gc_batch<R: Rng>(
    dataset: &TransitionDataset,
    policy: &GcPolicyParams,
    n: usize,
    rng: &mut R,
) -> Result<GcBatch> {
    check_source(dataset, policy)?;
    let mut batch = GcBatch {
        s: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        s_next: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        s_future: Vec::with_capacity(n),
        a_policy: Vec::with_capacity(n),
        a_next: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let i = dataset.sample_transition_index(rng);
        let (s, a, sn) = dataset.transition(i);
        let g = dataset.sample_marginal_state(rng);
        batch.s.push(s);
        batch.a.push(a);
        batch.s_next.push(sn);
        batch.g.push(g);
        batch.s_future.push(dataset.sample_marginal_state(rng));
        batch.a_policy.push(policy.sample_action(s, g, rng));
        batch.a_next.push(policy.sample_action(sn, g, rng));
    }
    Ok(batch)
}

/// Draw a goal-conditioned MC batch: hindsight goals from the
/// discounted within-episode future of each anchor transition.
pub fn sample_gc_mc_batch<R: Rng>(
    dataset: &TransitionDataset,
    gamma: f64,
    n: usize,
    rng: &mut R,
) -> Result<GcMcBatch> {
    let mut batch = GcMcBatch {
        s: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let i = dataset.sample_transition_index(rng);
        let (s, a, _) = dataset.transition(i);
        batch.s.push(s);
        batch.a.push(a);
        batch.g.push(dataset.sample_future_state(i, gamma, rng));
    }
    Ok(batch)
}
