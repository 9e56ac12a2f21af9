use crate::error::{Error, Result};
use ndarray::Array3;

/// Tabular successor table M[s][a][s_future] with its TD step size.
/// Rows drift toward distributions as updates accumulate but are not
/// constrained per step.
#[derive(Debug, Clone)]
pub struct SuccessorTable {
    pub m: Array3<f64>,
    pub alpha: f64,
}

impl SuccessorTable {
    pub fn zeros(num_states: usize, num_actions: usize, alpha: f64) -> Result<Self> {
        Self::check_alpha(alpha)?;
        Ok(Self {
            m: Array3::zeros((num_states, num_actions, num_states)),
            alpha,
        })
    }

    pub fn uniform(num_states: usize, num_actions: usize, alpha: f64) -> Result<Self> {
        Self::check_alpha(alpha)?;
        Ok(Self {
            m: Array3::from_elem(
                (num_states, num_actions, num_states),
                1.0 / num_states as f64,
            ),
            alpha,
        })
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "successor step size must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.m.dim().0
    }
}

/// One TD update of the successor table on a transition with a
/// SARSA-style next action:
///
///   M(s, a) <- (1 - alpha) M(s, a)
///              + alpha [(1 - gamma) OneHot(s') + gamma M(s', a')]
pub fn successor_td_update(
    table: &mut SuccessorTable,
    transition: (usize, usize, usize),
    a_next: usize,
    gamma: f64,
) {
    let (s, a, s_next) = transition;
    let alpha = table.alpha;
    if alpha == 0.0 {
        return;
    }
    let num_states = table.num_states();
    let bootstrap = table
        .m
        .slice(ndarray::s![s_next, a_next, ..])
        .to_owned();
    let mut row = table.m.slice_mut(ndarray::s![s, a, ..]);
    for f in 0..num_states {
        let target = gamma * bootstrap[f] + if f == s_next { 1.0 - gamma } else { 0.0 };
        row[f] = (1.0 - alpha) * row[f] + alpha * target;
    }
}
