use crate::error::{Error, Result};
use crate::mdp::TabularPolicy;
use ndarray::{Array1, Array3};
use rand::Rng;
use std::collections::BTreeMap;

/// Goal-conditioned policy as a logits table over actions, one row per
/// (state, goal). Action probabilities are the row softmax, so the
/// policy stays a distribution under any finite update.
#[derive(Debug, Clone)]
pub struct GcPolicyParams {
    pub logits: Array3<f64>,
}

impl GcPolicyParams {
    pub fn uniform(num_states: usize, num_goals: usize, num_actions: usize) -> Result<Self> {
        if num_states == 0 || num_goals == 0 || num_actions == 0 {
            return Err(Error::InvalidConfig(
                "policy table needs at least one state, goal, and action".into(),
            ));
        }
        Ok(Self {
            logits: Array3::<f64>::zeros((num_states, num_goals, num_actions)),
        })
    }

    pub fn num_states(&self) -> usize {
        self.logits.dim().0
    }

    pub fn num_goals(&self) -> usize {
        self.logits.dim().1
    }

    pub fn num_actions(&self) -> usize {
        self.logits.dim().2
    }

    /// Action distribution at (state, goal), softmax with max-subtraction.
    pub fn probs(&self, s: usize, g: usize) -> Array1<f64> {
        let row = self.logits.slice(ndarray::s![s, g, ..]);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = row.mapv(|v| (v - max).exp());
        let sum = out.sum();
        out /= sum;
        out
    }

    pub fn sample_action<R: Rng>(&self, s: usize, g: usize, rng: &mut R) -> usize {
        let probs = self.probs(s, g);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        probs.len() - 1
    }

    /// Highest-logit action; ties resolve to the lowest index.
    pub fn greedy_action(&self, s: usize, g: usize) -> usize {
        let row = self.logits.slice(ndarray::s![s, g, ..]);
        let mut best = 0;
        for a in 1..row.len() {
            if row[a] > row[best] {
                best = a;
            }
        }
        best
    }

    /// The policy for one fixed goal, as a plain tabular policy.
    pub fn conditioned_on(&self, g: usize) -> Result<TabularPolicy> {
        let ns = self.num_states();
        let na = self.num_actions();
        let mut probs = ndarray::Array2::<f64>::zeros((ns, na));
        for s in 0..ns {
            probs.row_mut(s).assign(&self.probs(s, g));
        }
        TabularPolicy::new(probs)
    }

    /// One descent step on the given logit rows.
    pub fn apply_gradient(&mut self, grad: &PolicyGradient, learning_rate: f64) {
        for &((s, g), ref row) in &grad.rows {
            for a in 0..row.len() {
                self.logits[[s, g, a]] -= learning_rate * row[a];
            }
        }
    }

    /// Writes `s,g,a,prob` rows for every (state, goal, action).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,g,a,prob")?;
        for s in 0..self.num_states() {
            for g in 0..self.num_goals() {
                let probs = self.probs(s, g);
                for (a, &p) in probs.iter().enumerate() {
                    writeln!(w, "{s},{g},{a},{p}")?;
                }
            }
        }
        Ok(())
    }
}

/// Sparse gradient over policy logit rows, keyed by (state, goal).
#[derive(Debug, Clone, Default)]
pub struct PolicyGradient {
    pub rows: Vec<((usize, usize), Array1<f64>)>,
}

#[derive(Debug, Default)]
pub(crate) struct PolicyGradAccumulator {
    rows: BTreeMap<(usize, usize), Array1<f64>>,
}

impl PolicyGradAccumulator {
    pub fn add(&mut self, s: usize, g: usize, contribution: &Array1<f64>) {
        match self.rows.get_mut(&(s, g)) {
            Some(row) => *row += contribution,
            None => {
                self.rows.insert((s, g), contribution.clone());
            }
        }
    }

    pub fn finish(self) -> PolicyGradient {
        PolicyGradient {
            rows: self.rows.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_policy_is_uniform() {
        let policy = GcPolicyParams::uniform(3, 3, 4).unwrap();
        let probs = policy.probs(1, 2);
        for &p in probs.iter() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn rows_stay_distributions_after_updates() {
        let mut policy = GcPolicyParams::uniform(2, 2, 3).unwrap();
        let grad = PolicyGradient {
            rows: vec![((0, 1), ndarray::array![5.0, -2.0, 40.0])],
        };
        policy.apply_gradient(&grad, 0.7);
        for s in 0..2 {
            for g in 0..2 {
                let probs = policy.probs(s, g);
                assert_abs_diff_eq!(probs.sum(), 1.0, epsilon = 1e-12);
                assert!(probs.iter().all(|p| p.is_finite() && *p >= 0.0));
            }
        }
        assert_eq!(policy.greedy_action(0, 1), 1);
    }

    #[test]
    fn sampling_follows_the_softmax() {
        let mut policy = GcPolicyParams::uniform(1, 1, 2).unwrap();
        policy.logits[[0, 0, 1]] = (3.0f64).ln();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 20_000;
        let ones = (0..draws)
            .filter(|_| policy.sample_action(0, 0, &mut rng) == 1)
            .count();
        let frac = ones as f64 / draws as f64;
        assert!((frac - 0.75).abs() < 0.01, "frac {frac}");
    }

    #[test]
    fn conditioning_produces_a_valid_tabular_policy() {
        let mut policy = GcPolicyParams::uniform(2, 2, 2).unwrap();
        policy.logits[[0, 1, 0]] = 2.0;
        let fixed = policy.conditioned_on(1).unwrap();
        assert_abs_diff_eq!(
            fixed.probs[[0, 0]],
            (2.0f64).exp() / ((2.0f64).exp() + 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn csv_has_one_row_per_entry_plus_header() {
        let policy = GcPolicyParams::uniform(2, 3, 4).unwrap();
        let mut buf = Vec::new();
        policy.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3 * 4);
        assert!(text.starts_with("s,g,a,prob\n"));
    }
}
