//! Finite MDPs, gridworlds, exact occupancy solvers, and transition sampling.

mod dataset;
mod gridworld;
mod oracle;

pub use dataset::{sample_transitions, Episode, TransitionDataset};
pub use gridworld::{build_gridworld, Action, GridworldSpec, MdpSpec};
pub use oracle::{
    apply_infonce_bellman, exact_occupancy, exact_q, occupancy_error, occupancy_error_raw,
};

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Array3};
use std::io::Write;

/// Tolerance for probability rows of transition tensors and policies.
pub const DIST_TOL: f64 = 1e-12;
/// Tolerance for occupancy rows, which accumulate solver round-off.
pub const OCC_TOL: f64 = 1e-9;

fn check_distribution(row: &[f64], tol: f64, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !(p >= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "{what}: negative or NaN entry {p}"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!(
            "{what}: row sums to {sum}, expected 1 within {tol}"
        )));
    }
    Ok(())
}

/// A finite MDP with dense transition tensor `P[s][a][s']`.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    /// `transition[[s, a, s']]` = p(s' | s, a).
    pub transition: Array3<f64>,
    /// Initial state distribution p0.
    pub initial_dist: Array1<f64>,
    /// Discount factor, strictly inside (0, 1).
    pub discount: f64,
}

impl TabularMdp {
    pub fn new(
        transition: Array3<f64>,
        initial_dist: Array1<f64>,
        discount: f64,
    ) -> Result<Self> {
        let (num_states, num_actions, next) = transition.dim();
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidConfig(
                "MDP needs at least one state and one action".into(),
            ));
        }
        if next != num_states {
            return Err(Error::ShapeMismatch(format!(
                "transition tensor is {num_states}x{num_actions}x{next}, last axis must be {num_states}"
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::ShapeMismatch(format!(
                "initial distribution has {} entries for {num_states} states",
                initial_dist.len()
            )));
        }
        // The closed-form occupancy solve needs the spectral radius gamma < 1.
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "discount must lie strictly inside (0, 1), got {discount}"
            )));
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = transition.slice(ndarray::s![s, a, ..]);
                check_distribution(
                    row.as_slice().expect("contiguous row"),
                    DIST_TOL,
                    &format!("P[{s}][{a}]"),
                )?;
            }
        }
        check_distribution(
            initial_dist.as_slice().expect("contiguous p0"),
            DIST_TOL,
            "p0",
        )?;
        Ok(Self {
            num_states,
            num_actions,
            transition,
            initial_dist,
            discount,
        })
    }

    /// A cycle MDP: one action, state s moves to (s + 1) mod n.
    pub fn cycle(num_states: usize, discount: f64) -> Result<Self> {
        let mut p = Array3::<f64>::zeros((num_states, 1, num_states));
        for s in 0..num_states {
            p[[s, 0, (s + 1) % num_states]] = 1.0;
        }
        let mut p0 = Array1::<f64>::zeros(num_states);
        p0[0] = 1.0;
        Self::new(p, p0, discount)
    }

    /// State-to-state transition matrix under `policy`: P^pi[s][s'] = sum_a pi(a|s) p(s'|s,a).
    pub fn policy_transition(&self, policy: &TabularPolicy) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((self.num_states, self.num_states));
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let w = policy.probs[[s, a]];
                if w == 0.0 {
                    continue;
                }
                for sn in 0..self.num_states {
                    m[[s, sn]] += w * self.transition[[s, a, sn]];
                }
            }
        }
        m
    }
}

/// A stationary stochastic policy `pi[s][a]`.
#[derive(Debug, Clone)]
pub struct TabularPolicy {
    pub probs: Array2<f64>,
}

impl TabularPolicy {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (s, row) in probs.rows().into_iter().enumerate() {
            check_distribution(
                row.as_slice().expect("contiguous policy row"),
                DIST_TOL,
                &format!("pi[{s}]"),
            )?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: Array2::from_elem((num_states, num_actions), 1.0 / num_actions as f64),
        }
    }

    /// Deterministic policy from an action index per state.
    pub fn deterministic(num_states: usize, num_actions: usize, act: impl Fn(usize) -> usize) -> Self {
        let mut probs = Array2::<f64>::zeros((num_states, num_actions));
        for s in 0..num_states {
            probs[[s, act(s)]] = 1.0;
        }
        Self { probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.ncols()
    }

    pub fn sample_action<R: rand::Rng>(&self, state: usize, rng: &mut R) -> usize {
        sample_index(self.probs.row(state).as_slice().expect("row"), rng)
    }
}

/// Sample an index from an unnormalized-but-valid probability row.
pub(crate) fn sample_index<R: rand::Rng>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Round-off can leave acc slightly below 1; fall back to the last
    // index with nonzero mass.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Discounted state occupancy table `O[s][a][s_future]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTable {
    pub probs: Array3<f64>,
}

impl OccupancyTable {
    pub fn new(probs: Array3<f64>) -> Result<Self> {
        for s in 0..probs.dim().0 {
            for a in 0..probs.dim().1 {
                let row = probs.slice(ndarray::s![s, a, ..]);
                check_distribution(
                    row.as_slice().expect("contiguous row"),
                    OCC_TOL,
                    &format!("O[{s}][{a}]"),
                )?;
            }
        }
        Ok(Self { probs })
    }

    /// Rows all equal to the uniform distribution; a common iteration start.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: Array3::from_elem(
                (num_states, num_actions, num_states),
                1.0 / num_states as f64,
            ),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.probs.dim()
    }

    /// Export as CSV with header `s,a,s_future,p`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,a,s_future,p")?;
        let (ns, na, nf) = self.probs.dim();
        for s in 0..ns {
            for a in 0..na {
                for f in 0..nf {
                    writeln!(w, "{s},{a},{f},{}", self.probs[[s, a, f]])?;
                }
            }
        }
        Ok(())
    }
}
