use super::policy::GcPolicyParams;
use crate::error::{Error, Result};
use crate::mdp::{GridworldSpec, TabularMdp};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Outcome of rolling one (start, goal) pair.
#[derive(Debug, Clone)]
pub struct PairResult {
    pub start: usize,
    pub goal: usize,
    pub successes: usize,
    pub episodes: usize,
    /// States visited by a greedy rollout, start included, truncated at
    /// the goal or the horizon.
    pub greedy_path: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GoalEvaluation {
    pub success_rate: f64,
    pub pairs: Vec<PairResult>,
}

fn sample_next<R: Rng>(mdp: &TabularMdp, s: usize, a: usize, rng: &mut R) -> usize {
    let row = mdp.transition.slice(ndarray::s![s, a, ..]);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.len() - 1
}

/// Rolls the policy from each start toward each goal and reports the
/// fraction of episodes that touch the goal within the horizon. A state
/// equal to the goal counts at any step, including step zero.
pub fn evaluate_goal_reaching(
    mdp: &TabularMdp,
    policy: &GcPolicyParams,
    pairs: &[(usize, usize)],
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<GoalEvaluation> {
    if horizon == 0 || episodes == 0 {
        return Err(Error::InvalidConfig(
            "evaluation needs a positive horizon and episode count".into(),
        ));
    }
    if policy.num_states() != mdp.num_states
        || policy.num_goals() != mdp.num_states
        || policy.num_actions() != mdp.num_actions
    {
        return Err(Error::ShapeMismatch(format!(
            "policy table {}x{}x{} does not match MDP with {} states and {} actions",
            policy.num_states(),
            policy.num_goals(),
            policy.num_actions(),
            mdp.num_states,
            mdp.num_actions
        )));
    }
    for &(start, goal) in pairs {
        if start >= mdp.num_states || goal >= mdp.num_states {
            return Err(Error::InvalidConfig(format!(
                "pair ({start}, {goal}) outside {} states",
                mdp.num_states
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(pairs.len());
    let mut total_successes = 0usize;
    for &(start, goal) in pairs {
        let mut successes = 0;
        for _ in 0..episodes {
            let mut s = start;
            let mut reached = s == goal;
            for _ in 0..horizon {
                if reached {
                    break;
                }
                let a = policy.sample_action(s, goal, &mut rng);
                s = sample_next(mdp, s, a, &mut rng);
                reached = s == goal;
            }
            if reached {
                successes += 1;
            }
        }

        let mut greedy_path = vec![start];
        let mut s = start;
        for _ in 0..horizon {
            if s == goal {
                break;
            }
            let a = policy.greedy_action(s, goal);
            s = sample_next(mdp, s, a, &mut rng);
            greedy_path.push(s);
        }

        total_successes += successes;
        results.push(PairResult {
            start,
            goal,
            successes,
            episodes,
            greedy_path,
        });
    }

    Ok(GoalEvaluation {
        success_rate: total_successes as f64 / (pairs.len() * episodes) as f64,
        pairs: results,
    })
}

/// Renders a rollout on the grid: `X` start, `*` goal, `.` visited
/// cells, `#` walls, spaces elsewhere.
pub fn render_path_grid(spec: &GridworldSpec, path: &[usize], goal: usize) -> String {
    let mut cells = vec![vec![' '; spec.width]; spec.height];
    for y in 0..spec.height {
        for x in 0..spec.width {
            if spec.is_wall(x, y) {
                cells[y][x] = '#';
            }
        }
    }
    for &s in path {
        let (x, y) = spec.cell_of(s);
        cells[y][x] = '.';
    }
    let (gx, gy) = spec.cell_of(goal);
    cells[gy][gx] = '*';
    if let Some(&start) = path.first() {
        let (sx, sy) = spec.cell_of(start);
        cells[sy][sx] = 'X';
    }
    let mut out = String::new();
    for row in cells {
        out.extend(row);
        out.push('\n');
    }
    out
}
