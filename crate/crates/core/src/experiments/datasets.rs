use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{Action, Episode, GridworldSpec, TransitionDataset};

/// Scripted trajectory families for the offline-reasoning studies.
///
/// `ZPaths` walks corner-to-corner staircases along both grid diagonals,
/// so no single trajectory visits two corners of the same edge.
/// `SkewedPaths` mixes complete long detours between one fixed
/// start/goal pair (probability `1 - p_short`) with short-corridor
/// segments (probability `p_short`). Each segment is a shortest path
/// between its own endpoints and the two segment variants overlap, so
/// together they cover the direct corridor while no single short
/// trajectory joins the start to the goal: composing them requires
/// dynamic programming rather than trajectory replay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStyle {
    ZPaths,
    SkewedPaths { p_short: f64 },
}

impl TrajectoryStyle {
    pub fn id(self) -> &'static str {
        match self {
            TrajectoryStyle::ZPaths => "z_paths",
            TrajectoryStyle::SkewedPaths { .. } => "skewed_paths",
        }
    }
}

fn corner_states(spec: &GridworldSpec) -> [(usize, usize); 4] {
    let (w, h) = (spec.width, spec.height);
    [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)]
}

/// One staircase walk from `from` to `to`, strictly alternating axes
/// while both have distance left so the path never strays more than one
/// cell from the diagonal; only the starting axis is randomized. Errors
/// if a wall blocks a move; the scripts assume unobstructed routes.
fn staircase_episode<R: Rng>(
    spec: &GridworldSpec,
    from: (usize, usize),
    to: (usize, usize),
    rng: &mut R,
) -> Result<Episode> {
    let mut states = vec![spec.index(from.0, from.1)];
    let mut actions = Vec::new();
    let (mut x, mut y) = from;
    let mut horizontal_turn = rng.gen_bool(0.5);
    while (x, y) != to {
        let dx = to.0 as isize - x as isize;
        let dy = to.1 as isize - y as isize;
        let horizontal = if dx != 0 && dy != 0 {
            let turn = horizontal_turn;
            horizontal_turn = !turn;
            turn
        } else {
            dx != 0
        };
        let action = if horizontal {
            if dx > 0 {
                Action::Right
            } else {
                Action::Left
            }
        } else if dy > 0 {
            Action::Down
        } else {
            Action::Up
        };
        let here = spec.index(x, y);
        let next = spec.step(here, action);
        if next == here {
            return Err(Error::InvalidConfig(format!(
                "scripted route ({},{}) -> ({},{}) is blocked at ({x},{y})",
                from.0, from.1, to.0, to.1
            )));
        }
        actions.push(action.index());
        states.push(next);
        let cell = spec.cell_of(next);
        x = cell.0;
        y = cell.1;
    }
    Ok(Episode { states, actions })
}

fn z_episode<R: Rng>(spec: &GridworldSpec, rng: &mut R) -> Result<Episode> {
    let [tl, tr, bl, br] = corner_states(spec);
    let routes = [(tl, br), (br, tl), (tr, bl), (bl, tr)];
    let (from, to) = routes[rng.gen_range(0..routes.len())];
    staircase_episode(spec, from, to, rng)
}

/// Fixed start and goal of the skewed-route script: top-left corner down
/// to the bottom-left corner.
pub fn skewed_endpoints(spec: &GridworldSpec) -> (usize, usize) {
    (spec.index(0, 0), spec.index(0, spec.height - 1))
}

/// (long, short) route lengths in steps. The short route runs straight
/// down the left edge; the long route detours along the top, right, and
/// bottom edges.
pub fn skewed_route_lengths(spec: &GridworldSpec) -> (usize, usize) {
    (2 * (spec.width - 1) + spec.height - 1, spec.height - 1)
}

/// One of the two short-corridor segments, picked at random: the front
/// segment leaves the start corner and stops one cell short of the
/// goal, the back segment starts one cell below the start and runs to
/// the goal corner.
fn short_segment<R: Rng>(spec: &GridworldSpec, rng: &mut R) -> (usize, Vec<Action>) {
    let steps = spec.height - 2;
    let start_y = if rng.gen_bool(0.5) { 0 } else { 1 };
    (spec.index(0, start_y), vec![Action::Down; steps])
}

fn long_script(spec: &GridworldSpec) -> Vec<Action> {
    let mut script = vec![Action::Right; spec.width - 1];
    script.extend(std::iter::repeat(Action::Down).take(spec.height - 1));
    script.extend(std::iter::repeat(Action::Left).take(spec.width - 1));
    script
}

fn scripted_episode(spec: &GridworldSpec, start: usize, script: &[Action]) -> Result<Episode> {
    let mut states = vec![start];
    let mut actions = Vec::with_capacity(script.len());
    let mut s = start;
    for &action in script {
        let next = spec.step(s, action);
        if next == s {
            let (x, y) = spec.cell_of(s);
            return Err(Error::InvalidConfig(format!(
                "scripted route is blocked at ({x},{y})"
            )));
        }
        actions.push(action.index());
        states.push(next);
        s = next;
    }
    Ok(Episode { states, actions })
}

/// Emits scripted trajectories until `count` transitions are stored,
/// truncating the final episode to land exactly on `count`.
pub fn synthesize_trajectory_dataset(
    spec: &GridworldSpec,
    style: TrajectoryStyle,
    count: usize,
    seed: u64,
) -> Result<TransitionDataset> {
    spec.validate()?;
    if spec.width < 3 || spec.height < 3 {
        return Err(Error::InvalidConfig(format!(
            "scripted trajectories need at least a 3x3 grid, got {}x{}",
            spec.width, spec.height
        )));
    }
    if count == 0 {
        return Err(Error::Dataset("requested an empty dataset".into()));
    }
    if let TrajectoryStyle::SkewedPaths { p_short } = style {
        if !(0.0..=1.0).contains(&p_short) {
            return Err(Error::InvalidConfig(format!(
                "p_short must lie in [0, 1], got {p_short}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::new();
    let mut total = 0usize;
    while total < count {
        let episode = match style {
            TrajectoryStyle::ZPaths => z_episode(spec, &mut rng)?,
            TrajectoryStyle::SkewedPaths { p_short } => {
                if rng.gen::<f64>() < p_short {
                    let (seg_start, script) = short_segment(spec, &mut rng);
                    scripted_episode(spec, seg_start, &script)?
                } else {
                    let (start, _) = skewed_endpoints(spec);
                    scripted_episode(spec, start, &long_script(spec))?
                }
            }
        };
        total += episode.num_transitions();
        episodes.push(episode);
    }
    if total > count {
        let extra = total - count;
        let last = episodes.last_mut().expect("at least one episode");
        let keep = last.actions.len() - extra;
        last.actions.truncate(keep);
        last.states.truncate(keep + 1);
    }

    TransitionDataset::from_episodes(
        episodes,
        spec.num_states(),
        Action::COUNT,
        format!("scripted_{}", style.id()),
        seed,
    )
}

/// Keeps the candidate (start, goal) pairs whose endpoints never appear
/// together within any single training episode.
pub fn held_out_pairs(
    dataset: &TransitionDataset,
    candidates: &[(usize, usize)],
) -> Vec<(usize, usize)> {
    let mut rejected = vec![false; candidates.len()];
    for episode in &dataset.episodes {
        let visited: HashSet<usize> = episode.states.iter().copied().collect();
        for (i, &(start, goal)) in candidates.iter().enumerate() {
            if !rejected[i] && visited.contains(&start) && visited.contains(&goal) {
                rejected[i] = true;
            }
        }
    }
    candidates
        .iter()
        .zip(&rejected)
        .filter(|(_, &r)| !r)
        .map(|(&pair, _)| pair)
        .collect()
}

/// The eight ordered corner pairs that share a grid edge, the default
/// evaluation set for the stitching study.
pub fn same_edge_corner_pairs(spec: &GridworldSpec) -> Vec<(usize, usize)> {
    let [tl, tr, bl, br] = corner_states(spec);
    let to_state = |(x, y)| spec.index(x, y);
    let edges = [(tl, tr), (bl, br), (tl, bl), (tr, br)];
    edges
        .iter()
        .flat_map(|&(a, b)| [(to_state(a), to_state(b)), (to_state(b), to_state(a))])
        .collect()
}

/// Shortest step counts from `source` to every state under the
/// deterministic moves, `None` where unreachable.
pub fn bfs_distances(spec: &GridworldSpec, source: usize) -> Result<Vec<Option<usize>>> {
    spec.validate()?;
    if source >= spec.num_states() {
        return Err(Error::InvalidConfig(format!(
            "bfs source {source} outside {} states",
            spec.num_states()
        )));
    }
    let (sx, sy) = spec.cell_of(source);
    if spec.is_wall(sx, sy) {
        return Err(Error::InvalidConfig(format!(
            "bfs source ({sx},{sy}) is a wall"
        )));
    }

    let mut dist = vec![None; spec.num_states()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(s) = queue.pop_front() {
        let d = dist[s].expect("visited");
        for action in [Action::Up, Action::Down, Action::Left, Action::Right] {
            let next = spec.step(s, action);
            if next != s && dist[next].is_none() {
                dist[next] = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::build_gridworld;

    fn open5() -> GridworldSpec {
        GridworldSpec::open(5, 5)
    }

    #[test]
    fn z_paths_transitions_are_dynamics_consistent_and_exactly_counted() {
        let spec = open5();
        let dataset = synthesize_trajectory_dataset(&spec, TrajectoryStyle::ZPaths, 2_000, 3)
            .expect("synthesize");
        assert_eq!(dataset.num_transitions(), 2_000);

        let mdp = build_gridworld(&spec, 0.9).expect("mdp");
        for i in 0..dataset.num_transitions() {
            let (s, a, s_next) = dataset.transition(i);
            assert!(
                mdp.transition[[s, a, s_next]] > 0.0,
                "transition {i}: ({s}, {a}, {s_next}) has zero probability"
            );
        }

        let corners: Vec<usize> = corner_states(&spec)
            .iter()
            .map(|&(x, y)| spec.index(x, y))
            .collect();
        for episode in &dataset.episodes[..dataset.episodes.len() - 1] {
            assert!(corners.contains(episode.states.first().unwrap()));
            assert!(corners.contains(episode.states.last().unwrap()));
        }
    }

    #[test]
    fn z_paths_leave_same_edge_corner_pairs_held_out() {
        let spec = open5();
        let dataset = synthesize_trajectory_dataset(&spec, TrajectoryStyle::ZPaths, 20_000, 0)
            .expect("synthesize");

        let candidates = same_edge_corner_pairs(&spec);
        assert_eq!(candidates.len(), 8);
        let kept = held_out_pairs(&dataset, &candidates);
        assert_eq!(kept, candidates, "same-edge pairs never co-occur");

        let tl = spec.index(0, 0);
        let br = spec.index(4, 4);
        let tr = spec.index(4, 0);
        let bl = spec.index(0, 4);
        let diagonals = vec![(tl, br), (tr, bl)];
        assert!(
            held_out_pairs(&dataset, &diagonals).is_empty(),
            "diagonal pairs co-occur within single trajectories"
        );
    }

    #[test]
    fn skewed_all_short_at_the_boundary() {
        let spec = open5();
        let style = TrajectoryStyle::SkewedPaths { p_short: 1.0 };
        let dataset = synthesize_trajectory_dataset(&spec, style, 500, 1).expect("synthesize");
        let down = Action::Down.index();
        let (start, goal) = skewed_endpoints(&spec);
        let mut from_start = 0usize;
        let mut into_goal = 0usize;
        for episode in &dataset.episodes {
            assert!(episode.actions.len() <= 3);
            assert!(episode.actions.iter().all(|&a| a == down));
            assert!(
                !(episode.states.contains(&start) && episode.states.contains(&goal)),
                "a short segment joins the start to the goal on its own"
            );
            from_start += usize::from(episode.states.first() == Some(&start));
            into_goal += usize::from(episode.states.last() == Some(&goal));
        }
        assert!(from_start > 0, "front segments missing");
        assert!(into_goal > 0, "back segments missing");
    }

    #[test]
    fn skewed_short_fraction_matches_the_mixing_rate() {
        let spec = open5();
        let style = TrajectoryStyle::SkewedPaths { p_short: 0.05 };
        let dataset = synthesize_trajectory_dataset(&spec, style, 20_000, 9).expect("synthesize");

        let down = Action::Down.index();
        let short = dataset
            .episodes
            .iter()
            .filter(|ep| ep.actions.first() == Some(&down))
            .count();
        let fraction = short as f64 / dataset.episodes.len() as f64;
        assert!(
            (fraction - 0.05).abs() <= 0.01,
            "short-route fraction {fraction}"
        );

        let mdp = build_gridworld(&spec, 0.9).expect("mdp");
        for i in 0..dataset.num_transitions() {
            let (s, a, s_next) = dataset.transition(i);
            assert!(mdp.transition[[s, a, s_next]] > 0.0);
        }
    }

    #[test]
    fn same_seed_reproduces_the_same_episodes() {
        let spec = open5();
        let a = synthesize_trajectory_dataset(&spec, TrajectoryStyle::ZPaths, 3_000, 17)
            .expect("synthesize");
        let b = synthesize_trajectory_dataset(&spec, TrajectoryStyle::ZPaths, 3_000, 17)
            .expect("synthesize");
        assert_eq!(a.episodes, b.episodes);
    }

    #[test]
    fn blocked_script_is_an_error() {
        let spec = GridworldSpec {
            width: 3,
            height: 3,
            walls: vec![[1, 0], [0, 1]],
            slip_prob: 0.0,
        };
        let style = TrajectoryStyle::SkewedPaths { p_short: 0.5 };
        assert!(synthesize_trajectory_dataset(&spec, style, 100, 0).is_err());
    }

    #[test]
    fn tiny_grid_is_rejected() {
        let spec = GridworldSpec::open(2, 3);
        assert!(synthesize_trajectory_dataset(&spec, TrajectoryStyle::ZPaths, 100, 0).is_err());
    }

    #[test]
    fn bfs_matches_manhattan_on_an_open_grid_and_detours_around_walls() {
        let spec = open5();
        let dist = bfs_distances(&spec, spec.index(0, 0)).expect("bfs");
        assert_eq!(dist[spec.index(4, 4)], Some(8));
        assert_eq!(dist[spec.index(0, 0)], Some(0));

        let walled = GridworldSpec {
            width: 3,
            height: 3,
            walls: vec![[1, 0], [1, 1]],
            slip_prob: 0.0,
        };
        let dist = bfs_distances(&walled, walled.index(0, 0)).expect("bfs");
        assert_eq!(dist[walled.index(2, 0)], Some(6));
    }
}
