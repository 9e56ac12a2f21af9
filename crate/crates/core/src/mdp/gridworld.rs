use super::TabularMdp;
use crate::error::{Error, Result};
use ndarray::{Array1, Array3};
use serde::{Deserialize, Serialize};

/// The five gridworld actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    NoOp,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::NoOp,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Left => 2,
            Action::Right => 3,
            Action::NoOp => 4,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// Displacement as (dx, dy) with y growing downward.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::NoOp => (0, 0),
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::NoOp => "no-op",
        };
        f.write_str(name)
    }
}

/// Layout and dynamics of a rectangular gridworld.
///
/// Cells are `[x, y]` with `x` the column and `y` the row, state index
/// `y * width + x`. With probability `slip_prob` the chosen action is
/// replaced by one drawn uniformly from all five actions. Moves into a
/// wall or off the grid leave the agent in place.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub walls: Vec<[usize; 2]>,
    #[serde(default)]
    pub slip_prob: f64,
}

impl GridworldSpec {
    pub fn open(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            walls: Vec::new(),
            slip_prob: 0.0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn cell_of(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.walls.iter().any(|w| w[0] == x && w[1] == y)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig(
                "gridworld needs positive width and height".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::InvalidConfig(format!(
                "slip_prob must lie in [0, 1), got {}",
                self.slip_prob
            )));
        }
        for w in &self.walls {
            if w[0] >= self.width || w[1] >= self.height {
                return Err(Error::InvalidConfig(format!(
                    "wall [{}, {}] outside a {}x{} grid",
                    w[0], w[1], self.width, self.height
                )));
            }
        }
        if (0..self.width)
            .all(|x| (0..self.height).all(|y| self.is_wall(x, y)))
        {
            return Err(Error::InvalidConfig("every cell is a wall".into()));
        }
        Ok(())
    }

    /// Destination state of executing `action` from `state`, after wall
    /// and boundary resolution.
    pub fn step(&self, state: usize, action: Action) -> usize {
        let (x, y) = self.cell_of(state);
        let (dx, dy) = action.delta();
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            return state;
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if self.is_wall(nx, ny) {
            state
        } else {
            self.index(nx, ny)
        }
    }
}

/// Build the tabular MDP for a gridworld. The initial distribution is
/// uniform over non-wall cells.
pub fn build_gridworld(spec: &GridworldSpec, discount: f64) -> Result<TabularMdp> {
    spec.validate()?;
    let n = spec.num_states();
    let mut transition = Array3::<f64>::zeros((n, Action::COUNT, n));
    for s in 0..n {
        for intended in Action::ALL {
            let a = intended.index();
            for executed in Action::ALL {
                let mut p = spec.slip_prob / Action::COUNT as f64;
                if executed == intended {
                    p += 1.0 - spec.slip_prob;
                }
                transition[[s, a, spec.step(s, executed)]] += p;
            }
        }
    }
    let mut initial = Array1::<f64>::zeros(n);
    let mut free = 0usize;
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !spec.is_wall(x, y) {
                free += 1;
            }
        }
    }
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !spec.is_wall(x, y) {
                initial[spec.index(x, y)] = 1.0 / free as f64;
            }
        }
    }
    TabularMdp::new(transition, initial, discount)
}

/// MDP families loadable from JSON configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MdpSpec {
    Gridworld(GridworldSpec),
    Cycle {
        num_states: usize,
    },
    Explicit {
        transition: Vec<Vec<Vec<f64>>>,
        initial_dist: Vec<f64>,
    },
}

impl MdpSpec {
    pub fn build(&self, discount: f64) -> Result<TabularMdp> {
        match self {
            MdpSpec::Gridworld(spec) => build_gridworld(spec, discount),
            MdpSpec::Cycle { num_states } => TabularMdp::cycle(*num_states, discount),
            MdpSpec::Explicit {
                transition,
                initial_dist,
            } => {
                let ns = transition.len();
                let na = transition.first().map_or(0, |r| r.len());
                let mut tensor = Array3::<f64>::zeros((ns, na, ns));
                for (s, per_action) in transition.iter().enumerate() {
                    if per_action.len() != na {
                        return Err(Error::ShapeMismatch(format!(
                            "state {s} lists {} actions, expected {na}",
                            per_action.len()
                        )));
                    }
                    for (a, row) in per_action.iter().enumerate() {
                        if row.len() != ns {
                            return Err(Error::ShapeMismatch(format!(
                                "row ({s}, {a}) has {} entries, expected {ns}",
                                row.len()
                            )));
                        }
                        for (sn, &p) in row.iter().enumerate() {
                            tensor[[s, a, sn]] = p;
                        }
                    }
                }
                TabularMdp::new(
                    tensor,
                    Array1::from_vec(initial_dist.clone()),
                    discount,
                )
            }
        }
    }
}
