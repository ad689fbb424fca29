//! Grid maze model and the episodic environment built on it.
//!
//! Positions are `(row, col)` pairs. Movement is 4-connected. Every accepted or
//! rejected step costs [`STEP_REWARD`]; entering the goal pays [`GOAL_REWARD`]
//! instead of the step penalty.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reward for every non-terminal step, including rejected moves.
pub const STEP_REWARD: f64 = -1.0;
/// Reward for the step that enters the goal. Replaces the step penalty.
pub const GOAL_REWARD: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MazeError {
    #[error("maze dimensions must be positive, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },
    #[error("{field} {coord} is outside the {height}x{width} grid")]
    OutOfBounds {
        field: &'static str,
        coord: Coord,
        height: usize,
        width: usize,
    },
    #[error("{field} on obstacle at {coord}")]
    OnObstacle { field: &'static str, coord: Coord },
    #[error("start and goal coincide at {0}")]
    StartIsGoal(Coord),
    #[error("invalid position {0}: out of bounds or on an obstacle")]
    InvalidPosition(Coord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// In-bounds 4-neighbours regardless of obstacles, in up/down/left/right order.
    pub fn grid_neighbors(self, height: usize, width: usize) -> impl Iterator<Item = Coord> {
        let Coord { row, col } = self;
        let up = (row > 0).then(|| Coord::new(row - 1, col));
        let down = (row + 1 < height).then(|| Coord::new(row + 1, col));
        let left = (col > 0).then(|| Coord::new(row, col - 1));
        let right = (col + 1 < width).then(|| Coord::new(row, col + 1));
        [up, down, left, right].into_iter().flatten()
    }
}

impl From<[usize; 2]> for Coord {
    fn from([row, col]: [usize; 2]) -> Self {
        Coord { row, col }
    }
}

impl From<Coord> for [usize; 2] {
    fn from(c: Coord) -> Self {
        [c.row, c.col]
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// A validated rectangular maze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maze {
    width: usize,
    height: usize,
    start: Coord,
    goal: Coord,
    obstacles: BTreeSet<Coord>,
    degenerate: bool,
}

impl Maze {
    /// Builds a maze, rejecting obstacles on start/goal, out-of-bounds cells and
    /// `start == goal`.
    pub fn new(
        height: usize,
        width: usize,
        start: Coord,
        goal: Coord,
        obstacles: impl IntoIterator<Item = Coord>,
    ) -> Result<Self, MazeError> {
        Self::build(height, width, start, goal, obstacles, false)
    }

    /// Same as [`Maze::new`] but permits `start == goal`.
    pub fn new_degenerate(
        height: usize,
        width: usize,
        start: Coord,
        goal: Coord,
        obstacles: impl IntoIterator<Item = Coord>,
    ) -> Result<Self, MazeError> {
        Self::build(height, width, start, goal, obstacles, true)
    }

    fn build(
        height: usize,
        width: usize,
        start: Coord,
        goal: Coord,
        obstacles: impl IntoIterator<Item = Coord>,
        allow_degenerate: bool,
    ) -> Result<Self, MazeError> {
        if height == 0 || width == 0 {
            return Err(MazeError::EmptyGrid { height, width });
        }
        let obstacles: BTreeSet<Coord> = obstacles.into_iter().collect();
        let check = |field: &'static str, c: Coord| {
            if c.row < height && c.col < width {
                Ok(())
            } else {
                Err(MazeError::OutOfBounds {
                    field,
                    coord: c,
                    height,
                    width,
                })
            }
        };
        check("start", start)?;
        check("goal", goal)?;
        for &o in &obstacles {
            check("obstacle", o)?;
        }
        if obstacles.contains(&start) {
            return Err(MazeError::OnObstacle {
                field: "start",
                coord: start,
            });
        }
        if obstacles.contains(&goal) {
            return Err(MazeError::OnObstacle {
                field: "goal",
                coord: goal,
            });
        }
        if start == goal && !allow_degenerate {
            return Err(MazeError::StartIsGoal(start));
        }
        Ok(Self {
            width,
            height,
            start,
            goal,
            obstacles,
            degenerate: start == goal,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Coord {
        self.start
    }

    pub fn goal(&self) -> Coord {
        self.goal
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Obstacles in row-major order.
    pub fn obstacles(&self) -> &BTreeSet<Coord> {
        &self.obstacles
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, c: Coord) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn is_obstacle(&self, c: Coord) -> bool {
        self.obstacles.contains(&c)
    }

    pub fn is_free(&self, c: Coord) -> bool {
        self.in_bounds(c) && !self.is_obstacle(c)
    }

    /// Row-major index of `c`. Caller guarantees `c` is in bounds.
    pub fn index_of(&self, c: Coord) -> usize {
        c.row * self.width + c.col
    }

    pub fn coord_at(&self, index: usize) -> Option<Coord> {
        (index < self.cell_count()).then(|| Coord::new(index / self.width, index % self.width))
    }

    /// Episode step cap: `4 * width * height`.
    pub fn step_cap(&self) -> usize {
        4 * self.width * self.height
    }

    /// All free cells, row-major.
    pub fn free_cells(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.cell_count())
            .map(|i| Coord::new(i / self.width, i % self.width))
            .filter(|c| !self.is_obstacle(*c))
    }

    /// Free 4-neighbours of `at`.
    pub fn legal_moves(&self, at: Coord) -> Result<BTreeSet<Coord>, MazeError> {
        if !self.is_free(at) {
            return Err(MazeError::InvalidPosition(at));
        }
        Ok(at
            .grid_neighbors(self.height, self.width)
            .filter(|c| !self.is_obstacle(*c))
            .collect())
    }

    /// Attempts to move from `at` to `to`. Illegal targets are rejected, not
    /// raised: the position stays put and the step penalty still applies.
    pub fn step(&self, at: Coord, to: Coord) -> Result<StepOutcome, MazeError> {
        let legal = self.legal_moves(at)?;
        if !legal.contains(&to) {
            return Ok(StepOutcome::rejected(at));
        }
        if to == self.goal {
            Ok(StepOutcome {
                next: to,
                reward: GOAL_REWARD,
                terminal: true,
                rejected: false,
            })
        } else {
            Ok(StepOutcome {
                next: to,
                reward: STEP_REWARD,
                terminal: false,
                rejected: false,
            })
        }
    }

    /// BFS distances from `source` over free cells, indexed row-major.
    /// `None` marks unreachable cells and obstacles.
    pub fn distances_from(&self, source: Coord) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cell_count()];
        if !self.is_free(source) {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index_of(source)] = Some(0);
        queue.push_back(source);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index_of(c)].unwrap_or(0);
            for n in c.grid_neighbors(self.height, self.width) {
                let idx = self.index_of(n);
                if !self.is_obstacle(n) && dist[idx].is_none() {
                    dist[idx] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// BFS distance from `from` to the goal.
    pub fn distance_to_goal(&self, from: Coord) -> Option<usize> {
        if !self.in_bounds(from) {
            return None;
        }
        self.distances_from(self.goal)[self.index_of(from)]
    }

    /// Moves on a shortest start-to-goal path, or `None` when the goal is cut off.
    pub fn shortest_path_len(&self) -> Option<usize> {
        self.distance_to_goal(self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next: Coord,
    pub reward: f64,
    pub terminal: bool,
    pub rejected: bool,
}

impl StepOutcome {
    /// Outcome of a move that was not allowed: stay at `at`, pay the step penalty.
    pub fn rejected(at: Coord) -> Self {
        StepOutcome {
            next: at,
            reward: STEP_REWARD,
            terminal: false,
            rejected: true,
        }
    }
}

/// Trace of one episode. `visited` includes the starting cell, so
/// `visited.len() == step_count + 1 == rewards.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub maze_id: String,
    pub visited: Vec<Coord>,
    pub rewards: Vec<f64>,
    pub reached_goal: bool,
    pub step_count: usize,
}

impl EpisodeLog {
    pub fn new(maze_id: impl Into<String>, start: Coord) -> Self {
        EpisodeLog {
            maze_id: maze_id.into(),
            visited: vec![start],
            rewards: Vec::new(),
            reached_goal: false,
            step_count: 0,
        }
    }

    pub fn record(&mut self, outcome: &StepOutcome) {
        self.visited.push(outcome.next);
        self.rewards.push(outcome.reward);
        self.step_count += 1;
        if outcome.terminal {
            self.reached_goal = true;
        }
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.step_count == self.rewards.len() && self.visited.len() == self.step_count + 1
    }
}
