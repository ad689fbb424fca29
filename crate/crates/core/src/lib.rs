//! Grid-maze path planning with relational prompts and proposer-guided
//! Q-learning.
//!
//! A [`maze::Maze`] is relabelled as a [`relation::RelationGraph`] of
//! lettered nodes. An [`engine::Agent`] learns a Q-table while a
//! [`proposer::Proposer`] suggests moves, optionally under a
//! [`curriculum::Curriculum`] of easier start positions. [`bench`] runs
//! whole suites and computes success and optimality rates.

pub mod bench;
pub mod cli;
pub mod config;
pub mod curriculum;
pub mod engine;
pub mod gateway;
pub mod maze;
pub mod maze_text;
pub mod proposer;
pub mod relation;

pub use bench::{Method, ProposerKind, RunReport, Suite, SuiteSpec};
pub use config::{resolve_config, ConfigLayer, ResolvedConfig};
pub use engine::{Agent, QTable, SamplerConfig};
pub use maze::{Coord, Maze, MazeError};
pub use relation::{NodeLabel, RelationGraph};
