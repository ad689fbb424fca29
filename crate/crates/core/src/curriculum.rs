//! Reverse curricula and the staged training driver.
//!
//! A curriculum is a list of start cells ordered from easiest (closest to the
//! goal) to hardest, always ending with the maze's real start. Training runs
//! episodes from each stage until one succeeds or the stage budget runs out,
//! carrying the same Q-table and replay buffer from stage to stage.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Agent, QTable, SamplerConfig};
use crate::gateway::ChatBackend;
use crate::maze::{Coord, EpisodeLog, Maze};
use crate::proposer::{Proposer, SYSTEM_PROMPT};
use crate::relation::{NodeLabel, RelationGraph};

pub const DEFAULT_STAGE_COUNT: usize = 2;
pub const DEFAULT_STAGE_BUDGET: usize = 20;
pub const DEFAULT_TOTAL_EPISODES: usize = 30;
const WALK_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurriculumMode {
    ReverseWalk,
    Llm,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curriculum {
    pub stages: Vec<Coord>,
    pub mode: CurriculumMode,
    /// Set when an LLM curriculum could not be obtained and the reverse walk
    /// was used instead.
    pub fallback: bool,
    /// Stages filled in from the reverse walk because the LLM's pick was invalid.
    #[serde(default)]
    pub backfilled: usize,
}

impl Curriculum {
    /// Degenerate curriculum: only the real start.
    pub fn start_only(maze: &Maze) -> Self {
        Curriculum {
            stages: vec![maze.start()],
            mode: CurriculumMode::None,
            fallback: false,
            backfilled: 0,
        }
    }

    /// Checks reachability, ordering and the terminal start.
    pub fn check(&self, maze: &Maze) -> Result<(), String> {
        if self.stages.last() != Some(&maze.start()) {
            return Err("last stage is not the maze start".into());
        }
        let mut prev = 0;
        for (i, &c) in self.stages.iter().enumerate() {
            if !maze.is_free(c) {
                return Err(format!("stage {i} at {c} is not a free cell"));
            }
            let d = maze
                .distance_to_goal(c)
                .ok_or_else(|| format!("stage {i} at {c} cannot reach the goal"))?;
            if d < prev {
                return Err(format!("stage {i} at {c} is easier than stage {}", i - 1));
            }
            prev = d;
        }
        Ok(())
    }
}

/// `⌈(width + height) / 4⌉`, at least 1.
pub fn default_walk_len(maze: &Maze) -> usize {
    (maze.width() + maze.height()).div_ceil(4).max(1)
}

fn random_walk(maze: &Maze, from: Coord, len: usize, rng: &mut ChaCha8Rng) -> Coord {
    let mut pos = from;
    for _ in 0..len {
        let moves: Vec<Coord> = match maze.legal_moves(pos) {
            Ok(m) => m.into_iter().collect(),
            Err(_) => break,
        };
        match moves.choose(rng) {
            Some(&next) => pos = next,
            None => break,
        }
    }
    pos
}

/// Stage candidates must be free, reachable, distinct and strictly easier
/// than the real start.
fn admissible(maze: &Maze, dist: &[Option<usize>], c: Coord, taken: &[Coord]) -> bool {
    let start_d = dist[maze.index_of(maze.start())];
    maze.is_free(c)
        && c != maze.start()
        && c != maze.goal()
        && !taken.contains(&c)
        && match (dist[maze.index_of(c)], start_d) {
            (Some(d), Some(s)) => d < s,
            _ => false,
        }
}

fn finish(maze: &Maze, mut stages: Vec<Coord>, dist: &[Option<usize>]) -> Vec<Coord> {
    stages.sort_by_key(|&c| dist[maze.index_of(c)].unwrap_or(usize::MAX));
    stages.push(maze.start());
    stages
}

fn walk_stages(maze: &Maze, stage_count: usize, walk_len: usize, seed: u64) -> Vec<Coord> {
    let dist = maze.distances_from(maze.goal());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = Vec::with_capacity(stage_count);
    for i in 1..=stage_count {
        for _ in 0..WALK_ATTEMPTS {
            let end = random_walk(maze, maze.goal(), i * walk_len.max(1), &mut rng);
            if end == maze.start() || end == maze.goal() {
                continue;
            }
            if admissible(maze, &dist, end, &stages) {
                stages.push(end);
            }
            break;
        }
    }
    stages
}

/// Stage `i` ends a seeded random walk of `i * walk_len` moves from the goal.
/// Walks that end on the start or goal are redrawn; stages that are not
/// strictly easier than the start, or repeat an earlier stage, are dropped.
pub fn reverse_walk_curriculum(
    maze: &Maze,
    stage_count: usize,
    walk_len: usize,
    seed: u64,
) -> Curriculum {
    let dist = maze.distances_from(maze.goal());
    let stages = walk_stages(maze, stage_count, walk_len, seed);
    Curriculum {
        stages: finish(maze, stages, &dist),
        mode: CurriculumMode::ReverseWalk,
        fallback: false,
        backfilled: 0,
    }
}

pub fn curriculum_prompt(graph: &RelationGraph, stage_count: usize) -> String {
    let items: Vec<String> = (1..=stage_count).map(|i| format!("C{i}: <label>")).collect();
    format!(
        "The maze is a network of nodes. Each line lists a node followed by the nodes it connects to directly.\n\
         {}\n\
         Reaching {goal} from {start} is hard. Build a reverse curriculum: choose {stage_count} intermediate \
         starting nodes, beginning close to {goal} and moving step by step towards {start}, so that each \
         one is a slightly harder task than the previous one. Each node must be connected to {goal} through \
         the network and must differ from {start} and {goal}.\n\
         Answer exactly in the form \"{}\", easiest first.",
        graph.render(),
        items.join(", "),
        goal = graph.goal(),
        start = graph.start(),
    )
}

/// Extracts `C<k>: <label>` items in order of appearance.
pub fn parse_curriculum_reply(reply: &str) -> Vec<NodeLabel> {
    let bytes = reply.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let boundary = i == 0 || !bytes[i - 1].is_ascii_alphanumeric();
        if bytes[i] == b'C' && boundary {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > i + 1 {
                while j < bytes.len() && bytes[j] == b' ' {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b':' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                        j += 1;
                    }
                    let begin = j;
                    while j < bytes.len() && bytes[j].is_ascii_uppercase() {
                        j += 1;
                    }
                    if let Ok(l) = NodeLabel::parse(&reply[begin..j]) {
                        out.push(l);
                    }
                    i = j;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

/// Asks the backend for `stage_count` intermediate start nodes. Invalid
/// picks are dropped and replaced by reverse-walk stages; a backend error
/// yields the reverse-walk curriculum with `fallback` set.
pub fn llm_curriculum(
    maze: &Maze,
    graph: &RelationGraph,
    backend: &dyn ChatBackend,
    stage_count: usize,
    walk_len: usize,
    seed: u64,
) -> (Curriculum, Option<crate::proposer::Transcript>) {
    let prompt = curriculum_prompt(graph, stage_count);
    let reply = backend.complete(SYSTEM_PROMPT, &prompt);
    let transcript = crate::proposer::Transcript {
        prompt,
        reply: reply.as_ref().ok().cloned(),
        error: reply.as_ref().err().map(|e| e.to_string()),
    };
    let text = match reply {
        Ok(t) => t,
        Err(e) => {
            log::warn!("curriculum request failed, using reverse walk: {e}");
            let mut c = reverse_walk_curriculum(maze, stage_count, walk_len, seed);
            c.mode = CurriculumMode::Llm;
            c.fallback = true;
            return (c, Some(transcript));
        }
    };
    let dist = maze.distances_from(maze.goal());
    let mut stages: Vec<Coord> = Vec::new();
    for label in parse_curriculum_reply(&text) {
        if stages.len() == stage_count {
            break;
        }
        if let Some(c) = graph.coord_of(label) {
            if admissible(maze, &dist, c, &stages) {
                stages.push(c);
            }
        }
    }
    let mut backfilled = 0;
    if stages.len() < stage_count {
        for c in walk_stages(maze, stage_count, walk_len, seed) {
            if stages.len() == stage_count {
                break;
            }
            if admissible(maze, &dist, c, &stages) {
                stages.push(c);
                backfilled += 1;
            }
        }
    }
    let curriculum = Curriculum {
        stages: finish(maze, stages, &dist),
        mode: CurriculumMode::Llm,
        fallback: false,
        backfilled,
    };
    (curriculum, Some(transcript))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeBudget {
    pub per_stage: usize,
    pub total: usize,
}

impl Default for EpisodeBudget {
    fn default() -> Self {
        EpisodeBudget {
            per_stage: DEFAULT_STAGE_BUDGET,
            total: DEFAULT_TOTAL_EPISODES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: usize,
    pub start: Coord,
    pub episodes: usize,
    /// 1-based episode index within the stage of the first success.
    pub first_success: Option<usize>,
    /// The stage ended without a success.
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedEpisode {
    pub stage: usize,
    pub log: EpisodeLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumRun {
    pub episodes: Vec<StagedEpisode>,
    pub stages: Vec<StageOutcome>,
}

impl CurriculumRun {
    pub fn total_episodes(&self) -> usize {
        self.episodes.len()
    }

    /// Outcome of the stage that starts at the real start (the last one).
    pub fn final_stage(&self) -> Option<&StageOutcome> {
        self.stages.last()
    }

    pub fn logs(&self) -> impl Iterator<Item = &EpisodeLog> {
        self.episodes.iter().map(|e| &e.log)
    }
}

/// Trains `agent` stage by stage. A stage that exhausts its budget does not
/// stop later stages. Every stage gets at least one episode while the total
/// budget allows it.
pub fn run_curriculum(
    agent: &mut Agent,
    maze: &Maze,
    graph: &RelationGraph,
    proposer: &dyn Proposer,
    curriculum: &Curriculum,
    budget: EpisodeBudget,
    maze_id: &str,
) -> CurriculumRun {
    let mut run = CurriculumRun {
        episodes: Vec::new(),
        stages: Vec::with_capacity(curriculum.stages.len()),
    };
    for (stage, &start) in curriculum.stages.iter().enumerate() {
        let mut outcome = StageOutcome {
            stage,
            start,
            episodes: 0,
            first_success: None,
            exhausted: false,
        };
        // later stages keep at least one episode each out of the total
        let reserved = curriculum.stages.len() - stage - 1;
        let ceiling = budget.total.saturating_sub(reserved).max(1);
        while outcome.episodes < budget.per_stage && run.episodes.len() < ceiling {
            let log = agent.run_episode(maze, graph, proposer, start, maze_id);
            outcome.episodes += 1;
            let success = log.reached_goal;
            run.episodes.push(StagedEpisode { stage, log });
            if success {
                outcome.first_success = Some(outcome.episodes);
                break;
            }
        }
        outcome.exhausted = outcome.first_success.is_none();
        if outcome.exhausted {
            log::debug!("{maze_id}: stage {stage} from {start} ended without success");
        }
        run.stages.push(outcome);
    }
    run
}

/// Fresh agent trained over `curriculum`; returns the learned table and the run.
pub fn run_s2rcql(
    maze: &Maze,
    cfg: &SamplerConfig,
    proposer: &dyn Proposer,
    curriculum: &Curriculum,
    budget: EpisodeBudget,
) -> (QTable, CurriculumRun) {
    let graph = RelationGraph::build(maze);
    let mut agent = Agent::new(cfg.clone());
    let run = run_curriculum(&mut agent, maze, &graph, proposer, curriculum, budget, "maze");
    (agent.q, run)
}
