//! Maze suites, metrics, campaigns and reports.
//!
//! * Success rate = successful runs / all runs.
//! * Optimality rate = runs matching the BFS shortest length / successful runs.
//!   Undefined (reported as N/A) when nothing succeeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::{
    default_walk_len, llm_curriculum, reverse_walk_curriculum, run_curriculum, Curriculum,
    CurriculumMode, EpisodeBudget, StageOutcome, DEFAULT_STAGE_COUNT,
};
use crate::engine::{Agent, BranchCounts, Orientation, QTable, SamplerConfig, DEFAULT_BUFFER_CAPACITY, DEFAULT_EXEMPLARS};
use crate::gateway::ChatBackend;
use crate::maze::{Coord, EpisodeLog, Maze};
use crate::maze_text::{MazeDoc, MazeTextError};
use crate::proposer::{
    GreedyBlindProposer, LlmProposer, OracleProposer, PromptStyle, Proposer, ScriptedProposer,
    Transcript, UniformRandomProposer,
};
use crate::relation::RelationGraph;

pub const MAX_OBSTACLE_FRACTION: f64 = 0.35;
pub const DEFAULT_OBSTACLE_FRACTION: f64 = 0.12;
const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid suite spec: {0}")]
    Spec(String),
    #[error("gave up on {height}x{width} maze after {MAX_REJECTIONS} unsolvable draws")]
    Generation { height: usize, width: usize },
    #[error("suite file: {0}")]
    SuiteFile(String),
    #[error(transparent)]
    Maze(#[from] MazeTextError),
    #[error("{0}")]
    Metric(#[from] MetricError),
    #[error("log for {maze_id} visits {coord}, outside the maze")]
    Inconsistent { maze_id: String, coord: Coord },
    #[error("campaign config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("no oracle length for maze {0}")]
    MissingOracle(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeClass {
    pub height: usize,
    pub width: usize,
    pub count: usize,
    pub obstacle_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub classes: Vec<SizeClass>,
    pub seed: u64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        let class = |n, count| SizeClass {
            height: n,
            width: n,
            count,
            obstacle_fraction: DEFAULT_OBSTACLE_FRACTION,
        };
        SuiteSpec {
            classes: vec![class(5, 30), class(7, 20), class(10, 10)],
            seed: 0,
        }
    }
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        for c in &self.classes {
            if c.height == 0 || c.width == 0 || c.height * c.width < 2 {
                return Err(BenchError::Spec(format!(
                    "{}x{} grid cannot hold distinct start and goal",
                    c.height, c.width
                )));
            }
            if !(0.0..=MAX_OBSTACLE_FRACTION).contains(&c.obstacle_fraction) {
                return Err(BenchError::Spec(format!(
                    "obstacle_fraction {} outside [0, {MAX_OBSTACLE_FRACTION}]",
                    c.obstacle_fraction
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteMaze {
    pub id: String,
    pub maze: Maze,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub spec: SuiteSpec,
    pub mazes: Vec<SuiteMaze>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    spec: SuiteSpec,
    mazes: Vec<SuiteFileEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFileEntry {
    id: String,
    maze: MazeDoc,
}

impl Suite {
    pub fn to_json(&self) -> String {
        let file = SuiteFile {
            spec: self.spec.clone(),
            mazes: self
                .mazes
                .iter()
                .map(|m| SuiteFileEntry {
                    id: m.id.clone(),
                    maze: MazeDoc::from_maze(&m.maze),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let file: SuiteFile =
            serde_json::from_str(text).map_err(|e| BenchError::SuiteFile(e.to_string()))?;
        let mazes = file
            .mazes
            .into_iter()
            .map(|e| Ok(SuiteMaze { id: e.id, maze: e.maze.to_maze()? }))
            .collect::<Result<Vec<_>, BenchError>>()?;
        Ok(Suite {
            spec: file.spec,
            mazes,
        })
    }
}

/// SplitMix64 finaliser; derives independent stream seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_maze(class: &SizeClass, rng: &mut ChaCha8Rng) -> Result<Maze, BenchError> {
    let (h, w) = (class.height, class.width);
    let start = Coord::new(0, 0);
    let goal = Coord::new(h - 1, w - 1);
    let mut candidates: Vec<Coord> = (0..h * w)
        .map(|i| Coord::new(i / w, i % w))
        .filter(|&c| c != start && c != goal)
        .collect();
    let n_obstacles = ((class.obstacle_fraction * (h * w) as f64).round() as usize).min(candidates.len());
    for _ in 0..MAX_REJECTIONS {
        let (chosen, _) = candidates.partial_shuffle(rng, n_obstacles);
        let maze = Maze::new(h, w, start, goal, chosen.iter().copied())
            .map_err(|e| BenchError::Spec(e.to_string()))?;
        if maze.shortest_path_len().is_some() {
            return Ok(maze);
        }
    }
    Err(BenchError::Generation { height: h, width: w })
}

/// Seeded rejection sampling: `round(fraction * cells)` obstacles placed
/// uniformly away from the corners `(0,0)` (start) and `(H-1,W-1)` (goal),
/// redrawn until BFS finds a path.
pub fn generate_suite(spec: &SuiteSpec) -> Result<Suite, BenchError> {
    spec.validate()?;
    let mut mazes = Vec::new();
    for (ci, class) in spec.classes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, ci as u64));
        for k in 0..class.count {
            mazes.push(SuiteMaze {
                id: format!("{}x{}-{:03}", class.height, class.width, k),
                maze: random_maze(class, &mut rng)?,
            });
        }
    }
    Ok(Suite {
        spec: spec.clone(),
        mazes,
    })
}

pub fn success_rate<'a>(logs: impl IntoIterator<Item = &'a EpisodeLog>) -> Result<f64, MetricError> {
    let (mut all, mut suc) = (0usize, 0usize);
    for l in logs {
        all += 1;
        suc += l.reached_goal as usize;
    }
    if all == 0 {
        return Err(MetricError::Undefined("success rate of zero runs"));
    }
    Ok(suc as f64 / all as f64)
}

/// Fraction of successful logs whose length equals the oracle length of
/// their maze. The denominator is the number of successes.
pub fn optimality_rate<'a>(
    logs: impl IntoIterator<Item = &'a EpisodeLog>,
    oracle: &BTreeMap<String, usize>,
) -> Result<f64, MetricError> {
    let (mut suc, mut opt) = (0usize, 0usize);
    for l in logs.into_iter().filter(|l| l.reached_goal) {
        let best = oracle
            .get(&l.maze_id)
            .ok_or_else(|| MetricError::MissingOracle(l.maze_id.clone()))?;
        suc += 1;
        opt += (l.step_count == *best) as usize;
    }
    if suc == 0 {
        return Err(MetricError::Undefined("optimality rate with zero successes"));
    }
    Ok(opt as f64 / suc as f64)
}

/// Per-cell visit counts, `[row][col]`.
pub fn heatmap<'a>(
    logs: impl IntoIterator<Item = &'a EpisodeLog>,
    maze: &Maze,
) -> Result<Vec<Vec<u32>>, BenchError> {
    let mut grid = vec![vec![0u32; maze.width()]; maze.height()];
    for l in logs {
        for &c in &l.visited {
            if !maze.in_bounds(c) {
                return Err(BenchError::Inconsistent {
                    maze_id: l.maze_id.clone(),
                    coord: c,
                });
            }
            grid[c.row][c.col] += 1;
        }
    }
    Ok(grid)
}

/// Binary PPM (P6). Obstacles black, unvisited cells white, visited cells
/// shade from pale yellow to red with the visit count. Start and goal get a
/// blue and green border respectively.
pub fn heatmap_ppm(counts: &[Vec<u32>], maze: &Maze, cell_px: usize) -> Vec<u8> {
    let cell_px = cell_px.max(3);
    let (h, w) = (maze.height(), maze.width());
    let max = counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let mut out = format!("P6\n{} {}\n255\n", w * cell_px, h * cell_px).into_bytes();
    for py in 0..h * cell_px {
        for px in 0..w * cell_px {
            let c = Coord::new(py / cell_px, px / cell_px);
            let edge = {
                let (iy, ix) = (py % cell_px, px % cell_px);
                iy == 0 || ix == 0 || iy == cell_px - 1 || ix == cell_px - 1
            };
            let n = counts[c.row][c.col];
            let rgb: [u8; 3] = if edge && c == maze.start() {
                [40, 80, 220]
            } else if edge && c == maze.goal() {
                [30, 160, 60]
            } else if maze.is_obstacle(c) {
                [0, 0, 0]
            } else if n == 0 {
                [255, 255, 255]
            } else {
                let t = (n as f64 / max).clamp(0.0, 1.0);
                [255, (230.0 * (1.0 - t) + 20.0 * t) as u8, (150.0 * (1.0 - t)) as u8]
            };
            out.extend_from_slice(&rgb);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Proposer alone with a coordinate prompt.
    Naive,
    /// Proposer alone with the relation-network prompt.
    PromptS2r,
    /// Q-learning with the proposer branch, no curriculum.
    Qlearn,
    /// Q-learning with the proposer branch over a reverse curriculum.
    S2rcql,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::PromptS2r => "prompt-s2r",
            Method::Qlearn => "qlearn",
            Method::S2rcql => "s2rcql",
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, Method::Qlearn | Method::S2rcql)
    }
}

#[derive(Clone)]
pub enum ProposerKind {
    Oracle,
    GreedyBlind,
    Scripted(Vec<String>),
    UniformRandom,
    Llm(Arc<dyn ChatBackend>),
}

impl std::fmt::Debug for ProposerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl ProposerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProposerKind::Oracle => "oracle",
            ProposerKind::GreedyBlind => "greedy-blind",
            ProposerKind::Scripted(_) => "scripted",
            ProposerKind::UniformRandom => "uniform-random",
            ProposerKind::Llm(_) => "llm",
        }
    }

    pub fn instantiate(&self, seed: u64, style: PromptStyle) -> Box<dyn Proposer> {
        match self {
            ProposerKind::Oracle => Box::new(OracleProposer),
            ProposerKind::GreedyBlind => Box::new(GreedyBlindProposer),
            ProposerKind::Scripted(s) => Box::new(ScriptedProposer::new(s.iter().cloned())),
            ProposerKind::UniformRandom => Box::new(UniformRandomProposer::new(seed)),
            ProposerKind::Llm(b) => Box::new(LlmProposer::new(Arc::clone(b), style)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub method: Method,
    pub sampler: SamplerConfig,
    pub curriculum: CurriculumMode,
    pub stage_count: usize,
    /// `None` selects `⌈(W+H)/4⌉` per maze.
    pub walk_len: Option<usize>,
    pub budget: EpisodeBudget,
    /// Independent runs per maze for the prompt-only methods.
    pub attempts: usize,
    pub exemplars: usize,
    pub buffer_capacity: usize,
    /// Relation-network prompts for the learning methods.
    pub s2r_text: bool,
    pub workers: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            method: Method::S2rcql,
            sampler: SamplerConfig::default(),
            curriculum: CurriculumMode::ReverseWalk,
            stage_count: DEFAULT_STAGE_COUNT,
            walk_len: None,
            budget: EpisodeBudget::default(),
            attempts: 1,
            exemplars: DEFAULT_EXEMPLARS,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            s2r_text: true,
            workers: 4,
        }
    }
}

impl CampaignConfig {
    fn prompt_style(&self) -> PromptStyle {
        match self.method {
            Method::Naive => PromptStyle::Coordinate,
            Method::PromptS2r => PromptStyle::Relational,
            Method::Qlearn | Method::S2rcql if self.s2r_text => PromptStyle::Relational,
            _ => PromptStyle::Coordinate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Curriculum stage, absent for prompt-only runs.
    pub stage: Option<usize>,
    /// Counted by the success/optimality metrics.
    pub scored: bool,
    pub log: EpisodeLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeRun {
    pub maze_id: String,
    pub maze: MazeDoc,
    pub shortest_path_len: Option<usize>,
    pub curriculum: Option<Curriculum>,
    pub stages: Vec<StageOutcome>,
    pub episodes: Vec<EpisodeRecord>,
    pub heatmap: Vec<Vec<u32>>,
    pub branches: BranchCounts,
    #[serde(skip)]
    pub qtable: QTable,
    #[serde(skip)]
    pub transcripts: Vec<Transcript>,
}

impl MazeRun {
    pub fn scored_logs(&self) -> impl Iterator<Item = &EpisodeLog> {
        self.episodes.iter().filter(|e| e.scored).map(|e| &e.log)
    }

    pub fn size(&self) -> (usize, usize) {
        (self.maze.size[0], self.maze.size[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub height: usize,
    pub width: usize,
    pub mazes: usize,
    pub runs: usize,
    pub successes: usize,
    pub optimal: usize,
    pub success_rate: Option<f64>,
    /// `None` when there were no successes.
    pub optimality_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub proposer: String,
    pub config: serde_json::Value,
    pub summary: Vec<SizeSummary>,
    pub overall: SizeSummary,
    pub mazes: Vec<MazeRun>,
}

fn summarize<'a>(runs: impl IntoIterator<Item = &'a MazeRun>, height: usize, width: usize) -> SizeSummary {
    let runs: Vec<&MazeRun> = runs.into_iter().collect();
    let oracle: BTreeMap<String, usize> = runs
        .iter()
        .filter_map(|r| r.shortest_path_len.map(|d| (r.maze_id.clone(), d)))
        .collect();
    let logs: Vec<&EpisodeLog> = runs.iter().flat_map(|r| r.scored_logs()).collect();
    let successes = logs.iter().filter(|l| l.reached_goal).count();
    let optimal = logs
        .iter()
        .filter(|l| l.reached_goal && oracle.get(&l.maze_id) == Some(&l.step_count))
        .count();
    SizeSummary {
        height,
        width,
        mazes: runs.len(),
        runs: logs.len(),
        successes,
        optimal,
        success_rate: success_rate(logs.iter().copied()).ok(),
        optimality_rate: optimality_rate(logs.iter().copied(), &oracle).ok(),
    }
}

/// Per-size summaries in order of first appearance, then the overall row.
pub fn summarize_runs(runs: &[MazeRun]) -> (Vec<SizeSummary>, SizeSummary) {
    let mut sizes: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        if !sizes.contains(&r.size()) {
            sizes.push(r.size());
        }
    }
    let per = sizes
        .iter()
        .map(|&(h, w)| summarize(runs.iter().filter(|r| r.size() == (h, w)), h, w))
        .collect();
    (per, summarize(runs, 0, 0))
}

/// Runs one maze under `cfg`.
pub fn run_maze(
    id: &str,
    maze: &Maze,
    cfg: &CampaignConfig,
    proposer_kind: &ProposerKind,
    curriculum_backend: Option<&dyn ChatBackend>,
    seed: u64,
) -> Result<MazeRun, BenchError> {
    let graph = RelationGraph::build(maze);
    let proposer = proposer_kind.instantiate(mix_seed(seed, 1), cfg.prompt_style());
    let mut sampler = cfg.sampler.clone();
    sampler.seed = seed;
    let mut agent = Agent::new(sampler).with_buffer_capacity(cfg.buffer_capacity);
    agent.exemplars = cfg.exemplars;
    let mut episodes = Vec::new();
    let mut stages = Vec::new();
    let mut curriculum = None;
    let mut transcripts = Vec::new();

    if cfg.method.learns() {
        let walk_len = cfg.walk_len.unwrap_or_else(|| default_walk_len(maze));
        let walk_seed = mix_seed(seed, 2);
        let plan = match (cfg.method, cfg.curriculum) {
            (Method::Qlearn, _) | (_, CurriculumMode::None) => Curriculum::start_only(maze),
            (_, CurriculumMode::ReverseWalk) => {
                reverse_walk_curriculum(maze, cfg.stage_count, walk_len, walk_seed)
            }
            (_, CurriculumMode::Llm) => {
                let backend = curriculum_backend.ok_or_else(|| {
                    BenchError::Config("llm curriculum needs a chat backend".into())
                })?;
                let (c, t) = llm_curriculum(maze, &graph, backend, cfg.stage_count, walk_len, walk_seed);
                transcripts.extend(t);
                c
            }
        };
        let run = run_curriculum(&mut agent, maze, &graph, proposer.as_ref(), &plan, cfg.budget, id);
        let last_stage = plan.stages.len() - 1;
        let last_idx = run.episodes.iter().rposition(|e| e.stage == last_stage);
        for (i, e) in run.episodes.into_iter().enumerate() {
            episodes.push(EpisodeRecord {
                stage: Some(e.stage),
                scored: Some(i) == last_idx,
                log: e.log,
            });
        }
        stages = run.stages;
        curriculum = Some(plan);
    } else {
        agent.learn = false;
        agent.cfg.epsilon = 0.0;
        agent.cfg.orientation = Orientation::ProposerOnLowDraw;
        agent.cfg.schedule = crate::engine::EpsilonSchedule::Constant;
        for _ in 0..cfg.attempts.max(1) {
            let log = agent.run_episode(maze, &graph, proposer.as_ref(), maze.start(), id);
            episodes.push(EpisodeRecord {
                stage: None,
                scored: true,
                log,
            });
        }
    }
    transcripts.extend(proposer.transcripts());
    let heat = heatmap(episodes.iter().map(|e| &e.log), maze)?;
    Ok(MazeRun {
        maze_id: id.to_string(),
        maze: MazeDoc::from_maze(maze),
        shortest_path_len: maze.shortest_path_len(),
        curriculum,
        stages,
        episodes,
        heatmap: heat,
        branches: agent.branches,
        qtable: agent.q,
        transcripts,
    })
}

/// Runs every maze of the suite, up to `cfg.workers` at a time. Maze `i`
/// uses seed `mix_seed(cfg.sampler.seed, i)`, so results do not depend on
/// scheduling.
pub fn run_campaign(
    suite: &Suite,
    cfg: &CampaignConfig,
    proposer: &ProposerKind,
    curriculum_backend: Option<Arc<dyn ChatBackend>>,
    config_echo: serde_json::Value,
) -> Result<RunReport, BenchError> {
    cfg.sampler
        .validate()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    if cfg.method == Method::S2rcql
        && cfg.curriculum == CurriculumMode::Llm
        && curriculum_backend.is_none()
    {
        return Err(BenchError::Config("llm curriculum needs a chat backend".into()));
    }
    let n = suite.mazes.len();
    let slots: Mutex<Vec<Option<Result<MazeRun, BenchError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = cfg.workers.clamp(1, n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let entry = &suite.mazes[i];
                let result = run_maze(
                    &entry.id,
                    &entry.maze,
                    cfg,
                    proposer,
                    curriculum_backend.as_deref(),
                    mix_seed(cfg.sampler.seed, i as u64),
                );
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
            });
        }
    });
    let mazes = slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every maze visited"))
        .collect::<Result<Vec<_>, _>>()?;
    let (summary, overall) = summarize_runs(&mazes);
    Ok(RunReport {
        method: cfg.method,
        proposer: proposer.name().to_string(),
        config: config_echo,
        summary,
        overall,
        mazes,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format!("{:.1}%", v * 100.0))
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Summaries recomputed from the embedded episode logs.
    pub fn recompute(&self) -> (Vec<SizeSummary>, SizeSummary) {
        summarize_runs(&self.mazes)
    }

    pub fn label(&self) -> String {
        let episodes = self
            .config
            .pointer("/budget/total")
            .and_then(serde_json::Value::as_u64);
        match (self.method.learns(), episodes) {
            (true, Some(n)) => format!("{}({n}) [{}]", self.method.as_str(), self.proposer),
            _ => format!("{} [{}]", self.method.as_str(), self.proposer),
        }
    }
}

/// Plain-text table: one row per report, Success/Optimality per size class.
pub fn render_table(reports: &[&RunReport]) -> String {
    let mut sizes: Vec<(usize, usize)> = Vec::new();
    for r in reports {
        for s in &r.summary {
            if !sizes.contains(&(s.height, s.width)) {
                sizes.push((s.height, s.width));
            }
        }
    }
    let label_w = reports
        .iter()
        .map(|r| r.label().len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "Method");
    for (h, w) in &sizes {
        let head = format!("{h}x{w}");
        let _ = write!(out, " | {:^21}", head);
    }
    out.push('\n');
    let _ = write!(out, "{:<label_w$}", "");
    for _ in &sizes {
        let _ = write!(out, " | {:>9} {:>11}", "Success", "Optimality");
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(label_w + sizes.len() * 24));
    for r in reports {
        let _ = write!(out, "{:<label_w$}", r.label());
        for &(h, w) in &sizes {
            match r.summary.iter().find(|s| (s.height, s.width) == (h, w)) {
                Some(s) => {
                    let _ = write!(out, " | {:>9} {:>11}", pct(s.success_rate), pct(s.optimality_rate));
                }
                None => {
                    let _ = write!(out, " | {:>9} {:>11}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
