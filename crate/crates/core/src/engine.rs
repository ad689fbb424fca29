//! Tabular Q-learning whose exploratory branch is delegated to a [`Proposer`].
//!
//! Action sampling: draw `p ~ U(0,1)` per step. With the default
//! [`Orientation::ProposerOnLowDraw`] the proposer answers when `p < 1 - ε`
//! and the greedy action is taken otherwise. [`Orientation::ProposerOnHighDraw`]
//! swaps the two branches (proposer with probability ε).

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maze::{Coord, EpisodeLog, Maze, StepOutcome};
use crate::proposer::{ProposalContext, Proposer};
use crate::relation::{NodeLabel, RelationGraph};

pub const DEFAULT_BUFFER_CAPACITY: usize = 512;
pub const DEFAULT_EXEMPLARS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Proposer when `p < 1 - ε`, greedy otherwise.
    ProposerOnLowDraw,
    /// Proposer when `p < ε`, greedy otherwise.
    ProposerOnHighDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EpsilonSchedule {
    Constant,
    /// Linear interpolation from the configured ε to `end` over `episodes`.
    Linear { end: f64, episodes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
    pub orientation: Orientation,
    pub schedule: EpsilonSchedule,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            epsilon: 0.3,
            alpha: 0.1,
            gamma: 0.9,
            seed: 0,
            orientation: Orientation::ProposerOnLowDraw,
            schedule: EpsilonSchedule::Constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error("malformed q-table snapshot on line {line}: {message}")]
    Snapshot { line: usize, message: String },
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if let EpsilonSchedule::Linear { end, .. } = self.schedule {
            if !(0.0..=1.0).contains(&end) {
                return bad("schedule end must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn epsilon_at(&self, episode: usize) -> f64 {
        match self.schedule {
            EpsilonSchedule::Constant => self.epsilon,
            EpsilonSchedule::Linear { end, episodes } => {
                if episodes == 0 || episode >= episodes {
                    end
                } else {
                    let t = episode as f64 / episodes as f64;
                    self.epsilon + (end - self.epsilon) * t
                }
            }
        }
    }
}

/// `(state, action) -> value`, zero for absent keys.
///
/// Entries for attempted illegal actions are kept so rejected moves accrue a
/// penalty, but greedy selection only ranks graph neighbours.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    values: BTreeMap<(NodeLabel, NodeLabel), f64>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: NodeLabel, a: NodeLabel) -> f64 {
        self.values.get(&(s, a)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, s: NodeLabel, a: NodeLabel, v: f64) {
        self.values.insert((s, a), v);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeLabel, NodeLabel, f64)> + '_ {
        self.values.iter().map(|(&(s, a), &v)| (s, a, v))
    }

    /// Q-values of the legal actions at `s`.
    pub fn row(&self, graph: &RelationGraph, s: NodeLabel) -> BTreeMap<NodeLabel, f64> {
        graph.neighbors(s).iter().map(|&a| (a, self.get(s, a))).collect()
    }

    /// `max_a Q(s, a)` over neighbours; zero when `s` has none.
    pub fn max_value(&self, graph: &RelationGraph, s: NodeLabel) -> f64 {
        graph
            .neighbors(s)
            .iter()
            .map(|&a| self.get(s, a))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(0.0)
    }

    /// Greedy neighbour of `s`; ties go to the lowest label index.
    pub fn argmax(&self, graph: &RelationGraph, s: NodeLabel) -> Option<NodeLabel> {
        let mut best: Option<(NodeLabel, f64)> = None;
        for &a in graph.neighbors(s) {
            let v = self.get(s, a);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
    }

    /// Tab-separated `state action value` lines in key order.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::from("# state\taction\tvalue\n");
        for (s, a, v) in self.iter() {
            let _ = writeln!(out, "{s}\t{a}\t{v:?}");
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self, EngineError> {
        let mut q = QTable::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| EngineError::Snapshot {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [s, a, v] = fields.as_slice() else {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            };
            let s = NodeLabel::parse(s).map_err(|e| err(e.to_string()))?;
            let a = NodeLabel::parse(a).map_err(|e| err(e.to_string()))?;
            let v: f64 = v.parse().map_err(|e| err(format!("{e}")))?;
            q.set(s, a, v);
        }
        Ok(q)
    }
}

/// One transition with the value `Q(s, a)` held right after its update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceTuple {
    pub s: NodeLabel,
    pub a: NodeLabel,
    pub r: f64,
    pub s_next: NodeLabel,
    pub q: f64,
}

/// FIFO experience store.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    entries: VecDeque<ExperienceTuple>,
    capacity: usize,
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_BUFFER_CAPACITY)
    }
}

impl ReplayBuffer {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        ReplayBuffer {
            entries: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn push(&mut self, t: ExperienceTuple) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &ExperienceTuple> {
        self.entries.iter()
    }
}

/// Top-`k` buffer entries nearest to `current` in graph hops. Ties prefer the
/// higher `q`, then the more recent entry. Unreachable states rank last.
pub fn retrieve_similar(
    buf: &ReplayBuffer,
    graph: &RelationGraph,
    current: NodeLabel,
    k: usize,
) -> Vec<ExperienceTuple> {
    if k == 0 || buf.is_empty() {
        return Vec::new();
    }
    let dist = graph.distances_from(current);
    let mut ranked: Vec<(usize, &ExperienceTuple, usize)> = buf
        .iter()
        .enumerate()
        .map(|(pos, e)| {
            let d = dist.get(e.s.index()).copied().flatten().unwrap_or(usize::MAX);
            (d, e, pos)
        })
        .collect();
    ranked.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then_with(|| y.1.q.total_cmp(&x.1.q))
            .then_with(|| y.2.cmp(&x.2))
    });
    ranked.into_iter().take(k).map(|(_, e, _)| e.clone()).collect()
}

/// One-step Q-learning update. Returns the new `Q(s, a)`.
#[allow(clippy::too_many_arguments)]
pub fn update_q(
    cfg: &SamplerConfig,
    q: &mut QTable,
    graph: &RelationGraph,
    s: NodeLabel,
    a: NodeLabel,
    r: f64,
    s_next: NodeLabel,
    terminal: bool,
) -> f64 {
    let bootstrap = if terminal { 0.0 } else { cfg.gamma * q.max_value(graph, s_next) };
    let old = q.get(s, a);
    let new = old + cfg.alpha * (r + bootstrap - old);
    q.set(s, a, new);
    new
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Proposer,
    Greedy,
    /// Proposer branch drawn but the proposer failed; greedy action used.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub action: NodeLabel,
    pub branch: Branch,
}

/// Decides which branch a draw `p` selects.
pub fn proposer_branch(orientation: Orientation, epsilon: f64, p: f64) -> bool {
    match orientation {
        Orientation::ProposerOnLowDraw => p < 1.0 - epsilon,
        Orientation::ProposerOnHighDraw => p < epsilon,
    }
}

/// Samples one action. `rng` supplies the per-step draw `p ∈ [0, 1)`.
pub fn sample_action<R: Rng + ?Sized>(
    orientation: Orientation,
    epsilon: f64,
    q: &QTable,
    ctx: &ProposalContext<'_>,
    proposer: &dyn Proposer,
    rng: &mut R,
) -> Choice {
    let p: f64 = rng.gen();
    let greedy = || {
        q.argmax(ctx.graph, ctx.current)
            .unwrap_or(ctx.current)
    };
    if proposer_branch(orientation, epsilon, p) {
        match proposer.propose(ctx) {
            Ok(prop) => Choice {
                action: prop.action,
                branch: Branch::Proposer,
            },
            Err(e) => {
                log::debug!("proposer {} failed: {e}; using greedy action", proposer.name());
                Choice {
                    action: greedy(),
                    branch: Branch::Fallback,
                }
            }
        }
    } else {
        Choice {
            action: greedy(),
            branch: Branch::Greedy,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchCounts {
    pub proposer: u64,
    pub greedy: u64,
    pub fallback: u64,
}

impl BranchCounts {
    fn bump(&mut self, b: Branch) {
        match b {
            Branch::Proposer => self.proposer += 1,
            Branch::Greedy => self.greedy += 1,
            Branch::Fallback => self.fallback += 1,
        }
    }
}

/// Learner state carried across episodes and curriculum stages.
#[derive(Debug, Clone)]
pub struct Agent {
    pub q: QTable,
    pub buffer: ReplayBuffer,
    pub cfg: SamplerConfig,
    pub exemplars: usize,
    /// When false the agent only acts: no Q updates, no experience stored.
    pub learn: bool,
    pub branches: BranchCounts,
    episodes_run: usize,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(cfg: SamplerConfig) -> Self {
        Agent {
            q: QTable::new(),
            buffer: ReplayBuffer::default(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            exemplars: DEFAULT_EXEMPLARS,
            learn: true,
            branches: BranchCounts::default(),
            episodes_run: 0,
        }
    }

    pub fn with_buffer_capacity(mut self, capacity: usize) -> Self {
        self.buffer = ReplayBuffer::with_capacity(capacity);
        self
    }

    pub fn episodes_run(&self) -> usize {
        self.episodes_run
    }

    /// Runs one episode from `start_at` until the goal or the step cap.
    pub fn run_episode(
        &mut self,
        maze: &Maze,
        graph: &RelationGraph,
        proposer: &dyn Proposer,
        start_at: Coord,
        maze_id: &str,
    ) -> EpisodeLog {
        let epsilon = self.cfg.epsilon_at(self.episodes_run);
        self.episodes_run += 1;
        let mut log = EpisodeLog::new(maze_id, start_at);
        if start_at == maze.goal() {
            log.reached_goal = true;
            return log;
        }
        let cap = maze.step_cap();
        let mut pos = start_at;
        let want_exemplars = proposer.uses_exemplars();
        for step in 0..cap {
            let Some(s) = graph.label_of(pos) else { break };
            let ctx = ProposalContext {
                graph,
                current: s,
                goal: graph.goal(),
                q_row: self.q.row(graph, s),
                exemplars: if want_exemplars {
                    retrieve_similar(&self.buffer, graph, s, self.exemplars)
                } else {
                    Vec::new()
                },
                step_budget_left: cap - step,
            };
            let choice = sample_action(
                self.cfg.orientation,
                epsilon,
                &self.q,
                &ctx,
                proposer,
                &mut self.rng,
            );
            self.branches.bump(choice.branch);
            let outcome = match graph.coord_of(choice.action) {
                Some(to) => maze.step(pos, to).unwrap_or_else(|_| StepOutcome::rejected(pos)),
                None => StepOutcome::rejected(pos),
            };
            let s_next = graph.label_of(outcome.next).unwrap_or(s);
            if self.learn {
                let q = update_q(
                    &self.cfg,
                    &mut self.q,
                    graph,
                    s,
                    choice.action,
                    outcome.reward,
                    s_next,
                    outcome.terminal,
                );
                self.buffer.push(ExperienceTuple {
                    s,
                    a: choice.action,
                    r: outcome.reward,
                    s_next,
                    q,
                });
            }
            log.record(&outcome);
            pos = outcome.next;
            if outcome.terminal {
                break;
            }
        }
        log
    }
}

/// Follows the greedy policy from `start_at` without learning.
pub fn greedy_rollout(
    maze: &Maze,
    graph: &RelationGraph,
    q: &QTable,
    start_at: Coord,
    maze_id: &str,
) -> EpisodeLog {
    let mut log = EpisodeLog::new(maze_id, start_at);
    if start_at == maze.goal() {
        log.reached_goal = true;
        return log;
    }
    let mut pos = start_at;
    for _ in 0..maze.step_cap() {
        let outcome = graph
            .label_of(pos)
            .and_then(|s| q.argmax(graph, s))
            .and_then(|a| graph.coord_of(a))
            .map(|to| maze.step(pos, to).unwrap_or_else(|_| StepOutcome::rejected(pos)))
            .unwrap_or_else(|| StepOutcome::rejected(pos));
        log.record(&outcome);
        pos = outcome.next;
        if outcome.terminal {
            break;
        }
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposer::{OracleProposer, ScriptedProposer};
    use crate::relation::build_graph;

    fn l(s: &str) -> NodeLabel {
        NodeLabel::parse(s).unwrap()
    }

    fn line_maze() -> (Maze, RelationGraph) {
        let m = Maze::new(1, 3, Coord::new(0, 0), Coord::new(0, 2), []).unwrap();
        let g = build_graph(&m);
        (m, g)
    }

    #[test]
    fn update_rule_substitution() {
        let (_, g) = line_maze();
        let cfg = SamplerConfig::default();
        let mut q = QTable::new();
        let v = update_q(&cfg, &mut q, &g, l("B"), l("C"), 30.0, l("C"), true);
        assert!((v - 3.0).abs() < 1e-12);
        let mut q = QTable::new();
        let v = update_q(&cfg, &mut q, &g, l("A"), l("B"), -1.0, l("B"), false);
        assert!((v + 0.1).abs() < 1e-12);
    }

    #[test]
    fn terminal_updates_converge_to_goal_reward() {
        let (_, g) = line_maze();
        let cfg = SamplerConfig::default();
        let mut q = QTable::new();
        let mut v = 0.0;
        for _ in 0..500 {
            v = update_q(&cfg, &mut q, &g, l("B"), l("C"), 30.0, l("C"), true);
        }
        assert!((v - 30.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_tie_breaks_low_index() {
        let m = Maze::new(3, 3, Coord::new(1, 1), Coord::new(2, 2), []).unwrap();
        let g = build_graph(&m);
        let mut q = QTable::new();
        assert_eq!(q.argmax(&g, l("E")), Some(l("B")));
        q.set(l("E"), l("H"), 1.0);
        q.set(l("E"), l("F"), 1.0);
        assert_eq!(q.argmax(&g, l("E")), Some(l("F")));
        // illegal keys never win
        q.set(l("E"), l("A"), 99.0);
        assert_eq!(q.argmax(&g, l("E")), Some(l("F")));
    }

    #[test]
    fn buffer_is_fifo_bounded() {
        let mut b = ReplayBuffer::with_capacity(2);
        for i in 0..3 {
            b.push(ExperienceTuple {
                s: NodeLabel::from_index(i),
                a: NodeLabel::from_index(i + 1),
                r: -1.0,
                s_next: NodeLabel::from_index(i + 1),
                q: 0.0,
            });
        }
        assert_eq!(b.len(), 2);
        assert_eq!(b.iter().next().unwrap().s.index(), 1);
    }

    #[test]
    fn retrieval_ranking() {
        let m = Maze::new(1, 5, Coord::new(0, 0), Coord::new(0, 4), []).unwrap();
        let g = build_graph(&m);
        let t = |s: &str, q: f64| ExperienceTuple {
            s: l(s),
            a: l("B"),
            r: -1.0,
            s_next: l("B"),
            q,
        };
        let mut b = ReplayBuffer::default();
        assert!(retrieve_similar(&b, &g, l("A"), 3).is_empty());
        b.push(t("D", 0.0));
        b.push(t("A", 0.0));
        assert_eq!(retrieve_similar(&b, &g, l("A"), 1)[0].s, l("A"));
        b.push(t("B", -0.5));
        b.push(t("B", 2.0));
        let got = retrieve_similar(&b, &g, l("A"), 3);
        assert_eq!(got.iter().map(|e| e.q).collect::<Vec<_>>(), vec![0.0, 2.0, -0.5]);
        // recency breaks full ties
        b.push(t("A", 0.0));
        assert_eq!(retrieve_similar(&b, &g, l("A"), 10).len(), 5);
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = SamplerConfig {
            epsilon: 0.5,
            schedule: EpsilonSchedule::Linear { end: 0.1, episodes: 4 },
            ..SamplerConfig::default()
        };
        assert_eq!(cfg.epsilon_at(0), 0.5);
        assert!((cfg.epsilon_at(2) - 0.3).abs() < 1e-12);
        assert_eq!(cfg.epsilon_at(10), 0.1);
    }

    #[test]
    fn oracle_episode_is_shortest() {
        let m = Maze::new(
            5,
            5,
            Coord::new(0, 0),
            Coord::new(4, 4),
            [Coord::new(1, 1), Coord::new(1, 2), Coord::new(1, 3)],
        )
        .unwrap();
        let g = build_graph(&m);
        let mut agent = Agent::new(SamplerConfig {
            epsilon: 0.0,
            ..SamplerConfig::default()
        });
        let log = agent.run_episode(&m, &g, &OracleProposer, m.start(), "m");
        assert!(log.reached_goal);
        assert_eq!(Some(log.step_count), m.shortest_path_len());
        assert_eq!(agent.buffer.len(), log.step_count);
    }

    #[test]
    fn start_at_goal_is_immediate_success() {
        let m = Maze::new_degenerate(2, 2, Coord::new(1, 1), Coord::new(1, 1), []).unwrap();
        let g = build_graph(&m);
        let mut agent = Agent::new(SamplerConfig::default());
        let log = agent.run_episode(&m, &g, &OracleProposer, m.start(), "m");
        assert!(log.reached_goal);
        assert_eq!(log.step_count, 0);
    }

    #[test]
    fn rejected_moves_stay_put_and_are_recorded() {
        let (m, g) = line_maze();
        let mut agent = Agent::new(SamplerConfig {
            epsilon: 0.0,
            ..SamplerConfig::default()
        });
        // "Z" is out of range, "C" is not adjacent to A
        let p = ScriptedProposer::new(["Z", "C", "B", "C"]);
        let log = agent.run_episode(&m, &g, &p, m.start(), "m");
        assert_eq!(log.visited[..3], [Coord::new(0, 0); 3]);
        assert!(log.reached_goal);
        assert_eq!(log.step_count, 4);
        let first = agent.buffer.iter().next().unwrap();
        assert_eq!((first.s, first.s_next, first.r), (l("A"), l("A"), -1.0));
        assert!((agent.q.get(l("A"), l("Z")) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut q = QTable::new();
        q.set(l("A"), l("B"), -0.1);
        q.set(l("AA"), l("AB"), 1.0 / 3.0);
        let text = q.to_snapshot();
        assert_eq!(QTable::from_snapshot(&text).unwrap(), q);
        assert!(QTable::from_snapshot("A\tB").is_err());
        assert!(QTable::from_snapshot("A\tb\t1.0").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        for bad in [
            SamplerConfig { epsilon: 1.5, ..SamplerConfig::default() },
            SamplerConfig { alpha: 0.0, ..SamplerConfig::default() },
            SamplerConfig { gamma: 1.1, ..SamplerConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
