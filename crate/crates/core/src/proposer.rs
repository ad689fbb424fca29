//! Action proposers for the exploratory branch of the sampler.
//!
//! A proposer sees the relation graph, the current node, the Q-values of the
//! available moves and a few retrieved experiences, and names the next node.
//! Legality is not its concern: illegal answers become rejected steps.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ExperienceTuple;
use crate::gateway::{ChatBackend, GatewayError};
use crate::maze::Coord;
use crate::relation::{NodeLabel, RelationGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProposeError {
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("unparseable reply: {0:?}")]
    Unparseable(String),
    #[error("no move available from {0}")]
    NoMove(NodeLabel),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone)]
pub struct ProposalContext<'a> {
    pub graph: &'a RelationGraph,
    pub current: NodeLabel,
    pub goal: NodeLabel,
    /// Q-values of the moves available at `current`.
    pub q_row: BTreeMap<NodeLabel, f64>,
    pub exemplars: Vec<ExperienceTuple>,
    pub step_budget_left: usize,
}

impl<'a> ProposalContext<'a> {
    /// Context with no Q-values or experience, as seen by a prompt-only agent.
    pub fn bare(graph: &'a RelationGraph, current: NodeLabel, step_budget_left: usize) -> Self {
        ProposalContext {
            graph,
            current,
            goal: graph.goal(),
            q_row: BTreeMap::new(),
            exemplars: Vec::new(),
            step_budget_left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub action: NodeLabel,
    pub rationale: String,
}

impl Proposal {
    fn bare(action: NodeLabel) -> Self {
        Proposal {
            action,
            rationale: String::new(),
        }
    }
}

/// Prompt and reply of one proposer call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub prompt: String,
    pub reply: Option<String>,
    pub error: Option<String>,
}

pub trait Proposer: Send + Sync {
    fn name(&self) -> &str;

    fn propose(&self, ctx: &ProposalContext<'_>) -> Result<Proposal, ProposeError>;

    /// Whether the context should carry retrieved exemplars.
    fn uses_exemplars(&self) -> bool {
        false
    }

    fn transcripts(&self) -> Vec<Transcript> {
        Vec::new()
    }
}

/// First hop of a shortest path to the goal, lowest label on ties.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleProposer;

impl Proposer for OracleProposer {
    fn name(&self) -> &str {
        "oracle"
    }

    fn propose(&self, ctx: &ProposalContext<'_>) -> Result<Proposal, ProposeError> {
        let dist = ctx.graph.distances_from(ctx.goal);
        ctx.graph
            .neighbors(ctx.current)
            .iter()
            .filter_map(|&n| dist[n.index()].map(|d| (d, n)))
            .min()
            .map(|(_, n)| Proposal::bare(n))
            .ok_or(ProposeError::NoMove(ctx.current))
    }
}

/// Moves to the grid neighbour closest to the goal in Manhattan distance,
/// obstacles included, lowest label on ties. Reproduces the "walk straight at
/// the goal" failure: it keeps pushing into walls that block the direct line.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyBlindProposer;

impl Proposer for GreedyBlindProposer {
    fn name(&self) -> &str {
        "greedy-blind"
    }

    fn propose(&self, ctx: &ProposalContext<'_>) -> Result<Proposal, ProposeError> {
        let g = ctx.graph;
        let (Some(here), Some(goal)) = (g.coord_of(ctx.current), g.coord_of(ctx.goal)) else {
            return Err(ProposeError::NoMove(ctx.current));
        };
        here.grid_neighbors(g.height(), g.width())
            .filter_map(|c| g.label_of(c).map(|l| (c.manhattan(goal), l)))
            .min()
            .map(|(_, l)| Proposal::bare(l))
            .ok_or(ProposeError::NoMove(ctx.current))
    }
}

/// Replays canned replies in order, each parsed with [`parse_reply`].
#[derive(Debug)]
pub struct ScriptedProposer {
    script: Mutex<VecDeque<String>>,
}

impl ScriptedProposer {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedProposer {
            script: Mutex::new(replies.into_iter().map(Into::into).collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl Proposer for ScriptedProposer {
    fn name(&self) -> &str {
        "scripted"
    }

    fn propose(&self, ctx: &ProposalContext<'_>) -> Result<Proposal, ProposeError> {
        let next = self
            .script
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .pop_front()
            .ok_or(ProposeError::ScriptExhausted)?;
        parse_reply(&next, ctx)
    }
}

/// Uniform choice among legal neighbours.
#[derive(Debug)]
pub struct UniformRandomProposer {
    rng: Mutex<ChaCha8Rng>,
}

impl UniformRandomProposer {
    pub fn new(seed: u64) -> Self {
        UniformRandomProposer {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl Proposer for UniformRandomProposer {
    fn name(&self) -> &str {
        "uniform-random"
    }

    fn propose(&self, ctx: &ProposalContext<'_>) -> Result<Proposal, ProposeError> {
        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        ctx.graph
            .neighbors(ctx.current)
            .choose(&mut *rng)
            .map(|&n| Proposal::bare(n))
            .ok_or(ProposeError::NoMove(ctx.current))
    }
}

/// How a remote proposer describes the maze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStyle {
    /// Lettered relation network, Q-values and exemplars.
    Relational,
    /// Raw grid coordinates; replies are `(row,col)`.
    Coordinate,
}

pub const SYSTEM_PROMPT: &str = "You are a path-planning agent. Reply with the next move only.";

/// Asks a chat backend for each move and records every exchange.
pub struct LlmProposer {
    backend: Arc<dyn ChatBackend>,
    style: PromptStyle,
    transcripts: Mutex<Vec<Transcript>>,
}

impl LlmProposer {
    pub fn new(backend: Arc<dyn ChatBackend>, style: PromptStyle) -> Self {
        LlmProposer {
            backend,
            style,
            transcripts: Mutex::new(Vec::new()),
        }
    }
}

impl Proposer for LlmProposer {
    fn name(&self) -> &str {
        "llm"
    }

    fn uses_exemplars(&self) -> bool {
        self.style == PromptStyle::Relational
    }

    fn propose(&self, ctx: &ProposalContext<'_>) -> Result<Proposal, ProposeError> {
        let prompt = match self.style {
            PromptStyle::Relational => build_prompt(ctx),
            PromptStyle::Coordinate => build_coordinate_prompt(ctx),
        };
        let reply = self.backend.complete(SYSTEM_PROMPT, &prompt);
        let mut log = self.transcripts.lock().unwrap_or_else(|e| e.into_inner());
        match reply {
            Ok(text) => {
                log.push(Transcript {
                    prompt,
                    reply: Some(text.clone()),
                    error: None,
                });
                match self.style {
                    PromptStyle::Relational => parse_reply(&text, ctx),
                    PromptStyle::Coordinate => parse_coordinate_reply(&text, ctx),
                }
            }
            Err(e) => {
                log.push(Transcript {
                    prompt,
                    reply: None,
                    error: Some(e.to_string()),
                });
                Err(e.into())
            }
        }
    }

    fn transcripts(&self) -> Vec<Transcript> {
        self.transcripts.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Rounds to three decimals and prints the shortest exact form (`-1.0`, `2.5`).
pub(crate) fn fmt_value(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    format!("{:?}", if r == 0.0 { 0.0 } else { r })
}

/// Few-shot move prompt over the relation network. Contains labels only.
pub fn build_prompt(ctx: &ProposalContext<'_>) -> String {
    let mut p = String::new();
    p.push_str(
        "The maze is a network of nodes. Each line lists a node followed by the nodes it connects to directly.\n",
    );
    p.push_str(&ctx.graph.render());
    p.push('\n');
    let _ = writeln!(p, "Current node: {}", ctx.current);
    let _ = writeln!(p, "Goal node: {}", ctx.goal);
    if !ctx.q_row.is_empty() {
        let pairs: Vec<String> = ctx
            .q_row
            .iter()
            .map(|(a, q)| format!("{a}:{}", fmt_value(*q)))
            .collect();
        let _ = writeln!(p, "Q-values of available moves (action:Q): {}", pairs.join(" "));
    }
    let _ = writeln!(p, "Steps remaining: {}", ctx.step_budget_left);
    if !ctx.exemplars.is_empty() {
        p.push_str("Similar past experience as (s,a,r,s',q):\n");
        for e in &ctx.exemplars {
            let _ = writeln!(
                p,
                "({},{},{},{},{})",
                e.s,
                e.a,
                fmt_value(e.r),
                e.s_next,
                fmt_value(e.q)
            );
        }
    }
    let _ = write!(
        p,
        "Answer with exactly one node label directly connected to {}.",
        ctx.current
    );
    p
}

/// Coordinate-only move prompt, used by the plain prompting baseline.
pub fn build_coordinate_prompt(ctx: &ProposalContext<'_>) -> String {
    let g = ctx.graph;
    let mut p = String::new();
    let _ = writeln!(
        p,
        "The maze is a grid with {} rows and {} columns. Positions are (row,col), starting at (0,0).",
        g.height(),
        g.width()
    );
    let blocked: Vec<String> = (0..g.cell_count())
        .map(NodeLabel::from_index)
        .filter(|&l| !g.is_free(l))
        .filter_map(|l| g.coord_of(l))
        .map(|c| c.to_string())
        .collect();
    if blocked.is_empty() {
        p.push_str("There are no blocked cells.\n");
    } else {
        let _ = writeln!(p, "Blocked cells: {}", blocked.join(" "));
    }
    let here = g.coord_of(ctx.current).unwrap_or(Coord::new(0, 0));
    let goal = g.coord_of(ctx.goal).unwrap_or(Coord::new(0, 0));
    let _ = writeln!(p, "You are at {here}. The goal is at {goal}.");
    let _ = writeln!(p, "Steps remaining: {}", ctx.step_budget_left);
    p.push_str("You may move up, down, left or right by one cell. Answer with exactly one position as (row,col).");
    p
}

fn label_tokens(reply: &str) -> impl Iterator<Item = NodeLabel> + '_ {
    reply
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter_map(|t| NodeLabel::parse(t).ok())
}

/// Picks the first token that names a neighbour of the current node; failing
/// that, the first well-formed label anywhere in the reply.
pub fn parse_reply(reply: &str, ctx: &ProposalContext<'_>) -> Result<Proposal, ProposeError> {
    let neighbors = ctx.graph.neighbors(ctx.current);
    let chosen = label_tokens(reply)
        .find(|l| neighbors.contains(l))
        .or_else(|| label_tokens(reply).next());
    match chosen {
        Some(action) => Ok(Proposal {
            action,
            rationale: reply.trim().to_string(),
        }),
        None => Err(ProposeError::Unparseable(reply.to_string())),
    }
}

/// Picks the first `(row,col)` pair in the reply that lies inside the grid.
pub fn parse_coordinate_reply(
    reply: &str,
    ctx: &ProposalContext<'_>,
) -> Result<Proposal, ProposeError> {
    let mut rest = reply;
    while let Some(open) = rest.find('(') {
        let tail = &rest[open + 1..];
        if let Some(close) = tail.find(')') {
            let inner: Vec<&str> = tail[..close].split(',').map(str::trim).collect();
            if let [r, c] = inner.as_slice() {
                if let (Ok(r), Ok(c)) = (r.parse::<usize>(), c.parse::<usize>()) {
                    if let Some(action) = ctx.graph.label_of(Coord::new(r, c)) {
                        return Ok(Proposal {
                            action,
                            rationale: reply.trim().to_string(),
                        });
                    }
                }
            }
        }
        rest = tail;
    }
    Err(ProposeError::Unparseable(reply.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::Maze;
    use crate::relation::build_graph;

    fn l(s: &str) -> NodeLabel {
        NodeLabel::parse(s).unwrap()
    }

    fn five() -> RelationGraph {
        build_graph(&Maze::new(5, 5, Coord::new(0, 0), Coord::new(4, 4), [Coord::new(1, 1)]).unwrap())
    }

    #[test]
    fn reply_parsing() {
        let g = five();
        // A=(0,0): neighbours B and F
        let ctx = ProposalContext::bare(&g, l("A"), 10);
        assert_eq!(parse_reply("I will move to node F because it is open", &ctx).unwrap().action, l("F"));
        assert!(matches!(parse_reply("go to (1,0)", &ctx), Err(ProposeError::Unparseable(_))));
        assert_eq!(parse_reply("Q", &ctx).unwrap().action, l("Q"));
        assert_eq!(parse_reply("Answer: B.", &ctx).unwrap().action, l("B"));
    }

    #[test]
    fn coordinate_reply_parsing() {
        let g = five();
        let ctx = ProposalContext::bare(&g, l("A"), 10);
        assert_eq!(parse_coordinate_reply("move to (1, 0)", &ctx).unwrap().action, l("F"));
        assert_eq!(parse_coordinate_reply("(9,9) then (0,1)", &ctx).unwrap().action, l("B"));
        assert!(parse_coordinate_reply("left", &ctx).is_err());
    }

    #[test]
    fn scripted_replay_then_exhaustion() {
        let g = five();
        let ctx = ProposalContext::bare(&g, l("A"), 10);
        let p = ScriptedProposer::new(["B", "C"]);
        assert_eq!(p.propose(&ctx).unwrap().action, l("B"));
        assert_eq!(p.propose(&ctx).unwrap().action, l("C"));
        assert_eq!(p.propose(&ctx), Err(ProposeError::ScriptExhausted));
    }

    #[test]
    fn greedy_blind_walks_into_walls() {
        // S at (0,0), wall on row 1 except (1,4); goal (2,0)
        let m = Maze::new(
            3,
            5,
            Coord::new(0, 0),
            Coord::new(2, 0),
            [Coord::new(1, 0), Coord::new(1, 1), Coord::new(1, 2), Coord::new(1, 3)],
        )
        .unwrap();
        let g = build_graph(&m);
        let ctx = ProposalContext::bare(&g, g.start(), 10);
        let p = GreedyBlindProposer.propose(&ctx).unwrap();
        assert_eq!(g.coord_of(p.action), Some(Coord::new(1, 0)));
        assert!(!g.is_free(p.action));
    }

    #[test]
    fn oracle_picks_shortest_first_hop() {
        let m = Maze::new(2, 3, Coord::new(0, 0), Coord::new(0, 2), [Coord::new(0, 1)]).unwrap();
        let g = build_graph(&m);
        let ctx = ProposalContext::bare(&g, g.start(), 10);
        assert_eq!(OracleProposer.propose(&ctx).unwrap().action, l("D"));
    }

    #[test]
    fn prompt_layout() {
        let m = Maze::new(1, 2, Coord::new(0, 0), Coord::new(0, 1), []).unwrap();
        let g = build_graph(&m);
        let ctx = ProposalContext::bare(&g, l("A"), 8);
        let p = build_prompt(&ctx);
        assert!(p.contains("A: B\nB: A\nstart=A goal=B\n"));
        assert!(!p.contains("experience"));
        assert!(!p.contains("Q-values"));
        assert!(p.ends_with("Answer with exactly one node label directly connected to A."));
        assert_eq!(p, build_prompt(&ctx));
    }

    #[test]
    fn prompt_lists_q_pairs_in_label_order() {
        let g = five();
        let mut ctx = ProposalContext::bare(&g, l("A"), 8);
        ctx.q_row = [(l("F"), 2.5), (l("B"), -1.0)].into_iter().collect();
        ctx.exemplars = vec![ExperienceTuple {
            s: l("A"),
            a: l("B"),
            r: -1.0,
            s_next: l("B"),
            q: -0.1,
        }];
        let p = build_prompt(&ctx);
        assert!(p.contains("Q-values of available moves (action:Q): B:-1.0 F:2.5\n"), "{p}");
        assert!(p.contains("(A,B,-1.0,B,-0.1)\n"));
    }

    #[test]
    fn coordinate_prompt_mentions_blocked_cells() {
        let g = five();
        let ctx = ProposalContext::bare(&g, l("A"), 8);
        let p = build_coordinate_prompt(&ctx);
        assert!(p.contains("Blocked cells: (1,1)"));
        assert!(p.contains("You are at (0,0). The goal is at (4,4)."));
    }

    #[test]
    fn value_formatting() {
        assert_eq!(fmt_value(-1.0), "-1.0");
        assert_eq!(fmt_value(0.30000000000000004), "0.3");
        assert_eq!(fmt_value(-0.0001), "0.0");
        assert_eq!(fmt_value(1.23456), "1.235");
    }
}
