//! Coordinate-free view of a maze.
//!
//! Every cell gets a letter label from its row-major index using bijective
//! base-26 (`A..Z, AA, AB, ...`). Free 4-adjacent cells become undirected
//! relations between labels; obstacle cells keep their label but have no
//! relations. The rendered form never mentions coordinates.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::maze::{Coord, Maze};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("not a node label: {0:?}")]
    Malformed(String),
    #[error("label {label} (index {index}) is outside a grid of {cells} cells")]
    OutOfRange {
        label: NodeLabel,
        index: usize,
        cells: usize,
    },
    #[error("coordinate {0} is outside the grid")]
    OutOfBounds(Coord),
}

/// Letter name of a cell. Ordered by the decoded index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeLabel(usize);

impl NodeLabel {
    pub const fn from_index(index: usize) -> Self {
        NodeLabel(index)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    /// Decodes an uppercase bijective base-26 string.
    pub fn parse(text: &str) -> Result<Self, LabelError> {
        if text.is_empty() || !text.bytes().all(|b| b.is_ascii_uppercase()) {
            return Err(LabelError::Malformed(text.to_string()));
        }
        let mut n: usize = 0;
        for b in text.bytes() {
            n = n
                .checked_mul(26)
                .and_then(|n| n.checked_add((b - b'A' + 1) as usize))
                .ok_or_else(|| LabelError::Malformed(text.to_string()))?;
        }
        Ok(NodeLabel(n - 1))
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut n = self.0 + 1;
        let mut buf = Vec::with_capacity(4);
        while n > 0 {
            n -= 1;
            buf.push(b'A' + (n % 26) as u8);
            n /= 26;
        }
        buf.reverse();
        f.write_str(std::str::from_utf8(&buf).expect("ascii"))
    }
}

impl FromStr for NodeLabel {
    type Err = LabelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeLabel::parse(s)
    }
}

impl Serialize for NodeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NodeLabel::parse(&s).map_err(serde::de::Error::custom)
    }
}

pub fn label_of(maze: &Maze, c: Coord) -> Result<NodeLabel, LabelError> {
    if !maze.in_bounds(c) {
        return Err(LabelError::OutOfBounds(c));
    }
    Ok(NodeLabel(maze.index_of(c)))
}

pub fn coord_of(maze: &Maze, label: NodeLabel) -> Result<Coord, LabelError> {
    maze.coord_at(label.index()).ok_or(LabelError::OutOfRange {
        label,
        index: label.index(),
        cells: maze.cell_count(),
    })
}

/// Lettered relation network of a maze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationGraph {
    height: usize,
    width: usize,
    free: Vec<bool>,
    adjacency: Vec<Vec<NodeLabel>>,
    start: NodeLabel,
    goal: NodeLabel,
}

impl RelationGraph {
    pub fn build(maze: &Maze) -> Self {
        let n = maze.cell_count();
        let mut free = vec![false; n];
        let mut adjacency = vec![Vec::new(); n];
        for c in maze.free_cells() {
            let i = maze.index_of(c);
            free[i] = true;
            let mut ns: Vec<NodeLabel> = c
                .grid_neighbors(maze.height(), maze.width())
                .filter(|&nb| !maze.is_obstacle(nb))
                .map(|nb| NodeLabel(maze.index_of(nb)))
                .collect();
            ns.sort();
            adjacency[i] = ns;
        }
        RelationGraph {
            height: maze.height(),
            width: maze.width(),
            free,
            adjacency,
            start: NodeLabel(maze.index_of(maze.start())),
            goal: NodeLabel(maze.index_of(maze.goal())),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn start(&self) -> NodeLabel {
        self.start
    }

    pub fn goal(&self) -> NodeLabel {
        self.goal
    }

    pub fn cell_count(&self) -> usize {
        self.free.len()
    }

    pub fn contains(&self, l: NodeLabel) -> bool {
        l.index() < self.cell_count()
    }

    pub fn is_free(&self, l: NodeLabel) -> bool {
        self.free.get(l.index()).copied().unwrap_or(false)
    }

    /// Labels of free cells, row-major.
    pub fn nodes(&self) -> impl Iterator<Item = NodeLabel> + '_ {
        self.free
            .iter()
            .enumerate()
            .filter(|(_, f)| **f)
            .map(|(i, _)| NodeLabel(i))
    }

    /// Neighbours of `l`, sorted by index. Empty for obstacles and unknown labels.
    pub fn neighbors(&self, l: NodeLabel) -> &[NodeLabel] {
        self.adjacency.get(l.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn are_adjacent(&self, a: NodeLabel, b: NodeLabel) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Undirected edges as `(lower, higher)` pairs in ascending order.
    pub fn edges(&self) -> Vec<(NodeLabel, NodeLabel)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| {
                ns.iter()
                    .filter(move |n| n.index() > i)
                    .map(move |&n| (NodeLabel(i), n))
            })
            .collect()
    }

    pub fn coord_of(&self, l: NodeLabel) -> Option<Coord> {
        self.contains(l)
            .then(|| Coord::new(l.index() / self.width, l.index() % self.width))
    }

    pub fn label_of(&self, c: Coord) -> Option<NodeLabel> {
        (c.row < self.height && c.col < self.width).then(|| NodeLabel(c.row * self.width + c.col))
    }

    /// Hop distances from `source` to every cell; `None` when unreachable.
    pub fn distances_from(&self, source: NodeLabel) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cell_count()];
        if !self.is_free(source) {
            return dist;
        }
        dist[source.index()] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()].unwrap_or(0);
            for &v in self.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn distance(&self, from: NodeLabel, to: NodeLabel) -> Option<usize> {
        if !self.contains(to) {
            return None;
        }
        self.distances_from(from)[to.index()]
    }

    /// One line per free node, `LABEL: N1 N2 ...`, then `start=X goal=Y`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for node in self.nodes() {
            out.push_str(&node.to_string());
            out.push(':');
            for n in self.neighbors(node) {
                out.push(' ');
                out.push_str(&n.to_string());
            }
            out.push('\n');
        }
        out.push_str(&format!("start={} goal={}", self.start, self.goal));
        out
    }
}

pub fn build_graph(maze: &Maze) -> RelationGraph {
    RelationGraph::build(maze)
}

pub fn render_relations(graph: &RelationGraph) -> String {
    graph.render()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> NodeLabel {
        NodeLabel::parse(s).unwrap()
    }

    #[test]
    fn anchor_labels_on_width_five() {
        let m = Maze::new(5, 5, Coord::new(0, 0), Coord::new(4, 4), []).unwrap();
        assert_eq!(label_of(&m, Coord::new(0, 0)).unwrap().to_string(), "A");
        assert_eq!(label_of(&m, Coord::new(1, 0)).unwrap().to_string(), "F");
        assert_eq!(coord_of(&m, l("F")).unwrap(), Coord::new(1, 0));
        assert_eq!(coord_of(&m, l("A")).unwrap(), Coord::new(0, 0));
        assert!(matches!(coord_of(&m, l("Z")), Err(LabelError::OutOfRange { index: 25, .. })));
        assert!(label_of(&m, Coord::new(5, 0)).is_err());
    }

    #[test]
    fn base26_boundaries() {
        assert_eq!(NodeLabel::from_index(25).to_string(), "Z");
        assert_eq!(NodeLabel::from_index(26).to_string(), "AA");
        assert_eq!(NodeLabel::from_index(27).to_string(), "AB");
        assert_eq!(NodeLabel::from_index(701).to_string(), "ZZ");
        assert_eq!(NodeLabel::from_index(702).to_string(), "AAA");
        assert_eq!(l("AA").index(), 26);
        assert!(NodeLabel::parse("").is_err());
        assert!(NodeLabel::parse("a").is_err());
        assert!(NodeLabel::parse("A1").is_err());
    }

    #[test]
    fn small_graphs() {
        let m = Maze::new(1, 2, Coord::new(0, 0), Coord::new(0, 1), []).unwrap();
        let g = build_graph(&m);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(render_relations(&g), "A: B\nB: A\nstart=A goal=B");

        let m = Maze::new(2, 2, Coord::new(0, 0), Coord::new(1, 1), [Coord::new(0, 1)]).unwrap();
        let g = build_graph(&m);
        assert_eq!(g.edges(), vec![(l("A"), l("C")), (l("C"), l("D"))]);
        assert!(g.neighbors(l("B")).is_empty());
    }

    #[test]
    fn render_is_order_independent() {
        let a = Maze::new(3, 3, Coord::new(0, 0), Coord::new(2, 2), [Coord::new(1, 1), Coord::new(0, 2)])
            .unwrap();
        let b = Maze::new(3, 3, Coord::new(0, 0), Coord::new(2, 2), [Coord::new(0, 2), Coord::new(1, 1)])
            .unwrap();
        assert_eq!(build_graph(&a).render(), build_graph(&b).render());
        assert_eq!(build_graph(&a).render(), build_graph(&a).render());
    }

    #[test]
    fn serde_as_string() {
        let s = serde_json::to_string(&NodeLabel::from_index(26)).unwrap();
        assert_eq!(s, "\"AA\"");
        let back: NodeLabel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.index(), 26);
    }
}
