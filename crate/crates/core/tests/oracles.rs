//! Fixed examples checked against hand-rolled oracles.

mod support;

use std::collections::BTreeMap;

use relmaze::bench::optimality_rate;
use relmaze::engine::{update_q, QTable, SamplerConfig};
use relmaze::maze::{Coord, EpisodeLog, Maze};
use relmaze::relation::{NodeLabel, RelationGraph};

use support::{grid_bfs, occupancy};

fn c(r: usize, col: usize) -> Coord {
    Coord::new(r, col)
}

fn l(s: &str) -> NodeLabel {
    NodeLabel::parse(s).unwrap()
}

#[test]
fn wall_across_the_middle_costs_a_detour() {
    let maze = Maze::new(5, 5, c(0, 0), c(4, 4), [c(1, 1), c(1, 2), c(1, 3)]).unwrap();
    let brute = grid_bfs(&occupancy(&maze), (0, 0), (4, 4));
    assert_eq!(brute, Some(8));
    assert_eq!(maze.shortest_path_len(), brute);
}

#[test]
fn empty_three_by_three_has_twelve_edges() {
    let maze = Maze::new(3, 3, c(0, 0), c(2, 2), []).unwrap();
    // each row has 2 horizontal links, each column 2 vertical ones
    let expected = 3 * 2 + 3 * 2;
    assert_eq!(RelationGraph::build(&maze).edges().len(), expected);
}

#[test]
fn two_by_two_with_one_obstacle() {
    let maze = Maze::new(2, 2, c(0, 0), c(1, 1), [c(0, 1)]).unwrap();
    let g = RelationGraph::build(&maze);
    assert_eq!(g.edges(), vec![(l("A"), l("C")), (l("C"), l("D"))]);
    assert_eq!(g.render(), "A: C\nC: A D\nD: C\nstart=A goal=D");
}

#[test]
fn optimality_counts_only_successes() {
    let oracle = BTreeMap::from([("m".to_string(), 8usize)]);
    let logs: Vec<EpisodeLog> = [8, 8, 10]
        .into_iter()
        .map(|n| {
            let mut log = EpisodeLog::new("m", c(0, 0));
            log.step_count = n;
            log.reached_goal = true;
            log
        })
        .collect();
    let expected = 2.0 / 3.0;
    assert_eq!(optimality_rate(&logs, &oracle).unwrap(), expected);
}

#[test]
fn update_rule_by_hand() {
    let maze = Maze::new(1, 3, c(0, 0), c(0, 2), []).unwrap();
    let g = RelationGraph::build(&maze);
    let cfg = SamplerConfig::default();
    let mut q = QTable::new();
    // entering the goal from B: 0 + 0.1 * (30 - 0)
    let v = update_q(&cfg, &mut q, &g, l("B"), l("C"), 30.0, l("C"), true);
    assert_eq!(v, 0.1 * 30.0);
    // A -> B: 0 + 0.1 * (-1 + 0.9 * 3 - 0)
    let v = update_q(&cfg, &mut q, &g, l("A"), l("B"), -1.0, l("B"), false);
    assert!((v - 0.1 * (-1.0 + 0.9 * 3.0)).abs() < 1e-12);
}
