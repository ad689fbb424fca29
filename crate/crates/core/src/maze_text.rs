//! Maze serialization.
//!
//! Two formats are supported:
//!
//! * a strict JSON document
//!   `{"size":[H,W],"start":[r,c],"goal":[r,c],"obstacles":[[r,c],...]}`
//!   with unknown keys rejected;
//! * an ASCII grid of `.` (free), `#` (obstacle), `S` (start) and `G` (goal),
//!   one row per line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maze::{Coord, Maze, MazeError};

#[derive(Debug, Error)]
pub enum MazeTextError {
    #[error("parse error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("validation error in `{field}`: {message}")]
    Validation { field: &'static str, message: String },
    #[error("grid error on line {line}: {message}")]
    Grid { line: usize, message: String },
}

/// Wire form of a maze. Coordinates are `[row, col]`, size is `[height, width]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeDoc {
    pub size: [usize; 2],
    pub start: [usize; 2],
    pub goal: [usize; 2],
    pub obstacles: Vec<[usize; 2]>,
}

impl MazeDoc {
    pub fn from_maze(maze: &Maze) -> Self {
        MazeDoc {
            size: [maze.height(), maze.width()],
            start: maze.start().into(),
            goal: maze.goal().into(),
            obstacles: maze.obstacles().iter().map(|&c| c.into()).collect(),
        }
    }

    pub fn to_maze(&self) -> Result<Maze, MazeTextError> {
        let [height, width] = self.size;
        Maze::new(
            height,
            width,
            self.start.into(),
            self.goal.into(),
            self.obstacles.iter().map(|&c| Coord::from(c)),
        )
        .map_err(validation)
    }
}

fn validation(e: MazeError) -> MazeTextError {
    let field = match &e {
        MazeError::EmptyGrid { .. } => "size",
        MazeError::OutOfBounds { field, .. } | MazeError::OnObstacle { field, .. } => match *field {
            "start" => "start",
            "goal" => "goal",
            _ => "obstacles",
        },
        MazeError::StartIsGoal(_) => "goal",
        MazeError::InvalidPosition(_) => "obstacles",
    };
    MazeTextError::Validation {
        field,
        message: e.to_string(),
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    line_start + column.saturating_sub(1)
}

/// Parses and validates a JSON maze document.
pub fn parse_maze_doc(text: &str) -> Result<Maze, MazeTextError> {
    let doc: MazeDoc = serde_json::from_str(text).map_err(|e| MazeTextError::Syntax {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    doc.to_maze()
}

/// Canonical JSON form: keys in schema order, obstacles sorted row-major.
pub fn emit_maze_doc(maze: &Maze) -> String {
    serde_json::to_string(&MazeDoc::from_maze(maze)).expect("maze doc serializes")
}

pub fn parse_ascii_grid(text: &str) -> Result<Maze, MazeTextError> {
    let rows: Vec<&str> = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .collect();
    if rows.is_empty() {
        return Err(MazeTextError::Grid {
            line: 1,
            message: "empty grid".into(),
        });
    }
    let width = rows[0].chars().count();
    let mut start = None;
    let mut goal = None;
    let mut obstacles = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let line = r + 1;
        if row.chars().count() != width {
            return Err(MazeTextError::Grid {
                line,
                message: format!("ragged row: expected {width} cells, found {}", row.chars().count()),
            });
        }
        for (c, ch) in row.chars().enumerate() {
            let here = Coord::new(r, c);
            match ch {
                '.' => {}
                '#' => obstacles.push(here),
                'S' => {
                    if start.replace(here).is_some() {
                        return Err(MazeTextError::Grid {
                            line,
                            message: "more than one 'S'".into(),
                        });
                    }
                }
                'G' => {
                    if goal.replace(here).is_some() {
                        return Err(MazeTextError::Grid {
                            line,
                            message: "more than one 'G'".into(),
                        });
                    }
                }
                other => {
                    return Err(MazeTextError::Grid {
                        line,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
    }
    let missing = |what: &str| MazeTextError::Grid {
        line: rows.len(),
        message: format!("missing '{what}'"),
    };
    let start = start.ok_or_else(|| missing("S"))?;
    let goal = goal.ok_or_else(|| missing("G"))?;
    Maze::new(rows.len(), width, start, goal, obstacles).map_err(validation)
}

pub fn emit_ascii_grid(maze: &Maze) -> String {
    let mut out = String::with_capacity((maze.width() + 1) * maze.height());
    for r in 0..maze.height() {
        for c in 0..maze.width() {
            let here = Coord::new(r, c);
            out.push(if here == maze.start() {
                'S'
            } else if here == maze.goal() {
                'G'
            } else if maze.is_obstacle(here) {
                '#'
            } else {
                '.'
            });
        }
        out.push('\n');
    }
    out
}

/// Accepts either format: text whose first non-blank character is `{` is
/// parsed as JSON, anything else as an ASCII grid.
pub fn parse_any(text: &str) -> Result<Maze, MazeTextError> {
    if text.trim_start().starts_with('{') {
        parse_maze_doc(text)
    } else {
        parse_ascii_grid(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_doc() {
        let m = parse_maze_doc(r#"{"size":[5,5],"start":[0,0],"goal":[4,4],"obstacles":[[1,1]]}"#)
            .unwrap();
        assert_eq!((m.height(), m.width()), (5, 5));
        assert!(m.is_obstacle(Coord::new(1, 1)));
    }

    #[test]
    fn start_on_obstacle_is_validation_error() {
        let err = parse_maze_doc(r#"{"size":[5,5],"start":[1,1],"goal":[4,4],"obstacles":[[1,1]]}"#)
            .unwrap_err();
        match err {
            MazeTextError::Validation { field, message } => {
                assert_eq!(field, "start");
                assert!(message.contains("start on obstacle"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_is_parse_error() {
        let text = r#"{"size":"5","start":[0,0],"goal":[4,4],"obstacles":[]}"#;
        match parse_maze_doc(text).unwrap_err() {
            MazeTextError::Syntax { offset, .. } => assert!(offset > 0 && offset <= text.len()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"size":[2,2],"start":[0,0],"goal":[1,1],"obstacles":[],"walls":[]}"#;
        assert!(matches!(parse_maze_doc(text), Err(MazeTextError::Syntax { .. })));
    }

    #[test]
    fn out_of_bounds_obstacle_names_field() {
        let text = r#"{"size":[2,2],"start":[0,0],"goal":[1,1],"obstacles":[[0,5]]}"#;
        assert!(matches!(
            parse_maze_doc(text),
            Err(MazeTextError::Validation { field: "obstacles", .. })
        ));
    }

    #[test]
    fn ascii_grid() {
        let m = parse_ascii_grid("S.#\n...\n#.G").unwrap();
        assert_eq!((m.height(), m.width()), (3, 3));
        let obs: Vec<_> = m.obstacles().iter().copied().collect();
        assert_eq!(obs, vec![Coord::new(0, 2), Coord::new(2, 0)]);
        assert_eq!(m.goal(), Coord::new(2, 2));
    }

    #[test]
    fn ascii_grid_errors() {
        assert!(parse_ascii_grid("S.S\n..G").is_err());
        assert!(parse_ascii_grid("S..\n.G").is_err());
        assert!(parse_ascii_grid("...\n..G").is_err());
        assert!(parse_ascii_grid("S.x\n..G").is_err());
    }

    #[test]
    fn adjacent_start_goal() {
        let m = parse_ascii_grid("SG").unwrap();
        assert_eq!(m.shortest_path_len(), Some(1));
    }

    #[test]
    fn emit_is_canonical() {
        let m = Maze::new(
            3,
            3,
            Coord::new(0, 0),
            Coord::new(2, 2),
            [Coord::new(2, 0), Coord::new(0, 2), Coord::new(1, 1)],
        )
        .unwrap();
        assert_eq!(
            emit_maze_doc(&m),
            r#"{"size":[3,3],"start":[0,0],"goal":[2,2],"obstacles":[[0,2],[1,1],[2,0]]}"#
        );
        let empty = Maze::new(1, 2, Coord::new(0, 0), Coord::new(0, 1), []).unwrap();
        assert!(emit_maze_doc(&empty).ends_with(r#""obstacles":[]}"#));
    }

    #[test]
    fn ascii_round_trip() {
        let text = "S.#\n...\n#.G\n";
        assert_eq!(emit_ascii_grid(&parse_ascii_grid(text).unwrap()), text);
        assert!(parse_any("  {\"size\":[1,2],\"start\":[0,0],\"goal\":[0,1],\"obstacles\":[]}").is_ok());
    }
}
