//! C ABI over `relmaze`.
//!
//! Mazes and training runs are opaque handles from [`rm_maze_from_text`] and
//! [`rm_run_s2rcql`], released with the matching `rm_*_free`. Every fallible call returns an
//! [`RmStatus`]; the message for the last failure on the calling thread is
//! available from [`rm_last_error`]. Strings returned to the caller are owned
//! by the caller and must be released with [`rm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use relmaze::bench::{run_maze, CampaignConfig, MazeRun, ProposerKind};
use relmaze::curriculum::{CurriculumMode, EpisodeBudget};
use relmaze::engine::SamplerConfig;
use relmaze::maze::Maze;
use relmaze::maze_text::{emit_maze_doc, parse_any};
use relmaze::relation::RelationGraph;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmStatus {
    RmOk = 0,
    RmNullArgument = 1,
    RmInvalidUtf8 = 2,
    RmParseError = 3,
    RmInvalidArgument = 4,
    RmRunError = 5,
    RmPanic = 6,
}

/// Proposers available through the C interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmProposer {
    RmProposerOracle = 0,
    RmProposerGreedyBlind = 1,
    RmProposerUniformRandom = 2,
}

/// Opaque maze handle.
pub struct RmMaze {
    maze: Maze,
}

/// Opaque training result handle.
pub struct RmRun {
    run: MazeRun,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (RmStatus, String)>) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RmStatus::RmOk
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RmStatus::RmPanic
        }
    }
}

fn null(what: &str) -> (RmStatus, String) {
    (RmStatus::RmNullArgument, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (RmStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), (RmStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message describing the last failed call on this thread. Empty after a
/// successful call. Owned by the library; valid until the next call.
#[no_mangle]
pub extern "C" fn rm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn rm_status_str(status: RmStatus) -> *const c_char {
    let s: &'static CStr = match status {
        RmStatus::RmOk => c"ok",
        RmStatus::RmNullArgument => c"null argument",
        RmStatus::RmInvalidUtf8 => c"invalid UTF-8",
        RmStatus::RmParseError => c"parse error",
        RmStatus::RmInvalidArgument => c"invalid argument",
        RmStatus::RmRunError => c"run error",
        RmStatus::RmPanic => c"internal panic",
    };
    s.as_ptr()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a maze from a JSON document or an ASCII grid.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_maze_from_text(text: *const c_char, out: *mut *mut RmMaze) -> RmStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (RmStatus::RmInvalidUtf8, e.to_string()))?;
        let maze = parse_any(text).map_err(|e| (RmStatus::RmParseError, e.to_string()))?;
        let handle = Box::into_raw(Box::new(RmMaze { maze }));
        put(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// # Safety
/// `maze` must come from [`rm_maze_from_text`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rm_maze_free(maze: *mut RmMaze) {
    if !maze.is_null() {
        drop(Box::from_raw(maze));
    }
}

/// # Safety
/// `maze` must be a live handle; `height` and `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_maze_size(maze: *const RmMaze, height: *mut usize, width: *mut usize) -> RmStatus {
    guard(|| {
        let m = &borrow(maze, "maze")?.maze;
        put(height, m.height(), "height")?;
        put(width, m.width(), "width")
    })
}

/// Shortest path length from start to goal, or -1 when unreachable.
///
/// # Safety
/// `maze` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_maze_shortest_path(maze: *const RmMaze, out: *mut i64) -> RmStatus {
    guard(|| {
        let m = &borrow(maze, "maze")?.maze;
        put(out, m.shortest_path_len().map_or(-1, |d| d as i64), "out")
    })
}

/// Relation-network text of the maze. Free with [`rm_string_free`].
///
/// # Safety
/// `maze` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_maze_render_relations(maze: *const RmMaze, out: *mut *mut c_char) -> RmStatus {
    guard(|| {
        let m = &borrow(maze, "maze")?.maze;
        let s = to_c_string(RelationGraph::build(m).render());
        put(out, s, "out").inspect_err(|_| rm_string_free(s))
    })
}

/// Canonical JSON form of the maze. Free with [`rm_string_free`].
///
/// # Safety
/// `maze` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_maze_to_json(maze: *const RmMaze, out: *mut *mut c_char) -> RmStatus {
    guard(|| {
        let m = &borrow(maze, "maze")?.maze;
        let s = to_c_string(emit_maze_doc(m));
        put(out, s, "out").inspect_err(|_| rm_string_free(s))
    })
}

/// Trains on `maze` with a two-stage reverse-walk curriculum and the given
/// proposer. `total_episodes` bounds the whole run (0 selects the default).
///
/// # Safety
/// `maze` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_run_s2rcql(
    maze: *const RmMaze,
    proposer: RmProposer,
    epsilon: f64,
    seed: u64,
    total_episodes: usize,
    out: *mut *mut RmRun,
) -> RmStatus {
    guard(|| {
        let m = &borrow(maze, "maze")?.maze;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut budget = EpisodeBudget::default();
        if total_episodes > 0 {
            budget.total = total_episodes;
        }
        let cfg = CampaignConfig {
            sampler: SamplerConfig {
                epsilon,
                seed,
                ..SamplerConfig::default()
            },
            curriculum: CurriculumMode::ReverseWalk,
            budget,
            workers: 1,
            ..CampaignConfig::default()
        };
        cfg.sampler
            .validate()
            .map_err(|e| (RmStatus::RmInvalidArgument, e.to_string()))?;
        let kind = match proposer {
            RmProposer::RmProposerOracle => ProposerKind::Oracle,
            RmProposer::RmProposerGreedyBlind => ProposerKind::GreedyBlind,
            RmProposer::RmProposerUniformRandom => ProposerKind::UniformRandom,
        };
        let run = run_maze("maze", m, &cfg, &kind, None, seed)
            .map_err(|e| (RmStatus::RmRunError, e.to_string()))?;
        put(out, Box::into_raw(Box::new(RmRun { run })), "out")
    })
}

/// # Safety
/// `run` must come from [`rm_run_s2rcql`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rm_run_free(run: *mut RmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Whether the scored episode from the real start reached the goal, and its
/// step count.
///
/// # Safety
/// `run` must be a live handle; `success` and `steps` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_run_outcome(run: *const RmRun, success: *mut bool, steps: *mut usize) -> RmStatus {
    guard(|| {
        let r = &borrow(run, "run")?.run;
        let log = r
            .scored_logs()
            .last()
            .ok_or_else(|| (RmStatus::RmRunError, "run has no scored episode".to_string()))?;
        put(success, log.reached_goal, "success")?;
        put(steps, log.step_count, "steps")
    })
}

/// Number of training episodes the run used.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_run_episodes(run: *const RmRun, out: *mut usize) -> RmStatus {
    guard(|| put(out, borrow(run, "run")?.run.episodes.len(), "out"))
}

/// Tab-separated Q-table snapshot. Free with [`rm_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rm_run_qtable(run: *const RmRun, out: *mut *mut c_char) -> RmStatus {
    guard(|| {
        let r = &borrow(run, "run")?.run;
        let s = to_c_string(r.qtable.to_snapshot());
        put(out, s, "out").inspect_err(|_| rm_string_free(s))
    })
}
