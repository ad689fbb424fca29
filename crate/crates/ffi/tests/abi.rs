use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use relmaze_ffi::*;

fn maze(text: &str) -> *mut RmMaze {
    let text = CString::new(text).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rm_maze_from_text(text.as_ptr(), &mut m) }, RmStatus::RmOk);
    m
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { rm_string_free(p) };
    s
}

#[test]
fn maze_queries() {
    let m = maze("S.\n#G");
    let (mut h, mut w, mut d) = (0, 0, 0);
    unsafe {
        assert_eq!(rm_maze_size(m, &mut h, &mut w), RmStatus::RmOk);
        assert_eq!(rm_maze_shortest_path(m, &mut d), RmStatus::RmOk);
    }
    assert_eq!((h, w, d), (2, 2, 2));
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { rm_maze_render_relations(m, &mut s) }, RmStatus::RmOk);
    assert_eq!(take_string(s), "A: B\nB: A D\nD: B\nstart=A goal=D");
    assert_eq!(unsafe { rm_maze_to_json(m, &mut s) }, RmStatus::RmOk);
    assert_eq!(take_string(s), r#"{"size":[2,2],"start":[0,0],"goal":[1,1],"obstacles":[[1,0]]}"#);
    unsafe { rm_maze_free(m) };
}

#[test]
fn unreachable_goal_reports_minus_one() {
    let m = maze("S#\n#G");
    let mut d = 0;
    unsafe { rm_maze_shortest_path(m, &mut d) };
    assert_eq!(d, -1);
    unsafe { rm_maze_free(m) };
}

#[test]
fn errors_set_status_and_message() {
    let bad = CString::new("{\"size\":[2,2]").unwrap();
    let mut m = ptr::null_mut();
    let status = unsafe { rm_maze_from_text(bad.as_ptr(), &mut m) };
    assert_eq!(status, RmStatus::RmParseError);
    assert!(m.is_null());
    assert!(!unsafe { CStr::from_ptr(rm_last_error()) }.to_bytes().is_empty());
    assert_eq!(unsafe { rm_maze_from_text(ptr::null(), &mut m) }, RmStatus::RmNullArgument);
    let mut d = 0;
    assert_eq!(unsafe { rm_maze_shortest_path(ptr::null(), &mut d) }, RmStatus::RmNullArgument);
    assert_eq!(
        unsafe { CStr::from_ptr(rm_status_str(RmStatus::RmParseError)) }.to_str().unwrap(),
        "parse error"
    );
}

#[test]
fn training_through_the_abi() {
    let m = maze("S...\n.##.\n...G");
    let mut run = ptr::null_mut();
    assert_eq!(
        unsafe { rm_run_s2rcql(m, RmProposer::RmProposerOracle, 0.0, 3, 0, &mut run) },
        RmStatus::RmOk
    );
    let (mut ok, mut steps, mut episodes) = (false, 0, 0);
    unsafe {
        assert_eq!(rm_run_outcome(run, &mut ok, &mut steps), RmStatus::RmOk);
        assert_eq!(rm_run_episodes(run, &mut episodes), RmStatus::RmOk);
    }
    assert!(ok);
    assert_eq!(steps, 5);
    assert!(episodes >= 1);
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { rm_run_qtable(run, &mut q) }, RmStatus::RmOk);
    assert!(take_string(q).starts_with("# state\taction\tvalue"));
    let mut other = ptr::null_mut();
    assert_eq!(
        unsafe { rm_run_s2rcql(m, RmProposer::RmProposerOracle, 1.5, 3, 0, &mut other) },
        RmStatus::RmInvalidArgument
    );
    unsafe {
        rm_run_free(run);
        rm_maze_free(m);
    }
}

#[test]
fn c_program_links_against_the_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/relmaze.h");
    assert!(header.exists(), "header not generated");
    let lib_dir = root.join("../../target/debug");
    let lib = lib_dir.join("librelmaze_ffi.a");
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let out = std::env::temp_dir().join(format!("relmaze-ffi-smoke-{}", std::process::id()));
    let mut cmd = Command::new(&cc);
    cmd.arg(root.join("tests/smoke.c")).arg("-I").arg(root.join("include")).arg("-o").arg(&out);
    if !lib.exists() {
        // header must at least compile
        let status = Command::new(&cc)
            .arg("-fsyntax-only")
            .arg("-I")
            .arg(root.join("include"))
            .arg(root.join("tests/smoke.c"))
            .status()
            .unwrap();
        assert!(status.success());
        return;
    }
    cmd.arg(&lib).args(["-lpthread", "-ldl", "-lm"]);
    assert!(cmd.status().unwrap().success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(
        String::from_utf8_lossy(&run.stdout),
        "len=5 ok=1 steps=5 bad=parse error\n"
    );
    let _ = std::fs::remove_file(out);
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
