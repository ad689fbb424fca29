//! Command-line front end for the `relmaze` binary.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench::{generate_suite, render_table, Method, RunReport};
use crate::config::{
    main_run, resolve_config, write_heatmaps, ConfigLayer, ProposerName, RunError, SamplerLayer,
    EXIT_CONFIG, EXIT_GENERATION, EXIT_INPUT, EXIT_OK,
};
use crate::curriculum::CurriculumMode;

#[derive(Debug, Parser)]
#[command(name = "relmaze", version, about = "Grid-maze planning with relational prompts and guided Q-learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark suite and write it as JSON.
    GenSuite(GenSuiteArgs),
    /// Train or prompt on one maze or a whole suite.
    Run(RunArgs),
    /// Print the summary table for one or more report.json files.
    Report(ReportArgs),
    /// Re-render heatmaps from a report.json.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Args)]
pub struct GenSuiteArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file.
    #[arg(long, default_value = "suite.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Maze file (JSON document or ASCII grid).
    #[arg(long, conflicts_with = "suite")]
    pub maze: Option<PathBuf>,
    /// Suite JSON written by gen-suite. Without --maze or --suite a suite is generated.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub proposer: Option<ProposerName>,
    #[arg(long)]
    pub curriculum: Option<CurriculumMode>,
    /// Total training episodes per maze.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub stage_budget: Option<usize>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One proposer reply per line, for the scripted proposer.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Treat the maze file as free text and extract it through the gateway.
    #[arg(long)]
    pub extract: bool,
    /// Use coordinate prompts instead of relational ones.
    #[arg(long)]
    pub no_s2r: bool,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    pub report: PathBuf,
    #[arg(long, default_value = "heatmaps")]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            method: self.method,
            proposer: self.proposer,
            script_path: self.script.clone(),
            curriculum: self.curriculum,
            stage_count: self.stages,
            episodes: self.episodes,
            stage_budget: self.stage_budget,
            s2r_text: self.no_s2r.then_some(false),
            workers: self.workers,
            maze_path: self.maze.clone(),
            suite_path: self.suite.clone(),
            extract: self.extract.then_some(true),
            out_dir: self.out.clone(),
            sampler: SamplerLayer {
                epsilon: self.epsilon,
                seed: self.seed,
                ..SamplerLayer::default()
            },
            ..ConfigLayer::default()
        }
    }
}

fn process_env() -> BTreeMap<String, String> {
    std::env::vars().filter(|(k, _)| k.starts_with("RELMAZE_")).collect()
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let env = process_env();
    match cli.command {
        Command::GenSuite(a) => {
            let mut cfg = match resolve_config(a.config.as_deref(), ConfigLayer::default(), &env) {
                Ok(c) => c,
                Err(e) => return fail(err, &RunError::Config(e)),
            };
            if let Some(seed) = a.seed {
                cfg.suite.seed = seed;
            }
            let suite = match generate_suite(&cfg.suite) {
                Ok(s) => s,
                Err(e) => return fail(err, &RunError::Bench(e)),
            };
            if let Err(e) = fs::write(&a.out, suite.to_json()) {
                let _ = writeln!(err, "error: writing {}: {e}", a.out.display());
                return EXIT_GENERATION;
            }
            let _ = writeln!(out, "wrote {} mazes to {}", suite.mazes.len(), a.out.display());
            EXIT_OK
        }
        Command::Run(a) => {
            let cfg = match resolve_config(a.config.as_deref(), a.layer(), &env) {
                Ok(c) => c,
                Err(e) => return fail(err, &RunError::Config(e)),
            };
            match main_run(&cfg) {
                Ok(outcome) => {
                    let _ = write!(out, "{}", render_table(&[&outcome.report]));
                    let _ = writeln!(out, "outputs in {}", cfg.out_dir.display());
                    EXIT_OK
                }
                Err(e) => fail(err, &e),
            }
        }
        Command::Report(a) => {
            let mut reports = Vec::new();
            for path in &a.reports {
                match fs::read_to_string(path)
                    .map_err(|e| e.to_string())
                    .and_then(|t| RunReport::from_json(&t).map_err(|e| e.to_string()))
                {
                    Ok(r) => reports.push(r),
                    Err(e) => {
                        let _ = writeln!(err, "error: {}: {e}", path.display());
                        return EXIT_INPUT;
                    }
                }
            }
            let refs: Vec<&RunReport> = reports.iter().collect();
            let _ = write!(out, "{}", render_table(&refs));
            EXIT_OK
        }
        Command::Heatmap(a) => {
            let report = match fs::read_to_string(&a.report)
                .map_err(|e| e.to_string())
                .and_then(|t| RunReport::from_json(&t).map_err(|e| e.to_string()))
            {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", a.report.display());
                    return EXIT_INPUT;
                }
            };
            match write_heatmaps(&report, &a.out) {
                Ok(files) => {
                    let _ = writeln!(out, "wrote {} files to {}", files.len(), a.out.display());
                    EXIT_OK
                }
                Err(e) => fail(err, &e),
            }
        }
    }
}

fn fail(err: &mut dyn Write, e: &RunError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    e.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_run_flags() {
        let cli = Cli::try_parse_from([
            "relmaze", "run", "--maze", "m.json", "--method", "qlearn", "--proposer",
            "greedy-blind", "--epsilon", "0.2", "--seed", "5",
        ])
        .unwrap();
        let Command::Run(a) = cli.command else { panic!() };
        let layer = a.layer();
        assert_eq!(layer.method, Some(Method::Qlearn));
        assert_eq!(layer.proposer, Some(ProposerName::GreedyBlind));
        assert_eq!(layer.sampler.epsilon, Some(0.2));
        assert_eq!(layer.sampler.seed, Some(5));
        assert_eq!(layer.s2r_text, None);
    }

    #[test]
    fn bad_method_is_usage_error() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run_cli(["relmaze", "run", "--method", "nope"], &mut o, &mut e);
        assert_eq!(code, EXIT_CONFIG);
        assert!(String::from_utf8_lossy(&e).contains("nope"));
    }
}
