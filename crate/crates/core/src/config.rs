//! Run configuration and the end-to-end driver.
//!
//! Settings are layered: built-in defaults, then `RELMAZE_*` environment
//! variables, then the JSON config file, then command-line flags. The fully
//! resolved configuration is echoed into every report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::bench::{
    generate_suite, heatmap_ppm, render_table, run_campaign, BenchError, CampaignConfig, Method,
    ProposerKind, RunReport, Suite, SuiteMaze, SuiteSpec,
};
use crate::curriculum::{CurriculumMode, EpisodeBudget};
use crate::engine::{
    EpsilonSchedule, Orientation, SamplerConfig, DEFAULT_BUFFER_CAPACITY, DEFAULT_EXEMPLARS,
};
use crate::gateway::{extract_json_block, ChatBackend, Gateway, GatewayConfig, GatewayError};
use crate::maze_text::{parse_any, parse_maze_doc, MazeTextError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_GENERATION: i32 = 4;
pub const EXIT_GATEWAY: i32 = 5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config error in `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("config file {path}: {message}")]
    File { path: PathBuf, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposerName {
    Oracle,
    GreedyBlind,
    Scripted,
    UniformRandom,
    Llm,
}

impl std::str::FromStr for ProposerName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| format!("unknown proposer {s:?}"))
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| format!("unknown method {s:?}"))
    }
}

impl std::str::FromStr for CurriculumMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| format!("unknown curriculum mode {s:?}"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerLayer {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<EpsilonSchedule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayLayer {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_in_flight: Option<usize>,
}

/// One source of settings; absent fields defer to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposer: Option<ProposerName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curriculum: Option<CurriculumMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walk_len: Option<usize>,
    /// Total training episodes per maze.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exemplars: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2r_text: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maze_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extract: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteSpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub sampler: SamplerLayer,
    #[serde(default, skip_serializing_if = "is_default")]
    pub gateway: GatewayLayer,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub method: Method,
    pub proposer: ProposerName,
    pub script_path: Option<PathBuf>,
    pub curriculum: CurriculumMode,
    pub stage_count: usize,
    /// `null` means `⌈(W+H)/4⌉` for each maze.
    pub walk_len: Option<usize>,
    pub budget: EpisodeBudget,
    pub attempts: usize,
    pub exemplars: usize,
    pub buffer_capacity: usize,
    pub s2r_text: bool,
    pub workers: usize,
    pub maze_path: Option<PathBuf>,
    pub suite_path: Option<PathBuf>,
    pub extract: bool,
    pub out_dir: PathBuf,
    pub suite: SuiteSpec,
    pub sampler: SamplerConfig,
    pub gateway: GatewayConfig,
}

impl ResolvedConfig {
    pub fn campaign(&self) -> CampaignConfig {
        CampaignConfig {
            method: self.method,
            sampler: self.sampler.clone(),
            curriculum: self.curriculum,
            stage_count: self.stage_count,
            walk_len: self.walk_len,
            budget: self.budget,
            attempts: self.attempts,
            exemplars: self.exemplars,
            buffer_capacity: self.buffer_capacity,
            s2r_text: self.s2r_text,
            workers: self.workers,
        }
    }

    /// Settings that shape the results. The output directory is left out so
    /// that identical runs written to different places produce identical reports.
    pub fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("out_dir");
        }
        v
    }

    fn needs_gateway(&self) -> bool {
        self.proposer == ProposerName::Llm
            || (self.method == Method::S2rcql && self.curriculum == CurriculumMode::Llm)
            || self.extract
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Reads the `RELMAZE_*` settings from an environment snapshot.
pub fn env_layer(env: &BTreeMap<String, String>) -> Result<ConfigLayer, ConfigError> {
    fn parse<T: std::str::FromStr>(env: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        env.get(key)
            .map(|v| v.parse::<T>().map_err(|e| ConfigError::invalid(key, e.to_string())))
            .transpose()
    }
    Ok(ConfigLayer {
        method: parse(env, "RELMAZE_METHOD")?,
        proposer: parse(env, "RELMAZE_PROPOSER")?,
        episodes: parse(env, "RELMAZE_EPISODES")?,
        out_dir: env.get("RELMAZE_OUT").map(PathBuf::from),
        sampler: SamplerLayer {
            epsilon: parse(env, "RELMAZE_EPSILON")?,
            seed: parse(env, "RELMAZE_SEED")?,
            ..SamplerLayer::default()
        },
        gateway: GatewayLayer {
            endpoint_url: env.get("RELMAZE_ENDPOINT").cloned(),
            model_name: env.get("RELMAZE_MODEL").cloned(),
            ..GatewayLayer::default()
        },
        ..ConfigLayer::default()
    })
}

pub fn file_layer(path: &Path) -> Result<ConfigLayer, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Resolves `flags > file > env > defaults` and validates the result.
pub fn resolve_config(
    file: Option<&Path>,
    flags: ConfigLayer,
    env: &BTreeMap<String, String>,
) -> Result<ResolvedConfig, ConfigError> {
    let mut merged = serde_json::to_value(env_layer(env)?).expect("layer serializes");
    if let Some(path) = file {
        merge(&mut merged, serde_json::to_value(file_layer(path)?).expect("layer serializes"));
    }
    merge(&mut merged, serde_json::to_value(flags).expect("layer serializes"));
    let layer: ConfigLayer = serde_json::from_value(merged)
        .map_err(|e| ConfigError::invalid("<merged>", e.to_string()))?;
    finish(layer)
}

fn finish(layer: ConfigLayer) -> Result<ResolvedConfig, ConfigError> {
    let sd = SamplerConfig::default();
    let gd = GatewayConfig::default();
    let method = layer.method.unwrap_or(Method::S2rcql);
    let curriculum = match (layer.curriculum, method) {
        (Some(c), Method::S2rcql) => c,
        (Some(CurriculumMode::None), _) | (None, _) if method != Method::S2rcql => CurriculumMode::None,
        (None, _) => CurriculumMode::ReverseWalk,
        (Some(c), m) => {
            return Err(ConfigError::invalid(
                "curriculum",
                format!("{c:?} curriculum conflicts with method {}", m.as_str()),
            ))
        }
    };
    let proposer = layer.proposer.unwrap_or(ProposerName::Oracle);
    if proposer == ProposerName::Scripted && layer.script_path.is_none() {
        return Err(ConfigError::invalid(
            "script_path",
            "proposer scripted needs a script file",
        ));
    }
    if layer.maze_path.is_some() && layer.suite_path.is_some() {
        return Err(ConfigError::invalid(
            "maze_path",
            "give either a maze file or a suite file, not both",
        ));
    }
    let total = layer.episodes.unwrap_or(crate::curriculum::DEFAULT_TOTAL_EPISODES);
    let per_stage = layer
        .stage_budget
        .unwrap_or(crate::curriculum::DEFAULT_STAGE_BUDGET);
    if total == 0 {
        return Err(ConfigError::invalid("episodes", "must be positive"));
    }
    if per_stage == 0 {
        return Err(ConfigError::invalid("stage_budget", "must be positive"));
    }
    let stage_count = layer.stage_count.unwrap_or(crate::curriculum::DEFAULT_STAGE_COUNT);
    if layer.walk_len == Some(0) {
        return Err(ConfigError::invalid("walk_len", "must be positive"));
    }
    let s = layer.sampler;
    let sampler = SamplerConfig {
        epsilon: s.epsilon.unwrap_or(sd.epsilon),
        alpha: s.alpha.unwrap_or(sd.alpha),
        gamma: s.gamma.unwrap_or(sd.gamma),
        seed: s.seed.unwrap_or(sd.seed),
        orientation: s.orientation.unwrap_or(sd.orientation),
        schedule: s.schedule.unwrap_or(sd.schedule),
    };
    sampler
        .validate()
        .map_err(|e| ConfigError::invalid("sampler", e.to_string()))?;
    let g = layer.gateway;
    let gateway = GatewayConfig {
        endpoint_url: g.endpoint_url.unwrap_or(gd.endpoint_url),
        model_name: g.model_name.unwrap_or(gd.model_name),
        api_key_env: g.api_key_env.unwrap_or(gd.api_key_env),
        timeout_secs: g.timeout_secs.unwrap_or(gd.timeout_secs),
        max_retries: g.max_retries.unwrap_or(gd.max_retries),
        temperature: g.temperature.unwrap_or(gd.temperature),
        max_in_flight: g.max_in_flight.unwrap_or(gd.max_in_flight),
    };
    gateway
        .validate()
        .map_err(|e| ConfigError::invalid("gateway", e.to_string()))?;
    let suite = layer.suite.unwrap_or_default();
    suite
        .validate()
        .map_err(|e| ConfigError::invalid("suite", e.to_string()))?;
    Ok(ResolvedConfig {
        method,
        proposer,
        script_path: layer.script_path,
        curriculum,
        stage_count,
        walk_len: layer.walk_len,
        budget: EpisodeBudget { per_stage, total },
        attempts: layer.attempts.unwrap_or(1).max(1),
        exemplars: layer.exemplars.unwrap_or(DEFAULT_EXEMPLARS),
        buffer_capacity: layer.buffer_capacity.unwrap_or(DEFAULT_BUFFER_CAPACITY).max(1),
        s2r_text: layer.s2r_text.unwrap_or(true),
        workers: layer.workers.unwrap_or(4).max(1),
        maze_path: layer.maze_path,
        suite_path: layer.suite_path,
        extract: layer.extract.unwrap_or(false),
        out_dir: layer.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        suite,
        sampler,
        gateway,
    })
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Bench(BenchError),
    #[error("gateway: {0}")]
    Gateway(GatewayError),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Input { .. } => EXIT_INPUT,
            RunError::Bench(BenchError::Config(_) | BenchError::Spec(_)) => EXIT_CONFIG,
            RunError::Bench(BenchError::Maze(_) | BenchError::SuiteFile(_)) => EXIT_INPUT,
            RunError::Bench(_) => EXIT_GENERATION,
            RunError::Gateway(GatewayError::Config(_)) => EXIT_CONFIG,
            RunError::Gateway(_) => EXIT_GATEWAY,
            RunError::Output { .. } => EXIT_GENERATION,
        }
    }
}

pub const EXTRACTION_EXEMPLAR: &str = r#"Example description:
A 3 by 4 grid maze. You start in the top-left corner (row 0, column 0) and must reach row 2, column 3. Cells (1,1) and (0,2) are walls.
Example answer:
{"size":[3,4],"start":[0,0],"goal":[2,3],"obstacles":[[0,2],[1,1]]}"#;

pub fn extraction_prompt(description: &str) -> String {
    format!(
        "Convert the maze description into JSON with keys \"size\" ([rows, columns]), \"start\" ([row, col]), \
         \"goal\" ([row, col]) and \"obstacles\" (list of [row, col]). Rows and columns count from 0. \
         Reply with the JSON object only.\n\n{EXTRACTION_EXEMPLAR}\n\nDescription:\n{description}"
    )
}

/// Asks the backend to turn a free-form description into a maze document.
pub fn extract_maze(
    backend: &dyn ChatBackend,
    description: &str,
) -> Result<crate::maze::Maze, RunError> {
    let reply = backend
        .complete(crate::proposer::SYSTEM_PROMPT, &extraction_prompt(description))
        .map_err(RunError::Gateway)?;
    let block = extract_json_block(&reply).map_err(RunError::Gateway)?;
    parse_maze_doc(block).map_err(|e| RunError::Input {
        path: PathBuf::from("<extracted>"),
        message: e.to_string(),
    })
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub written: Vec<PathBuf>,
}

fn read_input(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn input_error(path: &Path, e: MazeTextError) -> RunError {
    RunError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn maze_id_from(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .unwrap_or("maze")
        .to_string()
}

fn write_file(path: &Path, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| RunError::Output {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    fs::write(path, bytes).map_err(|e| RunError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    written.push(path.to_path_buf());
    Ok(())
}

/// Writes per-maze heatmaps as JSON matrices and PPM images under `dir`.
pub fn write_heatmaps(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let mut written = Vec::new();
    for run in &report.mazes {
        let maze = run.maze.to_maze().map_err(|e| RunError::Input {
            path: PathBuf::from(&run.maze_id),
            message: e.to_string(),
        })?;
        let json = serde_json::to_string(&run.heatmap).expect("matrix serializes") + "\n";
        write_file(&dir.join(format!("{}.json", run.maze_id)), json.as_bytes(), &mut written)?;
        let ppm = heatmap_ppm(&run.heatmap, &maze, 16);
        write_file(&dir.join(format!("{}.ppm", run.maze_id)), &ppm, &mut written)?;
    }
    Ok(written)
}

/// Loads the maze or suite, runs the configured method and writes
/// `report.json`, `report.txt`, Q-table snapshots, heatmaps and transcripts
/// into the output directory. Nothing is written when loading fails.
pub fn main_run(cfg: &ResolvedConfig) -> Result<RunOutcome, RunError> {
    let gateway: Option<Arc<Gateway>> = if cfg.needs_gateway() {
        cfg.gateway.read_credential().map_err(RunError::Gateway)?;
        Some(Arc::new(Gateway::new(cfg.gateway.clone()).map_err(RunError::Gateway)?))
    } else {
        None
    };
    let backend: Option<Arc<dyn ChatBackend>> = gateway.clone().map(|g| g as Arc<dyn ChatBackend>);

    let script = match (cfg.proposer, &cfg.script_path) {
        (ProposerName::Scripted, Some(p)) => Some(
            read_input(p)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };

    let suite = if let Some(path) = &cfg.maze_path {
        let text = read_input(path)?;
        let maze = if cfg.extract {
            let b = backend.as_deref().expect("gateway built for extraction");
            extract_maze(b, &text)?
        } else {
            parse_any(&text).map_err(|e| input_error(path, e))?
        };
        let (h, w) = (maze.height(), maze.width());
        Suite {
            spec: SuiteSpec {
                classes: vec![crate::bench::SizeClass {
                    height: h,
                    width: w,
                    count: 1,
                    obstacle_fraction: maze.obstacles().len() as f64 / (h * w) as f64,
                }],
                seed: cfg.suite.seed,
            },
            mazes: vec![SuiteMaze {
                id: maze_id_from(path),
                maze,
            }],
        }
    } else if let Some(path) = &cfg.suite_path {
        Suite::from_json(&read_input(path)?).map_err(|e| RunError::Input {
            path: path.clone(),
            message: e.to_string(),
        })?
    } else {
        generate_suite(&cfg.suite).map_err(RunError::Bench)?
    };

    let proposer = match cfg.proposer {
        ProposerName::Oracle => ProposerKind::Oracle,
        ProposerName::GreedyBlind => ProposerKind::GreedyBlind,
        ProposerName::UniformRandom => ProposerKind::UniformRandom,
        ProposerName::Scripted => ProposerKind::Scripted(script.unwrap_or_default()),
        ProposerName::Llm => ProposerKind::Llm(backend.clone().expect("gateway built for llm proposer")),
    };

    let report = run_campaign(&suite, &cfg.campaign(), &proposer, backend, cfg.echo())
        .map_err(RunError::Bench)?;

    let out = &cfg.out_dir;
    let mut written = Vec::new();
    write_file(&out.join("report.json"), report.to_json().as_bytes(), &mut written)?;
    write_file(&out.join("report.txt"), render_table(&[&report]).as_bytes(), &mut written)?;
    written.extend(write_heatmaps(&report, &out.join("heatmaps"))?);
    for run in &report.mazes {
        if cfg.method.learns() {
            write_file(
                &out.join("qtables").join(format!("{}.tsv", run.maze_id)),
                run.qtable.to_snapshot().as_bytes(),
                &mut written,
            )?;
        }
        if !run.transcripts.is_empty() {
            let mut lines = String::new();
            for t in &run.transcripts {
                lines.push_str(&serde_json::to_string(t).expect("transcript serializes"));
                lines.push('\n');
            }
            write_file(
                &out.join("transcripts").join(format!("{}.jsonl", run.maze_id)),
                lines.as_bytes(),
                &mut written,
            )?;
        }
    }
    if let Some(g) = &gateway {
        let l = g.ledger();
        log::info!(
            "gateway: {} requests, {} failures, {:.2}s total latency",
            l.requests,
            l.failures,
            l.total_latency.as_secs_f64()
        );
    }
    Ok(RunOutcome { report, written })
}
