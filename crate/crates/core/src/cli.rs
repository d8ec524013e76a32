//! Command-line front end: TOML configuration, dispatch and output files.
//!
//! Every command writes into one output directory that describes itself:
//! `config.resolved.toml` (all defaults filled in, stamped with the code
//! version), the command's data files and a `manifest.json` with their
//! checksums.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::collapse::{
    collapsed_curve, critical_size_scaling, drop_one_subsets, estimate_uncertainty, fit_collapse, tail_exponent_check,
    write_collapsed_csv, CollapseDataset, CollapseFit, CollapseParams, CriticalScaling, FitOptions, TailCheck,
    Uncertainty,
};
use crate::ensemble::{run_point, run_sweep, ObservableFlags, ObservableRecord, ResultSink, SweepConfig};
use crate::error::{Error, Result};
use crate::evolve::Schedule;
use crate::model::{Boundary, ModelParams};
use crate::observables::chord_coordinate;
use crate::oracle::{run_oracle_suite, OracleOptions};
use crate::output::{code_version, format_float, sha256_hex, to_json_bytes, write_atomic};
use crate::parallel::Execution;
use crate::spectral::{spectral_point, SpectralOptions, SpectralRecord};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "nhent",
    version,
    about = "Entanglement transitions in disordered Hatano–Nelson chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,

    /// Base seed (overrides `base_seed`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true, value_name = "N", env = "NHENT_WORKERS")]
    pub workers: Option<usize>,

    /// Keep sweep points that are already complete in the output directory.
    #[arg(long, global = true)]
    pub resume: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    /// One parameter point with full profiles.
    Simulate,
    /// Disorder-averaged grid over (gamma, W, L).
    Sweep,
    /// Finite-size-scaling fit of a sweep CSV.
    Collapse,
    /// Orthogonality index and MIPR versus W.
    Spectral,
    /// Engine versus brute-force and closed-form oracles.
    OracleCheck,
}

impl std::fmt::Display for CommandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
            CommandKind::Collapse => "collapse",
            CommandKind::Spectral => "spectral",
            CommandKind::OracleCheck => "oracle-check",
        })
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("nhent-out")
}
fn default_j() -> f64 {
    1.0
}
fn default_boundary() -> Boundary {
    Boundary::Open
}
fn default_realizations() -> usize {
    200
}
fn default_spectral_realizations() -> usize {
    50
}
fn yes() -> bool {
    true
}

/// `[model]`: a single point for `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_j")]
    pub j: f64,
    pub gamma: f64,
    pub w: f64,
    pub l: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "ObservableFlags::all")]
    pub observables: ObservableFlags,
}

/// `[sweep]`: the grid; schedule and seed come from the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub gamma: Vec<f64>,
    pub w: Vec<f64>,
    pub l: Vec<usize>,
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub observables: ObservableFlags,
}

fn default_init() -> CollapseParams {
    CollapseParams {
        wc: 3.3,
        nu: 2.0,
        beta: 0.5,
    }
}

/// `[collapse]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSection {
    /// CSV with columns `W, L, S_half` (a sweep's `sweep.csv` works);
    /// relative paths are taken from the config file's directory.
    pub input: PathBuf,
    /// Selects one `gamma` when the CSV holds several.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Restricts the fit to these sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "default_init")]
    pub init: CollapseParams,
    #[serde(default = "CollapseSection::default_margin")]
    pub margin: f64,
    #[serde(default = "CollapseSection::default_restarts")]
    pub restarts: usize,
    #[serde(default = "CollapseSection::default_jitter")]
    pub jitter: f64,
    /// Drop-one-size refits for parameter spreads.
    #[serde(default = "yes")]
    pub uncertainty: bool,
    /// Tail check uses `W > W_c + tail_offset`.
    #[serde(default = "CollapseSection::default_tail_offset")]
    pub tail_offset: f64,
}

impl CollapseSection {
    fn default_margin() -> f64 {
        FitOptions::default().margin
    }
    fn default_restarts() -> usize {
        FitOptions::default().restarts
    }
    fn default_jitter() -> f64 {
        FitOptions::default().jitter
    }
    fn default_tail_offset() -> f64 {
        1.0
    }
}

/// `[spectral]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    pub gamma: f64,
    pub w: Vec<f64>,
    pub l: usize,
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_spectral_realizations")]
    pub realizations: usize,
    #[serde(default = "yes")]
    pub asymptotic: bool,
    /// Chain length for transfer-matrix localization lengths.
    #[serde(default = "SpectralSection::default_n_sites")]
    pub n_sites: usize,
    #[serde(default = "SpectralSection::default_bins")]
    pub bins: usize,
}

impl SpectralSection {
    fn default_n_sites() -> usize {
        SpectralOptions::default().n_sites
    }
    fn default_bins() -> usize {
        SpectralOptions::default().bins
    }
}

/// `[oracle]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub instances: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { instances: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must agree with the subcommand when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads. Not echoed into the resolved config, since it never
    /// changes any result.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collapse: Option<CollapseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
    #[serde(default)]
    pub oracle: OracleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            output_dir: default_output_dir(),
            base_seed: 0,
            workers: None,
            schedule: Schedule::default(),
            model: None,
            sweep: None,
            collapse: None,
            spectral: None,
            oracle: OracleSection::default(),
        }
    }
}

/// 1-based line of `key` inside `[section]` (or the top level), falling back
/// to the section header and then to line 1.
fn locate(source: &str, section: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if section == Some(name.as_str()) {
                header_line = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        if current.as_deref() == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return i + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

fn config_error(source: &str, section: Option<&str>, key: &str, message: impl Into<String>) -> Error {
    let full = match section {
        Some(s) => format!("{s}.{key}"),
        None => key.to_string(),
    };
    Error::Config {
        line: locate(source, section, key),
        key: full,
        message: message.into(),
    }
}

/// Turns a TOML parse error into one that names the offending key and line.
fn from_toml_error(source: &str, e: &toml::de::Error) -> Error {
    let msg = e.message().trim().to_string();
    let line = e
        .span()
        .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    let named = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.contains("unknown field") || msg.contains("duplicate key") || msg.contains("missing field"));
    let key = match named {
        Some(k) => k.to_string(),
        None => source
            .lines()
            .nth(line - 1)
            .map(|l| l.split('=').next().unwrap_or("").trim().to_string())
            .unwrap_or_default(),
    };
    Error::Config {
        key,
        line,
        message: msg,
    }
}

fn check_l(source: &str, section: &str, key: &str, l: usize) -> Result<()> {
    if l < 4 || !l.is_multiple_of(2) {
        return Err(config_error(
            source,
            Some(section),
            key,
            format!("L must be even and at least 4, got {l}"),
        ));
    }
    Ok(())
}

fn check_w(source: &str, section: &str, key: &str, w: f64) -> Result<()> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(config_error(
            source,
            Some(section),
            key,
            format!("W must be finite and non-negative, got {w}"),
        ));
    }
    Ok(())
}

fn check_positive(source: &str, section: &str, key: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(config_error(source, Some(section), key, "must be at least 1"));
    }
    Ok(())
}

impl RunConfig {
    /// Checks every section that is present; `source` locates offending keys.
    pub fn validate(&self, source: &str) -> Result<()> {
        let s = &self.schedule;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(config_error(
                source,
                Some("schedule"),
                "dt",
                format!("dt must be positive, got {}", s.dt),
            ));
        }
        if s.record_last == 0 || s.record_last > s.n_steps {
            return Err(config_error(
                source,
                Some("schedule"),
                "record_last",
                format!(
                    "need n_steps >= record_last >= 1, got n_steps = {}, record_last = {}",
                    s.n_steps, s.record_last
                ),
            ));
        }
        if let Some(m) = &self.model {
            check_l(source, "model", "l", m.l)?;
            check_w(source, "model", "w", m.w)?;
            check_positive(source, "model", "realizations", m.realizations)?;
        }
        if let Some(sw) = &self.sweep {
            for &l in &sw.l {
                check_l(source, "sweep", "l", l)?;
            }
            for &w in &sw.w {
                check_w(source, "sweep", "w", w)?;
            }
            if sw.gamma.iter().any(|g| !g.is_finite()) {
                return Err(config_error(
                    source,
                    Some("sweep"),
                    "gamma",
                    "gamma values must be finite",
                ));
            }
            check_positive(source, "sweep", "realizations", sw.realizations)?;
        }
        if let Some(c) = &self.collapse {
            let p = c.init;
            if !(p.wc.is_finite() && p.nu > 0.0 && p.beta.is_finite()) {
                return Err(config_error(
                    source,
                    Some("collapse"),
                    "init",
                    "need finite wc and beta and nu > 0",
                ));
            }
            if !(c.margin >= 0.0) {
                return Err(config_error(source, Some("collapse"), "margin", "must be non-negative"));
            }
            if !(0.0..1.0).contains(&c.jitter) {
                return Err(config_error(source, Some("collapse"), "jitter", "must lie in [0, 1)"));
            }
            check_positive(source, "collapse", "restarts", c.restarts)?;
        }
        if let Some(sp) = &self.spectral {
            check_l(source, "spectral", "l", sp.l)?;
            for &w in &sp.w {
                check_w(source, "spectral", "w", w)?;
            }
            check_positive(source, "spectral", "realizations", sp.realizations)?;
            check_positive(source, "spectral", "bins", sp.bins)?;
            if sp.n_sites < 100 {
                return Err(config_error(
                    source,
                    Some("spectral"),
                    "n_sites",
                    "need at least 100 sites",
                ));
            }
        }
        Ok(())
    }

    /// Complains about the section `command` needs when it is absent.
    pub fn require_section(&self, command: CommandKind) -> Result<()> {
        let missing = match command {
            CommandKind::Simulate => self.model.is_none().then_some("model"),
            CommandKind::Sweep => self.sweep.is_none().then_some("sweep"),
            CommandKind::Collapse => self.collapse.is_none().then_some("collapse"),
            CommandKind::Spectral => self.spectral.is_none().then_some("spectral"),
            CommandKind::OracleCheck => None,
        };
        match missing {
            Some(s) => Err(Error::Config {
                key: s.to_string(),
                line: 1,
                message: format!("`{command}` needs a [{s}] section"),
            }),
            None => Ok(()),
        }
    }

    pub fn sweep_config(&self) -> Option<SweepConfig> {
        self.sweep.as_ref().map(|s| SweepConfig {
            gamma: s.gamma.clone(),
            w: s.w.clone(),
            l: s.l.clone(),
            j: s.j,
            boundary: s.boundary,
            realizations: s.realizations,
            schedule: self.schedule,
            base_seed: self.base_seed,
            observables: s.observables,
        })
    }

    /// TOML with every default spelled out, headed by the code version.
    pub fn resolved_toml(&self) -> Result<String> {
        let body = toml::to_string_pretty(self).map_err(|e| Error::Data(format!("cannot serialize config: {e}")))?;
        Ok(format!("# resolved by {}\n{body}", code_version()))
    }
}

/// Parses TOML text; unknown keys, duplicates, type mismatches and
/// constraint violations all come back as [`Error::Config`].
pub fn parse_config_str(source: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(source).map_err(|e| from_toml_error(source, &e))?;
    cfg.validate(source)?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config_str(&source)?;
    if let Some(c) = &mut cfg.collapse {
        if c.input.is_relative() {
            if let Some(dir) = path.parent() {
                c.input = dir.join(&c.input);
            }
        }
    }
    Ok(cfg)
}

/// Config file plus command-line overrides, ready to dispatch.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: CommandKind,
    pub config: RunConfig,
    pub workers: usize,
    pub resume: bool,
}

impl Invocation {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => parse_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(c) = config.command {
            if c != cli.command {
                return Err(Error::Config {
                    key: "command".into(),
                    line: 1,
                    message: format!("config is for `{c}` but `{}` was requested", cli.command),
                });
            }
        }
        config.command = Some(cli.command);
        if let Some(o) = &cli.output {
            config.output_dir = o.clone();
        }
        if let Some(s) = cli.seed {
            config.base_seed = s;
        }
        config.require_section(cli.command)?;
        let workers = cli.workers.or(config.workers).unwrap_or(0);
        Ok(Invocation {
            command: cli.command,
            config,
            workers,
            resume: cli.resume,
        })
    }

    fn execution(&self) -> Execution {
        Execution::with_workers(self.workers)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub sha256: String,
}

/// Manifest for the single-shot commands (`sweep` writes its own).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub command: CommandKind,
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
}

/// Collects output files and writes them atomically.
struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn finish(mut self, command: CommandKind) -> Result<()> {
        let config = self
            .files
            .iter()
            .find(|f| f.file == RESOLVED_CONFIG)
            .map(|f| f.sha256.clone())
            .unwrap_or_default();
        self.files.sort_by(|a, b| a.file.cmp(&b.file));
        let m = RunManifest {
            code_version: code_version(),
            command,
            config_sha256: config,
            files: self.files,
        };
        write_atomic(&self.dir.join(MANIFEST), &to_json_bytes(&m)?)
    }
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
    }
    Ok(buf)
}

/// What a command produced, beyond its files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// `oracle-check` ran but some residual exceeded its tolerance.
    ChecksFailed,
}

pub fn dispatch(inv: &Invocation) -> Result<Outcome> {
    let cfg = &inv.config;
    let resolved = cfg.resolved_toml()?;
    log::info!("{} -> {}", inv.command, cfg.output_dir.display());
    match inv.command {
        CommandKind::Sweep => {
            let sweep = cfg.sweep_config().expect("section checked");
            write_atomic(&cfg.output_dir.join(RESOLVED_CONFIG), resolved.as_bytes())?;
            let sink = ResultSink::new(&cfg.output_dir, inv.resume);
            let recs = run_sweep(&sweep, &sink, inv.execution())?;
            log::info!("sweep complete: {} points", recs.len());
            Ok(Outcome::Success)
        }
        cmd => {
            let mut out = OutputDir::new(&cfg.output_dir)?;
            out.write(RESOLVED_CONFIG, resolved.as_bytes())?;
            let outcome = match cmd {
                CommandKind::Simulate => simulate(inv, &mut out)?,
                CommandKind::Collapse => collapse(inv, &mut out)?,
                CommandKind::Spectral => spectral(inv, &mut out)?,
                CommandKind::OracleCheck => oracle_check(inv, &mut out)?,
                CommandKind::Sweep => unreachable!(),
            };
            out.finish(cmd)?;
            Ok(outcome)
        }
    }
}

fn simulate(inv: &Invocation, out: &mut OutputDir) -> Result<Outcome> {
    let cfg = &inv.config;
    let m = cfg.model.as_ref().expect("section checked");
    let params = ModelParams::new(m.j, m.gamma, m.w, m.l, m.boundary)?;
    let rec = run_point(
        &params,
        m.realizations,
        &cfg.schedule,
        cfg.base_seed,
        &m.observables,
        inv.execution(),
    )?;
    out.write("point.json", &to_json_bytes(&rec)?)?;
    write_profiles(&rec, out)?;
    log::info!("S_L/2 = {} ± {}", rec.s_half.mean, rec.s_half.std_err);
    Ok(Outcome::Success)
}

/// Plot-ready tables; subsystem lengths also carry the chord coordinate.
fn write_profiles(rec: &ObservableRecord, out: &mut OutputDir) -> Result<()> {
    let n = rec.point.l;
    if let Some(p) = &rec.entropy_profile {
        let bytes = csv_bytes(&["l", "chord", "S", "S_err"], |w| {
            for (i, (m, e)) in p.mean.iter().zip(&p.std_err).enumerate() {
                let l = i + 1;
                w.write_record([
                    l.to_string(),
                    format_float(chord_coordinate(l, n)),
                    format_float(*m),
                    format_float(*e),
                ])?;
            }
            Ok(())
        })?;
        out.write("entropy_profile.csv", &bytes)?;
    }
    if let Some(p) = &rec.correlation {
        let bytes = csv_bytes(&["l", "chord", "C", "C_err"], |w| {
            for (i, (m, e)) in p.mean.iter().zip(&p.std_err).enumerate() {
                let l = i + 1;
                w.write_record([
                    l.to_string(),
                    format_float(chord_coordinate(l, n)),
                    format_float(*m),
                    format_float(*e),
                ])?;
            }
            Ok(())
        })?;
        out.write("correlation_profile.csv", &bytes)?;
    }
    if let Some(p) = &rec.density {
        let bytes = csv_bytes(&["site", "n", "n_err"], |w| {
            for (i, (m, e)) in p.mean.iter().zip(&p.std_err).enumerate() {
                w.write_record([(i + 1).to_string(), format_float(*m), format_float(*e)])?;
            }
            Ok(())
        })?;
        out.write("density_profile.csv", &bytes)?;
    }
    Ok(())
}

/// Diagnostics that may not apply to every dataset are logged and skipped.
fn soft<T>(what: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{what} skipped: {e}");
            None
        }
    }
}

/// `collapse.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub input: PathBuf,
    pub input_sha256: String,
    pub fit: CollapseFit,
    pub uncertainty: Option<Uncertainty>,
    pub tail: Option<TailCheck>,
    pub critical_scaling: Option<CriticalScaling>,
}

fn collapse(inv: &Invocation, out: &mut OutputDir) -> Result<Outcome> {
    let cfg = &inv.config;
    let c = cfg.collapse.as_ref().expect("section checked");
    let raw = fs::read(&c.input).map_err(|e| Error::io(&c.input, e))?;
    let mut data = CollapseDataset::read_csv(raw.as_slice(), c.gamma)?;
    if let Some(sizes) = &c.sizes {
        data = data.with_sizes(sizes);
    }
    let opts = FitOptions {
        restarts: c.restarts,
        jitter: c.jitter,
        margin: c.margin,
        seed: cfg.base_seed,
        execution: inv.execution(),
        ..FitOptions::default()
    };
    let fit = fit_collapse(&data, c.init, &opts)?;
    log::info!(
        "W_c = {}, nu = {}, beta = {} (loss {})",
        fit.params.wc,
        fit.params.nu,
        fit.params.beta,
        fit.loss
    );
    let uncertainty = if c.uncertainty {
        soft(
            "uncertainty",
            estimate_uncertainty(&data, &fit, &drop_one_subsets(&fit.sizes), &opts),
        )
    } else {
        None
    };
    let report = CollapseReport {
        input: c.input.clone(),
        input_sha256: sha256_hex(&raw),
        tail: soft("tail check", tail_exponent_check(&data, fit.params, c.tail_offset)),
        critical_scaling: soft("critical scaling", critical_size_scaling(&data, fit.params.wc)),
        uncertainty,
        fit,
    };
    out.write("collapse.json", &to_json_bytes(&report)?)?;
    let mut bytes = Vec::new();
    write_collapsed_csv(&collapsed_curve(&data, report.fit.params), &mut bytes)?;
    out.write("collapsed.csv", &bytes)?;
    Ok(Outcome::Success)
}

fn spectral(inv: &Invocation, out: &mut OutputDir) -> Result<Outcome> {
    let cfg = &inv.config;
    let s = cfg.spectral.as_ref().expect("section checked");
    let opts = SpectralOptions {
        realizations: s.realizations,
        bins: s.bins,
        n_sites: s.n_sites,
        base_seed: cfg.base_seed,
        execution: inv.execution(),
    };
    let mut records: Vec<SpectralRecord> = Vec::with_capacity(s.w.len());
    for &w in &s.w {
        let p = ModelParams::new(s.j, s.gamma, w, s.l, s.boundary)?;
        let rec = spectral_point(&p, &opts, s.asymptotic)?;
        log::info!("W = {w}: O = {}, MIPR = {}", rec.orthogonality.mean, rec.mipr.mean);
        records.push(rec);
    }
    out.write("spectral.json", &to_json_bytes(&records)?)?;
    let bytes = csv_bytes(
        &["W", "O_mean", "O_err", "mipr_mean", "mipr_err", "asymptotic_mipr"],
        |wr| {
            for r in &records {
                wr.write_record([
                    format_float(r.w),
                    format_float(r.orthogonality.mean),
                    format_float(r.orthogonality.std_err),
                    format_float(r.mipr.mean),
                    format_float(r.mipr.std_err),
                    r.asymptotic_mipr.map(format_float).unwrap_or_default(),
                ])?;
            }
            Ok(())
        },
    )?;
    out.write("spectral.csv", &bytes)?;
    Ok(Outcome::Success)
}

fn oracle_check(inv: &Invocation, out: &mut OutputDir) -> Result<Outcome> {
    let cfg = &inv.config;
    let report = run_oracle_suite(&OracleOptions {
        instances: cfg.oracle.instances,
        seed: cfg.base_seed,
        execution: inv.execution(),
    })?;
    for c in &report.checks {
        println!(
            "{:<30} residual {:>12.3e}  tolerance {:>9.1e}  {}",
            c.name,
            c.residual,
            c.tolerance,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    out.write("oracle.json", &to_json_bytes(&report)?)?;
    Ok(if report.passed {
        Outcome::Success
    } else {
        Outcome::ChecksFailed
    })
}

/// JSON written to stderr when a command fails.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        let (key, line) = match e {
            Error::Config { key, line, .. } => (Some(key.clone()), Some(*line)),
            _ => (None, None),
        };
        ErrorReport {
            status: "error",
            kind: e.kind(),
            message: e.to_string(),
            key,
            line,
        }
    }
}

/// Entry point of the `nhent` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = Invocation::from_cli(&cli).and_then(|inv| dispatch(&inv));
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(2)
        }
    }
}
