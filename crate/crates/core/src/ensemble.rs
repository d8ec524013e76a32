//! Disorder-and-time averaged sweeps over `(γ, W, L)` grids.
//!
//! Each realization is time-averaged over the recorded steps first; those
//! per-realization values are then averaged over disorder, so the standard
//! error is the spread of realizations over `√R`. Realizations run in
//! parallel but are reduced in index order, which keeps every number
//! bit-identical across worker counts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve_trajectory_with, Schedule};
use crate::model::{realization_seed, sample_disorder, Boundary, ModelParams};
use crate::observables::{
    antipodal_quarters, correlation_profile, density_profile, entropy_profile, half_chain_entropy, mutual_information,
};
use crate::output::{code_version, format_float, sha256_hex, to_json_bytes, write_atomic};
use crate::parallel::{map_indexed, Execution};
use crate::stats::{Estimate, Running, RunningVec, VecEstimate};

/// Fraction of realizations allowed to fail before a point is rejected.
pub const FAILURE_BUDGET: f64 = 0.01;

/// Observables recorded besides `S_{L/2}`, which is always kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableFlags {
    /// Full `S_l` profile; costs `L` diagonalizations per recorded step.
    pub entropy_profile: bool,
    pub density: bool,
    pub correlation: bool,
    pub mutual_information: bool,
}

impl Default for ObservableFlags {
    fn default() -> Self {
        ObservableFlags {
            entropy_profile: false,
            density: true,
            correlation: true,
            mutual_information: true,
        }
    }
}

impl ObservableFlags {
    pub fn all() -> Self {
        ObservableFlags {
            entropy_profile: true,
            density: true,
            correlation: true,
            mutual_information: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
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
    pub schedule: Schedule,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub observables: ObservableFlags,
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

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("realizations must be at least 1".into()));
        }
        self.schedule.validate()?;
        for p in self.points() {
            self.params(&p)?;
        }
        Ok(())
    }

    /// Grid points, `γ` outermost and `L` innermost.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.gamma.len() * self.w.len() * self.l.len());
        for &gamma in &self.gamma {
            for &w in &self.w {
                for &l in &self.l {
                    out.push(GridPoint { gamma, w, l });
                }
            }
        }
        out
    }

    pub fn params(&self, p: &GridPoint) -> Result<ModelParams> {
        ModelParams::new(self.j, p.gamma, p.w, p.l, self.boundary)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(self)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub w: f64,
    pub l: usize,
}

impl GridPoint {
    /// `g{γ}_W{W}_L{L}.json`, numbers in shortest round-trip form.
    pub fn file_name(&self) -> String {
        format!("g{}_W{}_L{}.json", self.gamma, self.w, self.l)
    }
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(gamma = {}, W = {}, L = {})", self.gamma, self.w, self.l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationFailure {
    pub realization: usize,
    pub seed: u64,
    pub error: String,
}

/// Worst numerical health seen over all realizations of a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointHealth {
    pub max_orthonormality_error: f64,
    pub min_r_diag: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub point: GridPoint,
    pub j: f64,
    pub boundary: Boundary,
    pub schedule: Schedule,
    pub base_seed: u64,
    pub realizations_requested: usize,
    pub realizations_completed: usize,
    pub failures: Vec<RealizationFailure>,
    pub s_half: Estimate,
    /// `S_l` for `l = 1..L-1`.
    pub entropy_profile: Option<VecEstimate>,
    pub density: Option<VecEstimate>,
    /// `C(l)` for `l = 1..=L/2`.
    pub correlation: Option<VecEstimate>,
    /// Between the first and last quarter of the chain.
    pub mutual_information: Option<Estimate>,
    pub health: PointHealth,
}

/// Time averages of one trajectory.
#[derive(Clone, Debug)]
struct RealizationValues {
    s_half: f64,
    profile: Option<Vec<f64>>,
    density: Option<Vec<f64>>,
    correlation: Option<Vec<f64>>,
    mutual_information: Option<f64>,
    health: PointHealth,
}

fn add_into(acc: &mut Option<Vec<f64>>, v: Vec<f64>) {
    match acc {
        Some(a) => a.iter_mut().zip(v).for_each(|(x, y)| *x += y),
        None => *acc = Some(v),
    }
}

fn run_realization(
    params: &ModelParams,
    seed: u64,
    schedule: &Schedule,
    flags: &ObservableFlags,
) -> Result<RealizationValues> {
    let dis = sample_disorder(params, seed);
    let (qa, qb) = antipodal_quarters(params.l);
    let mut s_half = 0.0;
    let (mut profile, mut density, mut correlation) = (None, None, None);
    let mut mi = 0.0;
    let mut first_error: Option<Error> = None;
    let health = evolve_trajectory_with(params, &dis, schedule, |_, d| {
        if first_error.is_some() {
            return;
        }
        let mut record = || -> Result<()> {
            s_half += half_chain_entropy(d)?;
            if flags.entropy_profile {
                add_into(&mut profile, entropy_profile(d)?);
            }
            if flags.density {
                add_into(&mut density, density_profile(d));
            }
            if flags.correlation {
                add_into(&mut correlation, correlation_profile(d));
            }
            if flags.mutual_information {
                mi += mutual_information(d, &qa, &qb)?;
            }
            Ok(())
        };
        if let Err(e) = record() {
            first_error = Some(e);
        }
    })?;
    if let Some(e) = first_error {
        return Err(e);
    }
    let n = schedule.record_last as f64;
    let scale = |v: Option<Vec<f64>>| v.map(|v| v.into_iter().map(|x| x / n).collect());
    Ok(RealizationValues {
        s_half: s_half / n,
        profile: scale(profile),
        density: scale(density),
        correlation: scale(correlation),
        mutual_information: flags.mutual_information.then_some(mi / n),
        health: PointHealth {
            max_orthonormality_error: health.max_orthonormality_error,
            min_r_diag: health.min_r_diag,
        },
    })
}

/// Evolves `realizations` disorder draws at one parameter point and reduces
/// them in realization order.
pub fn run_point(
    params: &ModelParams,
    realizations: usize,
    schedule: &Schedule,
    base_seed: u64,
    flags: &ObservableFlags,
    exec: Execution,
) -> Result<ObservableRecord> {
    params.validate()?;
    schedule.validate()?;
    if realizations == 0 {
        return Err(Error::InvalidParameter("realizations must be at least 1".into()));
    }
    let point = GridPoint {
        gamma: params.gamma,
        w: params.w,
        l: params.l,
    };
    let seeds: Vec<u64> = (0..realizations)
        .map(|r| realization_seed(base_seed, params.l, params.w, params.gamma, r as u64))
        .collect();
    let results = map_indexed(realizations, exec, |r| {
        run_realization(params, seeds[r], schedule, flags)
    });

    let mut s_half = Running::default();
    let (mut profile, mut density, mut correlation) =
        (RunningVec::default(), RunningVec::default(), RunningVec::default());
    let mut mi = Running::default();
    let mut failures = Vec::new();
    let mut health = PointHealth {
        max_orthonormality_error: 0.0,
        min_r_diag: f64::INFINITY,
    };
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => {
                s_half.push(v.s_half);
                if let Some(p) = &v.profile {
                    profile.push(p);
                }
                if let Some(p) = &v.density {
                    density.push(p);
                }
                if let Some(p) = &v.correlation {
                    correlation.push(p);
                }
                if let Some(m) = v.mutual_information {
                    mi.push(m);
                }
                health.max_orthonormality_error =
                    health.max_orthonormality_error.max(v.health.max_orthonormality_error);
                health.min_r_diag = health.min_r_diag.min(v.health.min_r_diag);
            }
            Err(e) => {
                log::warn!("{point}, realization {r}: {e}");
                failures.push(RealizationFailure {
                    realization: r,
                    seed: seeds[r],
                    error: e.to_string(),
                });
            }
        }
    }
    if failures.len() as f64 > FAILURE_BUDGET * realizations as f64 || s_half.count() == 0 {
        return Err(Error::PointFailed {
            point: point.to_string(),
            failed: failures.len(),
            total: realizations,
        });
    }
    Ok(ObservableRecord {
        point,
        j: params.j,
        boundary: params.boundary,
        schedule: *schedule,
        base_seed,
        realizations_requested: realizations,
        realizations_completed: s_half.count(),
        failures,
        s_half: s_half.summary(),
        entropy_profile: flags.entropy_profile.then(|| profile.summary()),
        density: flags.density.then(|| density.summary()),
        correlation: flags.correlation.then(|| correlation.summary()),
        mutual_information: flags.mutual_information.then(|| mi.summary()),
        health,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub point: GridPoint,
    pub file: String,
    pub sha256: String,
}

/// Completion record of a sweep directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_hash: String,
    pub total_points: usize,
    pub complete: bool,
    pub points: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_CSV: &str = "sweep.csv";

/// Directory that receives one JSON file per point plus the manifest.
#[derive(Clone, Debug)]
pub struct ResultSink {
    pub dir: PathBuf,
    /// Keep points already recorded in a matching manifest.
    pub resume: bool,
}

impl ResultSink {
    pub fn new(dir: impl Into<PathBuf>, resume: bool) -> Self {
        ResultSink {
            dir: dir.into(),
            resume,
        }
    }

    fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    fn read_manifest(&self) -> Result<Option<Manifest>> {
        let path = self.manifest_path();
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// A previously written record whose file still matches its checksum.
    fn verified(&self, entry: &ManifestEntry) -> Result<Option<ObservableRecord>> {
        let path = self.dir.join(&entry.file);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        if sha256_hex(&bytes) != entry.sha256 {
            log::warn!("{} does not match its checksum; recomputing", entry.file);
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&bytes)?))
    }
}

/// Flattens scalar observables to `gamma,W,L,...` rows.
pub fn write_sweep_csv<W: std::io::Write>(records: &[ObservableRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "gamma",
        "W",
        "L",
        "realizations",
        "S_half",
        "S_half_err",
        "mutual_information",
        "mutual_information_err",
    ])?;
    for r in records {
        let (mi, mi_err) = match r.mutual_information {
            Some(e) => (format_float(e.mean), format_float(e.std_err)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            format_float(r.point.gamma),
            format_float(r.point.w),
            r.point.l.to_string(),
            r.realizations_completed.to_string(),
            format_float(r.s_half.mean),
            format_float(r.s_half.std_err),
            mi,
            mi_err,
        ])?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

/// Runs every grid point not already complete in `sink`, writing each
/// record and an updated manifest as soon as the point finishes, then the
/// flat CSV. Returns the records in grid order.
pub fn run_sweep(config: &SweepConfig, sink: &ResultSink, exec: Execution) -> Result<Vec<ObservableRecord>> {
    config.validate()?;
    let hash = config.hash()?;
    fs::create_dir_all(&sink.dir).map_err(|e| Error::io(&sink.dir, e))?;

    let mut done: BTreeMap<String, ManifestEntry> = BTreeMap::new();
    if sink.resume {
        if let Some(m) = sink.read_manifest()? {
            if m.config_hash != hash {
                return Err(Error::Data(format!(
                    "{} belongs to a different sweep configuration; refusing to resume",
                    sink.dir.display()
                )));
            }
            done = m.points.into_iter().map(|e| (e.file.clone(), e)).collect();
        }
    }

    let points = config.points();
    let mut records = Vec::with_capacity(points.len());
    let mut entries: Vec<ManifestEntry> = Vec::with_capacity(points.len());
    let write_manifest = |entries: &[ManifestEntry], complete: bool| -> Result<()> {
        let m = Manifest {
            code_version: code_version(),
            config_hash: hash.clone(),
            total_points: points.len(),
            complete,
            points: entries.to_vec(),
        };
        write_atomic(&sink.manifest_path(), &to_json_bytes(&m)?)
    };

    for (i, p) in points.iter().enumerate() {
        let file = p.file_name();
        if let Some(entry) = done.get(&file) {
            if let Some(rec) = sink.verified(entry)? {
                log::info!("[{}/{}] {p}: already complete", i + 1, points.len());
                entries.push(entry.clone());
                records.push(rec);
                continue;
            }
        }
        log::info!("[{}/{}] {p}: {} realizations", i + 1, points.len(), config.realizations);
        let params = config.params(p)?;
        let rec = run_point(
            &params,
            config.realizations,
            &config.schedule,
            config.base_seed,
            &config.observables,
            exec,
        )?;
        let bytes = to_json_bytes(&rec)?;
        write_atomic(&sink.dir.join(&file), &bytes)?;
        entries.push(ManifestEntry {
            point: *p,
            file,
            sha256: sha256_hex(&bytes),
        });
        write_manifest(&entries, false)?;
        records.push(rec);
    }

    let mut csv_bytes = Vec::new();
    write_sweep_csv(&records, &mut csv_bytes)?;
    write_atomic(&sink.dir.join(SWEEP_CSV), &csv_bytes)?;
    write_manifest(&entries, true)?;
    Ok(records)
}

/// Loads the records listed in a sweep directory's manifest.
pub fn load_sweep(dir: &Path) -> Result<Vec<ObservableRecord>> {
    let sink = ResultSink::new(dir, true);
    let m = sink
        .read_manifest()?
        .ok_or_else(|| Error::Data(format!("no {MANIFEST_FILE} in {}", dir.display())))?;
    m.points
        .iter()
        .map(|e| {
            sink.verified(e)?
                .ok_or_else(|| Error::Data(format!("{} is missing or corrupt", e.file)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> Schedule {
        Schedule {
            dt: 2.0,
            n_steps: 20,
            record_last: 5,
        }
    }

    fn small_config() -> SweepConfig {
        SweepConfig {
            gamma: vec![-0.5],
            w: vec![1.0, 4.0],
            l: vec![8, 12],
            j: 1.0,
            boundary: Boundary::Open,
            realizations: 3,
            schedule: short(),
            base_seed: 11,
            observables: ObservableFlags::all(),
        }
    }

    #[test]
    fn clean_realizations_have_zero_spread() {
        let p = ModelParams::new(1.0, -0.5, 0.0, 16, Boundary::Periodic).unwrap();
        let rec = run_point(&p, 2, &short(), 1, &ObservableFlags::all(), Execution::Sequential).unwrap();
        assert!(rec.s_half.std_err.abs() < 1e-12);
        assert_eq!(rec.realizations_completed, 2);
        let one = run_point(&p, 1, &short(), 1, &ObservableFlags::default(), Execution::Sequential).unwrap();
        assert_eq!(one.s_half.std_err, 0.0);
        assert_eq!(one.s_half.mean, rec.s_half.mean);
    }

    #[test]
    fn record_shapes_follow_flags() {
        let p = ModelParams::new(1.0, -0.5, 2.0, 10, Boundary::Open).unwrap();
        let rec = run_point(&p, 2, &short(), 3, &ObservableFlags::all(), Execution::Sequential).unwrap();
        assert_eq!(rec.entropy_profile.as_ref().unwrap().mean.len(), 9);
        assert_eq!(rec.density.as_ref().unwrap().mean.len(), 10);
        assert_eq!(rec.correlation.as_ref().unwrap().mean.len(), 5);
        let total: f64 = rec.density.as_ref().unwrap().mean.iter().sum();
        assert!((total - 5.0).abs() < 1e-8);
        let prof = &rec.entropy_profile.as_ref().unwrap().mean;
        assert!((prof[4] - rec.s_half.mean).abs() < 1e-12);
        let none = ObservableFlags {
            entropy_profile: false,
            density: false,
            correlation: false,
            mutual_information: false,
        };
        let bare = run_point(&p, 2, &short(), 3, &none, Execution::Sequential).unwrap();
        assert!(bare.density.is_none() && bare.mutual_information.is_none());
        assert_eq!(bare.s_half, rec.s_half);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = ModelParams::new(1.0, -0.5, 3.0, 12, Boundary::Open).unwrap();
        let f = ObservableFlags::all();
        let a = run_point(&p, 6, &short(), 5, &f, Execution::Sequential).unwrap();
        let b = run_point(&p, 6, &short(), 5, &f, Execution::ParallelWith(3)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn standard_error_shrinks_like_root_r() {
        let p = ModelParams::new(1.0, -0.5, 3.0, 8, Boundary::Open).unwrap();
        let s = Schedule {
            dt: 2.0,
            n_steps: 10,
            record_last: 2,
        };
        let f = ObservableFlags {
            entropy_profile: false,
            density: false,
            correlation: false,
            mutual_information: false,
        };
        let small = run_point(&p, 100, &s, 1, &f, Execution::Parallel).unwrap();
        let big = run_point(&p, 400, &s, 1, &f, Execution::Parallel).unwrap();
        let ratio = small.s_half.std_err / big.s_half.std_err;
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn empty_grid_gives_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig {
            w: vec![],
            ..small_config()
        };
        let recs = run_sweep(&cfg, &ResultSink::new(dir.path(), false), Execution::Sequential).unwrap();
        assert!(recs.is_empty());
        let m: Manifest = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert!(m.complete && m.points.is_empty() && m.total_points == 0);
        assert!(load_sweep(dir.path()).unwrap().is_empty());
    }

    fn snapshot(dir: &Path) -> BTreeMap<String, String> {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    sha256_hex(&fs::read(e.path()).unwrap()),
                )
            })
            .collect()
    }

    #[test]
    fn resume_recomputes_only_missing_points() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        run_sweep(&cfg, &ResultSink::new(dir.path(), false), Execution::Sequential).unwrap();
        let first = snapshot(dir.path());
        assert_eq!(first.len(), 4 + 2);
        assert!(first.contains_key("g-0.5_W4_L12.json"));

        let victim = dir.path().join("g-0.5_W1_L8.json");
        fs::remove_file(&victim).unwrap();
        let other = dir.path().join("g-0.5_W4_L12.json");
        let before = fs::metadata(&other).unwrap().modified().unwrap();
        run_sweep(&cfg, &ResultSink::new(dir.path(), true), Execution::Parallel).unwrap();
        assert_eq!(snapshot(dir.path()), first);
        assert_eq!(fs::metadata(&other).unwrap().modified().unwrap(), before);
    }

    #[test]
    fn resume_refuses_a_different_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig {
            l: vec![8],
            w: vec![1.0],
            ..small_config()
        };
        run_sweep(&cfg, &ResultSink::new(dir.path(), false), Execution::Sequential).unwrap();
        let other = SweepConfig { base_seed: 12, ..cfg };
        assert!(run_sweep(&other, &ResultSink::new(dir.path(), true), Execution::Sequential).is_err());
    }

    #[test]
    fn corrupted_point_is_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig {
            l: vec![8],
            ..small_config()
        };
        run_sweep(&cfg, &ResultSink::new(dir.path(), false), Execution::Sequential).unwrap();
        let first = snapshot(dir.path());
        fs::write(dir.path().join("g-0.5_W1_L8.json"), b"{}").unwrap();
        run_sweep(&cfg, &ResultSink::new(dir.path(), true), Execution::Sequential).unwrap();
        assert_eq!(snapshot(dir.path()), first);
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let recs = run_sweep(
            &small_config(),
            &ResultSink::new(dir.path(), false),
            Execution::Sequential,
        )
        .unwrap();
        let text = fs::read_to_string(dir.path().join(SWEEP_CSV)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + recs.len());
        assert!(lines[0].starts_with("gamma,W,L,realizations,S_half,S_half_err"));
        let back = crate::collapse::CollapseDataset::read_csv(text.as_bytes(), None).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back.rows()[0].y, recs[0].s_half.mean);
    }

    #[test]
    fn zero_realizations_rejected() {
        let p = ModelParams::new(1.0, -0.5, 3.0, 8, Boundary::Open).unwrap();
        assert!(run_point(&p, 0, &short(), 1, &ObservableFlags::default(), Execution::Sequential).is_err());
        let cfg = SweepConfig {
            l: vec![7],
            ..small_config()
        };
        assert!(cfg.validate().is_err());
    }
}
