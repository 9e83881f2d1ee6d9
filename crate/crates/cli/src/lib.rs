//! Subcommands behind the `isac-fusion` binary.
//!
//! Each command reads its inputs from files, writes its outputs atomically
//! into an output directory and returns a summary value for the caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use isac_fusion::eval::{self, align_and_error, Comparison, ErrorSeries, SummaryRow};
use isac_fusion::fusion::{infer, write_fusion_estimates, FusionModel, FusionTraining};
use isac_fusion::io::{write_atomic, write_csv, write_estimates};
use isac_fusion::merge_streams;
use isac_fusion::nn::{EpochRecord, TrainConfig};
use isac_fusion::pipeline::{
    aggregate, estimate, run_seed, train_model, BenchmarkConfig, EkfConfig, Measurements, Method,
    SeedOutcome, REPORT_FILE,
};
use isac_fusion::sim::{run_scenario, ScenarioConfig, TrajectorySpec};

/// Environment variable holding the default output root.
pub const OUT_ROOT_ENV: &str = "ISAC_FUSION_OUT";
/// Snapshot of the scenario a measurement directory was simulated with.
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const MODEL_FILE: &str = "model.json";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TEXT_REPORT_FILE: &str = "report.txt";
pub const BENCHMARK_FILE: &str = "benchmark.toml";

pub const LOSS_HEADER: [&str; 4] = ["network", "epoch", "train_loss", "validation_loss"];
pub const COMPARE_HEADER: [&str; 5] = ["seed", "method", "average_error", "p90", "sample_count"];

/// Label used in the seed column for rows averaged over seeds.
pub const MEAN_ROW: &str = "mean";

/// `explicit` if given, else `<$ISAC_FUSION_OUT>/<command>`, else
/// `runs/<command>`.
pub fn output_dir(explicit: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(command)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    let cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Scenario snapshot stored next to the measurements, or the defaults when
/// the directory has none.
fn scenario_of(data: &Path) -> Result<ScenarioConfig> {
    let p = data.join(SCENARIO_FILE);
    load_scenario(p.exists().then_some(p.as_path()))
}

/// Route used when no trajectory file is given: the benchmark route at a
/// constant cruise speed.
pub fn default_trajectory() -> TrajectorySpec {
    let b = BenchmarkConfig::default();
    TrajectorySpec {
        waypoints: b.route,
        speed_profile: vec![0.5 * (b.speed_range[0] + b.speed_range[1])],
        dwell: vec![b.dwell],
        ramp_accel: Some(b.ramp_accel),
    }
}

/// Simulates one run and writes `isac.csv`, `imu.csv`, `truth.csv`,
/// `report.toml` and the effective `scenario.toml` into `out`.
pub fn cmd_simulate(
    config: Option<&Path>,
    trajectory: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<isac_fusion::sim::RunReport> {
    let mut cfg = load_scenario(config)?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let spec = match trajectory {
        Some(p) => TrajectorySpec::load(p)?,
        None => default_trajectory(),
    };
    let run = run_scenario(&spec, &cfg)?;
    create_dir(out)?;
    Measurements {
        isac: run.isac,
        imu: run.imu,
        truth: run.truth,
    }
    .save(out)?;
    write_atomic(
        &out.join(REPORT_FILE),
        run.report.to_toml_string().as_bytes(),
    )?;
    write_atomic(&out.join(SCENARIO_FILE), cfg.to_toml_string().as_bytes())?;
    log::info!(
        "simulated {:.1} s: {} of {} frames measured",
        run.report.duration_s,
        run.report.frames_with_measurement,
        run.report.frames
    );
    Ok(run.report)
}

/// Training options read by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub train: TrainConfig,
    /// Std of the noise added to teacher-forced previous positions.
    pub teacher_noise_std: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        TrainSettings {
            train: b.train,
            teacher_noise_std: b.teacher_noise_std,
        }
    }
}

impl TrainSettings {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let s: Self =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        s.train.validate()?;
        ensure!(
            s.teacher_noise_std >= 0.0 && s.teacher_noise_std.is_finite(),
            "teacher_noise_std must be non-negative"
        );
        Ok(s)
    }
}

/// Trains on one or more measurement directories and writes `model.json`
/// and `loss_history.csv` into `out`. The scenario snapshot of the first
/// directory sets the range projection.
pub fn cmd_train(
    data: &[PathBuf],
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<FusionTraining> {
    ensure!(
        !data.is_empty(),
        "train needs at least one measurement directory"
    );
    let mut settings = match config {
        Some(p) => TrainSettings::load(p)?,
        None => TrainSettings::default(),
    };
    if let Some(s) = seed {
        settings.train.rng_seed = s;
    }
    let scenario = scenario_of(&data[0])?;
    let runs = data
        .iter()
        .map(|d| Measurements::load(d))
        .collect::<isac_fusion::Result<Vec<_>>>()?;
    let trained = train_model(
        &runs,
        &scenario,
        &settings.train,
        settings.teacher_noise_std,
    )?;
    create_dir(out)?;
    trained.model.save(&out.join(MODEL_FILE))?;
    write_loss_history(&out.join(LOSS_FILE), &trained)?;
    log::info!(
        "trained for {}/{}/{} epochs",
        trained.stage1_history.len(),
        trained.stage2_history.len(),
        trained.isac_only_history.len()
    );
    Ok(trained)
}

/// One row per recorded epoch of each network.
pub fn write_loss_history(path: &Path, t: &FusionTraining) -> Result<()> {
    let rows: Vec<[String; 4]> = [
        ("stage1", &t.stage1_history),
        ("stage2", &t.stage2_history),
        ("isac_only", &t.isac_only_history),
    ]
    .into_iter()
    .flat_map(|(name, h): (&str, &Vec<EpochRecord>)| {
        h.iter().map(move |r| {
            [
                name.to_string(),
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.validation_loss.to_string(),
            ]
        })
    })
    .collect();
    write_csv(path, &LOSS_HEADER, rows)?;
    Ok(())
}

/// Runs one method over a measurement directory and writes
/// `estimates.csv` and `errors.csv` into `out`.
pub fn cmd_evaluate(
    data: &Path,
    method: Method,
    model: Option<&Path>,
    out: &Path,
) -> Result<SummaryRow> {
    if method.needs_model() && model.is_none() {
        bail!("method {method} needs a trained model (--model)");
    }
    let scenario = scenario_of(data)?;
    let run = Measurements::load(data)?;
    let model = model.map(FusionModel::load).transpose()?;
    create_dir(out)?;
    let est_path = out.join(ESTIMATES_FILE);
    let est = if method == Method::DnnFusion {
        let m = model.as_ref().expect("checked above");
        let full = infer(m, &merge_streams(&run.isac, &run.imu)?)?;
        write_fusion_estimates(&est_path, &full)?;
        full.iter().map(|e| (e.t.0, e.final_position)).collect()
    } else {
        let est = estimate(
            method,
            model.as_ref(),
            &run,
            &scenario,
            &BenchmarkConfig::default().ekf,
        )?;
        write_estimates(&est_path, &est)?;
        est
    };
    let series = align_and_error(&est, &run.truth)?;
    eval::write_error_series(&out.join(ERRORS_FILE), &series)?;
    Ok(SummaryRow::from_series(method.label(), &series)?)
}

/// Benchmark parameters a manifest may override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSettings {
    /// Range of per-segment speeds; defaults to the span of the
    /// trajectory's speed profile.
    pub speed_range: Option<[f64; 2]>,
    pub train_runs: usize,
    pub test_runs: usize,
    pub teacher_noise_std: f64,
    pub train: TrainConfig,
    pub ekf: EkfConfig,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        BenchmarkSettings {
            speed_range: None,
            train_runs: b.train_runs,
            test_runs: b.test_runs,
            teacher_noise_std: b.teacher_noise_std,
            train: b.train,
            ekf: b.ekf,
        }
    }
}

/// A reproducible comparison experiment. Relative paths resolve against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub scenario: PathBuf,
    pub trajectory: PathBuf,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub benchmark: BenchmarkSettings,
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut m: Self =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.scenario, &mut m.trajectory] {
            *p = base.join(&*p);
        }
        if let Some(o) = m.output.as_mut() {
            *o = base.join(&*o);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "manifest needs at least one seed");
        ensure!(
            !self.methods.is_empty(),
            "manifest needs at least one method"
        );
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        ensure!(
            seen.len() == self.methods.len(),
            "manifest lists a method twice"
        );
        Ok(())
    }

    /// Benchmark configuration built from the referenced scenario and
    /// trajectory files.
    pub fn benchmark(&self) -> Result<BenchmarkConfig> {
        let scenario = load_scenario(Some(&self.scenario))?;
        let spec = TrajectorySpec::load(&self.trajectory)?;
        spec.validate(&scenario)?;
        let s = &self.benchmark;
        let speed_range = s.speed_range.unwrap_or_else(|| {
            let lo = spec
                .speed_profile
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let hi = spec.speed_profile.iter().copied().fold(0.0, f64::max);
            [lo, hi]
        });
        ensure!(
            spec.dwell.iter().all(|d| *d == spec.dwell_at(0)),
            "benchmark trajectories need a uniform dwell"
        );
        let cfg = BenchmarkConfig {
            scenario,
            route: spec.waypoints.clone(),
            speed_range,
            dwell: spec.dwell_at(0),
            ramp_accel: spec
                .ramp_accel
                .unwrap_or(BenchmarkConfig::default().ramp_accel),
            train_runs: s.train_runs,
            test_runs: s.test_runs,
            train: s.train,
            teacher_noise_std: s.teacher_noise_std,
            ekf: s.ekf,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub seeds: Vec<SeedOutcome>,
    pub aggregate: Comparison,
    pub out: PathBuf,
}

/// Runs every seed of the manifest and writes `summary.csv` (per-seed rows
/// then seed-averaged rows), `cdf_<method>.csv` pooled over seeds,
/// `report.txt` and the effective `benchmark.toml`.
pub fn cmd_compare(manifest: &Path, out: Option<&Path>) -> Result<CompareOutcome> {
    let m = ExperimentManifest::load(manifest)?;
    let cfg = m.benchmark()?;
    let out = match out {
        Some(o) => o.to_path_buf(),
        None => m
            .output
            .clone()
            .unwrap_or_else(|| output_dir(None, "compare")),
    };
    let mut seeds = Vec::with_capacity(m.seeds.len());
    for &seed in &m.seeds {
        log::info!("seed {seed}");
        seeds.push(run_seed(&cfg, seed, &m.methods)?);
    }
    let agg = aggregate(&seeds)?;

    create_dir(&out)?;
    write_atomic(&out.join(BENCHMARK_FILE), cfg.to_toml_string().as_bytes())?;
    let row = |seed: String, r: &SummaryRow| {
        [
            seed,
            r.method.clone(),
            r.average_error.to_string(),
            r.p90.to_string(),
            r.sample_count.to_string(),
        ]
    };
    let rows: Vec<[String; 5]> = seeds
        .iter()
        .flat_map(|o| o.comparison.rows.iter().map(|r| row(o.seed.to_string(), r)))
        .chain(agg.rows.iter().map(|r| row(MEAN_ROW.to_string(), r)))
        .collect();
    write_csv(&out.join(SUMMARY_FILE), &COMPARE_HEADER, rows)?;

    for &method in &m.methods {
        let mut pooled = ErrorSeries::default();
        for o in &seeds {
            if let Some((_, s)) = o.series.iter().find(|(k, _)| *k == method) {
                pooled.samples.extend(s.samples.iter().copied());
                pooled.dropped += s.dropped;
            }
        }
        eval::write_cdf(&out.join(cdf_file(method)), &eval::cdf(&pooled))?;
    }

    let mut text = String::new();
    for o in &seeds {
        let _ = writeln!(text, "seed {}\n{}", o.seed, o.comparison.report());
    }
    let _ = writeln!(text, "mean over {} seeds\n{}", seeds.len(), agg.report());
    write_atomic(&out.join(TEXT_REPORT_FILE), text.as_bytes())?;

    Ok(CompareOutcome {
        seeds,
        aggregate: agg,
        out,
    })
}

pub fn cdf_file(method: Method) -> String {
    format!("cdf_{}.csv", method.label())
}

/// Fails unless the seed-averaged fusion error is below the radar-only
/// error.
pub fn check_ordering(agg: &Comparison) -> Result<()> {
    let get = |m: Method| {
        agg.row(m.label())
            .map(|r| r.average_error)
            .with_context(|| format!("ordering check needs method {m}"))
    };
    let (fusion, isac) = (get(Method::DnnFusion)?, get(Method::DnnIsac)?);
    ensure!(
        fusion < isac,
        "ordering violated: dnn-fusion mean {:.4} m is not below dnn-isac mean {:.4} m",
        fusion,
        isac
    );
    Ok(())
}
