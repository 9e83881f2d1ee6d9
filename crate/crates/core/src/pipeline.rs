//! End-to-end experiments: recorded measurement sets, the four positioning
//! methods, and the seeded multi-run benchmark.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ekf::{run_ekf, EkfNoise, EkfState};
use crate::error::{Error, Result};
use crate::eval::{align_and_error, Comparison, ErrorSeries, SummaryRow};
use crate::fusion::{
    build_training_set, infer, infer_isac_only, train_fusion, FusionDatasets, FusionModel,
    FusionTraining, TeacherForcing,
};
use crate::geometry::{geometric_position, RangeProjection};
use crate::io;
use crate::nn::TrainConfig;
use crate::sim::{run_scenario, substream, RunReport, ScenarioConfig, TrajectorySpec};
use crate::types::{
    merge_streams, GroundTruthSample, ImuMeasurement, InitialState, IsacMeasurement, Pose2D,
    SensorGeometry,
};

pub const ISAC_FILE: &str = "isac.csv";
pub const IMU_FILE: &str = "imu.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const REPORT_FILE: &str = "report.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DnnFusion,
    DnnIsac,
    EkfFusion,
    Geometric,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::DnnFusion,
        Method::DnnIsac,
        Method::EkfFusion,
        Method::Geometric,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::DnnFusion => "dnn-fusion",
            Method::DnnIsac => "dnn-isac",
            Method::EkfFusion => "ekf-fusion",
            Method::Geometric => "geometric",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Method::DnnFusion | Method::DnnIsac)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

/// The three recorded streams of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub isac: Vec<IsacMeasurement>,
    pub imu: Vec<ImuMeasurement>,
    pub truth: Vec<GroundTruthSample>,
}

impl Measurements {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_isac(&dir.join(ISAC_FILE), &self.isac)?;
        io::write_imu(&dir.join(IMU_FILE), &self.imu)?;
        io::write_truth(&dir.join(TRUTH_FILE), &self.truth)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Measurements {
            isac: io::read_isac(&dir.join(ISAC_FILE))?,
            imu: io::read_imu(&dir.join(IMU_FILE))?,
            truth: io::read_truth(&dir.join(TRUTH_FILE))?,
        })
    }
}

/// Settings of the model-based baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkfConfig {
    /// Acceleration noise behind `Q`; taken from the scenario IMU noise
    /// when absent.
    pub accel_std: Option<f64>,
    /// Standard deviation of radar range measurements (m).
    pub range_std: f64,
    /// Floor on the acceleration noise so `Q` never vanishes.
    pub min_accel_std: f64,
    /// Initial position and velocity variances (m², (m/s)²).
    pub initial_var: [f64; 2],
}

impl Default for EkfConfig {
    fn default() -> Self {
        EkfConfig {
            accel_std: None,
            range_std: 0.05,
            min_accel_std: 0.01,
            initial_var: [0.01, 0.1],
        }
    }
}

impl EkfConfig {
    pub fn noise(&self, scenario: &ScenarioConfig) -> Result<EkfNoise> {
        let sa = self
            .accel_std
            .unwrap_or(scenario.noise.accel_noise_std)
            .max(self.min_accel_std);
        EkfNoise::from_accel_std(sa, self.range_std * self.range_std)
    }

    /// Filter state at rest on `pose` with the configured variances.
    pub fn initial_state(&self, pose: Pose2D) -> Result<EkfState> {
        let [p, v] = self.initial_var;
        if !(p >= 0.0 && v >= 0.0 && p.is_finite() && v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial variances {p}, {v} must be finite and ≥ 0"
            )));
        }
        Ok(EkfState::new(
            Vector4::new(pose.x, pose.y, 0.0, 0.0),
            Matrix4::from_diagonal(&Vector4::new(p, p, v, v)),
        ))
    }
}

/// Range projection matching a scenario: its height difference, clamping
/// within one range bin.
pub fn projection_for(cfg: &ScenarioConfig) -> RangeProjection {
    RangeProjection {
        delta_h: cfg.sensor_geometry().delta_h(),
        tolerance: cfg.waveform.range_bin_width(),
    }
}

/// Position estimates of one method over a recorded run.
pub fn estimate(
    method: Method,
    model: Option<&FusionModel>,
    data: &Measurements,
    scenario: &ScenarioConfig,
    ekf: &EkfConfig,
) -> Result<Vec<(f64, Pose2D)>> {
    let geom: SensorGeometry = scenario.sensor_geometry();
    let projection = projection_for(scenario);
    let need_model = || {
        model.ok_or_else(|| Error::InvalidConfig(format!("method {method} needs a trained model")))
    };
    match method {
        Method::DnnFusion => {
            let events = merge_streams(&data.isac, &data.imu)?;
            Ok(infer(need_model()?, &events)?
                .into_iter()
                .map(|e| (e.t.0, e.final_position))
                .collect())
        }
        Method::DnnIsac => {
            let m = need_model()?;
            infer_isac_only(&m.isac_only, &data.isac, &m.initial, &m.projection)
        }
        Method::EkfFusion => {
            let start = InitialState::from_truth(&data.truth)?;
            let events = merge_streams(&data.isac, &data.imu)?;
            run_ekf(
                &events,
                &projection,
                geom.isac_position,
                &ekf.noise(scenario)?,
                ekf.initial_state(start.pose)?,
                &start,
            )
        }
        Method::Geometric => data
            .isac
            .iter()
            .map(|m| {
                Ok((
                    m.t.0,
                    geometric_position(projection.project(m.range_3d)?, &geom),
                ))
            })
            .collect(),
    }
}

/// Calibrated benchmark: an open route, driven once per run with
/// per-segment speeds drawn from the seed. Several runs train the networks,
/// held-out runs evaluate every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scenario: ScenarioConfig,
    pub route: Vec<Pose2D>,
    pub speed_range: [f64; 2],
    pub dwell: f64,
    pub ramp_accel: f64,
    pub train_runs: usize,
    pub test_runs: usize,
    pub train: TrainConfig,
    /// Std of the noise added to teacher-forced previous positions.
    pub teacher_noise_std: f64,
    pub ekf: EkfConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let mut scenario = ScenarioConfig::default();
        scenario.waveform.num_symbols_g = 32;
        scenario.noise.csi_noise_std = 18.0;
        scenario.noise.accel_bias = 0.003;
        scenario.radar.bootstrap_frames = 0;
        BenchmarkConfig {
            scenario,
            route: vec![
                Pose2D::new(0.3, 1.75),
                Pose2D::new(2.0, 0.3),
                Pose2D::new(2.9, 1.8),
                Pose2D::new(3.3, 3.2),
            ],
            speed_range: [0.3, 0.6],
            dwell: 0.0,
            ramp_accel: 0.5,
            train_runs: 24,
            test_runs: 2,
            train: TrainConfig::default(),
            teacher_noise_std: 0.1,
            ekf: EkfConfig {
                accel_std: Some(0.1),
                range_std: 0.3,
                initial_var: [1e-4, 1e-4],
                ..EkfConfig::default()
            },
        }
    }
}

/// Which family of runs a simulation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Train,
    Test,
}

impl RunKind {
    fn stream(self) -> u64 {
        match self {
            RunKind::Train => 0x7472,
            RunKind::Test => 0x7465,
        }
    }
}

impl BenchmarkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("benchmark config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.speed_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidConfig(
                "speed_range must satisfy 0 < low ≤ high".into(),
            ));
        }
        if self.route.len() < 2 {
            return Err(Error::InvalidConfig("route needs ≥ 2 waypoints".into()));
        }
        if self.train_runs == 0 || self.test_runs == 0 {
            return Err(Error::InvalidConfig(
                "train_runs and test_runs must be ≥ 1".into(),
            ));
        }
        self.train.validate()
    }

    /// The route with speeds drawn for run `index` of `kind`.
    pub fn trajectory(&self, seed: u64, kind: RunKind, index: usize) -> Result<TrajectorySpec> {
        self.validate()?;
        let [lo, hi] = self.speed_range;
        let mut rng = substream(seed, kind.stream(), 2 * index as u64);
        let speed_profile = (1..self.route.len())
            .map(|_| {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            })
            .collect();
        Ok(TrajectorySpec {
            waypoints: self.route.clone(),
            speed_profile,
            dwell: vec![self.dwell],
            ramp_accel: Some(self.ramp_accel),
        })
    }

    /// Scenario of run `index` of `kind`, with its own simulation seed.
    pub fn scenario_for(&self, seed: u64, kind: RunKind, index: usize) -> ScenarioConfig {
        let mut rng = substream(seed, kind.stream(), 2 * index as u64 + 1);
        ScenarioConfig {
            rng_seed: rng.random(),
            ..self.scenario.clone()
        }
    }

    pub fn simulate(
        &self,
        seed: u64,
        kind: RunKind,
        index: usize,
    ) -> Result<(Measurements, RunReport)> {
        let spec = self.trajectory(seed, kind, index)?;
        let out = run_scenario(&spec, &self.scenario_for(seed, kind, index))?;
        Ok((
            Measurements {
                isac: out.isac,
                imu: out.imu,
                truth: out.truth,
            },
            out.report,
        ))
    }

    pub fn runs(&self, seed: u64, kind: RunKind) -> Result<Vec<Measurements>> {
        let n = match kind {
            RunKind::Train => self.train_runs,
            RunKind::Test => self.test_runs,
        };
        (0..n)
            .map(|k| self.simulate(seed, kind, k).map(|(m, _)| m))
            .collect()
    }

    /// Trains the fusion networks on recorded runs.
    pub fn train_on(&self, runs: &[Measurements], seed: u64) -> Result<FusionTraining> {
        train_model(
            runs,
            &self.scenario,
            &TrainConfig {
                rng_seed: seed,
                ..self.train
            },
            self.teacher_noise_std,
        )
    }
}

/// Builds teacher-forced datasets from runs that share a start and trains
/// the cascade. The first run's start becomes the model's initial state.
pub fn train_model(
    runs: &[Measurements],
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    teacher_noise_std: f64,
) -> Result<FusionTraining> {
    let first = runs.first().ok_or(Error::Empty("training runs"))?;
    let initial = InitialState::from_truth(&first.truth)?;
    let projection = projection_for(scenario);
    let mut sets = FusionDatasets::default();
    for (k, run) in runs.iter().enumerate() {
        let start = InitialState::from_truth(&run.truth)?;
        sets.extend(build_training_set(
            &run.isac,
            &run.imu,
            &run.truth,
            &start,
            &projection,
            &TeacherForcing {
                prev_noise_std: teacher_noise_std,
                rng_seed: substream(cfg.rng_seed, TEACHER_RUN_STREAM, k as u64).random(),
            },
        )?);
    }
    train_fusion(&sets, cfg, initial, projection)
}

const TEACHER_RUN_STREAM: u64 = 0x6e6f;

/// Error series of every method, pooled over the held-out runs of a seed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub series: Vec<(Method, ErrorSeries)>,
    pub comparison: Comparison,
}

/// Errors of each method on each run, pooled per method.
pub fn evaluate_methods(
    methods: &[Method],
    model: Option<&FusionModel>,
    runs: &[Measurements],
    scenario: &ScenarioConfig,
    ekf: &EkfConfig,
) -> Result<Vec<(Method, ErrorSeries)>> {
    methods
        .iter()
        .map(|&m| {
            let mut pooled = ErrorSeries::default();
            for run in runs {
                let est = estimate(m, model, run, scenario, ekf)?;
                let s = align_and_error(&est, &run.truth)?;
                pooled.samples.extend(s.samples);
                pooled.dropped += s.dropped;
            }
            Ok((m, pooled))
        })
        .collect()
}

pub fn comparison_of(series: &[(Method, ErrorSeries)]) -> Result<Comparison> {
    Comparison::from_rows(
        series
            .iter()
            .map(|(m, s)| SummaryRow::from_series(m.label(), s))
            .collect::<Result<_>>()?,
    )
}

/// Train on the seed's training runs, evaluate on its test runs.
pub fn run_seed(cfg: &BenchmarkConfig, seed: u64, methods: &[Method]) -> Result<SeedOutcome> {
    let model = if methods.iter().any(|m| m.needs_model()) {
        let train = cfg.runs(seed, RunKind::Train)?;
        Some(cfg.train_on(&train, seed)?.model)
    } else {
        None
    };
    let test = cfg.runs(seed, RunKind::Test)?;
    let series = evaluate_methods(methods, model.as_ref(), &test, &cfg.scenario, &cfg.ekf)?;
    Ok(SeedOutcome {
        seed,
        comparison: comparison_of(&series)?,
        series,
    })
}

/// Per-method mean over seeds of the average error and p90; sample counts
/// are summed.
pub fn aggregate(outcomes: &[SeedOutcome]) -> Result<Comparison> {
    let first = outcomes.first().ok_or(Error::Empty("seed list"))?;
    let n = outcomes.len() as f64;
    let rows = first
        .comparison
        .rows
        .iter()
        .map(|r| {
            let mut row = SummaryRow {
                method: r.method.clone(),
                average_error: 0.0,
                p90: 0.0,
                sample_count: 0,
            };
            for o in outcomes {
                let x = o.comparison.row(&r.method).ok_or_else(|| {
                    Error::InvalidConfig(format!("seed {} lacks {}", o.seed, r.method))
                })?;
                row.average_error += x.average_error / n;
                row.p90 += x.p90 / n;
                row.sample_count += x.sample_count;
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Comparison::from_rows(rows)
}
