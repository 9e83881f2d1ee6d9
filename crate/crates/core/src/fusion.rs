//! Two-stage cascaded fusion network.
//!
//! Stage 1 maps the previous final estimate plus a radar measurement
//! `[p̂̂x, p̂̂y, r_2d, v_D]` to an initial estimate. Stage 2 maps an initial
//! estimate plus the IMU distance increment `[p̂x, p̂y, d_imu]` to the final
//! estimate. Inference runs once per IMU sample; a stage-1 output is used by
//! the next IMU sample only, otherwise the previous final estimate stands in.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RangeProjection;
use crate::imu::{self, ImuState};
use crate::nn::{self, Dataset, EpochRecord, Mlp, TrainConfig, TrainedMlp};
use crate::sim::substream;
use crate::types::{
    check_sorted, interpolate_truth, Event, GroundTruthSample, ImuMeasurement, InitialState,
    IsacMeasurement, Pose2D, Timestamp,
};

pub const STAGE1_LAYERS: [usize; 4] = [4, 32, 16, 2];
pub const STAGE2_LAYERS: [usize; 4] = [3, 32, 16, 2];
pub const MODEL_CONTAINER_VERSION: u32 = 1;

const TEACHER_NOISE_STREAM: u64 = 5;
const INIT_STREAM: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Input {
    pub prev_final: Pose2D,
    /// Range projected onto the target plane.
    pub r: f64,
    pub v_d: f64,
}

impl Stage1Input {
    pub fn features(&self) -> [f64; 4] {
        [self.prev_final.x, self.prev_final.y, self.r, self.v_d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage2Input {
    pub initial_estimate: Pose2D,
    pub d_imu: f64,
}

impl Stage2Input {
    pub fn features(&self) -> [f64; 3] {
        [self.initial_estimate.x, self.initial_estimate.y, self.d_imu]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionEstimate {
    pub t: Timestamp,
    pub final_position: Pose2D,
    pub stage1_used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherForcing {
    /// Std of Gaussian noise added to teacher-forced previous positions;
    /// 0 disables injection.
    pub prev_noise_std: f64,
    pub rng_seed: u64,
}

impl TeacherForcing {
    pub const DEFAULT_NOISE_STD: f64 = 0.02;
}

/// Training rows for the two stages plus the radar-only baseline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FusionDatasets {
    pub stage1: Dataset,
    pub stage2: Dataset,
    /// Stage-1 style rows whose previous position is the truth at the
    /// preceding radar sample.
    pub isac_only: Dataset,
}

impl FusionDatasets {
    pub fn extend(&mut self, other: FusionDatasets) {
        for (a, b) in [
            (&mut self.stage1, other.stage1),
            (&mut self.stage2, other.stage2),
            (&mut self.isac_only, other.isac_only),
        ] {
            a.inputs.extend(b.inputs);
            a.targets.extend(b.targets);
        }
    }
}

/// Builds teacher-forced training rows from one recorded run.
///
/// Previous positions come from the truth at the instant the recurrent
/// estimate would have been produced during inference: the last IMU sample
/// before the radar sample for stage 1, and for stage 2 the radar sample
/// consumed by this IMU sample if there is one, else the previous IMU
/// sample. Samples outside the truth span are skipped.
///
/// Teacher noise perturbs only the previous-position inputs of stage-1 and
/// radar-only rows; stage-2 initial estimates stay exact so that stage 2
/// does not learn to pull estimates toward dense regions of the route.
pub fn build_training_set(
    isac: &[IsacMeasurement],
    imu_stream: &[ImuMeasurement],
    truth: &[GroundTruthSample],
    initial: &InitialState,
    projection: &RangeProjection,
    forcing: &TeacherForcing,
) -> Result<FusionDatasets> {
    check_sorted("isac", isac, |m| m.t.0)?;
    check_sorted("imu", imu_stream, |m| m.t.0)?;
    check_sorted("truth", truth, |s| s.t.0)?;
    let mut rng = substream(forcing.rng_seed, TEACHER_NOISE_STREAM, 0);
    let std = forcing.prev_noise_std;
    let mut perturb = |p: Pose2D| -> Pose2D {
        if std > 0.0 {
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            Pose2D::new(p.x + std * a, p.y + std * b)
        } else {
            p
        }
    };
    let truth_or_start = |t: f64| -> Pose2D {
        if t <= initial.t0 {
            initial.pose
        } else {
            interpolate_truth(truth, t).unwrap_or(initial.pose)
        }
    };

    let mut out = FusionDatasets::default();

    // Stage 1 and the radar-only baseline.
    let mut prev_isac_t = initial.t0;
    for m in isac {
        let t = m.t.0;
        if t < initial.t0 {
            continue;
        }
        let Some(target) = interpolate_truth(truth, t) else {
            continue;
        };
        let r = projection.project(m.range_3d)?;
        let last_imu = imu_stream.partition_point(|s| s.t.0 <= t);
        let prev_t = if last_imu == 0 {
            initial.t0
        } else {
            imu_stream[last_imu - 1].t.0.max(initial.t0)
        };
        let row = Stage1Input {
            prev_final: perturb(truth_or_start(prev_t)),
            r,
            v_d: m.doppler_velocity,
        };
        out.stage1
            .push(row.features().to_vec(), vec![target.x, target.y]);
        let row = Stage1Input {
            prev_final: perturb(truth_or_start(prev_isac_t)),
            ..row
        };
        out.isac_only
            .push(row.features().to_vec(), vec![target.x, target.y]);
        prev_isac_t = t;
    }

    // Stage 2.
    let mut state = imu_state(initial);
    let mut prev_t = initial.t0;
    let mut next_isac = 0;
    for m in imu_stream {
        let t = m.t.0;
        if t <= initial.t0 {
            continue;
        }
        let (next, inc) = imu::step(state, m)?;
        state = next;
        // Radar samples in [prev_t, t) were fused before this IMU sample.
        let mut fresh = None;
        while next_isac < isac.len() && isac[next_isac].t.0 < t {
            if isac[next_isac].t.0 >= prev_t {
                fresh = Some(isac[next_isac].t.0);
            }
            next_isac += 1;
        }
        let from_t = fresh.unwrap_or(prev_t);
        prev_t = t;
        let Some(target) = interpolate_truth(truth, t) else {
            continue;
        };
        let row = Stage2Input {
            initial_estimate: truth_or_start(from_t),
            d_imu: inc.d_imu,
        };
        out.stage2
            .push(row.features().to_vec(), vec![target.x, target.y]);
    }

    if out.stage1.is_empty() || out.stage2.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub stage1: TrainedMlp,
    pub stage2: TrainedMlp,
    /// Stage-1 shaped network for radar-only positioning.
    pub isac_only: TrainedMlp,
    pub initial: InitialState,
    pub projection: RangeProjection,
}

#[derive(Debug, Clone)]
pub struct FusionTraining {
    pub model: FusionModel,
    pub stage1_history: Vec<EpochRecord>,
    pub stage2_history: Vec<EpochRecord>,
    pub isac_only_history: Vec<EpochRecord>,
}

/// Trains the three networks independently with seeded initialization.
pub fn train_fusion(
    data: &FusionDatasets,
    cfg: &TrainConfig,
    initial: InitialState,
    projection: RangeProjection,
) -> Result<FusionTraining> {
    let fit = |layers: &[usize], set: &Dataset, which: u64, name: &'static str| {
        if set.is_empty() {
            return Err(Error::Empty(name));
        }
        let net = Mlp::new(layers, &mut substream(cfg.rng_seed, INIT_STREAM, which))?;
        let stage_cfg = TrainConfig {
            rng_seed: cfg.rng_seed.wrapping_add(which),
            ..*cfg
        };
        let out = nn::train(net, set, &stage_cfg)?;
        log::info!(
            "{name}: best epoch {} of {}, validation mse {:.3e}",
            out.best_epoch,
            out.history.len() - 1,
            out.history[out.best_epoch].validation_loss
        );
        Ok(out)
    };
    let s1 = fit(&STAGE1_LAYERS, &data.stage1, 1, "stage-1 dataset")?;
    let s2 = fit(&STAGE2_LAYERS, &data.stage2, 2, "stage-2 dataset")?;
    let s0 = fit(&STAGE1_LAYERS, &data.isac_only, 3, "radar-only dataset")?;
    Ok(FusionTraining {
        model: FusionModel {
            stage1: s1.model,
            stage2: s2.model,
            isac_only: s0.model,
            initial,
            projection,
        },
        stage1_history: s1.history,
        stage2_history: s2.history,
        isac_only_history: s0.history,
    })
}

fn imu_state(initial: &InitialState) -> ImuState {
    ImuState::new(initial.heading, 0.0, Timestamp(initial.t0))
}

fn predict_pose(net: &TrainedMlp, x: &[f64]) -> Result<Pose2D> {
    let y = net.predict(x)?;
    Ok(Pose2D::new(y[0], y[1]))
}

fn check_origin(t: f64, initial: &InitialState) -> Result<()> {
    if t < initial.t0 {
        return Err(Error::BeforeOrigin {
            t,
            origin: initial.t0,
        });
    }
    Ok(())
}

/// Runs the cascade over a merged event stream; one estimate per IMU event.
pub fn infer(model: &FusionModel, events: &[Event]) -> Result<Vec<FusionEstimate>> {
    let mut prev_final = model.initial.pose;
    let mut state = imu_state(&model.initial);
    let mut fresh: Option<Pose2D> = None;
    let mut out = Vec::new();
    for ev in events {
        check_origin(ev.t(), &model.initial)?;
        match ev {
            Event::Isac(m) => {
                let input = Stage1Input {
                    prev_final,
                    r: model.projection.project(m.range_3d)?,
                    v_d: m.doppler_velocity,
                };
                fresh = Some(predict_pose(&model.stage1, &input.features())?);
            }
            Event::Imu(m) => {
                let (next, inc) = imu::step(state, m)?;
                state = next;
                let stage1_used = fresh.is_some();
                let input = Stage2Input {
                    initial_estimate: fresh.take().unwrap_or(prev_final),
                    d_imu: inc.d_imu,
                };
                prev_final = predict_pose(&model.stage2, &input.features())?;
                out.push(FusionEstimate {
                    t: m.t,
                    final_position: prev_final,
                    stage1_used,
                });
            }
        }
    }
    Ok(out)
}

/// Radar-only positioning: a stage-1 shaped network fed its own previous
/// output, one estimate per radar sample.
pub fn infer_isac_only(
    net: &TrainedMlp,
    isac: &[IsacMeasurement],
    initial: &InitialState,
    projection: &RangeProjection,
) -> Result<Vec<(f64, Pose2D)>> {
    check_sorted("isac", isac, |m| m.t.0)?;
    let mut prev = initial.pose;
    isac.iter()
        .map(|m| {
            check_origin(m.t.0, initial)?;
            let input = Stage1Input {
                prev_final: prev,
                r: projection.project(m.range_3d)?,
                v_d: m.doppler_velocity,
            };
            prev = predict_pose(net, &input.features())?;
            Ok((m.t.0, prev))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelContainer {
    version: u32,
    initial: InitialState,
    projection: RangeProjection,
    stage1: nn::ModelDoc,
    stage2: nn::ModelDoc,
    isac_only: nn::ModelDoc,
}

impl FusionModel {
    pub fn to_json(&self) -> String {
        let doc = ModelContainer {
            version: MODEL_CONTAINER_VERSION,
            initial: self.initial,
            projection: self.projection,
            stage1: nn::ModelDoc::from_model(&self.stage1),
            stage2: nn::ModelDoc::from_model(&self.stage2),
            isac_only: nn::ModelDoc::from_model(&self.isac_only),
        };
        serde_json::to_string_pretty(&doc).expect("fusion model serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let doc: ModelContainer =
            serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        if doc.version != MODEL_CONTAINER_VERSION {
            return Err(Error::UnsupportedVersion {
                kind: "fusion model",
                found: doc.version,
            });
        }
        let model = FusionModel {
            stage1: doc.stage1.into_model()?,
            stage2: doc.stage2.into_model()?,
            isac_only: doc.isac_only.into_model()?,
            initial: doc.initial,
            projection: doc.projection,
        };
        for (net, want, name) in [
            (&model.stage1, &STAGE1_LAYERS[..], "stage1"),
            (&model.stage2, &STAGE2_LAYERS[..], "stage2"),
            (&model.isac_only, &STAGE1_LAYERS[..], "isac_only"),
        ] {
            if net.net.layer_sizes() != want {
                return Err(Error::format(
                    origin,
                    format!(
                        "{name} layers {:?}, expected {want:?}",
                        net.net.layer_sizes()
                    ),
                ));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

pub const ESTIMATE_HEADER: [&str; 4] = ["t", "px", "py", "stage1_used"];

pub fn write_fusion_estimates(path: &Path, est: &[FusionEstimate]) -> Result<()> {
    crate::io::write_csv(
        path,
        &ESTIMATE_HEADER,
        est.iter().map(|e| {
            [
                e.t.0.to_string(),
                e.final_position.x.to_string(),
                e.final_position.y.to_string(),
                u8::from(e.stage1_used).to_string(),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::merge_streams;

    fn gt(t: f64, x: f64, y: f64) -> GroundTruthSample {
        GroundTruthSample {
            t: Timestamp(t),
            position: Pose2D::new(x, y),
        }
    }

    fn isac(t: f64, r: f64) -> IsacMeasurement {
        IsacMeasurement {
            t: Timestamp(t),
            range_3d: r,
            doppler_velocity: 0.25,
        }
    }

    fn still_imu(t: f64) -> ImuMeasurement {
        ImuMeasurement {
            t: Timestamp(t),
            accel_body: [0.0; 3],
            gyro: [0.0; 3],
        }
    }

    const FLAT: RangeProjection = RangeProjection {
        delta_h: 0.0,
        tolerance: 0.0,
    };

    fn start() -> InitialState {
        InitialState {
            t0: 0.0,
            pose: Pose2D::new(0.0, 0.0),
            heading: 0.0,
        }
    }

    /// Toy stream: truth moves 1 m/s along x; radar at 0.03 and 0.05,
    /// IMU at 0.02, 0.04, 0.06.
    #[test]
    fn toy_rows_match_hand_extraction() {
        let truth: Vec<_> = (0..=10)
            .map(|k| gt(k as f64 * 0.01, k as f64 * 0.01, 0.0))
            .collect();
        let radar = [isac(0.03, 1.5), isac(0.05, 2.5)];
        let imu_s = [still_imu(0.02), still_imu(0.04), still_imu(0.06)];
        let d = build_training_set(
            &radar,
            &imu_s,
            &truth,
            &start(),
            &FLAT,
            &TeacherForcing::default(),
        )
        .unwrap();

        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert_eq!(d.stage1.len(), 2);
        assert!(close(&d.stage1.inputs[0], &[0.02, 0.0, 1.5, 0.25]));
        assert!(close(&d.stage1.targets[0], &[0.03, 0.0]));
        assert!(close(&d.stage1.inputs[1], &[0.04, 0.0, 2.5, 0.25]));
        assert!(close(&d.stage1.targets[1], &[0.05, 0.0]));

        assert!(close(&d.isac_only.inputs[0], &[0.0, 0.0, 1.5, 0.25]));
        assert!(close(&d.isac_only.inputs[1], &[0.03, 0.0, 2.5, 0.25]));

        assert_eq!(d.stage2.len(), 3);
        // IMU 0.02: no radar yet, previous is the start.
        assert!(close(&d.stage2.inputs[0], &[0.0, 0.0, 0.0]));
        assert!(close(&d.stage2.targets[0], &[0.02, 0.0]));
        // IMU 0.04 consumes radar 0.03; IMU 0.06 consumes radar 0.05.
        assert!(close(&d.stage2.inputs[1], &[0.03, 0.0, 0.0]));
        assert!(close(&d.stage2.inputs[2], &[0.05, 0.0, 0.0]));
        assert!(close(&d.stage2.targets[2], &[0.06, 0.0]));
    }

    #[test]
    fn stationary_targets_constant() {
        let truth: Vec<_> = (0..=100).map(|k| gt(k as f64 * 0.01, 1.0, 2.0)).collect();
        let radar: Vec<_> = (1..30).map(|k| isac(k as f64 / 33.0, 3.0)).collect();
        let imu_s: Vec<_> = (1..50).map(|k| still_imu(k as f64 / 50.0)).collect();
        let init = InitialState::from_truth(&truth).unwrap();
        let d = build_training_set(
            &radar,
            &imu_s,
            &truth,
            &init,
            &FLAT,
            &TeacherForcing::default(),
        )
        .unwrap();
        assert_eq!(d.stage1.len(), radar.len());
        assert_eq!(d.stage2.len(), imu_s.len());
        for y in d.stage1.targets.iter().chain(&d.stage2.targets) {
            assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_injection_perturbs_inputs_only() {
        let truth: Vec<_> = (0..=100).map(|k| gt(k as f64 * 0.01, 1.0, 2.0)).collect();
        let radar: Vec<_> = (1..30).map(|k| isac(k as f64 / 33.0, 3.0)).collect();
        let imu_s: Vec<_> = (1..50).map(|k| still_imu(k as f64 / 50.0)).collect();
        let init = InitialState::from_truth(&truth).unwrap();
        let forcing = TeacherForcing {
            prev_noise_std: TeacherForcing::DEFAULT_NOISE_STD,
            rng_seed: 3,
        };
        let d = build_training_set(&radar, &imu_s, &truth, &init, &FLAT, &forcing).unwrap();
        let rms = |ds: &Dataset, col: usize| {
            let s: f64 = ds.inputs.iter().map(|x| (x[col] - 1.0).powi(2)).sum();
            (s / ds.len() as f64).sqrt()
        };
        let (s1, s2) = (rms(&d.stage1, 0), rms(&d.stage2, 0));
        assert!(s1 > 0.005 && s1 < 0.05, "{s1}");
        assert!(s2 < 1e-12, "{s2}");
        assert!(d.stage1.targets.iter().all(|y| y == &vec![1.0, 2.0]));
        assert!(d.stage2.targets.iter().all(|y| y == &vec![1.0, 2.0]));
    }

    #[test]
    fn no_overlap_rejected() {
        let truth = vec![gt(10.0, 0.0, 0.0), gt(11.0, 0.0, 0.0)];
        let init = InitialState::from_truth(&truth).unwrap();
        let err = build_training_set(
            &[isac(0.5, 1.0)],
            &[still_imu(0.5)],
            &truth,
            &init,
            &FLAT,
            &TeacherForcing::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoOverlap));
    }

    /// Stage 2 returns its position input, stage 1 returns `(r, 0)`.
    fn passthrough_model() -> FusionModel {
        let mut s1 = Mlp::zeros(&[4, 2]).unwrap();
        s1.params_mut()[2] = 1.0; // out0 <- r
        let mut s2 = Mlp::zeros(&[3, 2]).unwrap();
        s2.params_mut()[0] = 1.0;
        s2.params_mut()[4] = 1.0;
        let wrap = |net| TrainedMlp {
            net,
            input_norm: nn::Standardizer::identity(0),
            target_norm: nn::Standardizer::identity(0),
        };
        let fix = |mut m: TrainedMlp, i, o| {
            m.input_norm = nn::Standardizer::identity(i);
            m.target_norm = nn::Standardizer::identity(o);
            m
        };
        FusionModel {
            stage1: fix(wrap(s1.clone()), 4, 2),
            stage2: fix(wrap(s2), 3, 2),
            isac_only: fix(wrap(s1), 4, 2),
            initial: InitialState {
                t0: 0.0,
                pose: Pose2D::new(-7.0, 0.0),
                heading: 0.0,
            },
            projection: FLAT,
        }
    }

    #[test]
    fn branch_trace() {
        let m = passthrough_model();
        let ev = merge_streams(
            &[isac(0.03, 1.5)],
            &[still_imu(0.02), still_imu(0.04), still_imu(0.06)],
        )
        .unwrap();
        let est = infer(&m, &ev).unwrap();
        let used: Vec<_> = est.iter().map(|e| e.stage1_used).collect();
        assert_eq!(used, vec![false, true, false]);
        assert_eq!(est[0].final_position, Pose2D::new(-7.0, 0.0));
        assert_eq!(est[1].final_position, Pose2D::new(1.5, 0.0));
        // The cached stage-1 output is consumed once; afterwards the
        // previous final estimate carries over.
        assert_eq!(est[2].final_position, Pose2D::new(1.5, 0.0));
    }

    #[test]
    fn alternating_radar_alternates_branch() {
        let m = passthrough_model();
        let imu_s: Vec<_> = (1..=20).map(|k| still_imu(k as f64 * 0.02)).collect();
        let radar: Vec<_> = (0..10).map(|k| isac(0.03 + k as f64 * 0.04, 2.0)).collect();
        let est = infer(&m, &merge_streams(&radar, &imu_s).unwrap()).unwrap();
        assert_eq!(est.len(), 20);
        for (k, e) in est.iter().enumerate() {
            assert_eq!(e.stage1_used, k % 2 == 1, "imu {k}");
        }
    }

    #[test]
    fn totality_without_radar() {
        let m = passthrough_model();
        let imu_s: Vec<_> = (1..=50).map(|k| still_imu(k as f64 * 0.02)).collect();
        let est = infer(&m, &merge_streams(&[], &imu_s).unwrap()).unwrap();
        assert_eq!(est.len(), 50);
        assert!(est.iter().all(|e| !e.stage1_used));
    }

    #[test]
    fn before_origin_rejected() {
        let mut m = passthrough_model();
        m.initial.t0 = 1.0;
        let err = infer(&m, &[Event::Imu(still_imu(0.5))]).unwrap_err();
        assert!(matches!(err, Error::BeforeOrigin { .. }));
    }

    #[test]
    fn isac_only_starts_from_initial_pose() {
        let m = passthrough_model();
        let mut net = m.isac_only.clone();
        // out0 <- prev.x + r
        net.net.params_mut()[0] = 1.0;
        let out =
            infer_isac_only(&net, &[isac(0.03, 1.0), isac(0.06, 1.0)], &m.initial, &FLAT).unwrap();
        assert_eq!(out[0].1, Pose2D::new(-6.0, 0.0));
        assert_eq!(out[1].1, Pose2D::new(-5.0, 0.0));
    }

    #[test]
    fn container_round_trip() {
        let mut rng = substream(1, 0, 0);
        let mk = |sizes: &[usize], rng: &mut rand_chacha::ChaCha8Rng| TrainedMlp {
            net: Mlp::new(sizes, rng).unwrap(),
            input_norm: nn::Standardizer::identity(sizes[0]),
            target_norm: nn::Standardizer::identity(2),
        };
        let m = FusionModel {
            stage1: mk(&STAGE1_LAYERS, &mut rng),
            stage2: mk(&STAGE2_LAYERS, &mut rng),
            isac_only: mk(&STAGE1_LAYERS, &mut rng),
            initial: start(),
            projection: RangeProjection {
                delta_h: 1.0,
                tolerance: 0.75,
            },
        };
        let back = FusionModel::from_json(&m.to_json(), Path::new("m.json")).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), m.to_json());

        let wrong = passthrough_model().to_json();
        assert!(FusionModel::from_json(&wrong, Path::new("m.json")).is_err());
    }
}
