use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imu::rotate_to_body;
use crate::radar::{
    ClutterFilter, ComplexGrid, CsiMatrix, OfdmFrame, RadarProcessor, SPEED_OF_LIGHT,
};
use crate::types::{GroundTruthSample, ImuMeasurement, IsacMeasurement, SensorGeometry, Timestamp};

use super::config::{ScenarioConfig, TrajectorySpec};
use super::trajectory::{generate_truth, sample_times, Trajectory};
use super::{streams, substream};

/// IMU samples at `k / imu_rate`, `k ≥ 1`.
///
/// Each sample reports the mean global acceleration over the preceding
/// period, expressed in the body frame by inverting the body-to-global
/// rotation at the sample's heading, and the mean heading rate over the
/// period. With zero noise, integrating the stream reproduces the truth.
pub fn sample_imu(truth: &Trajectory, cfg: &ScenarioConfig) -> Vec<ImuMeasurement> {
    let noise = cfg.noise;
    let mut rng = substream(cfg.rng_seed, streams::IMU, 0);
    let mut gauss = |std: f64| -> f64 {
        if std > 0.0 {
            std * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    };

    let dt = 1.0 / cfg.imu_rate;
    let mut prev = truth.state_at(0.0);
    sample_times(truth.duration(), cfg.imu_rate, false)
        .map(|t| {
            let s = truth.state_at(t);
            let a = [
                (s.velocity[0] - prev.velocity[0]) / dt,
                (s.velocity[1] - prev.velocity[1]) / dt,
            ];
            let yaw_rate = (s.heading - prev.heading) / dt;
            prev = s;
            let body = rotate_to_body(a, s.heading);
            ImuMeasurement {
                t: Timestamp(t),
                accel_body: [
                    body[0] + noise.accel_bias + gauss(noise.accel_noise_std),
                    body[1] + noise.accel_bias + gauss(noise.accel_noise_std),
                    gauss(noise.accel_noise_std),
                ],
                gyro: [
                    gauss(noise.gyro_noise_std),
                    gauss(noise.gyro_noise_std),
                    yaw_rate + gauss(noise.gyro_noise_std),
                ],
            }
        })
        .collect()
}

/// Slant range and approach speed (positive closing) of the target.
pub fn target_range_rate(
    geom: &SensorGeometry,
    position: [f64; 2],
    velocity: [f64; 2],
) -> (f64, f64) {
    let dx = position[0] - geom.isac_position.x;
    let dy = position[1] - geom.isac_position.y;
    let dh = geom.delta_h();
    let r = (dx * dx + dy * dy + dh * dh).sqrt();
    let range_rate = (dx * velocity[0] + dy * velocity[1]) / r;
    (r, -range_rate)
}

/// Point-scatterer channel model for one scenario.
///
/// `Z[g,h] = b·exp(−j2π·h·Δf·τ)·exp(j2π·g·T·f_D) + clutter + noise` with
/// `b = exp(−j2π·f_c·τ)`, `τ = 2r/c` and `f_D = 2·v·f_c/c`. Clutter is a
/// fixed set of zero-Doppler scatterers drawn once from the seed.
#[derive(Debug, Clone)]
pub struct CsiSynthesizer {
    cfg: ScenarioConfig,
    clutter: Vec<Complex64>,
    pilots: Option<ComplexGrid>,
}

impl CsiSynthesizer {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let wf = &cfg.waveform;
        let h = wf.subcarriers();
        let mut clutter = vec![Complex64::new(0.0, 0.0); h];
        let noise = &cfg.noise;
        if noise.clutter_amplitude > 0.0 && noise.clutter_scatterers > 0 {
            let mut rng = substream(cfg.rng_seed, streams::CLUTTER, 0);
            let max_r = (12.0f64).min(0.9 * wf.max_unambiguous_range());
            for _ in 0..noise.clutter_scatterers {
                let r: f64 = rng.random_range(0.5..max_r);
                let phase: f64 = rng.random_range(0.0..2.0 * PI);
                let b = Complex64::from_polar(noise.clutter_amplitude, phase);
                accumulate_delay(&mut clutter, b, r, wf.subcarrier_spacing_df);
            }
        }
        Ok(CsiSynthesizer {
            cfg: cfg.clone(),
            clutter,
            pilots: None,
        })
    }

    /// Channel for a target at slant range `r_3d` closing at `v_approach`.
    pub fn target_csi(&self, frame_index: u64, r_3d: f64, v_approach: f64) -> Result<CsiMatrix> {
        let mut z =
            ComplexGrid::zeros(self.cfg.waveform.symbols(), self.cfg.waveform.subcarriers());
        self.fill(frame_index, r_3d, v_approach, z.as_mut_slice(), None)?;
        Ok(CsiMatrix(z))
    }

    /// Channel for the trajectory state at `t`.
    pub fn frame_csi(&self, truth: &Trajectory, frame_index: u64, t: f64) -> Result<CsiMatrix> {
        let s = truth.state_at(t);
        let (r, v) = target_range_rate(
            &self.cfg.sensor_geometry(),
            [s.position.x, s.position.y],
            s.velocity,
        );
        self.target_csi(frame_index, r, v)
    }

    /// Transmit pilots `U` (fixed QPSK pattern) and echoes `V = U ⊙ Z`.
    pub fn ofdm_frame(
        &mut self,
        truth: &Trajectory,
        frame_index: u64,
        t: f64,
    ) -> Result<OfdmFrame> {
        let (g, h) = (self.cfg.waveform.symbols(), self.cfg.waveform.subcarriers());
        let pilots = self
            .pilots
            .get_or_insert_with(|| {
                let mut rng = substream(self.cfg.rng_seed, streams::PILOTS, 0);
                let s = std::f64::consts::FRAC_1_SQRT_2;
                ComplexGrid::from_fn(g, h, |_, _| {
                    let bits: u8 = rng.random_range(0..4);
                    Complex64::new(
                        if bits & 1 == 0 { s } else { -s },
                        if bits & 2 == 0 { s } else { -s },
                    )
                })
            })
            .clone();
        let st = truth.state_at(t);
        let (r, v) = target_range_rate(
            &self.cfg.sensor_geometry(),
            [st.position.x, st.position.y],
            st.velocity,
        );
        let mut rx = ComplexGrid::zeros(g, h);
        self.fill(
            frame_index,
            r,
            v,
            rx.as_mut_slice(),
            Some(pilots.as_slice()),
        )?;
        Ok(OfdmFrame {
            tx_symbols: pilots,
            rx_symbols: rx,
        })
    }

    fn fill(
        &self,
        frame_index: u64,
        r_3d: f64,
        v_approach: f64,
        out: &mut [Complex64],
        pilots: Option<&[Complex64]>,
    ) -> Result<()> {
        let wf = &self.cfg.waveform;
        let max_r = wf.max_unambiguous_range();
        if !(r_3d >= 0.0 && r_3d < max_r) {
            return Err(Error::BeyondUnambiguousRange {
                range_m: r_3d,
                max_m: max_r,
            });
        }
        let (g, h) = (wf.symbols(), wf.subcarriers());
        let tau = 2.0 * r_3d / SPEED_OF_LIGHT;
        let f_d = 2.0 * v_approach * wf.center_frequency_fc / SPEED_OF_LIGHT;
        let carrier =
            Complex64::from_polar(1.0, -2.0 * PI * (wf.center_frequency_fc * tau).fract());

        let mut delay = vec![Complex64::new(0.0, 0.0); h];
        accumulate_delay(&mut delay, carrier, r_3d, wf.subcarrier_spacing_df);
        let t_sym = wf.symbol_time();
        let doppler: Vec<Complex64> = (0..g)
            .map(|gi| Complex64::from_polar(1.0, 2.0 * PI * (gi as f64 * t_sym * f_d).fract()))
            .collect();

        let std = self.cfg.noise.csi_noise_std;
        let mut rng = substream(self.cfg.rng_seed, streams::CSI_NOISE, frame_index);
        let per_axis = std * std::f64::consts::FRAC_1_SQRT_2;

        for (gi, row) in out.chunks_exact_mut(h).enumerate() {
            let dg = doppler[gi];
            for (hi, z) in row.iter_mut().enumerate() {
                let mut v = dg * delay[hi] + self.clutter[hi];
                if std > 0.0 {
                    let (a, b): (f64, f64) =
                        (rng.sample(StandardNormal), rng.sample(StandardNormal));
                    v += Complex64::new(a * per_axis, b * per_axis);
                }
                if let Some(u) = pilots {
                    v *= u[gi * h + hi];
                }
                *z = v;
            }
        }
        Ok(())
    }
}

/// `acc[h] += b·exp(−j2π·h·Δf·τ)` for a scatterer at range `r`.
fn accumulate_delay(acc: &mut [Complex64], b: Complex64, r: f64, df: f64) {
    let tau = 2.0 * r / SPEED_OF_LIGHT;
    let step = -2.0 * PI * df * tau;
    for (hi, a) in acc.iter_mut().enumerate() {
        *a += b * Complex64::from_polar(1.0, step * hi as f64);
    }
}

/// Channel matrix of the frame at `frame_time` (frame index
/// `round(frame_time · isac_rate)`).
pub fn synthesize_csi(
    truth: &Trajectory,
    cfg: &ScenarioConfig,
    frame_time: Timestamp,
) -> Result<CsiMatrix> {
    let index = (frame_time.0 * cfg.isac_rate).round() as u64;
    CsiSynthesizer::new(cfg)?.frame_csi(truth, index, frame_time.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFrame {
    pub index: u64,
    pub t: f64,
}

/// Per-run radar bookkeeping.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub duration_s: f64,
    pub frames: usize,
    pub frames_with_measurement: usize,
    pub total_detections: usize,
    pub imu_samples: usize,
    pub truth_samples: usize,
    pub dropped_frames: Vec<DroppedFrame>,
}

impl RunReport {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub trajectory: Trajectory,
    pub isac: Vec<IsacMeasurement>,
    pub imu: Vec<ImuMeasurement>,
    pub truth: Vec<GroundTruthSample>,
    pub report: RunReport,
}

/// Simulates every sensor over the whole trajectory. Each radar frame goes
/// through the full OFDM chain; the detection closest to the true range
/// (within the association gate) becomes the frame's measurement.
pub fn run_scenario(spec: &TrajectorySpec, cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let trajectory = generate_truth(spec, cfg)?;
    let geom = cfg.sensor_geometry();
    let mut synth = CsiSynthesizer::new(cfg)?;
    let mut radar = RadarProcessor::new(
        cfg.waveform,
        ClutterFilter::new(cfg.radar.clutter_alpha, cfg.radar.bootstrap_frames)?,
        cfg.radar.threshold,
    )?;
    let gate = cfg.radar.association_gate_bins * cfg.waveform.range_bin_width();

    let mut report = RunReport {
        seed: cfg.rng_seed,
        duration_s: trajectory.duration(),
        ..RunReport::default()
    };
    let mut isac = Vec::new();
    for (k, t) in sample_times(trajectory.duration(), cfg.isac_rate, false).enumerate() {
        let index = k as u64 + 1;
        let frame = synth.ofdm_frame(&trajectory, index, t)?;
        let detections = radar.process_frame(&frame)?;
        report.frames += 1;
        report.total_detections += detections.len();

        let s = trajectory.state_at(t);
        let (r_true, _) = target_range_rate(&geom, [s.position.x, s.position.y], s.velocity);
        let best = detections
            .iter()
            .filter(|d| (d.r - r_true).abs() <= gate)
            .min_by(|a, b| (a.r - r_true).abs().total_cmp(&(b.r - r_true).abs()));
        match best {
            Some(d) => {
                report.frames_with_measurement += 1;
                isac.push(IsacMeasurement {
                    t: Timestamp(t),
                    range_3d: d.r,
                    doppler_velocity: d.v_d,
                });
            }
            None => report.dropped_frames.push(DroppedFrame { index, t }),
        }
    }

    let imu = sample_imu(&trajectory, cfg);
    let truth = trajectory.ground_truth(cfg.truth_rate);
    report.imu_samples = imu.len();
    report.truth_samples = truth.len();
    Ok(ScenarioOutput {
        trajectory,
        isac,
        imu,
        truth,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imu::{integrate, rotate_to_global, ImuState};
    use crate::radar::range_doppler;
    use crate::sim::NoiseConfig;
    use crate::types::Pose2D;
    use std::f64::consts::FRAC_PI_2;

    fn quiet_cfg() -> ScenarioConfig {
        ScenarioConfig {
            noise: NoiseConfig::noiseless(),
            ..ScenarioConfig::default()
        }
    }

    fn small_wave(cfg: &mut ScenarioConfig) {
        cfg.waveform.num_symbols_g = 16;
    }

    fn path(points: &[(f64, f64)], speed: f64, ramp: Option<f64>) -> TrajectorySpec {
        TrajectorySpec {
            waypoints: points.iter().map(|&(x, y)| Pose2D::new(x, y)).collect(),
            speed_profile: vec![speed],
            dwell: vec![],
            ramp_accel: ramp,
        }
    }

    #[test]
    fn straight_cruise_reads_zero() {
        let cfg = quiet_cfg();
        let tr = generate_truth(&path(&[(0.0, 1.0), (3.0, 1.0)], 0.5, None), &cfg).unwrap();
        let imu = sample_imu(&tr, &cfg);
        for m in &imu[1..imu.len() - 1] {
            assert!(m.accel_body.iter().all(|a| a.abs() < 1e-9), "{m:?}");
            assert_eq!(m.gyro[2], 0.0);
        }
    }

    #[test]
    fn body_frame_follows_inverse_rotation() {
        let b = rotate_to_body([1.0, 0.0], FRAC_PI_2);
        assert!(b[0].abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15);
        let g = rotate_to_global(b, FRAC_PI_2);
        assert!((g[0] - 1.0).abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn accel_noise_statistics() {
        // 10⁴ stationary samples: sample std of a_x within 5% of σ.
        let mut cfg = quiet_cfg();
        cfg.noise.accel_noise_std = 0.1;
        let spec = TrajectorySpec {
            dwell: vec![200.0, 0.0],
            ..path(&[(1.0, 1.0), (1.01, 1.0)], 0.1, None)
        };
        let tr = generate_truth(&spec, &cfg).unwrap();
        let ax: Vec<f64> = sample_imu(&tr, &cfg)
            .iter()
            .filter(|m| m.t.0 <= 200.0)
            .map(|m| m.accel_body[0])
            .collect();
        assert_eq!(ax.len(), 10_000);
        let mean = ax.iter().sum::<f64>() / ax.len() as f64;
        let var = ax.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (ax.len() - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.005, "std {}", var.sqrt());
    }

    #[test]
    fn dead_reckoning_reproduces_truth() {
        let cfg = quiet_cfg();
        let spec = TrajectorySpec {
            dwell: vec![0.3, 0.5, 0.0, 0.2],
            ..path(
                &[(0.3, 0.3), (3.0, 1.0), (0.5, 2.0), (2.5, 3.2)],
                0.5,
                Some(0.4),
            )
        };
        let tr = generate_truth(&spec, &cfg).unwrap();
        let imu = sample_imu(&tr, &cfg);
        let incs = integrate(
            ImuState::new(tr.initial_heading(), 0.0, Timestamp(0.0)),
            &imu,
        )
        .unwrap();

        // Strapdown double integration in the global frame, restarted every
        // second from the true state.
        let window = 50;
        for start in (0..imu.len().saturating_sub(window)).step_by(25) {
            let s0 = tr.state_at(if start == 0 { 0.0 } else { imu[start - 1].t.0 });
            let (mut p, mut v) = ([s0.position.x, s0.position.y], s0.velocity);
            for inc in &incs[start..start + window] {
                let a = inc.accel_global;
                let dt = inc.dt;
                for i in 0..2 {
                    p[i] += v[i] * dt + 0.5 * a[i] * dt * dt;
                    v[i] += a[i] * dt;
                }
            }
            let truth = tr.state_at(imu[start + window - 1].t.0).position;
            let err = (p[0] - truth.x).hypot(p[1] - truth.y);
            assert!(err < 1e-6, "window at {start}: {err}");
        }

        // Σ d_imu matches the path length.
        let total: f64 = incs.iter().map(|i| i.d_imu).sum();
        let length: f64 = spec
            .waypoints
            .windows(2)
            .map(|w| w[0].distance(&w[1]))
            .sum();
        assert!(
            (total - length).abs() < 0.01 * length,
            "{total} vs {length}"
        );
    }

    #[test]
    fn csi_tone_lands_on_range_bin() {
        let mut cfg = quiet_cfg();
        small_wave(&mut cfg);
        let synth = CsiSynthesizer::new(&cfg).unwrap();
        let r = 4.0 * cfg.waveform.range_bin_width();
        let z = synth.target_csi(1, r, 0.0).unwrap();
        let map = range_doppler(&z, &cfg.waveform).unwrap();
        assert_eq!(map.peak().0, 0);
        assert_eq!(map.peak().1, 4);
        // Stationary: every Doppler row other than zero is empty.
        let zero_row: f64 = (0..map.shape().1).map(|c| map.cell(0, c)).sum();
        let total: f64 = map.magnitudes.iter().sum();
        assert!((total - zero_row) < 1e-9 * total);
    }

    #[test]
    fn csi_frames_are_deterministic() {
        let mut cfg = ScenarioConfig::default();
        small_wave(&mut cfg);
        let tr = generate_truth(&path(&[(0.5, 0.5), (3.0, 2.0)], 0.5, Some(0.5)), &cfg).unwrap();
        let a = synthesize_csi(&tr, &cfg, Timestamp(1.0)).unwrap();
        let b = synthesize_csi(&tr, &cfg, Timestamp(1.0)).unwrap();
        assert_eq!(a, b);
        let c = synthesize_csi(&tr, &cfg, Timestamp(2.0)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn beyond_unambiguous_range_rejected() {
        let cfg = quiet_cfg();
        let synth = CsiSynthesizer::new(&cfg).unwrap();
        let max = cfg.waveform.max_unambiguous_range();
        assert!(matches!(
            synth.target_csi(0, max + 1.0, 0.0),
            Err(Error::BeyondUnambiguousRange { .. })
        ));
    }

    #[test]
    fn ten_second_rates() {
        let mut cfg = quiet_cfg();
        small_wave(&mut cfg);
        let out = run_scenario(&path(&[(0.0, 1.0), (3.0, 1.0)], 0.3, None), &cfg).unwrap();
        assert!((out.trajectory.duration() - 10.0).abs() < 1e-12);
        assert_eq!(out.imu.len(), 500);
        assert!(out.isac.len() <= 330);
        assert_eq!(out.report.frames, 330);
        assert_eq!(
            out.report.frames,
            out.report.frames_with_measurement + out.report.dropped_frames.len()
        );
    }

    #[test]
    fn noiseless_ranges_within_one_bin() {
        let mut cfg = quiet_cfg();
        small_wave(&mut cfg);
        let spec = path(&[(0.2, 0.4), (3.3, 2.9)], 0.5, Some(0.5));
        let out = run_scenario(&spec, &cfg).unwrap();
        let geom = cfg.sensor_geometry();
        assert!(!out.isac.is_empty());
        for m in &out.isac {
            let s = out.trajectory.state_at(m.t.0);
            let (r, _) = target_range_rate(&geom, [s.position.x, s.position.y], s.velocity);
            assert!((m.range_3d - r).abs() <= 0.75, "{} vs {r}", m.range_3d);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let mut cfg = ScenarioConfig::default();
        small_wave(&mut cfg);
        cfg.rng_seed = 7;
        let spec = path(&[(0.5, 0.5), (3.0, 1.5)], 0.5, Some(0.5));
        let a = run_scenario(&spec, &cfg).unwrap();
        let b = run_scenario(&spec, &cfg).unwrap();
        assert_eq!(a.isac, b.isac);
        assert_eq!(a.imu, b.imu);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.report, b.report);
    }
}
