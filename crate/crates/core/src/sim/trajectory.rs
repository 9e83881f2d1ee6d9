//! Piecewise-analytic ground-truth motion.
//!
//! Every segment starts and ends at rest, with constant-acceleration ramps
//! around a cruise phase. Phase durations are snapped to whole IMU periods
//! (the cruise speed and ramp acceleration are adjusted so the segment length
//! is kept exactly), which puts every acceleration discontinuity on an IMU
//! sample instant. Heading is the direction of travel; turns happen at rest,
//! spread over the dwell at the corner, or in a single IMU period when there
//! is no dwell.

use std::f64::consts::PI;

use crate::error::Result;
use crate::types::{GroundTruthSample, Pose2D, Timestamp};

use super::config::{ScenarioConfig, TrajectorySpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub t: f64,
    pub position: Pose2D,
    pub velocity: [f64; 2],
    pub acceleration: [f64; 2],
    /// Unwrapped heading, radians counter-clockwise from +x.
    pub heading: f64,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Dwell {
        start: f64,
        duration: f64,
        at: Pose2D,
        heading_from: f64,
        heading_to: f64,
    },
    Move {
        start: f64,
        from: Pose2D,
        dir: [f64; 2],
        heading: f64,
        ramp: f64,
        cruise: f64,
        speed: f64,
        accel: f64,
    },
}

impl Phase {
    fn end(&self) -> f64 {
        match *self {
            Phase::Dwell {
                start, duration, ..
            } => start + duration,
            Phase::Move {
                start,
                ramp,
                cruise,
                ..
            } => start + 2.0 * ramp + cruise,
        }
    }

    fn state(&self, t: f64) -> KinematicState {
        match *self {
            Phase::Dwell {
                start,
                duration,
                at,
                heading_from,
                heading_to,
            } => {
                let w = if duration > 0.0 {
                    ((t - start) / duration).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                KinematicState {
                    t,
                    position: at,
                    velocity: [0.0; 2],
                    acceleration: [0.0; 2],
                    heading: heading_from + (heading_to - heading_from) * w,
                }
            }
            Phase::Move {
                start,
                from,
                dir,
                heading,
                ramp,
                cruise,
                speed,
                accel,
            } => {
                let tau = (t - start).clamp(0.0, 2.0 * ramp + cruise);
                let (s, v, a) = if tau < ramp {
                    (0.5 * accel * tau * tau, accel * tau, accel)
                } else if tau <= ramp + cruise {
                    (0.5 * accel * ramp * ramp + speed * (tau - ramp), speed, 0.0)
                } else {
                    let td = tau - ramp - cruise;
                    let s0 = 0.5 * accel * ramp * ramp + speed * cruise;
                    (
                        s0 + speed * td - 0.5 * accel * td * td,
                        speed - accel * td,
                        -accel,
                    )
                };
                KinematicState {
                    t,
                    position: Pose2D::new(from.x + dir[0] * s, from.y + dir[1] * s),
                    velocity: [dir[0] * v, dir[1] * v],
                    acceleration: [dir[0] * a, dir[1] * a],
                    heading,
                }
            }
        }
    }
}

/// Dense ground truth, evaluable at any instant.
#[derive(Debug, Clone)]
pub struct Trajectory {
    phases: Vec<Phase>,
    duration: f64,
    initial_heading: f64,
    start: Pose2D,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn initial_heading(&self) -> f64 {
        self.initial_heading
    }

    pub fn start(&self) -> Pose2D {
        self.start
    }

    /// State at `t`; phase boundaries belong to the earlier phase, and times
    /// outside the span are clamped.
    pub fn state_at(&self, t: f64) -> KinematicState {
        let t = t.clamp(0.0, self.duration);
        let idx = self
            .phases
            .partition_point(|p| p.end() < t)
            .min(self.phases.len() - 1);
        let mut s = self.phases[idx].state(t);
        s.t = t;
        s
    }

    /// Samples at `k / rate` for `k = 0, 1, …` up to the trajectory end.
    pub fn dense(&self, rate: f64) -> Vec<KinematicState> {
        sample_times(self.duration, rate, true)
            .map(|t| self.state_at(t))
            .collect()
    }

    pub fn ground_truth(&self, rate: f64) -> Vec<GroundTruthSample> {
        self.dense(rate)
            .into_iter()
            .map(|s| GroundTruthSample {
                t: Timestamp(s.t),
                position: s.position,
            })
            .collect()
    }
}

/// `k / rate` for `k = 0 or 1 ..= ⌊duration·rate⌋`.
pub(crate) fn sample_times(
    duration: f64,
    rate: f64,
    include_zero: bool,
) -> impl Iterator<Item = f64> {
    let n = (duration * rate + 1e-9).floor() as u64;
    let first = if include_zero { 0 } else { 1 };
    (first..=n).map(move |k| k as f64 / rate)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a == -PI {
        a = PI;
    }
    a
}

fn quantize(duration: f64, quantum: f64, min_steps: u64) -> u64 {
    ((duration / quantum).round() as u64).max(min_steps)
}

/// Builds the ground-truth motion for `spec`, snapping every phase to whole
/// IMU periods.
pub fn generate_truth(spec: &TrajectorySpec, cfg: &ScenarioConfig) -> Result<Trajectory> {
    cfg.validate()?;
    spec.validate(cfg)?;
    let q = 1.0 / cfg.imu_rate;

    let mut headings = Vec::with_capacity(spec.segments());
    let mut prev: Option<f64> = None;
    for w in spec.waypoints.windows(2) {
        let raw = (w[1].y - w[0].y).atan2(w[1].x - w[0].x);
        let h = match prev {
            None => raw,
            Some(p) => p + wrap_angle(raw - p),
        };
        headings.push(h);
        prev = Some(h);
    }

    let mut phases = Vec::new();
    let mut t = 0.0;
    for (i, w) in spec.waypoints.iter().enumerate() {
        let heading_from = headings[i.saturating_sub(1).min(headings.len() - 1)];
        let heading_to = headings[i.min(headings.len() - 1)];
        let dwell = quantize(spec.dwell_at(i), q, 0) as f64 * q;
        if dwell > 0.0 {
            phases.push(Phase::Dwell {
                start: t,
                duration: dwell,
                at: *w,
                heading_from,
                heading_to,
            });
            t += dwell;
        } else if heading_from != heading_to {
            // Turn on the spot within one IMU period.
            phases.push(Phase::Dwell {
                start: t,
                duration: q,
                at: *w,
                heading_from,
                heading_to,
            });
            t += q;
        }

        let Some(next) = spec.waypoints.get(i + 1) else {
            break;
        };
        let length = w.distance(next);
        let (dir, heading) = if length > 0.0 {
            (
                [(next.x - w.x) / length, (next.y - w.y) / length],
                headings[i],
            )
        } else {
            ([1.0, 0.0], headings[i])
        };
        let v0 = spec.speed(i);
        let (ramp_steps, cruise_steps) = match spec.ramp_accel {
            None => (0, quantize(length / v0, q, 1)),
            Some(a0) => {
                let ramp = (v0 / a0).min((length / a0).sqrt());
                let cruise = (length / v0 - ramp).max(0.0);
                let ramp_steps = quantize(ramp, q, 1);
                let cruise_steps = if ramp >= v0 / a0 {
                    quantize(cruise, q, 0)
                } else {
                    0
                };
                (ramp_steps, cruise_steps)
            }
        };
        let ramp = ramp_steps as f64 * q;
        let cruise = cruise_steps as f64 * q;
        let speed = length / (ramp + cruise);
        let accel = if ramp_steps > 0 { speed / ramp } else { 0.0 };
        phases.push(Phase::Move {
            start: t,
            from: *w,
            dir,
            heading,
            ramp,
            cruise,
            speed,
            accel,
        });
        t += 2.0 * ramp + cruise;
    }

    Ok(Trajectory {
        duration: t,
        initial_heading: headings[0],
        start: spec.waypoints[0],
        phases,
    })
}
