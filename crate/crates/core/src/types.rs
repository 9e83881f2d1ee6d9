//! Shared domain types and the two-sensor event stream.
//!
//! All times are seconds since scenario start, all angles radians, all
//! lengths meters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds since scenario start.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub f64);

impl Timestamp {
    pub fn new(seconds: f64) -> Result<Self> {
        if seconds.is_finite() && seconds >= 0.0 {
            Ok(Timestamp(seconds))
        } else {
            Err(Error::InvalidConfig(format!(
                "timestamp {seconds} must be finite and non-negative"
            )))
        }
    }

    #[inline]
    pub fn seconds(self) -> f64 {
        self.0
    }
}

/// Planar position in the scenario frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
}

impl Pose2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Pose2D { x, y }
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub(crate) fn lerp(&self, other: &Pose2D, w: f64) -> Pose2D {
        Pose2D::new(
            self.x + (other.x - self.x) * w,
            self.y + (other.y - self.y) * w,
        )
    }
}

/// Radar output for one detected target: 3D range and Doppler velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsacMeasurement {
    pub t: Timestamp,
    pub range_3d: f64,
    /// Positive when the target approaches the radar.
    pub doppler_velocity: f64,
}

/// Body-frame accelerometer and gyroscope sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuMeasurement {
    pub t: Timestamp,
    pub accel_body: [f64; 3],
    pub gyro: [f64; 3],
}

impl ImuMeasurement {
    pub fn is_finite(&self) -> bool {
        self.t.0.is_finite()
            && self.accel_body.iter().all(|v| v.is_finite())
            && self.gyro.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSample {
    pub t: Timestamp,
    pub position: Pose2D,
}

/// Truth position at `t` by linear interpolation between neighbouring
/// samples; `None` outside the sampled span. `truth` must be time-sorted.
pub fn interpolate_truth(truth: &[GroundTruthSample], t: f64) -> Option<Pose2D> {
    let first = truth.first()?;
    let last = truth.last()?;
    if !(t >= first.t.0 && t <= last.t.0) {
        return None;
    }
    let i = truth.partition_point(|s| s.t.0 <= t);
    if i == 0 {
        return Some(first.position);
    }
    let a = &truth[i - 1];
    if i == truth.len() || a.t.0 == t {
        return Some(a.position);
    }
    let b = &truth[i];
    let w = (t - a.t.0) / (b.t.0 - a.t.0);
    Some(a.position.lerp(&b.position, w))
}

/// Known start of a run: time origin, position and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub t0: f64,
    pub pose: Pose2D,
    pub heading: f64,
}

impl InitialState {
    /// Start of the truth record; heading from the first displacement
    /// larger than 1 cm, 0 if the target never moves.
    pub fn from_truth(truth: &[GroundTruthSample]) -> Result<Self> {
        let first = truth.first().ok_or(Error::Empty("truth stream"))?;
        let heading = truth
            .iter()
            .find(|s| s.position.distance(&first.position) > 0.01)
            .map_or(0.0, |s| {
                (s.position.y - first.position.y).atan2(s.position.x - first.position.x)
            });
        Ok(InitialState {
            t0: first.t.0,
            pose: first.position,
            heading,
        })
    }
}

/// Mounting of the radar relative to the target plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub isac_position: Pose2D,
    pub isac_height: f64,
    pub target_height: f64,
    pub azimuth_psi: f64,
    pub elevation: f64,
}

impl SensorGeometry {
    /// Height difference between the radar and the target.
    pub fn delta_h(&self) -> f64 {
        self.isac_height - self.target_height
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        SensorGeometry {
            isac_position: Pose2D::new(-1.0, 1.75),
            isac_height: 1.9,
            target_height: 0.9,
            azimuth_psi: 0.0,
            elevation: (-6.0f64).to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Imu,
    Isac,
}

/// One entry of the merged, time-ordered sensor stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Imu(ImuMeasurement),
    Isac(IsacMeasurement),
}

impl Event {
    pub fn t(&self) -> f64 {
        match self {
            Event::Imu(m) => m.t.0,
            Event::Isac(m) => m.t.0,
        }
    }

    pub fn source(&self) -> Source {
        match self {
            Event::Imu(_) => Source::Imu,
            Event::Isac(_) => Source::Isac,
        }
    }
}

pub(crate) fn check_sorted<T>(
    stream: &'static str,
    items: &[T],
    time: impl Fn(&T) -> f64,
) -> Result<()> {
    for (i, w) in items.windows(2).enumerate() {
        if !(time(&w[1]) >= time(&w[0])) {
            return Err(Error::NonMonotonic {
                stream,
                index: i + 1,
            });
        }
    }
    Ok(())
}

/// Merges the two sensor streams into one time-ordered sequence.
///
/// Ties are broken IMU first so that a fusion step at that instant sees the
/// freshest inertial increment.
pub fn merge_streams(isac: &[IsacMeasurement], imu: &[ImuMeasurement]) -> Result<Vec<Event>> {
    check_sorted("isac", isac, |m| m.t.0)?;
    check_sorted("imu", imu, |m| m.t.0)?;

    let mut out = Vec::with_capacity(isac.len() + imu.len());
    let (mut i, mut j) = (0, 0);
    while i < isac.len() && j < imu.len() {
        if imu[j].t.0 <= isac[i].t.0 {
            out.push(Event::Imu(imu[j]));
            j += 1;
        } else {
            out.push(Event::Isac(isac[i]));
            i += 1;
        }
    }
    out.extend(imu[j..].iter().copied().map(Event::Imu));
    out.extend(isac[i..].iter().copied().map(Event::Isac));
    Ok(out)
}
