use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{ClutterFilter, RadarProcessor, WaveformConfig};
use crate::types::{Pose2D, SensorGeometry};

/// Radar mounting as written in config files; angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub isac_position: [f64; 2],
    pub isac_height: f64,
    pub target_height: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig::from(SensorGeometry::default())
    }
}

impl From<SensorGeometry> for GeometryConfig {
    fn from(g: SensorGeometry) -> Self {
        GeometryConfig {
            isac_position: [g.isac_position.x, g.isac_position.y],
            isac_height: g.isac_height,
            target_height: g.target_height,
            azimuth_deg: g.azimuth_psi.to_degrees(),
            elevation_deg: g.elevation.to_degrees(),
        }
    }
}

impl GeometryConfig {
    pub fn to_geometry(&self) -> SensorGeometry {
        SensorGeometry {
            isac_position: Pose2D::new(self.isac_position[0], self.isac_position[1]),
            isac_height: self.isac_height,
            target_height: self.target_height,
            azimuth_psi: self.azimuth_deg.to_radians(),
            elevation: self.elevation_deg.to_radians(),
        }
    }
}

/// Sensor error model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
    /// Constant offset added to both planar accelerometer axes.
    pub accel_bias: f64,
    /// Per-element complex standard deviation, `E|n|² = σ²`.
    pub csi_noise_std: f64,
    /// Amplitude of each static clutter scatterer.
    pub clutter_amplitude: f64,
    pub clutter_scatterers: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            accel_noise_std: 0.02,
            gyro_noise_std: 0.002,
            accel_bias: 0.0,
            csi_noise_std: 20.0,
            clutter_amplitude: 3.0,
            clutter_scatterers: 6,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            accel_noise_std: 0.0,
            gyro_noise_std: 0.0,
            accel_bias: 0.0,
            csi_noise_std: 0.0,
            clutter_amplitude: 0.0,
            clutter_scatterers: 0,
        }
    }
}

/// Detection stage settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub clutter_alpha: f64,
    pub bootstrap_frames: usize,
    /// Multiple of the median map magnitude a peak must exceed.
    pub threshold: f64,
    /// Detections further than this many range bins from the true range are
    /// not attributed to the target.
    pub association_gate_bins: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            clutter_alpha: ClutterFilter::DEFAULT_ALPHA,
            bootstrap_frames: ClutterFilter::DEFAULT_BOOTSTRAP,
            threshold: RadarProcessor::DEFAULT_THRESHOLD,
            association_gate_bins: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Width and depth of the area of interest, anchored at the origin.
    pub aoi_extent: [f64; 2],
    pub geometry: GeometryConfig,
    pub isac_rate: f64,
    pub imu_rate: f64,
    pub truth_rate: f64,
    pub rng_seed: u64,
    pub noise: NoiseConfig,
    pub waveform: WaveformConfig,
    pub radar: RadarConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            aoi_extent: [3.5, 3.5],
            geometry: GeometryConfig::default(),
            isac_rate: 33.0,
            imu_rate: 50.0,
            truth_rate: 100.0,
            rng_seed: 0,
            noise: NoiseConfig::default(),
            waveform: WaveformConfig::default(),
            radar: RadarConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn sensor_geometry(&self) -> SensorGeometry {
        self.geometry.to_geometry()
    }

    pub fn contains(&self, p: &Pose2D) -> bool {
        p.is_finite()
            && (0.0..=self.aoi_extent[0]).contains(&p.x)
            && (0.0..=self.aoi_extent[1]).contains(&p.y)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.aoi_extent[0] > 0.0 && self.aoi_extent[1] > 0.0) {
            return bad(format!(
                "aoi extents {:?} must be positive",
                self.aoi_extent
            ));
        }
        for (name, r) in [
            ("isac_rate", self.isac_rate),
            ("imu_rate", self.imu_rate),
            ("truth_rate", self.truth_rate),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("{name} {r} must be positive"));
            }
        }
        let n = &self.noise;
        for (name, s) in [
            ("accel_noise_std", n.accel_noise_std),
            ("gyro_noise_std", n.gyro_noise_std),
            ("csi_noise_std", n.csi_noise_std),
            ("clutter_amplitude", n.clutter_amplitude),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("noise.{name} {s} must be non-negative"));
            }
        }
        if !n.accel_bias.is_finite() {
            return bad("noise.accel_bias must be finite".into());
        }
        if !(self.radar.threshold > 0.0)
            || !(self.radar.clutter_alpha > 0.0 && self.radar.clutter_alpha <= 1.0)
        {
            return bad("radar threshold must be positive and clutter_alpha in (0, 1]".into());
        }
        self.waveform.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }
}

/// Waypoint route with a per-segment cruise speed and a dwell time at each
/// waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub waypoints: Vec<Pose2D>,
    /// One speed per segment, or a single speed for all of them (m/s).
    pub speed_profile: Vec<f64>,
    /// One dwell per waypoint, a single value for all, or empty for none (s).
    #[serde(default)]
    pub dwell: Vec<f64>,
    /// Acceleration of the speed ramps (m/s²); absent means speed changes
    /// instantly.
    #[serde(default)]
    pub ramp_accel: Option<f64>,
}

impl TrajectorySpec {
    pub fn segments(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    pub fn speed(&self, segment: usize) -> f64 {
        if self.speed_profile.len() == 1 {
            self.speed_profile[0]
        } else {
            self.speed_profile[segment]
        }
    }

    pub fn dwell_at(&self, waypoint: usize) -> f64 {
        match self.dwell.len() {
            0 => 0.0,
            1 => self.dwell[0],
            _ => self.dwell[waypoint],
        }
    }

    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidConfig(
                "trajectory needs at least 2 waypoints".into(),
            ));
        }
        for (index, w) in self.waypoints.iter().enumerate() {
            if !cfg.contains(w) {
                return Err(Error::WaypointOutsideAoi {
                    index,
                    x: w.x,
                    y: w.y,
                });
            }
        }
        let segs = self.segments();
        if self.speed_profile.len() != 1 && self.speed_profile.len() != segs {
            return Err(Error::InvalidConfig(format!(
                "speed_profile has {} entries for {segs} segments",
                self.speed_profile.len()
            )));
        }
        if let Some(s) = self
            .speed_profile
            .iter()
            .find(|s| !(**s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidConfig(format!("speed {s} must be positive")));
        }
        if !matches!(self.dwell.len(), 0 | 1) && self.dwell.len() != self.waypoints.len() {
            return Err(Error::InvalidConfig(format!(
                "dwell has {} entries for {} waypoints",
                self.dwell.len(),
                self.waypoints.len()
            )));
        }
        if let Some(d) = self.dwell.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "dwell {d} must be non-negative"
            )));
        }
        if let Some(a) = self.ramp_accel {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "ramp_accel {a} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("trajectory serializes")
    }
}
