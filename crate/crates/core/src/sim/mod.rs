//! Scenario simulator standing in for the radar testbed: ground-truth motion,
//! IMU samples, and per-frame OFDM channel state for the radar chain.

mod config;
mod scenario;
mod trajectory;

pub use config::{GeometryConfig, NoiseConfig, RadarConfig, ScenarioConfig, TrajectorySpec};
pub use scenario::{
    run_scenario, sample_imu, synthesize_csi, target_range_rate, CsiSynthesizer, DroppedFrame,
    RunReport, ScenarioOutput,
};
pub use trajectory::{generate_truth, KinematicState, Trajectory};

pub use crate::radar::WaveformConfig;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(seed, stream, index)`, so any frame can be
/// synthesized on its own without replaying earlier ones.
pub fn substream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [stream, index] {
        h = splitmix(h ^ splitmix(v));
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) mod streams {
    pub const IMU: u64 = 1;
    pub const CSI_NOISE: u64 = 2;
    pub const CLUTTER: u64 = 3;
    pub const PILOTS: u64 = 4;
}
