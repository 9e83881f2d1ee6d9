//! Planar inertial kinematics: yaw integration, body-to-global rotation and
//! per-sample travelled distance.

use crate::error::{Error, Result};
use crate::types::{ImuMeasurement, Timestamp};

/// Rotates a body-frame acceleration into the scenario frame with
/// `[[cos Φ, sin Φ], [−sin Φ, cos Φ]]`.
#[inline]
pub fn rotate_to_global(accel_body: [f64; 2], phi: f64) -> [f64; 2] {
    let (s, c) = phi.sin_cos();
    let [ax, ay] = accel_body;
    [c * ax + s * ay, -s * ax + c * ay]
}

/// Inverse of [`rotate_to_global`].
#[inline]
pub fn rotate_to_body(accel_global: [f64; 2], phi: f64) -> [f64; 2] {
    let (s, c) = phi.sin_cos();
    let [ax, ay] = accel_global;
    [c * ax - s * ay, s * ax + c * ay]
}

#[inline]
pub fn total_acceleration(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuState {
    pub yaw_phi: f64,
    /// Along-heading speed, clamped at zero.
    pub velocity_v: f64,
    pub last_t: Timestamp,
}

impl ImuState {
    pub fn new(yaw_phi: f64, velocity_v: f64, last_t: Timestamp) -> Self {
        ImuState {
            yaw_phi,
            velocity_v: velocity_v.max(0.0),
            last_t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceIncrement {
    pub d_imu: f64,
    pub dt: f64,
    /// Acceleration rotated into the scenario frame at the updated yaw.
    pub accel_global: [f64; 2],
}

/// Advances the dead-reckoning state by one IMU sample.
///
/// The distance increment is `v·Δt + ½·a_g·Δt²` with the speed from before
/// the update; the speed then integrates the global acceleration component
/// along the current heading.
pub fn step(state: ImuState, m: &ImuMeasurement) -> Result<(ImuState, DistanceIncrement)> {
    let dt = m.t.0 - state.last_t.0;
    if !(dt > 0.0) {
        return Err(Error::NonIncreasingTime {
            t: m.t.0,
            last: state.last_t.0,
        });
    }
    let yaw = state.yaw_phi + m.gyro[2] * dt;
    let a = rotate_to_global([m.accel_body[0], m.accel_body[1]], yaw);
    let a_g = total_acceleration(a);
    let d_imu = state.velocity_v * dt + 0.5 * a_g * dt * dt;

    let (s, c) = yaw.sin_cos();
    let along = a[0] * c + a[1] * s;
    let v = (state.velocity_v + along * dt).max(0.0);

    Ok((
        ImuState {
            yaw_phi: yaw,
            velocity_v: v,
            last_t: m.t,
        },
        DistanceIncrement {
            d_imu,
            dt,
            accel_global: a,
        },
    ))
}

/// Runs [`step`] over a whole stream.
pub fn integrate(initial: ImuState, stream: &[ImuMeasurement]) -> Result<Vec<DistanceIncrement>> {
    let mut state = initial;
    stream
        .iter()
        .map(|m| {
            let (next, inc) = step(state, m)?;
            state = next;
            Ok(inc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn sample(t: f64, a: [f64; 2], gz: f64) -> ImuMeasurement {
        ImuMeasurement {
            t: Timestamp(t),
            accel_body: [a[0], a[1], 0.0],
            gyro: [0.0, 0.0, gz],
        }
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotate_to_global([0.3, -0.7], 0.0), [0.3, -0.7]);
        let g = rotate_to_global([1.0, 0.0], FRAC_PI_2);
        assert!(g[0].abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn total_acceleration_examples() {
        assert_eq!(total_acceleration([3.0, 4.0]), 5.0);
        assert_eq!(total_acceleration([0.0, 0.0]), 0.0);
        assert_eq!(total_acceleration([-1.0, 0.0]), 1.0);
    }

    #[test]
    fn constant_speed_increment() {
        let s = ImuState::new(0.0, 1.0, Timestamp(0.0));
        let (_, inc) = step(s, &sample(0.02, [0.0, 0.0], 0.0)).unwrap();
        assert!((inc.d_imu - 0.02).abs() < 1e-15);
    }

    #[test]
    fn stationary_stays_put() {
        let s = ImuState::new(0.4, 0.0, Timestamp(0.0));
        let (next, inc) = step(s, &sample(0.02, [0.0, 0.0], 0.0)).unwrap();
        assert_eq!(inc.d_imu, 0.0);
        assert_eq!(next.velocity_v, 0.0);
    }

    #[test]
    fn uniform_acceleration_distance() {
        // 1 m/s² forward for one second from rest: ½·a·t² = 0.5 m.
        let mut s = ImuState::new(0.0, 0.0, Timestamp(0.0));
        let mut total = 0.0;
        for k in 1..=50 {
            let (next, inc) = step(s, &sample(k as f64 * 0.02, [1.0, 0.0], 0.0)).unwrap();
            total += inc.d_imu;
            s = next;
        }
        assert!((total - 0.5).abs() <= 0.02 * 0.5, "total {total}");
        assert!((s.velocity_v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_increasing_time() {
        let s = ImuState::new(0.0, 0.0, Timestamp(1.0));
        assert!(matches!(
            step(s, &sample(1.0, [0.0, 0.0], 0.0)),
            Err(Error::NonIncreasingTime { .. })
        ));
        assert!(step(s, &sample(0.5, [0.0, 0.0], 0.0)).is_err());
    }

    #[test]
    fn yaw_integrates_gyro_z() {
        let s = ImuState::new(0.0, 0.0, Timestamp(0.0));
        let (next, _) = step(s, &sample(0.5, [0.0, 0.0], 0.2)).unwrap();
        assert!((next.yaw_phi - 0.1).abs() < 1e-15);
    }

    #[test]
    fn braking_clamps_speed_at_zero() {
        let s = ImuState::new(0.0, 0.01, Timestamp(0.0));
        let (next, inc) = step(s, &sample(0.02, [-5.0, 0.0], 0.0)).unwrap();
        assert_eq!(next.velocity_v, 0.0);
        assert!(inc.d_imu > 0.0);
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(ax in -50.0f64..50.0, ay in -50.0f64..50.0, phi in -10.0f64..10.0) {
            let g = rotate_to_global([ax, ay], phi);
            let n_in = ax.hypot(ay);
            prop_assert!((total_acceleration(g) - n_in).abs() <= 1e-12 * n_in.max(1.0));
            let back = rotate_to_body(g, phi);
            prop_assert!((back[0] - ax).abs() <= 1e-12 * n_in.max(1.0));
            prop_assert!((back[1] - ay).abs() <= 1e-12 * n_in.max(1.0));
        }

        #[test]
        fn increment_non_negative(v in 0.0f64..3.0, ax in -2.0f64..2.0, ay in -2.0f64..2.0, dt in 1e-4f64..0.1) {
            let s = ImuState::new(0.0, v, Timestamp(0.0));
            let (_, inc) = step(s, &sample(dt, [ax, ay], 0.0)).unwrap();
            prop_assert!(inc.d_imu >= 0.0);
            let zero = v == 0.0 && ax == 0.0 && ay == 0.0;
            prop_assert_eq!(inc.d_imu == 0.0, zero);
        }
    }
}
