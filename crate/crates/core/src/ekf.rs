//! Extended Kalman filter baseline: IMU accelerations drive a
//! constant-velocity model, radar ranges correct it.

use nalgebra::{Matrix4, Matrix4x2, RowVector4, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::geometry::RangeProjection;
use crate::imu::{self, ImuState};
use crate::types::{Event, InitialState, Pose2D, Timestamp};

/// State `[px, py, vx, vy]` and its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState {
    pub x: Vector4<f64>,
    pub e: Matrix4<f64>,
}

impl EkfState {
    pub fn new(x: Vector4<f64>, e: Matrix4<f64>) -> Self {
        EkfState { x, e }
    }

    /// At `pose`, not moving, with the default initial covariance
    /// `diag(0.01, 0.01, 0.1, 0.1)`.
    pub fn at_rest(pose: Pose2D) -> Self {
        EkfState {
            x: Vector4::new(pose.x, pose.y, 0.0, 0.0),
            e: Matrix4::from_diagonal(&Vector4::new(0.01, 0.01, 0.1, 0.1)),
        }
    }

    pub fn position(&self) -> Pose2D {
        Pose2D::new(self.x[0], self.x[1])
    }

    /// Largest absolute difference between `E` and `Eᵀ`.
    pub fn asymmetry(&self) -> f64 {
        (self.e - self.e.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.e + self.e.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ProcessNoise {
    Acceleration(f64),
    Fixed(Matrix4<f64>),
}

/// Process and range-measurement noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfNoise {
    process: ProcessNoise,
    range_var: f64,
}

impl EkfNoise {
    /// `Q = D·diag(σ², σ²)·Dᵀ` for acceleration noise `σ`, rebuilt for every
    /// step length.
    pub fn from_accel_std(accel_std: f64, range_var: f64) -> Result<Self> {
        if !(accel_std >= 0.0 && accel_std.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "accel std {accel_std} must be ≥ 0"
            )));
        }
        Self::check_r(range_var)?;
        Ok(EkfNoise {
            process: ProcessNoise::Acceleration(accel_std),
            range_var,
        })
    }

    /// Fixed `Q`, which must be symmetric positive semidefinite.
    pub fn with_fixed_q(q: Matrix4<f64>, range_var: f64) -> Result<Self> {
        Self::check_r(range_var)?;
        let scale = q.amax().max(1.0);
        if !q.iter().all(|v| v.is_finite())
            || (q - q.transpose()).amax() > 1e-12 * scale
            || q.symmetric_eigenvalues().min() < -1e-12 * scale
        {
            return Err(Error::NotPsd);
        }
        Ok(EkfNoise {
            process: ProcessNoise::Fixed(q),
            range_var,
        })
    }

    fn check_r(range_var: f64) -> Result<()> {
        if range_var > 0.0 && range_var.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "range variance {range_var} must be > 0"
            )))
        }
    }

    pub fn range_var(&self) -> f64 {
        self.range_var
    }

    pub fn q(&self, dt: f64) -> Matrix4<f64> {
        match self.process {
            ProcessNoise::Acceleration(s) => {
                let d = control(dt);
                d * d.transpose() * (s * s)
            }
            ProcessNoise::Fixed(q) => q,
        }
    }
}

pub fn transition(dt: f64) -> Matrix4<f64> {
    let mut c = Matrix4::identity();
    c[(0, 2)] = dt;
    c[(1, 3)] = dt;
    c
}

pub fn control(dt: f64) -> Matrix4x2<f64> {
    let h = 0.5 * dt * dt;
    Matrix4x2::new(h, 0.0, 0.0, h, dt, 0.0, 0.0, dt)
}

fn symmetrize(e: Matrix4<f64>) -> Matrix4<f64> {
    (e + e.transpose()) * 0.5
}

/// `x ← C·x + D·u`, `E ← C·E·Cᵀ + Q`.
pub fn predict(state: &EkfState, u: [f64; 2], dt: f64, noise: &EkfNoise) -> Result<EkfState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "prediction step {dt} must be > 0"
        )));
    }
    let c = transition(dt);
    Ok(EkfState {
        x: c * state.x + control(dt) * Vector2::new(u[0], u[1]),
        e: symmetrize(c * state.e * c.transpose() + noise.q(dt)),
    })
}

/// Range Jacobian `[(p̂x − px)/ρ, (p̂y − py)/ρ, 0, 0]` and predicted range
/// `ρ`, or `None` when the estimate sits on the radar.
fn range_jacobian(state: &EkfState, isac_pos: Pose2D) -> Option<(RowVector4<f64>, f64)> {
    let dx = state.x[0] - isac_pos.x;
    let dy = state.x[1] - isac_pos.y;
    let rho = dx.hypot(dy);
    if rho < 1e-9 {
        return None;
    }
    Some((RowVector4::new(dx / rho, dy / rho, 0.0, 0.0), rho))
}

/// Kalman gain for a range update, `None` at the Jacobian singularity.
pub fn kalman_gain(state: &EkfState, isac_pos: Pose2D, noise: &EkfNoise) -> Option<Vector4<f64>> {
    let (j, _) = range_jacobian(state, isac_pos)?;
    let s = (j * state.e * j.transpose())[(0, 0)] + noise.range_var;
    Some(state.e * j.transpose() / s)
}

/// Corrects the state with a measured plane range. Skipped, with a warning,
/// when the estimate is within 1e-9 m of the radar.
pub fn update_range(state: &EkfState, r_2d: f64, isac_pos: Pose2D, noise: &EkfNoise) -> EkfState {
    let Some((j, rho)) = range_jacobian(state, isac_pos) else {
        log::warn!("estimate coincides with the radar position; range update skipped");
        return *state;
    };
    let k = kalman_gain(state, isac_pos, noise).expect("jacobian exists");
    let residual = r_2d - rho;
    EkfState {
        x: state.x + k * residual,
        e: symmetrize((Matrix4::identity() - k * j) * state.e),
    }
}

/// Filters a merged event stream. IMU samples predict with their
/// acceleration rotated to the scenario frame; radar samples predict to
/// their time with the last known acceleration, then update. One position
/// is emitted per event.
pub fn run_ekf(
    events: &[Event],
    projection: &RangeProjection,
    isac_pos: Pose2D,
    noise: &EkfNoise,
    initial: EkfState,
    start: &InitialState,
) -> Result<Vec<(f64, Pose2D)>> {
    let mut state = initial;
    let mut yaw = ImuState::new(start.heading, 0.0, Timestamp(start.t0));
    let mut last_t = start.t0;
    let mut u = [0.0, 0.0];
    let mut out = Vec::with_capacity(events.len());
    for ev in events {
        let t = ev.t();
        if t < start.t0 {
            return Err(Error::BeforeOrigin {
                t,
                origin: start.t0,
            });
        }
        match ev {
            Event::Imu(m) => {
                let (next, inc) = imu::step(yaw, m)?;
                yaw = next;
                u = inc.accel_global;
                if t > last_t {
                    state = predict(&state, u, t - last_t, noise)?;
                }
            }
            Event::Isac(m) => {
                if t > last_t {
                    state = predict(&state, u, t - last_t, noise)?;
                }
                let r = projection.project(m.range_3d)?;
                state = update_range(&state, r, isac_pos, noise);
            }
        }
        last_t = last_t.max(t);
        out.push((t, state.position()));
    }
    Ok(out)
}
