//! Indoor target positioning from OFDM radar sensing and an on-board IMU.
//!
//! The crate covers the whole chain: a scenario simulator that produces
//! radar frames, IMU samples and ground truth ([`sim`]); OFDM radar
//! processing down to range and Doppler velocity ([`radar`]); slant-range
//! projection ([`geometry`]); inertial dead reckoning ([`imu`]); a small
//! from-scratch MLP stack ([`nn`]); the two-stage cascaded fusion network
//! ([`fusion`]); an EKF baseline ([`ekf`]); and error statistics ([`eval`]).

pub mod ekf;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod imu;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod radar;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    interpolate_truth, merge_streams, Event, GroundTruthSample, ImuMeasurement, InitialState,
    IsacMeasurement, Pose2D, SensorGeometry, Source, Timestamp,
};
