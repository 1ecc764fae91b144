//! Calibration, synchronization and evaluation toolkit for multimodal sensor rigs.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`se3`]: rotation and rigid-transform algebra.
//! - [`tf_graph`]: the device transformation tree and its calibration file.
//! - [`clock_sync`]: clock-domain models, stamping policies and sync quality.
//! - [`imu_allan`]: Allan deviation and IMU noise parameters.
//! - [`camera_model`]: pinhole projection, reprojection statistics, cloud colorization.
//! - [`traj_eval`]: trajectory I/O, association, alignment and ATE.
//! - [`dataset_io`]: the on-disk sequence container and its validation.

pub mod camera_model;
pub mod clock_sync;
pub mod dataset_io;
pub mod imu_allan;
pub mod report;
pub mod se3;
pub mod tf_graph;
pub mod traj_eval;
