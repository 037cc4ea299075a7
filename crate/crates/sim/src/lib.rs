//! Desk-scale race simulator and evaluation harness.
//!
//! A kinematic bicycle drives generated tracks under pure-pursuit control.
//! Each scan tick produces a synthetic LiDAR sweep and (optionally degraded)
//! wheel odometry, which feed the particle filter; the controller can follow
//! either the ground truth or the filter estimate.

pub mod config;
pub mod controller;
pub mod eval;
pub mod experiment;
pub mod lap;
pub mod lidar;
pub mod log;
pub mod slip;
pub mod track;
pub mod vehicle;
