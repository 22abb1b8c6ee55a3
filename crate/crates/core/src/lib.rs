//! Absolute camera pose from relative pose estimates.
//!
//! Given a query image and a handful of retrieved database images with known
//! poses, each query-database pair contributes an essential matrix. The
//! localizer triangulates the query camera center from the translation
//! directions of two pairs inside RANSAC, averages the rotation estimates,
//! and refines on all consistent pairs. No 3D scene model is needed.
//!
//! Module map: [`geometry`] and [`essential`] hold the multi-view math,
//! [`solver`] estimates essential matrices from matches, [`localizer`] turns
//! pairs into a pose, [`retrieval`] ranks database images, [`simulator`]
//! generates exact synthetic scenes, and [`io`], [`eval`], [`pipeline`] and
//! [`cli`] cover files, metrics and the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod essential;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod localizer;
pub mod pipeline;
pub mod retrieval;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
