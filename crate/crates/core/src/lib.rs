//! Passive global relocalization of a stationary robot on an occupancy grid
//! from a single 2-D LiDAR scan.
//!
//! The pipeline samples sparse feasible positions with a traversability
//! constrained RRT, orders them with a cheap mean-range metric (SMAD), then
//! processes them in batches: orientation selection and ranking with a
//! translation-tolerant likelihood-field metric (TAM), ICP refinement of the
//! local top-k, re-evaluation, and early termination once a refined pose
//! scores above a threshold.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod geometry;
pub mod icp;
pub mod map;
pub mod pipeline;
pub mod raycast;
pub mod sampler;
pub mod scan;
pub mod sim;
pub mod smad;
pub mod tam;

pub use error::{RelocError, Result};
pub use geometry::{wrap_angle, Pose, WorldPoint};
