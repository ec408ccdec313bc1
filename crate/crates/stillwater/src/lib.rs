//! Restoration of videos of static scenes distorted by refraction through a
//! wavy water surface.
//!
//! The library reconstructs the dense motion vector field (MVF) of a
//! distorted video from a sparse set of tracked feature trajectories, by
//! solving a LASSO over the 3D-DFT basis, and offers a complementary dense
//! optical-flow refinement stage based on local polynomial expansions.
//! A synthetic wave simulator and a metrics harness make every stage
//! testable against ground truth.

pub mod cs;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod peof;
pub mod pipeline;
pub mod tracking;
pub mod wave_sim;

pub use error::{Error, Result};
pub use imaging::{Displacement2, Frame, Video};
pub use cs::MotionField;
