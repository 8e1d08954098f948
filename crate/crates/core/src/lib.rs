//! Synthetic-data 6-DoF object pose estimation from binary silhouette masks.
//!
//! The pipeline renders silhouettes (or flat-shaded images) of known meshes
//! in random poses, trains a compact pose interpreter network on them with a
//! choice of pose losses, and evaluates predictions with position and
//! geodesic orientation errors.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod geom;
pub mod image;
pub mod loss;
pub mod mesh;
pub mod net;
pub mod occlusion;
pub mod pose;
pub mod render;
pub mod seeds;

pub use error::{Error, Result};
pub use image::{GrayImage, MaskImage};
pub use mesh::{PointCloud, TriangleMesh};
pub use net::{NetworkConfig, NetworkParams, PosePrediction};
pub use pose::{AxisAngle, Pose, Quaternion};
pub use render::{CameraIntrinsics, PoseSamplerConfig};
