//! Dimensional-error prediction and printability scoring for additive
//! manufacturing.
//!
//! The crate is organised as a pipeline:
//!
//! - [`mesh`] loads and validates triangle meshes in printer coordinates (mm, z up).
//! - [`features`] computes the ten per-vertex predictor features.
//! - [`net`] trains and evaluates the per-vertex error regressor.
//! - [`recon`] slices a mesh into binary layers and rebuilds a point cloud from them.
//! - [`registration`] aligns mesh vertices to a cloud (ICP) and measures cloud-to-cloud error.
//! - [`printability`] turns part characteristics, technology and application into
//!   a success probability.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Results are
//! identical either way.

pub mod features;
pub mod kdtree;
pub mod mesh;
pub mod minimize;
pub mod net;
pub mod par;
pub mod printability;
pub mod recon;
pub mod registration;
pub mod shapes;
pub mod util;

pub use features::FeatureRow;
pub use mesh::{Aabb, MeshError, MeshFormat, TriangleMesh};
pub use net::{ErrorNet, TrainingSample};
pub use printability::{PrintabilityConfig, PrintabilityReport, Technology};
pub use recon::{LayerStack, PointCloud};
pub use registration::{ErrorStats, RigidTransform};

pub type Point = nalgebra::Point3<f64>;
pub type Vector = nalgebra::Vector3<f64>;
