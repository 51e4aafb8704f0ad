pub mod archive;
pub mod colmap;
pub mod config;
pub mod dataset;
pub mod decompose;
pub mod error;
pub mod gaussian;
pub mod geometry;
pub mod metrics;
pub mod nerf;
pub mod npy;
pub mod objective;
pub mod optim;
pub mod ply;
pub mod render;
pub mod rig;
pub mod scene;
pub mod scene_split;
pub mod sh;
pub mod track;
pub mod trainer;

pub use error::{Error, Result};
