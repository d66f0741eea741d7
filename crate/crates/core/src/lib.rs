pub mod engine;
pub mod error;
pub mod estimators;
pub mod generator;
pub mod kernel;
pub mod lattice;
pub mod noise;
pub mod params;
pub mod region;
pub mod replicas;
pub mod verify;

pub use error::{Error, Result};
pub use generator::{apply_generator, GeneratorSpec};
pub use lattice::{neighbors, LatticeState, Site, MAX_DIM};
pub use params::{CatalyticParams, ModelParams};
pub use region::BoxRegion;
