pub mod analysis;
pub mod citygml;
pub mod dataset;
pub mod error;
pub mod foldnet;
pub mod geogroup;
pub mod geom;
pub mod mesh;
pub mod pipeline;
pub mod rng;
pub mod spatial;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
