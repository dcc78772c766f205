pub mod assembly;
pub mod error;
pub mod geometry;
pub mod manufactured;
pub mod mesh;
pub mod polygon;
pub mod quadrature;
pub mod random;
pub mod solve;
pub mod space;
pub mod sparse;
pub mod study;
pub mod vtk;

pub use error::{Error, Result};
