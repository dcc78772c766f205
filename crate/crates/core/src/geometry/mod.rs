//! Composite surfaces: exact patch maps, reference domains with tagged
//! boundary pieces, and interface curves shared by two or more patches.

pub mod builders;
pub mod curve;
pub mod domain;
pub mod map;
pub mod surface;

pub use builders::{CylinderPair, RectPatch, Side, SideRef, SurfaceDescription};
pub use curve::{Curve2, Curve3};
pub use domain::{BoundaryPiece, PieceTag, ReferenceDomain, Ring};
pub use map::{surface_gradient, surface_measure, PatchMap};
pub use surface::{BoundaryKind, BoundarySegment, CompositeSurface, InterfaceCurve, InterfaceMember, Patch};
