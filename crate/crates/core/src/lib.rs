//! Matrix product states realised as mid-circuit measure-and-reset circuits.

pub mod ansatz;
pub mod circuit;
pub mod estimation;
pub mod linalg;
pub mod mps;
pub mod noise;
pub mod optimize;
pub mod sweep;
pub mod tfim;
