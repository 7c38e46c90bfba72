//! Sign-weighted Laplacians and two-sided Dirichlet-to-Neumann maps on
//! partitions of planar and one-dimensional domains.

// `!(x > 0.0)` rejects NaN on purpose; index loops walk several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dtn;
pub mod error;
pub mod exact1d;
pub mod fem;
pub mod flow;
pub mod gf2;
pub mod linalg;
pub mod mesh;
pub mod nodal;
pub mod partition;
pub mod pipeline;
pub mod spcc;
pub mod weighted;

pub use error::{Error, Result};
