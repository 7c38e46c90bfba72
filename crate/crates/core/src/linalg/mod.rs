pub mod dense;
pub mod eigen;
pub mod ldl;
pub mod sparse;

pub use eigen::{eigensolve, EigenOptions, EigenPair, Window};
pub use ldl::{Inertia, LdlFactor};
pub use sparse::CsrMatrix;
