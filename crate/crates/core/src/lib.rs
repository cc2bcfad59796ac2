//! Block structure detection for sum-of-squares decomposition.
//!
//! The pipeline: parse a polynomial, bound its Gram support by the halved
//! Newton polytope, detect coefficient-independent block structure (split
//! polynomials, coordinate-projection masks), solve the reduced PSD
//! feasibility problem and turn the Gram matrix into explicit squares.

pub mod certify;
pub mod gram;
pub mod linalg;
pub mod oracle;
pub mod partition;
pub mod poly;
pub mod solver;
pub mod split;
pub mod support;
pub mod union_find;

pub use partition::{BlockPartition, PartitionError};
pub use poly::{
    expand_sum_of_squares, parse_polynomial, ExponentVector, PolyError, Polynomial, SupportSet,
};
