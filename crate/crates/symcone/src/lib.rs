//! Symmetric cone programming with a two-phase path-following smoothing
//! Newton method.
//!
//! The problem solved is `min <c,x>  s.t.  A x = b, x in K` where `K` is a
//! Cartesian product of nonnegative orthants, second-order cones and PSD
//! cones. PSD blocks are stored in scaled vectorized form (column-major lower
//! triangle, off-diagonals times sqrt 2) so that the Euclidean inner product
//! equals the trace inner product.
//!
//! ```
//! use symcone::prelude::*;
//!
//! let cone = ConeSpec::new(vec![BlockSpec::orthant(2)]);
//! let prob = ProblemData::dense("tiny", cone, &[&[1.0, 1.0]], vec![1.0], vec![1.0, 2.0]).unwrap();
//! let res = solve(&prob, &SolverConfig::default()).unwrap();
//! assert_eq!(res.status, Status::Optimal);
//! assert!((res.objective - 1.0).abs() < 1e-6);
//! ```

// `!(x > 0.0)` is how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cone;
pub mod error;
pub mod io;
pub mod kkt;
pub mod merit;
pub mod random;
pub mod smoothing;
pub mod solver;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::cone::{BlockSpec, Cone, ConeSpec, Element, ScalarFn};
    pub use crate::error::{Error, Result};
    pub use crate::io::ProblemData;
    pub use crate::kkt::KktSystem;
    pub use crate::smoothing::SmoothingState;
    pub use crate::solver::{solve, SigmaMode, SolveResult, SolverConfig, Status};
}
