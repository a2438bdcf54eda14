//! Finite-difference laboratory for the biharmonic zero-obstacle problem:
//! grid operators and norms, closed-form oracles, an active-set obstacle
//! solver with KKT certificates, free-boundary analysis (flatness,
//! normalization, blow-up traces, Hölder fits) and discrete NTA geometry.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod io;
pub mod norms;
pub mod nta;
pub mod ops;
pub mod oracle;
pub mod quadrature;
pub mod rescale;
pub mod solver;

pub use error::{Error, Result};
pub use field::{PointSampler, ScalarField};
pub use grid::{DomainShape, GridSpec, Point, SubRegion};
