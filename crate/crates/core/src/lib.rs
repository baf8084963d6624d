//! Finite-dimensional models of quasi-free CAR states, their doubled (GNS)
//! representation, modular data, the shift flow on a finite lattice, its
//! intertwiner spaces and relative commutant, and a truncated CCR analogue.
//!
//! Everything is generic over the real scalar (`f32` or `f64`); the aliases
//! below fix `f64` (and `f32` for the basic types).

pub mod ccr;
pub mod commutant;
pub mod error;
pub mod flow;
pub mod fock;
pub mod linalg;
pub mod modular;
pub mod obstruction;
pub mod quasifree;
pub mod scalar;
pub mod sparse;

pub use error::{Error, Result};
pub use fock::{FockIndex, ModeSpace};
pub use obstruction::Verdict;
pub use scalar::Real;

pub type Complex64 = scalar::C<f64>;
pub type Complex32 = scalar::C<f32>;

pub type SparseOperatorF64 = sparse::SparseOperator<f64>;
pub type SparseOperatorF32 = sparse::SparseOperator<f32>;
pub type VectorF64 = sparse::Vector<f64>;
pub type VectorF32 = sparse::Vector<f32>;
pub type AntiLinearMapF64 = sparse::AntiLinearMap<f64>;

pub type CovarianceF64 = quasifree::Covariance<f64>;
pub type CovarianceF32 = quasifree::Covariance<f32>;
pub type QuasiFreeRepF64 = quasifree::QuasiFreeRep<f64>;
pub type QuasiFreeRepF32 = quasifree::QuasiFreeRep<f32>;

pub type ModularDataF64 = modular::ModularData<f64>;
pub type ShiftModelF64 = flow::ShiftModel<f64>;
pub type ShiftModelF32 = flow::ShiftModel<f32>;

pub type ConstraintSystemF64 = commutant::ConstraintSystem<f64>;
pub type SolutionSpaceF64 = commutant::SolutionSpace<f64>;
pub type CanonicalIntertwinerF64 = commutant::CanonicalIntertwiner<f64>;

pub type VacuumDecompositionF64 = obstruction::VacuumDecomposition<f64>;
pub type ABOperatorsF64 = obstruction::ABOperators<f64>;

pub type BosonCovarianceF64 = ccr::BosonCovariance<f64>;
pub type DoubledOperatorF64 = ccr::DoubledOperator<f64>;
