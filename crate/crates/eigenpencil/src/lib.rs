//! Eigencurve analysis of Hermitian matrix pencils.
//!
//! A pencil `L(lambda) = sum_k lambda^k L_k - g(lambda) I` with Hermitian
//! coefficients has, for every real `lambda`, a real spectrum that organizes
//! into analytic eigenvalue branches `mu_j(lambda)`. The real characteristic
//! values of the pencil are the points where a branch crosses zero. This
//! crate tracks the branches on a grid, locates and refines the crossings,
//! computes Krein signatures by three independent routes (graphical slope
//! data, Gram matrices of root-vector chains, and an algebraic kernel
//! recursion) and verifies the global, local and asymptotic index identities
//! that tie the crossing counts together. A companion linearization serves
//! as an independent oracle for the characteristic values, and a separate
//! module handles linearized Hamiltonian problems `J L u = nu u`.

pub mod branch;
pub mod counts;
pub mod error;
pub mod hamiltonian;
pub mod krein;
pub mod linalg;
pub mod pencil;
pub mod random;
pub mod report;

pub use branch::{BranchFamily, BranchJet, CharacteristicValue};
pub use counts::{analyze, AnalyzeOptions, IndexReport};
pub use error::Error;
pub use hamiltonian::{HamiltonianReport, JlSpectrum};
pub use krein::{KernelRecursionState, RootChain};
pub use pencil::{GridSpec, HamiltonianProblem, PolyPencil, Problem};

/// Shorthand used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
