//! Numerical laboratory for the boundary point principle of divergence-form
//! elliptic and parabolic operators.
//!
//! The crate is organized bottom-up:
//!
//! - [`modulus`]: moduli of continuity, their C¹ regularization and Dini integral.
//! - [`geometry`]: paraboloid boundaries, flattening and (parabolic) distances.
//! - [`drift`]: drift descriptors and the admissibility functionals built on them.
//! - [`solver`]: polar finite-volume solvers for the annulus and cylinder barrier problems.
//! - [`experiments`]: perturbation chains, Hopf-constant scans and the drift operator norm.
//! - [`cli`]: the config-driven `hopflab` front end.

pub mod cli;
pub mod drift;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod modulus;
pub mod quadrature;
pub mod solver;

pub use error::{HopfError, Result};
pub use modulus::ModulusDescriptor;
