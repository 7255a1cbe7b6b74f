//! Riemann ellipsoids of the Dirichlet problem: existence regions, momenta,
//! linear (spectral) stability and order-four Birkhoff normal forms of the
//! reduced Hamiltonian, together with the convexity tests that decide
//! Nekhoroshev stability.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: the shape domain, shape coordinates and the discrete
//!   Z4×Z2 symmetry of the reduced systems.
//! - [`potential`]: the self-gravitational potential, the index integrals
//!   `C_n` and exact Taylor jets of the potential.
//! - [`families`]: existence regions and momenta of the five families.
//! - [`reduced`]: reduced Hamiltonian, Poincaré charts, Hessian, linearization
//!   and a verification integrator.
//! - [`polyalg`]: truncated multivariate series with Poisson brackets.
//! - [`normalform`]: symplectic diagonalization and the Birkhoff normal form.
//! - [`classify`]: convexity taxonomy and KAM nondegeneracy.
//! - [`scan`]: grid scans, resonance detection and CSV/SVG output.
//! - [`verify`]: the cross-module oracle suite.

pub mod classify;
pub mod error;
pub mod families;
pub mod geometry;
pub mod normalform;
pub mod polyalg;
pub mod potential;
pub mod reduced;
pub mod scan;
pub mod verify;

pub use error::{Error, Result};
pub use families::{Branch, EllipsoidType, EquilibriumPoint};
pub use geometry::{MomentumPair, SemiAxes, ShapeCoords};
