//! Canonical gravity on a periodic lattice.
//!
//! Fields live on the unit torus in `d = 2` or `3` dimensions and are
//! differentiated with second-order central differences. The constraint
//! functionals and their brackets are in [`constraints`], the BFV vector field
//! with Grassmann-valued ghosts in [`homological`], and the convergence
//! studies that tie them to continuum identities in [`study`].

use alloc::string::String;

pub mod constraints;
pub mod geometry;
pub mod grass;
pub mod homological;
pub mod study;
pub mod torus;

pub use constraints::{constraint_functional, hamiltonian_flow, poisson_bracket, BracketMode, Geometry, Smearing};
pub use geometry::{compute_curvature, lie_derivative, Curvature, TensorKind};
pub use grass::{Dual, Grass, Scalar};
pub use homological::{apply_q, q_squared, BfvFields, GhostData, QOptions, Which};
pub use torus::{Field, Torus, Wave};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("need at least 4 sites per axis, got {0}")]
    Sites(usize),
    #[error("metric is not positive definite at site {site} ({coords:?})")]
    NotPositive { site: usize, coords: [f64; 3] },
    #[error("expected {expected} components, found {found}")]
    Components { expected: usize, found: usize },
    #[error("need {needed} odd parameters, the algebra has {available}")]
    OddParameters { needed: usize, available: usize },
    #[error("the shift generator already appears in the fields")]
    ShiftGeneratorInUse,
    #[error("finite-difference step must be positive and finite, got {0}")]
    FdStep(f64),
    #[error("a convergence study needs at least 3 grid sizes, got {0}")]
    TooFewSizes(usize),
    #[error("{0}")]
    Config(String),
}

/// Sign and normalisation choices in force for every lattice result.
pub const CONVENTIONS: &[&str] = &[
    "bracket {F,G} = <dF/dh, dG/dPi> - <dF/dPi, dG/dh>; the flow of G is (dG/dPi, -dG/dh)",
    "Pi is a weight-one density in coordinate volume (Pi = pi vol_h)",
    "functional derivatives are dx^-d d/d(site value); off-diagonal symmetric components have multiplicity 2",
    "relations: {Hd(X),Hd(Y)} = Hd([X,Y]), {Hd(X),Hn(f)} = Hn(X f), {Hn(f),Hn(g)} = -Hd(f grad g - g grad f)",
    "Q0(h) = h~ xiN + L_xiD h and Q0(Pi) = -Pi~ xiN + vol (G xiN + D(xiN)) + L_xiD Pi (vector-field action with + sign)",
    "Q0(xiN) = xiD.d xiN, Q0(xiD) = -xiN grad xiN + xiD.d xiD",
    "Q0^2(Pi) at e1e2 is +H_d^# (.) w^# with w = f1 d f2 - f2 d f1 and (.) the half-symmetrised product",
    "antighost term of Q(Pi) is -(chiD (x)_s d xiN)^## xiN with (x)_s half-symmetrised",
];
