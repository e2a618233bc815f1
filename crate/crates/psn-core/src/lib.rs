//! Numerical laboratory for constrained energy minimization of a planar
//! Schrodinger-Newton system in a rotating frame.
//!
//! The object of study is
//!
//! ```text
//! e(a) = inf { E_a(u) : int |u|^2 = a },
//! E_a(u) = int (|grad u|^2 + V |u|^2)
//!          + 1/2 intint ln|x-y| |u(x)|^2 |u(y)|^2 dx dy
//!          - 1/2 int |u|^4
//!          - Omega int x^perp . (i u, grad u),
//! ```
//!
//! on the plane, with a trapping potential V and rotation speed Omega. The
//! crate provides the periodic spectral discretization, the logarithmic
//! convolution, a radial ground-state solver for the critical mass, the
//! projected gradient-flow minimizer, and diagnostics for the collapse
//! regime where the mass approaches the critical value.

pub mod asymptotics;
pub mod energy;
pub mod error;
pub mod field;
pub mod grid;
pub mod groundstate;
pub mod io;
pub mod logconv;
pub mod minimize;

pub use asymptotics::{BlowupReport, SweepRecord};
pub use energy::{EnergyBreakdown, Interactions};
pub use error::{Error, Result};
pub use field::{ComplexField2D, PotentialKind, PotentialSpec};
pub use grid::Grid2D;
pub use groundstate::RadialProfile;
pub use io::{FieldMeta, RunConfig};
pub use logconv::LogKernelPlan;
pub use minimize::{InitKind, MinimizeConfig, MinimizeReport, Outcome};
