//! Numerical laboratory for the complex Monge–Ampère equation
//! `det(u_{i jbar}) = f` on boxes in `C^n`.

pub mod exact;
pub mod grid;
pub mod hermitian;
pub mod moser;
pub mod regularity;
mod serde_f64;
pub mod solver;
pub mod viscosity;

pub use exact::{identity_sweep, FamilyError, FamilyKind, IdentityCheck, IdentitySweep, SolutionFamily, SweepOptions};
pub use grid::{
    complex_hessian_fd, complex_hessian_fd_at, complex_laplacian_fd, lp_norm, sample, w2p_seminorm, ComplexPoint,
    GridDomain, GridError, GridField,
};
pub use hermitian::{herm_det, herm_inverse, psd_report, HermitianError, HermitianForm, PsdReport};
pub use moser::{MoserError, MoserParams};
pub use regularity::{HolderFit, RegularityError, RegularityReport, ScanEntry, Verdict, W2pScan};
pub use solver::{DirichletProblem, NewtonConfig, SolveOutcome, SolveReport, SolverError};
pub use viscosity::{g_operator, QuadraticJet, ViscosityError, ViscosityOperator};

pub use num_complex;
