//! Design and verification of multisine exploration inputs for discrete-time
//! linear systems driven by energy-bounded (non-stochastic) disturbances.
//!
//! The crate is organized bottom-up:
//!
//! - [`matkit`] — dense matrix kernels (Kronecker products, column-stacking
//!   vectorization, symmetric eigendecomposition, Cholesky factorization).
//! - [`lti`] — discrete-time LTI models, trajectory simulation with pluggable
//!   disturbance sources, and multisine input generation.
//! - [`estimate`] — least-squares estimation and the non-falsified parameter
//!   ellipsoid under an energy bound on the disturbance.
//! - [`lmi`] — assembly of the matrix inequalities: the input-energy bound,
//!   the data sufficiency condition and its expanded block form, and the
//!   convex relaxation used by the designer.
//! - [`sdp`] — a small barrier-method solver for linear objectives under
//!   affine positive-semidefinite block constraints.
//! - [`designer`] — the iterative relaxation-and-solve loop producing
//!   exploration amplitudes, plus a Gaussian-credibility baseline designer.
//! - [`experiments`] — end-to-end comparison runs and Monte-Carlo
//!   verification suites for the estimation guarantees.

pub mod designer;
pub mod estimate;
pub mod experiments;
pub mod lmi;
pub mod lti;
pub mod matkit;
pub mod sdp;

pub use estimate::{DataRecord, ParamEllipsoid};
pub use lti::{DisturbanceSource, MultisineDesign, SystemModel, Trajectory};
pub use matkit::Mat;
