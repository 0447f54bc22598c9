//! Inverting a leverage-score distribution: given a matrix A, an offset b,
//! and a target score vector c, recover the parameters x whose scaled matrix
//! `diag(Ax - b)^{-1} A` has leverage diagonal c.
//!
//! The crate is organized around one evaluation pipeline and two independent
//! verification routes:
//!
//! * [`instance`] — problem data, validation, file persistence.
//! * [`leverage`] — s(x), A(x), the projection sigma(x) and its diagonal.
//! * [`objective`] — the residual, regularizer, and total losses.
//! * [`gradient`] / [`hessian`] — analytic first and second derivatives,
//!   including the six-term Hessian decomposition and spectral certificates.
//! * [`oracle`] — finite differences and a QR-basis projection; the
//!   independent ground truth everything analytic is tested against.
//! * [`solver`] — safeguarded gradient descent and Newton iterations with
//!   contraction diagnostics.
//! * [`generator`] — seeded synthetic instances with planted optima.
//! * [`diagnostics`] — empirical norm/Lipschitz bound checks and timing
//!   benchmarks.

pub mod diagnostics;
pub mod error;
pub mod generator;
pub mod gradient;
pub mod hessian;
pub mod instance;
pub mod leverage;
pub mod objective;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
