//! The loss functions and their algebraic equivalences.
//!
//! The residual term can be written two ways: as the Frobenius norm of the
//! diagonal mismatch (the original formulation) or as half the squared
//! two-norm of the score residual. Both are implemented and tested against
//! each other: `loss_exp = 0.5 * loss_frobenius^2`.

use nalgebra::DVector;

use crate::error::Result;
use crate::instance::{ProblemInstance, RegConfig};
use crate::leverage::{self, LeverageSnapshot};

/// Per-term loss values at a point. `loss_total` is computed as
/// `loss_exp + loss_reg` with that exact floating addition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub loss_exp: f64,
    pub loss_reg: f64,
    pub loss_total: f64,
    pub frob_residual: f64,
}

/// 0.5 * sum_i (sigma_ii(x) - c_i)^2.
pub fn loss_exp(inst: &ProblemInstance, snap: &LeverageSnapshot) -> f64 {
    0.5 * snap
        .sigma_diag()
        .iter()
        .zip(inst.c().iter())
        .map(|(&s, &c)| (s - c) * (s - c))
        .sum::<f64>()
}

/// The unsquared Frobenius residual || diag(sigma(x)) - diag(c) ||_F.
pub fn loss_frobenius(inst: &ProblemInstance, snap: &LeverageSnapshot) -> f64 {
    snap.sigma_diag()
        .iter()
        .zip(inst.c().iter())
        .map(|(&s, &c)| (s - c) * (s - c))
        .sum::<f64>()
        .sqrt()
}

/// 0.5 * || W A x ||_2^2.
pub fn loss_reg(inst: &ProblemInstance, x: &DVector<f64>, reg: &RegConfig) -> f64 {
    let ax = inst.a() * x;
    0.5 * ax
        .iter()
        .zip(reg.w().iter())
        .map(|(&axi, &wi)| (wi * axi) * (wi * axi))
        .sum::<f64>()
}

/// All loss terms at x; builds the (diagonal-only) snapshot internally.
pub fn loss_total(
    inst: &ProblemInstance,
    x: &DVector<f64>,
    reg: &RegConfig,
) -> Result<LossBreakdown> {
    let snap = leverage::snapshot(inst, x, false)?;
    Ok(loss_total_with_snapshot(inst, &snap, reg))
}

/// All loss terms at a pre-built snapshot.
pub fn loss_total_with_snapshot(
    inst: &ProblemInstance,
    snap: &LeverageSnapshot,
    reg: &RegConfig,
) -> LossBreakdown {
    let exp = loss_exp(inst, snap);
    let regv = loss_reg(inst, snap.x(), reg);
    LossBreakdown {
        loss_exp: exp,
        loss_reg: regv,
        loss_total: exp + regv,
        frob_residual: loss_frobenius(inst, snap),
    }
}
