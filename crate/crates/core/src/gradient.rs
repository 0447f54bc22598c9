//! Analytic first derivatives of the leverage scores and of the loss terms.
//!
//! The score derivatives come in four granularities (scalar entry, diagonal
//! entry as a d-vector, full column, full matrix) that must agree with each
//! other wherever they overlap; the tests cross-check all of them and pit the
//! assembled loss gradient against central finite differences.
//!
//! The loss-gradient assembly deliberately walks per-index derivative vectors
//! (each O(nd)) instead of collapsing the sum into one matrix product: that
//! is the per-iteration cost model the solvers are benchmarked against.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::Result;
use crate::instance::{ProblemInstance, RegConfig};
use crate::leverage::{self, LeverageSnapshot};

/// Loss gradient split by term; `grad_total` is the exact componentwise sum.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub grad_exp: DVector<f64>,
    pub grad_reg: DVector<f64>,
    pub grad_total: DVector<f64>,
}

/// d sigma_ii / dx = 2 A(x)^T sigma_{*,i}^{o2} - 2 sigma_ii A(x)_{i,*}. O(nd).
pub fn grad_sigma_diag_i(snap: &LeverageSnapshot, i: usize) -> Result<DVector<f64>> {
    snap.check_row(i)?;
    let col = snap.sigma_column(i)?;
    let squared = col.component_mul(&col);
    let ai = snap.ax().row(i).transpose();
    Ok(snap.ax().tr_mul(&squared) * 2.0 - ai * (2.0 * snap.sigma_diag()[i]))
}

/// d sigma_il / dx_j as a scalar.
pub fn grad_sigma_entry(snap: &LeverageSnapshot, i: usize, l: usize, j: usize) -> Result<f64> {
    snap.check_row(i)?;
    snap.check_row(l)?;
    snap.check_coord(j)?;
    let col_i = snap.sigma_column(i)?;
    let col_l = snap.sigma_column(l)?;
    let a_col_j = snap.ax().column(j);
    let sigma_il = col_i[l];
    let inner: f64 = col_i
        .iter()
        .zip(col_l.iter())
        .zip(a_col_j.iter())
        .map(|((&si, &sl), &aj)| si * sl * aj)
        .sum();
    Ok(2.0 * inner - sigma_il * (snap.ax()[(i, j)] + snap.ax()[(l, j)]))
}

/// d sigma / dx_j = 2 sigma D_j sigma - D_j sigma - sigma D_j with
/// D_j = diag(A(x)_{*,j}). Requires the full sigma matrix.
pub fn grad_sigma_matrix(snap: &LeverageSnapshot, j: usize) -> Result<DMatrix<f64>> {
    snap.check_coord(j)?;
    let sigma = snap.require_full()?;
    let a_col_j = snap.ax().column(j).into_owned();

    // D_j sigma scales rows, sigma D_j scales columns.
    let mut dj_sigma = sigma.clone();
    for (r, &v) in a_col_j.iter().enumerate() {
        dj_sigma.row_mut(r).scale_mut(v);
    }
    let sigma_dj = dj_sigma.transpose();
    Ok(sigma * &dj_sigma * 2.0 - dj_sigma - sigma_dj)
}

/// d sigma_{*,i} / dx_j; works without the cached full matrix.
pub fn grad_sigma_column(snap: &LeverageSnapshot, i: usize, j: usize) -> Result<DVector<f64>> {
    snap.check_row(i)?;
    snap.check_coord(j)?;
    let col_i = snap.sigma_column(i)?;
    let a_col_j = snap.ax().column(j).into_owned();
    let scaled = a_col_j.component_mul(&col_i);
    Ok(snap.apply_sigma(&scaled) * 2.0 - scaled - &col_i * snap.ax()[(i, j)])
}

/// Gradient of the residual term: sum_i (sigma_ii - c_i) * d sigma_ii / dx.
///
/// Per-index contributions are computed in parallel and reduced in index
/// order, so the result is identical for any thread count.
pub fn grad_loss_exp(inst: &ProblemInstance, snap: &LeverageSnapshot) -> DVector<f64> {
    let n = snap.n();
    let d = snap.d();
    let contributions: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let residual = snap.sigma_diag()[i] - inst.c()[i];
            let grad = grad_sigma_diag_i(snap, i).expect("index in range");
            grad * residual
        })
        .collect();
    contributions
        .into_iter()
        .fold(DVector::zeros(d), |acc, v| acc + v)
}

/// Gradient of the regularizer: A^T W^2 A x.
pub fn grad_loss_reg(inst: &ProblemInstance, x: &DVector<f64>, reg: &RegConfig) -> DVector<f64> {
    let mut ax = inst.a() * x;
    for (v, &wi) in ax.iter_mut().zip(reg.w().iter()) {
        *v *= wi * wi;
    }
    inst.a().tr_mul(&ax)
}

/// Full loss gradient at x; builds the snapshot internally.
pub fn grad_loss_total(
    inst: &ProblemInstance,
    x: &DVector<f64>,
    reg: &RegConfig,
) -> Result<GradientBundle> {
    let snap = leverage::snapshot(inst, x, true)?;
    Ok(grad_loss_total_with_snapshot(inst, &snap, reg))
}

pub fn grad_loss_total_with_snapshot(
    inst: &ProblemInstance,
    snap: &LeverageSnapshot,
    reg: &RegConfig,
) -> GradientBundle {
    let grad_exp = grad_loss_exp(inst, snap);
    let grad_reg = grad_loss_reg(inst, snap.x(), reg);
    let grad_total = &grad_exp + &grad_reg;
    GradientBundle {
        grad_exp,
        grad_reg,
        grad_total,
    }
}
