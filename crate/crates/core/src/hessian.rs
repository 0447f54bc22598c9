//! Analytic second derivatives: the per-score curvature, the six-term
//! decomposition of the per-index Hessian contribution, assembled Hessians of
//! every loss term, and the positive-definiteness certificate.
//!
//! Two assembly modes exist and the distinction matters:
//!
//! * `PaperLiteral` multiplies the curvature part of each per-index
//!   contribution by `sigma_ii`, the raw score value. It is validated
//!   against the curvature identity, never against finite differences of
//!   the loss, because it differentiates a different function.
//! * `ResidualCorrected` multiplies it by `(sigma_ii - c_i)`, which is what
//!   the chain rule for `0.5 (sigma_ii - c_i)^2` produces. This is the solver
//!   default and the mode that finite differences confirm.
//!
//! At a zero-residual point the residual-corrected Hessian collapses to the
//! Gauss-Newton sum of squared score gradients, which is PSD.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::Result;
use crate::instance::{ProblemInstance, RegConfig};
use crate::leverage::{self, LeverageSnapshot};

/// Which multiplier sits on the curvature terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMode {
    PaperLiteral,
    ResidualCorrected,
}

/// The six d x d matrices making up one index's Hessian contribution.
#[derive(Debug, Clone)]
pub struct HessianTerms {
    pub index: usize,
    pub mode: HessianMode,
    pub d_terms: [DMatrix<f64>; 6],
}

impl HessianTerms {
    pub fn sum(&self) -> DMatrix<f64> {
        let mut total = self.d_terms[0].clone();
        for term in &self.d_terms[1..] {
            total += term;
        }
        total
    }
}

/// Assembled Hessians of the loss terms plus the smallest eigenvalue of the
/// total, computed by a symmetric eigensolve.
#[derive(Debug, Clone)]
pub struct HessianBundle {
    pub h_exp: DMatrix<f64>,
    pub h_reg: DMatrix<f64>,
    pub h_total: DMatrix<f64>,
    pub mode: HessianMode,
    pub min_eigenvalue: f64,
}

/// Largest-magnitude eigenvalue of a symmetric matrix (its spectral norm).
pub fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Spectral norm of a general (possibly unsymmetric) matrix via SVD.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

struct IndexPieces {
    sigma_ii: f64,
    /// A(x) row i as a column vector.
    a_row: DVector<f64>,
    /// v = A(x)^T sigma_{*,i}^{o2}; the score gradient is 2v - 2 sigma_ii a_row.
    v: DVector<f64>,
    /// M^T sigma M with M = diag(sigma_{*,i}) A(x).
    core: DMatrix<f64>,
    /// A(x)^T diag(sigma_{*,i}^{o2}) A(x).
    weighted_gram: DMatrix<f64>,
}

fn index_pieces(snap: &LeverageSnapshot, i: usize) -> Result<IndexPieces> {
    snap.check_row(i)?;
    let col = snap.sigma_column(i)?;
    let squared = col.component_mul(&col);
    let a_row = snap.ax().row(i).transpose();
    let v = snap.ax().tr_mul(&squared);

    let mut m = snap.ax().clone();
    for (r, &cr) in col.iter().enumerate() {
        m.row_mut(r).scale_mut(cr);
    }
    let core = m.tr_mul(&snap.apply_sigma_matrix(&m));

    let mut weighted = snap.ax().clone();
    for (r, &ur) in squared.iter().enumerate() {
        weighted.row_mut(r).scale_mut(ur);
    }
    let weighted_gram = snap.ax().tr_mul(&weighted);

    Ok(IndexPieces {
        sigma_ii: snap.sigma_diag()[i],
        a_row,
        v,
        core,
        weighted_gram,
    })
}

/// The d x d curvature of a single leverage score, assembled from its five
/// constituent terms. Symmetric by construction.
pub fn hessian_sigma_ii(snap: &LeverageSnapshot, i: usize) -> Result<DMatrix<f64>> {
    let p = index_pieces(snap, i)?;
    let cross = &p.a_row * p.v.transpose();
    Ok(
        &p.core * 8.0 - &p.weighted_gram * 6.0 - (&cross + cross.transpose()) * 4.0
            + &p.a_row * p.a_row.transpose() * (6.0 * p.sigma_ii),
    )
}

/// One index's Hessian contribution, split into its six terms.
///
/// Term shapes in both modes: the first term is the score-gradient outer
/// product's leading block, terms 2 and 3 are transposes of each other, and
/// terms 4-6 carry the curvature multiplier (`sigma_ii` or `sigma_ii - c_i`).
pub fn hessian_terms(
    snap: &LeverageSnapshot,
    i: usize,
    c_i: f64,
    mode: HessianMode,
) -> Result<HessianTerms> {
    let p = index_pieces(snap, i)?;
    let multiplier = match mode {
        HessianMode::PaperLiteral => p.sigma_ii,
        HessianMode::ResidualCorrected => p.sigma_ii - c_i,
    };

    let d1 = &p.v * p.v.transpose() * 4.0;
    let cross_coeff = -4.0 * (p.sigma_ii + multiplier);
    let d2 = &p.a_row * p.v.transpose() * cross_coeff;
    let d3 = d2.transpose();
    let d4 = &p.a_row
        * p.a_row.transpose()
        * (4.0 * p.sigma_ii * p.sigma_ii + 6.0 * multiplier * p.sigma_ii);
    let d5 = &p.core * (8.0 * multiplier);
    let d6 = &p.weighted_gram * (-6.0 * multiplier);

    Ok(HessianTerms {
        index: i,
        mode,
        d_terms: [d1, d2, d3, d4, d5, d6],
    })
}

/// Hessian of the residual loss term in the requested mode: the sum of the
/// per-index contributions, computed in parallel and reduced in index order.
pub fn hessian_loss_exp(
    inst: &ProblemInstance,
    snap: &LeverageSnapshot,
    mode: HessianMode,
) -> Result<DMatrix<f64>> {
    let n = snap.n();
    let d = snap.d();
    let contributions: Vec<DMatrix<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            hessian_terms(snap, i, inst.c()[i], mode)
                .expect("index in range")
                .sum()
        })
        .collect();
    Ok(contributions
        .into_iter()
        .fold(DMatrix::zeros(d, d), |acc, h| acc + h))
}

/// Hessian of the regularizer: A^T W^2 A, constant in x.
pub fn hessian_loss_reg(inst: &ProblemInstance, reg: &RegConfig) -> DMatrix<f64> {
    let mut weighted = inst.a().clone();
    for (r, &wi) in reg.w().iter().enumerate() {
        weighted.row_mut(r).scale_mut(wi * wi);
    }
    inst.a().tr_mul(&weighted)
}

/// Total Hessian at x with its smallest eigenvalue.
pub fn hessian_total(
    inst: &ProblemInstance,
    x: &DVector<f64>,
    reg: &RegConfig,
    mode: HessianMode,
) -> Result<HessianBundle> {
    let snap = leverage::snapshot(inst, x, true)?;
    hessian_total_with_snapshot(inst, &snap, reg, mode)
}

pub fn hessian_total_with_snapshot(
    inst: &ProblemInstance,
    snap: &LeverageSnapshot,
    reg: &RegConfig,
    mode: HessianMode,
) -> Result<HessianBundle> {
    let h_exp = hessian_loss_exp(inst, snap, mode)?;
    let h_reg = hessian_loss_reg(inst, reg);
    let h_total = &h_exp + &h_reg;
    let min_eigenvalue = min_symmetric_eigenvalue(&h_total);
    Ok(HessianBundle {
        h_exp,
        h_reg,
        h_total,
        mode,
        min_eigenvalue,
    })
}

/// Positive-definiteness certificate against the target `l`.
#[derive(Debug, Clone, Copy)]
pub struct PdCertificate {
    pub pass: bool,
    pub min_eigenvalue: f64,
    pub required: f64,
    /// Numerical slack: 1e-10 * ||H||.
    pub tolerance: f64,
    /// `min_eigenvalue - (required - tolerance)`; negative when failing.
    pub margin: f64,
}

/// Pass iff the smallest eigenvalue clears `l` up to eigensolve roundoff.
pub fn pd_certificate(bundle: &HessianBundle, l: f64) -> PdCertificate {
    let norm = spectral_norm_symmetric(&bundle.h_total);
    let tolerance = 1e-10 * norm;
    let margin = bundle.min_eigenvalue - (l - tolerance);
    PdCertificate {
        pass: margin >= 0.0,
        min_eigenvalue: bundle.min_eigenvalue,
        required: l,
        tolerance,
        margin,
    }
}

/// The n x n "stripped" forms of the six terms: the scaled-matrix factors are
/// peeled off so that `A(x)^T stripped_q A(x)` reproduces the paper-literal
/// d x d term exactly. Row/column selectors that the peeling exposes appear
/// as basis vectors e_i.
pub fn stripped_d_terms(snap: &LeverageSnapshot, i: usize) -> Result<[DMatrix<f64>; 6]> {
    snap.check_row(i)?;
    let sigma = snap.require_full()?;
    let n = snap.n();
    let col = snap.sigma_column(i)?;
    let squared = col.component_mul(&col);
    let sigma_ii = snap.sigma_diag()[i];

    let mut e_i = DVector::zeros(n);
    e_i[i] = 1.0;

    let d1 = &squared * squared.transpose() * 4.0;
    let d2 = &e_i * squared.transpose() * (-8.0 * sigma_ii);
    let d3 = d2.transpose();
    let d4 = &e_i * e_i.transpose() * (10.0 * sigma_ii * sigma_ii);

    let mut scaled = sigma.clone();
    for (r, &cr) in col.iter().enumerate() {
        scaled.row_mut(r).scale_mut(cr);
    }
    let mut d5 = scaled;
    for (c, &cc) in col.iter().enumerate() {
        d5.column_mut(c).scale_mut(cc);
    }
    d5 *= 8.0 * sigma_ii;

    let d6 = DMatrix::from_diagonal(&(squared * (-6.0 * sigma_ii)));

    Ok([d1, d2, d3, d4, d5, d6])
}

/// Spectral norms of the stripped terms for one index, checked against their
/// absolute bounds, plus the sandwich factor G_i = S^{-1} (sum_q D_q) S^{-1}.
///
/// The six bounds are asserted (they follow from ||sigma|| <= 1 alone); the
/// 44*beta sandwich on G is only reported because the margin assumption it
/// rests on is stated ambiguously.
#[derive(Debug, Clone)]
pub struct DTermSpectralReport {
    pub index: usize,
    pub norms: [f64; 6],
    pub bounds: [f64; 6],
    pub within_bounds: bool,
    pub g_norm: f64,
    /// min(sigma_min(A(x)), min |s_i|) at this snapshot.
    pub beta_snapshot: f64,
    pub g_sandwich_bound: f64,
}

pub const STRIPPED_TERM_BOUNDS: [f64; 6] = [4.0, 8.0, 8.0, 10.0, 8.0, 6.0];

pub fn d_term_spectral_report(snap: &LeverageSnapshot, i: usize) -> Result<DTermSpectralReport> {
    let terms = stripped_d_terms(snap, i)?;
    let norms = [
        spectral_norm(&terms[0]),
        spectral_norm(&terms[1]),
        spectral_norm(&terms[2]),
        spectral_norm(&terms[3]),
        spectral_norm(&terms[4]),
        spectral_norm(&terms[5]),
    ];
    let within_bounds = norms
        .iter()
        .zip(STRIPPED_TERM_BOUNDS.iter())
        .all(|(norm, bound)| *norm <= bound + 1e-9);

    let mut total = terms[0].clone();
    for term in &terms[1..] {
        total += term;
    }
    for (r, &sr) in snap.s().iter().enumerate() {
        total.row_mut(r).scale_mut(1.0 / sr);
    }
    for (c, &sc) in snap.s().iter().enumerate() {
        total.column_mut(c).scale_mut(1.0 / sc);
    }
    let g_norm = spectral_norm_symmetric(&total);
    let beta_snapshot = snap.sigma_min_ax().min(snap.min_abs_s());

    Ok(DTermSpectralReport {
        index: i,
        norms,
        bounds: STRIPPED_TERM_BOUNDS,
        within_bounds,
        g_norm,
        beta_snapshot,
        g_sandwich_bound: 44.0 * beta_snapshot,
    })
}
