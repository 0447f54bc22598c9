//! Evaluation of the scaled matrix and its leverage scores.
//!
//! For a point x the chain is
//!
//! ```text
//! s(x) = Ax - b                row scales, must stay away from zero
//! A(x) = diag(s(x))^{-1} A     the scaled design matrix
//! sigma(x) = A(x) (A(x)^T A(x))^{-1} A(x)^T
//! ```
//!
//! `sigma(x)` is the orthogonal projection onto the column space of A(x), so
//! it is symmetric, idempotent, has trace d, and its diagonal (the leverage
//! scores) lies in [0, 1].
//!
//! The Gram system is solved through a rank-revealing orthogonal
//! decomposition of A(x) (its SVD) rather than by factoring A(x)^T A(x),
//! which would square the conditioning; the explicit Gram inverse is still
//! materialized (d x d, cheap) because callers consume it. The full n x n
//! sigma is opt-in: the diagonal-only path never forms it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;

/// Guard on |s(x)_i|: entries smaller than this cannot be inverted reliably.
pub const DELTA_MIN: f64 = 1e-12;

/// Relative threshold under which A(x) counts as rank deficient.
pub const SCALED_RANK_TOL: f64 = 1e-12;

/// Cached evaluation of everything at a single point x.
///
/// A snapshot only exists for points where every |s_i| clears [`DELTA_MIN`]
/// and A(x) has full column rank; all accessors are therefore total.
#[derive(Debug, Clone)]
pub struct LeverageSnapshot {
    x: DVector<f64>,
    s: DVector<f64>,
    ax: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    sigma_diag: DVector<f64>,
    sigma_full: Option<DMatrix<f64>>,
    min_abs_s: f64,
    sigma_min_ax: f64,
    sigma_max_ax: f64,
    /// B = A(x) V diag(1/sv) from the SVD of A(x); sigma = B B^T and
    /// sigma_{i,l} = <B_i, B_l>. Kept so columns of sigma can be produced
    /// on demand without the full matrix.
    half_projection: DMatrix<f64>,
}

impl LeverageSnapshot {
    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    /// The scaled matrix A(x).
    pub fn ax(&self) -> &DMatrix<f64> {
        &self.ax
    }

    /// (A(x)^T A(x))^{-1}.
    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn sigma_diag(&self) -> &DVector<f64> {
        &self.sigma_diag
    }

    pub fn sigma_full(&self) -> Option<&DMatrix<f64>> {
        self.sigma_full.as_ref()
    }

    pub fn require_full(&self) -> Result<&DMatrix<f64>> {
        self.sigma_full.as_ref().ok_or_else(|| {
            Error::InvalidConfig("operation requires a snapshot built with want_full".into())
        })
    }

    pub fn min_abs_s(&self) -> f64 {
        self.min_abs_s
    }

    pub fn sigma_min_ax(&self) -> f64 {
        self.sigma_min_ax
    }

    pub fn sigma_max_ax(&self) -> f64 {
        self.sigma_max_ax
    }

    pub fn n(&self) -> usize {
        self.ax.nrows()
    }

    pub fn d(&self) -> usize {
        self.ax.ncols()
    }

    /// Column i of sigma(x), taken from the cached full matrix when present
    /// and reconstructed as B B_i^T otherwise (O(nd)).
    pub fn sigma_column(&self, i: usize) -> Result<DVector<f64>> {
        self.check_row(i)?;
        if let Some(full) = &self.sigma_full {
            return Ok(full.column(i).into_owned());
        }
        let bi = self.half_projection.row(i).transpose();
        Ok(&self.half_projection * bi)
    }

    /// sigma(x) * v without materializing sigma: B (B^T v).
    pub fn apply_sigma(&self, v: &DVector<f64>) -> DVector<f64> {
        if let Some(full) = &self.sigma_full {
            return full * v;
        }
        &self.half_projection * (self.half_projection.tr_mul(v))
    }

    /// sigma(x) * M column-block variant of [`Self::apply_sigma`].
    pub fn apply_sigma_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if let Some(full) = &self.sigma_full {
            return full * m;
        }
        &self.half_projection * (self.half_projection.tr_mul(m))
    }

    pub(crate) fn check_row(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_coord(&self, j: usize) -> Result<()> {
        if j >= self.d() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.d(),
            });
        }
        Ok(())
    }
}

fn check_point(inst: &ProblemInstance, x: &DVector<f64>) -> Result<()> {
    if x.len() != inst.d() {
        return Err(Error::DimensionMismatch {
            context: "x",
            expected: inst.d(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "x" });
    }
    Ok(())
}

/// s(x) = Ax - b.
pub fn eval_s(inst: &ProblemInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_point(inst, x)?;
    Ok(inst.a() * x - inst.b())
}

/// A(x) = diag(s(x))^{-1} A, i.e. row i divided by s_i. O(nd).
pub fn eval_a_of_x(inst: &ProblemInstance, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = eval_s(inst, x)?;
    scale_rows(inst.a(), &s)
}

fn scale_rows(a: &DMatrix<f64>, s: &DVector<f64>) -> Result<DMatrix<f64>> {
    for (i, &si) in s.iter().enumerate() {
        // Finite x can still overflow s through the product with A.
        if !si.is_finite() {
            return Err(Error::NonFinite { context: "s(x)" });
        }
        if si.abs() < DELTA_MIN {
            return Err(Error::SingularScaling {
                index: i,
                value: si,
                limit: DELTA_MIN,
            });
        }
    }
    let mut ax = a.clone();
    for (i, &si) in s.iter().enumerate() {
        ax.row_mut(i).scale_mut(1.0 / si);
    }
    Ok(ax)
}

/// Builds the cached evaluation at x. `want_full` additionally materializes
/// the n x n sigma matrix.
pub fn snapshot(
    inst: &ProblemInstance,
    x: &DVector<f64>,
    want_full: bool,
) -> Result<LeverageSnapshot> {
    let s = eval_s(inst, x)?;
    let ax = scale_rows(inst.a(), &s)?;
    let min_abs_s = s.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);

    let svd = ax.clone().svd(true, true);
    let sv = &svd.singular_values;
    let sigma_max_ax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let sigma_min_ax = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if sigma_min_ax < SCALED_RANK_TOL * sigma_max_ax {
        return Err(Error::RankDeficient {
            sigma_min: sigma_min_ax,
            sigma_max: sigma_max_ax,
        });
    }

    // With A(x) = U diag(sv) V^T and W := V diag(1/sv):
    // gram_inv = (A(x)^T A(x))^{-1} = W W^T and the half-projection
    // B = A(x) W, so the conditioning is never squared.
    let mut w = svd.v_t.expect("svd with vectors").transpose();
    for (k, &value) in sv.iter().enumerate() {
        w.column_mut(k).scale_mut(1.0 / value);
    }
    let gram_inv = &w * w.transpose();
    let half_projection = &ax * &w;

    let sigma_diag = DVector::from_iterator(
        ax.nrows(),
        half_projection.row_iter().map(|row| row.norm_squared()),
    );
    let sigma_full = want_full.then(|| &half_projection * &half_projection.transpose());

    Ok(LeverageSnapshot {
        x: x.clone(),
        s,
        ax,
        gram_inv,
        sigma_diag,
        sigma_full,
        min_abs_s,
        sigma_min_ax,
        sigma_max_ax,
        half_projection,
    })
}

/// The full n x n projection sigma(x), via the Gram-solve path.
pub fn eval_sigma_full(inst: &ProblemInstance, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let snap = snapshot(inst, x, true)?;
    Ok(snap.sigma_full.expect("requested full sigma"))
}

/// Leverage-score diagonal without forming the full matrix.
pub fn eval_sigma_diag(inst: &ProblemInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    let snap = snapshot(inst, x, false)?;
    Ok(snap.sigma_diag)
}

/// Well-posedness diagnostic at a point.
///
/// The margin assumptions behind the norm and Lipschitz bounds are stated
/// sometimes on `sigma_min(A(x))` and sometimes on `min |s_i|`; both are
/// reported so callers can pick either reading. Pure diagnostic, never fails:
/// at points where A(x) does not exist the scaled fields are `None`.
#[derive(Debug, Clone)]
pub struct WellPosedness {
    pub beta: f64,
    pub min_abs_s: f64,
    pub min_abs_s_index: usize,
    pub sigma_min_ax: Option<f64>,
    pub sigma_max_ax: Option<f64>,
    /// Spectral norm of A(x), reported (not asserted) next to the beta*R bound.
    pub spectral_norm_ax: Option<f64>,
    pub sigma_min_a: f64,
    pub sigma_max_a: f64,
    pub rank_a: usize,
    /// sigma_min(A(x)) >= beta, when A(x) exists.
    pub passes_beta: Option<bool>,
    /// min |s_i| >= beta, the alternative reading of the margin assumption.
    pub passes_s_margin: bool,
}

pub fn well_posedness(
    inst: &ProblemInstance,
    x: &DVector<f64>,
    beta: f64,
) -> Result<WellPosedness> {
    let s = eval_s(inst, x)?;
    let (min_abs_s_index, min_abs_s) =
        s.iter()
            .map(|v| v.abs())
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );

    let (sigma_min_a, sigma_max_a) = inst.singular_extent();
    let rank_a = {
        let sv = inst.a().clone().svd(false, false).singular_values;
        sv.iter()
            .filter(|&&v| v >= crate::instance::RANK_TOL * sigma_max_a)
            .count()
    };

    let scaled = scale_rows(inst.a(), &s).ok().map(|ax| {
        let sv = ax.svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0_f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        (min, max)
    });

    Ok(WellPosedness {
        beta,
        min_abs_s,
        min_abs_s_index,
        sigma_min_ax: scaled.map(|(min, _)| min),
        sigma_max_ax: scaled.map(|(_, max)| max),
        spectral_norm_ax: scaled.map(|(_, max)| max),
        sigma_min_a,
        sigma_max_a,
        rank_a,
        passes_beta: scaled.map(|(min, _)| min >= beta),
        passes_s_margin: min_abs_s >= beta,
    })
}
