//! Independent ground-truth engines used to arbitrate the analytic formulas:
//! central finite differences for derivatives and a QR-basis evaluation of
//! the projection matrix.
//!
//! Nothing here touches the Gram-solve path in [`crate::leverage`]; the whole
//! point is that agreement between the two routes is evidence, not tautology.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::leverage::DELTA_MIN;

/// Central-difference configuration. The per-coordinate step is
/// `base_step * (1 + |x_j|)`, balancing truncation against roundoff.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub base_step: f64,
}

impl FdConfig {
    pub fn gradient() -> Self {
        Self { base_step: 1e-5 }
    }

    pub fn hessian() -> Self {
        Self { base_step: 1e-4 }
    }

    pub fn new(base_step: f64) -> Result<Self> {
        if base_step <= 0.0 || !base_step.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "fd step must be positive, got {base_step}"
            )));
        }
        Ok(Self { base_step })
    }

    fn step(&self, xj: f64) -> f64 {
        self.base_step * (1.0 + xj.abs())
    }
}

impl Default for FdConfig {
    fn default() -> Self {
        Self::gradient()
    }
}

fn probe<F>(f: &F, x: &DVector<f64>, coordinate: usize) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    f(x).map_err(|e| Error::DomainCrossing {
        coordinate,
        source: Box::new(e),
    })
}

/// Central-difference gradient: (f(x + h e_j) - f(x - h e_j)) / (2 h_j).
///
/// A probe that violates the domain is an error, not a clamp: clamping would
/// silently corrupt the estimate near the s_i = 0 singularity.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, cfg: &FdConfig) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let d = x.len();
    let mut grad = DVector::zeros(d);
    let mut point = x.clone();
    for j in 0..d {
        let h = cfg.step(x[j]);
        point[j] = x[j] + h;
        let plus = probe(&f, &point, j)?;
        point[j] = x[j] - h;
        let minus = probe(&f, &point, j)?;
        point[j] = x[j];
        grad[j] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Second-order central stencil for the Hessian, symmetrized as
/// (H + H^T) / 2 before returning.
pub fn fd_hessian<F>(f: F, x: &DVector<f64>, cfg: &FdConfig) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let f0 = f(x)?;
    let mut point = x.clone();

    for j in 0..d {
        let hj = cfg.step(x[j]);
        point[j] = x[j] + hj;
        let plus = probe(&f, &point, j)?;
        point[j] = x[j] - hj;
        let minus = probe(&f, &point, j)?;
        point[j] = x[j];
        h[(j, j)] = (plus - 2.0 * f0 + minus) / (hj * hj);
    }

    for j in 0..d {
        for k in (j + 1)..d {
            let hj = cfg.step(x[j]);
            let hk = cfg.step(x[k]);
            let mut sample = |sj: f64, sk: f64| -> Result<f64> {
                point[j] = x[j] + sj * hj;
                point[k] = x[k] + sk * hk;
                let value = probe(&f, &point, k);
                point[j] = x[j];
                point[k] = x[k];
                value
            };
            let pp = sample(1.0, 1.0)?;
            let pm = sample(1.0, -1.0)?;
            let mp = sample(-1.0, 1.0)?;
            let mm = sample(-1.0, -1.0)?;
            let value = (pp - pm - mp + mm) / (4.0 * hj * hk);
            h[(j, k)] = value;
            h[(k, j)] = value;
        }
    }

    let ht = h.transpose();
    Ok((h + ht) * 0.5)
}

/// Evaluates sigma(x) through an orthonormal column basis: Householder QR of
/// the scaled matrix, then sigma = Q Q^T. Shares no code with the Gram-solve
/// path in the leverage module.
pub fn sigma_direct(inst: &ProblemInstance, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    if x.len() != inst.d() {
        return Err(Error::DimensionMismatch {
            context: "x",
            expected: inst.d(),
            got: x.len(),
        });
    }
    let s = inst.a() * x - inst.b();
    for (i, &si) in s.iter().enumerate() {
        if si.abs() < DELTA_MIN {
            return Err(Error::SingularScaling {
                index: i,
                value: si,
                limit: DELTA_MIN,
            });
        }
    }
    let mut ax = inst.a().clone();
    for (i, &si) in s.iter().enumerate() {
        ax.row_mut(i).scale_mut(1.0 / si);
    }

    let qr = ax.qr();
    let r = qr.r();
    let r_max = (0..inst.d())
        .map(|k| r[(k, k)].abs())
        .fold(0.0_f64, f64::max);
    let r_min = (0..inst.d())
        .map(|k| r[(k, k)].abs())
        .fold(f64::INFINITY, f64::min);
    if r_min < 1e-12 * r_max {
        return Err(Error::RankDeficient {
            sigma_min: r_min,
            sigma_max: r_max,
        });
    }
    let q = qr.q();
    Ok(&q * q.transpose())
}
