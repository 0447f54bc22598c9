//! First-order (gradient descent) and second-order (Newton) solvers with a
//! shared domain safeguard, plus the contraction diagnostics used to judge
//! Newton runs against the 0.4-per-step shrinking regime.
//!
//! Neither iteration knows about the singular hyperplanes where some
//! s(x)_i = 0; a raw step can jump across one and blow the next evaluation
//! up. Every step is therefore halved until the candidate point admits a
//! snapshot, up to a cap, and the halving count is logged per step.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gradient;
use crate::hessian::{self, HessianMode};
use crate::instance::{ProblemInstance, RegConfig};
use crate::leverage::{self, LeverageSnapshot};
use crate::objective::{self, LossBreakdown};

/// Step-size rule for gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Fixed {
        eta: f64,
    },
    /// gamma_k = 2 / (alpha (k + 1)), k = 1, 2, ...
    Schedule {
        alpha: f64,
    },
}

#[derive(Debug, Clone)]
pub struct GdConfig {
    pub step: StepPolicy,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub max_halvings: u32,
    /// Bookkeeping flag: callers that intend to average the iterates set it
    /// so the run records its schedule parameter.
    pub averaging: bool,
}

impl GdConfig {
    pub fn fixed(eta: f64, max_iters: usize) -> Self {
        Self {
            step: StepPolicy::Fixed { eta },
            max_iters,
            grad_tol: 1e-12,
            max_halvings: 60,
            averaging: false,
        }
    }

    pub fn schedule(alpha: f64, max_iters: usize) -> Self {
        Self {
            step: StepPolicy::Schedule { alpha },
            max_iters,
            grad_tol: 1e-12,
            max_halvings: 60,
            averaging: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("iteration cap must be >= 1".into()));
        }
        match self.step {
            StepPolicy::Fixed { eta } if eta.is_finite() && eta >= 0.0 => Ok(()),
            StepPolicy::Schedule { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            _ => Err(Error::InvalidConfig(
                "step policy needs eta >= 0 or alpha > 0".into(),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Stop once the accepted step is shorter than this.
    pub step_tol: f64,
    pub max_halvings: u32,
    /// Add 1e-10 ||H|| I once if the factorization fails; without it a
    /// semidefinite Hessian is a hard error.
    pub regularize_fallback: bool,
    /// Optional (l, M) estimates carried along for good-point diagnostics.
    pub l_estimate: Option<f64>,
    pub m_estimate: Option<f64>,
}

impl NewtonConfig {
    pub fn with_tol(step_tol: f64, max_iters: usize) -> Self {
        Self {
            max_iters,
            step_tol,
            max_halvings: 60,
            regularize_fallback: true,
            l_estimate: None,
            m_estimate: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("iteration cap must be >= 1".into()));
        }
        if !self.step_tol.is_finite() || self.step_tol <= 0.0 {
            return Err(Error::InvalidConfig(
                "step tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTol,
    StepTol,
    IterationCap,
}

/// Full trace of a solver run. Per-iterate vectors (`iterates`, `losses`,
/// `grad_norms`, `min_abs_s`) hold one more entry than the per-step vectors
/// (`step_sizes`, `halvings`, `times_ms`).
#[derive(Debug, Clone)]
pub struct TrackedRun {
    pub iterates: Vec<DVector<f64>>,
    pub losses: Vec<LossBreakdown>,
    pub grad_norms: Vec<f64>,
    pub min_abs_s: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub halvings: Vec<u32>,
    pub times_ms: Vec<f64>,
    pub termination: Termination,
    /// Present when the run used the k-schedule (required for averaging).
    pub schedule_alpha: Option<f64>,
}

impl TrackedRun {
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn final_x(&self) -> &DVector<f64> {
        self.iterates.last().expect("runs hold at least the start")
    }

    pub fn final_loss(&self) -> &LossBreakdown {
        self.losses.last().expect("runs hold at least the start")
    }

    /// r_t = ||x_t - x*|| for every recorded iterate.
    pub fn distances(&self, x_star: &DVector<f64>) -> Vec<f64> {
        self.iterates.iter().map(|x| (x - x_star).norm()).collect()
    }

    pub fn max_grad_norm(&self) -> f64 {
        self.grad_norms.iter().cloned().fold(0.0, f64::max)
    }
}

struct RunLog {
    run: TrackedRun,
}

impl RunLog {
    fn start(
        inst: &ProblemInstance,
        reg: &RegConfig,
        snap: &LeverageSnapshot,
        grad_norm: f64,
        schedule_alpha: Option<f64>,
    ) -> Self {
        let loss = objective::loss_total_with_snapshot(inst, snap, reg);
        Self {
            run: TrackedRun {
                iterates: vec![snap.x().clone()],
                losses: vec![loss],
                grad_norms: vec![grad_norm],
                min_abs_s: vec![snap.min_abs_s()],
                step_sizes: Vec::new(),
                halvings: Vec::new(),
                times_ms: Vec::new(),
                termination: Termination::IterationCap,
                schedule_alpha,
            },
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record_step(
        &mut self,
        inst: &ProblemInstance,
        reg: &RegConfig,
        snap: &LeverageSnapshot,
        grad_norm: f64,
        step_size: f64,
        halvings: u32,
        elapsed_ms: f64,
    ) {
        self.run.iterates.push(snap.x().clone());
        self.run
            .losses
            .push(objective::loss_total_with_snapshot(inst, snap, reg));
        self.run.grad_norms.push(grad_norm);
        self.run.min_abs_s.push(snap.min_abs_s());
        self.run.step_sizes.push(step_size);
        self.run.halvings.push(halvings);
        self.run.times_ms.push(elapsed_ms);
    }

    fn finish(mut self, termination: Termination) -> TrackedRun {
        self.run.termination = termination;
        self.run
    }
}

/// Halve the step until the candidate admits a snapshot. Returns the accepted
/// snapshot, the effective step scale in (0, 1], and the halving count.
fn safeguarded_step(
    inst: &ProblemInstance,
    x: &DVector<f64>,
    direction: &DVector<f64>,
    want_full: bool,
    max_halvings: u32,
    iteration: usize,
) -> Result<(LeverageSnapshot, f64, u32)> {
    let mut scale = 1.0;
    let mut halvings = 0u32;
    loop {
        let candidate = x + direction * scale;
        match leverage::snapshot(inst, &candidate, want_full) {
            Ok(snap) => return Ok((snap, scale, halvings)),
            Err(
                Error::SingularScaling { .. }
                | Error::RankDeficient { .. }
                | Error::NonFinite { .. },
            ) => {
                if halvings >= max_halvings {
                    return Err(Error::StepTrapped {
                        iteration,
                        cap: max_halvings,
                    });
                }
                scale *= 0.5;
                halvings += 1;
            }
            Err(other) => return Err(other),
        }
    }
}

fn start_snapshot(inst: &ProblemInstance, x0: &DVector<f64>) -> Result<LeverageSnapshot> {
    leverage::snapshot(inst, x0, true).map_err(|e| Error::InvalidStart {
        source: Box::new(e),
    })
}

/// Gradient descent with the domain safeguard. Runs until the gradient norm
/// drops below `grad_tol`, the iteration cap, or a trapped step.
pub fn gradient_descent(
    inst: &ProblemInstance,
    reg: &RegConfig,
    x0: &DVector<f64>,
    cfg: &GdConfig,
) -> Result<TrackedRun> {
    cfg.validate()?;
    let mut snap = start_snapshot(inst, x0)?;
    let mut bundle = gradient::grad_loss_total_with_snapshot(inst, &snap, reg);
    let schedule_alpha = match cfg.step {
        StepPolicy::Schedule { alpha } => Some(alpha),
        StepPolicy::Fixed { .. } => None,
    };
    let mut log = RunLog::start(inst, reg, &snap, bundle.grad_total.norm(), schedule_alpha);

    for k in 1..=cfg.max_iters {
        if bundle.grad_total.norm() <= cfg.grad_tol {
            return Ok(log.finish(Termination::GradientTol));
        }
        let eta = match cfg.step {
            StepPolicy::Fixed { eta } => eta,
            StepPolicy::Schedule { alpha } => 2.0 / (alpha * (k as f64 + 1.0)),
        };
        let clock = Instant::now();
        let direction = -&bundle.grad_total * eta;
        let (next, scale, halvings) =
            safeguarded_step(inst, snap.x(), &direction, true, cfg.max_halvings, k)?;
        snap = next;
        bundle = gradient::grad_loss_total_with_snapshot(inst, &snap, reg);
        let elapsed = clock.elapsed().as_secs_f64() * 1e3;
        log.record_step(
            inst,
            reg,
            &snap,
            bundle.grad_total.norm(),
            eta * scale,
            halvings,
            elapsed,
        );
    }

    if bundle.grad_total.norm() <= cfg.grad_tol {
        return Ok(log.finish(Termination::GradientTol));
    }
    Ok(log.finish(Termination::IterationCap))
}

/// The k-weighted average of the iterates plus the suboptimality bound that
/// the schedule analysis promises for it.
#[derive(Debug, Clone)]
pub struct AveragedIterate {
    pub x_bar: DVector<f64>,
    /// 2 lhat^2 / (alpha (T + 1)), with lhat the largest recorded gradient
    /// norm standing in for the (unknown) Lipschitz constant of the loss.
    /// Display value, not a guarantee.
    pub bound: f64,
    pub alpha: f64,
}

/// Weighted average sum_k 2k / (T (T + 1)) x_k over k = 1..T; the weights
/// sum to one.
pub fn averaged_iterate(run: &TrackedRun, alpha: f64) -> Result<AveragedIterate> {
    if run.schedule_alpha.is_none() {
        return Err(Error::NotScheduleRun);
    }
    let t = run.steps();
    if t == 0 {
        return Err(Error::EmptyRun);
    }
    let d = run.final_x().len();
    let normalizer = (t * (t + 1)) as f64;
    let mut x_bar = DVector::zeros(d);
    for k in 1..=t {
        x_bar += &run.iterates[k] * (2.0 * k as f64 / normalizer);
    }
    let lhat = run.max_grad_norm();
    let bound = 2.0 * lhat * lhat / (alpha * (t as f64 + 1.0));
    Ok(AveragedIterate {
        x_bar,
        bound,
        alpha,
    })
}

/// Newton iteration: solve H p = g by Cholesky (never forming the inverse),
/// then apply the safeguarded step x - p.
pub fn newton(
    inst: &ProblemInstance,
    reg: &RegConfig,
    x0: &DVector<f64>,
    cfg: &NewtonConfig,
) -> Result<TrackedRun> {
    cfg.validate()?;
    let mut snap = start_snapshot(inst, x0)?;
    let mut bundle = gradient::grad_loss_total_with_snapshot(inst, &snap, reg);
    let mut log = RunLog::start(inst, reg, &snap, bundle.grad_total.norm(), None);

    for t in 1..=cfg.max_iters {
        let clock = Instant::now();
        let hess =
            hessian::hessian_total_with_snapshot(inst, &snap, reg, HessianMode::ResidualCorrected)?;
        let p = solve_newton_system(&hess.h_total, &bundle.grad_total, cfg.regularize_fallback)?;

        if p.norm() <= cfg.step_tol {
            return Ok(log.finish(Termination::StepTol));
        }

        let direction = -p;
        let (next, scale, halvings) =
            safeguarded_step(inst, snap.x(), &direction, true, cfg.max_halvings, t)?;
        let step_norm = (next.x() - snap.x()).norm();
        snap = next;
        bundle = gradient::grad_loss_total_with_snapshot(inst, &snap, reg);
        let elapsed = clock.elapsed().as_secs_f64() * 1e3;
        log.record_step(
            inst,
            reg,
            &snap,
            bundle.grad_total.norm(),
            scale,
            halvings,
            elapsed,
        );
        if step_norm <= cfg.step_tol {
            return Ok(log.finish(Termination::StepTol));
        }
    }
    Ok(log.finish(Termination::IterationCap))
}

fn solve_newton_system(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    regularize_fallback: bool,
) -> Result<DVector<f64>> {
    if let Some(chol) = Cholesky::new(h.clone()) {
        return Ok(chol.solve(g));
    }
    if !regularize_fallback {
        return Err(Error::SingularHessian);
    }
    // One shot at a ridge lifted just above the roundoff floor.
    let mu = 1e-10 * hessian::spectral_norm_symmetric(h);
    let mut ridged = h.clone();
    for k in 0..h.nrows() {
        ridged[(k, k)] += mu.max(f64::MIN_POSITIVE);
    }
    Cholesky::new(ridged)
        .map(|chol| chol.solve(g))
        .ok_or(Error::SingularHessian)
}

/// Largest eigenvalue of the residual-corrected total Hessian at x; the
/// empirical smoothness constant used to pick eta = 1 / Lhat.
pub fn estimate_smoothness(
    inst: &ProblemInstance,
    reg: &RegConfig,
    x: &DVector<f64>,
) -> Result<f64> {
    let bundle = hessian::hessian_total(inst, x, reg, HessianMode::ResidualCorrected)?;
    Ok(hessian::spectral_norm_symmetric(&bundle.h_total))
}

/// Per-step contraction diagnostics for a run with known ground truth.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub distances: Vec<f64>,
    /// ratios[t] = r_{t+1} / r_t, only defined while r_t is above the floor.
    pub ratios: Vec<Option<f64>>,
    /// First iterate index where M r_t <= 0.1 l holds.
    pub good_point_at: Option<usize>,
    /// Whether every defined ratio after the good point stays within
    /// `threshold + slack`. `None` when the condition is never met.
    pub post_good_ratios_ok: Option<bool>,
    pub threshold: f64,
    pub slack: f64,
    /// Distances below this are considered converged-to-roundoff and produce
    /// no ratio.
    pub floor: f64,
}

pub const CONTRACTION_THRESHOLD: f64 = 0.4;
pub const CONTRACTION_SLACK: f64 = 0.1;

pub fn contraction_report(
    run: &TrackedRun,
    x_star: &DVector<f64>,
    l: f64,
    m: f64,
) -> ContractionReport {
    contraction_report_with(
        run,
        x_star,
        l,
        m,
        CONTRACTION_SLACK,
        1e-13 * (1.0 + x_star.norm()),
    )
}

pub fn contraction_report_with(
    run: &TrackedRun,
    x_star: &DVector<f64>,
    l: f64,
    m: f64,
    slack: f64,
    floor: f64,
) -> ContractionReport {
    let distances = run.distances(x_star);
    let ratios: Vec<Option<f64>> = distances
        .windows(2)
        .map(|w| (w[0] > floor).then(|| w[1] / w[0]))
        .collect();
    let good_point_at = distances.iter().position(|&r| m * r <= 0.1 * l);
    let post_good_ratios_ok = good_point_at.map(|start| {
        ratios[start..]
            .iter()
            .flatten()
            .all(|&ratio| ratio <= CONTRACTION_THRESHOLD + slack)
    });
    ContractionReport {
        distances,
        ratios,
        good_point_at,
        post_good_ratios_ok,
        threshold: CONTRACTION_THRESHOLD,
        slack,
        floor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{gen_instance, perturb_start, GenConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn derived_instance(c: Vec<f64>) -> ProblemInstance {
        ProblemInstance::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DVector::from_vec(vec![0.0, -1.0]),
            DVector::from_vec(c),
        )
        .unwrap()
    }

    #[test]
    fn gd_returns_immediately_from_a_stationary_start() {
        let generated = gen_instance(&GenConfig::pure(10, 3, 17)).unwrap();
        let cfg = GdConfig {
            grad_tol: 1e-10,
            ..GdConfig::fixed(0.5, 100)
        };
        let run =
            gradient_descent(&generated.instance, &generated.reg, &generated.x_star, &cfg).unwrap();
        assert_eq!(run.steps(), 0);
        assert_eq!(run.termination, Termination::GradientTol);
        assert_eq!(run.final_x(), &generated.x_star);
    }

    #[test]
    fn gd_decreases_the_derived_loss() {
        let inst = derived_instance(vec![0.5, 0.5]);
        let cfg = GdConfig::fixed(0.5, 100);
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &cfg,
        )
        .unwrap();
        assert_eq!(run.steps(), 100);
        for w in run.losses.windows(2) {
            assert!(
                w[1].loss_exp < w[0].loss_exp,
                "loss did not strictly decrease: {} -> {}",
                w[0].loss_exp,
                w[1].loss_exp
            );
        }
    }

    #[test]
    fn zero_step_size_keeps_the_iterate_fixed() {
        let inst = derived_instance(vec![0.5, 0.5]);
        let cfg = GdConfig::fixed(0.0, 5);
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &cfg,
        )
        .unwrap();
        assert_eq!(run.steps(), 5);
        for x in &run.iterates {
            assert_eq!(x[0], 1.0);
        }
    }

    #[test]
    fn recorded_iterates_respect_the_domain_guard() {
        let inst = derived_instance(vec![0.5, 0.5]);
        // A large step aimed at the s_1 = 0 hyperplane (x = 0) forces halving.
        let cfg = GdConfig::fixed(30.0, 3);
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &cfg,
        )
        .unwrap();
        for &m in &run.min_abs_s {
            assert!(m >= leverage::DELTA_MIN);
        }
    }

    #[test]
    fn averaged_iterate_weights() {
        let inst = derived_instance(vec![0.5, 0.5]);
        let cfg = GdConfig::schedule(2.0, 1);
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &cfg,
        )
        .unwrap();
        let avg = averaged_iterate(&run, 2.0).unwrap();
        // T = 1: the average is x_1 itself.
        assert_eq!(avg.x_bar, run.iterates[1]);

        let cfg = GdConfig::schedule(2.0, 12);
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &cfg,
        )
        .unwrap();
        let t = run.steps();
        let weight_sum: f64 = (1..=t).map(|k| 2.0 * k as f64 / (t * (t + 1)) as f64).sum();
        assert_abs_diff_eq!(weight_sum, 1.0, epsilon = 1e-12);
        let avg = averaged_iterate(&run, 2.0).unwrap();
        assert!(avg.bound > 0.0);

        // Constant iterates average to the constant.
        let frozen = GdConfig {
            step: StepPolicy::Schedule { alpha: f64::MAX },
            ..cfg
        };
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &frozen,
        )
        .unwrap();
        let avg = averaged_iterate(&run, f64::MAX).unwrap();
        assert_abs_diff_eq!(avg.x_bar[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn averaging_requires_a_schedule_run() {
        let inst = derived_instance(vec![0.5, 0.5]);
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &GdConfig::fixed(0.1, 3),
        )
        .unwrap();
        assert!(matches!(
            averaged_iterate(&run, 2.0),
            Err(Error::NotScheduleRun)
        ));
    }

    #[test]
    fn newton_is_immediate_at_the_planted_optimum() {
        let generated = gen_instance(&GenConfig::pure(10, 3, 29)).unwrap();
        let run = newton(
            &generated.instance,
            &generated.reg,
            &generated.x_star,
            &NewtonConfig::with_tol(1e-12, 10),
        )
        .unwrap();
        assert_eq!(run.steps(), 0);
        assert_eq!(run.termination, Termination::StepTol);
    }

    #[test]
    fn newton_converges_quadratically_on_the_derived_instance() {
        let inst = derived_instance(vec![0.8, 0.2]);
        let run = newton(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.05]),
            &NewtonConfig::with_tol(1e-14, 15),
        )
        .unwrap();
        assert!(run.steps() <= 15);
        assert!(
            (run.final_x()[0] - 1.0).abs() <= 1e-10,
            "final x = {}",
            run.final_x()[0]
        );
    }

    #[test]
    fn newton_solves_pure_quadratics_in_one_step() {
        // Square invertible case: sigma(x) = I identically, so with c = 1 the
        // residual term vanishes for every x and L = L_reg = 0.5 ||W x||^2 is
        // exactly quadratic with its minimizer x = 0 inside the domain
        // (s(0) = -b stays clear of zero).
        let inst = ProblemInstance::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap();
        let reg = RegConfig::new(DVector::from_vec(vec![1.0, 1.0]), 1e-3, 0.01).unwrap();
        let run = newton(
            &inst,
            &reg,
            &DVector::from_vec(vec![3.0, -5.0]),
            &NewtonConfig::with_tol(1e-12, 5),
        )
        .unwrap();
        assert_eq!(run.halvings.first(), Some(&0));
        assert_abs_diff_eq!(run.iterates[1], DVector::zeros(2), epsilon = 1e-12);
        assert_eq!(run.termination, Termination::StepTol);
    }

    #[test]
    fn deterministic_runs_are_bitwise_identical() {
        let generated = gen_instance(&GenConfig::pure(12, 3, 31)).unwrap();
        let x0 = perturb_start(&generated.x_star, 0.05, 7);
        let cfg = NewtonConfig::with_tol(1e-12, 10);
        let first = newton(&generated.instance, &generated.reg, &x0, &cfg).unwrap();
        let second = newton(&generated.instance, &generated.reg, &x0, &cfg).unwrap();
        assert_eq!(first.iterates, second.iterates);
        assert_eq!(first.grad_norms, second.grad_norms);

        let gd_cfg = GdConfig::fixed(0.05, 20);
        let first = gradient_descent(&generated.instance, &generated.reg, &x0, &gd_cfg).unwrap();
        let second = gradient_descent(&generated.instance, &generated.reg, &x0, &gd_cfg).unwrap();
        assert_eq!(first.iterates, second.iterates);
    }

    #[test]
    fn contraction_report_flags_the_good_point_regime() {
        let generated = gen_instance(&GenConfig::pure(20, 4, 37)).unwrap();
        let rho = 1e-2 * (1.0 + generated.x_star.norm());
        let x0 = perturb_start(&generated.x_star, rho, 11);
        let run = newton(
            &generated.instance,
            &generated.reg,
            &x0,
            &NewtonConfig::with_tol(1e-14, 15),
        )
        .unwrap();
        // Measure l at the optimum and a local Hessian-difference slope for M.
        let l = hessian::hessian_total(
            &generated.instance,
            &generated.x_star,
            &generated.reg,
            HessianMode::ResidualCorrected,
        )
        .unwrap()
        .min_eigenvalue;
        let h_star = hessian::hessian_total(
            &generated.instance,
            &generated.x_star,
            &generated.reg,
            HessianMode::ResidualCorrected,
        )
        .unwrap()
        .h_total;
        let h_start = hessian::hessian_total(
            &generated.instance,
            &x0,
            &generated.reg,
            HessianMode::ResidualCorrected,
        )
        .unwrap()
        .h_total;
        let m = hessian::spectral_norm_symmetric(&(h_start - h_star)) / rho;

        let report = contraction_report(&run, &generated.x_star, l, m);
        assert!(report.distances[0] > 0.0);
        assert!(
            report.good_point_at.is_some(),
            "basin never entered: l={l}, M={m}"
        );
        assert_eq!(report.post_good_ratios_ok, Some(true));
        assert!(*report.distances.last().unwrap() <= 1e-10);
    }

    #[test]
    fn contraction_report_handles_never_good_runs() {
        let inst = derived_instance(vec![0.5, 0.5]);
        let run = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![1.0]),
            &GdConfig::fixed(0.0, 3),
        )
        .unwrap();
        // Enormous M: the good-point condition M r <= 0.1 l never holds.
        let report = contraction_report(&run, &DVector::from_vec(vec![5.0]), 1e-3, 1e12);
        assert_eq!(report.good_point_at, None);
        assert_eq!(report.post_good_ratios_ok, None);
    }

    #[test]
    fn invalid_start_is_reported() {
        let inst = derived_instance(vec![0.5, 0.5]);
        // x = 0 zeroes the first scale entry.
        let err = gradient_descent(
            &inst,
            &RegConfig::pure(2),
            &DVector::from_vec(vec![0.0]),
            &GdConfig::fixed(0.1, 3),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidStart { .. }));
    }
}
