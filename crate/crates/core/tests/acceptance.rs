//! Acceptance suite: the exit criteria of the build, one test per criterion.
//!
//! Every criterion prints a `PASS` line with its measured quantities so a run
//! with `--nocapture` doubles as the verification report.

use std::time::Instant;

use levinv::diagnostics::{self, BenchGrid, Region};
use levinv::generator::{gen_instance, perturb_start, GenConfig};
use levinv::gradient;
use levinv::hessian::{self, HessianMode};
use levinv::instance::{ProblemInstance, RegConfig};
use levinv::leverage;
use levinv::objective;
use levinv::oracle::{self, FdConfig};
use levinv::solver::{self, GdConfig, NewtonConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The shared instance pool for the derivative criteria: 100 seeded random
/// valid instances with n in [5, 40], d in [1, 8], nonzero weights, evaluated
/// at a point safely inside the planted margin.
fn derivative_pool() -> Vec<(ProblemInstance, RegConfig, DVector<f64>)> {
    let mut pool = Vec::with_capacity(100);
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    for k in 0..100u64 {
        let n = rng.random_range(5..=40);
        let d = rng.random_range(1..=8.min(n));
        let generated = gen_instance(&GenConfig::pure(n, d, 1000 + k)).unwrap();
        let w = DVector::from_fn(n, |_, _| rng.random_range(0.0..0.5));
        let reg = RegConfig::new(w, 1e-3, 0.01).unwrap();
        let x = perturb_start(&generated.x_star, 0.05, 2000 + k);
        pool.push((generated.instance, reg, x));
    }
    pool
}

fn rel_err(analytic: &DVector<f64>, reference: &DVector<f64>) -> f64 {
    (analytic - reference).norm() / analytic.norm().max(reference.norm()).max(1.0)
}

#[test]
fn a1_gradient_correctness() {
    let clock = Instant::now();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let max_err = single.install(|| {
        let mut max_err = 0.0_f64;
        for (inst, reg, x) in derivative_pool() {
            let bundle = gradient::grad_loss_total(&inst, &x, &reg).unwrap();
            let inst_fd = inst.clone();
            let reg_fd = reg.clone();
            let f = move |p: &DVector<f64>| {
                objective::loss_total(&inst_fd, p, &reg_fd).map(|b| b.loss_total)
            };
            let fd = oracle::fd_gradient(f, &x, &FdConfig::gradient()).unwrap();
            max_err = max_err.max(rel_err(&bundle.grad_total, &fd));
        }
        max_err
    });
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(
        max_err <= 1e-6,
        "A1 FAIL: max relative gradient error {max_err:.3e}"
    );
    assert!(
        elapsed <= 30.0,
        "A1 FAIL: runtime {elapsed:.1}s exceeds 30s"
    );
    println!(
        "A1 gradient correctness: PASS (max rel err {max_err:.3e}, {elapsed:.1}s single-threaded)"
    );
}

#[test]
fn a2_hessian_correctness_and_internal_identity() {
    let mut max_fd_err = 0.0_f64;
    let mut max_identity_err = 0.0_f64;
    for (inst, _reg, x) in derivative_pool() {
        let snap = leverage::snapshot(&inst, &x, true).unwrap();
        let h = hessian::hessian_loss_exp(&inst, &snap, HessianMode::ResidualCorrected).unwrap();

        let inst_fd = inst.clone();
        let f = move |p: &DVector<f64>| {
            let snap = leverage::snapshot(&inst_fd, p, false)?;
            Ok(objective::loss_exp(&inst_fd, &snap))
        };
        let fd = oracle::fd_hessian(f, &x, &FdConfig::hessian()).unwrap();
        max_fd_err = max_fd_err.max((&h - &fd).amax() / (1.0 + h.amax()));

        // Literal-mode six-term assembly against the curvature identity.
        for i in 0..inst.n() {
            let terms = hessian::hessian_terms(&snap, i, inst.c()[i], HessianMode::PaperLiteral)
                .unwrap()
                .sum();
            let grad_i = gradient::grad_sigma_diag_i(&snap, i).unwrap();
            let direct = &grad_i * grad_i.transpose()
                + hessian::hessian_sigma_ii(&snap, i).unwrap() * snap.sigma_diag()[i];
            max_identity_err = max_identity_err.max((terms - direct).amax());
        }
    }
    assert!(
        max_fd_err <= 1e-4,
        "A2 FAIL: max normalized Hessian error {max_fd_err:.3e}"
    );
    assert!(
        max_identity_err <= 1e-10,
        "A2 FAIL: six-term vs curvature identity gap {max_identity_err:.3e}"
    );
    println!(
        "A2 hessian correctness: PASS (fd err {max_fd_err:.3e}, identity gap {max_identity_err:.3e})"
    );
}

#[test]
fn a3_projection_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    let mut max_idem = 0.0_f64;
    let mut max_trace = 0.0_f64;
    let mut max_oracle_gap = 0.0_f64;
    for k in 0..100u64 {
        let n = rng.random_range(5..=50);
        let d = rng.random_range(1..=10.min(n));
        let generated = gen_instance(&GenConfig::pure(n, d, 3000 + k)).unwrap();
        let snap = leverage::snapshot(&generated.instance, &generated.x_star, true).unwrap();
        let sigma = snap.sigma_full().unwrap();

        let idem = ((sigma * sigma) - sigma).norm() / n as f64;
        max_idem = max_idem.max(idem);
        assert!(
            idem <= 1e-8,
            "A3 FAIL: idempotency defect {idem:.3e} (n = {n})"
        );

        let trace: f64 = snap.sigma_diag().iter().sum();
        max_trace = max_trace.max((trace - d as f64).abs());
        assert!(
            (trace - d as f64).abs() <= 1e-8,
            "A3 FAIL: trace {trace} vs d = {d}"
        );

        for &v in snap.sigma_diag().iter() {
            assert!(
                (-1e-12..=1.0 + 1e-12).contains(&v),
                "A3 FAIL: score {v} outside [-1e-12, 1+1e-12]"
            );
        }

        let direct = oracle::sigma_direct(&generated.instance, &generated.x_star).unwrap();
        let gap = (sigma - direct).amax();
        max_oracle_gap = max_oracle_gap.max(gap);
        assert!(gap <= 1e-10, "A3 FAIL: QR oracle gap {gap:.3e}");
    }
    println!(
        "A3 projection invariants: PASS (idem {max_idem:.3e}, trace {max_trace:.3e}, oracle gap {max_oracle_gap:.3e})"
    );
}

/// The 20 pure-mode contraction instances shared by A4 and A5.
fn contraction_pool() -> Vec<(ProblemInstance, RegConfig, DVector<f64>, DVector<f64>)> {
    (0..20u64)
        .map(|k| {
            let generated = gen_instance(&GenConfig {
                margin: 0.5,
                ..GenConfig::pure(20, 4, 4000 + k)
            })
            .unwrap();
            let rho = 1e-2 * (1.0 + generated.x_star.norm());
            let x0 = perturb_start(&generated.x_star, rho, 5000 + k);
            (generated.instance, generated.reg, generated.x_star, x0)
        })
        .collect()
}

#[test]
fn a4_newton_contraction() {
    let clock = Instant::now();
    let mut worst_final = 0.0_f64;
    let mut worst_ratio = 0.0_f64;
    for (inst, reg, x_star, x0) in contraction_pool() {
        let run = solver::newton(&inst, &reg, &x0, &NewtonConfig::with_tol(1e-14, 15)).unwrap();
        assert!(run.steps() <= 15);

        let l = hessian::hessian_total(&inst, &x_star, &reg, HessianMode::ResidualCorrected)
            .unwrap()
            .min_eigenvalue;
        let h_star = hessian::hessian_total(&inst, &x_star, &reg, HessianMode::ResidualCorrected)
            .unwrap()
            .h_total;
        let h_0 = hessian::hessian_total(&inst, &x0, &reg, HessianMode::ResidualCorrected)
            .unwrap()
            .h_total;
        let m = hessian::spectral_norm_symmetric(&(h_0 - h_star)) / (&x0 - &x_star).norm();

        let report = solver::contraction_report(&run, &x_star, l, m);
        let final_r = *report.distances.last().unwrap();
        worst_final = worst_final.max(final_r);
        assert!(final_r <= 1e-10, "A4 FAIL: final distance {final_r:.3e}");

        if let Some(start) = report.good_point_at {
            for ratio in report.ratios[start..].iter().flatten() {
                worst_ratio = worst_ratio.max(*ratio);
                assert!(
                    *ratio <= 0.5,
                    "A4 FAIL: post-good-point contraction ratio {ratio:.3} exceeds 0.5"
                );
            }
        } else {
            panic!("A4 FAIL: good-point condition never met (l = {l:.3e}, M = {m:.3e})");
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(
        elapsed <= 10.0,
        "A4 FAIL: runtime {elapsed:.1}s exceeds 10s"
    );
    println!(
        "A4 newton contraction: PASS (worst final r {worst_final:.3e}, worst ratio {worst_ratio:.3}, {elapsed:.1}s)"
    );
}

#[test]
fn a5_gradient_descent_decrease() {
    let mut worst_final_exp = 0.0_f64;
    for (inst, reg, _x_star, x0) in contraction_pool() {
        let smoothness = solver::estimate_smoothness(&inst, &reg, &x0).unwrap();
        let cfg = GdConfig {
            grad_tol: 1e-16,
            ..GdConfig::fixed(1.0 / smoothness, 1000)
        };
        let run = solver::gradient_descent(&inst, &reg, &x0, &cfg).unwrap();

        for w in run.losses.windows(2) {
            assert!(
                w[1].loss_total <= w[0].loss_total + 1e-15,
                "A5 FAIL: loss increased {} -> {}",
                w[0].loss_total,
                w[1].loss_total
            );
        }
        let final_exp = run.final_loss().loss_exp;
        worst_final_exp = worst_final_exp.max(final_exp);
        assert!(
            final_exp <= 1e-4,
            "A5 FAIL: final residual loss {final_exp:.3e}"
        );
    }
    println!(
        "A5 gradient descent decrease: PASS (worst final residual loss {worst_final_exp:.3e})"
    );
}

#[test]
fn a6_psd_certificate() {
    let l = 1e-3;
    let mut worst_reg_gap = f64::INFINITY;
    let mut worst_exp_min = f64::INFINITY;
    for k in 0..20u64 {
        let generated = gen_instance(&GenConfig::pure(15, 4, 6000 + k)).unwrap();
        let inst = generated.instance;
        let (sigma_min, _) = inst.singular_extent();

        let w = DVector::from_element(15, (l / (sigma_min * sigma_min)).sqrt());
        let reg = RegConfig::new(w, l, 0.01).unwrap();
        let h_reg = hessian::hessian_loss_reg(&inst, &reg);
        let lambda_min = hessian::min_symmetric_eigenvalue(&h_reg);
        worst_reg_gap = worst_reg_gap.min(lambda_min - l);
        assert!(
            lambda_min >= l - 1e-12,
            "A6 FAIL: lambda_min(H_reg) = {lambda_min:.6e} < l - 1e-12"
        );

        let snap = leverage::snapshot(&inst, &generated.x_star, true).unwrap();
        let h_exp =
            hessian::hessian_loss_exp(&inst, &snap, HessianMode::ResidualCorrected).unwrap();
        let exp_min = hessian::min_symmetric_eigenvalue(&h_exp);
        worst_exp_min = worst_exp_min.min(exp_min);
        assert!(
            exp_min >= -1e-10,
            "A6 FAIL: Gauss-Newton Hessian at the planted optimum has lambda_min {exp_min:.3e}"
        );
    }
    println!(
        "A6 psd certificate: PASS (min reg margin {worst_reg_gap:.3e}, min GN eigenvalue {worst_exp_min:.3e})"
    );
}

#[test]
fn a7_spectral_and_lipschitz_inequalities() {
    // Stripped-term norms on a spread of snapshots.
    let mut rng = ChaCha8Rng::seed_from_u64(0xA7);
    for k in 0..15u64 {
        let n = rng.random_range(5..=20);
        let d = rng.random_range(1..=5.min(n));
        let generated = gen_instance(&GenConfig::pure(n, d, 7000 + k)).unwrap();
        let snap = leverage::snapshot(&generated.instance, &generated.x_star, true).unwrap();
        for i in 0..n {
            let report = hessian::d_term_spectral_report(&snap, i).unwrap();
            for (q, (&norm, &bound)) in report.norms.iter().zip(report.bounds.iter()).enumerate() {
                assert!(
                    norm <= bound + 1e-9,
                    "A7 FAIL: stripped term {q} norm {norm:.3} exceeds {bound}"
                );
            }
        }
    }

    // Hessian-level and per-term Lipschitz ratios at measured (beta, R).
    let generated = gen_instance(&GenConfig::pure(10, 3, 7100)).unwrap();
    let region = Region {
        center: generated.x_star.clone(),
        radius: 0.1,
    };
    let report = diagnostics::empirical_hessian_lipschitz(
        &generated.instance,
        &generated.reg,
        &region,
        200,
        0xA7,
    )
    .unwrap();
    assert!(
        report.max_hessian_ratio <= report.hessian_bound,
        "A7 FAIL: Hessian ratio {:.3e} exceeds 812 beta^-9 R^5 = {:.3e}",
        report.max_hessian_ratio,
        report.hessian_bound
    );
    for q in 0..6 {
        assert!(
            report.per_term_ratios[q] <= report.per_term_bounds[q],
            "A7 FAIL: term {q} ratio {:.3e} exceeds bound {:.3e}",
            report.per_term_ratios[q],
            report.per_term_bounds[q]
        );
    }
    assert!(
        report.basic.all_within,
        "A7 FAIL: basic-map ratios exceed their bounds"
    );
    println!(
        "A7 spectral/lipschitz inequalities: PASS (hessian ratio {:.3e} vs bound {:.3e}, tightness gap {:.1e}x; per-term gaps {:?})",
        report.max_hessian_ratio,
        report.hessian_bound,
        report.tightness_gap,
        report
            .per_term_ratios
            .iter()
            .zip(report.per_term_bounds.iter())
            .map(|(r, b)| if *r > 0.0 { b / r } else { f64::INFINITY })
            .map(|g| format!("{g:.1e}"))
            .collect::<Vec<_>>()
    );
}

#[test]
fn a8_complexity_consistency() {
    let clock = Instant::now();
    let grid = BenchGrid {
        sizes: vec![(256, 8), (512, 8), (1024, 8), (2048, 8)],
        measure_hessian: false,
    };
    let report = diagnostics::timing_bench(&grid, 3, 0xA8).unwrap();
    let slope = report.grad_slope_vs_n[0].slope;
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(
        slope <= 2.4,
        "A8 FAIL: gradient-iteration log-log slope {slope:.3}"
    );
    assert!(
        elapsed <= 300.0,
        "A8 FAIL: runtime {elapsed:.1}s exceeds 5 minutes"
    );
    let times: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("n={} {:.1}ms", r.n, r.grad_median_ms))
        .collect();
    println!("A8 complexity consistency: PASS (slope {slope:.3} over {times:?}, {elapsed:.1}s)");
}

#[test]
fn a9_objective_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA9);
    let mut max_rel = 0.0_f64;
    for k in 0..50u64 {
        let n = rng.random_range(5..=30);
        let d = rng.random_range(1..=6.min(n));
        let generated = gen_instance(&GenConfig::pure(n, d, 9000 + k)).unwrap();
        for radius in [0.0, 0.05, 0.2] {
            let x = perturb_start(&generated.x_star, radius, 9500 + k);
            let snap = match leverage::snapshot(&generated.instance, &x, false) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let exp = objective::loss_exp(&generated.instance, &snap);
            let frob = objective::loss_frobenius(&generated.instance, &snap);
            let rel = (exp - 0.5 * frob * frob).abs() / exp.max(1e-300);
            max_rel = max_rel.max(rel);
            assert!(
                rel <= 1e-12,
                "A9 FAIL: loss_exp {exp:.6e} vs 0.5 frob^2 {:.6e} (rel {rel:.3e})",
                0.5 * frob * frob
            );
        }
    }
    println!("A9 objective equivalence: PASS (max rel discrepancy {max_rel:.3e})");
}

/// Not a criterion: the 2x1 derived worked example pinned end to end, so a
/// regression in any layer shows up here with small numbers.
#[test]
fn derived_example_end_to_end() {
    let inst = ProblemInstance::new(
        DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
        DVector::from_vec(vec![0.0, -1.0]),
        DVector::from_vec(vec![0.5, 0.5]),
    )
    .unwrap();
    let x = DVector::from_vec(vec![1.0]);
    let snap = leverage::snapshot(&inst, &x, true).unwrap();
    assert!((snap.sigma_diag()[0] - 0.8).abs() < 1e-12);
    assert!((objective::loss_exp(&inst, &snap) - 0.09).abs() < 1e-14);
    let g = gradient::grad_loss_exp(&inst, &snap);
    assert!((g[0] + 0.096).abs() < 1e-12);
}
