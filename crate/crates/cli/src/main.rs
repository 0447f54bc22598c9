//! `levinv` — generate, solve, verify, and benchmark leverage-score
//! inversion problems from the command line.
//!
//! Exit codes form a stable contract:
//!   0  success (solve: tolerance reached)
//!   2  usage error or unreadable input
//!   3  instance generation failure
//!   4  solve hit the iteration cap
//!   5  solve trapped by the domain safeguard
//!   6  verification threshold breached

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use levinv::diagnostics::{self, BenchGrid, Region};
use levinv::error::Error;
use levinv::generator::{self, GenConfig, GenMode};
use levinv::gradient;
use levinv::hessian::{self, HessianMode};
use levinv::instance::{
    load_instance, save_instance, validate, Method, ProblemInstance, RegConfig, SolveSettings,
};
use levinv::leverage;
use levinv::objective;
use levinv::oracle::{self, FdConfig};
use levinv::solver::{self, GdConfig, NewtonConfig, StepPolicy, Termination};

mod manifest;
mod report;

use manifest::RunManifest;

const EXIT_USAGE: u8 = 2;
const EXIT_GEN_FAILURE: u8 = 3;
const EXIT_ITERATION_CAP: u8 = 4;
const EXIT_STEP_TRAPPED: u8 = 5;
const EXIT_VERIFY_BREACH: u8 = 6;

#[derive(Parser, Debug)]
#[command(
    name = "levinv",
    version,
    about = "Recover parameters from a leverage-score vector",
    long_about = None
)]
struct Cli {
    /// Worker threads for gradient/Hessian assembly. 1 forces fully
    /// sequential evaluation; results are identical either way.
    #[arg(long, global = true, env = "LEVINV_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance with planted ground truth.
    Gen(GenArgs),
    /// Run a solver on an instance file and emit a convergence CSV.
    Solve(SolveArgs),
    /// Check the analytic formulas against the independent oracles.
    Verify(VerifyArgs),
    /// Norm-bound and Hessian-Lipschitz diagnostics around a center point.
    Diag(DiagArgs),
    /// Wall-clock scaling of the per-iteration kernels over an (n, d) grid.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Pure,
    Regularized,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lower bound on |s(x*)_i| enforced at the planted point.
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Pure)]
    mode: ModeArg,
    /// Strong-convexity target (regularized mode).
    #[arg(long)]
    l: Option<f64>,
    /// Well-posedness margin in (0, 0.1) (regularized mode).
    #[arg(long)]
    beta: Option<f64>,
    /// Std-dev of Gaussian noise added to the stored scores (clamped to [0,1]).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Output prefix; writes <out>.instance.txt and <out>.truth.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Gd,
    Newton,
}

#[derive(Args, Debug, Serialize)]
#[command(
    after_help = "Output CSV columns: iter,loss_exp,loss_reg,loss_total,grad_norm,\
step_size,halvings,r_t,time_ms. Step columns are empty on the iter-0 row; r_t is empty \
without --truth."
)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Newton)]
    method: MethodArg,
    /// Fixed step size for gd (mutually exclusive with --alpha).
    #[arg(long, conflicts_with = "alpha")]
    eta: Option<f64>,
    /// Schedule parameter: step 2 / (alpha (k+1)).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    step_tol: f64,
    /// Ground-truth sidecar; enables the r_t column and the perturbed start.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Start radius around x* (default 1e-2 (1 + ||x*||); needs --truth).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit start point, comma-separated (overrides --truth start).
    #[arg(long)]
    x0: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Pure)]
    mode: ModeArg,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Convergence CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HessianModeArg {
    ResidualCorrected,
    PaperLiteral,
}

impl From<HessianModeArg> for HessianMode {
    fn from(value: HessianModeArg) -> Self {
        match value {
            HessianModeArg::ResidualCorrected => HessianMode::ResidualCorrected,
            HessianModeArg::PaperLiteral => HessianMode::PaperLiteral,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AgainstArg {
    /// Compare the selected Hessian mode against finite differences.
    Fd,
    /// Check the six-term assembly against the curvature identity.
    Internal,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Verify a single instance file at seeded random valid points.
    #[arg(long, conflicts_with = "random")]
    instance: Option<PathBuf>,
    /// Verify generated instances: N D COUNT SEED.
    #[arg(long, num_args = 4, value_names = ["N", "D", "COUNT", "SEED"])]
    random: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value_t = HessianModeArg::ResidualCorrected)]
    mode: HessianModeArg,
    #[arg(long, value_enum, default_value_t = AgainstArg::Fd)]
    against: AgainstArg,
}

#[derive(Args, Debug, Serialize)]
#[command(
    after_help = "Output CSV columns: section,name,value. Sections: lipschitz \
(measured ratios and bounds at (beta, R)), basic (per-map ratios), norms (single-point \
norm bounds)."
)]
struct DiagArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Ground-truth sidecar providing the sampling center.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Explicit center, comma-separated floats.
    #[arg(long)]
    center: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    radius: f64,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(
    after_help = "Outputs <out>.cells.csv with columns n,d,snapshot_median_ms,\
grad_median_ms,hessian_median_ms and <out>.slopes.csv with columns quantity,fixed,slope,points."
)]
struct BenchArgs {
    /// Grid cells as n:d pairs, e.g. "256:8,512:8,1024:8".
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also time the full Hessian assembly (cubic in n; keep cells small).
    #[arg(long, default_value_t = false)]
    hessian: bool,
    /// Output prefix; writes <out>.cells.csv and <out>.slopes.csv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        // Ignore the error if a pool already exists (tests call main twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let started = Instant::now();
    let code = match cli.command {
        Command::Gen(args) => cmd_gen(args, started),
        Command::Solve(args) => cmd_solve(args, started),
        Command::Verify(args) => cmd_verify(args, started),
        Command::Diag(args) => cmd_diag(args, started),
        Command::Bench(args) => cmd_bench(args, started),
    };
    match code {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn parse_vector(text: &str) -> Result<DVector<f64>, Error> {
    let values = text
        .split(',')
        .map(|tok| tok.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| Error::InvalidConfig(format!("bad vector literal: {e}")))?;
    Ok(DVector::from_vec(values))
}

fn reg_from_flags(
    inst: &ProblemInstance,
    mode: ModeArg,
    l: Option<f64>,
    beta: Option<f64>,
) -> Result<RegConfig, Error> {
    match mode {
        ModeArg::Pure => Ok(RegConfig::pure(inst.n())),
        ModeArg::Regularized => {
            let l = l.ok_or_else(|| Error::InvalidConfig("--mode regularized needs --l".into()))?;
            let beta =
                beta.ok_or_else(|| Error::InvalidConfig("--mode regularized needs --beta".into()))?;
            let (sigma_min, _) = inst.singular_extent();
            RegConfig::derived(l, beta, sigma_min, inst.n())
        }
    }
}

fn cmd_gen(args: GenArgs, started: Instant) -> Result<ExitCode, Error> {
    let mode = match args.mode {
        ModeArg::Pure => GenMode::Pure,
        ModeArg::Regularized => {
            let l = args
                .l
                .ok_or_else(|| Error::InvalidConfig("--mode regularized needs --l".into()))?;
            let beta = args
                .beta
                .ok_or_else(|| Error::InvalidConfig("--mode regularized needs --beta".into()))?;
            GenMode::Regularized { l, beta }
        }
    };
    let cfg = GenConfig {
        n: args.n,
        d: args.d,
        seed: args.seed,
        margin: args.margin,
        mode,
        start_radius: 0.0,
    };

    let generated = match generator::gen_instance(&cfg) {
        Ok(g) => g,
        // Bad flag values surface as config errors (usage, exit 2); only a
        // genuine sampling failure is a generation failure.
        Err(err @ Error::ResamplingExhausted { .. }) => {
            eprintln!("generation failed: {err}");
            return Ok(ExitCode::from(EXIT_GEN_FAILURE));
        }
        Err(err) => return Err(err),
    };
    let instance = if args.noise > 0.0 {
        generator::noisy_scores(&generated.instance, args.noise, args.seed)?
    } else {
        generated.instance.clone()
    };

    let report = validate(&instance);
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }

    let instance_path = args.out.with_extension("instance.txt");
    let truth_path = args.out.with_extension("truth.txt");
    save_instance(&instance, &instance_path)?;
    generator::save_ground_truth(
        &generator::GroundTruth {
            x_star: generated.x_star.clone(),
            s_star: generated.s_star.clone(),
            seed: args.seed,
            margin: args.margin,
        },
        &truth_path,
    )?;

    let mut manifest = RunManifest::new("gen", args.seed, &args, started);
    manifest.push_output(&instance_path);
    manifest.push_output(&truth_path);
    manifest.insert_extra(
        "reg_config",
        serde_json::json!({
            "pure": generated.reg.is_pure(),
            "l": generated.reg.l(),
            "beta": generated.reg.beta(),
            "w_first": generated.reg.w().get(0).copied(),
        }),
    );
    manifest.print()?;
    Ok(ExitCode::SUCCESS)
}

fn load_instance_or_usage(path: &Path) -> Result<ProblemInstance, ExitCode> {
    match load_instance(path) {
        Ok(inst) => Ok(inst),
        Err(err) => {
            eprintln!("cannot read instance {}: {err}", path.display());
            Err(ExitCode::from(EXIT_USAGE))
        }
    }
}

fn cmd_solve(args: SolveArgs, started: Instant) -> Result<ExitCode, Error> {
    let inst = match load_instance_or_usage(&args.instance) {
        Ok(inst) => inst,
        Err(code) => return Ok(code),
    };
    let reg = reg_from_flags(&inst, args.mode, args.l, args.beta)?;

    let truth = match &args.truth {
        Some(path) => Some(generator::load_ground_truth(path)?),
        None => None,
    };
    let x0 = if let Some(text) = &args.x0 {
        let x0 = parse_vector(text)?;
        if x0.len() != inst.d() {
            return Err(Error::InvalidConfig(format!(
                "--x0 has {} entries, instance needs {}",
                x0.len(),
                inst.d()
            )));
        }
        x0
    } else if let Some(truth) = &truth {
        let rho = args.rho.unwrap_or(1e-2 * (1.0 + truth.x_star.norm()));
        generator::perturb_start(&truth.x_star, rho, args.seed)
    } else {
        DVector::zeros(inst.d())
    };

    let settings = SolveSettings {
        method: match args.method {
            MethodArg::Gd => Method::Gd,
            MethodArg::Newton => Method::Newton,
        },
        max_iters: args.iters,
        grad_tol: args.grad_tol,
        step_tol: args.step_tol,
        eta: args.eta,
        alpha: args.alpha,
        seed: args.seed,
    };
    settings.validate()?;

    let outcome = match settings.method {
        Method::Gd => {
            let step = match (settings.eta, settings.alpha) {
                (Some(eta), None) => StepPolicy::Fixed { eta },
                (None, Some(alpha)) => StepPolicy::Schedule { alpha },
                (None, None) => StepPolicy::Fixed { eta: 1e-2 },
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let cfg = GdConfig {
                step,
                max_iters: settings.max_iters,
                grad_tol: settings.grad_tol,
                max_halvings: 60,
                averaging: matches!(step, StepPolicy::Schedule { .. }),
            };
            solver::gradient_descent(&inst, &reg, &x0, &cfg)
        }
        Method::Newton => {
            let cfg = NewtonConfig {
                max_iters: settings.max_iters,
                step_tol: settings.step_tol,
                max_halvings: 60,
                regularize_fallback: true,
                l_estimate: args.l,
                m_estimate: None,
            };
            solver::newton(&inst, &reg, &x0, &cfg)
        }
    };

    let run = match outcome {
        Ok(run) => run,
        Err(Error::StepTrapped { iteration, cap }) => {
            // Diagnostic row in the CSV schema so downstream tooling sees
            // where the run died.
            eprintln!("iter,loss_exp,loss_reg,loss_total,grad_norm,step_size,halvings,r_t,time_ms");
            eprintln!("{iteration},,,,,,{cap},,");
            eprintln!("solve trapped: step halving cap {cap} exhausted at iteration {iteration}");
            return Ok(ExitCode::from(EXIT_STEP_TRAPPED));
        }
        Err(Error::InvalidStart { source }) => {
            eprintln!("invalid start point: {source}");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
        Err(other) => return Err(other),
    };

    report::write_run_csv(&run, truth.as_ref().map(|t| &t.x_star), &args.out)?;

    let mut manifest = RunManifest::new("solve", args.seed, &args, started);
    manifest.push_output(&args.out);
    manifest.insert_extra(
        "result",
        serde_json::json!({
            "iterations": run.steps(),
            "termination": format!("{:?}", run.termination),
            "final_loss_total": run.final_loss().loss_total,
            "final_grad_norm": run.grad_norms.last(),
            "final_r": truth.as_ref().map(|t| (run.final_x() - &t.x_star).norm()),
        }),
    );
    manifest.print()?;

    match run.termination {
        Termination::GradientTol | Termination::StepTol => Ok(ExitCode::SUCCESS),
        Termination::IterationCap => Ok(ExitCode::from(EXIT_ITERATION_CAP)),
    }
}

struct VerifyCase {
    label: String,
    instance: ProblemInstance,
    point: DVector<f64>,
}

fn verify_cases(args: &VerifyArgs) -> Result<Vec<VerifyCase>, Error> {
    if let Some(spec) = &args.random {
        let (n, d, count, seed) = (spec[0] as usize, spec[1] as usize, spec[2], spec[3]);
        let mut cases = Vec::with_capacity(count as usize);
        for k in 0..count {
            let generated = generator::gen_instance(&GenConfig::pure(n, d, seed + k))?;
            let point = generator::perturb_start(&generated.x_star, 0.05, seed + k);
            cases.push(VerifyCase {
                label: format!("random[{k}]"),
                instance: generated.instance,
                point,
            });
        }
        Ok(cases)
    } else if let Some(path) = &args.instance {
        let instance = load_instance(path)?;
        // Deterministic probe points: scaled basis directions around zero,
        // keeping the first point that admits a snapshot.
        let mut cases = Vec::new();
        'outer: for scale in [0.1, 0.37, 1.3, -0.8, 2.9] {
            for shift in 0..4 {
                let point = DVector::from_fn(instance.d(), |j, _| {
                    scale * (1.0 + 0.31 * ((j + shift) as f64))
                });
                if leverage::snapshot(&instance, &point, false).is_ok() {
                    cases.push(VerifyCase {
                        label: format!("probe[{}]", cases.len()),
                        instance: instance.clone(),
                        point,
                    });
                    if cases.len() >= 3 {
                        break 'outer;
                    }
                    break;
                }
            }
        }
        if cases.is_empty() {
            return Err(Error::InvalidConfig(
                "no valid probe point found for this instance; supply --random instead".into(),
            ));
        }
        Ok(cases)
    } else {
        Err(Error::InvalidConfig(
            "verify needs --instance or --random".into(),
        ))
    }
}

fn cmd_verify(args: VerifyArgs, started: Instant) -> Result<ExitCode, Error> {
    const SIGMA_TOL: f64 = 1e-10;
    const GRAD_TOL: f64 = 1e-6;
    const HESS_TOL: f64 = 1e-4;
    const INTERNAL_TOL: f64 = 1e-10;

    let cases = verify_cases(&args)?;
    let mode: HessianMode = args.mode.into();
    let mut max_sigma = 0.0_f64;
    let mut max_grad = 0.0_f64;
    let mut max_hess = 0.0_f64;
    let mut worst_case = String::new();

    for case in &cases {
        let inst = &case.instance;
        let snap = leverage::snapshot(inst, &case.point, true)?;
        let reg = RegConfig::pure(inst.n());

        let direct = oracle::sigma_direct(inst, &case.point)?;
        let sigma_err = (snap.sigma_full().unwrap() - direct).amax();

        let bundle = gradient::grad_loss_total_with_snapshot(inst, &snap, &reg);
        let inst_fd = inst.clone();
        let f = move |p: &DVector<f64>| {
            let snap = leverage::snapshot(&inst_fd, p, false)?;
            Ok(objective::loss_exp(&inst_fd, &snap))
        };
        let fd_grad = oracle::fd_gradient(&f, &case.point, &FdConfig::gradient())?;
        let denom = bundle.grad_total.norm().max(fd_grad.norm()).max(1.0);
        let grad_err = (&bundle.grad_total - &fd_grad).norm() / denom;

        let hess_err = match args.against {
            AgainstArg::Fd => {
                let h = hessian::hessian_loss_exp(inst, &snap, mode)?;
                let fd_h = oracle::fd_hessian(&f, &case.point, &FdConfig::hessian())?;
                (&h - &fd_h).amax() / (1.0 + h.amax())
            }
            AgainstArg::Internal => {
                let mut worst = 0.0_f64;
                for i in 0..inst.n() {
                    let terms = hessian::hessian_terms(&snap, i, inst.c()[i], mode)?.sum();
                    let grad_i = gradient::grad_sigma_diag_i(&snap, i)?;
                    let multiplier = match mode {
                        HessianMode::PaperLiteral => snap.sigma_diag()[i],
                        HessianMode::ResidualCorrected => snap.sigma_diag()[i] - inst.c()[i],
                    };
                    let direct = &grad_i * grad_i.transpose()
                        + hessian::hessian_sigma_ii(&snap, i)? * multiplier;
                    worst = worst.max((terms - direct).amax());
                }
                worst
            }
        };

        if sigma_err > max_sigma || grad_err > max_grad || hess_err > max_hess {
            worst_case = case.label.clone();
        }
        max_sigma = max_sigma.max(sigma_err);
        max_grad = max_grad.max(grad_err);
        max_hess = max_hess.max(hess_err);
    }

    let hess_tol = match args.against {
        AgainstArg::Fd => HESS_TOL,
        AgainstArg::Internal => INTERNAL_TOL,
    };
    let hess_name = match (args.against, args.mode) {
        (AgainstArg::Fd, HessianModeArg::ResidualCorrected) => "hessian(residual-corrected) vs fd",
        (AgainstArg::Fd, HessianModeArg::PaperLiteral) => "hessian(paper-literal) vs fd",
        (AgainstArg::Internal, _) => "hessian six-term vs curvature identity",
    };

    println!("sigma vs qr-oracle          max err {max_sigma:.3e}  (tol {SIGMA_TOL:.0e})");
    println!("gradient vs fd              max err {max_grad:.3e}  (tol {GRAD_TOL:.0e})");
    println!("{hess_name:<27} max err {max_hess:.3e}  (tol {hess_tol:.0e})");

    let mut manifest = RunManifest::new("verify", 0, &args, started);
    manifest.insert_extra(
        "errors",
        serde_json::json!({
            "sigma": max_sigma, "gradient": max_grad, "hessian": max_hess,
            "cases": cases.len(),
        }),
    );
    manifest.print()?;

    let mut failing = Vec::new();
    if max_sigma > SIGMA_TOL {
        failing.push("sigma");
    }
    if max_grad > GRAD_TOL {
        failing.push("gradient");
    }
    if max_hess > hess_tol {
        failing.push(hess_name);
    }
    if failing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "verification failed for: {} (worst case {worst_case})",
            failing.join(", ")
        );
        Ok(ExitCode::from(EXIT_VERIFY_BREACH))
    }
}

fn cmd_diag(args: DiagArgs, started: Instant) -> Result<ExitCode, Error> {
    let inst = match load_instance_or_usage(&args.instance) {
        Ok(inst) => inst,
        Err(code) => return Ok(code),
    };
    let center = if let Some(text) = &args.center {
        parse_vector(text)?
    } else if let Some(path) = &args.truth {
        generator::load_ground_truth(path)?.x_star
    } else {
        return Err(Error::InvalidConfig(
            "diag needs --center or --truth".into(),
        ));
    };
    if center.len() != inst.d() {
        return Err(Error::InvalidConfig(format!(
            "center has {} entries, instance needs {}",
            center.len(),
            inst.d()
        )));
    }

    let region = Region {
        center: center.clone(),
        radius: args.radius,
    };
    let reg = RegConfig::pure(inst.n());
    let lipschitz =
        diagnostics::empirical_hessian_lipschitz(&inst, &reg, &region, args.pairs, args.seed)?;
    let snap = leverage::snapshot(&inst, &center, true)?;
    let beta = snap.sigma_min_ax().min(snap.min_abs_s());
    let norms = diagnostics::norm_bound_suite(&snap, beta)?;

    report::write_diag_csv(&lipschitz, &norms, &args.out)?;

    println!(
        "hessian lipschitz ratio {:.4e} <= bound {:.4e}: {}  (gap {:.1e}x, beta {:.3e}, R {:.3e})",
        lipschitz.max_hessian_ratio,
        lipschitz.hessian_bound,
        lipschitz.within_bounds,
        lipschitz.tightness_gap,
        lipschitz.beta,
        lipschitz.radius_r
    );
    println!(
        "norm bounds: sigma {:.6} <= 1, gram_inv {:.4e} <= {:.4e}, pass {}",
        norms.sigma_norm, norms.gram_inv_norm, norms.gram_inv_bound, norms.pass
    );

    let mut manifest = RunManifest::new("diag", args.seed, &args, started);
    manifest.push_output(&args.out);
    manifest.insert_extra(
        "summary",
        serde_json::json!({
            "within_bounds": lipschitz.within_bounds,
            "tightness_gap": lipschitz.tightness_gap,
            "norm_pass": norms.pass,
        }),
    );
    manifest.print()?;
    Ok(ExitCode::SUCCESS)
}

fn parse_grid(text: &str) -> Result<Vec<(usize, usize)>, Error> {
    let mut sizes = Vec::new();
    for cell in text.split(',') {
        let cell = cell.trim();
        if cell.is_empty() {
            continue;
        }
        let (n, d) = cell
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("grid cell {cell:?} is not n:d")))?;
        let n = n
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::InvalidConfig(format!("bad n: {e}")))?;
        let d = d
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::InvalidConfig(format!("bad d: {e}")))?;
        sizes.push((n, d));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("benchmark grid is empty".into()));
    }
    Ok(sizes)
}

fn cmd_bench(args: BenchArgs, started: Instant) -> Result<ExitCode, Error> {
    let grid = BenchGrid {
        sizes: parse_grid(&args.grid)?,
        measure_hessian: args.hessian,
    };
    let report = diagnostics::timing_bench(&grid, args.reps, args.seed)?;

    let cells_path = args.out.with_extension("cells.csv");
    let slopes_path = args.out.with_extension("slopes.csv");
    report::write_bench_csvs(&report, &cells_path, &slopes_path)?;

    for row in &report.rows {
        let hessian = row
            .hessian_median_ms
            .map(|ms| format!(", hessian {ms:.2} ms"))
            .unwrap_or_default();
        println!(
            "n={:<5} d={:<3} snapshot {:.2} ms, gradient-iteration {:.2} ms{hessian}",
            row.n, row.d, row.snapshot_median_ms, row.grad_median_ms
        );
    }
    for fit in &report.grad_slope_vs_n {
        println!(
            "gradient time vs n at d={}: log-log slope {:.3}",
            fit.fixed, fit.slope
        );
    }
    for fit in &report.grad_slope_vs_d {
        println!(
            "gradient time vs d at n={}: log-log slope {:.3}",
            fit.fixed, fit.slope
        );
    }

    let mut manifest = RunManifest::new("bench", args.seed, &args, started);
    manifest.push_output(&cells_path);
    manifest.push_output(&slopes_path);
    manifest.print()?;
    Ok(ExitCode::SUCCESS)
}
