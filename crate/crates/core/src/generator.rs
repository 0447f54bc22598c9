//! Synthetic instances with a planted ground truth.
//!
//! The offset is built backwards from a sampled scale vector: draw s* with
//! every |s*_i| >= margin, then set b = A x* - s*, so the planted point is
//! guaranteed to sit safely inside the domain. The target scores are the
//! actual leverage diagonal at x*, which makes the planted point an exact
//! global minimizer in pure mode.
//!
//! All randomness comes from a counter-based generator (ChaCha8) with one
//! stream per sampled object, so adding or reordering draws of one object
//! never shifts the values of another:
//!
//! * stream 0: entries of A (resampled wholesale on rank failure)
//! * stream 1: x*
//! * stream 2: magnitudes of s*
//! * stream 3: signs of s*
//! * stream 4: start perturbation directions
//! * stream 5: score noise

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::instance::{ProblemInstance, RegConfig};
use crate::leverage;

const RESAMPLE_BUDGET: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenMode {
    /// w = 0: the planted x* is an exact global minimizer.
    Pure,
    /// Weights derived from (l, beta) so the total Hessian is certified
    /// l-strongly positive definite; shifts the minimizer off x*.
    Regularized { l: f64, beta: f64 },
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Lower bound enforced on every |s(x*)_i|.
    pub margin: f64,
    pub mode: GenMode,
    /// Radius used by [`perturb_start`] callers; recorded, not consumed here.
    pub start_radius: f64,
}

impl GenConfig {
    pub fn pure(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            seed,
            margin: 0.5,
            mode: GenMode::Pure,
            start_radius: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d < 1 || self.n < self.d {
            return Err(Error::InvalidConfig(format!(
                "need n >= d >= 1, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if self.margin <= 0.0 {
            return Err(Error::InvalidConfig("margin must be positive".into()));
        }
        if self.start_radius < 0.0 {
            return Err(Error::InvalidConfig(
                "start radius must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// A generated instance together with its planted certificate.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: ProblemInstance,
    pub reg: RegConfig,
    pub x_star: DVector<f64>,
    pub s_star: DVector<f64>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

pub fn gen_instance(cfg: &GenConfig) -> Result<GeneratedInstance> {
    cfg.validate()?;

    let mut a_rng = stream_rng(cfg.seed, 0);
    let mut a = DMatrix::zeros(cfg.n, cfg.d);
    let mut sigma_min_a = 0.0;
    let mut ok = false;
    for _ in 0..RESAMPLE_BUDGET {
        a = DMatrix::from_fn(cfg.n, cfg.d, |_, _| StandardNormal.sample(&mut a_rng));
        let sv = a.clone().svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0_f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min >= 1e-10 * max && min > 0.0 {
            sigma_min_a = min;
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(Error::ResamplingExhausted {
            budget: RESAMPLE_BUDGET,
        });
    }

    let x_star = standard_normal_vector(&mut stream_rng(cfg.seed, 1), cfg.d);

    let mut magnitude_rng = stream_rng(cfg.seed, 2);
    let mut sign_rng = stream_rng(cfg.seed, 3);
    let s_star = DVector::from_fn(cfg.n, |_, _| {
        let magnitude: f64 = cfg.margin
            + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut magnitude_rng)
                .abs();
        if sign_rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    });

    let b = &a * &x_star - &s_star;
    let probe = ProblemInstance::new(a, b, DVector::zeros(cfg.n))?;
    let mut c = leverage::eval_sigma_diag(&probe, &x_star)?;
    // Exact-arithmetic scores live in [0, 1]; shave off last-bit excursions.
    for v in c.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let instance = probe.with_scores(c)?;

    let reg = match cfg.mode {
        GenMode::Pure => RegConfig::pure(cfg.n),
        GenMode::Regularized { l, beta } => RegConfig::derived(l, beta, sigma_min_a, cfg.n)?,
    };

    Ok(GeneratedInstance {
        instance,
        reg,
        x_star,
        s_star,
    })
}

/// x0 = x* + rho * u with u uniform on the unit sphere, so the start sits at
/// distance exactly rho.
pub fn perturb_start(x_star: &DVector<f64>, rho: f64, seed: u64) -> DVector<f64> {
    if rho == 0.0 {
        return x_star.clone();
    }
    let mut rng = stream_rng(seed, 4);
    let mut direction = standard_normal_vector(&mut rng, x_star.len());
    while direction.norm() < 1e-12 {
        direction = standard_normal_vector(&mut rng, x_star.len());
    }
    direction /= direction.norm();
    x_star + direction * rho
}

/// Adds seeded Gaussian noise to the stored target scores, clamped back into
/// [0, 1]. Models published scores that were rounded or perturbed; there is
/// no canonical noise model, this is a plain diagnostic knob.
pub fn noisy_scores(inst: &ProblemInstance, sigma: f64, seed: u64) -> Result<ProblemInstance> {
    if sigma < 0.0 {
        return Err(Error::InvalidConfig(
            "noise level must be nonnegative".into(),
        ));
    }
    let mut rng = stream_rng(seed, 5);
    let mut c = inst.c().clone();
    for v in c.iter_mut() {
        let noise: f64 = StandardNormal.sample(&mut rng);
        *v = (*v + sigma * noise).clamp(0.0, 1.0);
    }
    inst.with_scores(c)
}

/// Sidecar ground truth persisted next to a generated instance file.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x_star: DVector<f64>,
    pub s_star: DVector<f64>,
    pub seed: u64,
    pub margin: f64,
}

pub fn save_ground_truth(gt: &GroundTruth, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("seed={}\n", gt.seed));
    out.push_str(&format!("margin={:.16e}\n", gt.margin));
    out.push_str(&format!("d={}\n", gt.x_star.len()));
    out.push_str(&format!("n={}\n", gt.s_star.len()));
    out.push_str("x_star:\n");
    for v in gt.x_star.iter() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out.push_str("s_star:\n");
    for v in gt.s_star.iter() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path)?;
    let mut seed: Option<u64> = None;
    let mut margin: Option<f64> = None;
    let mut n: Option<usize> = None;
    let mut d: Option<usize> = None;
    let mut x_star: Vec<f64> = Vec::new();
    let mut s_star: Vec<f64> = Vec::new();
    let mut section: Option<char> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        match line {
            "x_star:" => {
                section = Some('x');
                continue;
            }
            "s_star:" => {
                section = Some('s');
                continue;
            }
            _ => {}
        }
        match section {
            None => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
                match key.trim() {
                    "seed" => {
                        seed = Some(value.trim().parse().map_err(|_| err("bad seed".into()))?)
                    }
                    "margin" => {
                        margin = Some(value.trim().parse().map_err(|_| err("bad margin".into()))?)
                    }
                    "n" => n = Some(value.trim().parse().map_err(|_| err("bad n".into()))?),
                    "d" => d = Some(value.trim().parse().map_err(|_| err("bad d".into()))?),
                    other => return Err(err(format!("unknown key {other:?}"))),
                }
            }
            Some(which) => {
                for token in line.split_whitespace() {
                    let value: f64 = token
                        .parse()
                        .map_err(|_| err(format!("bad number {token:?}")))?;
                    if !value.is_finite() {
                        return Err(err(format!("non-finite entry {token:?}")));
                    }
                    if which == 'x' {
                        x_star.push(value);
                    } else {
                        s_star.push(value);
                    }
                }
            }
        }
    }

    let seed = seed.ok_or(Error::Parse {
        line: 0,
        message: "missing seed=".into(),
    })?;
    let margin = margin.ok_or(Error::Parse {
        line: 0,
        message: "missing margin=".into(),
    })?;
    let n = n.ok_or(Error::Parse {
        line: 0,
        message: "missing n=".into(),
    })?;
    let d = d.ok_or(Error::Parse {
        line: 0,
        message: "missing d=".into(),
    })?;
    if x_star.len() != d || s_star.len() != n {
        return Err(Error::Parse {
            line: 0,
            message: format!(
                "ground truth shape mismatch: got {} x entries (want {d}), {} s entries (want {n})",
                x_star.len(),
                s_star.len()
            ),
        });
    }
    Ok(GroundTruth {
        x_star: DVector::from_vec(x_star),
        s_star: DVector::from_vec(s_star),
        seed,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradient;
    use crate::instance::validate;
    use crate::objective;
    use approx::assert_abs_diff_eq;

    #[test]
    fn planted_point_is_an_exact_optimum_in_pure_mode() {
        for seed in [1u64, 2, 3] {
            let generated = gen_instance(&GenConfig::pure(12, 3, seed)).unwrap();
            let loss =
                objective::loss_total(&generated.instance, &generated.x_star, &generated.reg)
                    .unwrap();
            assert!(loss.loss_total.abs() <= 1e-20, "loss {}", loss.loss_total);
            let bundle =
                gradient::grad_loss_total(&generated.instance, &generated.x_star, &generated.reg)
                    .unwrap();
            assert!(bundle.grad_total.norm() <= 1e-12);
        }
    }

    #[test]
    fn generation_is_seed_repeatable() {
        let cfg = GenConfig::pure(10, 4, 99);
        let first = gen_instance(&cfg).unwrap();
        let second = gen_instance(&cfg).unwrap();
        assert_eq!(first.instance, second.instance);
        assert_eq!(first.x_star, second.x_star);
        assert_eq!(first.s_star, second.s_star);
    }

    #[test]
    fn documented_config_passes_validation_and_margins() {
        let cfg = GenConfig {
            margin: 0.5,
            ..GenConfig::pure(20, 4, 7)
        };
        let generated = gen_instance(&cfg).unwrap();
        assert!(validate(&generated.instance).is_valid());
        let report =
            leverage::well_posedness(&generated.instance, &generated.x_star, 0.01).unwrap();
        assert!(report.min_abs_s >= 0.5);
        assert_eq!(report.passes_beta, Some(true));

        let sum: f64 = generated.instance.c().iter().sum();
        assert_abs_diff_eq!(sum, 4.0, epsilon = 1e-8);
        assert!(generated
            .instance
            .c()
            .iter()
            .all(|&ci| (0.0..=1.0).contains(&ci)));
    }

    #[test]
    fn regularized_mode_meets_the_weight_floor() {
        let cfg = GenConfig {
            mode: GenMode::Regularized {
                l: 1e-3,
                beta: 0.01,
            },
            ..GenConfig::pure(15, 3, 21)
        };
        let generated = gen_instance(&cfg).unwrap();
        assert!(!generated.reg.is_pure());
        let (sigma_min, _) = generated.instance.singular_extent();
        assert!(generated.reg.satisfies_margin(sigma_min));
    }

    #[test]
    fn perturb_start_radius_is_exact() {
        let x_star = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(perturb_start(&x_star, 0.0, 5), x_star);

        let x0 = perturb_start(&x_star, 0.25, 5);
        assert_abs_diff_eq!((x0 - &x_star).norm(), 0.25, epsilon = 1e-14);

        let first = perturb_start(&x_star, 0.25, 5);
        let second = perturb_start(&x_star, 0.25, 6);
        assert_abs_diff_eq!(
            (&first - &x_star).norm(),
            (&second - &x_star).norm(),
            epsilon = 1e-14
        );
        assert!((first - second).norm() > 1e-6);
    }

    #[test]
    fn ground_truth_round_trips() {
        let dir = std::env::temp_dir().join("levinv_ground_truth");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("truth.txt");
        let gt = GroundTruth {
            x_star: DVector::from_vec(vec![0.25, -1.5]),
            s_star: DVector::from_vec(vec![1.0, -2.0, 0.75]),
            seed: 42,
            margin: 0.5,
        };
        save_ground_truth(&gt, &path).unwrap();
        assert_eq!(load_ground_truth(&path).unwrap(), gt);
    }

    #[test]
    fn noisy_scores_stay_in_range() {
        let generated = gen_instance(&GenConfig::pure(10, 2, 3)).unwrap();
        let noisy = noisy_scores(&generated.instance, 0.1, 3).unwrap();
        assert!(noisy.c().iter().all(|&ci| (0.0..=1.0).contains(&ci)));
        assert!(noisy.c() != generated.instance.c());
        let unchanged = noisy_scores(&generated.instance, 0.0, 3).unwrap();
        assert_eq!(unchanged.c(), generated.instance.c());
    }
}
