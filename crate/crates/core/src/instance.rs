//! Problem data model, validation, and file persistence.
//!
//! A [`ProblemInstance`] is the immutable triple (A, b, c): the design matrix,
//! the offset, and the target leverage-score diagonal. Instances are stored as
//! self-describing UTF-8 text so desk-scale experiments stay inspectable:
//!
//! ```text
//! # optional comments
//! n=3
//! d=2
//! A:
//! <n rows of d whitespace-separated decimals>
//! b:
//! <n decimals>
//! c:
//! <n decimals>
//! ```
//!
//! Numbers are written with 17 significant digits, which round-trips every
//! finite f64 exactly.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Slack applied to the `c_i in [0, 1]` check so targets generated from an
/// actual projection diagonal never get flagged for last-bit rounding.
const C_RANGE_SLACK: f64 = 1e-12;

/// Relative tolerance of the rank check: singular values below
/// `RANK_TOL * sigma_max(A)` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Tolerance on `sum(c) = d` before the realizability warning fires.
const REALIZABILITY_TOL: f64 = 1e-8;

/// The immutable problem statement: recover x from the leverage scores of
/// `diag(Ax - b)^{-1} A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl ProblemInstance {
    /// Builds an instance, enforcing only structural consistency (shapes and
    /// finiteness). Semantic invariants are checked by [`validate`].
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "b",
                expected: n,
                got: b.len(),
            });
        }
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                context: "c",
                expected: n,
                got: c.len(),
            });
        }
        for (what, finite) in [
            ("A", a.iter().all(|v| v.is_finite())),
            ("b", b.iter().all(|v| v.is_finite())),
            ("c", c.iter().all(|v| v.is_finite())),
        ] {
            if !finite {
                return Err(Error::InvalidConfig(format!(
                    "{what} contains a non-finite entry"
                )));
            }
        }
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Smallest and largest singular values of A.
    pub fn singular_extent(&self) -> (f64, f64) {
        singular_extent(&self.a)
    }

    /// Returns a copy with the target scores replaced.
    pub fn with_scores(&self, c: DVector<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c)
    }
}

fn singular_extent(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

/// A single violated invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    /// n < d or d < 1.
    BadShape { n: usize, d: usize },
    /// A loses rank at the `RANK_TOL * sigma_max` threshold.
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    /// A target score falls outside [0, 1].
    ScoreOutOfRange { index: usize, value: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::BadShape { n, d } => {
                write!(f, "shape violates n >= d >= 1: n = {n}, d = {d}")
            }
            ValidationIssue::RankDeficient { sigma_min, sigma_max } => write!(
                f,
                "A is rank deficient: sigma_min = {sigma_min:.3e} < {RANK_TOL:.0e} * sigma_max = {:.3e}",
                RANK_TOL * sigma_max
            ),
            ValidationIssue::ScoreOutOfRange { index, value } => {
                write!(f, "c[{index}] = {value} lies outside [0, 1]")
            }
        }
    }
}

/// Result of [`validate`]: hard violations plus advisory warnings.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks the semantic invariants of an instance without mutating it.
///
/// An unrealizable target (`sum(c) != d`) is reported as a warning rather
/// than an issue: the optimization problem stays well posed, the target is
/// just not attainable by any x.
pub fn validate(inst: &ProblemInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (n, d) = (inst.n(), inst.d());

    if d < 1 || n < d {
        report.issues.push(ValidationIssue::BadShape { n, d });
    }

    if d >= 1 && n >= d {
        let (sigma_min, sigma_max) = inst.singular_extent();
        if sigma_min < RANK_TOL * sigma_max {
            report.issues.push(ValidationIssue::RankDeficient {
                sigma_min,
                sigma_max,
            });
        }
    }

    for (i, &ci) in inst.c().iter().enumerate() {
        if !(-C_RANGE_SLACK..=1.0 + C_RANGE_SLACK).contains(&ci) {
            report.issues.push(ValidationIssue::ScoreOutOfRange {
                index: i,
                value: ci,
            });
        }
    }

    let score_sum: f64 = inst.c().iter().sum();
    if (score_sum - d as f64).abs() > REALIZABILITY_TOL {
        report.warnings.push(format!(
            "target is unrealizable: sum(c) = {score_sum} differs from d = {d}; \
             no x can match it exactly, the solver will minimize the residual"
        ));
    }

    report
}

/// Regularization weights and the (l, beta) parameters they were derived from.
///
/// The derived construction picks `w_i^2 = max(0, -44 beta + l / sigma_min(A)^2)`
/// plus a tiny margin, the smallest weight that certifies an `l`-strongly
/// positive-definite total Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct RegConfig {
    w: DVector<f64>,
    l: f64,
    beta: f64,
}

impl RegConfig {
    /// Margin added on top of the derived weight squares.
    pub const DERIVED_MARGIN: f64 = 1e-12;

    /// Pure mode: w = 0, so a planted optimum stays the exact global minimum.
    pub fn pure(n: usize) -> Self {
        Self {
            w: DVector::zeros(n),
            l: 0.0,
            beta: 0.05,
        }
    }

    pub fn new(w: DVector<f64>, l: f64, beta: f64) -> Result<Self> {
        if w.iter().any(|&wi| !wi.is_finite() || wi < 0.0) {
            return Err(Error::InvalidConfig(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { w, l, beta })
    }

    /// Derives uniform weights from the strong-convexity target `l` and the
    /// well-posedness margin `beta`.
    pub fn derived(l: f64, beta: f64, sigma_min_a: f64, n: usize) -> Result<Self> {
        if l <= 0.0 || !l.is_finite() {
            return Err(Error::InvalidConfig(format!("l must be positive, got {l}")));
        }
        if !(0.0..0.1).contains(&beta) || beta == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "beta must lie in (0, 0.1), got {beta}"
            )));
        }
        if sigma_min_a <= 0.0 {
            return Err(Error::InvalidConfig(
                "sigma_min(A) must be positive to derive weights".into(),
            ));
        }
        let w_sq = (-44.0 * beta + l / (sigma_min_a * sigma_min_a)).max(0.0) + Self::DERIVED_MARGIN;
        Ok(Self {
            w: DVector::from_element(n, w_sq.sqrt()),
            l,
            beta,
        })
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_pure(&self) -> bool {
        self.w.iter().all(|&wi| wi == 0.0)
    }

    /// Whether every weight satisfies `w_i^2 >= -44 beta + l / sigma_min(A)^2`.
    pub fn satisfies_margin(&self, sigma_min_a: f64) -> bool {
        let floor = -44.0 * self.beta + self.l / (sigma_min_a * sigma_min_a);
        self.w.iter().all(|&wi| wi * wi >= floor)
    }
}

/// Which solver a run should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gd,
    Newton,
}

/// Solver-agnostic run settings as supplied by a caller (typically the CLI).
#[derive(Debug, Clone)]
pub struct SolveSettings {
    pub method: Method,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Fixed step size for gradient descent (`None` selects the k-schedule).
    pub eta: Option<f64>,
    /// Schedule parameter for `gamma_k = 2 / (alpha (k + 1))`.
    pub alpha: Option<f64>,
    pub seed: u64,
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("iteration cap must be >= 1".into()));
        }
        if self.grad_tol <= 0.0 || self.step_tol <= 0.0 {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn push_vector(out: &mut String, v: &DVector<f64>) {
    for (k, value) in v.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{value:.16e}"));
    }
    out.push('\n');
}

/// Serializes an instance to the text format described in the module docs.
pub fn save_instance(inst: &ProblemInstance, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("n={}\n", inst.n()));
    out.push_str(&format!("d={}\n", inst.d()));
    out.push_str("A:\n");
    for i in 0..inst.n() {
        for j in 0..inst.d() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{:.16e}", inst.a()[(i, j)]));
        }
        out.push('\n');
    }
    out.push_str("b:\n");
    push_vector(&mut out, inst.b());
    out.push_str("c:\n");
    push_vector(&mut out, inst.c());
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    A,
    B,
    C,
}

/// Parses an instance file, rejecting malformed headers, non-finite entries,
/// and counts that disagree with the declared shape.
pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

pub(crate) fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let mut n: Option<usize> = None;
    let mut d: Option<usize> = None;
    let mut section = Section::Header;
    let mut a_entries: Vec<f64> = Vec::new();
    let mut b_entries: Vec<f64> = Vec::new();
    let mut c_entries: Vec<f64> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };

        match line {
            "A:" => {
                section = Section::A;
                continue;
            }
            "b:" => {
                section = Section::B;
                continue;
            }
            "c:" => {
                section = Section::C;
                continue;
            }
            _ => {}
        }

        match section {
            Section::Header => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected n=<int> or d=<int>, got {line:?}")))?;
                let parsed: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad integer {value:?}")))?;
                match key.trim() {
                    "n" => n = Some(parsed),
                    "d" => d = Some(parsed),
                    other => return Err(err(format!("unknown header key {other:?}"))),
                }
            }
            Section::A | Section::B | Section::C => {
                let target = match section {
                    Section::A => &mut a_entries,
                    Section::B => &mut b_entries,
                    Section::C => &mut c_entries,
                    Section::Header => unreachable!(),
                };
                for token in line.split_whitespace() {
                    let value: f64 = token
                        .parse()
                        .map_err(|_| err(format!("bad number {token:?}")))?;
                    if !value.is_finite() {
                        return Err(err(format!("non-finite entry {token:?}")));
                    }
                    target.push(value);
                }
            }
        }
    }

    let n = n.ok_or(Error::Parse {
        line: 0,
        message: "missing n= header".into(),
    })?;
    let d = d.ok_or(Error::Parse {
        line: 0,
        message: "missing d= header".into(),
    })?;
    let expect = |name: &str, got: usize, want: usize| -> Result<()> {
        if got != want {
            return Err(Error::Parse {
                line: 0,
                message: format!("section {name} holds {got} entries, expected {want}"),
            });
        }
        Ok(())
    };
    expect("A", a_entries.len(), n * d)?;
    expect("b", b_entries.len(), n)?;
    expect("c", c_entries.len(), n)?;

    ProblemInstance::new(
        DMatrix::from_row_slice(n, d, &a_entries),
        DVector::from_vec(b_entries),
        DVector::from_vec(c_entries),
    )
}
