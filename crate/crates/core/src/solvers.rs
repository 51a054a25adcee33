//! MM fixed-point iteration and the two gradient-descent baselines.
//!
//! Every solver records one [`TraceRecord`] for the starting point and one
//! per iteration. For the line-search solver each trial step counts as an
//! iteration, accepted or not.

use std::fmt;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{KarcherError, Result};
use crate::objective::{gradient_sum, majorizer_parts, objective, surrogate_minimizer, Ensemble};
use crate::spd::{congruence, exp_m, frobenius_norm, SpdMatrix};

/// Objective growth factor treated as divergence by the fixed-step solver.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Default gradient tolerance per ensemble member.
pub const DEFAULT_TOL_PER_MATRIX: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Mm,
    GdLs,
    GdFixed,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Mm => "mm",
            SolverKind::GdLs => "gd-ls",
            SolverKind::GdFixed => "gd-fixed",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = KarcherError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mm" => Ok(SolverKind::Mm),
            "gd-ls" => Ok(SolverKind::GdLs),
            "gd-fixed" => Ok(SolverKind::GdFixed),
            other => Err(KarcherError::InvalidConfig(format!(
                "unknown solver '{other}' (expected mm, gd-ls or gd-fixed)"
            ))),
        }
    }
}

/// Iteration limits and step-size parameters.
///
/// `grad_tol = None` means `1e-10 · n`, since the gradient sum is not
/// normalized by the ensemble size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: Option<f64>,
    /// Initial step size of the gradient methods.
    pub nu: f64,
    /// Backtracking factor.
    pub c: f64,
    /// Cap on the backtracking exponent.
    pub ls_max_j: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: None,
            nu: 1.0,
            c: 0.5,
            ls_max_j: 60,
        }
    }
}

impl SolverConfig {
    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.grad_tol = Some(tol);
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn tolerance(&self, n: usize) -> f64 {
        self.grad_tol.unwrap_or(DEFAULT_TOL_PER_MATRIX * n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KarcherError::InvalidConfig(msg));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if let Some(tol) = self.grad_tol {
            if !(tol > 0.0) || !tol.is_finite() {
                return bad(format!("grad_tol must be positive, got {tol}"));
            }
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad(format!("c must lie in (0, 1), got {}", self.c));
        }
        if self.ls_max_j < 1 {
            return bad("ls_max_j must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    /// `||Σ log(X^{-1/2} A_i X^{-1/2})||_F`.
    pub grad_norm: f64,
    /// Natural log of `grad_norm`, floored at `ln(f64::MIN_POSITIVE)`.
    pub log_error: f64,
    /// Seconds since the solver started.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxItersExceeded,
    LineSearchStalled,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub mean: SpdMatrix,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub iters_used: usize,
    pub termination: Termination,
}

impl SolverResult {
    pub fn final_grad_norm(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.grad_norm)
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.trace.iter().map(|r| r.objective)
    }

    /// First iteration whose log-error drops below `level`.
    pub fn iters_to_log_error(&self, level: f64) -> Option<usize> {
        self.trace
            .iter()
            .find(|r| r.log_error < level)
            .map(|r| r.iter)
    }
}

pub fn log_error(grad_norm: f64) -> f64 {
    grad_norm.max(f64::MIN_POSITIVE).ln()
}

struct Recorder {
    start: Instant,
    trace: Vec<TraceRecord>,
}

impl Recorder {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            trace: Vec::new(),
        }
    }

    fn push(&mut self, iter: usize, objective: f64, grad_norm: f64) {
        self.trace.push(TraceRecord {
            iter,
            objective,
            grad_norm,
            log_error: log_error(grad_norm),
            elapsed: self.start.elapsed().as_secs_f64(),
        });
    }

    fn finish(self, mean: SpdMatrix, termination: Termination) -> SolverResult {
        let iters_used = self.trace.last().map_or(0, |r| r.iter);
        SolverResult {
            mean,
            trace: self.trace,
            converged: termination == Termination::Converged,
            iters_used,
            termination,
        }
    }
}

fn check_start(e: &Ensemble, cfg: &SolverConfig, x0: &SpdMatrix) -> Result<()> {
    cfg.validate()?;
    if e.dim() != x0.dim() {
        return Err(KarcherError::DimensionMismatch {
            expected: e.dim(),
            found: x0.dim(),
        });
    }
    Ok(())
}

/// `(1/n) Σ A_i`.
pub fn arithmetic_mean_init(e: &Ensemble) -> Result<SpdMatrix> {
    let p = e.dim();
    let mut sum = Array2::<f64>::zeros((p, p));
    for a in e.matrices() {
        sum += a.as_array();
    }
    SpdMatrix::new(sum / e.len() as f64)
}

/// One MM update `T(X) = argmin_Y G(Y, X)`.
pub fn mm_step(e: &Ensemble, x: &SpdMatrix) -> Result<SpdMatrix> {
    let (_, c1, c2) = majorizer_parts(e, x)?;
    surrogate_minimizer(&c1, &c2)
}

/// Majorization-minimization: `X_{k+1} = T(X_k)`. Parameter-free apart from
/// the stopping rule; the objective is nonincreasing along the trace.
pub fn mm_solve(e: &Ensemble, cfg: &SolverConfig, x0: &SpdMatrix) -> Result<SolverResult> {
    check_start(e, cfg, x0)?;
    let tol = cfg.tolerance(e.len());
    let mut rec = Recorder::new();
    let mut x = x0.clone();
    let mut k = 0;
    loop {
        let grad_norm = frobenius_norm(&gradient_sum(e, &x)?);
        let (value, c1, c2) = majorizer_parts(e, &x)?;
        rec.push(k, value, grad_norm);
        if grad_norm < tol {
            return Ok(rec.finish(x, Termination::Converged));
        }
        if k >= cfg.max_iters {
            return Ok(rec.finish(x, Termination::MaxItersExceeded));
        }
        x = surrogate_minimizer(&c1, &c2)?;
        k += 1;
    }
}

/// `X^{1/2} exp(step · D) X^{1/2}`.
fn exp_step(x_half: &SpdMatrix, d: &Array2<f64>, step: f64) -> Result<SpdMatrix> {
    let ex = exp_m(&(d * step))?;
    SpdMatrix::new(congruence(x_half.as_array(), ex.as_array()))
}

/// Gradient descent with backtracking: the trial steps are `c^j ν` for
/// `j = 0, 1, 2, ...`, and the first one that strictly decreases the objective
/// is accepted.
pub fn gd_linesearch_solve(
    e: &Ensemble,
    cfg: &SolverConfig,
    x0: &SpdMatrix,
) -> Result<SolverResult> {
    check_start(e, cfg, x0)?;
    let n = e.len() as f64;
    let tol = cfg.tolerance(e.len());
    let mut rec = Recorder::new();
    let mut x = x0.clone();
    let mut value = objective(e, &x)?;
    let mut grad = gradient_sum(e, &x)?;
    let mut grad_norm = frobenius_norm(&grad);
    let mut k = 0;
    rec.push(k, value, grad_norm);
    loop {
        if grad_norm < tol {
            return Ok(rec.finish(x, Termination::Converged));
        }
        if k >= cfg.max_iters {
            return Ok(rec.finish(x, Termination::MaxItersExceeded));
        }
        let d = &grad / n;
        let x_half = x.sqrt()?;
        let mut accepted = None;
        for j in 0..=cfg.ls_max_j {
            if k >= cfg.max_iters {
                break;
            }
            k += 1;
            let step = cfg.c.powi(j as i32) * cfg.nu;
            let trial =
                exp_step(&x_half, &d, step).and_then(|cand| objective(e, &cand).map(|f| (cand, f)));
            match trial {
                Ok((cand, f)) if f < value => {
                    accepted = Some((cand, f));
                    break;
                }
                // rejected probes keep the current iterate
                _ => rec.push(k, value, grad_norm),
            }
        }
        match accepted {
            Some((cand, f)) => {
                x = cand;
                value = f;
                grad = gradient_sum(e, &x)?;
                grad_norm = frobenius_norm(&grad);
                rec.push(k, value, grad_norm);
            }
            None if k >= cfg.max_iters => {
                return Ok(rec.finish(x, Termination::MaxItersExceeded));
            }
            None => return Ok(rec.finish(x, Termination::LineSearchStalled)),
        }
    }
}

/// Gradient descent with constant step `ν`. No descent guarantee; stops
/// with [`Termination::Diverged`] once the objective exceeds
/// [`DIVERGENCE_FACTOR`] times its starting value. Returns the iterate with
/// the lowest objective seen.
pub fn gd_fixed_step_solve(
    e: &Ensemble,
    cfg: &SolverConfig,
    x0: &SpdMatrix,
) -> Result<SolverResult> {
    check_start(e, cfg, x0)?;
    let n = e.len() as f64;
    let tol = cfg.tolerance(e.len());
    let mut rec = Recorder::new();
    let mut x = x0.clone();
    let initial = objective(e, &x)?;
    let mut value = initial;
    let mut grad = gradient_sum(e, &x)?;
    let mut grad_norm = frobenius_norm(&grad);
    let mut best = (x.clone(), value);
    let mut k = 0;
    rec.push(k, value, grad_norm);
    loop {
        if grad_norm < tol {
            return Ok(rec.finish(x, Termination::Converged));
        }
        if k >= cfg.max_iters {
            return Ok(rec.finish(best.0, Termination::MaxItersExceeded));
        }
        k += 1;
        let next = x
            .sqrt()
            .and_then(|half| exp_step(&half, &(&grad / n), cfg.nu))
            .and_then(|cand| objective(e, &cand).map(|f| (cand, f)));
        let (cand, f) = match next {
            Ok((cand, f)) if f.is_finite() && f <= DIVERGENCE_FACTOR * initial => (cand, f),
            _ => return Ok(rec.finish(best.0, Termination::Diverged)),
        };
        x = cand;
        value = f;
        grad = gradient_sum(e, &x)?;
        grad_norm = frobenius_norm(&grad);
        rec.push(k, value, grad_norm);
        if value < best.1 {
            best = (x.clone(), value);
        }
    }
}

pub fn solve(
    kind: SolverKind,
    e: &Ensemble,
    cfg: &SolverConfig,
    x0: &SpdMatrix,
) -> Result<SolverResult> {
    match kind {
        SolverKind::Mm => mm_solve(e, cfg, x0),
        SolverKind::GdLs => gd_linesearch_solve(e, cfg, x0),
        SolverKind::GdFixed => gd_fixed_step_solve(e, cfg, x0),
    }
}
