//! Independent references for validating the solvers and the derivative
//! formulas. Nothing here is used by the solvers themselves.

use ndarray::Array2;

use crate::error::{KarcherError, Result};
use crate::objective::Ensemble;
use crate::spd::{exp_m, frobenius_norm, geodesic, log_m, SpdMatrix};

/// Relative commutator tolerance accepted by [`commuting_oracle`].
pub const COMMUTE_TOL: f64 = 1e-8;

/// Geometric mean `exp(mean(ln a_i))` of positive reals; the exact mean for
/// 1x1 ensembles.
pub fn scalar_karcher_oracle(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(KarcherError::EmptyEnsemble);
    }
    let mut sum = 0.0;
    for &v in values {
        if !(v > 0.0) || !v.is_finite() {
            return Err(KarcherError::Domain(format!(
                "geometric mean needs positive values, got {v:e}"
            )));
        }
        sum += v.ln();
    }
    Ok((sum / values.len() as f64).exp())
}

/// `exp((1/n) Σ log A_i)`, exact when all matrices commute.
pub fn commuting_oracle(e: &Ensemble) -> Result<SpdMatrix> {
    let mats = e.matrices();
    for (i, a) in mats.iter().enumerate() {
        for b in &mats[i + 1..] {
            let (a, b) = (a.as_array(), b.as_array());
            let comm = a.dot(b) - b.dot(a);
            let rel = frobenius_norm(&comm) / (frobenius_norm(a) * frobenius_norm(b));
            if rel > COMMUTE_TOL {
                return Err(KarcherError::NotCommuting(rel));
            }
        }
    }
    let p = e.dim();
    let mut sum = Array2::<f64>::zeros((p, p));
    for a in mats {
        sum += &log_m(a)?;
    }
    exp_m(&(sum / e.len() as f64))
}

/// Two-matrix mean: the geodesic midpoint.
pub fn two_matrix_oracle(a: &SpdMatrix, b: &SpdMatrix) -> Result<SpdMatrix> {
    geodesic(a, b, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpacing {
    Linear,
    /// Geometric spacing; requires `lo > 0`.
    Log,
}

/// Brute-force minimum of `f` over `points` grid nodes spanning `[lo, hi]`.
/// Returns `(argmin, min)`; ties go to the smallest node.
pub fn grid_minimize_1d<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    points: usize,
    spacing: GridSpacing,
) -> Result<(f64, f64)> {
    if !(lo < hi) || points < 3 {
        return Err(KarcherError::Domain(format!(
            "grid needs lo < hi and at least 3 points (lo={lo}, hi={hi}, points={points})"
        )));
    }
    if spacing == GridSpacing::Log && !(lo > 0.0) {
        return Err(KarcherError::Domain(format!(
            "log-spaced grid needs lo > 0, got {lo}"
        )));
    }
    let last = (points - 1) as f64;
    let node = |k: usize| -> f64 {
        let t = k as f64 / last;
        match spacing {
            GridSpacing::Linear => lo + (hi - lo) * t,
            GridSpacing::Log => (lo.ln() + (hi.ln() - lo.ln()) * t).exp(),
        }
    };
    let mut best = (f64::NAN, f64::INFINITY);
    for k in 0..points {
        let x = node(k);
        let v = f(x);
        if !v.is_finite() {
            return Err(KarcherError::Domain(format!(
                "objective is not finite at grid node {x:e}"
            )));
        }
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Central difference `(f(X + hH) - f(X - hH)) / 2h`.
pub fn finite_diff_directional<F>(f: F, x: &SpdMatrix, dir: &Array2<f64>, h: f64) -> Result<f64>
where
    F: Fn(&SpdMatrix) -> Result<f64>,
{
    if x.as_array().dim() != dir.dim() {
        return Err(KarcherError::DimensionMismatch {
            expected: x.dim(),
            found: dir.nrows(),
        });
    }
    let perturb = |sign: f64| {
        SpdMatrix::new(x.as_array() + &(dir * (sign * h))).map_err(|err| {
            KarcherError::Domain(format!("perturbed matrix left the SPD cone: {err}"))
        })
    };
    let plus = f(&perturb(1.0)?)?;
    let minus = f(&perturb(-1.0)?)?;
    Ok((plus - minus) / (2.0 * h))
}
