//! Oracle-versus-solver property checks.
//!
//! Each `measure_*` function draws random instances and returns the worst
//! value of one numerical property; [`CheckSuite`] compares those against
//! fixed thresholds. The same measurements back the acceptance tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::experiment::{random_invertible, random_orthogonal, random_spd, random_symmetric};
use crate::objective::{
    euclidean_gradient, g1_scalar, g2_scalar, objective, surrogate_coeffs, surrogate_minimizer,
    surrogate_value, Ensemble,
};
use crate::oracle::{
    commuting_oracle, finite_diff_directional, scalar_karcher_oracle, two_matrix_oracle,
};
use crate::solvers::{arithmetic_mean_init, mm_solve, solve, SolverConfig, SolverKind};
use crate::spd::{congruence, frob_inner, frobenius_norm, inv_m, log_m, riem_dist, SpdMatrix};

/// Signature of a scalar weight function.
pub type WeightFn = fn(f64) -> Result<f64>;

/// `g2` evaluated directly as `(sqrt(ln²x + 1) - ln x) · x`. Loses digits
/// for large `x`; used only as a negative control.
pub fn g2_cancelling(x: f64) -> Result<f64> {
    let z = x.ln();
    Ok((z.hypot(1.0) - z) * x)
}

fn ensemble<R: Rng>(n: usize, p: usize, lo: f64, hi: f64, rng: &mut R) -> Ensemble {
    Ensemble::new((0..n).map(|_| random_spd(p, lo, hi, rng)).collect()).expect("valid ensemble")
}

fn mm_mean(e: &Ensemble) -> Result<SpdMatrix> {
    let x0 = arithmetic_mean_init(e)?;
    Ok(mm_solve(e, &SolverConfig::default(), &x0)?.mean)
}

/// Worst `|g1(x) g2(x) - 1|` over a log-spaced grid on `[1e-12, 1e12]`;
/// infinite if either weight is non-positive somewhere.
pub fn measure_weight_identity(g1: WeightFn, g2: WeightFn, points: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let t = k as f64 / (points - 1) as f64;
        let x = 10f64.powf(-12.0 + 24.0 * t);
        match (g1(x), g2(x)) {
            (Ok(a), Ok(b)) if a > 0.0 && b > 0.0 => worst = worst.max((a * b - 1.0).abs()),
            _ => return f64::INFINITY,
        }
    }
    worst
}

/// Worst `|ln x_mm - ln x_oracle|` over random scalar ensembles, `n <= 6`.
pub fn measure_scalar_oracle<R: Rng>(count: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = rng.gen_range(1..=6);
        let vals: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-2.0..2.0)))
            .collect();
        let e = Ensemble::new(
            vals.iter()
                .map(|&v| SpdMatrix::from_diag(&[v]))
                .collect::<Result<_>>()?,
        )?;
        let truth = SpdMatrix::from_diag(&[scalar_karcher_oracle(&vals)?])?;
        worst = worst.max(riem_dist(&mm_mean(&e)?, &truth)?);
    }
    Ok(worst)
}

/// Worst MM-versus-closed-form distance over ensembles sharing one
/// eigenbasis, `p <= 6`.
pub fn measure_commuting_oracle<R: Rng>(count: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let p = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=5);
        let u = random_orthogonal(p, rng);
        let mats = (0..n)
            .map(|_| {
                let d: Vec<f64> = (0..p).map(|_| rng.gen_range(0.1..10.0)).collect();
                SpdMatrix::new(crate::eigen::compose(&u, &d))
            })
            .collect::<Result<Vec<_>>>()?;
        let e = Ensemble::new(mats)?;
        worst = worst.max(riem_dist(&mm_mean(&e)?, &commuting_oracle(&e)?)?);
    }
    Ok(worst)
}

/// Worst MM-versus-geodesic-midpoint distance for pairs, `p <= 6`.
pub fn measure_two_matrix_oracle<R: Rng>(count: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let p = rng.gen_range(1..=6);
        let a = random_spd(p, 0.1, 10.0, rng);
        let b = random_spd(p, 0.1, 10.0, rng);
        let e = Ensemble::new(vec![a.clone(), b.clone()])?;
        worst = worst.max(riem_dist(&mm_mean(&e)?, &two_matrix_oracle(&a, &b)?)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorizationReport {
    /// Minimum of `(G(X, X') - F(X)) / (1 + |F(X)|)`.
    pub min_slack: f64,
    /// Maximum of `|G(X', X') - F(X')| / (1 + |F(X')|)`.
    pub max_touch_error: f64,
}

/// Surrogate majorization on random `(E, X, X')`, `p <= 5`, `n <= 4`.
pub fn measure_majorization<R: Rng>(count: usize, rng: &mut R) -> Result<MajorizationReport> {
    let mut rep = MajorizationReport {
        min_slack: f64::INFINITY,
        max_touch_error: 0.0,
    };
    for _ in 0..count {
        let p = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=4);
        let e = ensemble(n, p, 0.1, 10.0, rng);
        let x = random_spd(p, 0.1, 10.0, rng);
        let xp = random_spd(p, 0.1, 10.0, rng);
        let s = surrogate_coeffs(&e, &xp)?;
        let fx = objective(&e, &x)?;
        rep.min_slack = rep
            .min_slack
            .min((surrogate_value(&s, &x)? - fx) / (1.0 + fx.abs()));
        let fxp = objective(&e, &xp)?;
        rep.max_touch_error = rep
            .max_touch_error
            .max((surrogate_value(&s, &xp)? - fxp).abs() / (1.0 + fxp.abs()));
    }
    Ok(rep)
}

/// Worst `||C1 - X⁻¹ C2 X⁻¹||_F / ||C1||_F` at the closed-form minimizer,
/// `p <= 6`.
pub fn measure_minimizer_stationarity<R: Rng>(count: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let p = rng.gen_range(1..=6);
        let c1 = random_spd(p, 0.1, 10.0, rng);
        let c2 = random_spd(p, 0.1, 10.0, rng);
        let x = surrogate_minimizer(&c1, &c2)?;
        let xi = inv_m(&x)?;
        let resid = c1.as_array() - &xi.as_array().dot(c2.as_array()).dot(xi.as_array());
        worst = worst.max(frobenius_norm(&resid) / frobenius_norm(c1.as_array()));
    }
    Ok(worst)
}

/// Worst relative finite-difference error for each derivative formula:
/// `d<X⁻¹, A> = -X⁻¹ A X⁻¹`, `d||log X||² = 2 X⁻¹ log X`,
/// `d tr(XAXA) = 2 AXA`, and the Euclidean gradient of the objective.
pub fn measure_derivatives<R: Rng>(count: usize, h: f64, rng: &mut R) -> Result<[f64; 4]> {
    let mut worst = [0.0f64; 4];
    let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs();
    for _ in 0..count {
        let p = rng.gen_range(1..=4);
        let x = random_spd(p, 0.5, 5.0, rng);
        let a = random_symmetric(p, 1.0, rng);
        let dir = random_symmetric(p, 1.0, rng);
        let xi = inv_m(&x)?;
        let xi = xi.as_array();

        let fd = finite_diff_directional(|y| frob_inner(inv_m(y)?.as_array(), &a), &x, &dir, h)?;
        let exact = frob_inner(&(-xi.dot(&a).dot(xi)), &dir)?;
        worst[0] = worst[0].max(rel(fd, exact));

        let fd =
            finite_diff_directional(|y| Ok(log_m(y)?.iter().map(|v| v * v).sum()), &x, &dir, h)?;
        let exact = frob_inner(&(2.0 * xi.dot(&log_m(&x)?)), &dir)?;
        worst[1] = worst[1].max(rel(fd, exact));

        let fd = finite_diff_directional(
            |y| {
                let ya = y.as_array().dot(&a);
                Ok(ya.dot(&ya).diag().sum())
            },
            &x,
            &dir,
            h,
        )?;
        let exact = frob_inner(&(2.0 * a.dot(x.as_array()).dot(&a)), &dir)?;
        worst[2] = worst[2].max(rel(fd, exact));

        let n = rng.gen_range(1..=4);
        let e = ensemble(n, p, 0.5, 5.0, rng);
        let fd = finite_diff_directional(|y| objective(&e, y), &x, &dir, h)?;
        let exact = frob_inner(&euclidean_gradient(&e, &x)?, &dir)?;
        worst[3] = worst[3].max(rel(fd, exact));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanProperties {
    pub permutation: f64,
    pub congruence: f64,
    pub inversion: f64,
}

/// Worst deviation from permutation invariance, congruence equivariance and
/// inversion equivariance of the MM mean, `n <= 5`, `p <= 6`.
pub fn measure_mean_properties<R: Rng>(count: usize, rng: &mut R) -> Result<MeanProperties> {
    let mut out = MeanProperties {
        permutation: 0.0,
        congruence: 0.0,
        inversion: 0.0,
    };
    for _ in 0..count {
        let p = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=5);
        let e = ensemble(n, p, 0.1, 10.0, rng);
        let mean = mm_mean(&e)?;

        let mut shuffled = e.matrices().to_vec();
        shuffled.shuffle(rng);
        let m = mm_mean(&Ensemble::new(shuffled)?)?;
        out.permutation = out.permutation.max(riem_dist(&m, &mean)?);

        let t = random_invertible(p, rng);
        let moved = e
            .matrices()
            .iter()
            .map(|a| SpdMatrix::new(congruence(&t, a.as_array())))
            .collect::<Result<Vec<_>>>()?;
        let m = mm_mean(&Ensemble::new(moved)?)?;
        let expected = SpdMatrix::new(congruence(&t, mean.as_array()))?;
        out.congruence = out.congruence.max(riem_dist(&m, &expected)?);

        let inverted = e.matrices().iter().map(inv_m).collect::<Result<Vec<_>>>()?;
        let m = mm_mean(&Ensemble::new(inverted)?)?;
        out.inversion = out.inversion.max(riem_dist(&m, &inv_m(&mean)?)?);
    }
    Ok(out)
}

/// Worst pairwise distance between the MM, line-search GD and fixed-step GD
/// (`ν = 1`) means on well-conditioned instances.
pub fn measure_solver_agreement<R: Rng>(
    count: usize,
    n: usize,
    p: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let cfg = SolverConfig::default();
    for _ in 0..count {
        let e = ensemble(n, p, 1.0, 10.0, rng);
        let x0 = arithmetic_mean_init(&e)?;
        let means = [SolverKind::Mm, SolverKind::GdLs, SolverKind::GdFixed]
            .into_iter()
            .map(|k| solve(k, &e, &cfg, &x0).map(|r| r.mean))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                worst = worst.max(riem_dist(&means[i], &means[j])?);
            }
        }
    }
    Ok(worst)
}

/// Largest normalized step increase `(F_{k+1} - F_k) / (1 + F_k)`.
pub fn worst_ascent(objectives: &[f64]) -> f64 {
    objectives
        .windows(2)
        .map(|w| (w[1] - w[0]) / (1.0 + w[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The last `window` ratios `(F_k - F̂) / (F_{k-1} - F̂)`, with `F̂` the final
/// objective. Steps whose denominator is at most `floor` are skipped: near
/// convergence the gap falls below the resolution of `F` and the ratio is
/// rounding noise.
pub fn tail_ratios(objectives: &[f64], window: usize, floor: f64) -> Vec<f64> {
    let Some(&fhat) = objectives.last() else {
        return Vec::new();
    };
    let all: Vec<f64> = objectives
        .windows(2)
        .filter_map(|w| {
            let den = w[0] - fhat;
            (den > floor).then(|| (w[1] - fhat) / den)
        })
        .collect();
    all[all.len().saturating_sub(window)..].to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The desk-scale check table run by `karcher check`.
#[derive(Debug, Clone)]
pub struct CheckSuite {
    pub seed: u64,
    pub g1: WeightFn,
    pub g2: WeightFn,
}

impl CheckSuite {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            g1: g1_scalar,
            g2: g2_scalar,
        }
    }

    /// Replaces the scalar weights under test.
    pub fn with_weights(mut self, g1: WeightFn, g2: WeightFn) -> Self {
        self.g1 = g1;
        self.g2 = g2;
        self
    }

    pub fn run(&self) -> Vec<CheckOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        let mut push = |name: &'static str, res: Result<(bool, String)>| {
            let (passed, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
            out.push(CheckOutcome {
                name,
                passed,
                detail,
            });
        };
        let under = |v: f64, tol: f64| (v <= tol, format!("worst {v:.3e} (limit {tol:.0e})"));

        let w = measure_weight_identity(self.g1, self.g2, 241);
        push("g1*g2 = 1 on [1e-12, 1e12]", Ok(under(w, 1e-14)));
        push(
            "MM vs scalar oracle",
            measure_scalar_oracle(60, &mut rng).map(|v| under(v, 1e-8)),
        );
        push(
            "MM vs commuting oracle",
            measure_commuting_oracle(20, &mut rng).map(|v| under(v, 1e-8)),
        );
        push(
            "MM vs two-matrix oracle",
            measure_two_matrix_oracle(20, &mut rng).map(|v| under(v, 1e-8)),
        );
        push(
            "surrogate majorizes objective",
            measure_majorization(100, &mut rng).map(|r| {
                (
                    r.min_slack >= -1e-9 && r.max_touch_error <= 1e-10,
                    format!(
                        "min slack {:.3e}, touch error {:.3e}",
                        r.min_slack, r.max_touch_error
                    ),
                )
            }),
        );
        push(
            "surrogate minimizer stationarity",
            measure_minimizer_stationarity(50, &mut rng).map(|v| under(v, 1e-9)),
        );
        push(
            "derivative formulas vs finite differences",
            measure_derivatives(20, 1e-6, &mut rng).map(|w| {
                let worst = w.iter().cloned().fold(0.0, f64::max);
                under(worst, 1e-5)
            }),
        );
        push(
            "MM objective nonincreasing",
            (|| {
                let mut worst = f64::NEG_INFINITY;
                for _ in 0..5 {
                    let e = ensemble(6, 6, 1.0, 10.0, &mut rng);
                    let x0 = arithmetic_mean_init(&e)?;
                    let r = mm_solve(&e, &SolverConfig::default(), &x0)?;
                    let objs: Vec<f64> = r.objectives().collect();
                    worst = worst.max(worst_ascent(&objs));
                }
                Ok((
                    worst <= 1e-12,
                    format!("worst ascent {worst:.3e} (limit 1e-12)"),
                ))
            })(),
        );
        push(
            "MM / GD / fixed-step GD agree",
            measure_solver_agreement(3, 5, 5, &mut rng).map(|v| under(v, 1e-6)),
        );
        push(
            "mean invariances",
            measure_mean_properties(5, &mut rng).map(|m| {
                (
                    m.permutation <= 1e-9 && m.congruence <= 1e-7 && m.inversion <= 1e-7,
                    format!(
                        "permutation {:.3e}, congruence {:.3e}, inversion {:.3e}",
                        m.permutation, m.congruence, m.inversion
                    ),
                )
            }),
        );
        out
    }
}
