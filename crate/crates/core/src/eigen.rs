//! Cyclic Jacobi eigensolver for dense symmetric matrices.
//!
//! The solver sweeps over all off-diagonal pairs in row order and annihilates
//! each entry that is not negligible relative to its diagonal neighbours,
//! `|a_pq| <= eps * sqrt(|a_pp * a_qq|)`. This relative test is stricter than an
//! absolute `1e-14 * ||M||_F` cut-off and keeps the small eigenvalues of
//! graded SPD matrices accurate to high relative precision.

use ndarray::{Array1, Array2};

use crate::error::{KarcherError, Result};

/// Sweep cap for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

/// Relative symmetry tolerance accepted by [`sym_eig`].
pub const SYM_TOL: f64 = 1e-12;

/// Orthonormal eigenvectors (columns of `vectors`) and eigenvalues sorted in
/// descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub vectors: Array2<f64>,
    pub values: Array1<f64>,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    pub fn min_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `U diag(f(λ)) Uᵀ`. Fails with a domain error if `f` yields a
    /// non-finite value on any eigenvalue.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Array2<f64>> {
        let mapped = self.mapped_values(f)?;
        Ok(compose(&self.vectors, &mapped))
    }

    pub(crate) fn mapped_values<F: Fn(f64) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|&lambda| {
                let v = f(lambda);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(KarcherError::Domain(format!(
                        "function is not finite at eigenvalue {lambda:e}"
                    )))
                }
            })
            .collect()
    }

    /// `U diag(λ) Uᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        compose(&self.vectors, self.values.as_slice().expect("contiguous"))
    }
}

/// Builds `U diag(d) Uᵀ`, filling the lower triangle from the upper one so
/// the result is exactly symmetric.
pub(crate) fn compose(u: &Array2<f64>, d: &[f64]) -> Array2<f64> {
    let p = d.len();
    let mut out = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in i..p {
            let mut s = 0.0;
            for k in 0..p {
                s += u[[i, k]] * d[k] * u[[j, k]];
            }
            out[[i, j]] = s;
            out[[j, i]] = s;
        }
    }
    out
}

pub(crate) fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative asymmetry `||M - Mᵀ||_F / ||M||_F` (zero for the zero matrix).
pub(crate) fn asymmetry(m: &Array2<f64>) -> f64 {
    let p = m.nrows();
    let mut num = 0.0;
    for i in 0..p {
        for j in 0..p {
            let d = m[[i, j]] - m[[j, i]];
            num += d * d;
        }
    }
    let den = frobenius(m);
    if den == 0.0 {
        0.0
    } else {
        num.sqrt() / den
    }
}

/// Eigendecomposition of a symmetric matrix. The input is checked for
/// symmetry to [`SYM_TOL`] and symmetrized before the sweeps start.
pub fn sym_eig(m: &Array2<f64>) -> Result<EigenPair> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(KarcherError::NotSquare { rows, cols });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(KarcherError::NonFinite);
    }
    let asym = asymmetry(m);
    if asym > SYM_TOL {
        return Err(KarcherError::NotSymmetric { asymmetry: asym });
    }
    let n = rows;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m[[i, j]] + m[[j, i]]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt()
                    || apq.abs() < f64::MIN_POSITIVE
                {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                rotated = true;
                rotate(&mut a, &mut v, n, p, q);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KarcherError::NonConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = Array1::from_iter(order.iter().map(|&k| a[k * n + k]));
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| v[i * n + order[j]]);
    Ok(EigenPair { vectors, values })
}

/// One Jacobi rotation zeroing `a[p][q]`; updates both triangles so the
/// working matrix stays exactly symmetric.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + theta.hypot(1.0))
    };
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;

    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[r * n + p];
        let arq = a[r * n + q];
        let new_rp = c * arp - s * arq;
        let new_rq = s * arp + c * arq;
        a[r * n + p] = new_rp;
        a[p * n + r] = new_rp;
        a[r * n + q] = new_rq;
        a[q * n + r] = new_rq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    for r in 0..n {
        let vrp = v[r * n + p];
        let vrq = v[r * n + q];
        v[r * n + p] = c * vrp - s * vrq;
        v[r * n + q] = s * vrp + c * vrq;
    }
}
