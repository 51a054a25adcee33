//! Dense SPD matrix type with matrix functions, the affine-invariant
//! geodesic and the Riemannian distance.

use ndarray::{Array1, Array2};

use crate::eigen::{asymmetry, frobenius, sym_eig, EigenPair, SYM_TOL};
use crate::error::{KarcherError, Result};

/// Smallest admissible eigenvalue relative to the largest.
pub const POSITIVITY_FLOOR: f64 = 1e-13;

/// A symmetric positive definite matrix.
///
/// Construction through [`SpdMatrix::new`] checks symmetry and positivity.
/// Entries are stored exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    data: Array2<f64>,
}

impl SpdMatrix {
    /// Validates and symmetrizes `m`.
    pub fn new(m: Array2<f64>) -> Result<Self> {
        let (rows, cols) = m.dim();
        if rows != cols {
            return Err(KarcherError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(KarcherError::Domain("empty matrix".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(KarcherError::NonFinite);
        }
        let asym = asymmetry(&m);
        if asym > SYM_TOL {
            return Err(KarcherError::NotSymmetric { asymmetry: asym });
        }
        let spd = Self::from_symmetric(symmetrize(&m));
        let eig = spd.eig()?;
        let (lo, hi) = (eig.min_value(), eig.max_value());
        if !(hi > 0.0) || lo <= POSITIVITY_FLOOR * hi {
            return Err(KarcherError::NotPositiveDefinite {
                eigenvalue: lo,
                largest: hi,
            });
        }
        Ok(spd)
    }

    pub fn from_diag(d: &[f64]) -> Result<Self> {
        Self::new(Array2::from_diag(&Array1::from_vec(d.to_vec())))
    }

    pub fn identity(p: usize) -> Self {
        Self {
            data: Array2::eye(p),
        }
    }

    /// Wraps a matrix that is SPD by construction. The argument must already
    /// be exactly symmetric.
    pub(crate) fn from_symmetric(data: Array2<f64>) -> Self {
        debug_assert_eq!(data.nrows(), data.ncols());
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn eig(&self) -> Result<EigenPair> {
        sym_eig(&self.data)
    }

    /// `s · X` for `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(KarcherError::Domain(format!(
                "scale factor {s} is not positive"
            )));
        }
        Ok(Self::from_symmetric(&self.data * s))
    }

    pub fn sqrt(&self) -> Result<Self> {
        sqrt_m(self)
    }

    pub fn inv_sqrt(&self) -> Result<Self> {
        inv_sqrt_m(self)
    }

    pub fn inv(&self) -> Result<Self> {
        inv_m(self)
    }

    pub fn log(&self) -> Result<Array2<f64>> {
        log_m(self)
    }

    pub fn pow(&self, t: f64) -> Result<Self> {
        pow_m(self, t)
    }
}

impl AsRef<Array2<f64>> for SpdMatrix {
    fn as_ref(&self) -> &Array2<f64> {
        &self.data
    }
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Array2<f64>) -> Array2<f64> {
    let p = m.nrows();
    Array2::from_shape_fn((p, p), |(i, j)| 0.5 * (m[[i, j]] + m[[j, i]]))
}

/// `M X Mᵀ`, symmetrized. `m` need not be symmetric.
pub fn congruence(m: &Array2<f64>, x: &Array2<f64>) -> Array2<f64> {
    symmetrize(&m.dot(x).dot(&m.t()))
}

pub fn frobenius_norm(m: &Array2<f64>) -> f64 {
    frobenius(m)
}

/// Applies `f` to the eigenvalues of `m`: `U diag(f(λ)) Uᵀ`.
pub fn matrix_fn<F: Fn(f64) -> f64>(m: &SpdMatrix, f: F) -> Result<Array2<f64>> {
    m.eig()?.map(f)
}

/// Like [`matrix_fn`] but requires `f(λ) > 0`, so the result is SPD.
fn spd_fn<F: Fn(f64) -> f64>(eig: &EigenPair, f: F) -> Result<SpdMatrix> {
    let mapped = eig.mapped_values(f)?;
    if let Some(&bad) = mapped.iter().find(|&&v| !(v > 0.0)) {
        return Err(KarcherError::Domain(format!(
            "matrix function produced non-positive eigenvalue {bad:e}"
        )));
    }
    Ok(SpdMatrix::from_symmetric(crate::eigen::compose(
        &eig.vectors,
        &mapped,
    )))
}

pub fn sqrt_m(m: &SpdMatrix) -> Result<SpdMatrix> {
    spd_fn(&m.eig()?, f64::sqrt)
}

pub fn inv_sqrt_m(m: &SpdMatrix) -> Result<SpdMatrix> {
    spd_fn(&m.eig()?, |x| 1.0 / x.sqrt())
}

pub fn inv_m(m: &SpdMatrix) -> Result<SpdMatrix> {
    spd_fn(&m.eig()?, |x| 1.0 / x)
}

pub fn pow_m(m: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    spd_fn(&m.eig()?, |x| x.powf(t))
}

pub fn log_m(m: &SpdMatrix) -> Result<Array2<f64>> {
    matrix_fn(m, f64::ln)
}

/// Matrix exponential of any symmetric matrix.
pub fn exp_m(s: &Array2<f64>) -> Result<SpdMatrix> {
    spd_fn(&sym_eig(s)?, f64::exp)
}

/// Frobenius inner product `Σ A_ij B_ij`.
pub fn frob_inner(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(KarcherError::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(KarcherError::DimensionMismatch { expected, found })
    }
}

/// Point at parameter `t` on the geodesic from `x1` (t = 0) to `x2` (t = 1):
/// `X1^{1/2} (X1^{-1/2} X2 X1^{-1/2})^t X1^{1/2}`.
pub fn geodesic(x1: &SpdMatrix, x2: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    check_dims(x1.dim(), x2.dim())?;
    if t == 0.0 {
        return Ok(x1.clone());
    }
    if t == 1.0 {
        return Ok(x2.clone());
    }
    let e1 = x1.eig()?;
    let half = spd_fn(&e1, f64::sqrt)?;
    let inv_half = spd_fn(&e1, |x| 1.0 / x.sqrt())?;
    let inner = SpdMatrix::from_symmetric(congruence(inv_half.as_array(), x2.as_array()));
    let powered = pow_m(&inner, t)?;
    Ok(SpdMatrix::from_symmetric(congruence(
        half.as_array(),
        powered.as_array(),
    )))
}

/// Affine-invariant distance `||log(X1^{-1/2} X2 X1^{-1/2})||_F`.
pub fn riem_dist(x1: &SpdMatrix, x2: &SpdMatrix) -> Result<f64> {
    check_dims(x1.dim(), x2.dim())?;
    let inv_half = inv_sqrt_m(x1)?;
    let inner = congruence(inv_half.as_array(), x2.as_array());
    let eig = sym_eig(&inner)?;
    let sq: f64 = eig.mapped_values(f64::ln)?.iter().map(|l| l * l).sum();
    Ok(sq.sqrt())
}
