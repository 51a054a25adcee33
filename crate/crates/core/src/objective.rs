//! The sum-of-squared-distances objective, its descent direction, and the
//! majorizing surrogate used by the MM iteration.
//!
//! For `Y_i = A_i^{-1/2} X A_i^{-1/2}` the surrogate at `X'` is
//!
//! ```text
//! G(X, X') = <f1(X'), X> + <f2(X'), X^{-1}> + c0(X')
//! f1(X) = Σ A_i^{-1/2} g1(Y_i) A_i^{-1/2}
//! f2(X) = Σ A_i^{1/2}  g2(Y_i) A_i^{1/2}
//! ```
//!
//! with scalar weights `g1(x) = (sqrt(ln²x + 1) + ln x) / x` and
//! `g2(x) = (sqrt(ln²x + 1) - ln x) x`, so that `g1 · g2 = 1`.
//!
//! All sums over the ensemble are reduced in ascending index order.

use ndarray::Array2;

use crate::eigen::{compose, sym_eig, EigenPair};
use crate::error::{KarcherError, Result};
use crate::spd::{check_dims, congruence, frob_inner, inv_m, sqrt_m, SpdMatrix};

/// The problem instance `{A_1, ..., A_n}` with cached square roots and
/// inverse square roots.
#[derive(Debug, Clone)]
pub struct Ensemble {
    mats: Vec<SpdMatrix>,
    sqrt: Vec<SpdMatrix>,
    inv_sqrt: Vec<SpdMatrix>,
}

impl Ensemble {
    pub fn new(mats: Vec<SpdMatrix>) -> Result<Self> {
        let first = mats.first().ok_or(KarcherError::EmptyEnsemble)?;
        let p = first.dim();
        let mut sqrt = Vec::with_capacity(mats.len());
        let mut inv_sqrt = Vec::with_capacity(mats.len());
        for a in &mats {
            check_dims(p, a.dim())?;
            let eig = a.eig()?;
            let vals = eig.values.as_slice().expect("contiguous");
            let s: Vec<f64> = vals.iter().map(|v| v.sqrt()).collect();
            let is: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
            sqrt.push(SpdMatrix::from_symmetric(compose(&eig.vectors, &s)));
            inv_sqrt.push(SpdMatrix::from_symmetric(compose(&eig.vectors, &is)));
        }
        Ok(Self {
            mats,
            sqrt,
            inv_sqrt,
        })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mats[0].dim()
    }

    pub fn matrices(&self) -> &[SpdMatrix] {
        &self.mats
    }

    pub fn sqrt(&self, i: usize) -> &SpdMatrix {
        &self.sqrt[i]
    }

    pub fn inv_sqrt(&self, i: usize) -> &SpdMatrix {
        &self.inv_sqrt[i]
    }

    fn check(&self, x: &SpdMatrix) -> Result<()> {
        check_dims(self.dim(), x.dim())
    }

    /// Eigendecompositions of `A_i^{-1/2} X A_i^{-1/2}` in index order.
    fn transported(&self, x: &SpdMatrix) -> Result<Vec<EigenPair>> {
        self.check(x)?;
        self.inv_sqrt
            .iter()
            .map(|s| sym_eig(&congruence(s.as_array(), x.as_array())))
            .collect()
    }
}

fn split_log(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(KarcherError::Domain(format!(
            "weight function requires a positive finite argument, got {x:e}"
        )));
    }
    let z = x.ln();
    Ok((z, z.hypot(1.0)))
}

/// `(sqrt(ln²x + 1) + ln x) / x`, evaluated without cancellation for
/// `ln x < 0`.
pub fn g1_scalar(x: f64) -> Result<f64> {
    let (z, r) = split_log(x)?;
    Ok(if z >= 0.0 {
        (r + z) / x
    } else {
        1.0 / ((r - z) * x)
    })
}

/// `(sqrt(ln²x + 1) - ln x) · x`, evaluated without cancellation for
/// `ln x > 0`.
pub fn g2_scalar(x: f64) -> Result<f64> {
    let (z, r) = split_log(x)?;
    Ok(if z <= 0.0 { (r - z) * x } else { x / (r + z) })
}

/// `Σ ||log(A_i^{-1/2} X A_i^{-1/2})||_F²`.
pub fn objective(e: &Ensemble, x: &SpdMatrix) -> Result<f64> {
    let eigs = e.transported(x)?;
    objective_from(&eigs)
}

fn objective_from(eigs: &[EigenPair]) -> Result<f64> {
    let mut total = 0.0;
    for eig in eigs {
        for l in eig.mapped_values(f64::ln)? {
            total += l * l;
        }
    }
    Ok(total)
}

/// Unnormalized Riemannian gradient sum `Σ log(X^{-1/2} A_i X^{-1/2})`.
/// Its Frobenius norm is the convergence measure of every solver.
pub fn gradient_sum(e: &Ensemble, x: &SpdMatrix) -> Result<Array2<f64>> {
    e.check(x)?;
    let inv_half = x.inv_sqrt()?;
    let p = e.dim();
    let mut sum = Array2::<f64>::zeros((p, p));
    for a in e.matrices() {
        let inner = congruence(inv_half.as_array(), a.as_array());
        sum += &sym_eig(&inner)?.map(f64::ln)?;
    }
    Ok(sum)
}

/// Descent direction `D = (1/n) Σ log(X^{-1/2} A_i X^{-1/2})`; zero exactly
/// at the Karcher mean.
pub fn grad_direction(e: &Ensemble, x: &SpdMatrix) -> Result<Array2<f64>> {
    Ok(gradient_sum(e, x)? / e.len() as f64)
}

/// Euclidean gradient of the objective,
/// `Σ A_i^{-1/2} (2 Y_i^{-1} log Y_i) A_i^{-1/2}`.
pub fn euclidean_gradient(e: &Ensemble, x: &SpdMatrix) -> Result<Array2<f64>> {
    let eigs = e.transported(x)?;
    let p = e.dim();
    let mut sum = Array2::<f64>::zeros((p, p));
    for (eig, s) in eigs.iter().zip(&e.inv_sqrt) {
        let d = eig.map(|y| 2.0 * y.ln() / y)?;
        sum += &congruence(s.as_array(), &d);
    }
    Ok(sum)
}

/// Objective value together with `f1(X)` and `f2(X)`, sharing one
/// eigendecomposition per ensemble member.
pub(crate) fn majorizer_parts(e: &Ensemble, x: &SpdMatrix) -> Result<(f64, SpdMatrix, SpdMatrix)> {
    let eigs = e.transported(x)?;
    let value = objective_from(&eigs)?;
    let p = e.dim();
    let mut f1 = Array2::<f64>::zeros((p, p));
    let mut f2 = Array2::<f64>::zeros((p, p));
    for (i, eig) in eigs.iter().enumerate() {
        let w1 = eig.mapped_values(|y| g1_scalar(y).unwrap_or(f64::NAN))?;
        let w2 = eig.mapped_values(|y| g2_scalar(y).unwrap_or(f64::NAN))?;
        f1 += &congruence(e.inv_sqrt[i].as_array(), &compose(&eig.vectors, &w1));
        f2 += &congruence(e.sqrt[i].as_array(), &compose(&eig.vectors, &w2));
    }
    Ok((
        value,
        SpdMatrix::from_symmetric(f1),
        SpdMatrix::from_symmetric(f2),
    ))
}

pub fn f1(e: &Ensemble, x: &SpdMatrix) -> Result<SpdMatrix> {
    Ok(majorizer_parts(e, x)?.1)
}

pub fn f2(e: &Ensemble, x: &SpdMatrix) -> Result<SpdMatrix> {
    Ok(majorizer_parts(e, x)?.2)
}

/// Coefficients of the surrogate `G(·, X')`.
#[derive(Debug, Clone)]
pub struct SurrogateCoeffs {
    pub c1: SpdMatrix,
    pub c2: SpdMatrix,
    pub c0: f64,
}

/// Surrogate at `xp`. `c0` is fixed so that `G(X', X') = F(X')`.
pub fn surrogate_coeffs(e: &Ensemble, xp: &SpdMatrix) -> Result<SurrogateCoeffs> {
    let (value, c1, c2) = majorizer_parts(e, xp)?;
    let xp_inv = inv_m(xp)?;
    let c0 = value
        - frob_inner(c1.as_array(), xp.as_array())?
        - frob_inner(c2.as_array(), xp_inv.as_array())?;
    Ok(SurrogateCoeffs { c1, c2, c0 })
}

/// `<c1, X> + <c2, X^{-1}> + c0`.
pub fn surrogate_value(s: &SurrogateCoeffs, x: &SpdMatrix) -> Result<f64> {
    check_dims(s.c1.dim(), x.dim())?;
    let x_inv = inv_m(x)?;
    Ok(frob_inner(s.c1.as_array(), x.as_array())?
        + frob_inner(s.c2.as_array(), x_inv.as_array())?
        + s.c0)
}

/// Closed-form minimizer of `<C1, X> + <C2, X^{-1}>`:
/// `C2^{1/2} (C2^{1/2} C1 C2^{1/2})^{-1/2} C2^{1/2}`.
pub fn surrogate_minimizer(c1: &SpdMatrix, c2: &SpdMatrix) -> Result<SpdMatrix> {
    check_dims(c1.dim(), c2.dim())?;
    let c2_half = sqrt_m(c2)?;
    let inner = SpdMatrix::from_symmetric(congruence(c2_half.as_array(), c1.as_array()));
    let inner_inv_half = inner.inv_sqrt()?;
    Ok(SpdMatrix::from_symmetric(congruence(
        c2_half.as_array(),
        inner_inv_half.as_array(),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::frobenius_norm;
    use ndarray::array;
    use std::f64::consts::E;

    fn scalar(v: f64) -> SpdMatrix {
        SpdMatrix::from_diag(&[v]).unwrap()
    }

    fn a22() -> SpdMatrix {
        SpdMatrix::new(array![[2.0, 1.0], [1.0, 2.0]]).unwrap()
    }

    #[test]
    fn ensemble_rejects_empty_and_mixed_dims() {
        assert!(matches!(
            Ensemble::new(vec![]),
            Err(KarcherError::EmptyEnsemble)
        ));
        assert!(matches!(
            Ensemble::new(vec![SpdMatrix::identity(2), SpdMatrix::identity(3)]),
            Err(KarcherError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ensemble_cache_is_coherent() {
        let a = a22();
        let e = Ensemble::new(vec![a.clone()]).unwrap();
        let s = e.sqrt(0).as_array();
        let is = e.inv_sqrt(0).as_array();
        assert!(frobenius_norm(&(s.dot(s) - a.as_array())) < 1e-14);
        assert!(frobenius_norm(&(s.dot(is) - Array2::<f64>::eye(2))) < 1e-14);
    }

    #[test]
    fn weights_at_one_and_e() {
        assert_eq!(g1_scalar(1.0).unwrap(), 1.0);
        assert_eq!(g2_scalar(1.0).unwrap(), 1.0);
        let s2 = 2f64.sqrt();
        assert!((g1_scalar(E).unwrap() - (s2 + 1.0) / E).abs() < 1e-15);
        assert!((g2_scalar(E).unwrap() - (s2 - 1.0) * E).abs() < 1e-15);
        assert!(g1_scalar(0.0).is_err());
        assert!(g2_scalar(-1.0).is_err());
        assert!(g2_scalar(f64::NAN).is_err());
    }

    #[test]
    fn weights_multiply_to_one() {
        for x in [1e-8, 1e-3, 1.0, 1e3, 1e8] {
            let prod = g1_scalar(x).unwrap() * g2_scalar(x).unwrap();
            assert!((prod - 1.0).abs() < 1e-14, "x = {x}: {prod}");
        }
    }

    #[test]
    fn objective_examples() {
        let a = a22();
        let e = Ensemble::new(vec![a.clone()]).unwrap();
        assert!(objective(&e, &a).unwrap() < 1e-28);

        let e = Ensemble::new(vec![SpdMatrix::identity(2)]).unwrap();
        let x = SpdMatrix::identity(2).scaled(E).unwrap();
        assert!((objective(&e, &x).unwrap() - 2.0).abs() < 1e-14);

        let e = Ensemble::new(vec![scalar(1.0), scalar(4.0)]).unwrap();
        let expected = 2.0 * 2f64.ln().powi(2);
        assert!((objective(&e, &scalar(2.0)).unwrap() - expected).abs() < 1e-15);
        assert!(objective(&e, &SpdMatrix::identity(2)).is_err());
    }

    #[test]
    fn grad_direction_examples() {
        let a = a22();
        let e = Ensemble::new(vec![a.clone()]).unwrap();
        assert!(frobenius_norm(&grad_direction(&e, &a).unwrap()) < 1e-14);

        let e = Ensemble::new(vec![scalar(1.0), scalar(4.0)]).unwrap();
        assert!(grad_direction(&e, &scalar(2.0)).unwrap()[[0, 0]].abs() < 1e-15);

        let e2 = E * E;
        let e = Ensemble::new(vec![
            SpdMatrix::identity(2),
            SpdMatrix::from_diag(&[e2, e2]).unwrap(),
        ])
        .unwrap();
        let d = grad_direction(&e, &SpdMatrix::identity(2)).unwrap();
        assert!(frobenius_norm(&(d - Array2::<f64>::eye(2))) < 1e-15);
    }

    #[test]
    fn f1_f2_examples() {
        let a = a22();
        let e = Ensemble::new(vec![a.clone()]).unwrap();
        let (_, c1, c2) = majorizer_parts(&e, &a).unwrap();
        let a_inv = inv_m(&a).unwrap();
        assert!(frobenius_norm(&(c1.as_array() - a_inv.as_array())) < 1e-14);
        assert!(frobenius_norm(&(c2.as_array() - a.as_array())) < 1e-14);

        let e = Ensemble::new(vec![scalar(1.0)]).unwrap();
        let x = scalar(E);
        assert!((f1(&e, &x).unwrap().as_array()[[0, 0]] - g1_scalar(E).unwrap()).abs() < 1e-15);
        assert!((f2(&e, &x).unwrap().as_array()[[0, 0]] - g2_scalar(E).unwrap()).abs() < 1e-15);

        let i2 = SpdMatrix::identity(2);
        let e = Ensemble::new(vec![i2.clone(), i2.clone()]).unwrap();
        let two = 2.0 * Array2::<f64>::eye(2);
        assert_eq!(f1(&e, &i2).unwrap().as_array(), &two);
        assert_eq!(f2(&e, &i2).unwrap().as_array(), &two);
    }

    #[test]
    fn surrogate_constant_at_single_matrix() {
        let a = a22();
        let e = Ensemble::new(vec![a.clone()]).unwrap();
        let s = surrogate_coeffs(&e, &a).unwrap();
        assert!((s.c0 + 4.0).abs() < 1e-13);
    }

    #[test]
    fn surrogate_value_examples() {
        let s = SurrogateCoeffs {
            c1: SpdMatrix::identity(2),
            c2: SpdMatrix::identity(2),
            c0: 0.0,
        };
        assert_eq!(surrogate_value(&s, &SpdMatrix::identity(2)).unwrap(), 4.0);
        let x = SpdMatrix::from_diag(&[2.0, 0.5]).unwrap();
        assert_eq!(surrogate_value(&s, &x).unwrap(), 5.0);
    }

    #[test]
    fn surrogate_minimizer_examples() {
        let i = SpdMatrix::identity(3);
        let x = surrogate_minimizer(&i, &i).unwrap();
        assert!(frobenius_norm(&(x.as_array() - i.as_array())) < 1e-15);
        let x = surrogate_minimizer(&i.scaled(2.0).unwrap(), &i.scaled(8.0).unwrap()).unwrap();
        assert!(frobenius_norm(&(x.as_array() - 2.0 * i.as_array())) < 1e-14);
    }
}
