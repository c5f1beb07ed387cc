//! Dense linear-algebra helpers on top of nalgebra: complex eigendecomposition
//! with eigenvectors, matrix exponentials, Hermitian extreme eigenvalues and
//! Gauss–Hermite quadrature.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::{CMatrix, Error, Result, C64};

/// Eigenvalues and right eigenvectors of a general complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Columns are unit-norm right eigenvectors, in the order of `values`.
    pub vectors: CMatrix,
}

/// Complex Schur form `A = Q T Q*`.
pub fn schur(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), 1e-15, 200 * n.max(10))
        .ok_or_else(|| Error::EigenSolver(format!("Schur iteration on {n}x{n} matrix")))?;
    Ok(schur.unpack())
}

/// Eigenvalues only.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let (_, t) = schur(a)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Full eigendecomposition via Schur form and back-substitution.
///
/// Near-equal diagonal entries make the triangular solve singular; those
/// pivots are replaced by a tiny nonzero value as in LAPACK's `trevc`, which
/// yields (nearly) parallel vectors for defective eigenvalues rather than a
/// failure. Callers test defectiveness separately.
pub fn eig(a: &CMatrix) -> Result<Eigen> {
    let (q, t) = schur(a)?;
    let n = t.nrows();
    let tnorm = t.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut x = CMatrix::zeros(n, n);
    for j in 0..n {
        let lambda = t[(j, j)];
        x[(j, j)] = C64::new(1.0, 0.0);
        for i in (0..j).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in i + 1..=j {
                s += t[(i, l)] * x[(l, j)];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            x[(i, j)] = -s / d;
        }
    }
    let mut v = q * x;
    for mut col in v.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= C64::new(nrm, 0.0);
        }
    }
    Ok(Eigen { values: (0..n).map(|i| t[(i, i)]).collect(), vectors: v })
}

/// 2-norm condition number from singular values.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

const EIGEN_COND_LIMIT: f64 = 1e8;

/// A matrix exponential factory: evaluates `exp(tA)` for many `t`.
///
/// Uses the eigendecomposition when the eigenvector matrix is well
/// conditioned and scaling-and-squaring otherwise.
#[derive(Debug, Clone)]
pub struct Expm {
    a: CMatrix,
    diag: Option<(Vec<C64>, CMatrix, CMatrix)>,
}

impl Expm {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let e = eig(a)?;
        let diag = if condition_number(&e.vectors) < EIGEN_COND_LIMIT {
            e.vectors
                .clone()
                .try_inverse()
                .map(|vinv| (e.values.clone(), e.vectors.clone(), vinv))
        } else {
            None
        };
        Ok(Self { a: a.clone(), diag })
    }

    /// Whether the eigendecomposition path is in use.
    pub fn is_diagonal(&self) -> bool {
        self.diag.is_some()
    }

    pub fn at(&self, t: f64) -> CMatrix {
        match &self.diag {
            Some((vals, v, vinv)) => {
                let mut vd = v.clone();
                for (j, lam) in vals.iter().enumerate() {
                    let s = (lam * t).exp();
                    for z in vd.column_mut(j).iter_mut() {
                        *z *= s;
                    }
                }
                vd * vinv
            }
            None => expm_pade(&(&self.a * C64::new(t, 0.0))),
        }
    }
}

/// `exp(tA)` in one call.
pub fn expm(a: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(Expm::new(a)?.at(t))
}

/// Degree-13 Padé approximant with scaling and squaring.
pub fn expm_pade(a: &CMatrix) -> CMatrix {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * C64::new(0.5_f64.powi(s), 0.0);
    let c = |x: f64| C64::new(x, 0.0);
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (&a6 * c(B[13]) + &a4 * c(B[11]) + &a2 * c(B[9]))
        + &a6 * c(B[7])
        + &a4 * c(B[5])
        + &a2 * c(B[3])
        + &id * c(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * c(B[12]) + &a4 * c(B[10]) + &a2 * c(B[8]))
        + &a6 * c(B[6])
        + &a4 * c(B[4])
        + &a2 * c(B[2])
        + &id * c(B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Hermitian part `(A + A*)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest entry of `|A − A*|`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Ascending eigenvalues of a Hermitian matrix (the Hermitian part is used).
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_part(a)).eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a)[0]
}

/// Smallest generalized eigenvalue of the Hermitian pencil `(E, P)` with
/// `P` positive definite, i.e. the largest `s` with `E − sP ⪰ 0`.
pub fn generalized_min_eigenvalue(e: &CMatrix, p: &CMatrix) -> Result<f64> {
    let chol = hermitian_part(p)
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("matrix is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&hermitian_part(e))
        .ok_or_else(|| Error::EigenSolver("singular Cholesky factor".into()))?;
    let z = l
        .solve_lower_triangular(&y.adjoint())
        .ok_or_else(|| Error::EigenSolver("singular Cholesky factor".into()))?;
    Ok(hermitian_min_eigenvalue(&z))
}

/// Gauss–Hermite rule for the standard normal measure: `Σ wᵢ f(xᵢ) ≈ E f(X)`,
/// `X ~ N(0,1)`, exact for polynomials of degree `2n − 1`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for m in 1..n {
            let b = (m as f64).sqrt();
            jac[(m - 1, m)] = b;
            jac[(m, m - 1)] = b;
        }
        let nodes = symmetric_eigenvalues(&jac);
        // Christoffel weights from the orthonormal recurrence are more accurate
        // than squared eigenvector components in the tails.
        let weights = nodes
            .iter()
            .map(|&x| {
                let (mut p0, mut p1) = (0.0, 1.0);
                let mut sum = 1.0;
                for m in 1..n {
                    let p2 = (x * p1 - ((m - 1) as f64).sqrt() * p0) / (m as f64).sqrt();
                    p0 = p1;
                    p1 = p2;
                    sum += p1 * p1;
                }
                1.0 / sum
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Converts a real matrix to complex.
pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| C64::new(x, 0.0))
}

/// Converts a real vector to complex.
pub fn to_complex_vec(a: &DVector<f64>) -> DVector<C64> {
    a.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, 0.5), c(2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(-1.0, 0.0), c(3.0, 0.0), c(1.0, 1.0), c(0.0, 0.0), c(2.0, -2.0)],
        );
        let e = eig(&a).unwrap();
        for (j, lam) in e.values.iter().enumerate() {
            let v = e.vectors.column(j).into_owned();
            let r = &a * &v - &v * *lam;
            assert!(r.norm() < 1e-12, "residual {}", r.norm());
        }
    }

    #[test]
    fn expm_paths_agree() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let e1 = expm(&a, 2.5).unwrap();
        let e2 = expm_pade(&(&a * c(2.5, 0.0)));
        assert!((e1 - e2).norm() < 1e-12);
    }

    #[test]
    fn expm_of_jordan_block() {
        let a = CMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let ex = Expm::new(&a).unwrap();
        assert!(!ex.is_diagonal());
        let m = ex.at(2.0);
        let e = (-2.0_f64).exp();
        assert!((m[(0, 0)] - c(e, 0.0)).norm() < 1e-13);
        assert!((m[(0, 1)] - c(2.0 * e, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn gauss_hermite_moments() {
        let q = GaussHermite::new(10);
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((q.integrate(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((q.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        assert!((q.integrate(|x| x.powi(18)) - 34459425.0).abs() < 1e-5);
    }

    #[test]
    fn generalized_eigenvalue_matches_scaled_identity() {
        let e = CMatrix::identity(3, 3) * c(3.0, 0.0);
        let p = CMatrix::identity(3, 3) * c(2.0, 0.0);
        assert!((generalized_min_eigenvalue(&e, &p).unwrap() - 1.5).abs() < 1e-14);
    }
}
