//! Hermite functions, Krawtchouk and discrete Hermite polynomials, and the
//! tridiagonal "multiplication by v" matrices they induce.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::GaussHermite;
use crate::{Error, Result};

/// Largest Krawtchouk order for which the integer coefficients fit in `i128`.
pub const MAX_KRAWTCHOUK_ORDER: usize = 120;

/// Centered Maxwellian with temperature `t`.
pub fn maxwellian(v: f64, t: f64) -> f64 {
    (-(v * v) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// Orthonormal probabilists' Hermite polynomials `He_m(x)/√(m!)` for
/// `m = 0..=n`, by the three-term recurrence.
pub fn orthonormal_hermite(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for m in 1..n {
        let next = (x * p[m] - (m as f64).sqrt() * p[m - 1]) / ((m + 1) as f64).sqrt();
        p.push(next);
    }
    p
}

/// Normalized Hermite function `g̃_m(v) = M_T(v) He_m(v/√T) / √(m!)`.
///
/// `g̃_0 = M_T` and the family is orthonormal in `L²(M_T⁻¹)`.
pub fn hermite_function(m: usize, v: f64, t: f64) -> f64 {
    maxwellian(v, t) * orthonormal_hermite(m, v / t.sqrt())[m]
}

/// All `g̃_0(v), …, g̃_n(v)` in one recurrence pass.
pub fn hermite_functions(n: usize, v: f64, t: f64) -> Vec<f64> {
    let w = maxwellian(v, t);
    orthonormal_hermite(n, v / t.sqrt()).into_iter().map(|p| w * p).collect()
}

/// Matrix of multiplication by `v` on `span{g̃_0..g̃_n}`: symmetric,
/// tridiagonal, `(m, m+1)` entry `√T·√(m+1)`. Size `(n+1)×(n+1)`.
pub fn velocity_matrix(n: usize, t: f64) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n + 1, n + 1);
    let st = t.sqrt();
    for m in 0..n {
        let e = st * ((m + 1) as f64).sqrt();
        l[(m, m + 1)] = e;
        l[(m + 1, m)] = e;
    }
    l
}

/// Integer coefficients of `(1+t)^{n−v}(1−t)^v`; entry `m` is `K_{n,m}(v)`.
pub fn krawtchouk_coefficients(n: usize, v: usize) -> Result<Vec<i128>> {
    if v > n {
        return Err(Error::IndexOutOfRange(format!("node {v} > order {n}")));
    }
    if n > MAX_KRAWTCHOUK_ORDER {
        return Err(Error::IndexOutOfRange(format!("order {n} > {MAX_KRAWTCHOUK_ORDER}")));
    }
    let mut c = vec![0_i128; n + 1];
    c[0] = 1;
    for step in 0..n {
        let sign = if step < n - v { 1 } else { -1 };
        for m in (1..=step + 1).rev() {
            c[m] += sign * c[m - 1];
        }
    }
    Ok(c)
}

/// Krawtchouk polynomial `K_{n,m}(v)` at integer node `v`.
pub fn krawtchouk(n: usize, m: usize, v: usize) -> Result<f64> {
    if m > n {
        return Err(Error::IndexOutOfRange(format!("degree {m} > order {n}")));
    }
    Ok(krawtchouk_coefficients(n, v)?[m] as f64)
}

/// Binomial coefficient as `f64` (exact for the orders used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Discrete Hermite polynomial `H_{n,m}` at node `v_j = (2j−n)/√n`:
/// `(−1)^m C(n,m)^{−1/2} K_{n,m}(j)`, orthonormal under the binomial measure.
pub fn discrete_hermite(n: usize, m: usize, j: usize) -> Result<f64> {
    let k = krawtchouk(n, m, j)?;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * k / binomial(n, m).sqrt())
}

/// Multiplication by `v` on discrete Hermite polynomials of order `n`:
/// `(m, m+1)` entry `√(m+1)·√((n−m)/n)`. Size `(n+1)×(n+1)`.
pub fn discrete_velocity_matrix(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n + 1, n + 1);
    for m in 0..n {
        let e = discrete_velocity_entry(n, m);
        l[(m, m + 1)] = e;
        l[(m + 1, m)] = e;
    }
    l
}

/// The `(m, m+1)` entry of [`discrete_velocity_matrix`].
pub fn discrete_velocity_entry(n: usize, m: usize) -> f64 {
    ((m + 1) as f64).sqrt() * ((n - m) as f64 / n as f64).sqrt()
}

/// Normalized Hermite functions `g̃_0..g̃_N` at temperature `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteBasis {
    pub order: usize,
    pub temperature: f64,
}

impl HermiteBasis {
    pub fn new(order: usize, temperature: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidParameter("Hermite order must be at least 1".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!("temperature {temperature} must be positive")));
        }
        Ok(Self { order, temperature })
    }

    pub fn eval(&self, v: f64) -> Vec<f64> {
        hermite_functions(self.order, v, self.temperature)
    }

    pub fn velocity_matrix(&self) -> DMatrix<f64> {
        velocity_matrix(self.order, self.temperature)
    }

    /// Quadrature rule used for inner products (`2N + 8` nodes).
    pub fn quadrature(&self) -> GaussHermite {
        GaussHermite::new(2 * self.order + 8)
    }

    /// Gram matrix `∫ g̃_m g̃_l M_T⁻¹ dv`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.order + 1;
        let t = self.temperature;
        let q = self.quadrature();
        let mut g = DMatrix::zeros(n, n);
        for (&x, &w) in q.nodes.iter().zip(&q.weights) {
            // v = √T x; dv / (M_T(v) φ(x)) = T / φ(x)².
            let v = t.sqrt() * x;
            let phi = maxwellian(x, 1.0);
            let vals = self.eval(v);
            let scale = w * t / (phi * phi);
            for a in 0..n {
                for b in 0..n {
                    g[(a, b)] += scale * vals[a] * vals[b];
                }
            }
        }
        g
    }
}

/// Discrete Hermite polynomials on `n+1` nodes with binomial weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrawtchoukBasis {
    pub order: usize,
}

impl KrawtchoukBasis {
    pub fn new(order: usize) -> Result<Self> {
        if !(1..=MAX_KRAWTCHOUK_ORDER).contains(&order) {
            return Err(Error::InvalidParameter(format!(
                "Krawtchouk order must lie in 1..={MAX_KRAWTCHOUK_ORDER}, got {order}"
            )));
        }
        Ok(Self { order })
    }

    /// Velocity nodes `(2j − n)/√n`.
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.order as f64;
        (0..=self.order).map(|j| (2.0 * j as f64 - n) / n.sqrt()).collect()
    }

    /// Binomial weights `2⁻ⁿ C(n,j)`.
    pub fn weights(&self) -> Vec<f64> {
        let scale = 0.5_f64.powi(self.order as i32);
        (0..=self.order).map(|j| scale * binomial(self.order, j)).collect()
    }

    /// Table `H[m][j]` of discrete Hermite values.
    pub fn table(&self) -> Vec<Vec<f64>> {
        let n = self.order;
        let coeffs: Vec<Vec<i128>> =
            (0..=n).map(|j| krawtchouk_coefficients(n, j).expect("node within range")).collect();
        (0..=n)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let norm = binomial(n, m).sqrt();
                (0..=n).map(|j| sign * coeffs[j][m] as f64 / norm).collect()
            })
            .collect()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let h = self.table();
        let w = self.weights();
        let n = self.order + 1;
        DMatrix::from_fn(n, n, |a, b| (0..n).map(|j| w[j] * h[a][j] * h[b][j]).sum())
    }

    pub fn velocity_matrix(&self) -> DMatrix<f64> {
        discrete_velocity_matrix(self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;
    use proptest::prelude::*;

    #[test]
    fn low_order_hermite_functions() {
        for &t in &[0.5, 1.0, 2.0] {
            for &v in &[-2.0, -0.3, 0.0, 1.7] {
                let m = maxwellian(v, t);
                assert!((hermite_function(0, v, t) - m).abs() < 1e-15);
                let g2 = (v * v - t) / (2.0_f64.sqrt() * t) * m;
                assert!((hermite_function(2, v, t) - g2).abs() < 1e-14);
            }
        }
        assert_eq!(hermite_function(1, 0.0, 1.0), 0.0);
    }

    #[test]
    fn velocity_matrix_entries() {
        let l = velocity_matrix(3, 1.0);
        for m in 0..3 {
            assert!((l[(m, m + 1)] - ((m + 1) as f64).sqrt()).abs() < 1e-15);
            assert_eq!(l[(m, m)], 0.0);
        }
        assert_eq!(velocity_matrix(1, 4.0)[(0, 1)], 2.0);
    }

    #[test]
    fn krawtchouk_low_degrees() {
        for n in 1..10 {
            for v in 0..=n {
                assert_eq!(krawtchouk(n, 0, v).unwrap(), 1.0);
                assert_eq!(krawtchouk(n, 1, v).unwrap(), n as f64 - 2.0 * v as f64);
            }
        }
        assert!(krawtchouk(3, 4, 0).is_err());
        assert!(krawtchouk(3, 1, 4).is_err());
    }

    #[test]
    fn krawtchouk_orthogonality_is_exact() {
        for n in 1..=12 {
            let c: Vec<Vec<i128>> = (0..=n).map(|j| krawtchouk_coefficients(n, j).unwrap()).collect();
            for a in 0..=n {
                for b in 0..=n {
                    let s: i128 = (0..=n).map(|j| binomial(n, j) as i128 * c[j][a] * c[j][b]).sum();
                    let expected = if a == b { (1_i128 << n) * binomial(n, a) as i128 } else { 0 };
                    assert_eq!(s, expected, "n={n} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn discrete_velocity_matrix_examples() {
        let l = discrete_velocity_matrix(4);
        let expected = [1.0, 1.5_f64.sqrt(), 1.5_f64.sqrt(), 1.0];
        for m in 0..4 {
            assert!((l[(m, m + 1)] - expected[m]).abs() < 1e-15);
        }
        assert_eq!(discrete_velocity_matrix(1)[(0, 1)], 1.0);
        let cont = velocity_matrix(6, 1.0);
        for m in 0..=5 {
            assert!((discrete_velocity_entry(1_000_000, m) - cont[(m, m + 1)]).abs() < 1e-5);
        }
    }

    #[test]
    fn discrete_velocity_spectrum_is_node_set() {
        for n in 1..=20 {
            let basis = KrawtchoukBasis::new(n).unwrap();
            let ev = symmetric_eigenvalues(&basis.velocity_matrix());
            for (a, b) in ev.iter().zip(basis.nodes()) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn discrete_hermite_satisfies_recurrence() {
        let n = 7;
        let basis = KrawtchoukBasis::new(n).unwrap();
        let h = basis.table();
        let l = basis.velocity_matrix();
        for (j, v) in basis.nodes().into_iter().enumerate() {
            for m in 0..=n {
                let rhs: f64 = (0..=n).map(|r| l[(m, r)] * h[r][j]).sum();
                assert!((v * h[m][j] - rhs).abs() < 1e-12);
            }
        }
        assert!((discrete_hermite(n, 3, 2).unwrap() - h[3][2]).abs() < 1e-15);
    }

    #[test]
    fn hermite_gram_identity() {
        for &t in &[0.5, 1.0, 2.0] {
            for order in [1, 5, 20, 40] {
                let g = HermiteBasis::new(order, t).unwrap().gram();
                let err = (g - DMatrix::<f64>::identity(order + 1, order + 1)).abs().max();
                assert!(err < 1e-10, "T={t} N={order}: {err}");
            }
        }
    }

    #[test]
    fn krawtchouk_gram_identity() {
        for n in 1..=40 {
            let g = KrawtchoukBasis::new(n).unwrap().gram();
            let err = (g - DMatrix::<f64>::identity(n + 1, n + 1)).abs().max();
            assert!(err < 1e-12, "n={n}: {err}");
        }
    }

    proptest! {
        #[test]
        fn velocity_matrix_reproduces_multiplication(
            m in 0usize..39, x in -6.0f64..6.0, ti in 0usize..3
        ) {
            let t: f64 = [0.5, 1.0, 2.0][ti];
            let v = x * t.sqrt();
            let g = hermite_functions(40, v, t);
            let l = velocity_matrix(40, t);
            let rhs: f64 = (0..=40).map(|r| l[(m, r)] * g[r]).sum();
            prop_assert!((v * g[m] - rhs).abs() < 1e-9);
        }
    }
}
