//! Lyapunov's direct method for `du/dt = −C u`: spectral gaps, Lyapunov
//! matrices built from eigenvectors of `C*`, and verification of
//! `C*P + PC ⪰ 2μP`.

use serde::{Deserialize, Serialize};

use crate::linalg::{eig, eigenvalues, generalized_min_eigenvalue, hermitian_defect, hermitian_eigenvalues};
use crate::{CMatrix, Error, Result, C64};

/// Eigenvalues with `|λ|` below this are treated as the kernel.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;
/// Eigenvalues closer than this are grouped when testing defectiveness.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Relative singular-value threshold for the geometric multiplicity.
pub const RANK_TOL: f64 = 1e-8;
/// Certificates with margin above `−MARGIN_TOL` are accepted.
pub const MARGIN_TOL: f64 = 1e-10;

/// Result of [`spectral_gap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    /// `min |Re λ|` over eigenvalues with `|λ| > 1e-9`.
    pub lambda_star: f64,
    /// Some eigenvalue attaining the minimum is defective.
    pub defective: bool,
}

/// A certified `P` with rate `μ`.
#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    pub p: CMatrix,
    pub mu: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Least eigenvalue of `C*P + PC − 2μP`.
    pub margin: f64,
}

impl LyapunovCertificate {
    pub fn is_valid(&self) -> bool {
        self.p_min > 0.0 && self.margin >= -MARGIN_TOL
    }

    /// Rescales `P` so that its trace equals `trace`.
    pub fn with_trace(mut self, trace: f64) -> Self {
        let current: f64 = (0..self.p.nrows()).map(|i| self.p[(i, i)].re).sum();
        let s = trace / current;
        self.p *= C64::new(s, 0.0);
        self.p_min *= s;
        self.p_max *= s;
        self.margin *= s;
        self
    }
}

fn matrix_scale(c: &CMatrix) -> f64 {
    c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0)
}

/// Geometric multiplicity of `λ` as an eigenvalue of `c`.
pub fn geometric_multiplicity(c: &CMatrix, lambda: C64) -> usize {
    let n = c.nrows();
    let shifted = c - CMatrix::identity(n, n) * lambda;
    let tol = RANK_TOL * matrix_scale(c);
    shifted.svd(false, false).singular_values.iter().filter(|&&s| s <= tol).count()
}

/// Groups eigenvalues into clusters of mutual distance below [`CLUSTER_TOL`].
fn clusters(values: &[C64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match groups.iter_mut().find(|g| g.iter().any(|&j| (values[j] - v).norm() < CLUSTER_TOL)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

fn cluster_is_defective(c: &CMatrix, values: &[C64], group: &[usize]) -> bool {
    if group.len() < 2 {
        return false;
    }
    let mean = group.iter().map(|&i| values[i]).sum::<C64>() / group.len() as f64;
    geometric_multiplicity(c, mean) < group.len()
}

/// Spectral gap and defectiveness flag of `c`.
pub fn spectral_gap(c: &CMatrix) -> Result<SpectralGap> {
    let values = eigenvalues(c)?;
    gap_from_values(c, &values)
}

fn gap_from_values(c: &CMatrix, values: &[C64]) -> Result<SpectralGap> {
    let nonzero: Vec<&C64> = values.iter().filter(|z| z.norm() > ZERO_EIGENVALUE_TOL).collect();
    if nonzero.is_empty() {
        return Err(Error::InvalidParameter("matrix has no nonzero eigenvalue".into()));
    }
    let lambda_star = nonzero.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let defective = clusters(values).iter().any(|g| {
        g.iter().any(|&i| values[i].norm() > ZERO_EIGENVALUE_TOL && (values[i].re.abs() - lambda_star).abs() < CLUSTER_TOL)
            && cluster_is_defective(c, values, g)
    });
    Ok(SpectralGap { lambda_star, defective })
}

/// Smallest real part of the spectrum of `c`.
pub fn min_real_part(c: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(c)?.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
}

/// Lyapunov matrix `P = Σ b_j w_j w_j*` from eigenvectors `w_j` of `C*`.
///
/// `weights = None` selects `b_j = 1/‖w_j‖²`. The rate is
/// `μ = min Re λ(C)`. Refuses when an eigenvalue with minimal real part is
/// defective.
pub fn construct_p(c: &CMatrix, weights: Option<&[f64]>) -> Result<LyapunovCertificate> {
    let n = c.nrows();
    let adj = c.adjoint();
    let e = eig(&adj)?;
    let values: Vec<C64> = e.values.iter().map(|z| z.conj()).collect();
    let mu = values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    for g in clusters(&values) {
        let at_min = g.iter().any(|&i| (values[i].re - mu).abs() < CLUSTER_TOL);
        if at_min && cluster_is_defective(c, &values, &g) {
            let z = values[g[0]];
            return Err(Error::Defective { re: z.re, im: z.im });
        }
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len() });
        }
        if w.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
    }
    let mut p = CMatrix::zeros(n, n);
    for j in 0..n {
        let w = e.vectors.column(j);
        let b = match weights {
            Some(ws) => ws[j],
            None => 1.0 / w.norm_squared(),
        };
        p += (w * w.adjoint()) * C64::new(b, 0.0);
    }
    let p = (&p + p.adjoint()) * C64::new(0.5, 0.0);
    let ev = hermitian_eigenvalues(&p);
    let (p_min, p_max) = (ev[0], ev[n - 1]);
    if !(p_min > 1e-12 * p_max) {
        return Err(Error::EigenSolver("eigenvectors do not span the space".into()));
    }
    let margin = verify_inequality(c, &p, mu)?;
    Ok(LyapunovCertificate { p, mu, p_min, p_max, margin })
}

/// `C*P + PC`.
pub fn dissipation_matrix(c: &CMatrix, p: &CMatrix) -> CMatrix {
    c.adjoint() * p + p * c
}

fn check_hermitian(p: &CMatrix) -> Result<()> {
    if !p.is_square() {
        return Err(Error::DimensionMismatch { expected: p.nrows(), got: p.ncols() });
    }
    let scale = matrix_scale(p);
    if hermitian_defect(p) > 1e-12 * scale {
        return Err(Error::InvalidParameter("P is not Hermitian".into()));
    }
    Ok(())
}

/// Least eigenvalue of `C*P + PC − 2μP`.
pub fn verify_inequality(c: &CMatrix, p: &CMatrix, mu: f64) -> Result<f64> {
    check_hermitian(p)?;
    if c.nrows() != p.nrows() {
        return Err(Error::DimensionMismatch { expected: p.nrows(), got: c.nrows() });
    }
    let m = dissipation_matrix(c, p) - p * C64::new(2.0 * mu, 0.0);
    Ok(hermitian_eigenvalues(&m)[0])
}

/// Largest `μ` with `C*P + PC ⪰ 2μP`, from the generalized eigenproblem.
pub fn max_certified_rate(c: &CMatrix, p: &CMatrix) -> Result<f64> {
    check_hermitian(p)?;
    Ok(0.5 * generalized_min_eigenvalue(&dissipation_matrix(c, p), p)?)
}

/// Positive definiteness by Cholesky with a relative pivot threshold.
pub fn is_positive_definite(p: &CMatrix) -> bool {
    let scale = matrix_scale(p);
    match crate::linalg::hermitian_part(p).cholesky() {
        Some(ch) => {
            let l = ch.l();
            (0..l.nrows()).all(|i| l[(i, i)].re * l[(i, i)].re > 1e-12 * scale)
        }
        None => false,
    }
}

/// `√(p_max/p_min)`, the constant in `‖u(t)‖ ≤ c e^{−μt} ‖u(0)‖`.
pub fn decay_envelope(cert: &LyapunovCertificate) -> f64 {
    (cert.p_max / cert.p_min).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete_models::DiscreteBGKSystem;
    use crate::linalg::{expm, to_complex};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_velocity(k: f64, sigma: f64) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, k * sigma), c(0.0, k * sigma), c(1.0, 0.0)])
    }

    #[test]
    fn two_velocity_gap_closed_form() {
        for sigma in [0.1, 0.3, 0.4, 1.0] {
            for k in 1..12 {
                let kf = k as f64;
                let gap = spectral_gap(&two_velocity(kf, sigma)).unwrap().lambda_star;
                let disc = 0.25 - kf * kf * sigma * sigma;
                let expected = if disc > 0.0 { 0.5 - disc.sqrt() } else { 0.5 };
                assert!((gap - expected).abs() < 1e-10, "sigma={sigma} k={k}");
            }
        }
    }

    #[test]
    fn two_velocity_high_mode_certificate() {
        let cert = construct_p(&two_velocity(1.0, 1.0), None).unwrap().with_trace(2.0);
        let expected = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(1.0, 0.0)]);
        assert!((&cert.p - expected).norm() < 1e-12);
        assert!((cert.mu - 0.5).abs() < 1e-12);
        assert!(cert.margin.abs() < 1e-12);
        let identity = dissipation_matrix(&two_velocity(1.0, 1.0), &cert.p) - &cert.p;
        assert!(identity.norm() < 1e-12);
    }

    #[test]
    fn margin_turns_negative_above_gap() {
        let cmat = two_velocity(1.0, 1.0);
        let cert = construct_p(&cmat, None).unwrap();
        assert!(verify_inequality(&cmat, &cert.p, 0.5 + 1e-3).unwrap() < 0.0);
        assert!((max_certified_rate(&cmat, &cert.p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_matrix_admits_identity() {
        let s = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)]);
        let gap = spectral_gap(&s).unwrap().lambda_star;
        let id = CMatrix::identity(2, 2);
        assert!(verify_inequality(&s, &id, gap).unwrap() > -1e-12);
        assert!(verify_inequality(&s, &id, 0.0).unwrap() >= 0.0);
    }

    #[test]
    fn four_state_shifted_certificate() {
        let sys = DiscreteBGKSystem::four_state();
        let g = sys.generator.clone();
        assert!((spectral_gap(&to_complex(&(-&g))).unwrap().lambda_star - 0.5).abs() < 1e-12);
        let cmat = to_complex(&(-sys.shifted_generator(0.5)));
        let cert = construct_p(&cmat, None).unwrap();
        assert!((cert.mu - 0.5).abs() < 1e-12);
        assert!(cert.is_valid());
        assert!(decay_envelope(&cert) >= 1.0);
    }

    #[test]
    fn defective_minimum_refused() {
        let j = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(construct_p(&j, None), Err(Error::Defective { .. })));
        assert!(spectral_gap(&j).unwrap().defective);
        // Defective at the two-velocity boundary k = 1/(2σ).
        assert!(spectral_gap(&two_velocity(1.0, 0.5)).unwrap().defective);
    }

    #[test]
    fn weight_rescaling_keeps_certificate() {
        let cmat = to_complex(&(-DiscreteBGKSystem::four_state().shifted_generator(0.5)));
        let a = construct_p(&cmat, Some(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let b = construct_p(&cmat, Some(&[7.0, 14.0, 21.0, 28.0])).unwrap();
        assert!((a.mu - b.mu).abs() < 1e-14);
        assert_eq!(a.margin >= -MARGIN_TOL, b.margin >= -MARGIN_TOL);
        assert!((decay_envelope(&a) - decay_envelope(&b)).abs() < 1e-9);
    }

    #[test]
    fn p_norm_is_nonincreasing_along_flow() {
        let cmat = two_velocity(2.0, 0.7);
        let cert = construct_p(&cmat, None).unwrap();
        let u0 = nalgebra::DVector::from_row_slice(&[c(0.3, -1.0), c(2.0, 0.5)]);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let u = expm(&(-&cmat), 0.1 * i as f64).unwrap() * &u0;
            let v = (u.adjoint() * &cert.p * &u)[(0, 0)].re;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn positive_definiteness() {
        assert!(is_positive_definite(&CMatrix::identity(3, 3)));
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(!is_positive_definite(&m));
    }
}
