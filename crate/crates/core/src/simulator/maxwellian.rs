//! Local Maxwellians `M_f` with the density `ρ = 1 + σ` and pressure
//! `P = T + τ` of `f`, in the Hermite basis `g̃_m` at temperature `T`.

use crate::basis::{maxwellian, orthonormal_hermite};
use crate::linalg::GaussHermite;
use crate::{Error, Result};

fn check_moments(rho: f64, pressure: f64) -> Result<()> {
    if !(rho > 0.0 && pressure > 0.0) || !rho.is_finite() || !pressure.is_finite() {
        return Err(Error::Domain(format!("nonpositive moments: density {rho}, pressure {pressure}")));
    }
    Ok(())
}

/// `M_f(v) = ρ^{3/2}/√(2πP) · exp(−v²ρ/2P)`.
pub fn local_maxwellian(rho: f64, pressure: f64, v: f64) -> f64 {
    rho * maxwellian(v, pressure / rho)
}

/// Coefficients `⟨M_f, g̃_m⟩`, `m = 0..=order`, in closed form:
/// `ρ (m−1)!! (θ/T − 1)^{m/2} / √m!` for even `m`, zero for odd `m`.
pub fn maxwellian_coefficients(rho: f64, pressure: f64, order: usize, temperature: f64) -> Result<Vec<f64>> {
    check_moments(rho, pressure)?;
    let s1 = pressure / (rho * temperature) - 1.0;
    let mut c = vec![0.0; order + 1];
    c[0] = rho;
    let mut j = 2;
    while j <= order {
        c[j] = c[j - 2] * s1 * (((j - 1) as f64) / (j as f64)).sqrt();
        j += 2;
    }
    Ok(c)
}

/// Gauss–Hermite projection of `M_f` onto `g̃_0..g̃_N` at every grid node,
/// from the density and pressure perturbations `σ`, `τ` there.
pub fn local_maxwellian_project(sigma: &[f64], tau: &[f64], order: usize, temperature: f64) -> Result<Vec<Vec<f64>>> {
    if sigma.len() != tau.len() {
        return Err(Error::DimensionMismatch { expected: sigma.len(), got: tau.len() });
    }
    let q = GaussHermite::new(order + 2);
    sigma
        .iter()
        .zip(tau)
        .map(|(&s, &t)| project_node(&q, 1.0 + s, temperature + t, order, temperature))
        .collect()
}

/// `⟨M_f, g̃_m⟩ = ρ·E[He_m(√(θ/T)·Z)/√m!]` with `Z` standard normal.
fn project_node(q: &GaussHermite, rho: f64, pressure: f64, order: usize, temperature: f64) -> Result<Vec<f64>> {
    check_moments(rho, pressure)?;
    let scale = (pressure / (rho * temperature)).sqrt();
    let mut c = vec![0.0; order + 1];
    for (&x, &w) in q.nodes.iter().zip(&q.weights) {
        for (cm, hm) in c.iter_mut().zip(orthonormal_hermite(order, scale * x)) {
            *cm += rho * w * hm;
        }
    }
    Ok(c)
}

/// Coefficients of `M_f − M_T` minus the linearized gain: zero for
/// `m ≤ 2`, and those of `M_f` above.
pub fn remainder_coefficients(rho: f64, pressure: f64, order: usize, temperature: f64) -> Result<Vec<f64>> {
    let mut c = maxwellian_coefficients(rho, pressure, order, temperature)?;
    for x in c.iter_mut().take(3) {
        *x = 0.0;
    }
    Ok(c)
}

/// `∂²/∂s² M_{f_s}(v)` for the moments `ρ_s = 1 + sσ`, `P_s = T + sτ`,
/// from the closed-form bracket in `θ_s = P_s/ρ_s`.
pub fn maxwellian_second_s_derivative(v: f64, sigma: f64, tau: f64, temperature: f64, s: f64) -> f64 {
    let r = 1.0 + s * sigma;
    let th = (temperature + s * tau) / r;
    let v2 = v * v;
    let v4 = v2 * v2;
    let bracket = -3.0 * sigma / (4.0 * th) + (1.5 * v2 * sigma + 0.75 * tau) / (th * th)
        - (0.25 * v4 * sigma + 1.5 * v2 * tau) / th.powi(3)
        + v4 * tau / (4.0 * th.powi(4));
    (tau - temperature * sigma) / (r * r) * bracket * maxwellian(v, th)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::hermite_functions;

    #[test]
    fn equilibrium_projects_to_first_basis_function() {
        let c = local_maxwellian_project(&[0.0], &[0.0], 8, 1.5).unwrap();
        assert!((c[0][0] - 1.0).abs() < 1e-14);
        assert!(c[0][1..].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let sig = [0.1, -0.3, 0.5, 0.0];
        let tau = [0.2, 0.1, -0.4, 0.7];
        let t = 1.3;
        let proj = local_maxwellian_project(&sig, &tau, 20, t).unwrap();
        for i in 0..sig.len() {
            let c = maxwellian_coefficients(1.0 + sig[i], t + tau[i], 20, t).unwrap();
            for m in 0..=20 {
                assert!((c[m] - proj[i][m]).abs() < 1e-12, "node {i}, m {m}");
            }
        }
    }

    #[test]
    fn projection_reproduces_moments() {
        let (sig, tau, t) = (0.25, -0.15, 1.0);
        let c = maxwellian_coefficients(1.0 + sig, t + tau, 2, t).unwrap();
        // ∫ g̃_0 = 1, ∫ v² g̃_0 = T, ∫ v² g̃_2 = √2 T.
        assert!((c[0] - (1.0 + sig)).abs() < 1e-14);
        assert!((t * c[0] + 2.0_f64.sqrt() * t * c[2] - (t + tau)).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_matches_pointwise() {
        let (rho, p, t) = (1.1, 1.2, 1.0);
        let c = maxwellian_coefficients(rho, p, 60, t).unwrap();
        for v in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            let g = hermite_functions(60, v, t);
            let approx: f64 = c.iter().zip(&g).map(|(a, b)| a * b).sum();
            assert!((approx - local_maxwellian(rho, p, v)).abs() < 1e-10);
        }
    }

    #[test]
    fn small_perturbation_remainder_is_quadratic() {
        let t = 1.0;
        let norm = |eps: f64| {
            let r = remainder_coefficients(1.0 + 0.3 * eps, t - 0.5 * eps, 12, t).unwrap();
            r.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        let ratio = norm(1e-2) / norm(1e-3);
        assert!((ratio - 100.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn second_derivative_bracket() {
        let t = 1.0;
        let f = |v: f64, sig: f64, tau: f64, s: f64| local_maxwellian(1.0 + s * sig, t + s * tau, v);
        for (v, sig, tau, s) in [(0.3, 0.2, -0.1, 0.5), (1.7, -0.3, 0.4, 0.2), (-2.5, 0.1, 0.1, 0.9), (0.0, 0.5, 0.3, 0.0)] {
            let h = 1e-3;
            let fd = (-f(v, sig, tau, s + 2.0 * h) + 16.0 * f(v, sig, tau, s + h) - 30.0 * f(v, sig, tau, s)
                + 16.0 * f(v, sig, tau, s - h)
                - f(v, sig, tau, s - 2.0 * h))
                / (12.0 * h * h);
            let closed = maxwellian_second_s_derivative(v, sig, tau, t, s);
            assert!((fd - closed).abs() < 1e-8, "v {v}: {fd} vs {closed}");
        }
    }

    #[test]
    fn rejects_nonpositive_moments() {
        assert!(maxwellian_coefficients(0.0, 1.0, 4, 1.0).is_err());
        assert!(local_maxwellian_project(&[0.0], &[-1.5], 4, 1.0).is_err());
    }
}
