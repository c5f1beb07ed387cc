use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Name of the generator behind [`SpectralState::random`].
pub const RNG_ALGORITHM: &str = "ChaCha8";

/// Fourier–Hermite coefficients `ĥ_{k,m}` of a deviation `h = f − M_T`,
/// `k ∈ [−K, K]`, `m ∈ [0, N]`. Row `k + K` holds mode `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub coeffs: CMatrix,
    pub temperature: f64,
    pub time: f64,
    k_max: usize,
}

/// Density and pressure perturbations of every Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFields {
    /// `σ_k = ĥ_{k,0}`.
    pub sigma: Vec<C64>,
    /// `τ_k = √2·T·ĥ_{k,2} + T·ĥ_{k,0}`.
    pub tau: Vec<C64>,
}

impl SpectralState {
    /// The equilibrium `h = 0`.
    pub fn zeros(k_max: usize, order: usize, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
        }
        if order < 4 {
            return Err(Error::InvalidParameter(format!("Hermite order {order} below 4")));
        }
        Ok(Self { coeffs: CMatrix::zeros(2 * k_max + 1, order + 1), temperature, time: 0.0, k_max })
    }

    /// Random real data with `|ĥ_{k,m}| ∝ (1+k²)^{−1}(1+m)^{−2}`, with
    /// `σ_0 = τ_0 = 0`, scaled to `‖h‖_{H_γ} = amplitude`.
    pub fn random(k_max: usize, order: usize, temperature: f64, seed: u64, amplitude: f64, gamma: f64) -> Result<Self> {
        let mut s = Self::zeros(k_max, order, temperature)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..=k_max as i64 {
            for m in 0..=order {
                let w = 1.0 / ((1.0 + (k * k) as f64) * ((1 + m) as f64).powi(2));
                let re = rng.random_range(-1.0..1.0) * w;
                let im = if k == 0 { 0.0 } else { rng.random_range(-1.0..1.0) * w };
                s.set(k, m, C64::new(re, im));
            }
        }
        s.set(0, 0, C64::new(0.0, 0.0));
        s.set(0, 2, C64::new(0.0, 0.0));
        let norm = s.norm(gamma);
        if norm > 0.0 {
            s.coeffs *= C64::new(amplitude / norm, 0.0);
        }
        Ok(s)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Highest Hermite index `N`.
    pub fn order(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    fn row(&self, k: i64) -> usize {
        debug_assert!(k.unsigned_abs() as usize <= self.k_max);
        (k + self.k_max as i64) as usize
    }

    pub fn get(&self, k: i64, m: usize) -> C64 {
        self.coeffs[(self.row(k), m)]
    }

    /// Sets `ĥ_{k,m}` and `ĥ_{−k,m}` to keep the state real.
    pub fn set(&mut self, k: i64, m: usize, value: C64) {
        let (r, rm) = (self.row(k), self.row(-k));
        if k == 0 {
            self.coeffs[(r, m)] = C64::new(value.re, 0.0);
        } else {
            self.coeffs[(r, m)] = value;
            self.coeffs[(rm, m)] = value.conj();
        }
    }

    pub fn mode(&self, k: i64) -> CVector {
        self.coeffs.row(self.row(k)).transpose()
    }

    /// Overwrites mode `k` (and its mirror).
    pub fn set_mode(&mut self, k: i64, v: &CVector) {
        for m in 0..v.len() {
            self.set(k, m, v[m]);
        }
    }

    /// `max |ĥ_{−k,m} − conj(ĥ_{k,m})|`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..=self.k_max as i64 {
            for m in 0..=self.order() {
                worst = worst.max((self.get(-k, m) - self.get(k, m).conj()).norm());
            }
        }
        worst
    }

    /// `‖h‖²_{H_γ} = Σ_k (1+k²)^γ Σ_m |ĥ_{k,m}|²`.
    pub fn norm_squared(&self, gamma: f64) -> f64 {
        (-(self.k_max as i64)..=self.k_max as i64)
            .map(|k| sobolev_weight(k, gamma) * self.coeffs.row(self.row(k)).norm_squared())
            .sum()
    }

    pub fn norm(&self, gamma: f64) -> f64 {
        self.norm_squared(gamma).sqrt()
    }

    /// Total mass perturbation `ĥ_{0,0}`.
    pub fn mass(&self) -> f64 {
        self.get(0, 0).re
    }

    /// Total energy perturbation `τ_0`.
    pub fn energy(&self) -> f64 {
        let t = self.temperature;
        2.0_f64.sqrt() * t * self.get(0, 2).re + t * self.get(0, 0).re
    }

    pub fn moments(&self) -> MomentFields {
        let t = self.temperature;
        let ks = -(self.k_max as i64)..=self.k_max as i64;
        let sigma: Vec<C64> = ks.clone().map(|k| self.get(k, 0)).collect();
        let tau = ks.map(|k| self.get(k, 2) * (2.0_f64.sqrt() * t) + self.get(k, 0) * t).collect();
        MomentFields { sigma, tau }
    }

    /// Squared norm carried by the top quarter of the Fourier modes and by
    /// the top quarter of the Hermite modes, whichever is larger.
    pub fn tail_norm_squared(&self) -> f64 {
        let k_cut = self.k_max - self.k_max / 4;
        let m_cut = self.order() + 1 - (self.order() + 1) / 4;
        let mut k_tail = 0.0;
        let mut m_tail = 0.0;
        for k in -(self.k_max as i64)..=self.k_max as i64 {
            for m in 0..=self.order() {
                let a = self.get(k, m).norm_sqr();
                if k.unsigned_abs() as usize > k_cut {
                    k_tail += a;
                }
                if m >= m_cut {
                    m_tail += a;
                }
            }
        }
        f64::max(k_tail, m_tail)
    }

    /// [`Self::tail_norm_squared`] relative to `‖h‖²`.
    pub fn tail_fraction(&self) -> f64 {
        let total = self.norm_squared(0.0);
        if total == 0.0 {
            0.0
        } else {
            self.tail_norm_squared() / total
        }
    }
}

/// `(1 + k²)^γ`.
pub fn sobolev_weight(k: i64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        (1.0 + (k * k) as f64).powf(gamma)
    }
}

/// Serializable summary of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub time: f64,
    pub l2_norm: f64,
    pub mass: f64,
    pub energy: f64,
}

impl From<&SpectralState> for StateSummary {
    fn from(s: &SpectralState) -> Self {
        Self { time: s.time, l2_norm: s.norm(0.0), mass: s.mass(), energy: s.energy() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_state_is_real_and_normalized() {
        let s = SpectralState::random(6, 10, 1.0, 7, 0.25, 1.0).unwrap();
        assert!(s.reality_defect() < 1e-15);
        assert!((s.norm(1.0) - 0.25).abs() < 1e-14);
        assert_eq!(s.mass(), 0.0);
        assert!(s.energy().abs() < 1e-15);
        let again = SpectralState::random(6, 10, 1.0, 7, 0.25, 1.0).unwrap();
        assert_eq!(s, again);
        let other = SpectralState::random(6, 10, 1.0, 8, 0.25, 1.0).unwrap();
        assert_ne!(s, other);
    }

    #[test]
    fn moments_follow_the_basis() {
        let mut s = SpectralState::zeros(2, 6, 2.0).unwrap();
        s.set(1, 0, C64::new(0.3, 0.1));
        s.set(1, 2, C64::new(-0.2, 0.0));
        let m = s.moments();
        let i = 3;
        assert_eq!(m.sigma[i], C64::new(0.3, 0.1));
        let want = C64::new(-0.2, 0.0) * (2.0_f64.sqrt() * 2.0) + C64::new(0.3, 0.1) * 2.0;
        assert!((m.tau[i] - want).norm() < 1e-15);
        assert_eq!(m.sigma[1], C64::new(0.3, -0.1));
    }

    #[test]
    fn tail_fraction_detects_high_modes() {
        let mut s = SpectralState::zeros(8, 8, 1.0).unwrap();
        s.set(1, 1, C64::new(1.0, 0.0));
        assert_eq!(s.tail_fraction(), 0.0);
        s.set(8, 1, C64::new(1.0, 0.0));
        assert!((s.tail_fraction() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_resolution() {
        assert!(SpectralState::zeros(4, 3, 1.0).is_err());
        assert!(SpectralState::zeros(4, 8, 0.0).is_err());
    }
}
