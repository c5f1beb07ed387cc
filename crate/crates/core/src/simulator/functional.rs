use serde::{Deserialize, Serialize};

use super::state::{sobolev_weight, SpectralState};
use crate::mode_operators::PkAnsatz;
use crate::{Error, Result, C64};

/// `e_γ(h) = Σ_k (1+k²)^γ ⟨ĥ_k, P_k ĥ_k⟩` with `P_0 = I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyFunctional {
    pub gamma: f64,
    /// `None` is the plain `H_γ` norm squared.
    pub ansatz: Option<PkAnsatz>,
}

impl EntropyFunctional {
    pub fn new(gamma: f64, ansatz: Option<PkAnsatz>) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
        }
        match ansatz {
            Some(PkAnsatz::TwoBlock { alpha }) if !(alpha > 0.0 && alpha < 1.0) => {
                Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")))
            }
            Some(PkAnsatz::FourBlock { alpha, beta }) if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) => {
                Err(Error::InvalidParameter(format!("alpha = {alpha}, beta = {beta} outside (0, 1)")))
            }
            Some(PkAnsatz::ExactTwoByTwo { .. }) => {
                Err(Error::InvalidParameter("the exact two-velocity matrix has no Hermite-space form".into()))
            }
            _ => Ok(Self { gamma, ansatz }),
        }
    }

    /// Upper off-diagonal entries `(i, j, P_k[i][j])` of `P_k − I`.
    fn off_diagonal(&self, k: i64) -> Vec<(usize, usize, C64)> {
        let kf = k as f64;
        match self.ansatz {
            Some(PkAnsatz::TwoBlock { alpha }) => vec![(0, 1, C64::new(0.0, -alpha / kf))],
            Some(PkAnsatz::FourBlock { alpha, beta }) => {
                vec![(0, 1, C64::new(0.0, -alpha / kf)), (2, 3, C64::new(0.0, -beta / (2.0 * kf)))]
            }
            _ => Vec::new(),
        }
    }

    /// `⟨ĥ_k, P_k ĥ_k⟩` for one mode.
    pub fn mode_value(&self, state: &SpectralState, k: i64) -> f64 {
        let h = state.mode(k);
        let mut e = h.norm_squared();
        if k != 0 {
            for (i, j, pij) in self.off_diagonal(k) {
                e += 2.0 * (h[i].conj() * pij * h[j]).re;
            }
        }
        e
    }

    pub fn evaluate(&self, state: &SpectralState) -> f64 {
        let k_max = state.k_max() as i64;
        (-k_max..=k_max).map(|k| sobolev_weight(k, self.gamma) * self.mode_value(state, k)).sum()
    }

    /// `(a, b)` with `a·‖h‖²_{H_γ} ≤ e_γ(h) ≤ b·‖h‖²_{H_γ}` for every `h`.
    pub fn equivalence_constants(&self) -> (f64, f64) {
        let r = match self.ansatz {
            Some(PkAnsatz::TwoBlock { alpha }) => alpha,
            Some(PkAnsatz::FourBlock { alpha, beta }) => alpha.max(0.5 * beta),
            _ => 0.0,
        };
        (1.0 - r, 1.0 + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use crate::mode_operators::build_pk;

    #[test]
    fn matches_dense_quadratic_form() {
        let s = SpectralState::random(4, 8, 1.0, 3, 1.0, 0.0).unwrap();
        for ansatz in [PkAnsatz::TwoBlock { alpha: 0.4684 }, PkAnsatz::FourBlock { alpha: 0.3, beta: 0.6 }] {
            let f = EntropyFunctional::new(1.0, Some(ansatz)).unwrap();
            let mut dense = s.mode(0).norm_squared();
            for k in [-4i64, -3, -2, -1, 1, 2, 3, 4] {
                let p = build_pk(k, ansatz, 9).unwrap();
                let h = s.mode(k);
                dense += (1.0 + (k * k) as f64) * (h.adjoint() * &p * &h)[(0, 0)].re;
            }
            assert!((f.evaluate(&s) - dense).abs() < 1e-13);
        }
    }

    #[test]
    fn equivalence_constants_are_p_bounds() {
        let ansatz = PkAnsatz::FourBlock { alpha: 1.0 / 3.0, beta: 1.0 / 3.0 };
        let f = EntropyFunctional::new(0.0, Some(ansatz)).unwrap();
        let ev = hermitian_eigenvalues(&build_pk(1, ansatz, 6).unwrap());
        let (a, b) = f.equivalence_constants();
        assert!((a - ev[0]).abs() < 1e-12 && (b - ev[5]).abs() < 1e-12);
        let s = SpectralState::random(5, 6, 1.0, 11, 1.0, 0.0).unwrap();
        let e = f.evaluate(&s);
        assert!(a * s.norm_squared(0.0) <= e && e <= b * s.norm_squared(0.0));
    }

    #[test]
    fn identity_functional_is_the_norm() {
        let s = SpectralState::random(3, 6, 1.0, 5, 0.7, 1.0).unwrap();
        let f = EntropyFunctional::new(1.0, None).unwrap();
        assert!((f.evaluate(&s) - 0.49).abs() < 1e-14);
        assert!(EntropyFunctional::new(-1.0, None).is_err());
        assert!(EntropyFunctional::new(0.0, Some(PkAnsatz::TwoBlock { alpha: 1.5 })).is_err());
    }
}
