//! Finite-state BGK generators: the coercive homogeneous models and the
//! hypocoercive four-state model with skew-symmetric transport.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::entropy::{fisher_information, relative_entropy, EntropyGenerator, EntropyTrace};
use crate::linalg::{to_complex, Expm};
use crate::{Error, Result};

/// A finite generator `df/dt = G f` with its steady state and conserved
/// linear functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBGKSystem {
    /// Full generator `G`.
    pub generator: DMatrix<f64>,
    /// Relaxation (BGK) part of `G`; equals `G` for homogeneous systems.
    pub relaxation: DMatrix<f64>,
    /// Steady state, normalized so that `⟨left_null, steady_state⟩ = 1`.
    pub steady_state: DVector<f64>,
    /// Spans the kernel of `Gᵀ`.
    pub left_null: DVector<f64>,
}

/// Structural flags of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub essentially_nonnegative: bool,
    pub q_matrix: bool,
    pub detailed_balance: bool,
}

const STRUCT_TOL: f64 = 1e-12;

fn check_probability(rho: &[f64]) -> Result<()> {
    if rho.is_empty() || rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::InvalidParameter("weights must lie in (0,1)".into()));
    }
    let s: f64 = rho.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

impl DiscreteBGKSystem {
    /// Homogeneous BGK system `2λA`, `A = ρ ⊗ (1,…,1) − I`.
    pub fn homogeneous(rho: &[f64], lambda: f64) -> Result<Self> {
        check_probability(rho)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("rate {lambda} must be positive")));
        }
        let n = rho.len();
        let a = DMatrix::from_fn(n, n, |i, j| rho[i] - if i == j { 1.0 } else { 0.0 });
        let g = a * (2.0 * lambda);
        Ok(Self {
            generator: g.clone(),
            relaxation: g,
            steady_state: DVector::from_column_slice(rho),
            left_null: DVector::from_element(n, 1.0),
        })
    }

    /// Four-state model on the phase-space points `(1,1), (1,−1), (−1,−1),
    /// (−1,1)`: relaxation within each position plus central-difference
    /// transport.
    pub fn four_state() -> Self {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            -0.5,  0.5,  0.0,  0.0,
             0.5, -0.5,  0.0,  0.0,
             0.0,  0.0, -0.5,  0.5,
             0.0,  0.0,  0.5, -0.5,
        ]);
        #[rustfmt::skip]
        let b = DMatrix::from_row_slice(4, 4, &[
             0.0, -1.0,  0.0,  1.0,
             1.0,  0.0, -1.0,  0.0,
             0.0,  1.0,  0.0, -1.0,
            -1.0,  0.0,  1.0,  0.0,
        ]);
        Self {
            generator: &a + &b,
            relaxation: a,
            steady_state: DVector::from_element(4, 0.25),
            left_null: DVector::from_element(4, 1.0),
        }
    }

    /// Transport part `G − relaxation`.
    pub fn transport(&self) -> DMatrix<f64> {
        &self.generator - &self.relaxation
    }

    pub fn dimension(&self) -> usize {
        self.generator.nrows()
    }

    /// `G − shift·f∞ ⊗ l`: moves the zero eigenvalue to `−shift` and leaves
    /// the rest of the spectrum unchanged.
    pub fn shifted_generator(&self, shift: f64) -> DMatrix<f64> {
        &self.generator - &self.steady_state * self.left_null.transpose() * shift
    }

    /// Largest entries of `|l·G|` and `|G f∞|`.
    pub fn conservation_defects(&self) -> (f64, f64) {
        let left = (self.left_null.transpose() * &self.generator).abs().max();
        let right = (&self.generator * &self.steady_state).abs().max();
        (left, right)
    }

    /// Propagator factory for `exp(tG)`.
    pub fn propagator(&self) -> Result<Propagator> {
        Ok(Propagator { expm: Expm::new(&to_complex(&self.generator))? })
    }

    /// `f(t) = exp(tG) f0`.
    pub fn evolve_exact(&self, f0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.check_len(f0.len())?;
        Ok(self.propagator()?.apply(f0, t))
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), got: n });
        }
        Ok(())
    }

    pub fn classify(&self) -> Classification {
        let g = &self.generator;
        let n = g.nrows();
        let essentially_nonnegative = (0..n).all(|i| (0..n).all(|j| i == j || g[(i, j)] >= 0.0));
        let ones = DVector::from_element(n, 1.0);
        let q_matrix = essentially_nonnegative && (g * ones).abs().max() <= STRUCT_TOL * g.abs().max().max(1.0);
        let detailed_balance = same_subspace(&null_space(g), &null_space(&g.transpose()));
        Classification { essentially_nonnegative, q_matrix, detailed_balance }
    }

    /// Entropy and Fisher information along the exact flow.
    pub fn entropy_decay_trace(
        &self,
        f0: &DVector<f64>,
        gen: EntropyGenerator,
        times: &[f64],
    ) -> Result<EntropyTrace> {
        self.check_len(f0.len())?;
        let prop = self.propagator()?;
        let finf = self.steady_state.as_slice();
        let mut entropy = Vec::with_capacity(times.len());
        let mut fisher = Vec::with_capacity(times.len());
        for &t in times {
            let f = prop.apply(f0, t);
            entropy.push(relative_entropy(f.as_slice(), finf, gen)?);
            fisher.push(fisher_information(f.as_slice(), finf, gen, &self.generator)?);
        }
        Ok(EntropyTrace { times: times.to_vec(), entropy, fisher })
    }

    /// Searches nonnegative initial data (unit vectors, then pairwise
    /// mixtures) for a time at which the solution has a negative entry.
    pub fn positivity_witness(&self, times: &[f64]) -> Result<Option<PositivityWitness>> {
        let prop = self.propagator()?;
        let n = self.dimension();
        let mut candidates: Vec<DVector<f64>> = (0..n)
            .map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                candidates.push(DVector::from_fn(n, |l, _| if l == i || l == j { 0.5 } else { 0.0 }));
            }
        }
        for f0 in candidates {
            for &t in times {
                let f = prop.apply(&f0, t);
                if let Some((idx, &v)) = f.iter().enumerate().find(|(_, &v)| v < -1e-12) {
                    return Ok(Some(PositivityWitness { initial: f0, time: t, index: idx, value: v }));
                }
            }
        }
        Ok(None)
    }
}

/// Nonnegative initial datum whose solution turns negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityWitness {
    pub initial: DVector<f64>,
    pub time: f64,
    pub index: usize,
    pub value: f64,
}

/// Cached `exp(tG)` evaluator.
#[derive(Debug, Clone)]
pub struct Propagator {
    expm: Expm,
}

impl Propagator {
    pub fn apply(&self, f0: &DVector<f64>, t: f64) -> DVector<f64> {
        if t == 0.0 {
            return f0.clone();
        }
        let m = self.expm.at(t);
        DVector::from_fn(f0.len(), |i, _| (0..f0.len()).map(|j| m[(i, j)].re * f0[j]).sum())
    }
}

fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let scale = a.abs().max().max(1.0);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= 1e-10 * scale)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn same_subspace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    if a.ncols() != b.ncols() {
        return false;
    }
    if a.ncols() == 0 {
        return true;
    }
    // Orthonormal bases: the subspaces agree iff projecting one onto the
    // other loses nothing.
    let proj = b * (b.transpose() * a);
    (a - proj).abs().max() < 1e-8
}
