//! Fourier-mode operators `C_k` of the two-velocity, `n`-velocity, linear
//! and linearized continuous BGK models, block ansätze for the Lyapunov
//! matrices `P_k`, their closed-form leading minors, and certification of a
//! rate that is uniform in `k`.
//!
//! Convention: the `k`-th mode evolves by `du/dt = −C_k u` with
//! `C_k = ik·S + diag(d)`, `S` the real symmetric velocity matrix and
//! `d_m ∈ {0, 1}` the collision part. `C_{−k}` is the complex conjugate of
//! `C_k`, and so are the ansatz matrices, so only `k ≥ 1` is examined.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{discrete_velocity_matrix, velocity_matrix};
use crate::entropy::nelder_mead;
use crate::linalg::{eigenvalues, hermitian_eigenvalues};
use crate::lyapunov::{construct_p, max_certified_rate, spectral_gap, verify_inequality, MARGIN_TOL};
use crate::{CMatrix, Error, Result, C64};

/// Smallest truncation accepted for the continuous models.
pub const MIN_TRUNCATION: usize = 5;
/// Default truncation for certificates.
pub const CERTIFY_TRUNCATION: usize = 60;
/// Default truncation for spectral-gap studies.
pub const GAP_TRUNCATION: usize = 400;
/// Bracket for the one-parameter `α` search.
pub const ALPHA_BRACKET: (f64, f64) = (0.01, 0.70);
/// Number of grid points in the `α` scan.
pub const ALPHA_GRID: usize = 500;
/// Golden-section tolerance in `α`.
pub const ALPHA_TOL: f64 = 1e-5;

/// Which kinetic model a mode operator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Velocities `±σ`, basis `(mass, flux)`.
    TwoVelocity { sigma: f64 },
    /// `n + 1` velocities with binomial weights, discrete Hermite basis.
    DiscreteVelocity { n: usize },
    /// Continuous velocities, only mass is conserved.
    ContinuousLinear,
    /// Continuous velocities, mass and energy are conserved.
    ContinuousLinearized,
}

impl ModelKind {
    /// Collision diagonal `d` of length `dim` (`C_k = ik·S + diag(d)`).
    pub fn collision_diagonal(&self, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|m| match self {
                ModelKind::ContinuousLinearized => {
                    if m == 0 || m == 2 {
                        0.0
                    } else {
                        1.0
                    }
                }
                _ => {
                    if m == 0 {
                        0.0
                    } else {
                        1.0
                    }
                }
            })
            .collect()
    }

    fn is_continuous(&self) -> bool {
        matches!(self, ModelKind::ContinuousLinear | ModelKind::ContinuousLinearized)
    }
}

/// The matrix `C_k` together with its parts.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub k: i64,
    /// Matrix dimension.
    pub truncation: usize,
    pub model: ModelKind,
    pub temperature: f64,
    /// `C_k`.
    pub matrix: CMatrix,
    /// Real symmetric velocity matrix `S`.
    pub velocity: DMatrix<f64>,
    /// Collision diagonal `d`.
    pub dissipation: DVector<f64>,
}

impl ModeOperator {
    /// Largest entrywise deviation from `C_k = ik·S + diag(d)` with `S`
    /// symmetric and `d_m ∈ {0, 1}`.
    pub fn structure_defect(&self) -> f64 {
        let n = self.truncation;
        let k = self.k as f64;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { self.dissipation[i] } else { 0.0 };
                let expected = C64::new(d, k * self.velocity[(i, j)]);
                worst = worst.max((self.matrix[(i, j)] - expected).norm());
                worst = worst.max((self.velocity[(i, j)] - self.velocity[(j, i)]).abs());
            }
            let d = self.dissipation[i];
            worst = worst.max(d.abs().min((d - 1.0).abs()));
        }
        worst
    }

    /// The generator `−C_k`.
    pub fn generator(&self) -> CMatrix {
        -self.matrix.clone()
    }
}

/// Builds `C_k`. `truncation` is the matrix dimension of the continuous
/// models and is ignored by the finite-velocity ones.
pub fn build_mode_operator(model: ModelKind, k: i64, truncation: usize, temperature: f64) -> Result<ModeOperator> {
    if k == 0 {
        return Err(Error::InvalidParameter("mode k = 0 is handled analytically".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    let velocity = match model {
        ModelKind::TwoVelocity { sigma } => {
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
            }
            DMatrix::from_row_slice(2, 2, &[0.0, sigma, sigma, 0.0])
        }
        ModelKind::DiscreteVelocity { n } => {
            if n == 0 {
                return Err(Error::InvalidParameter("need at least two velocities".into()));
            }
            discrete_velocity_matrix(n) * temperature.sqrt()
        }
        ModelKind::ContinuousLinear | ModelKind::ContinuousLinearized => {
            if truncation < MIN_TRUNCATION {
                return Err(Error::InvalidParameter(format!(
                    "truncation {truncation} below the minimum {MIN_TRUNCATION}"
                )));
            }
            velocity_matrix(truncation - 1, temperature)
        }
    };
    let dim = velocity.nrows();
    let dissipation = DVector::from_vec(model.collision_diagonal(dim));
    let kf = k as f64;
    let matrix = CMatrix::from_fn(dim, dim, |i, j| {
        let d = if i == j { dissipation[i] } else { 0.0 };
        C64::new(d, kf * velocity[(i, j)])
    });
    Ok(ModeOperator { k, truncation: dim, model, temperature, matrix, velocity, dissipation })
}

/// Eigenvalues of `−C_k` for the two-velocity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoVelocitySpectrum {
    pub values: [C64; 2],
    /// `|k|σ = 1/2`: a double eigenvalue with a single eigenvector.
    pub defective: bool,
}

/// `−1/2 ± √(1/4 − k²σ²)`.
pub fn two_velocity_eigenvalues(sigma: f64, k: i64) -> Result<TwoVelocitySpectrum> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let ks = k as f64 * sigma;
    let disc = 0.25 - ks * ks;
    let root = C64::new(disc, 0.0).sqrt();
    let half = C64::new(-0.5, 0.0);
    Ok(TwoVelocitySpectrum { values: [half + root, half - root], defective: disc.abs() < 1e-14 })
}

/// Sharp decay rate `Re(1/2 − √(1/4 − σ²))` of the two-velocity model.
pub fn two_velocity_rate(sigma: f64) -> f64 {
    0.5 - C64::new(0.25 - sigma * sigma, 0.0).sqrt().re
}

/// Shape of `P_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PkAnsatz {
    /// Exact Lyapunov matrix of the two-velocity mode.
    ExactTwoByTwo { sigma: f64 },
    /// Top-left block `((1, −iα/k), (iα/k, 1))`, identity elsewhere.
    TwoBlock { alpha: f64 },
    /// Blocks `((1, −iα/k), (iα/k, 1))` and `((1, −iβ/2k), (iβ/2k, 1))`.
    FourBlock { alpha: f64, beta: f64 },
}

/// Builds `P_k` of dimension `dim`.
pub fn build_pk(k: i64, ansatz: PkAnsatz, dim: usize) -> Result<CMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("P_k is defined for k ≠ 0".into()));
    }
    let kf = k as f64;
    let mut p = CMatrix::identity(dim, dim);
    match ansatz {
        PkAnsatz::ExactTwoByTwo { sigma } => {
            if dim != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: dim });
            }
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
            }
            let ks = kf * sigma;
            let disc = 0.25 - ks * ks;
            if disc.abs() < 1e-14 {
                return Err(Error::Defective { re: -0.5, im: 0.0 });
            }
            if disc > 0.0 {
                let a = 4.0 * ks * ks;
                p[(0, 0)] = C64::new(a, 0.0);
                p[(0, 1)] = C64::new(0.0, -2.0 * ks);
                p[(1, 0)] = C64::new(0.0, 2.0 * ks);
                p[(1, 1)] = C64::new(2.0 - a, 0.0);
            } else {
                p[(0, 1)] = C64::new(0.0, -1.0 / (2.0 * ks));
                p[(1, 0)] = C64::new(0.0, 1.0 / (2.0 * ks));
            }
        }
        PkAnsatz::TwoBlock { alpha } => {
            if !(alpha > 0.0 && alpha < kf.abs()) {
                return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, |k|)")));
            }
            if dim < 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: dim });
            }
            p[(0, 1)] = C64::new(0.0, -alpha / kf);
            p[(1, 0)] = C64::new(0.0, alpha / kf);
        }
        PkAnsatz::FourBlock { alpha, beta } => {
            if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidParameter(format!("alpha = {alpha}, beta = {beta} outside (0, 1)")));
            }
            if dim < 4 {
                return Err(Error::DimensionMismatch { expected: 4, got: dim });
            }
            p[(0, 1)] = C64::new(0.0, -alpha / kf);
            p[(1, 0)] = C64::new(0.0, alpha / kf);
            p[(2, 3)] = C64::new(0.0, -beta / (2.0 * kf));
            p[(3, 2)] = C64::new(0.0, beta / (2.0 * kf));
        }
    }
    Ok(p)
}

/// Size of the block outside of which `C*P + PC = 2I` and `P = I`.
pub fn nontrivial_block(ansatz: PkAnsatz) -> usize {
    match ansatz {
        PkAnsatz::ExactTwoByTwo { .. } => 2,
        PkAnsatz::TwoBlock { .. } => 3,
        PkAnsatz::FourBlock { .. } => 5,
    }
}

/// Largest entrywise deviation of `C*P + PC` from `2I` outside the top-left
/// `block × block` corner, coupling entries included.
pub fn block_structure_defect(c: &CMatrix, p: &CMatrix, block: usize) -> f64 {
    let d = crate::lyapunov::dissipation_matrix(c, p);
    let n = d.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i < block && j < block {
                continue;
            }
            let target = if i == j { 2.0 } else { 0.0 };
            worst = worst.max((d[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// The per-mode `α_k` of the hand proof: the smaller root of
/// `3α² − (6 + 1/k²)α + 2 = 0`; equals 1/3 at `k = 1`.
pub fn per_mode_alpha(k: f64) -> f64 {
    let b = 3.0 + 0.5 / (k * k);
    (b - (b * b - 6.0).sqrt()) / 3.0
}

/// Closed-form leading principal minors of `C*P + PC − 2μP` on its
/// nontrivial block, for real `k ≥ 1` (`k = ∞` gives the limit).
///
/// Supported pairs: linear model with [`PkAnsatz::TwoBlock`] (three minors)
/// and linearized model with [`PkAnsatz::FourBlock`] (five minors).
pub fn minors(model: ModelKind, ansatz: PkAnsatz, mu: f64, k: f64) -> Result<Vec<f64>> {
    let s2 = 2.0_f64.sqrt();
    let s3 = 3.0_f64.sqrt();
    let w = 1.0 - 2.0 * mu;
    match (model, ansatz) {
        (ModelKind::ContinuousLinear, PkAnsatz::TwoBlock { alpha: a }) => {
            let d00 = 2.0 * a - 2.0 * mu;
            let d01sq = (a * w / k).powi(2);
            let d11 = 2.0 - 2.0 * a - 2.0 * mu;
            let d22 = 2.0 - 2.0 * mu;
            let d2 = d00 * d11 - d01sq;
            let d3 = d22 * d2 - 2.0 * a * a * d11;
            Ok(vec![d00, d2, d3])
        }
        (ModelKind::ContinuousLinearized, PkAnsatz::FourBlock { alpha: a, beta: b }) => {
            let d00 = 2.0 * a - 2.0 * mu;
            let d01sq = (a * w / k).powi(2);
            let d02 = s2 * a;
            let d11 = 2.0 - 2.0 * a - 2.0 * mu;
            let d13 = -b / s2;
            let d22 = s3 * b - 2.0 * mu;
            let d23sq = (b * w / (2.0 * k)).powi(2);
            let d24 = b;
            let d33 = 2.0 - s3 * b - 2.0 * mu;
            let d44 = 2.0 - 2.0 * mu;
            let d2 = d00 * d11 - d01sq;
            let d3 = d22 * d2 - d02 * d02 * d11;
            let cross = (a * b * w / k).powi(2);
            let d4 = d33 * d3 - (d13 * d13 * (d00 * d22 - d02 * d02) + d23sq * d2 - cross);
            let d5 = d44 * d4 - d24 * d24 * (d00 * (d11 * d33 - d13 * d13) - d01sq * d33);
            Ok(vec![d00, d2, d3, d4, d5])
        }
        _ => Err(Error::InvalidParameter(format!("no closed-form minors for {model:?} with {ansatz:?}"))),
    }
}

/// Leading principal minors of a Hermitian matrix by LU determinants.
pub fn leading_minors(a: &CMatrix, count: usize) -> Vec<f64> {
    (1..=count.min(a.nrows())).map(|m| a.view((0, 0), (m, m)).into_owned().determinant().re).collect()
}

/// The quintic factor of `δ5(α, α, k)/α²` at `μ = 0`.
pub fn p5(alpha: f64, k: f64) -> f64 {
    let s3 = 3.0_f64.sqrt();
    let q = 1.0 / (k * k);
    16.0 * (s3 - 1.0) - (8.0 * s3 + 16.0 + (2.0 + 4.0 * s3) * q) * alpha
        + (34.0 - 6.0 * s3 + (24.0 / q + 1.0) * q * q / 2.0) * alpha * alpha
        - (4.0 * s3 - 1.0 + s3 * q) * alpha.powi(3)
}

/// How `P_k` is chosen across modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnsatzFamily {
    /// The same ansatz for every `k`.
    Fixed(PkAnsatz),
    /// `TwoBlock(α_k)` with [`per_mode_alpha`].
    PerModeTwoBlock,
    /// `TwoBlock(α)` with `α` maximizing the uniform rate.
    OptimizedTwoBlock,
    /// `FourBlock(α, β)` with `(α, β)` maximizing the uniform rate.
    OptimizedFourBlock,
    /// `P_k` from the eigenvectors of `C_k*`.
    Eigenvector,
}

/// Outcome of [`certify_uniform_rate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifiedRate {
    /// `C_k*P_k + P_kC_k ⪰ 2μP_k` for all certified modes.
    pub mu: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Mode with the smallest per-mode rate.
    pub worst_k: i64,
    /// Closed-form minors at `worst_k` and `μ` (empty without a closed form).
    pub minors: Vec<f64>,
    /// Least eigenvalue of `C*P + PC − 2μP` at `worst_k`.
    pub margin: f64,
    /// `inf_k λ_min(P_k)` over the certified modes.
    pub p_min: f64,
    /// `sup_k λ_max(P_k)` over the certified modes.
    pub p_max: f64,
    /// `√(p_max / p_min)`.
    pub envelope: f64,
    /// Every `|k| > k_max` is covered as well.
    pub tail_certified: bool,
}

fn family_ansatz(family: AnsatzFamily, k: i64, alpha: Option<f64>, beta: Option<f64>) -> Option<PkAnsatz> {
    match family {
        AnsatzFamily::Fixed(a) => Some(a),
        AnsatzFamily::PerModeTwoBlock => Some(PkAnsatz::TwoBlock { alpha: per_mode_alpha(k as f64) }),
        AnsatzFamily::OptimizedTwoBlock => Some(PkAnsatz::TwoBlock { alpha: alpha? }),
        AnsatzFamily::OptimizedFourBlock => Some(PkAnsatz::FourBlock { alpha: alpha?, beta: beta? }),
        AnsatzFamily::Eigenvector => None,
    }
}

struct ModeRate {
    k: i64,
    mu: f64,
    p_min: f64,
    p_max: f64,
}

fn mode_p(op: &ModeOperator, ansatz: Option<PkAnsatz>) -> Result<CMatrix> {
    match ansatz {
        Some(a) => build_pk(op.k, a, op.truncation),
        None => Ok(construct_p(&op.matrix, None)?.p),
    }
}

fn mode_rate(model: ModelKind, k: i64, dim: usize, ansatz: Option<PkAnsatz>) -> Result<ModeRate> {
    let op = build_mode_operator(model, k, dim, 1.0)?;
    let p = mode_p(&op, ansatz)?;
    let ev = hermitian_eigenvalues(&p);
    Ok(ModeRate { k, mu: max_certified_rate(&op.matrix, &p)?, p_min: ev[0], p_max: ev[ev.len() - 1] })
}

fn uniform_rate(model: ModelKind, k_max: usize, dim: usize, ansatz: impl Fn(i64) -> Option<PkAnsatz> + Sync) -> Result<Vec<ModeRate>> {
    (1..=k_max as i64).into_par_iter().map(|k| mode_rate(model, k, dim, ansatz(k))).collect()
}

fn min_rate(rates: &[ModeRate]) -> f64 {
    rates.iter().map(|r| r.mu).fold(f64::INFINITY, f64::min)
}

/// Maximizes a function of one variable on `[a, b]` by a grid scan of
/// `grid` points followed by golden-section refinement around the best one.
fn scan_golden(f: impl Fn(f64) -> f64, a: f64, b: f64, grid: usize, tol: f64) -> (f64, f64) {
    let h = (b - a) / (grid - 1) as f64;
    let (mut best_x, mut best_f) = (a, f(a));
    for i in 1..grid {
        let x = a + i as f64 * h;
        let fx = f(x);
        if fx > best_f {
            best_x = x;
            best_f = fx;
        }
    }
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut lo, mut hi) = ((best_x - h).max(a), (best_x + h).min(b));
    while hi - lo > tol {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if f(c) > f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    if fx > best_f {
        (x, fx)
    } else {
        (best_x, best_f)
    }
}

/// Optimal `α` for `TwoBlock` on the linear model and its uniform rate over
/// `1 ≤ k ≤ k_max`. The search runs on the nontrivial block only.
pub fn optimize_two_block(k_max: usize) -> Result<(f64, f64)> {
    let model = ModelKind::ContinuousLinear;
    let f = |alpha: f64| {
        uniform_rate(model, k_max, MIN_TRUNCATION, |_| Some(PkAnsatz::TwoBlock { alpha }))
            .map(|r| min_rate(&r))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (alpha, mu) = scan_golden(f, ALPHA_BRACKET.0, ALPHA_BRACKET.1, ALPHA_GRID, ALPHA_TOL);
    Ok((alpha, mu))
}

/// Optimal `(α, β)` for `FourBlock` on the linearized model by Nelder–Mead
/// from `(1/3, 1/3)`, and the uniform rate over `1 ≤ k ≤ k_max`.
pub fn optimize_four_block(k_max: usize) -> Result<(f64, f64, f64)> {
    let model = ModelKind::ContinuousLinearized;
    let f = |x: &[f64]| {
        let (alpha, beta) = (x[0], x[1]);
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return f64::INFINITY;
        }
        uniform_rate(model, k_max, MIN_TRUNCATION + 1, |_| Some(PkAnsatz::FourBlock { alpha, beta }))
            .map(|r| -min_rate(&r))
            .unwrap_or(f64::INFINITY)
    };
    let (neg, x) = nelder_mead(&f, &[1.0 / 3.0, 1.0 / 3.0], 0.05, 400);
    Ok((x[0], x[1], -neg))
}

/// Tail check for `|k| > k_max`: closed-form minors at rate `μ` are positive
/// for `k ∈ {k_max, …, 10·k_max}` and in the limit, and the last minor is
/// monotone in `k` over the samples.
fn tail_by_minors(model: ModelKind, ansatz: impl Fn(f64) -> PkAnsatz, mu: f64, k_max: usize) -> bool {
    let stride = (9 * k_max / 200).max(1);
    let mut ks: Vec<f64> = (k_max..=10 * k_max).step_by(stride).map(|k| k as f64).collect();
    ks.push(f64::INFINITY);
    let mut last: Vec<f64> = Vec::with_capacity(ks.len());
    for &k in &ks {
        match minors(model, ansatz(k), mu, k) {
            Ok(m) if m.iter().all(|&d| d > -MARGIN_TOL) => last.push(*m.last().unwrap()),
            _ => return false,
        }
    }
    let up = last.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let down = last.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    up || down
}

/// Largest `μ` such that `C_k*P_k + P_kC_k ⪰ 2μP_k` for all
/// `1 ≤ |k| ≤ k_max` at truncation `dim` (temperature 1).
///
/// Optimizing families search on the nontrivial block and then verify at
/// `dim`. `tail_certified` reports whether `|k| > k_max` is covered too.
pub fn certify_uniform_rate(model: ModelKind, family: AnsatzFamily, k_max: usize, dim: usize) -> Result<CertifiedRate> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    if model.is_continuous() && dim < MIN_TRUNCATION {
        return Err(Error::InvalidParameter(format!("truncation {dim} below the minimum {MIN_TRUNCATION}")));
    }
    let (alpha, beta) = match family {
        AnsatzFamily::OptimizedTwoBlock => (Some(optimize_two_block(k_max)?.0), None),
        AnsatzFamily::OptimizedFourBlock => {
            let (a, b, _) = optimize_four_block(k_max)?;
            (Some(a), Some(b))
        }
        AnsatzFamily::Fixed(PkAnsatz::TwoBlock { alpha }) => (Some(alpha), None),
        AnsatzFamily::Fixed(PkAnsatz::FourBlock { alpha, beta }) => (Some(alpha), Some(beta)),
        _ => (None, None),
    };
    let rates = uniform_rate(model, k_max, dim, |k| family_ansatz(family, k, alpha, beta))?;
    let worst = rates.iter().min_by(|a, b| a.mu.total_cmp(&b.mu)).expect("k_max ≥ 1");
    let mu = worst.mu;
    let p_min = rates.iter().map(|r| r.p_min).fold(f64::INFINITY, f64::min);
    let p_max = rates.iter().map(|r| r.p_max).fold(0.0, f64::max);
    let worst_ansatz = family_ansatz(family, worst.k, alpha, beta);
    let op = build_mode_operator(model, worst.k, dim, 1.0)?;
    let p = mode_p(&op, worst_ansatz)?;
    let margin = verify_inequality(&op.matrix, &p, mu)?;
    let minors_at = worst_ansatz.and_then(|a| minors(model, a, mu, worst.k as f64).ok()).unwrap_or_default();
    if !(mu > 0.0) {
        return Err(Error::Certification { k: worst.k, margin, minors: minors_at });
    }
    let tail_certified = match (model, family) {
        (ModelKind::TwoVelocity { sigma }, AnsatzFamily::Fixed(PkAnsatz::ExactTwoByTwo { .. })) => {
            // Every mode with |k|σ > 1/2 decays at exactly 1/2 in its own P_k.
            k_max as f64 * sigma > 0.5 && mu <= 0.5 + MARGIN_TOL
        }
        (ModelKind::ContinuousLinear, AnsatzFamily::PerModeTwoBlock) => {
            tail_by_minors(model, |k| PkAnsatz::TwoBlock { alpha: per_mode_alpha(k) }, mu, k_max)
        }
        (ModelKind::ContinuousLinear | ModelKind::ContinuousLinearized, _) => match worst_ansatz {
            Some(a) if !matches!(a, PkAnsatz::ExactTwoByTwo { .. }) => tail_by_minors(model, |_| a, mu, k_max),
            _ => false,
        },
        _ => false,
    };
    Ok(CertifiedRate {
        mu,
        alpha: alpha.or(match worst_ansatz {
            Some(PkAnsatz::TwoBlock { alpha }) => Some(alpha),
            _ => None,
        }),
        beta,
        worst_k: worst.k,
        minors: minors_at,
        margin,
        p_min,
        p_max,
        envelope: (p_max / p_min).sqrt(),
        tail_certified,
    })
}

/// Least margin of `C_k*P_k + P_kC_k − 2μP_k` over `1 ≤ k ≤ k_max` and the
/// mode where it occurs.
pub fn uniform_margin(model: ModelKind, family: AnsatzFamily, mu: f64, k_max: usize, dim: usize) -> Result<(i64, f64)> {
    let (alpha, beta) = match family {
        AnsatzFamily::Fixed(PkAnsatz::TwoBlock { alpha }) => (Some(alpha), None),
        AnsatzFamily::Fixed(PkAnsatz::FourBlock { alpha, beta }) => (Some(alpha), Some(beta)),
        _ => (None, None),
    };
    let margins: Vec<(i64, f64)> = (1..=k_max as i64)
        .into_par_iter()
        .map(|k| {
            let op = build_mode_operator(model, k, dim, 1.0)?;
            let p = mode_p(&op, family_ansatz(family, k, alpha, beta))?;
            Ok((k, verify_inequality(&op.matrix, &p, mu)?))
        })
        .collect::<Result<_>>()?;
    Ok(margins.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("k_max ≥ 1"))
}

fn five_velocity_polynomial(lambda: f64, k: f64) -> f64 {
    let k2 = k * k;
    let l1 = lambda + 1.0;
    lambda * l1.powi(4) + k2 * l1 * l1 * (5.0 * lambda + 1.0) + k2 * k2 * (4.0 * lambda + 2.5)
}

/// The real eigenvalue of `−C_k` for the five-velocity model, located by
/// bisection of its characteristic factor on `(−5/8, 0]`.
pub fn discrete_eigen_equation_check(k: f64) -> Result<f64> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("k must be finite and nonzero, got {k}")));
    }
    let (mut lo, mut hi) = (-0.625, 0.0);
    if five_velocity_polynomial(lo, k) * five_velocity_polynomial(hi, k) > 0.0 {
        return Err(Error::Domain(format!("no sign change on (−5/8, 0] at k = {k}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if five_velocity_polynomial(mid, k) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Real eigenvalues (imaginary part below `1e-9`) of the generator `−C_k`.
pub fn real_eigenvalues(op: &ModeOperator) -> Result<Vec<f64>> {
    let values = eigenvalues(&op.generator())?;
    let scale = 1.0 + op.k.unsigned_abs() as f64;
    Ok(values.iter().filter(|z| z.im.abs() < 1e-9 * scale).map(|z| z.re).collect())
}

/// Spectral gaps over a sequence of truncations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapConvergence {
    pub truncations: Vec<usize>,
    pub gaps: Vec<f64>,
    /// Aitken extrapolation of the last three gaps.
    pub extrapolated: Option<f64>,
}

/// Spectral gap of `C_k` at each truncation in `sizes` (increasing).
pub fn truncated_gap_convergence(model: ModelKind, k: i64, sizes: &[usize]) -> Result<GapConvergence> {
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("truncations must increase".into()));
    }
    let gaps: Vec<f64> = sizes
        .par_iter()
        .map(|&n| Ok(spectral_gap(&build_mode_operator(model, k, n, 1.0)?.matrix)?.lambda_star))
        .collect::<Result<_>>()?;
    let extrapolated = match gaps.len() {
        0 => None,
        1 | 2 => gaps.last().copied(),
        n => {
            let (g1, g2, g3) = (gaps[n - 3], gaps[n - 2], gaps[n - 1]);
            let denom = (g3 - g2) - (g2 - g1);
            if denom.abs() < 1e-14 {
                Some(g3)
            } else {
                Some(g3 - (g3 - g2).powi(2) / denom)
            }
        }
    };
    Ok(GapConvergence { truncations: sizes.to_vec(), gaps, extrapolated })
}

/// `inf` over `1 ≤ k ≤ k_max` of the spectral gap at truncation `dim`, with
/// the mode attaining it.
pub fn inf_gap_over_modes(model: ModelKind, k_max: usize, dim: usize) -> Result<(f64, i64)> {
    let gaps: Vec<(f64, i64)> = (1..=k_max as i64)
        .into_par_iter()
        .map(|k| Ok((spectral_gap(&build_mode_operator(model, k, dim, 1.0)?.matrix)?.lambda_star, k)))
        .collect::<Result<_>>()?;
    Ok(gaps.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("k_max ≥ 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::dissipation_matrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn two_velocity_matrix_is_exact() {
        let op = build_mode_operator(ModelKind::TwoVelocity { sigma: 0.7 }, 3, 0, 1.0).unwrap();
        let ks = 3.0 * 0.7;
        assert_eq!(op.matrix[(0, 0)], c(0.0, 0.0));
        assert_eq!(op.matrix[(0, 1)], c(0.0, ks));
        assert_eq!(op.matrix[(1, 0)], c(0.0, ks));
        assert_eq!(op.matrix[(1, 1)], c(1.0, 0.0));
        assert_eq!(op.structure_defect(), 0.0);
    }

    #[test]
    fn collision_diagonals() {
        let lin = build_mode_operator(ModelKind::ContinuousLinear, 1, 6, 1.0).unwrap();
        assert_eq!(lin.dissipation.as_slice(), &[0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let lz = build_mode_operator(ModelKind::ContinuousLinearized, -2, 6, 2.0).unwrap();
        assert_eq!(lz.dissipation.as_slice(), &[0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(lz.structure_defect() < 1e-15);
        let pos = build_mode_operator(ModelKind::ContinuousLinearized, 2, 6, 2.0).unwrap();
        assert!((pos.matrix.map(|z| z.conj()) - &lz.matrix).norm() < 1e-15);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(build_mode_operator(ModelKind::ContinuousLinear, 1, 4, 1.0).is_err());
        assert!(build_mode_operator(ModelKind::ContinuousLinear, 0, 10, 1.0).is_err());
        assert!(build_mode_operator(ModelKind::TwoVelocity { sigma: 0.0 }, 1, 2, 1.0).is_err());
        assert!(build_mode_operator(ModelKind::ContinuousLinear, 1, 10, -1.0).is_err());
    }

    #[test]
    fn two_velocity_closed_form_spectrum() {
        let s = two_velocity_eigenvalues(1.0, 1).unwrap();
        let r3 = 3.0_f64.sqrt() / 2.0;
        assert!((s.values[0] - c(-0.5, r3)).norm() < 1e-15);
        assert!((s.values[1] - c(-0.5, -r3)).norm() < 1e-15);
        let s = two_velocity_eigenvalues(0.4, 1).unwrap();
        assert!((s.values[0] - c(-0.2, 0.0)).norm() < 1e-15);
        assert!((s.values[1] - c(-0.8, 0.0)).norm() < 1e-15);
        assert!(two_velocity_eigenvalues(0.5, 1).unwrap().defective);
        assert!((two_velocity_rate(1.0) - 0.5).abs() < 1e-15);
        assert!((two_velocity_rate(0.4) - 0.2).abs() < 1e-15);
        for (sigma, k) in [(1.0, 1), (0.4, 1), (0.3, 2), (0.1, 7)] {
            let op = build_mode_operator(ModelKind::TwoVelocity { sigma }, k, 2, 1.0).unwrap();
            let mut dense = eigenvalues(&op.generator()).unwrap();
            let mut closed = two_velocity_eigenvalues(sigma, k).unwrap().values.to_vec();
            let key = |z: &C64| (z.re * 1e6).round() as i64 * 1_000_000 + (z.im * 1e6).round() as i64;
            dense.sort_by_key(key);
            closed.sort_by_key(key);
            for (a, b) in dense.iter().zip(&closed) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_two_by_two_is_sharp() {
        for (sigma, k) in [(1.0, 1), (0.4, 1), (0.4, 2), (0.1, 3), (0.1, 40)] {
            let op = build_mode_operator(ModelKind::TwoVelocity { sigma }, k, 2, 1.0).unwrap();
            let p = build_pk(k, PkAnsatz::ExactTwoByTwo { sigma }, 2).unwrap();
            let gap = spectral_gap(&op.matrix).unwrap().lambda_star;
            let mu = max_certified_rate(&op.matrix, &p).unwrap();
            assert!((mu - gap).abs() < 1e-10, "sigma {sigma}, k {k}: {mu} vs {gap}");
        }
        let high = build_pk(2, PkAnsatz::ExactTwoByTwo { sigma: 1.0 }, 2).unwrap();
        assert!((high.trace().re - 2.0).abs() < 1e-15);
        assert!(matches!(build_pk(1, PkAnsatz::ExactTwoByTwo { sigma: 0.5 }, 2), Err(Error::Defective { .. })));
    }

    #[test]
    fn ansatz_eigenvalues() {
        let p = build_pk(1, PkAnsatz::FourBlock { alpha: 1.0 / 3.0, beta: 1.0 / 3.0 }, 8).unwrap();
        let ev = hermitian_eigenvalues(&p);
        let want = [2.0 / 3.0, 5.0 / 6.0, 1.0, 1.0, 1.0, 1.0, 7.0 / 6.0, 4.0 / 3.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        for k in [1, 2, 5] {
            let alpha = 0.45;
            let ev = hermitian_eigenvalues(&build_pk(k, PkAnsatz::TwoBlock { alpha }, 5).unwrap());
            let kf = k as f64;
            assert!((ev[0] - (kf - alpha) / kf).abs() < 1e-12);
            assert!((ev[4] - (kf + alpha) / kf).abs() < 1e-12);
        }
        let far = build_pk(100_000, PkAnsatz::TwoBlock { alpha: 0.5 }, 5).unwrap();
        assert!((far - CMatrix::identity(5, 5)).norm() < 1e-5);
        assert!(build_pk(1, PkAnsatz::TwoBlock { alpha: 1.0 }, 5).is_err());
        assert!(build_pk(1, PkAnsatz::FourBlock { alpha: 0.5, beta: 1.2 }, 5).is_err());
    }

    #[test]
    fn structural_blocks_are_exact() {
        for n in [5, 20, 100] {
            for k in [1, 3, -7] {
                let op = build_mode_operator(ModelKind::ContinuousLinear, k, n, 1.0).unwrap();
                let ansatz = PkAnsatz::TwoBlock { alpha: 0.4684 };
                let p = build_pk(k, ansatz, n).unwrap();
                assert!(block_structure_defect(&op.matrix, &p, 3) < 1e-14);
                let op = build_mode_operator(ModelKind::ContinuousLinearized, k, n, 1.0).unwrap();
                let ansatz = PkAnsatz::FourBlock { alpha: 1.0 / 3.0, beta: 0.3 };
                let p = build_pk(k, ansatz, n).unwrap();
                assert!(block_structure_defect(&op.matrix, &p, 5) < 1e-14);
            }
        }
    }

    #[test]
    fn closed_minors_match_determinants() {
        let cases = [
            (ModelKind::ContinuousLinear, PkAnsatz::TwoBlock { alpha: 0.3 }, 0.1, 1),
            (ModelKind::ContinuousLinear, PkAnsatz::TwoBlock { alpha: 0.6 }, 0.25, 4),
            (ModelKind::ContinuousLinearized, PkAnsatz::FourBlock { alpha: 0.3, beta: 0.2 }, 0.02, 1),
            (ModelKind::ContinuousLinearized, PkAnsatz::FourBlock { alpha: 0.7, beta: 0.9 }, 0.3, 3),
        ];
        for (model, ansatz, mu, k) in cases {
            let op = build_mode_operator(model, k, 8, 1.0).unwrap();
            let p = build_pk(k, ansatz, 8).unwrap();
            let d = dissipation_matrix(&op.matrix, &p) - &p * c(2.0 * mu, 0.0);
            let closed = minors(model, ansatz, mu, k as f64).unwrap();
            let direct = leading_minors(&d, closed.len());
            for (a, b) in closed.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-10, "{model:?} {ansatz:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn hand_proof_values() {
        assert!((per_mode_alpha(1.0) - 1.0 / 3.0).abs() < 1e-15);
        let m = minors(ModelKind::ContinuousLinear, PkAnsatz::TwoBlock { alpha: 1.0 / 3.0 }, 0.0, 1.0).unwrap();
        assert!((m[2] - 34.0 / 27.0).abs() < 1e-14);
        assert!((m[2] / 4.0 - 17.0 / 54.0).abs() < 1e-14);
        // δ3(α, 1)/α at μ = 0 vanishes at (7 − √17)/4.
        let root = (7.0 - 17.0_f64.sqrt()) / 4.0;
        let m = minors(ModelKind::ContinuousLinear, PkAnsatz::TwoBlock { alpha: root }, 0.0, 1.0).unwrap();
        assert!(m[2].abs() < 1e-13);
        // μ = 0 forms of the hand proof.
        for (alpha, k) in [(0.2, 1.0), (0.5, 2.0), (0.33, 7.0)] {
            let m = minors(ModelKind::ContinuousLinear, PkAnsatz::TwoBlock { alpha }, 0.0, k).unwrap();
            assert!((m[1] - alpha * (4.0 - (4.0 + 1.0 / (k * k)) * alpha)).abs() < 1e-13);
            let d3 = 4.0 * alpha * ((alpha - 2.0) * (alpha - 1.0) - alpha / (2.0 * k * k));
            assert!((m[2] - d3).abs() < 1e-13);
        }
    }

    #[test]
    fn quintic_factor() {
        for k in 1..=50 {
            let kf = k as f64;
            for i in 0..=20 {
                let alpha = i as f64 / 60.0;
                if alpha > 0.0 {
                    let ansatz = PkAnsatz::FourBlock { alpha, beta: alpha };
                    let d5 = minors(ModelKind::ContinuousLinearized, ansatz, 0.0, kf).unwrap()[4];
                    assert!((d5 - alpha * alpha * p5(alpha, kf)).abs() < 1e-12);
                }
                assert!(p5(alpha, kf) >= p5(alpha, 1.0) - 1e-12);
            }
            let third = 1.0 / 3.0;
            let ansatz = PkAnsatz::FourBlock { alpha: third, beta: third };
            let d5 = minors(ModelKind::ContinuousLinearized, ansatz, 0.0, kf).unwrap()[4];
            assert!(d5 >= 2.5 * third * third);
        }
    }

    #[test]
    fn five_velocity_real_eigenvalue() {
        let root = discrete_eigen_equation_check(1.0).unwrap();
        assert!((root + 0.526948302245121).abs() < 1e-12);
        let op = build_mode_operator(ModelKind::DiscreteVelocity { n: 4 }, 1, 0, 1.0).unwrap();
        let real = real_eigenvalues(&op).unwrap();
        assert_eq!(real.len(), 1);
        assert!((real[0] - root).abs() < 1e-10);
        let mut prev = 0.0;
        for k in 1..=50 {
            let r = discrete_eigen_equation_check(k as f64).unwrap();
            assert!(r > -0.625 && r <= 0.0 && r < prev);
            prev = r;
        }
    }

    #[test]
    fn two_velocity_certificate() {
        let fam = AnsatzFamily::Fixed(PkAnsatz::ExactTwoByTwo { sigma: 1.0 });
        let cert = certify_uniform_rate(ModelKind::TwoVelocity { sigma: 1.0 }, fam, 10, 2).unwrap();
        assert!((cert.mu - 0.5).abs() < 1e-10);
        assert!(cert.tail_certified);
        let fam = AnsatzFamily::Fixed(PkAnsatz::ExactTwoByTwo { sigma: 0.4 });
        let cert = certify_uniform_rate(ModelKind::TwoVelocity { sigma: 0.4 }, fam, 10, 2).unwrap();
        assert!((cert.mu - 0.2).abs() < 1e-10);
        assert_eq!(cert.worst_k, 1);
    }

    #[test]
    fn per_mode_family_certificate() {
        let cert = certify_uniform_rate(ModelKind::ContinuousLinear, AnsatzFamily::PerModeTwoBlock, 20, 12).unwrap();
        assert!(cert.mu >= 17.0 / 216.0);
        assert!(cert.margin >= -MARGIN_TOL);
        assert!(cert.tail_certified);
        let (_, margin) =
            uniform_margin(ModelKind::ContinuousLinear, AnsatzFamily::PerModeTwoBlock, 17.0 / 216.0, 20, 12).unwrap();
        assert!(margin >= -MARGIN_TOL);
    }

    #[test]
    fn four_block_certificate() {
        let third = 1.0 / 3.0;
        let fam = AnsatzFamily::Fixed(PkAnsatz::FourBlock { alpha: third, beta: third });
        let cert = certify_uniform_rate(ModelKind::ContinuousLinearized, fam, 20, 10).unwrap();
        assert!(cert.mu >= 0.0206);
        assert_eq!(cert.worst_k, 1);
        assert!(cert.tail_certified);
        assert!(cert.p_min >= 2.0 / 3.0 - 1e-12 && cert.p_max <= 4.0 / 3.0 + 1e-12);
    }

    #[test]
    fn eigenvector_family_on_discrete_model() {
        let cert = certify_uniform_rate(ModelKind::DiscreteVelocity { n: 4 }, AnsatzFamily::Eigenvector, 5, 0).unwrap();
        let (gap, _) = inf_gap_over_modes(ModelKind::DiscreteVelocity { n: 4 }, 5, 0).unwrap();
        assert!((cert.mu - gap).abs() < 1e-8);
        assert!(!cert.tail_certified);
    }

    #[test]
    fn gap_convergence_extrapolates() {
        let conv = truncated_gap_convergence(ModelKind::ContinuousLinear, 1, &[5, 40, 80, 160]).unwrap();
        assert_eq!(conv.gaps.len(), 4);
        assert!((conv.gaps[0] - conv.gaps[3]).abs() > 1e-3);
        assert!(conv.extrapolated.unwrap() > 0.0);
        assert!(truncated_gap_convergence(ModelKind::ContinuousLinear, 1, &[40, 20]).is_err());
    }
}
