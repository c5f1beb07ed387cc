//! Entropy generators, relative entropies, Fisher information and the
//! admissibility constant that controls entropy decay of homogeneous BGK
//! systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::rate::fit_decay_rate;
use crate::{Error, Result};

/// Convex generator `ψ` with `ψ(1) = 0`, `ψ ≥ 0`, `ψ″ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EntropyGenerator {
    /// `σ ln σ − σ + 1` on `ℝ⁺`.
    Log,
    /// `σᵖ − 1 − p(σ − 1)` on `ℝ⁺`, `p > 1`.
    Power(f64),
    /// `|σ − 1|ᵖ` on `ℝ⁺`, `p > 1`.
    AbsPower(f64),
    /// `(σ − 1)²` on `ℝ`.
    Quadratic,
}

/// Admissible domain of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    PositiveReals,
    Reals,
}

impl EntropyGenerator {
    pub fn power(p: f64) -> Result<Self> {
        if p > 1.0 && p.is_finite() {
            Ok(Self::Power(p))
        } else {
            Err(Error::InvalidParameter(format!("power exponent {p} must exceed 1")))
        }
    }

    pub fn abs_power(p: f64) -> Result<Self> {
        if p > 1.0 && p.is_finite() {
            Ok(Self::AbsPower(p))
        } else {
            Err(Error::InvalidParameter(format!("power exponent {p} must exceed 1")))
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Self::Quadratic => Domain::Reals,
            _ => Domain::PositiveReals,
        }
    }

    fn check_closure(&self, s: f64) -> Result<()> {
        if !s.is_finite() || (self.domain() == Domain::PositiveReals && s < 0.0) {
            return Err(Error::Domain(format!("ratio {s} outside the closure of the generator domain")));
        }
        Ok(())
    }

    fn check_interior(&self, s: f64) -> Result<()> {
        self.check_closure(s)?;
        if self.domain() == Domain::PositiveReals && s == 0.0 {
            return Err(Error::Domain("derivative undefined at the domain boundary 0".into()));
        }
        Ok(())
    }

    /// `ψ(σ)`, continuous up to the boundary of `J`.
    pub fn psi(&self, s: f64) -> Result<f64> {
        self.check_closure(s)?;
        Ok(match *self {
            Self::Log => {
                if s == 0.0 {
                    1.0
                } else {
                    s * s.ln() - s + 1.0
                }
            }
            Self::Power(p) => s.powf(p) - 1.0 - p * (s - 1.0),
            Self::AbsPower(p) => (s - 1.0).abs().powf(p),
            Self::Quadratic => (s - 1.0) * (s - 1.0),
        })
    }

    /// `ψ′(σ)`. For `Log` the boundary `σ = 0` is a domain error.
    pub fn dpsi(&self, s: f64) -> Result<f64> {
        match *self {
            Self::Log => {
                self.check_interior(s)?;
                Ok(s.ln())
            }
            Self::Power(p) => {
                self.check_closure(s)?;
                Ok(p * (s.powf(p - 1.0) - 1.0))
            }
            Self::AbsPower(p) => {
                self.check_closure(s)?;
                let d = s - 1.0;
                Ok(if d == 0.0 { 0.0 } else { p * d.abs().powf(p - 1.0) * d.signum() })
            }
            Self::Quadratic => {
                self.check_closure(s)?;
                Ok(2.0 * (s - 1.0))
            }
        }
    }

    /// `ψ″(σ)`, defined on the interior of `J` (and wherever it stays finite).
    pub fn d2psi(&self, s: f64) -> Result<f64> {
        match *self {
            Self::Log => {
                self.check_interior(s)?;
                Ok(1.0 / s)
            }
            Self::Power(p) => {
                if p < 2.0 {
                    self.check_interior(s)?;
                } else {
                    self.check_closure(s)?;
                }
                Ok(p * (p - 1.0) * s.powf(p - 2.0))
            }
            Self::AbsPower(p) => {
                self.check_closure(s)?;
                let d = (s - 1.0).abs();
                if p < 2.0 && d == 0.0 {
                    return Err(Error::Domain("second derivative unbounded at 1".into()));
                }
                Ok(p * (p - 1.0) * d.powf(p - 2.0))
            }
            Self::Quadratic => {
                self.check_closure(s)?;
                Ok(2.0)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Log => "log".into(),
            Self::Power(p) => format!("power({p})"),
            Self::AbsPower(p) => format!("abs-power({p})"),
            Self::Quadratic => "quadratic".into(),
        }
    }
}

fn check_pair(f: &[f64], f_inf: &[f64]) -> Result<()> {
    if f.len() != f_inf.len() {
        return Err(Error::DimensionMismatch { expected: f_inf.len(), got: f.len() });
    }
    if let Some(x) = f_inf.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("reference state entry {x} is not positive")));
    }
    Ok(())
}

/// `Σ_j ψ(f_j/f∞_j) f∞_j`.
pub fn relative_entropy(f: &[f64], f_inf: &[f64], gen: EntropyGenerator) -> Result<f64> {
    check_pair(f, f_inf)?;
    f.iter().zip(f_inf).map(|(&a, &b)| Ok(gen.psi(a / b)? * b)).sum()
}

/// Fisher information `−d/dt e_ψ` along `df/dt = G f`:
/// `−Σ_j ψ′(f_j/f∞_j)(G f)_j`.
pub fn fisher_information(
    f: &[f64],
    f_inf: &[f64],
    gen: EntropyGenerator,
    generator_matrix: &DMatrix<f64>,
) -> Result<f64> {
    check_pair(f, f_inf)?;
    let n = f.len();
    if generator_matrix.nrows() != n || generator_matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: generator_matrix.nrows() });
    }
    let mut sum = 0.0;
    for j in 0..n {
        let s = f[j] / f_inf[j];
        let flux: f64 = (0..n).map(|l| generator_matrix[(j, l)] * f[l]).sum();
        if flux != 0.0 {
            sum -= gen.dpsi(s)? * flux;
        }
    }
    Ok(sum)
}

/// `2 e_1(f1|f2) − ‖f1 − f2‖₁²` for `p = 1`, and
/// `(2/(p−1)) e_p(f1|f2) − ‖f1 − f2‖₁²` for `p > 1`.
///
/// Nonnegative by the Csiszár–Kullback inequality together with
/// `ψ_1 ≤ ψ_p/(p−1)` on `[0, ∞)`. The sharper-looking constant
/// `ψ_p″(1) = p(p−1)` does not work near `σ = 0`: `ψ_1(0) = 1` while
/// `ψ_p(0)/(p(p−1)) = 1/p`.
pub fn csiszar_kullback_gap(f1: &[f64], f2: &[f64], p: f64) -> Result<f64> {
    check_pair(f1, f2)?;
    for v in [f1, f2] {
        let mass: f64 = v.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("input has mass {mass}, expected 1")));
        }
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent {p} must be at least 1")));
    }
    let l1: f64 = f1.iter().zip(f2).map(|(a, b)| (a - b).abs()).sum();
    let upper = if p == 1.0 {
        2.0 * relative_entropy(f1, f2, EntropyGenerator::Log)?
    } else {
        2.0 / (p - 1.0) * relative_entropy(f1, f2, EntropyGenerator::Power(p))?
    };
    Ok(upper - l1 * l1)
}

/// `Σ |f1 − f2|ᵖ f2^{1−p}`, the weighted `Lᵖ` norm that equals `ê_p(f1|f2)`.
pub fn weighted_lp_distance(f1: &[f64], f2: &[f64], p: f64) -> Result<f64> {
    check_pair(f1, f2)?;
    Ok(f1.iter().zip(f2).map(|(a, b)| (a - b).abs().powf(p) * b.powf(1.0 - p)).sum())
}

/// `(ψ″(σ₁)+ψ″(σ₂))/2 − κ (ψ′(σ₂)−ψ′(σ₁))/(σ₂−σ₁)`; nonnegative iff the
/// two-point convexity condition holds at `(σ₁, σ₂)`.
pub fn two_point_condition(gen: EntropyGenerator, s1: f64, s2: f64, kappa: f64) -> Result<f64> {
    let avg = 0.5 * (gen.d2psi(s1)? + gen.d2psi(s2)?);
    let slope = if s1 == s2 { gen.d2psi(s1)? } else { (gen.dpsi(s2)? - gen.dpsi(s1)?) / (s2 - s1) };
    Ok(avg - kappa * slope)
}

/// Entropy and Fisher information sampled along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub fisher: Vec<f64>,
}

impl EntropyTrace {
    /// Fitted exponential decay rate of the entropy.
    pub fn fitted_rate(&self) -> Option<f64> {
        fit_decay_rate(&self.times, &self.entropy)
    }

    /// Whether the entropy never increases by more than `tol`.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.entropy.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Grid resolution per coordinate for two-state minimization.
pub const SIMPLEX_GRID_2: usize = 2001;
/// Excluded radius around the reference state.
pub const EXCLUSION_RADIUS: f64 = 1e-6;
const NM_STARTS: usize = 50;
const LATTICE_BUDGET: usize = 200_000;

fn check_probability(rho: &[f64]) -> Result<()> {
    if rho.len() < 2 {
        return Err(Error::InvalidParameter("need at least two states".into()));
    }
    if rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::InvalidParameter("weights must lie in (0,1)".into()));
    }
    let s: f64 = rho.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

/// Ratio of the two sides of the admissibility inequality at `u`:
/// `Σψ″(u/ρ)(ρ−u)²/ρ / Σψ′(u/ρ)(u−ρ)`. `None` where undefined.
pub fn admissibility_ratio(u: &[f64], rho: &[f64], gen: EntropyGenerator) -> Option<f64> {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (&uj, &rj) in u.iter().zip(rho) {
        let s = uj / rj;
        let d = uj - rj;
        if d == 0.0 {
            continue;
        }
        lhs += gen.d2psi(s).ok()? * d * d / rj;
        rhs += gen.dpsi(s).ok()? * d;
    }
    if rhs > 0.0 && lhs.is_finite() {
        Some(lhs / rhs)
    } else {
        None
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Largest `μ/(2λ) ∈ [0, 1]` for which the admissibility inequality holds on
/// the probability simplex, by minimizing [`admissibility_ratio`].
pub fn admissibility_mu(rho: &[f64], gen: EntropyGenerator) -> Result<f64> {
    check_probability(rho)?;
    let best = if rho.len() == 2 { minimize_two_state(rho, gen) } else { minimize_simplex(rho, gen) };
    Ok(best.clamp(0.0, 1.0))
}

fn minimize_two_state(rho: &[f64], gen: EntropyGenerator) -> f64 {
    let ratio = |s: f64| {
        let u = [s, 1.0 - s];
        if distance(&u, rho) < EXCLUSION_RADIUS {
            None
        } else {
            admissibility_ratio(&u, rho, gen)
        }
    };
    let h = 1.0 / (SIMPLEX_GRID_2 - 1) as f64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..SIMPLEX_GRID_2 {
        let s = i as f64 * h;
        if let Some(r) = ratio(s) {
            if r < best.0 {
                best = (r, s);
            }
        }
    }
    // Golden-section refinement on each neighboring grid cell.
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for (lo, hi) in [(best.1 - h, best.1), (best.1, best.1 + h)] {
        let (mut a, mut b) = (lo.max(0.0), hi.min(1.0));
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            let fc = ratio(c).unwrap_or(f64::INFINITY);
            let fd = ratio(d).unwrap_or(f64::INFINITY);
            if fc < fd {
                b = d;
            } else {
                a = c;
            }
        }
        if let Some(r) = ratio(0.5 * (a + b)) {
            best.0 = best.0.min(r);
        }
    }
    best.0
}

fn lattice_points(n: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let used: usize = prefix.iter().sum();
    if prefix.len() == n - 1 {
        let mut p = prefix.clone();
        p.push(m - used);
        out.push(p);
        return;
    }
    for i in 0..=(m - used) {
        prefix.push(i);
        lattice_points(n, m, prefix, out);
        prefix.pop();
    }
}

fn lattice_size(n: usize, m: usize) -> f64 {
    // C(m + n − 1, n − 1)
    (0..n - 1).fold(1.0, |acc, i| acc * (m + n - 1 - i) as f64 / (i + 1) as f64)
}

fn minimize_simplex(rho: &[f64], gen: EntropyGenerator) -> f64 {
    let n = rho.len();
    let mut m = 2;
    while lattice_size(n, m + 1) <= LATTICE_BUDGET as f64 {
        m += 1;
    }
    let mut pts = Vec::new();
    lattice_points(n, m, &mut Vec::new(), &mut pts);
    let objective = |u: &[f64]| -> f64 {
        if u.iter().any(|&x| x < 0.0) || distance(u, rho) < EXCLUSION_RADIUS {
            return f64::INFINITY;
        }
        admissibility_ratio(u, rho, gen).unwrap_or(f64::INFINITY)
    };
    let mut scored: Vec<(f64, Vec<f64>)> = pts
        .into_iter()
        .map(|p| {
            let u: Vec<f64> = p.iter().map(|&i| i as f64 / m as f64).collect();
            (objective(&u), u)
        })
        .filter(|(r, _)| r.is_finite())
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored.first().map(|s| s.0).unwrap_or(f64::INFINITY);
    let reduced = |y: &[f64]| -> f64 {
        let mut u = y.to_vec();
        u.push(1.0 - y.iter().sum::<f64>());
        objective(&u)
    };
    for (_, u) in scored.iter().take(NM_STARTS) {
        let start = &u[..n - 1];
        let (val, _) = nelder_mead(&reduced, start, 0.5 / m as f64, 2000);
        best = best.min(val);
    }
    best
}

/// Nelder–Mead minimization from `x0` with initial simplex edge `step`.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize) -> (f64, Vec<f64>) {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..max_iter {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[d] - vals[0]).abs() < 1e-14 && vals[0].is_finite() {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|x| x[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (simplex[d][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let xc = if fr < vals[d] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    simplex[i] = (0..d).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let i = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    (vals[i], simplex[i].clone())
}

/// Closed-form admissibility constant of `ψ_4` on two states.
pub fn quartic_two_state_mu(rho2: f64) -> f64 {
    2.0 - 2.0 * (1.0 - 3.0 * rho2 * (1.0 - rho2)).sqrt()
}
