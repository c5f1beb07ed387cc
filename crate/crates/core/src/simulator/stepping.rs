use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::maxwellian::{maxwellian_coefficients, remainder_coefficients};
use super::state::SpectralState;
use crate::basis::velocity_matrix;
use crate::linalg::{to_complex, Expm};
use crate::mode_operators::{build_mode_operator, ModelKind};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Exact per-mode propagators `exp(−C_k dt)`, `k = 0..=K`, for the linear
/// and linearized models. Negative modes use the complex conjugate.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    pub model: ModelKind,
    pub dt: f64,
    modes: Vec<CMatrix>,
}

impl LinearPropagator {
    pub fn new(model: ModelKind, k_max: usize, order: usize, temperature: f64, dt: f64) -> Result<Self> {
        if !matches!(model, ModelKind::ContinuousLinear | ModelKind::ContinuousLinearized) {
            return Err(Error::InvalidParameter(format!("{model:?} is not a continuous model")));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let dim = order + 1;
        let zero = CMatrix::from_diagonal(&CVector::from_iterator(
            dim,
            model.collision_diagonal(dim).into_iter().map(|d| C64::new((-d * dt).exp(), 0.0)),
        ));
        let rest: Vec<CMatrix> = (1..=k_max as i64)
            .into_par_iter()
            .map(|k| {
                let op = build_mode_operator(model, k, dim, temperature)?;
                Ok(Expm::new(&op.generator())?.at(dt))
            })
            .collect::<Result<_>>()?;
        let mut modes = vec![zero];
        modes.extend(rest);
        Ok(Self { model, dt, modes })
    }

    pub fn step(&self, state: &mut SpectralState) {
        let updated: Vec<CVector> = (0..self.modes.len()).into_par_iter().map(|k| &self.modes[k] * state.mode(k as i64)).collect();
        for (k, v) in updated.iter().enumerate() {
            state.set_mode(k as i64, v);
        }
        state.time += self.dt;
    }
}

/// One exact step of the linear or linearized model.
pub fn step_linear(state: &SpectralState, dt: f64, model: ModelKind) -> Result<SpectralState> {
    let prop = LinearPropagator::new(model, state.k_max(), state.order(), state.temperature, dt)?;
    let mut next = state.clone();
    prop.step(&mut next);
    Ok(next)
}

/// Linearized gain `(σ_k, 0, (τ_k/T − σ_k)/√2, 0, …)` from the moments.
pub fn gain_from_moments(sigma: C64, tau: C64, temperature: f64, order: usize) -> CVector {
    let mut g = CVector::zeros(order + 1);
    g[0] = sigma;
    g[2] = (tau / temperature - sigma) / 2.0_f64.sqrt();
    g
}

/// Linearized gain of every mode of `state`, same layout as its coefficients.
pub fn gain_linearized(state: &SpectralState) -> CMatrix {
    let m = state.moments();
    let mut out = CMatrix::zeros(state.coeffs.nrows(), state.coeffs.ncols());
    for (row, (&s, &t)) in m.sigma.iter().zip(&m.tau).enumerate() {
        let g = gain_from_moments(s, t, state.temperature, state.order());
        out.set_row(row, &g.transpose());
    }
    out
}

/// Transforms between Fourier coefficients and `2K + 2` equispaced nodes
/// on the torus.
pub struct SpectralGrid {
    k_max: usize,
    nodes: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralGrid {
    pub fn new(k_max: usize) -> Self {
        let nodes = 2 * k_max + 2;
        let mut planner = FftPlanner::new();
        Self { k_max, nodes, forward: planner.plan_fft_forward(nodes), inverse: planner.plan_fft_inverse(nodes) }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.nodes as i64) as usize
    }

    /// `h_m(x_j)` for every node `j` (outer) and Hermite index `m` (inner).
    pub fn to_grid(&self, state: &SpectralState) -> Vec<Vec<f64>> {
        let cols: Vec<Vec<f64>> = (0..=state.order())
            .into_par_iter()
            .map(|m| {
                let mut buf = vec![C64::new(0.0, 0.0); self.nodes];
                for k in -(self.k_max as i64)..=self.k_max as i64 {
                    buf[self.slot(k)] = state.get(k, m);
                }
                self.inverse.process(&mut buf);
                buf.iter().map(|z| z.re).collect()
            })
            .collect();
        (0..self.nodes).map(|j| cols.iter().map(|c| c[j]).collect()).collect()
    }

    /// Fourier coefficients `|k| ≤ K` of nodal values, written into `state`.
    pub fn from_grid(&self, grid: &[Vec<f64>], state: &mut SpectralState) {
        let order = state.order();
        let scale = 1.0 / self.nodes as f64;
        let cols: Vec<Vec<C64>> = (0..=order)
            .into_par_iter()
            .map(|m| {
                let mut buf: Vec<C64> = grid.iter().map(|row| C64::new(row[m], 0.0)).collect();
                self.forward.process(&mut buf);
                buf.iter().map(|z| z * scale).collect()
            })
            .collect();
        for (m, col) in cols.iter().enumerate() {
            for k in 0..=self.k_max as i64 {
                state.set(k, m, col[self.slot(k)]);
            }
        }
    }
}

/// Strang splitting for the nonlinear model: half-step exact transport,
/// relaxation `h ← g + (h − g)e^{−dt}` toward the local Maxwellian
/// deviation `g`, half-step transport.
pub struct NonlinearStepper {
    pub dt: f64,
    half_transport: Vec<CMatrix>,
    grid: SpectralGrid,
}

impl NonlinearStepper {
    pub fn new(k_max: usize, order: usize, temperature: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let l1 = velocity_matrix(order, temperature);
        let eig = l1.clone().symmetric_eigen();
        let q = to_complex(&eig.eigenvectors);
        let half_transport = (0..=k_max)
            .map(|k| {
                let phases = eig.eigenvalues.map(|lam| C64::new(0.0, -(k as f64) * lam * 0.5 * dt).exp());
                &q * CMatrix::from_diagonal(&phases) * q.transpose()
            })
            .collect();
        Ok(Self { dt, half_transport, grid: SpectralGrid::new(k_max) })
    }

    fn transport(&self, state: &mut SpectralState) {
        let updated: Vec<CVector> =
            (1..self.half_transport.len()).into_par_iter().map(|k| &self.half_transport[k] * state.mode(k as i64)).collect();
        for (i, v) in updated.iter().enumerate() {
            state.set_mode(i as i64 + 1, v);
        }
    }

    fn relax(&self, state: &mut SpectralState) -> Result<()> {
        let t = state.temperature;
        let order = state.order();
        let decay = (-self.dt).exp();
        let mut grid = self.grid.to_grid(state);
        grid.par_iter_mut().try_for_each(|h| -> Result<()> {
            let rho = 1.0 + h[0];
            let pressure = t + t * h[0] + 2.0_f64.sqrt() * t * h[2];
            let mut g = maxwellian_coefficients(rho, pressure, order, t)?;
            g[0] -= 1.0;
            for (hm, gm) in h.iter_mut().zip(&g) {
                *hm = gm + (*hm - gm) * decay;
            }
            Ok(())
        })?;
        self.grid.from_grid(&grid, state);
        Ok(())
    }

    pub fn step(&self, state: &mut SpectralState) -> Result<()> {
        self.transport(state);
        if let Err(e) = self.relax(state) {
            return Err(Error::Blowup { time: state.time, reason: e.to_string() });
        }
        self.transport(state);
        state.time += self.dt;
        Ok(())
    }
}

/// One nonlinear step.
pub fn step_nonlinear(state: &SpectralState, dt: f64) -> Result<SpectralState> {
    let stepper = NonlinearStepper::new(state.k_max(), state.order(), state.temperature, dt)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// `‖M_f − M_T − (linearized gain)‖_{H_γ}`.
pub fn remainder_norm(state: &SpectralState, gamma: f64) -> Result<f64> {
    let t = state.temperature;
    let order = state.order();
    let grid = SpectralGrid::new(state.k_max());
    let nodal = grid.to_grid(state);
    let rem: Vec<Vec<f64>> = nodal
        .iter()
        .map(|h| remainder_coefficients(1.0 + h[0], t + t * h[0] + 2.0_f64.sqrt() * t * h[2], order, t))
        .collect::<Result<_>>()?;
    let mut out = SpectralState::zeros(state.k_max(), order, t)?;
    grid.from_grid(&rem, &mut out);
    Ok(out.norm(gamma))
}
