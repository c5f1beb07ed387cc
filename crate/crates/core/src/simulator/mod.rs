//! Fourier–Hermite time stepping of the linear, linearized and nonlinear
//! BGK equations on the torus, and the entropy functionals tracked along the
//! way.

mod functional;
mod maxwellian;
mod state;
mod stepping;

pub use functional::EntropyFunctional;
pub use maxwellian::{
    local_maxwellian, local_maxwellian_project, maxwellian_coefficients, maxwellian_second_s_derivative,
    remainder_coefficients,
};
pub use state::{sobolev_weight, MomentFields, SpectralState, StateSummary, RNG_ALGORITHM};
pub use stepping::{
    gain_from_moments, gain_linearized, remainder_norm, step_linear, step_nonlinear, LinearPropagator,
    NonlinearStepper, SpectralGrid,
};

use serde::{Deserialize, Serialize};

use crate::mode_operators::{ModelKind, PkAnsatz};
use crate::rate::fit_decay_rate;
use crate::{Error, Result};

pub const DEFAULT_K: usize = 32;
pub const DEFAULT_ORDER: usize = 40;
pub const DEFAULT_DT: f64 = 1e-3;
/// Largest admissible tail norm (see [`SpectralState::tail_norm_squared`])
/// relative to `‖h(0)‖²`.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-2;
/// `α` maximizing the uniform two-block rate of the linear model.
pub const OPTIMAL_TWO_BLOCK_ALPHA: f64 = 0.468434;
/// Decay rate of `e_γ` guaranteed near equilibrium for the nonlinear model.
pub const NONLINEAR_RATE: f64 = 1.0 / 25.0;

/// Which equation is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimModel {
    Linear,
    Linearized,
    Nonlinear,
}

impl SimModel {
    /// Mode operator family of the linear part.
    pub fn mode_model(self) -> ModelKind {
        match self {
            SimModel::Linear => ModelKind::ContinuousLinear,
            _ => ModelKind::ContinuousLinearized,
        }
    }

    /// Ansatz of the entropy functional certified for this model.
    pub fn default_ansatz(self) -> PkAnsatz {
        match self {
            SimModel::Linear => PkAnsatz::TwoBlock { alpha: OPTIMAL_TWO_BLOCK_ALPHA },
            _ => PkAnsatz::FourBlock { alpha: 1.0 / 3.0, beta: 1.0 / 3.0 },
        }
    }
}

/// Resolution, horizon and functional of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: SimModel,
    pub k_max: usize,
    /// Highest Hermite index.
    pub order: usize,
    pub temperature: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Time between trace rows.
    pub sample_interval: f64,
    pub gamma: f64,
    pub ansatz: PkAnsatz,
    pub tail_threshold: f64,
}

impl SimulationConfig {
    pub fn new(model: SimModel) -> Self {
        Self {
            model,
            k_max: DEFAULT_K,
            order: DEFAULT_ORDER,
            temperature: 1.0,
            dt: DEFAULT_DT,
            t_max: 30.0,
            sample_interval: 0.1,
            gamma: 0.0,
            ansatz: model.default_ansatz(),
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }

    fn steps(&self) -> (usize, usize) {
        let total = (self.t_max / self.dt).round() as usize;
        let every = ((self.sample_interval / self.dt).round() as usize).max(1);
        (total, every)
    }
}

/// One sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    /// Entropy functional with `γ = 0`.
    pub e: f64,
    pub e_gamma: f64,
    pub l2_norm: f64,
    pub sigma0: f64,
    pub tau0: f64,
}

/// Trace and diagnostics of a run.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub trace: Vec<TraceRow>,
    pub rate_e: Option<f64>,
    pub rate_e_gamma: Option<f64>,
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
    /// Largest tail norm along the run relative to `‖h(0)‖²`.
    pub max_tail_fraction: f64,
    pub final_state: SpectralState,
}

impl SimulationReport {
    /// `e_γ(t) ≤ e^{−rate·t} e_γ(0)` at every sample.
    pub fn decay_holds(&self, rate: f64) -> bool {
        let e0 = self.trace[0].e_gamma;
        self.trace.iter().all(|r| r.e_gamma <= (-rate * r.t).exp() * e0 * (1.0 + 1e-12))
    }

    /// `e` strictly decreasing while above the round-off floor.
    pub fn is_monotone(&self) -> bool {
        let floor = 1e-20 * self.trace[0].e;
        self.trace.windows(2).all(|w| w[1].e < w[0].e || w[1].e <= floor)
    }
}

fn row(state: &SpectralState, e: &EntropyFunctional, eg: &EntropyFunctional) -> TraceRow {
    TraceRow {
        t: state.time,
        e: e.evaluate(state),
        e_gamma: eg.evaluate(state),
        l2_norm: state.norm(0.0),
        sigma0: state.mass(),
        tau0: state.energy(),
    }
}

enum Stepper {
    Linear(LinearPropagator),
    Nonlinear(NonlinearStepper),
}

/// Integrates from `initial` and samples the entropy functionals.
pub fn simulate(config: SimulationConfig, initial: SpectralState) -> Result<SimulationReport> {
    if initial.k_max() != config.k_max || initial.order() != config.order {
        return Err(Error::DimensionMismatch { expected: config.order, got: initial.order() });
    }
    let e = EntropyFunctional::new(0.0, Some(config.ansatz))?;
    let eg = EntropyFunctional::new(config.gamma, Some(config.ansatz))?;
    let stepper = match config.model {
        SimModel::Nonlinear => Stepper::Nonlinear(NonlinearStepper::new(config.k_max, config.order, config.temperature, config.dt)?),
        m => Stepper::Linear(LinearPropagator::new(m.mode_model(), config.k_max, config.order, config.temperature, config.dt)?),
    };
    let (total, every) = config.steps();
    let mut state = initial;
    let (mass0, energy0) = (state.mass(), state.energy());
    let mut trace = vec![row(&state, &e, &eg)];
    let mut max_mass_drift: f64 = 0.0;
    let mut max_energy_drift: f64 = 0.0;
    let norm0 = state.norm_squared(0.0).max(f64::MIN_POSITIVE);
    let mut max_tail: f64 = state.tail_norm_squared() / norm0;
    for i in 1..=total {
        match &stepper {
            Stepper::Linear(p) => p.step(&mut state),
            Stepper::Nonlinear(s) => s.step(&mut state)?,
        }
        state.time = i as f64 * config.dt;
        if i % every == 0 || i == total {
            trace.push(row(&state, &e, &eg));
            max_mass_drift = max_mass_drift.max((state.mass() - mass0).abs());
            max_energy_drift = max_energy_drift.max((state.energy() - energy0).abs());
            max_tail = max_tail.max(state.tail_norm_squared() / norm0);
        }
    }
    if max_tail > config.tail_threshold {
        return Err(Error::Truncation { time: state.time, fraction: max_tail, threshold: config.tail_threshold });
    }
    let times: Vec<f64> = trace.iter().map(|r| r.t).collect();
    let es: Vec<f64> = trace.iter().map(|r| r.e).collect();
    let egs: Vec<f64> = trace.iter().map(|r| r.e_gamma).collect();
    Ok(SimulationReport {
        config,
        rate_e: fit_decay_rate(&times, &es),
        rate_e_gamma: fit_decay_rate(&times, &egs),
        trace,
        max_mass_drift,
        max_energy_drift,
        max_tail_fraction: max_tail,
        final_state: state,
    })
}

/// `‖R_f‖_{H_γ} / ‖h‖²_{H_γ}`.
pub fn remainder_ratio(state: &SpectralState, gamma: f64) -> Result<f64> {
    Ok(remainder_norm(state, gamma)? / state.norm_squared(gamma))
}

/// Largest `ε` in `scales` for which every one of `samples` random initial
/// data of `H_γ` size `ε` satisfies `e_γ(t) ≤ e^{−t/25} e_γ(0)` over the run.
pub fn measure_delta(config: SimulationConfig, scales: &[f64], samples: u64, seed: u64) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for &eps in scales {
        let mut ok = true;
        for i in 0..samples {
            let init = SpectralState::random(config.k_max, config.order, config.temperature, seed + i, eps, config.gamma)?;
            match simulate(config, init) {
                Ok(rep) if rep.decay_holds(NONLINEAR_RATE) => {}
                Ok(_) | Err(Error::Blowup { .. }) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            best = Some(best.map_or(eps, |b: f64| b.max(eps)));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(model: SimModel) -> SimulationConfig {
        SimulationConfig {
            k_max: 6,
            order: 16,
            dt: 0.05,
            t_max: 10.0,
            sample_interval: 0.1,
            tail_threshold: 1.0,
            ..SimulationConfig::new(model)
        }
    }

    #[test]
    fn linear_run_decays_at_certified_rate() {
        let cfg = small(SimModel::Linear);
        let init = SpectralState::random(6, 16, 1.0, 1, 1.0, 0.0).unwrap();
        let rep = simulate(cfg, init).unwrap();
        assert!(rep.is_monotone());
        assert!(rep.rate_e.unwrap() >= 0.5475);
        assert!(rep.max_mass_drift < 1e-12);
    }

    #[test]
    fn linearized_run_conserves_and_decays() {
        let cfg = SimulationConfig { gamma: 1.0, ..small(SimModel::Linearized) };
        let init = SpectralState::random(6, 16, 1.0, 2, 1.0, 1.0).unwrap();
        let rep = simulate(cfg, init).unwrap();
        assert!(rep.decay_holds(0.0412));
        assert!(rep.max_mass_drift < 1e-12 && rep.max_energy_drift < 1e-12);
    }

    #[test]
    fn truncation_monitor_rejects_rough_data() {
        let cfg = SimulationConfig { tail_threshold: 1e-8, t_max: 0.1, ..small(SimModel::Linear) };
        let init = SpectralState::random(6, 16, 1.0, 3, 1.0, 0.0).unwrap();
        assert!(matches!(simulate(cfg, init), Err(Error::Truncation { .. })));
    }

    #[test]
    fn nonlinear_small_data_decays() {
        let cfg = SimulationConfig { dt: 0.05, t_max: 20.0, ..small(SimModel::Nonlinear) };
        let init = SpectralState::random(6, 16, 1.0, 4, 1e-2, 0.0).unwrap();
        let rep = simulate(cfg, init).unwrap();
        assert!(rep.decay_holds(NONLINEAR_RATE));
        assert!(rep.max_mass_drift < 1e-12);
        assert!(rep.max_energy_drift < 1e-12);
    }
}
