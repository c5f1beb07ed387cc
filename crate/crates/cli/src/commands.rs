use hypobgk::discrete_models::DiscreteBGKSystem;
use hypobgk::entropy::EntropyGenerator;
use hypobgk::linalg::to_complex;
use hypobgk::lyapunov::{spectral_gap, MARGIN_TOL};
use hypobgk::mode_operators::{
    build_mode_operator, certify_uniform_rate, discrete_eigen_equation_check, real_eigenvalues, AnsatzFamily,
    CertifiedRate, ModelKind, PkAnsatz, CERTIFY_TRUNCATION,
};
use hypobgk::simulator::{
    simulate, SimModel, SimulationConfig, SpectralState, DEFAULT_DT, DEFAULT_K, DEFAULT_ORDER, NONLINEAR_RATE,
    OPTIMAL_TWO_BLOCK_ALPHA,
};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Ansatz, Entropy, Model, RunConfig};
use crate::CliError;

/// Fitted rates may fall short of the certified rate by this much.
pub const RATE_SLACK: f64 = 1e-3;
/// Time step of the exact linear propagators.
pub const LINEAR_DT: f64 = 0.01;

/// A CSV table written next to the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Self { name, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

/// What a command produced and whether its check passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    pub table: Option<Table>,
    pub passed: bool,
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn mode_model(cfg: &RunConfig, model: Model) -> Result<ModelKind, CliError> {
    match model {
        Model::TwoVelocity => Ok(ModelKind::TwoVelocity { sigma: cfg.sigma }),
        Model::Discrete => Ok(ModelKind::DiscreteVelocity { n: cfg.velocities }),
        Model::ContinuousLinear => Ok(ModelKind::ContinuousLinear),
        Model::ContinuousLinearized => Ok(ModelKind::ContinuousLinearized),
        m => Err(usage(format!("model {m:?} has no mode operators"))),
    }
}

fn family(cfg: &RunConfig, model: Model) -> Result<AnsatzFamily, CliError> {
    let ansatz = cfg.ansatz.unwrap_or(match model {
        Model::TwoVelocity => Ansatz::Exact,
        Model::ContinuousLinear => Ansatz::TwoBlock,
        Model::ContinuousLinearized => Ansatz::FourBlock,
        _ => Ansatz::Eigenvector,
    });
    let fam = match (ansatz, cfg.optimize) {
        (Ansatz::Exact, _) if model == Model::TwoVelocity => AnsatzFamily::Fixed(PkAnsatz::ExactTwoByTwo { sigma: cfg.sigma }),
        (Ansatz::TwoBlock, true) if model == Model::ContinuousLinear => AnsatzFamily::OptimizedTwoBlock,
        (Ansatz::FourBlock, true) if model == Model::ContinuousLinearized => AnsatzFamily::OptimizedFourBlock,
        (Ansatz::TwoBlock, false) => {
            AnsatzFamily::Fixed(PkAnsatz::TwoBlock { alpha: cfg.alpha.unwrap_or(OPTIMAL_TWO_BLOCK_ALPHA) })
        }
        (Ansatz::FourBlock, false) => AnsatzFamily::Fixed(PkAnsatz::FourBlock {
            alpha: cfg.alpha.unwrap_or(1.0 / 3.0),
            beta: cfg.beta.unwrap_or(1.0 / 3.0),
        }),
        (Ansatz::PerMode, false) => AnsatzFamily::PerModeTwoBlock,
        (Ansatz::Eigenvector, false) => AnsatzFamily::Eigenvector,
        (a, opt) => {
            let how = if opt { "optimized " } else { "" };
            return Err(usage(format!("{how}{a:?} ansatz is not available for {model:?}")));
        }
    };
    let continuous = matches!(model, Model::ContinuousLinear | Model::ContinuousLinearized);
    if !continuous && matches!(fam, AnsatzFamily::Fixed(PkAnsatz::TwoBlock { .. } | PkAnsatz::FourBlock { .. }) | AnsatzFamily::PerModeTwoBlock) {
        return Err(usage(format!("{ansatz:?} ansatz needs a continuous model")));
    }
    Ok(fam)
}

fn certificate(cfg: &RunConfig) -> Result<CertifiedRate, CliError> {
    let model = cfg.model.unwrap_or(Model::ContinuousLinear);
    let kind = mode_model(cfg, model)?;
    let fam = family(cfg, model)?;
    let dim = match kind {
        ModelKind::TwoVelocity { .. } => 2,
        ModelKind::DiscreteVelocity { n } => n + 1,
        _ => cfg.nhermite.unwrap_or(CERTIFY_TRUNCATION),
    };
    Ok(certify_uniform_rate(kind, fam, cfg.kmax.unwrap_or(100), dim)?)
}

fn certificate_json(c: &CertifiedRate) -> Value {
    json!({
        "mu": c.mu,
        "two_mu": 2.0 * c.mu,
        "alpha": c.alpha,
        "beta": c.beta,
        "worst_k": c.worst_k,
        "margin": c.margin,
        "p_min": c.p_min,
        "p_max": c.p_max,
        "envelope_c": c.envelope,
        "minors": c.minors,
        "tail_certified": c.tail_certified,
    })
}

pub fn certify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let c = certificate(cfg)?;
    Ok(Outcome { result: certificate_json(&c), table: None, passed: c.margin >= -MARGIN_TOL })
}

/// Aitken extrapolation of the last three entries.
fn aitken(g: &[f64]) -> Option<f64> {
    let [g1, g2, g3] = g.get(g.len().checked_sub(3)?..)? else { return None };
    let denom = (g3 - g2) - (g2 - g1);
    Some(if denom.abs() < 1e-14 { *g3 } else { g3 - (g3 - g2).powi(2) / denom })
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = cfg.model.unwrap_or(Model::ContinuousLinear);
    let mut table = Table::new("spectrum.csv", &["k", "N", "gap", "real_eigenvalue"]);
    let finite = match model {
        Model::FourState => Some(DiscreteBGKSystem::four_state()),
        Model::Homogeneous => Some(DiscreteBGKSystem::homogeneous(&cfg.rho, cfg.lambda)?),
        _ => None,
    };
    if let Some(sys) = finite {
        let c = -to_complex(&sys.generator);
        let gap = spectral_gap(&c)?;
        table.rows.push(vec![String::new(), sys.dimension().to_string(), gap.lambda_star.to_string(), String::new()]);
        let result = json!({ "inf_gap": gap.lambda_star, "defective": gap.defective });
        return Ok(Outcome { result, table: Some(table), passed: true });
    }
    let kind = mode_model(cfg, model)?;
    let sizes = match kind {
        ModelKind::TwoVelocity { .. } => vec![2],
        ModelKind::DiscreteVelocity { n } => vec![n + 1],
        _ if cfg.sizes.is_empty() => vec![cfg.nhermite.unwrap_or(100)],
        _ => cfg.sizes.clone(),
    };
    let ks: Vec<i64> = match cfg.k {
        Some(k) => vec![k],
        None => (1..=cfg.kmax.unwrap_or(20) as i64).collect(),
    };
    let pairs: Vec<(i64, usize)> = sizes.iter().flat_map(|&n| ks.iter().map(move |&k| (k, n))).collect();
    let rows: Vec<(i64, usize, f64, Option<f64>)> = pairs
        .par_iter()
        .map(|&(k, n)| {
            let op = build_mode_operator(kind, k, n, cfg.temperature)?;
            let gap = spectral_gap(&op.matrix)?.lambda_star;
            let real = real_eigenvalues(&op)?.into_iter().filter(|x| x.abs() > 1e-9).reduce(f64::max);
            Ok((k, n, gap, real))
        })
        .collect::<hypobgk::Result<_>>()?;
    let inf_by_size: Vec<(f64, i64)> = sizes
        .iter()
        .map(|&n| {
            rows.iter()
                .filter(|r| r.1 == n)
                .map(|r| (r.2, r.0))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("at least one mode")
        })
        .collect();
    for (k, n, gap, real) in &rows {
        table.rows.push(vec![k.to_string(), n.to_string(), gap.to_string(), cell(*real)]);
    }
    let (inf_gap, worst_k) = *inf_by_size.last().expect("at least one size");
    let mut result = Map::new();
    result.insert("inf_gap".into(), json!(inf_gap));
    result.insert("worst_k".into(), json!(worst_k));
    result.insert("gaps_by_size".into(), json!(sizes.iter().zip(&inf_by_size).map(|(n, g)| json!({ "N": n, "gap": g.0 })).collect::<Vec<_>>()));
    let gaps: Vec<f64> = inf_by_size.iter().map(|g| g.0).collect();
    if let Some(x) = aitken(&gaps) {
        result.insert("extrapolated_gap".into(), json!(x));
    }
    if kind == (ModelKind::DiscreteVelocity { n: 4 }) {
        let k = cfg.k.unwrap_or(1) as f64;
        result.insert("eigen_equation_root".into(), json!(discrete_eigen_equation_check(k)?));
    }
    Ok(Outcome { result: Value::Object(result), table: Some(table), passed: true })
}

pub fn run_simulation(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = match cfg.model.unwrap_or(Model::ContinuousLinear) {
        Model::ContinuousLinear => SimModel::Linear,
        Model::ContinuousLinearized => SimModel::Linearized,
        Model::Nonlinear => SimModel::Nonlinear,
        m => return Err(usage(format!("cannot simulate model {m:?}"))),
    };
    let eps = match (model, cfg.eps) {
        (_, Some(e)) => e,
        (SimModel::Nonlinear, None) => return Err(usage("nonlinear runs need a perturbation scale (--eps)")),
        _ => 1.0,
    };
    let ansatz = match cfg.ansatz {
        None => match model.default_ansatz() {
            PkAnsatz::TwoBlock { alpha } => PkAnsatz::TwoBlock { alpha: cfg.alpha.unwrap_or(alpha) },
            PkAnsatz::FourBlock { alpha, beta } => {
                PkAnsatz::FourBlock { alpha: cfg.alpha.unwrap_or(alpha), beta: cfg.beta.unwrap_or(beta) }
            }
            a => a,
        },
        Some(Ansatz::TwoBlock) => PkAnsatz::TwoBlock { alpha: cfg.alpha.unwrap_or(OPTIMAL_TWO_BLOCK_ALPHA) },
        Some(Ansatz::FourBlock) => {
            PkAnsatz::FourBlock { alpha: cfg.alpha.unwrap_or(1.0 / 3.0), beta: cfg.beta.unwrap_or(1.0 / 3.0) }
        }
        Some(a) => return Err(usage(format!("{a:?} ansatz has no entropy functional"))),
    };
    let sim = SimulationConfig {
        k_max: cfg.kmax.unwrap_or(DEFAULT_K),
        order: cfg.nhermite.unwrap_or(DEFAULT_ORDER),
        temperature: cfg.temperature,
        dt: cfg.dt.unwrap_or(if model == SimModel::Nonlinear { DEFAULT_DT } else { LINEAR_DT }),
        t_max: cfg.tmax.unwrap_or(30.0),
        sample_interval: cfg.sample,
        gamma: cfg.gamma,
        ansatz,
        tail_threshold: cfg.tail_threshold,
        ..SimulationConfig::new(model)
    };
    if !(sim.dt > 0.0 && sim.t_max > 0.0 && sim.sample_interval > 0.0) {
        return Err(usage("dt, tmax and sample must be positive"));
    }
    let certified = match model {
        SimModel::Nonlinear => NONLINEAR_RATE,
        m => 2.0 * certify_uniform_rate(m.mode_model(), AnsatzFamily::Fixed(ansatz), sim.k_max, sim.order + 1)?.mu,
    };
    let initial = SpectralState::random(sim.k_max, sim.order, sim.temperature, cfg.seed, eps, sim.gamma)?;
    let rep = simulate(sim, initial)?;
    let decay = rep.decay_holds(certified);
    let fitted = rep.rate_e_gamma;
    let passed = fitted.is_some_and(|r| r >= certified - RATE_SLACK) && (model != SimModel::Nonlinear || decay);
    let mut table = Table::new("trace.csv", &["t", "e", "e_gamma", "l2_norm", "sigma0", "tau0"]);
    for r in &rep.trace {
        table.rows.push([r.t, r.e, r.e_gamma, r.l2_norm, r.sigma0, r.tau0].iter().map(f64::to_string).collect());
    }
    let result = json!({
        "fitted_rate": fitted,
        "fitted_rate_e": rep.rate_e,
        "certified_rate": certified,
        "decay_bound_holds": decay,
        "monotone": rep.is_monotone(),
        "max_mass_drift": rep.max_mass_drift,
        "max_energy_drift": rep.max_energy_drift,
        "max_tail_fraction": rep.max_tail_fraction,
        "final_time": rep.final_state.time,
    });
    Ok(Outcome { result, table: Some(table), passed })
}

pub fn entropy_trace(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sys = match cfg.model.unwrap_or(Model::Homogeneous) {
        Model::Homogeneous => DiscreteBGKSystem::homogeneous(&cfg.rho, cfg.lambda)?,
        Model::FourState => DiscreteBGKSystem::four_state(),
        m => return Err(usage(format!("entropy traces need a finite model, got {m:?}"))),
    };
    let gen = match cfg.entropy {
        Entropy::Log => EntropyGenerator::Log,
        Entropy::Power => EntropyGenerator::power(cfg.p)?,
        Entropy::AbsPower => EntropyGenerator::abs_power(cfg.p)?,
        Entropy::Quadratic => EntropyGenerator::Quadratic,
    };
    let n = sys.dimension();
    let f0 = if cfg.f0.is_empty() {
        DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 })
    } else {
        DVector::from_column_slice(&cfg.f0)
    };
    let (tmax, dt) = (cfg.tmax.unwrap_or(10.0), cfg.sample);
    if !(tmax > 0.0 && dt > 0.0) {
        return Err(usage("tmax and sample must be positive"));
    }
    let steps = (tmax / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let trace = sys.entropy_decay_trace(&f0, gen, &times)?;
    let mut table = Table::new("entropy.csv", &["t", "entropy", "fisher"]);
    for ((t, e), f) in times.iter().zip(&trace.entropy).zip(&trace.fisher) {
        table.rows.push(vec![t.to_string(), e.to_string(), f.to_string()]);
    }
    let result = json!({
        "generator": gen.name(),
        "fitted_rate": trace.fitted_rate(),
        "nonincreasing": trace.is_nonincreasing(1e-14),
        "initial_entropy": trace.entropy[0],
    });
    Ok(Outcome { result, table: Some(table), passed: true })
}

const SWEEP_KEYS: [&str; 6] = ["alpha", "beta", "sigma", "kmax", "nhermite", "velocities"];

fn parse_axis(spec: &str) -> Result<(String, Vec<Value>), CliError> {
    let (name, values) = spec.split_once('=').ok_or_else(|| usage(format!("grid axis {spec:?} must read name=v1,v2,…")))?;
    let name = name.trim();
    if !SWEEP_KEYS.contains(&name) {
        return Err(usage(format!("cannot sweep {name:?}; choose one of {}", SWEEP_KEYS.join(", "))));
    }
    let values = values
        .split(',')
        .map(|v| serde_json::from_str(v.trim()).map_err(|_| usage(format!("bad grid value {v:?} for {name}"))))
        .collect::<Result<Vec<Value>, _>>()?;
    if values.is_empty() {
        return Err(usage(format!("grid axis {name} is empty")));
    }
    Ok((name.to_string(), values))
}

/// Certification over the Cartesian product of the grid axes.
pub fn sweep(cfg: &RunConfig, grid: &[String]) -> Result<Outcome, CliError> {
    let axes = grid.iter().map(|s| parse_axis(s)).collect::<Result<Vec<_>, _>>()?;
    let mut points: Vec<Map<String, Value>> = vec![Map::new()];
    for (name, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(name.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    let mut header: Vec<&str> = axes.iter().map(|(n, _)| n.as_str()).collect();
    header.extend(["mu", "two_mu", "margin", "worst_k", "status"]);
    let mut table = Table::new("sweep.csv", &header);
    let base = serde_json::to_value(cfg).expect("config serializes");
    let Value::Object(base) = base else { unreachable!("config serializes to an object") };
    let mut best: Option<(f64, Map<String, Value>)> = None;
    let mut failures = 0;
    for point in points {
        let mut row: Vec<String> = axes.iter().map(|(n, _)| point[n].to_string()).collect();
        let at = RunConfig::from_layers([base.clone(), point.clone()])?;
        match certificate(&at) {
            Ok(c) => {
                let ok = c.margin >= -MARGIN_TOL;
                failures += usize::from(!ok);
                row.extend([c.mu.to_string(), (2.0 * c.mu).to_string(), c.margin.to_string(), c.worst_k.to_string()]);
                row.push(if ok { "ok".into() } else { "fail".into() });
                if ok && best.as_ref().is_none_or(|b| c.mu > b.0) {
                    best = Some((c.mu, point));
                }
            }
            Err(CliError::Usage(msg)) => return Err(CliError::Usage(msg)),
            Err(e) => {
                failures += 1;
                row.extend([String::new(), String::new(), String::new(), String::new()]);
                row.push(format!("error: {e}"));
            }
        }
        table.rows.push(row);
    }
    let result = json!({
        "points": table.rows.len(),
        "failures": failures,
        "best_mu": best.as_ref().map(|b| b.0),
        "best_point": best.map(|b| Value::Object(b.1)),
    });
    Ok(Outcome { result, table: Some(table), passed: failures == 0 })
}
