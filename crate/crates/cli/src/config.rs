//! Run configuration: defaults, a `key = value` file format with a JSON
//! mirror, and command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    TwoVelocity,
    /// Discrete-velocity model with `velocities + 1` states.
    Discrete,
    ContinuousLinear,
    ContinuousLinearized,
    Nonlinear,
    FourState,
    /// Homogeneous BGK system on the weights `rho`.
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ansatz {
    Exact,
    TwoBlock,
    FourBlock,
    /// Two-block with a mode-dependent `α_k`.
    PerMode,
    Eigenvector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Entropy {
    Log,
    Power,
    AbsPower,
    Quadratic,
}

/// Every parameter of a run. Unset optional fields take command-specific
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub model: Option<Model>,
    pub ansatz: Option<Ansatz>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub optimize: bool,
    pub sigma: f64,
    pub velocities: usize,
    pub temperature: f64,
    pub kmax: Option<usize>,
    pub nhermite: Option<usize>,
    /// Restricts `spectrum` to one mode.
    pub k: Option<i64>,
    /// Truncations for `spectrum`.
    pub sizes: Vec<usize>,
    pub gamma: f64,
    pub dt: Option<f64>,
    pub tmax: Option<f64>,
    pub sample: f64,
    pub seed: u64,
    pub eps: Option<f64>,
    pub tail_threshold: f64,
    pub lambda: f64,
    pub rho: Vec<f64>,
    pub entropy: Entropy,
    pub p: f64,
    pub f0: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            model: None,
            ansatz: None,
            alpha: None,
            beta: None,
            optimize: false,
            sigma: 1.0,
            velocities: 4,
            temperature: 1.0,
            kmax: None,
            nhermite: None,
            k: None,
            sizes: Vec::new(),
            gamma: 0.0,
            dt: None,
            tmax: None,
            sample: 0.1,
            seed: 0,
            eps: None,
            tail_threshold: hypobgk::simulator::DEFAULT_TAIL_THRESHOLD,
            lambda: 1.0,
            rho: vec![0.5, 0.5],
            entropy: Entropy::Power,
            p: 2.0,
            f0: Vec::new(),
            out: None,
        }
    }
}

const LIST_KEYS: [&str; 3] = ["sizes", "rho", "f0"];
const STRING_KEYS: [&str; 5] = ["command", "model", "ansatz", "entropy", "out"];

/// Flags shared by every command. Set flags override the config file.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Flags {
    /// Config file, `key = value` lines or a JSON object (`.json`)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long, value_enum)]
    pub ansatz: Option<Ansatz>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Search the ansatz parameters for the best uniform rate
    #[arg(long)]
    pub optimize: bool,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Velocities of the discrete model
    #[arg(long)]
    pub velocities: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Largest Fourier mode
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Hermite truncation
    #[arg(long)]
    pub nhermite: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<i64>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Time between trace rows
    #[arg(long)]
    pub sample: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Size of the random initial perturbation
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tail_threshold: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub entropy: Option<Entropy>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f0: Option<Vec<f64>>,
    /// Directory receiving manifest.json, config.txt and the data table
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Map<String, Value> {
        let Value::Object(mut map) = serde_json::to_value(self).expect("flags serialize") else {
            unreachable!("flags serialize to an object")
        };
        map.retain(|k, v| !v.is_null() && !(k == "optimize" && *v == Value::Bool(false)));
        map
    }
}

fn scalar(key: &str, raw: &str) -> Result<Value, CliError> {
    if STRING_KEYS.contains(&key) {
        return Ok(Value::String(raw.to_string()));
    }
    if LIST_KEYS.contains(&key) {
        let items = raw.split(',').map(str::trim).filter(|s| !s.is_empty());
        return items.map(|s| scalar("", s)).collect::<Result<Vec<_>, _>>().map(Value::Array);
    }
    serde_json::from_str(raw).map_err(|_| CliError::Usage(format!("cannot parse value {raw:?} for {key}")))
}

/// Parses `key = value` lines; `#` starts a comment and list values are
/// comma separated.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>, CliError> {
    let mut map = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("line {}: expected key = value", i + 1)))?;
        let key = key.trim();
        map.insert(key.to_string(), scalar(key, raw.trim())?);
    }
    Ok(map)
}

fn read_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        match serde_json::from_str(&text) {
            Ok(Value::Object(map)) => Ok(map),
            Ok(_) => Err(CliError::Usage("JSON config must be an object".into())),
            Err(e) => Err(CliError::Usage(format!("invalid JSON config: {e}"))),
        }
    } else {
        parse_key_values(&text)
    }
}

impl RunConfig {
    /// Defaults, then the config file named by `--config`, then flags.
    pub fn resolve(command: &str, flags: &Flags) -> Result<Self, CliError> {
        let mut layers = Vec::new();
        if let Some(path) = &flags.config {
            layers.push(read_file(path)?);
        }
        layers.push(flags.overrides());
        let mut cfg = Self::from_layers(layers)?;
        cfg.command = command.to_string();
        Ok(cfg)
    }

    pub fn from_layers(layers: impl IntoIterator<Item = Map<String, Value>>) -> Result<Self, CliError> {
        let Value::Object(mut base) = serde_json::to_value(Self::default()).expect("config serializes") else {
            unreachable!("config serializes to an object")
        };
        for layer in layers {
            base.extend(layer);
        }
        serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// The config in the `key = value` format read by [`parse_key_values`].
    pub fn to_key_values(&self) -> String {
        let Value::Object(map) = serde_json::to_value(self).expect("config serializes") else {
            unreachable!("config serializes to an object")
        };
        let mut text = String::new();
        for (key, value) in map {
            let raw = match value {
                Value::Null => continue,
                Value::String(s) => s,
                Value::Array(items) => items.iter().map(Value::to_string).collect::<Vec<_>>().join(","),
                other => other.to_string(),
            };
            text.push_str(&format!("{key} = {raw}\n"));
        }
        text
    }

    /// SHA-256 of the canonical JSON form, ignoring the output path.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&Self { out: None, ..self.clone() }).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            command: "simulate".into(),
            model: Some(Model::Nonlinear),
            alpha: Some(0.1 + 0.2),
            sizes: vec![400],
            rho: vec![0.3, 0.7],
            f0: vec![-1.5e-7, 2.0],
            eps: Some(1e-3),
            seed: u64::MAX,
            out: Some("runs/a b".into()),
            ..RunConfig::default()
        }
    }

    #[test]
    fn key_values_round_trip() {
        let cfg = sample();
        let back = RunConfig::from_layers([parse_key_values(&cfg.to_key_values()).unwrap()]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn json_round_trip() {
        let cfg = sample();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn later_layers_win() {
        let file = parse_key_values("model = continuous-linear\nkmax = 8 # comment\n").unwrap();
        let flags = Flags { kmax: Some(16), ..Flags::default() };
        let cfg = RunConfig::from_layers([file, flags.overrides()]).unwrap();
        assert_eq!(cfg.model, Some(Model::ContinuousLinear));
        assert_eq!(cfg.kmax, Some(16));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(RunConfig::from_layers([parse_key_values("kmx = 3").unwrap()]).is_err());
        assert!(parse_key_values("kmax 3").is_err());
        assert!(parse_key_values("kmax = three").is_err());
    }

    #[test]
    fn hash_ignores_output_path() {
        let a = sample();
        let b = RunConfig { out: None, ..sample() };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), RunConfig { seed: 1, ..sample() }.hash());
    }
}
