//! Run configuration: flat JSON file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use fclt_core::chain_model::{
    build_birth_death, build_cycle, build_from_rates, build_random_reversible, center, GeneratorModel, Observable,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const DEFAULT_MODEL: &str = "two-state";
pub const DEFAULT_F: &str = "parity";

/// Every key is optional; absent keys fall back to defaults at resolution time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub f: Option<String>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub n: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub exponent: Option<f64>,
    pub c: Option<f64>,
    pub t_points: Option<usize>,
    pub horizon: Option<f64>,
    pub suite_models: Option<usize>,
    pub suite_triples: Option<usize>,
    pub suite_min_m: Option<usize>,
    pub suite_max_m: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: FileConfig) -> Self {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            model, f, seed, replicates, n, out, tol, exponent, c, t_points, horizon, suite_models, suite_triples,
            suite_min_m, suite_max_m
        );
        self
    }
}

/// Fully resolved configuration; this is what the manifest hashes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// `None` means the default builtin for `exact`/`simulate` and unrestricted sizes for `verify`.
    pub model: Option<String>,
    /// `None` defers to the model file's own `f`, then to parity.
    pub f: Option<String>,
    pub seed: u64,
    pub replicates: usize,
    pub n: Vec<u64>,
    #[serde(skip)]
    pub out: PathBuf,
    pub tol: Option<f64>,
    pub exponent: f64,
    pub c: f64,
    pub t_points: usize,
    pub horizon: f64,
    pub suite_models: usize,
    pub suite_triples: usize,
    pub suite_min_m: usize,
    pub suite_max_m: usize,
}

impl RunConfig {
    pub fn resolve(file: FileConfig) -> Result<Self, CliError> {
        let cfg = RunConfig {
            model: file.model,
            f: file.f,
            seed: file.seed.unwrap_or(1),
            replicates: file.replicates.unwrap_or(1000),
            n: file.n.unwrap_or_else(|| vec![100, 1000]),
            out: file.out.unwrap_or_else(|| PathBuf::from("fclt-out")),
            tol: file.tol,
            exponent: file.exponent.unwrap_or(1.5),
            c: file.c.unwrap_or(1.0),
            t_points: file.t_points.unwrap_or(11),
            horizon: file.horizon.unwrap_or(1.0),
            suite_models: file.suite_models.unwrap_or(50),
            suite_triples: file.suite_triples.unwrap_or(20),
            suite_min_m: file.suite_min_m.unwrap_or(2),
            suite_max_m: file.suite_max_m.unwrap_or(50),
        };
        if cfg.n.is_empty() {
            return Err(CliError::Config("n list must not be empty".into()));
        }
        if cfg.replicates == 0 {
            return Err(CliError::Config("replicates must be positive".into()));
        }
        if let Some(tol) = cfg.tol {
            if !tol.is_finite() || tol <= 0.0 {
                return Err(CliError::Config(format!("tol must be a positive number, got {tol}")));
            }
        }
        if !cfg.horizon.is_finite() || cfg.horizon <= 0.0 {
            return Err(CliError::Config(format!("horizon must be positive, got {}", cfg.horizon)));
        }
        if cfg.t_points == 0 {
            return Err(CliError::Config("t_points must be positive".into()));
        }
        if cfg.suite_min_m < 2 || cfg.suite_max_m < cfg.suite_min_m {
            return Err(CliError::Config(format!(
                "suite sizes need 2 <= suite_min_m <= suite_max_m, got {}..{}",
                cfg.suite_min_m, cfg.suite_max_m
            )));
        }
        Ok(cfg)
    }

    pub fn model_spec(&self) -> &str {
        self.model.as_deref().unwrap_or(DEFAULT_MODEL)
    }

    /// `t_points` equally spaced times ending at `horizon`; one point means `[horizon]`.
    pub fn t_grid(&self) -> Vec<f64> {
        let k = self.t_points;
        if k == 1 {
            return vec![self.horizon];
        }
        (0..k).map(|i| self.horizon * i as f64 / (k - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinModel {
    TwoState,
    BirthDeath(usize),
    RandomReversible { m: usize, seed: u64 },
    Cycle(usize),
}

fn call_args<'a>(spec: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let rest = spec.strip_prefix(name)?.trim();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_arg<T: std::str::FromStr>(spec: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Config(format!("model {spec:?}: bad argument {raw:?}")))
}

impl BuiltinModel {
    /// `Ok(None)` when `spec` does not name a builtin.
    pub fn parse(spec: &str) -> Result<Option<Self>, CliError> {
        let spec = spec.trim();
        if spec == "two-state" {
            return Ok(Some(BuiltinModel::TwoState));
        }
        let wrong_arity = |n: usize| CliError::Config(format!("model {spec:?} takes {n} argument(s)"));
        if let Some(args) = call_args(spec, "birth-death") {
            let [m] = args[..] else { return Err(wrong_arity(1)) };
            return Ok(Some(BuiltinModel::BirthDeath(parse_arg(spec, m)?)));
        }
        if let Some(args) = call_args(spec, "random-reversible") {
            let [m, seed] = args[..] else { return Err(wrong_arity(2)) };
            return Ok(Some(BuiltinModel::RandomReversible {
                m: parse_arg(spec, m)?,
                seed: parse_arg(spec, seed)?,
            }));
        }
        if let Some(args) = call_args(spec, "cycle") {
            let [m] = args[..] else { return Err(wrong_arity(1)) };
            return Ok(Some(BuiltinModel::Cycle(parse_arg(spec, m)?)));
        }
        Ok(None)
    }

    pub fn build(&self) -> Result<GeneratorModel, CliError> {
        let model = match *self {
            BuiltinModel::TwoState => build_birth_death(&[1.0], &[1.0]),
            BuiltinModel::BirthDeath(m) => {
                if m < 2 {
                    return Err(CliError::Config("birth-death needs m >= 2".into()));
                }
                build_birth_death(&vec![1.0; m - 1], &vec![1.0; m - 1])
            }
            BuiltinModel::RandomReversible { m, seed } => build_random_reversible(m, 0.5, seed),
            BuiltinModel::Cycle(m) => build_cycle(m),
        };
        model.map_err(|e| CliError::Config(format!("builtin model: {e}")))
    }
}

/// Contents of a model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub states: Option<Vec<String>>,
    pub q: DMatrix<f64>,
    pub f: Option<Vec<f64>>,
}

fn number_row(row: &Value, what: &str, index: usize, width: Option<usize>) -> Result<Vec<f64>, CliError> {
    let items = row
        .as_array()
        .ok_or_else(|| CliError::Config(format!("{what} row {index}: expected an array of numbers")))?;
    if let Some(w) = width {
        if items.len() != w {
            return Err(CliError::Config(format!(
                "{what} row {index}: expected {w} entries, found {}",
                items.len()
            )));
        }
    }
    items
        .iter()
        .enumerate()
        .map(|(j, v)| {
            v.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("{what} row {index}, column {j}: {v} is not a finite number")))
        })
        .collect()
}

fn number_list(value: &Value, what: &str) -> Result<Vec<f64>, CliError> {
    let items = value
        .as_array()
        .ok_or_else(|| CliError::Config(format!("{what}: expected an array of numbers")))?;
    items
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("{what} entry {i}: {v} is not a finite number")))
        })
        .collect()
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read model file {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| CliError::Config("model file must be a JSON object".into()))?;
        if let Some(key) = obj.keys().find(|k| !matches!(k.as_str(), "states" | "Q" | "f")) {
            return Err(CliError::Config(format!("unknown key {key:?} in model file")));
        }
        let rows = obj
            .get("Q")
            .ok_or_else(|| CliError::Config("model file has no \"Q\" matrix".into()))?
            .as_array()
            .ok_or_else(|| CliError::Config("\"Q\" must be an array of rows".into()))?;
        let m = rows.len();
        if m == 0 {
            return Err(CliError::Config("\"Q\" has no rows".into()));
        }
        let mut flat = Vec::with_capacity(m * m);
        for (i, row) in rows.iter().enumerate() {
            flat.extend(number_row(row, "Q", i, Some(m))?);
        }
        let q = DMatrix::from_row_slice(m, m, &flat);

        let states = match obj.get("states") {
            None => None,
            Some(v) => {
                let list = v
                    .as_array()
                    .ok_or_else(|| CliError::Config("\"states\" must be an array".into()))?;
                let names = list
                    .iter()
                    .enumerate()
                    .map(|(i, s)| match s {
                        Value::String(s) => Ok(s.clone()),
                        Value::Number(n) => Ok(n.to_string()),
                        other => Err(CliError::Config(format!("state {i}: {other} is not a label"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if names.len() != m {
                    return Err(CliError::Config(format!("{} state labels for a {m}x{m} Q", names.len())));
                }
                Some(names)
            }
        };
        let f = obj.get("f").map(|v| number_list(v, "f")).transpose()?;
        if let Some(f) = &f {
            if f.len() != m {
                return Err(CliError::Config(format!("f has {} entries, Q has {m} states", f.len())));
            }
        }
        Ok(ModelFile { states, q, f })
    }

    pub fn build(&self) -> Result<GeneratorModel, CliError> {
        let model = build_from_rates(&self.q).map_err(|e| CliError::Config(format!("Q: {e}")))?;
        match &self.states {
            Some(states) => model
                .with_states(states.clone())
                .map_err(|e| CliError::Config(format!("states: {e}"))),
            None => Ok(model),
        }
    }
}

/// A model plus whatever observable its source carried.
pub struct LoadedModel {
    pub model: GeneratorModel,
    pub file_f: Option<Vec<f64>>,
}

pub fn load_model(spec: &str) -> Result<LoadedModel, CliError> {
    if let Some(builtin) = BuiltinModel::parse(spec)? {
        return Ok(LoadedModel {
            model: builtin.build()?,
            file_f: None,
        });
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "model {spec:?} is neither a builtin (two-state, birth-death(m), random-reversible(m, seed), cycle(m)) nor an existing file"
        )));
    }
    let file = ModelFile::load(path)?;
    Ok(LoadedModel {
        model: file.build()?,
        file_f: file.f,
    })
}

/// The observable and whether centering changed it.
#[derive(Debug, Clone)]
pub struct ResolvedObservable {
    pub raw: Vec<f64>,
    pub f: Observable,
    pub centering_applied: bool,
}

fn read_f_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read observable file {}: {e}", path.display())))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    let values = match &doc {
        Value::Object(obj) => obj
            .get("f")
            .ok_or_else(|| CliError::Config(format!("{}: no \"f\" key", path.display())))?,
        other => other,
    };
    number_list(values, "f")
}

/// `spec` is `parity`, `first-coordinate` or a JSON file; when no `--f` was
/// given explicitly a model file's own `f` takes precedence over the default.
pub fn load_observable(
    spec: Option<&str>,
    loaded: &LoadedModel,
) -> Result<(String, ResolvedObservable), CliError> {
    let m = loaded.model.size();
    let (name, raw) = match (spec, &loaded.file_f) {
        (None, Some(f)) => ("model-file".to_string(), f.clone()),
        (spec, _) => {
            let spec = spec.unwrap_or(DEFAULT_F);
            let raw = match spec {
                "parity" => (0..m).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
                "first-coordinate" => (0..m).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
                path => {
                    let path = Path::new(path);
                    if !path.exists() {
                        return Err(CliError::Config(format!(
                            "f {spec:?} is neither parity, first-coordinate nor an existing file"
                        )));
                    }
                    read_f_file(path)?
                }
            };
            (spec.to_string(), raw)
        }
    };
    if raw.len() != m {
        return Err(CliError::Config(format!("f has {} entries, model has {m} states", raw.len())));
    }
    let f = center(&DVector::from_vec(raw.clone()), &loaded.model)
        .map_err(|e| CliError::Config(format!("observable: {e}")))?;
    let centering_applied = f.values().iter().zip(&raw).any(|(a, b)| a != b);
    Ok((name, ResolvedObservable { raw, f, centering_applied }))
}
