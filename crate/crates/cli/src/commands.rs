//! The three subcommands. Each returns a report, a CSV table and the list of
//! violated contracts; writing files is left to the caller.

use std::fmt::Write as _;

use fclt_core::fclt_verifier::{
    finite_t_variance_oracle, lambda_collapse_test, normality_test, run_experiment, variance_scaling_test,
    FcltExperiment,
};
use fclt_core::path_simulator::Schedule;
use fclt_core::spectral::{
    decompose, fractional_power_apply, frep_residual, operator_norm_bounds, pi_norm, scaled_resolvent_norms,
    sigma2_fractional_formula, sigma2_range_formula, spectral_gap, sqrt_lambda_bound_check, tv_convergence_curve,
    yosida_potential_residual,
};
use fclt_core::suite::{run_operator_suite, SuiteConfig, SuiteTolerances};
use fclt_core::FcltError;
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{load_model, load_observable, BuiltinModel, LoadedModel, ResolvedObservable, RunConfig};
use crate::error::CliError;

/// Minimum replicate count for which the KS p-value enters the verdict.
const KS_MIN_REPLICATES: usize = 1000;
const KS_LEVEL: f64 = 0.01;

pub struct Outcome {
    pub report: Value,
    pub csv: String,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn violations(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `worst <= tolerance`.
    fn at_most(name: &str, worst: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            worst,
            tolerance,
            pass: worst <= tolerance,
        }
    }

    fn flag(name: &str, pass: bool) -> Self {
        Check {
            name: name.to_string(),
            worst: if pass { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass,
        }
    }
}

pub fn render_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.3e}  tol {:>9.1e}  {}",
            c.name,
            c.worst,
            c.tolerance,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    out
}

fn model_json(spec: &str, loaded: &LoadedModel) -> Value {
    let model = &loaded.model;
    json!({
        "source": spec,
        "size": model.size(),
        "states": model.states(),
        "pi": model.pi().as_slice(),
        "reversible": model.is_reversible(),
        "detailed_balance_residual": model.detailed_balance_residual(),
    })
}

fn observable_json(name: &str, obs: &ResolvedObservable) -> Value {
    json!({
        "source": name,
        "input": obs.raw,
        "centered": obs.f.values().as_slice(),
        "centering_applied": obs.centering_applied,
    })
}

fn load_inputs(cfg: &RunConfig) -> Result<(LoadedModel, String, ResolvedObservable), CliError> {
    let loaded = load_model(cfg.model_spec())?;
    let (name, obs) = load_observable(cfg.f.as_deref(), &loaded)?;
    Ok((loaded, name, obs))
}

struct ExactTolerances {
    cross_formula: f64,
    monotone: f64,
    norm_excess: f64,
    frep: f64,
    sqrt_bound: f64,
    constants: f64,
}

impl ExactTolerances {
    fn new(tol: Option<f64>) -> Self {
        let pick = |default: f64| tol.unwrap_or(default);
        ExactTolerances {
            cross_formula: pick(1e-9),
            monotone: pick(1e-12),
            norm_excess: pick(1e-10),
            frep: pick(1e-10),
            sqrt_bound: pick(1e-12),
            constants: pick(1e-8),
        }
    }
}

pub fn cmd_exact(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (loaded, f_name, obs) = load_inputs(cfg)?;
    let model = &loaded.model;
    let f = &obs.f;
    let tol = ExactTolerances::new(cfg.tol);
    let mut checks = Vec::new();

    let range = sigma2_range_formula(model, f)?;
    let spec = if model.is_reversible() { Some(decompose(model)?) } else { None };
    let fractional = spec.as_ref().map(|s| sigma2_fractional_formula(s, f)).transpose()?;
    if let Some(frac) = &fractional {
        let rel = (range.sigma2 - frac.sigma2).abs() / range.sigma2.abs().max(f64::MIN_POSITIVE);
        checks.push(Check::at_most("variance_formula_agreement", rel, tol.cross_formula));
    }
    checks.push(Check::flag("sigma2_lambda_monotone", range.curve_is_monotone(tol.monotone)));

    let gap = spectral_gap(model)?;
    let grid: Vec<f64> = range.sigma2_lambda_curve.iter().map(|&(l, _)| l).collect();
    let raw = DVector::from_vec(obs.raw.clone());
    let raw_norm = pi_norm(&raw, model).max(f64::MIN_POSITIVE);
    let g = f.values() / pi_norm(f.values(), model);
    let ones = DVector::from_element(model.size(), 1.0);
    let yosida = yosida_potential_residual(model, &g, &grid)?;
    let constants = scaled_resolvent_norms(model, &ones, &grid)?;

    let mut rows = Vec::with_capacity(grid.len());
    let (mut worst_scaled, mut worst_gen, mut worst_frep, mut worst_sqrt) =
        (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    let mut worst_constant = 0.0f64;
    let mut yosida_monotone = true;
    for (k, &lambda) in grid.iter().enumerate() {
        let (scaled, generator) = operator_norm_bounds(model, lambda)?;
        let frep = frep_residual(model, lambda, &raw)? / raw_norm;
        let sqrt = spec
            .as_ref()
            .map(|s| sqrt_lambda_bound_check(s, f, lambda))
            .transpose()?
            .map(|(lhs, rhs)| lhs - rhs);
        worst_scaled = worst_scaled.max(scaled - 1.0);
        worst_gen = worst_gen.max(generator - 1.0);
        worst_frep = worst_frep.max(frep);
        if let Some(s) = sqrt {
            worst_sqrt = worst_sqrt.max(s);
        }
        worst_constant = worst_constant.max((constants[k] - 1.0).abs());
        if k > 0 && yosida[k].residual > yosida[k - 1].residual * (1.0 + tol.monotone) {
            yosida_monotone = false;
        }
        rows.push(json!({
            "lambda": lambda,
            "sigma2_lambda": range.sigma2_lambda_curve[k].1,
            "gap": range.sigma2 - range.sigma2_lambda_curve[k].1,
            "norm_lambda_resolvent": scaled,
            "norm_generator_resolvent": generator,
            "resolvent_representation_residual": frep,
            "sqrt_lambda_slack": sqrt,
            "yosida_residual": yosida[k].residual,
            "scaled_norm_on_constants": constants[k],
        }));
    }
    checks.push(Check::at_most("scaled_resolvent_norm_excess", worst_scaled, tol.norm_excess));
    // ||Q R_lambda|| <= 1 needs self-adjointness; non-reversible models only report it.
    if model.is_reversible() {
        checks.push(Check::at_most("generator_resolvent_norm_excess", worst_gen, tol.norm_excess));
        checks.push(Check::at_most("sqrt_lambda_bound", worst_sqrt, tol.sqrt_bound));
    }
    checks.push(Check::at_most("resolvent_representation", worst_frep, tol.frep));
    checks.push(Check::flag("yosida_monotone", yosida_monotone));
    checks.push(Check::at_most("scaled_resolvent_on_constants", worst_constant, tol.constants));

    let relax = 1.0 / gap;
    let tv_times: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|k| k * relax).collect();
    let tv = tv_convergence_curve(model, &tv_times)?;
    let tv_monotone = tv
        .iter()
        .all(|row| row.windows(2).all(|w| w[1] <= w[0] + tol.monotone));
    checks.push(Check::flag("tv_nonincreasing", tv_monotone));

    let mut csv = String::from(
        "lambda,sigma2_lambda,gap,norm_lambda_resolvent,norm_generator_resolvent,resolvent_representation_residual,yosida_residual,scaled_norm_on_constants\n",
    );
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            row["lambda"],
            row["sigma2_lambda"],
            row["gap"],
            row["norm_lambda_resolvent"],
            row["norm_generator_resolvent"],
            row["resolvent_representation_residual"],
            row["yosida_residual"],
            row["scaled_norm_on_constants"]
        );
    }

    let report = json!({
        "command": "exact",
        "model": model_json(cfg.model_spec(), &loaded),
        "f": observable_json(&f_name, &obs),
        "sigma2": range.sigma2,
        "sigma2_range_inverse": range.sigma2,
        "sigma2_fractional_power": fractional.as_ref().map(|r| r.sigma2),
        "spectral_gap": gap,
        "lambda_table": rows,
        "tv": {
            "t": tv_times,
            "per_state": tv,
        },
        "checks": checks,
        "verdict": verdict(&checks),
    });
    Ok(Outcome { report, csv, checks })
}

fn verdict(checks: &[Check]) -> &'static str {
    if checks.iter().all(|c| c.pass) {
        "pass"
    } else {
        "fail"
    }
}

fn config_error(e: FcltError) -> CliError {
    CliError::Config(e.to_string())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (loaded, f_name, obs) = load_inputs(cfg)?;
    let model = &loaded.model;
    let schedule = Schedule::new(cfg.exponent, cfg.c).map_err(config_error)?;
    let t_grid = cfg.t_grid();
    let exp = FcltExperiment::new(obs.f.clone(), cfg.n.clone(), cfg.replicates, cfg.seed, schedule, t_grid.clone())
        .map_err(config_error)?;
    let big_t = exp.horizon_t();

    let sigma2 = sigma2_range_formula(model, &obs.f)?.sigma2;
    let spec = if model.is_reversible() { Some(decompose(model)?) } else { None };
    let half_norm_sq = spec
        .as_ref()
        .map(|s| fractional_power_apply(s, -0.5, obs.f.values()).map(|h| pi_norm(&h, model).powi(2)))
        .transpose()?;
    let stats = run_experiment(model, &exp)?;

    let mut checks = Vec::new();
    let identity_tol = cfg.tol.unwrap_or(1e-10);
    let worst_identity = stats.iter().map(|s| s.max_identity_residual).fold(0.0, f64::max);
    checks.push(Check::at_most("pathwise_identity", worst_identity, identity_tol));

    let oracle = |x: f64| finite_t_variance_oracle(spec.as_ref().expect("reversible"), &obs.f, x).unwrap_or(f64::NAN);
    let exact: Option<&dyn Fn(f64) -> f64> = if spec.is_some() { Some(&oracle) } else { None };
    let verdicts = variance_scaling_test(&stats, sigma2, exact)?;
    let at_horizon: Vec<_> = verdicts.iter().filter(|v| v.t == big_t).collect();
    let variance_ok = at_horizon
        .iter()
        .all(|v| v.pass_exact.unwrap_or(v.pass_asymptotic));
    checks.push(Check::flag("variance_band_at_horizon", variance_ok));

    let normality = stats
        .iter()
        .map(|s| normality_test(s, sigma2, big_t))
        .collect::<Result<Vec<_>, _>>()?;
    let worst_p = stats
        .iter()
        .zip(&normality)
        .filter(|(s, _)| s.replicates >= KS_MIN_REPLICATES)
        .map(|(_, k)| k.p_value)
        .fold(f64::INFINITY, f64::min);
    if worst_p.is_finite() {
        checks.push(Check {
            name: "normality_p_value".into(),
            worst: worst_p,
            tolerance: KS_LEVEL,
            pass: worst_p > KS_LEVEL,
        });
    }

    let collapse = lambda_collapse_test(&stats, &schedule, half_norm_sq)?;
    checks.push(Check::flag("lambda_collapse_decreasing", collapse.strictly_decreasing));
    checks.push(Check::flag("lambda_collapse_envelope", collapse.envelope_holds));

    let mut csv = String::from("n,lambda_n,t,mean,variance,std_error,oracle,asymptotic,pass,ks_statistic,ks_p_value\n");
    let mut idx = 0;
    for s in &stats {
        for (k, &t) in s.t_grid.iter().enumerate() {
            let v = &verdicts[idx];
            idx += 1;
            let ks = s.ks[k];
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                s.n,
                s.lambda_n,
                t,
                s.mean[k],
                s.variance[k],
                v.std_error,
                v.exact.map(|e| e.to_string()).unwrap_or_default(),
                v.asymptotic,
                v.pass_exact.unwrap_or(v.pass_asymptotic),
                ks.map(|r| r.statistic.to_string()).unwrap_or_default(),
                ks.map(|r| r.p_value.to_string()).unwrap_or_default(),
            );
        }
    }

    let report = json!({
        "command": "simulate",
        "model": model_json(cfg.model_spec(), &loaded),
        "f": observable_json(&f_name, &obs),
        "sigma2": sigma2,
        "half_power_norm_sq": half_norm_sq,
        "schedule": { "exponent": schedule.exponent, "c": schedule.c },
        "seed": cfg.seed,
        "runs": stats,
        "variance": verdicts,
        "normality_at_horizon": normality,
        "collapse": collapse,
        "checks": checks,
        "verdict": verdict(&checks),
    });
    Ok(Outcome { report, csv, checks })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (mut min_m, mut max_m) = (cfg.suite_min_m, cfg.suite_max_m);
    // A builtin model narrows the random model sizes: two-state forces m = 2,
    // random-reversible(m, _) caps m.
    if let Some(spec) = &cfg.model {
        match BuiltinModel::parse(spec)? {
            Some(BuiltinModel::TwoState) => (min_m, max_m) = (2, 2),
            Some(BuiltinModel::RandomReversible { m, .. }) => {
                max_m = m.max(2);
                min_m = min_m.min(max_m);
            }
            Some(_) => {}
            None => return Err(CliError::Config("verify accepts only builtin model names".into())),
        }
    }
    let suite = SuiteConfig {
        models: cfg.suite_models,
        triples: cfg.suite_triples,
        min_m,
        max_m,
        seed: cfg.seed,
        tolerances: cfg.tol.map(SuiteTolerances::uniform).unwrap_or_default(),
        ..SuiteConfig::default()
    };
    let report = run_operator_suite(&suite)?;
    let checks: Vec<Check> = report
        .checks
        .iter()
        .map(|c| Check {
            name: c.name.clone(),
            worst: c.worst,
            tolerance: c.tolerance,
            pass: c.pass,
        })
        .collect();

    let mut csv = String::from("check,worst,tolerance,evaluations,pass\n");
    for c in &report.checks {
        let _ = writeln!(csv, "{},{},{},{},{}", c.name, c.worst, c.tolerance, c.evaluations, c.pass);
    }
    let json = json!({
        "command": "verify",
        "suite": suite,
        "result": report,
        "verdict": verdict(&checks),
    });
    Ok(Outcome {
        report: json,
        csv,
        checks,
    })
}
