//! Randomized operator property suite over random reversible models.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain_model::{build_random_reversible, center, GeneratorModel, Observable};
use crate::error::Result;
use crate::spectral::{
    decompose, default_lambda_grid, frep_residual, operator_norm_bounds_power,
    operator_norm_bounds_spectral, pi_norm, resolvent_identity_residual, scaled_resolvent_norms,
    sigma2_fractional_formula, sigma2_lambda, sigma2_range_formula, sqrt_lambda_bound_check,
    yosida_potential_residual,
};

/// Contract thresholds checked by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteTolerances {
    /// `||lambda R f - Q R f - f||_pi / ||f||_pi`
    pub frep: f64,
    /// Excess of either operator norm over 1.
    pub norm_excess: f64,
    /// Resolvent identity residual relative to `||f||_pi`.
    pub resolvent_identity: f64,
    /// `sqrt(lambda) ||R f|| - 1/2 ||(-Q)^{-1/2} f||`.
    pub sqrt_bound: f64,
    /// Relative disagreement between the two variance formulas.
    pub cross_formula: f64,
    /// Relative decrease of `sigma^2_lambda` as lambda decreases.
    pub monotone: f64,
    /// Relative gap `(sigma^2 - sigma^2_lambda) / sigma^2` at `lambda = 1e-8 s_min`.
    pub limit_gap: f64,
    /// `||R_lambda g - (-Q)^{-1} g||_pi` at `lambda = 1e-6 s_min`, `||g||_pi = 1`.
    pub yosida: f64,
    /// `| ||lambda R_lambda 1||_pi - 1 |`.
    pub constants: f64,
    /// Two-state closed form error.
    pub closed_form: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        SuiteTolerances {
            frep: 1e-10,
            norm_excess: 1e-10,
            resolvent_identity: 1e-9,
            sqrt_bound: 1e-12,
            cross_formula: 1e-9,
            monotone: 1e-12,
            limit_gap: 1e-6,
            yosida: 1e-5,
            constants: 1e-8,
            closed_form: 1e-12,
        }
    }
}

impl SuiteTolerances {
    /// Every threshold set to `tol`.
    pub fn uniform(tol: f64) -> Self {
        SuiteTolerances {
            frep: tol,
            norm_excess: tol,
            resolvent_identity: tol,
            sqrt_bound: tol,
            cross_formula: tol,
            monotone: tol,
            limit_gap: tol,
            yosida: tol,
            constants: tol,
            closed_form: tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub models: usize,
    pub triples: usize,
    pub min_m: usize,
    pub max_m: usize,
    pub seed: u64,
    /// `log10` range for lambda and mu.
    pub log10_lambda: (f64, f64),
    pub tolerances: SuiteTolerances,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            models: 50,
            triples: 20,
            min_m: 2,
            max_m: 50,
            seed: 20_240_601,
            log10_lambda: (-2.0, 2.0),
            tolerances: SuiteTolerances::default(),
        }
    }
}

/// Worst observed value of one contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub evaluations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub models: usize,
    pub triples: usize,
    pub checks: Vec<SuiteCheck>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&SuiteCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SuiteCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

struct Tracker {
    name: &'static str,
    worst: f64,
    tolerance: f64,
    evaluations: usize,
    violated: bool,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tracker {
            name,
            worst: f64::NEG_INFINITY,
            tolerance,
            evaluations: 0,
            violated: false,
        }
    }

    /// Records `value`, which must not exceed the tolerance.
    fn record(&mut self, value: f64) {
        self.evaluations += 1;
        self.worst = self.worst.max(value);
        if !(value <= self.tolerance) {
            self.violated = true;
        }
    }

    fn finish(self) -> SuiteCheck {
        SuiteCheck {
            name: self.name.to_string(),
            worst: if self.evaluations == 0 { 0.0 } else { self.worst },
            tolerance: self.tolerance,
            evaluations: self.evaluations,
            pass: !self.violated,
        }
    }
}

pub const CHECK_FREP: &str = "resolvent_representation";
pub const CHECK_NORMS: &str = "operator_norm_excess";
pub const CHECK_IDENTITY: &str = "resolvent_identity";
pub const CHECK_SQRT: &str = "sqrt_lambda_bound";
pub const CHECK_CROSS: &str = "variance_formula_agreement";
pub const CHECK_MONOTONE: &str = "sigma2_lambda_monotone";
pub const CHECK_LIMIT: &str = "sigma2_lambda_limit_gap";
pub const CHECK_YOSIDA_MONO: &str = "yosida_monotone";
pub const CHECK_YOSIDA: &str = "yosida_residual";
pub const CHECK_CONSTANTS: &str = "scaled_resolvent_on_constants";
pub const CHECK_CLOSED: &str = "two_state_closed_form";

fn random_vector(m: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))
}

fn random_centered(model: &GeneratorModel, rng: &mut ChaCha8Rng) -> Observable {
    loop {
        if let Ok(f) = center(&random_vector(model.size(), rng), model) {
            return f;
        }
    }
}

/// Runs every operator contract over `config.models` random reversible models.
pub fn run_operator_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let tol = &config.tolerances;
    let mut frep = Tracker::new(CHECK_FREP, tol.frep);
    let mut norms = Tracker::new(CHECK_NORMS, tol.norm_excess);
    let mut identity = Tracker::new(CHECK_IDENTITY, tol.resolvent_identity);
    let mut sqrt_bound = Tracker::new(CHECK_SQRT, tol.sqrt_bound);
    let mut cross = Tracker::new(CHECK_CROSS, tol.cross_formula);
    let mut monotone = Tracker::new(CHECK_MONOTONE, tol.monotone);
    let mut limit = Tracker::new(CHECK_LIMIT, tol.limit_gap);
    let mut yosida_mono = Tracker::new(CHECK_YOSIDA_MONO, tol.monotone);
    let mut yosida = Tracker::new(CHECK_YOSIDA, tol.yosida);
    let mut constants = Tracker::new(CHECK_CONSTANTS, tol.constants);
    let mut closed = Tracker::new(CHECK_CLOSED, tol.closed_form);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = config.log10_lambda;
    let min_m = config.min_m.max(2);
    let max_m = config.max_m.max(min_m);

    for _ in 0..config.models {
        let m = rng.random_range(min_m..=max_m);
        let connectivity = rng.random_range(0.1..0.9);
        let model = build_random_reversible(m, connectivity, rng.random())?;
        let spec = decompose(&model)?;
        let s_min = spec.gap_min();

        for _ in 0..config.triples {
            let f = random_vector(m, &mut rng);
            let f_norm = pi_norm(&f, &model);
            let lambda = 10f64.powf(rng.random_range(lo..hi));
            let mu = 10f64.powf(rng.random_range(lo..hi));

            frep.record(frep_residual(&model, lambda, &f)? / f_norm);
            identity.record(resolvent_identity_residual(&model, lambda, mu, &f)? / f_norm);

            let (a, b) = operator_norm_bounds_spectral(&spec, lambda)?;
            let (pa, pb) = operator_norm_bounds_power(&model, lambda)?;
            norms.record(a.max(b).max(pa).max(pb) - 1.0);

            let centered = random_centered(&model, &mut rng);
            let (lhs, rhs) = sqrt_lambda_bound_check(&spec, &centered, lambda)?;
            sqrt_bound.record(lhs - rhs);
        }

        let f = random_centered(&model, &mut rng);
        let range = sigma2_range_formula(&model, &f)?;
        let frac = sigma2_fractional_formula(&spec, &f)?;
        cross.record((range.sigma2 - frac.sigma2).abs() / frac.sigma2);

        let mut grid = default_lambda_grid(s_min);
        grid.push(1e-8 * s_min);
        let curve = grid
            .iter()
            .map(|&l| sigma2_lambda(&model, &f, l))
            .collect::<Result<Vec<_>>>()?;
        for w in curve.windows(2) {
            monotone.record((w[0] - w[1]) / range.sigma2);
        }
        limit.record((range.sigma2 - curve[curve.len() - 1]) / range.sigma2);

        let g = {
            let c = random_centered(&model, &mut rng);
            let norm = pi_norm(c.values(), &model);
            c.values() / norm
        };
        let lambdas: Vec<f64> = (0..=6).map(|k| s_min * 10f64.powi(-k)).collect();
        let rows = yosida_potential_residual(&model, &g, &lambdas)?;
        for w in rows.windows(2) {
            yosida_mono.record(w[1].residual - w[0].residual);
        }
        yosida.record(rows[rows.len() - 1].residual);
        for value in scaled_resolvent_norms(&model, &DVector::from_element(m, 1.0), &lambdas)? {
            constants.record((value - 1.0).abs());
        }

        if m == 2 {
            // sigma^2 = 2 pi_0 pi_1 (f_0 - f_1)^2 / (a + b) for rates a = Q_01, b = Q_10
            let q = model.q();
            let pi = model.pi();
            let fv = f.values();
            let expected = 2.0 * pi[0] * pi[1] * (fv[0] - fv[1]).powi(2) / (q[(0, 1)] + q[(1, 0)]);
            closed.record((range.sigma2 - expected).abs() / expected);
            closed.record((frac.sigma2 - expected).abs() / expected);
        }
    }

    Ok(SuiteReport {
        models: config.models,
        triples: config.triples,
        checks: [
            frep, norms, identity, sqrt_bound, cross, monotone, limit, yosida_mono, yosida, constants, closed,
        ]
        .into_iter()
        .map(Tracker::finish)
        .collect(),
    })
}
