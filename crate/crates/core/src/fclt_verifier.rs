//! Replicate sweeps and the statistical verdicts built on them.
//!
//! Every verdict here is either an exact closed form or a 3-standard-error band
//! around one, evaluated on seed-pinned replicate sweeps.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain_model::{GeneratorModel, Observable};
use crate::error::{FcltError, Result};
use crate::ks::{ks_test_normal, normal_scale_distance, KsResult};
use crate::path_simulator::{
    scaled_decomposition_with, DecompositionVectors, PathSampler, Schedule, ScaledPaths,
};
use crate::spectral::{
    decompose, fractional_power_apply, pi_norm, sigma2_lambda, sigma2_range_formula, SpectralData,
};

/// Minimum replicate count for an experiment.
pub const MIN_REPLICATES: usize = 100;

/// Replicate sweep over a list of scalings `n` with `lambda_n` from a schedule.
#[derive(Debug, Clone)]
pub struct FcltExperiment {
    pub f: Observable,
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub seed: u64,
    pub schedule: Schedule,
    pub t_grid: Vec<f64>,
}

impl FcltExperiment {
    pub fn new(
        f: Observable,
        n_list: Vec<u64>,
        replicates: usize,
        seed: u64,
        schedule: Schedule,
        t_grid: Vec<f64>,
    ) -> Result<Self> {
        schedule.validate()?;
        let exp = FcltExperiment {
            f,
            n_list,
            replicates,
            seed,
            schedule,
            t_grid,
        };
        exp.validate_sweep()?;
        Ok(exp)
    }

    fn validate_sweep(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(FcltError::invalid(format!(
                "need at least {MIN_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        if self.n_list.is_empty() || self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FcltError::invalid("n_list must be nonempty, positive and strictly increasing"));
        }
        if self.t_grid.is_empty() || self.t_grid.windows(2).any(|w| w[1] <= w[0]) || self.t_grid[0] < 0.0 {
            return Err(FcltError::invalid("t_grid must be nonnegative and strictly increasing"));
        }
        Ok(())
    }

    /// Largest grid time `T`.
    pub fn horizon_t(&self) -> f64 {
        self.t_grid[self.t_grid.len() - 1]
    }
}

/// Distribution summary of `sup_t |Lambda_n(t)|` across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupSummary {
    pub median: f64,
    pub q90: f64,
    pub max: f64,
    pub mean_sq: f64,
    pub mean_sq_se: f64,
}

/// Aggregated replicate output at one scaling `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateStats {
    pub n: u64,
    pub lambda_n: f64,
    pub replicates: usize,
    pub t_grid: Vec<f64>,
    /// Replicate mean of `I_n(f, t)` per grid time.
    pub mean: Vec<f64>,
    /// Replicate (unbiased) variance of `I_n(f, t)` per grid time.
    pub variance: Vec<f64>,
    /// KS test against `Normal(0, sigma^2 t)`; absent at `t = 0` or when `sigma^2 = 0`.
    pub ks: Vec<Option<KsResult>>,
    pub sup_lambda: SupSummary,
    pub max_identity_residual: f64,
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
    #[serde(skip)]
    pub sup_samples: Vec<f64>,
}

impl ReplicateStats {
    fn grid_index(&self, t: f64) -> Result<usize> {
        self.t_grid
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12)
            .ok_or_else(|| FcltError::invalid(format!("t = {t} is not on the experiment grid")))
    }

    /// Replicate values of `I_n(f, t)`.
    pub fn samples_at(&self, t: f64) -> Result<&[f64]> {
        Ok(&self.samples[self.grid_index(t)?])
    }
}

fn stream_seed(seed: u64, n: u64) -> u64 {
    seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Runs `replicates` independent stationary paths of horizon `n T` in parallel.
///
/// Replicate `r` uses the RNG stream `(seed ^ hash(n), r)`, so each replicate is
/// reproducible on its own and results do not depend on the thread count.
fn sweep<T: Send>(
    sampler: &PathSampler,
    n: u64,
    horizon: f64,
    replicates: usize,
    seed: u64,
    per_path: impl Fn(&crate::path_simulator::TrajectorySample) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let stream = stream_seed(seed, n);
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let path = sampler.sample(horizon, stream, r)?;
            per_path(&path)
        })
        .collect()
}

/// Runs the sweep and aggregates each `n` into [`ReplicateStats`].
///
/// The KS columns compare against `Normal(0, sigma^2 t)` with `sigma^2` from the
/// range-inverse formula.
pub fn run_experiment(model: &GeneratorModel, exp: &FcltExperiment) -> Result<Vec<ReplicateStats>> {
    exp.validate_sweep()?;
    let sigma2 = sigma2_range_formula(model, &exp.f)?.sigma2;
    let sampler = PathSampler::new(model)?;
    let big_t = exp.horizon_t();

    exp.n_list
        .iter()
        .map(|&n| {
            let lambda_n = exp.schedule.lambda_at(n);
            let vectors = DecompositionVectors::new(model, &exp.f, lambda_n)?;
            let runs: Vec<ScaledPaths> = sweep(&sampler, n, n as f64 * big_t, exp.replicates, exp.seed, |path| {
                scaled_decomposition_with(path, &vectors, n, &exp.t_grid)
            })?;
            summarize(n, lambda_n, &exp.t_grid, runs, sigma2)
        })
        .collect()
}

fn summarize(n: u64, lambda_n: f64, t_grid: &[f64], runs: Vec<ScaledPaths>, sigma2: f64) -> Result<ReplicateStats> {
    let replicates = runs.len();
    let samples: Vec<Vec<f64>> = (0..t_grid.len())
        .map(|k| runs.iter().map(|r| r.i_vals[k]).collect())
        .collect();
    let (mean, variance): (Vec<f64>, Vec<f64>) = samples.iter().map(|s| mean_and_variance(s)).unzip();
    let ks = t_grid
        .iter()
        .zip(&samples)
        .map(|(&t, s)| {
            if t > 0.0 && sigma2 > 0.0 {
                ks_test_normal(s, 0.0, (sigma2 * t).sqrt()).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let sup_samples: Vec<f64> = runs.iter().map(|r| r.lambda_sup).collect();
    let mut sorted = sup_samples.clone();
    sorted.sort_by(f64::total_cmp);
    let squares: Vec<f64> = sup_samples.iter().map(|x| x * x).collect();
    let (mean_sq, var_sq) = mean_and_variance(&squares);
    let sup_lambda = SupSummary {
        median: quantile(&sorted, 0.5),
        q90: quantile(&sorted, 0.9),
        max: sorted.last().copied().unwrap_or(0.0),
        mean_sq,
        mean_sq_se: (var_sq / replicates as f64).sqrt(),
    };
    let max_identity_residual = runs.iter().map(|r| r.max_identity_residual()).fold(0.0, f64::max);

    Ok(ReplicateStats {
        n,
        lambda_n,
        replicates,
        t_grid: t_grid.to_vec(),
        mean,
        variance,
        ks,
        sup_lambda,
        max_identity_residual,
        samples,
        sup_samples,
    })
}

fn require_centered_observable(f: &Observable, model: &GeneratorModel) -> Result<()> {
    if !f.is_centered() {
        return Err(FcltError::NotCentered {
            component: model.pi().dot(f.values()),
        });
    }
    Ok(())
}

/// `Var[int_0^t f(X_s) ds] = 2 sum_{k>=2} <f,e_k>^2_pi (s_k t - 1 + e^{-s_k t}) / s_k^2`
/// for the stationary reversible chain.
pub fn finite_t_variance_oracle(spec: &SpectralData, f: &Observable, t: f64) -> Result<f64> {
    require_centered_observable(f, spec.model())?;
    if !(t >= 0.0) {
        return Err(FcltError::invalid(format!("t must be >= 0, got {t}")));
    }
    let coeffs = spec.coefficients(f.values());
    Ok(spec
        .gaps()
        .enumerate()
        .map(|(k, s)| 2.0 * coeffs[k + 1].powi(2) * relaxed_ramp(s * t) / (s * s))
        .sum())
}

/// `x - 1 + e^{-x}`, without cancellation for small `x`.
fn relaxed_ramp(x: f64) -> f64 {
    if x < 0.1 {
        // x^2/2 - x^3/6 + x^4/24 - ...
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..30 {
            term *= -x / k as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x - 1.0 + (-x).exp()
    }
}

/// One `(n, t)` cell of the variance-scaling check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceVerdict {
    pub n: u64,
    pub t: f64,
    pub empirical: f64,
    /// `sqrt(2 / (R - 1))` times the empirical variance.
    pub std_error: f64,
    pub asymptotic: f64,
    pub pass_asymptotic: bool,
    pub exact: Option<f64>,
    pub pass_exact: Option<bool>,
}

fn within_band(value: f64, target: f64, se: f64) -> bool {
    (value - target).abs() <= 3.0 * se
}

/// Compares empirical `Var[I_n(f,t)]` with `sigma^2 t` and, when an exact
/// finite-time oracle `t -> Var[int_0^t f]` is given, with `oracle(n t) / n`.
pub fn variance_scaling_test(
    stats: &[ReplicateStats],
    sigma2: f64,
    exact: Option<&dyn Fn(f64) -> f64>,
) -> Result<Vec<VarianceVerdict>> {
    let mut out = Vec::new();
    for s in stats {
        if s.replicates < MIN_REPLICATES {
            return Err(FcltError::invalid("variance scaling needs at least 100 replicates"));
        }
        let factor = (2.0 / (s.replicates as f64 - 1.0)).sqrt();
        for (k, &t) in s.t_grid.iter().enumerate() {
            let empirical = s.variance[k];
            let std_error = factor * empirical;
            let asymptotic = sigma2 * t;
            let exact_value = exact.map(|oracle| oracle(s.n as f64 * t) / s.n as f64);
            out.push(VarianceVerdict {
                n: s.n,
                t,
                empirical,
                std_error,
                asymptotic,
                pass_asymptotic: within_band(empirical, asymptotic, std_error),
                exact: exact_value,
                pass_exact: exact_value.map(|e| within_band(empirical, e, std_error)),
            });
        }
    }
    Ok(out)
}

/// KS test of the replicate values of `I_n(f, t)` against `Normal(0, sigma^2 t)`.
///
/// The asymptotic p-value is reliable from about 1000 replicates.
pub fn normality_test(stats: &ReplicateStats, sigma2: f64, t: f64) -> Result<KsResult> {
    if !(sigma2 > 0.0) {
        return Err(FcltError::DegenerateObservable);
    }
    if !(t > 0.0) {
        return Err(FcltError::invalid("normality needs t > 0"));
    }
    ks_test_normal(stats.samples_at(t)?, 0.0, (sigma2 * t).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseRow {
    pub n: u64,
    pub lambda_n: f64,
    pub median_sup: f64,
    pub mean_sup_sq: f64,
    pub mean_sup_sq_se: f64,
    /// `n T^2 lambda_n ||(-Q)^{-1/2} f||^2_pi / 4`, when the model is reversible.
    pub envelope: Option<f64>,
    /// `mean_sup_sq <= envelope`
    pub within_envelope: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub rows: Vec<CollapseRow>,
    /// Medians strictly decrease along `n_list` (or are all zero).
    pub strictly_decreasing: bool,
    /// Every row with an envelope satisfies it, allowing 3 standard errors.
    pub envelope_holds: bool,
}

impl CollapseReport {
    pub fn pass(&self) -> bool {
        self.strictly_decreasing && self.envelope_holds
    }
}

/// Checks that `sup_t |Lambda_n|` collapses along the schedule and respects the
/// second-moment envelope.
///
/// `half_power_norm_sq` is `||(-Q)^{-1/2} f||^2_pi` (available for reversible models).
pub fn lambda_collapse_test(
    stats: &[ReplicateStats],
    schedule: &Schedule,
    half_power_norm_sq: Option<f64>,
) -> Result<CollapseReport> {
    schedule.validate()?;
    let rows: Vec<CollapseRow> = stats
        .iter()
        .map(|s| {
            let big_t = s.t_grid[s.t_grid.len() - 1];
            let envelope = half_power_norm_sq.map(|c| 0.25 * s.n as f64 * big_t * big_t * s.lambda_n * c);
            CollapseRow {
                n: s.n,
                lambda_n: s.lambda_n,
                median_sup: s.sup_lambda.median,
                mean_sup_sq: s.sup_lambda.mean_sq,
                mean_sup_sq_se: s.sup_lambda.mean_sq_se,
                envelope,
                within_envelope: envelope.map(|e| s.sup_lambda.mean_sq <= e),
            }
        })
        .collect();
    let all_zero = rows.iter().all(|r| r.median_sup == 0.0);
    let strictly_decreasing = all_zero || rows.windows(2).all(|w| w[1].median_sup < w[0].median_sup);
    let envelope_holds = rows.iter().all(|r| match r.envelope {
        Some(e) => r.mean_sup_sq - 3.0 * r.mean_sup_sq_se <= e,
        None => true,
    });
    Ok(CollapseReport {
        rows,
        strictly_decreasing,
        envelope_holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub lambda: f64,
    pub sigma2_lambda: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub sigma2: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Gaps are nonnegative and shrink as lambda decreases, up to `rel_tol * sigma2`.
    pub fn gap_monotone(&self, rel_tol: f64) -> bool {
        let slack = rel_tol * self.sigma2.abs();
        let ordered = self.rows.windows(2).all(|w| {
            if w[1].lambda < w[0].lambda {
                w[1].gap <= w[0].gap + slack
            } else {
                w[1].gap + slack >= w[0].gap
            }
        });
        ordered && self.rows.iter().all(|r| r.gap >= -slack)
    }
}

/// `sigma^2 - sigma^2_lambda` along `lambda_grid`.
pub fn sigma2_convergence_report(
    model: &GeneratorModel,
    f: &Observable,
    lambda_grid: &[f64],
) -> Result<ConvergenceTable> {
    require_centered_observable(f, model)?;
    let sigma2 = sigma2_range_formula(model, f)?.sigma2;
    let rows = lambda_grid
        .iter()
        .map(|&lambda| {
            let s2l = sigma2_lambda(model, f, lambda)?;
            Ok(ConvergenceRow {
                lambda,
                sigma2_lambda: s2l,
                gap: sigma2 - s2l,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { sigma2, rows })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Sweep settings for [`diagonal_argument_trace`].
#[derive(Debug, Clone)]
pub struct TraceConfig {
    pub n_candidates: Vec<u64>,
    pub replicates: usize,
    pub seed: u64,
    pub schedule: Schedule,
    pub horizon_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: u64,
    pub lambda_n: f64,
    /// Empirical Ky Fan distance of `sup_t |Lambda_n(lambda_n, t)|` from 0,
    /// an upper bound proxy for the distance between `I_n` and `A_n(lambda_n)`.
    pub ky_fan_lambda: f64,
    /// `sqrt(n lambda_n) ||(-Q)^{-1/2} f||_pi T / 2`.
    pub cauchy_diagonal: f64,
    /// Same bound with `max(lambda_n, lambda_ell)`.
    pub cauchy_with_ell: Option<f64>,
    /// KS statistic of `A_n(lambda_ell, T)` against `Normal(0, sigma^2_ell T)`.
    pub ks_a_ell: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalTrace {
    pub epsilon: f64,
    pub sigma2: f64,
    pub half_power_norm: f64,
    pub rows: Vec<TraceRow>,
    pub n1: Option<u64>,
    pub n2: Option<u64>,
    pub ell: Option<u64>,
    pub lambda_ell: Option<f64>,
    pub sigma2_ell: Option<f64>,
    pub n3: Option<u64>,
    pub n_star: Option<u64>,
    /// Four proxy distances at `n_star`, in the order of the triangle inequality.
    pub proxies_at_star: Option<[f64; 4]>,
    pub total_at_star: Option<f64>,
}

/// `inf { d >= 0 : #{x > d} / R <= d }`.
pub fn empirical_ky_fan(samples: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let r = sorted.len() as f64;
    (0..=sorted.len())
        .map(|k| {
            let next = sorted.get(k).copied().unwrap_or(0.0);
            (k as f64 / r).max(next)
        })
        .fold(f64::INFINITY, f64::min)
}

/// First candidate from which `ok` holds for every later candidate.
fn tail_threshold(candidates: &[u64], ok: &[bool]) -> Option<u64> {
    let mut threshold = None;
    for (k, &good) in ok.iter().enumerate().rev() {
        if !good {
            break;
        }
        threshold = Some(candidates[k]);
    }
    threshold
}

/// Instantiates the four-term epsilon bookkeeping of the diagonal argument with
/// one-dimensional proxies at `t = T`, returning the chosen thresholds and the
/// achieved proxy distances. Reported, never asserted.
pub fn diagonal_argument_trace(
    model: &GeneratorModel,
    f: &Observable,
    epsilon: f64,
    config: &TraceConfig,
) -> Result<DiagonalTrace> {
    require_centered_observable(f, model)?;
    if !(epsilon > 0.0) {
        return Err(FcltError::invalid("epsilon must be positive"));
    }
    let cands = &config.n_candidates;
    if cands.is_empty() || cands.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FcltError::invalid("n candidates must be nonempty and strictly increasing"));
    }
    let spec = decompose(model)?;
    let half = fractional_power_apply(&spec, -0.5, f.values())?;
    let c_half = pi_norm(&half, model);
    let sigma2 = 2.0 * c_half * c_half;
    let big_t = config.horizon_t;
    let cauchy = |n: u64, lambda: f64| (n as f64 * lambda).sqrt() * c_half * big_t / 2.0;

    let diag: Vec<f64> = cands.iter().map(|&n| cauchy(n, config.schedule.lambda_at(n))).collect();
    let n2 = tail_threshold(cands, &diag.iter().map(|&b| b <= epsilon).collect::<Vec<_>>());

    let mut ell = None;
    let mut sigma2_ell = None;
    if let Some(n2) = n2 {
        for &l in cands.iter().filter(|&&l| l >= n2) {
            let s2l = sigma2_lambda(model, f, config.schedule.lambda_at(l))?;
            if (sigma2 - s2l).abs() <= epsilon {
                ell = Some(l);
                sigma2_ell = Some(s2l);
                break;
            }
        }
    }
    let lambda_ell = ell.map(|l| config.schedule.lambda_at(l));

    let sampler = PathSampler::new(model)?;
    let grid = [big_t];
    let mut rows = Vec::with_capacity(cands.len());
    for (k, &n) in cands.iter().enumerate() {
        let lambda_n = config.schedule.lambda_at(n);
        let own = DecompositionVectors::new(model, f, lambda_n)?;
        let tuned = lambda_ell.map(|l| DecompositionVectors::new(model, f, l)).transpose()?;
        let results: Vec<(f64, Option<f64>)> =
            sweep(&sampler, n, n as f64 * big_t, config.replicates, config.seed, |path| {
                let sp = scaled_decomposition_with(path, &own, n, &grid)?;
                let a_ell = match &tuned {
                    Some(v) => Some(scaled_decomposition_with(path, v, n, &grid)?.a_vals[0]),
                    None => None,
                };
                Ok((sp.lambda_sup, a_ell))
            })?;
        let sups: Vec<f64> = results.iter().map(|r| r.0).collect();
        let ks_a_ell = match sigma2_ell {
            Some(s2l) if s2l > 0.0 => {
                let a: Vec<f64> = results.iter().filter_map(|r| r.1).collect();
                Some(ks_test_normal(&a, 0.0, (s2l * big_t).sqrt())?.statistic)
            }
            _ => None,
        };
        rows.push(TraceRow {
            n,
            lambda_n,
            ky_fan_lambda: empirical_ky_fan(&sups),
            cauchy_diagonal: diag[k],
            cauchy_with_ell: lambda_ell.map(|l| cauchy(n, lambda_n.max(l))),
            ks_a_ell,
        });
    }

    let n1 = tail_threshold(cands, &rows.iter().map(|r| r.ky_fan_lambda <= epsilon).collect::<Vec<_>>());
    let n3 = if ell.is_some() {
        tail_threshold(
            cands,
            &rows.iter().map(|r| r.ks_a_ell.is_some_and(|d| d <= epsilon)).collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let n_star = match (n1, n2, n3) {
        (Some(a), Some(b), Some(c)) => Some(a.max(b).max(c)),
        _ => None,
    };
    let proxies_at_star = n_star.and_then(|ns| {
        let row = rows.iter().find(|r| r.n == ns)?;
        let limit_gap = normal_scale_distance((sigma2_ell? * big_t).sqrt(), (sigma2 * big_t).sqrt());
        Some([row.ky_fan_lambda, row.cauchy_with_ell?, row.ks_a_ell?, limit_gap])
    });

    Ok(DiagonalTrace {
        epsilon,
        sigma2,
        half_power_norm: c_half,
        rows,
        n1,
        n2,
        ell,
        lambda_ell,
        sigma2_ell,
        n3,
        n_star,
        total_at_star: proxies_at_star.map(|p| p.iter().sum()),
        proxies_at_star,
    })
}

/// Observable values helper for callers holding raw vectors.
pub fn observable_from(values: &[f64], model: &GeneratorModel) -> Result<Observable> {
    Observable::new(DVector::from_row_slice(values), model)
}
