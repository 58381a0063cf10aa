//! Stationary trajectories and exact integration of additive functionals along them.
//!
//! Paths are generated by the jump-chain construction: exponential holding
//! times with rate `-Q_ii`, jumps to `j` with probability `Q_ij / -Q_ii`, and
//! the initial state drawn from `pi`. Every functional of a path is
//! piecewise linear in time, so all integrals and suprema are computed exactly
//! from the jump times.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::chain_model::{GeneratorModel, Observable};
use crate::error::{FcltError, Result};
use crate::spectral::resolvent_apply;

/// One continuous-time path on `[0, horizon]`.
///
/// `states[k]` is occupied on `[jump_times[k-1], jump_times[k])` with
/// `jump_times[-1] = 0` and `jump_times[len] = horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    jump_times: Vec<f64>,
    states: Vec<usize>,
    horizon: f64,
}

impl TrajectorySample {
    /// Builds a path from explicit pieces, checking the ordering invariants.
    pub fn from_parts(jump_times: Vec<f64>, states: Vec<usize>, horizon: f64) -> Result<Self> {
        if states.len() != jump_times.len() + 1 {
            return Err(FcltError::invalid("need exactly one more state than jump times"));
        }
        let increasing = jump_times.windows(2).all(|w| w[0] < w[1]);
        let inside = jump_times.first().is_none_or(|&t| t > 0.0)
            && jump_times.last().is_none_or(|&t| t < horizon);
        if !increasing || !inside {
            return Err(FcltError::invalid("jump times must increase strictly inside (0, horizon)"));
        }
        if states.windows(2).any(|w| w[0] == w[1]) {
            return Err(FcltError::invalid("consecutive states must differ"));
        }
        Ok(TrajectorySample {
            jump_times,
            states,
            horizon,
        })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Holding intervals `(start, end, state)` covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.states.iter().enumerate().map(move |(k, &state)| {
            let start = if k == 0 { 0.0 } else { self.jump_times[k - 1] };
            let end = self.jump_times.get(k).copied().unwrap_or(self.horizon);
            (start, end, state)
        })
    }

    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        let k = self.jump_times.partition_point(|&s| s <= t);
        Ok(self.states[k])
    }

    /// Fraction of `[0, horizon]` spent in each of `m` states.
    pub fn occupation_fractions(&self, m: usize) -> Vec<f64> {
        let mut occupation = vec![0.0; m];
        for (start, end, state) in self.segments() {
            occupation[state] += end - start;
        }
        occupation.iter_mut().for_each(|x| *x /= self.horizon);
        occupation
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t > self.horizon {
            return Err(FcltError::HorizonExceeded {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

/// Precomputed jump-chain tables for repeated path sampling from one model.
#[derive(Debug, Clone)]
pub struct PathSampler {
    initial: Vec<f64>,
    exit_rates: Vec<f64>,
    /// Per state: `(target, cumulative probability)`.
    jumps: Vec<Vec<(usize, f64)>>,
}

impl PathSampler {
    pub fn new(model: &GeneratorModel) -> Result<Self> {
        if !model.is_ergodic() {
            return Err(FcltError::NotErgodic("cannot sample a stationary path".into()));
        }
        let m = model.size();
        let q = model.q();
        let mut acc = 0.0;
        let initial = model
            .pi()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let mut exit_rates = Vec::with_capacity(m);
        let mut jumps = Vec::with_capacity(m);
        for i in 0..m {
            let rate = -q[(i, i)];
            let mut acc = 0.0;
            let mut targets = Vec::new();
            for j in (0..m).filter(|&j| j != i && q[(i, j)] > 0.0) {
                acc += q[(i, j)] / rate;
                targets.push((j, acc));
            }
            exit_rates.push(rate);
            jumps.push(targets);
        }
        Ok(PathSampler {
            initial,
            exit_rates,
            jumps,
        })
    }

    fn pick(cumulative: impl Iterator<Item = f64> + Clone, u: f64) -> usize {
        let total = cumulative.clone().last().unwrap_or(1.0);
        let target = u * total;
        cumulative
            .enumerate()
            .find(|&(_, c)| target < c)
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    /// Samples a stationary path on `[0, horizon]` from the stream `(seed, stream_id)`.
    pub fn sample(&self, horizon: f64, seed: u64, stream_id: u64) -> Result<TrajectorySample> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(FcltError::invalid(format!("horizon must be positive, got {horizon}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);

        let u: f64 = rng.random();
        let mut state = Self::pick(self.initial.iter().copied(), u);
        let mut states = vec![state];
        let mut jump_times = Vec::new();
        let mut t = 0.0;
        loop {
            let rate = self.exit_rates[state];
            if rate <= 0.0 {
                break;
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
            t += hold;
            if t >= horizon {
                break;
            }
            let targets = &self.jumps[state];
            let u: f64 = rng.random();
            let k = Self::pick(targets.iter().map(|&(_, c)| c), u);
            state = targets[k].0;
            jump_times.push(t);
            states.push(state);
        }
        Ok(TrajectorySample {
            jump_times,
            states,
            horizon,
        })
    }
}

/// Convenience wrapper building a [`PathSampler`] for a single path.
pub fn sample_path(
    model: &GeneratorModel,
    horizon: f64,
    rng_seed: u64,
    stream_id: u64,
) -> Result<TrajectorySample> {
    PathSampler::new(model)?.sample(horizon, rng_seed, stream_id)
}

/// `int_0^t f(X(s)) ds`, exactly.
pub fn additive_functional(path: &TrajectorySample, f: &DVector<f64>, t: f64) -> Result<f64> {
    path.check_time(t)?;
    let mut total = 0.0;
    for (start, end, state) in path.segments() {
        if start >= t {
            break;
        }
        total += f[state] * (end.min(t) - start);
    }
    Ok(total)
}

/// The three integrands of the decomposition, computed once per `(f, lambda)`.
#[derive(Debug, Clone)]
pub struct DecompositionVectors {
    pub lambda: f64,
    pub f: DVector<f64>,
    /// `lambda R_lambda f`
    pub scaled_resolvent: DVector<f64>,
    /// `(-Q) R_lambda f`
    pub generator_part: DVector<f64>,
}

impl DecompositionVectors {
    pub fn new(model: &GeneratorModel, f: &Observable, lambda: f64) -> Result<Self> {
        let r = resolvent_apply(model, lambda, f.values())?;
        Ok(DecompositionVectors {
            lambda,
            f: f.values().clone(),
            scaled_resolvent: &r * lambda,
            generator_part: -(model.q() * &r),
        })
    }
}

/// `I_n`, `Lambda_n`, `A_n` evaluated on a time grid for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPaths {
    pub n: u64,
    pub lambda_used: f64,
    pub t_grid: Vec<f64>,
    pub i_vals: Vec<f64>,
    pub lambda_vals: Vec<f64>,
    pub a_vals: Vec<f64>,
    /// `sup_{0 <= t <= max t_grid} |Lambda_n(t)|`, over every jump time in the window.
    pub lambda_sup: f64,
}

impl ScaledPaths {
    /// `max_t |I - Lambda - A|`.
    pub fn max_identity_residual(&self) -> f64 {
        self.i_vals
            .iter()
            .zip(&self.lambda_vals)
            .zip(&self.a_vals)
            .map(|((i, l), a)| (i - l - a).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `t,I,Lambda,A` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,I,Lambda,A")?;
        for k in 0..self.t_grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.t_grid[k], self.i_vals[k], self.lambda_vals[k], self.a_vals[k]
            )?;
        }
        Ok(())
    }
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(FcltError::invalid("time grid is empty"));
    }
    if t_grid.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(FcltError::invalid("time grid must be finite, nonnegative and nondecreasing"));
    }
    Ok(())
}

/// Rescaled decomposition `I_n = Lambda_n + A_n` along `path`.
pub fn scaled_decomposition(
    path: &TrajectorySample,
    model: &GeneratorModel,
    f: &Observable,
    n: u64,
    lambda: f64,
    t_grid: &[f64],
) -> Result<ScaledPaths> {
    let vectors = DecompositionVectors::new(model, f, lambda)?;
    scaled_decomposition_with(path, &vectors, n, t_grid)
}

/// As [`scaled_decomposition`] with the integrand vectors already computed.
pub fn scaled_decomposition_with(
    path: &TrajectorySample,
    vectors: &DecompositionVectors,
    n: u64,
    t_grid: &[f64],
) -> Result<ScaledPaths> {
    validate_grid(t_grid)?;
    if n == 0 {
        return Err(FcltError::invalid("scaling n must be positive"));
    }
    let nf = n as f64;
    let window = nf * t_grid[t_grid.len() - 1];
    if window > path.horizon {
        return Err(FcltError::HorizonExceeded {
            t: window,
            horizon: path.horizon,
        });
    }
    let integrands = [&vectors.f, &vectors.scaled_resolvent, &vectors.generator_part];
    let mut cumulative = [0.0f64; 3];
    let mut values = [
        Vec::with_capacity(t_grid.len()),
        Vec::with_capacity(t_grid.len()),
        Vec::with_capacity(t_grid.len()),
    ];
    let mut sup = 0.0f64;
    let mut next = 0usize;

    for (start, end, state) in path.segments() {
        let end = end.min(window);
        while next < t_grid.len() && nf * t_grid[next] <= end {
            let dt = nf * t_grid[next] - start;
            for c in 0..3 {
                values[c].push(cumulative[c] + integrands[c][state] * dt);
            }
            next += 1;
        }
        for c in 0..3 {
            cumulative[c] += integrands[c][state] * (end - start);
        }
        sup = sup.max(cumulative[1].abs());
        if end >= window {
            break;
        }
    }

    let scale = nf.sqrt().recip();
    let [i_vals, lambda_vals, a_vals] = values.map(|v| v.into_iter().map(|x| x * scale).collect::<Vec<_>>());
    Ok(ScaledPaths {
        n,
        lambda_used: vectors.lambda,
        t_grid: t_grid.to_vec(),
        i_vals,
        lambda_vals,
        a_vals,
        lambda_sup: sup * scale,
    })
}

/// `lambda_n = c n^{-exponent}` with `exponent > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub exponent: f64,
    pub c: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { exponent: 1.5, c: 1.0 }
    }
}

impl Schedule {
    pub fn new(exponent: f64, c: f64) -> Result<Self> {
        lambda_schedule(1, exponent, c)?;
        Ok(Schedule { exponent, c })
    }

    /// Skips the `exponent > 1` check. Only for negative controls that need a
    /// schedule violating `lambda_n = o(1/n)`.
    pub fn unchecked(exponent: f64, c: f64) -> Self {
        Schedule { exponent, c }
    }

    pub fn validate(&self) -> Result<()> {
        lambda_schedule(1, self.exponent, self.c).map(|_| ())
    }

    pub fn lambda_at(&self, n: u64) -> f64 {
        self.c * (n as f64).powf(-self.exponent)
    }
}

/// `c n^{-exponent}`; fails unless `exponent > 1`.
pub fn lambda_schedule(n: u64, exponent: f64, c: f64) -> Result<f64> {
    if !(exponent > 1.0) {
        return Err(FcltError::ScheduleNotSmallO { exponent });
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(FcltError::invalid(format!("schedule constant must be positive, got {c}")));
    }
    if n == 0 {
        return Err(FcltError::invalid("n must be positive"));
    }
    Ok(c * (n as f64).powf(-exponent))
}

/// `(Q g)(i) = sum_{j != i} Q_ij (g_j - g_i)`; annihilates constants exactly.
fn generator_difference_form(model: &GeneratorModel, g: &DVector<f64>) -> DVector<f64> {
    let q = model.q();
    DVector::from_fn(g.len(), |i, _| {
        (0..g.len())
            .filter(|&j| j != i)
            .map(|j| q[(i, j)] * (g[j] - g[i]))
            .sum()
    })
}

/// Dynkin martingale `M(t) = g(X_t) - g(X_0) - int_0^t Q g(X_s) ds` on a time grid.
pub fn dynkin_martingale(
    path: &TrajectorySample,
    model: &GeneratorModel,
    g: &DVector<f64>,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    if g.len() != model.size() {
        return Err(FcltError::DimensionMismatch {
            expected: model.size(),
            got: g.len(),
        });
    }
    let qg = generator_difference_form(model, g);
    let start = g[path.states[0]];
    t_grid
        .iter()
        .map(|&t| {
            let now = g[path.state_at(t)?];
            Ok(now - start - additive_functional(path, &qg, t)?)
        })
        .collect()
}

/// Sample mean, variance and standard error of a set of replicate values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl MomentSummary {
    pub fn from_samples(t: f64, samples: &[f64]) -> Self {
        let r = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / r;
        let variance = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        MomentSummary {
            t,
            mean,
            variance,
            std_error: (variance / r).sqrt(),
        }
    }

    /// `|mean| <= 3 SE` (exact zero counts as within).
    pub fn mean_within_three_se(&self) -> bool {
        self.mean.abs() <= 3.0 * self.std_error
    }
}

/// Replicate statistics of the Dynkin martingale at each grid time.
pub fn dynkin_martingale_check(
    paths: &[TrajectorySample],
    model: &GeneratorModel,
    g: &DVector<f64>,
    t_grid: &[f64],
) -> Result<Vec<MomentSummary>> {
    if paths.is_empty() {
        return Err(FcltError::invalid("no replicate paths supplied"));
    }
    let per_path = paths
        .iter()
        .map(|p| dynkin_martingale(p, model, g, t_grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let samples: Vec<f64> = per_path.iter().map(|m| m[k]).collect();
            MomentSummary::from_samples(t, &samples)
        })
        .collect())
}

/// `t_points` equally spaced points on `[0, 1]`.
pub fn unit_grid(t_points: usize) -> Vec<f64> {
    match t_points {
        0 => Vec::new(),
        1 => vec![1.0],
        k => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
    }
}
