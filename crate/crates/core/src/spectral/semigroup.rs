use nalgebra::{DMatrix, DVector};

use super::SpectralData;
use crate::chain_model::GeneratorModel;
use crate::error::{FcltError, Result};

/// Poisson tail mass dropped per uniformization step.
const POISSON_TAIL: f64 = 1e-12;
/// Largest `Lambda* tau` handled in one step; keeps `exp(-Lambda* tau)` far from underflow.
const MAX_STEP_MASS: f64 = 32.0;

/// `e^{tQ} B` by uniformization: `sum_k Poisson(Lambda* t; k) P^k B` with `P = I + Q / Lambda*`.
fn uniformize(model: &GeneratorModel, t: f64, mut block: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(FcltError::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    let rate = model.max_exit_rate();
    if t == 0.0 || rate == 0.0 {
        return Ok(block);
    }
    let m = model.size();
    let jump = DMatrix::<f64>::identity(m, m) + model.q() / rate;

    let steps = (rate * t / MAX_STEP_MASS).ceil().max(1.0) as usize;
    let mass = rate * t / steps as f64;
    for _ in 0..steps {
        let mut weight = (-mass).exp();
        let mut cumulative = weight;
        let mut term = block.clone();
        let mut acc = &term * weight;
        let mut k = 0usize;
        while 1.0 - cumulative > POISSON_TAIL {
            k += 1;
            term = &jump * term;
            weight *= mass / k as f64;
            cumulative += weight;
            acc += &term * weight;
            if k > 10_000 {
                break;
            }
        }
        block = acc;
    }
    Ok(block)
}

/// `T_t f = e^{tQ} f` by uniformization (any generator).
pub fn semigroup_apply(model: &GeneratorModel, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    if f.len() != model.size() {
        return Err(FcltError::DimensionMismatch {
            expected: model.size(),
            got: f.len(),
        });
    }
    let out = uniformize(model, t, DMatrix::from_column_slice(f.len(), 1, f.as_slice()))?;
    Ok(out.column(0).into())
}

/// `e^{tQ} f = <f,1>_pi 1 + sum_{k>=2} e^{-s_k t} <f,e_k>_pi e_k`.
pub fn semigroup_apply_spectral(spec: &SpectralData, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return Err(FcltError::invalid(format!("time must be >= 0, got {t}")));
    }
    let mean = spec.model().pi().dot(f);
    Ok(spec.apply_function(f, |s| (-s * t).exp()).add_scalar(mean))
}

/// Transition kernel `p(t; x, y)` as the matrix `e^{tQ}`.
pub fn transition_matrix(model: &GeneratorModel, t: f64) -> Result<DMatrix<f64>> {
    let m = model.size();
    uniformize(model, t, DMatrix::identity(m, m))
}

/// `curve[x][j] = 1/2 sum_y |p(t_j; x, y) - pi_y|`.
pub fn tv_convergence_curve(model: &GeneratorModel, t_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    if !model.is_ergodic() {
        return Err(FcltError::NotErgodic("total-variation curve needs an ergodic model".into()));
    }
    let m = model.size();
    let mut curve = vec![Vec::with_capacity(t_grid.len()); m];
    for &t in t_grid {
        let kernel = transition_matrix(model, t)?;
        for (x, row) in curve.iter_mut().enumerate() {
            let tv: f64 = (0..m).map(|y| (kernel[(x, y)] - model.pi()[y]).abs()).sum();
            row.push(0.5 * tv);
        }
    }
    Ok(curve)
}
