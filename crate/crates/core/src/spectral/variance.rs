use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{
    decompose, fractional_power_apply, pi_norm, potential_apply, require_centered,
    resolvent_apply, weighted_dot, SpectralData,
};
use crate::chain_model::{GeneratorModel, Observable};
use crate::error::{FcltError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormulaUsed {
    #[serde(rename = "range-inverse")]
    RangeInverse,
    #[serde(rename = "fractional-power")]
    FractionalPower,
}

/// Diffusion coefficient of `f` together with the `sigma^2_lambda` approximation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub sigma2: f64,
    /// `(lambda, sigma^2_lambda)` with lambda decreasing.
    #[serde(rename = "curve")]
    pub sigma2_lambda_curve: Vec<(f64, f64)>,
    #[serde(rename = "formula")]
    pub formula_used: FormulaUsed,
}

impl VarianceReport {
    /// True when `sigma^2_lambda` never decreases as lambda decreases and never exceeds `sigma2`.
    pub fn curve_is_monotone(&self, rel_tol: f64) -> bool {
        let slack = rel_tol * self.sigma2.abs().max(f64::MIN_POSITIVE);
        self.sigma2_lambda_curve
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 - slack)
            && self.sigma2_lambda_curve.iter().all(|&(_, s)| s <= self.sigma2 + slack)
    }
}

const CROSS_CHECK_TOL: f64 = 1e-9;

fn require_observable_centered(f: &Observable, model: &GeneratorModel) -> Result<()> {
    if !f.is_centered() {
        return Err(FcltError::NotCentered {
            component: model.pi().dot(f.values()),
        });
    }
    require_centered(f.values(), model)
}

/// Smallest nonzero `-Re(mu)` over the spectrum of `Q`.
pub fn spectral_gap(model: &GeneratorModel) -> Result<f64> {
    if model.is_reversible() {
        return Ok(decompose(model)?.gap_min());
    }
    let scale = model.max_exit_rate().max(1.0);
    let eigs = model.q().clone().complex_eigenvalues();
    let mut rates: Vec<f64> = eigs.iter().map(|z| -z.re).collect();
    rates.sort_by(f64::total_cmp);
    rates
        .into_iter()
        .skip(1)
        .find(|&r| r > 1e-9 * scale)
        .ok_or_else(|| FcltError::SpectralFailure("no nonzero eigenvalue".into()))
}

/// `lambda_j = s_min 10^{-j/2}`, `j = 0..=16`.
pub fn default_lambda_grid(gap_min: f64) -> Vec<f64> {
    (0..=16).map(|j| gap_min * 10f64.powf(-(j as f64) / 2.0)).collect()
}

/// `sigma^2 = 2 <-Q^{-1} f, f>_pi = -2 <g, Q g>_pi` where `Q g = f`, `<g,1>_pi = 0`.
///
/// Valid for non-reversible chains; both expressions are evaluated and must agree.
pub fn sigma2_range_formula(model: &GeneratorModel, f: &Observable) -> Result<VarianceReport> {
    require_observable_centered(f, model)?;
    let potential = potential_apply(model, f.values())?;
    let pi = model.pi();
    let from_f = 2.0 * weighted_dot(&potential, f.values(), pi);
    // g = -potential, so -2 <g, Q g> = -2 <potential, Q potential>
    let q_potential = model.q() * &potential;
    let from_g = -2.0 * weighted_dot(&potential, &q_potential, pi);
    if (from_f - from_g).abs() > CROSS_CHECK_TOL * from_f.abs().max(1e-300) {
        return Err(FcltError::violation(
            "two forms of the range-inverse variance agree",
            format!("{from_f} vs {from_g}"),
        ));
    }

    let curve = if f.is_zero() {
        Vec::new()
    } else {
        let grid = default_lambda_grid(spectral_gap(model)?);
        grid.iter()
            .map(|&lambda| Ok((lambda, sigma2_lambda(model, f, lambda)?)))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(VarianceReport {
        sigma2: from_f,
        sigma2_lambda_curve: curve,
        formula_used: FormulaUsed::RangeInverse,
    })
}

/// `sigma^2 = 2 ||(-Q)^{-1/2} f||^2_pi = 2 sum_{k>=2} <f,e_k>^2_pi / s_k`.
pub fn sigma2_fractional_formula(spec: &SpectralData, f: &Observable) -> Result<VarianceReport> {
    let model = spec.model();
    require_observable_centered(f, model)?;
    let half = fractional_power_apply(spec, -0.5, f.values())?;
    let sigma2 = 2.0 * weighted_dot(&half, &half, model.pi());

    let coeffs = spec.coefficients(f.values());
    let curve = if f.is_zero() {
        Vec::new()
    } else {
        default_lambda_grid(spec.gap_min())
            .into_iter()
            .map(|lambda| {
                let s2l: f64 = spec
                    .gaps()
                    .enumerate()
                    .map(|(k, s)| 2.0 * s * coeffs[k + 1].powi(2) / (lambda + s).powi(2))
                    .sum();
                (lambda, s2l)
            })
            .collect()
    };
    Ok(VarianceReport {
        sigma2,
        sigma2_lambda_curve: curve,
        formula_used: FormulaUsed::FractionalPower,
    })
}

/// `sigma^2_lambda = 2 <-Q R_lambda f, R_lambda f>_pi`.
pub fn sigma2_lambda(model: &GeneratorModel, f: &Observable, lambda: f64) -> Result<f64> {
    require_observable_centered(f, model)?;
    let r = resolvent_apply(model, lambda, f.values())?;
    let neg_qr: DVector<f64> = -(model.q() * &r);
    Ok(2.0 * weighted_dot(&neg_qr, &r, model.pi()))
}

/// `(sqrt(lambda) ||R_lambda f||_pi, 1/2 ||(-Q)^{-1/2} f||_pi)`; the first never exceeds the second.
pub fn sqrt_lambda_bound_check(spec: &SpectralData, f: &Observable, lambda: f64) -> Result<(f64, f64)> {
    let model = spec.model();
    require_observable_centered(f, model)?;
    let r = resolvent_apply(model, lambda, f.values())?;
    let lhs = lambda.sqrt() * pi_norm(&r, model);
    let rhs = 0.5 * pi_norm(&fractional_power_apply(spec, -0.5, f.values())?, model);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::{build_birth_death, build_cycle, build_random_reversible, center};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(model: &GeneratorModel, x: &[f64]) -> Observable {
        Observable::new(DVector::from_row_slice(x), model).unwrap()
    }

    #[test]
    fn two_state_sigma2() {
        let model = build_birth_death(&[1.0], &[1.0]).unwrap();
        let spec = decompose(&model).unwrap();
        let f = obs(&model, &[1.0, -1.0]);
        let range = sigma2_range_formula(&model, &f).unwrap();
        let frac = sigma2_fractional_formula(&spec, &f).unwrap();
        assert_abs_diff_eq!(range.sigma2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(frac.sigma2, 1.0, epsilon = 1e-12);
        assert_eq!(range.formula_used, FormulaUsed::RangeInverse);
        assert!(range.curve_is_monotone(1e-12) && frac.curve_is_monotone(1e-12));
    }

    #[test]
    fn three_state_sigma2() {
        let model = build_birth_death(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let spec = decompose(&model).unwrap();
        let f = obs(&model, &[1.0, 0.0, -1.0]);
        assert_abs_diff_eq!(sigma2_range_formula(&model, &f).unwrap().sigma2, 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma2_fractional_formula(&spec, &f).unwrap().sigma2, 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma2_lambda(&model, &f, 1.0).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_observable() {
        let model = build_birth_death(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let f = obs(&model, &[0.0, 0.0, 0.0]);
        assert_eq!(sigma2_range_formula(&model, &f).unwrap().sigma2, 0.0);
        let spec = decompose(&model).unwrap();
        assert_eq!(sigma2_fractional_formula(&spec, &f).unwrap().sigma2, 0.0);
    }

    #[test]
    fn uncentered_rejected() {
        let model = build_birth_death(&[1.0], &[1.0]).unwrap();
        let f = obs(&model, &[1.0, 0.0]);
        assert!(matches!(sigma2_range_formula(&model, &f), Err(FcltError::NotCentered { .. })));
        assert!(matches!(sigma2_lambda(&model, &f, 1.0), Err(FcltError::NotCentered { .. })));
    }

    #[test]
    fn single_mode_formula() {
        let model = build_random_reversible(12, 0.4, 21).unwrap();
        let spec = decompose(&model).unwrap();
        let e2: DVector<f64> = spec.eigenvectors().column(1).into();
        let f = Observable::new(e2, &model).unwrap();
        let s2 = sigma2_fractional_formula(&spec, &f).unwrap().sigma2;
        assert_abs_diff_eq!(s2, 2.0 / spec.gap_min(), epsilon = 1e-10 * s2);
    }

    #[test]
    fn sigma2_lambda_two_state_closed_form() {
        let model = build_birth_death(&[1.0], &[1.0]).unwrap();
        let f = obs(&model, &[1.0, -1.0]);
        assert_abs_diff_eq!(sigma2_lambda(&model, &f, 2.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma2_lambda(&model, &f, 1e-9).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn sqrt_lambda_bound() {
        let model = build_birth_death(&[1.0], &[1.0]).unwrap();
        let spec = decompose(&model).unwrap();
        let f = obs(&model, &[1.0, -1.0]);
        let (lhs, rhs) = sqrt_lambda_bound_check(&spec, &f, 2.0).unwrap();
        assert_abs_diff_eq!(lhs, 2f64.sqrt() / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs, 0.5 / 2f64.sqrt(), epsilon = 1e-15);
        let (lhs, rhs) = sqrt_lambda_bound_check(&spec, &f, 1e-12).unwrap();
        assert!(lhs < 1e-6 && lhs <= rhs);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..200 {
            let m = rng.random_range(2..25);
            let model = build_random_reversible(m, 0.4, trial).unwrap();
            let spec = decompose(&model).unwrap();
            let raw = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let Ok(f) = center(&raw, &model) else { continue };
            let lambda = 10f64.powf(rng.random_range(-4.0..3.0));
            let (lhs, rhs) = sqrt_lambda_bound_check(&spec, &f, lambda).unwrap();
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn non_reversible_range_formula() {
        // cycle of length 3: potential of f computed independently via the 3x3
        // fundamental matrix Z = (pi 1^T - Q)^{-1}; sigma^2 = 2 <Z f, f>_pi
        let model = build_cycle(3).unwrap();
        let f = obs(&model, &[1.0, 0.0, -1.0]);
        let report = sigma2_range_formula(&model, &f).unwrap();
        let m = 3;
        let pi = model.pi().clone();
        let mut a = -model.q().clone();
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] += pi[j];
            }
        }
        let z = a.try_inverse().unwrap();
        let oracle = 2.0 * weighted_dot(&(z * f.values()), f.values(), &pi);
        assert_abs_diff_eq!(report.sigma2, oracle, epsilon = 1e-12);
        assert!(report.sigma2 > 0.0);
    }

    #[test]
    fn cross_formula_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for seed in 0..30 {
            let m = rng.random_range(2..40);
            let model = build_random_reversible(m, 0.3, seed).unwrap();
            let spec = decompose(&model).unwrap();
            let raw = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let f = center(&raw, &model).unwrap();
            let a = sigma2_range_formula(&model, &f).unwrap();
            let b = sigma2_fractional_formula(&spec, &f).unwrap();
            assert_abs_diff_eq!(a.sigma2, b.sigma2, epsilon = 1e-9 * b.sigma2);
            for (x, y) in a.sigma2_lambda_curve.iter().zip(&b.sigma2_lambda_curve) {
                assert_abs_diff_eq!(x.1, y.1, epsilon = 1e-9 * b.sigma2);
            }
            assert!(a.curve_is_monotone(1e-12));
        }
    }

    #[test]
    fn report_json_shape() {
        let report = VarianceReport {
            sigma2: 1.0,
            sigma2_lambda_curve: vec![(2.0, 0.25)],
            formula_used: FormulaUsed::RangeInverse,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(json, r#"{"sigma2":1.0,"curve":[[2.0,0.25]],"formula":"range-inverse"}"#);
    }
}
