use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{decompose, pi_norm, require_centered, SpectralData};
use crate::chain_model::GeneratorModel;
use crate::error::{FcltError, Result};
use crate::linalg::solve_bordered;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(FcltError::invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    Ok(())
}

fn check_len(f: &DVector<f64>, model: &GeneratorModel) -> Result<()> {
    if f.len() != model.size() {
        return Err(FcltError::DimensionMismatch {
            expected: model.size(),
            got: f.len(),
        });
    }
    Ok(())
}

fn shifted(model: &GeneratorModel, lambda: f64) -> DMatrix<f64> {
    let m = model.size();
    DMatrix::<f64>::identity(m, m) * lambda - model.q()
}

/// `R_lambda f = (lambda I - Q)^{-1} f` by LU with partial pivoting.
pub fn resolvent_apply(model: &GeneratorModel, lambda: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    check_len(f, model)?;
    shifted(model, lambda)
        .lu()
        .solve(f)
        .ok_or(FcltError::SingularSolve { lambda })
}

/// `R_lambda` as a dense matrix.
fn resolvent_matrix(model: &GeneratorModel, lambda: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    shifted(model, lambda)
        .try_inverse()
        .ok_or(FcltError::SingularSolve { lambda })
}

/// `|| lambda R_lambda f + (-Q) R_lambda f - f ||_pi`.
pub fn frep_residual(model: &GeneratorModel, lambda: f64, f: &DVector<f64>) -> Result<f64> {
    let r = resolvent_apply(model, lambda, f)?;
    let recombined = &r * lambda - model.q() * &r;
    Ok(pi_norm(&(recombined - f), model))
}

/// `|| R_lambda f - R_mu f - (mu - lambda) R_lambda R_mu f ||_pi`.
pub fn resolvent_identity_residual(
    model: &GeneratorModel,
    lambda: f64,
    mu: f64,
    f: &DVector<f64>,
) -> Result<f64> {
    check_lambda(mu)?;
    let r_lambda = resolvent_apply(model, lambda, f)?;
    let r_mu = resolvent_apply(model, mu, f)?;
    let product = resolvent_apply(model, lambda, &r_mu)?;
    let diff = &r_lambda - &r_mu - product * (mu - lambda);
    Ok(pi_norm(&diff, model))
}

/// `(||lambda R_lambda||_op, ||Q R_lambda||_op)` in the `pi`-weighted norm.
///
/// Reversible models use the spectral formulas; others fall back to power iteration.
pub fn operator_norm_bounds(model: &GeneratorModel, lambda: f64) -> Result<(f64, f64)> {
    if model.is_reversible() {
        operator_norm_bounds_spectral(&decompose(model)?, lambda)
    } else {
        operator_norm_bounds_power(model, lambda)
    }
}

/// `max_k lambda / (lambda + s_k)` and `max_k s_k / (lambda + s_k)`, with `s_1 = 0` included.
pub fn operator_norm_bounds_spectral(spec: &SpectralData, lambda: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    let gaps = std::iter::once(0.0).chain(spec.gaps());
    let (mut scaled, mut generator) = (0.0f64, 0.0f64);
    for s in gaps {
        scaled = scaled.max(lambda / (lambda + s));
        generator = generator.max(s / (lambda + s));
    }
    Ok((scaled, generator))
}

/// Same norms by power iteration on `M^T M`, `M = D^{1/2} B D^{-1/2}`.
pub fn operator_norm_bounds_power(model: &GeneratorModel, lambda: f64) -> Result<(f64, f64)> {
    let r = resolvent_matrix(model, lambda)?;
    let scaled = &r * lambda;
    let generator = model.q() * &r;
    Ok((
        pi_operator_norm(&scaled, model.pi()),
        pi_operator_norm(&generator, model.pi()),
    ))
}

fn pi_operator_norm(b: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    let m = b.nrows();
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let sym = DMatrix::from_fn(m, m, |i, j| sqrt_pi[i] * b[(i, j)] / sqrt_pi[j]);
    let gram = sym.transpose() * &sym;

    // Power iteration with repeated squaring: after k squarings the iterate is
    // G^(2^k) applied to every basis vector, so clustered top eigenvalues of the
    // Gram matrix still separate quickly.
    let mut power = gram.clone();
    for _ in 0..40 {
        let norm = power.norm();
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        power = &power * &power;
    }
    let column = (0..m)
        .max_by(|&a, &b| power.column(a).norm().total_cmp(&power.column(b).norm()))
        .unwrap_or(0);
    let mut x: DVector<f64> = power.column(column).into();
    let norm = x.norm();
    if norm == 0.0 {
        return 0.0;
    }
    x /= norm;
    let mut estimate = x.dot(&(&gram * &x));
    for _ in 0..50 {
        let y = &gram * &x;
        let norm = y.norm();
        if norm == 0.0 {
            break;
        }
        x = y / norm;
        let next = x.dot(&(&gram * &x));
        let done = (next - estimate).abs() <= 1e-15 * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate.max(0.0).sqrt()
}

/// The potential operator `(-Q)^{-1}` on `1-perp`: solves `{-Q g = f, <g,1>_pi = 0}`.
pub fn potential_apply(model: &GeneratorModel, f: &DVector<f64>) -> Result<DVector<f64>> {
    require_centered(f, model)?;
    let neg_q = -model.q();
    solve_bordered(&neg_q, model.pi(), f, 0.0).ok_or(FcltError::SingularSolve { lambda: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YosidaRow {
    pub lambda: f64,
    /// `||R_lambda g - (-Q)^{-1} g||_pi`
    pub residual: f64,
    /// `||lambda R_lambda g||_pi`
    pub scaled_norm: f64,
}

/// Convergence of `R_lambda g` to the potential `(-Q)^{-1} g` along a decreasing sequence.
pub fn yosida_potential_residual(
    model: &GeneratorModel,
    g: &DVector<f64>,
    lambda_sequence: &[f64],
) -> Result<Vec<YosidaRow>> {
    require_centered(g, model)?;
    if lambda_sequence.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(FcltError::invalid("lambda sequence must be strictly decreasing"));
    }
    let limit = potential_apply(model, g)?;
    lambda_sequence
        .iter()
        .map(|&lambda| {
            let r = resolvent_apply(model, lambda, g)?;
            Ok(YosidaRow {
                lambda,
                residual: pi_norm(&(&r - &limit), model),
                scaled_norm: pi_norm(&r, model) * lambda,
            })
        })
        .collect()
}

/// `||lambda R_lambda g||_pi` for each lambda, with no centering requirement.
pub fn scaled_resolvent_norms(model: &GeneratorModel, g: &DVector<f64>, lambdas: &[f64]) -> Result<Vec<f64>> {
    lambdas
        .iter()
        .map(|&lambda| Ok(pi_norm(&resolvent_apply(model, lambda, g)?, model) * lambda))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::{build_birth_death, build_cycle, build_random_reversible};
    use crate::spectral::fractional_power_apply;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn two_state() -> GeneratorModel {
        build_birth_death(&[1.0], &[1.0]).unwrap()
    }

    fn three_state() -> GeneratorModel {
        build_birth_death(&[1.0, 1.0], &[1.0, 1.0]).unwrap()
    }

    fn random_centered(model: &GeneratorModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let raw = DVector::from_fn(model.size(), |_, _| rng.random_range(-1.0..1.0));
        let mean = model.pi().dot(&raw);
        raw.add_scalar(-mean)
    }

    #[test]
    fn resolvent_examples() {
        let out = resolvent_apply(&two_state(), 2.0, &v(&[1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(out[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -0.25, epsilon = 1e-15);

        let cyc = build_cycle(4).unwrap();
        let out = resolvent_apply(&cyc, 1.0, &DVector::from_element(4, 1.0)).unwrap();
        assert!(out.iter().all(|x| (x - 1.0).abs() < 1e-14));

        // 3x3 oracle: (I - Q) x = (1,0,-1) with I - Q = [[2,-1,0],[-1,3,-1],[0,-1,2]]
        let out = resolvent_apply(&three_state(), 1.0, &v(&[1.0, 0.0, -1.0])).unwrap();
        let expected = [0.5, 0.0, -0.5];
        for i in 0..3 {
            assert_abs_diff_eq!(out[i], expected[i], epsilon = 1e-15);
        }
        assert!(resolvent_apply(&three_state(), 0.0, &v(&[1.0, 0.0, -1.0])).is_err());
    }

    #[test]
    fn frep_examples() {
        assert_eq!(frep_residual(&three_state(), 0.7, &DVector::zeros(3)).unwrap(), 0.0);
        let f = v(&[1.0, -1.0]);
        let r = resolvent_apply(&two_state(), 2.0, &f).unwrap();
        let scaled = &r * 2.0;
        let gen = -(two_state().q() * &r);
        for i in 0..2 {
            assert_abs_diff_eq!(scaled[i], f[i] / 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(gen[i], f[i] / 2.0, epsilon = 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for model in [build_cycle(5).unwrap(), build_random_reversible(25, 0.2, 9).unwrap()] {
            for _ in 0..20 {
                let f = DVector::from_fn(model.size(), |_, _| rng.random_range(-1.0..1.0));
                let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
                assert!(frep_residual(&model, lambda, &f).unwrap() <= 1e-10 * pi_norm(&f, &model));
            }
        }
    }

    #[test]
    fn resolvent_identity_examples() {
        let f = v(&[1.0, -1.0]);
        assert!(resolvent_identity_residual(&two_state(), 1.3, 1.3, &f).unwrap() <= 1e-12);
        // R_1 f - R_3 f = f/3 - f/5 = 2f/15 = (3 - 1) R_1 R_3 f
        let lhs = resolvent_apply(&two_state(), 1.0, &f).unwrap() - resolvent_apply(&two_state(), 3.0, &f).unwrap();
        assert_abs_diff_eq!(lhs[0], 2.0 / 15.0, epsilon = 1e-15);
        assert!(resolvent_identity_residual(&two_state(), 1.0, 3.0, &f).unwrap() <= 1e-15);

        let model = build_random_reversible(50, 0.2, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let f = DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
            let lambda = 10f64.powf(rng.random_range(-2.0..2.0));
            let mu = 10f64.powf(rng.random_range(-2.0..2.0));
            // oracle: direct solves with the dense inverse
            let inv_l = resolvent_matrix(&model, lambda).unwrap();
            let inv_m = resolvent_matrix(&model, mu).unwrap();
            let oracle = pi_norm(&(&inv_l * &f - &inv_m * &f - &inv_l * (&inv_m * &f) * (mu - lambda)), &model);
            let residual = resolvent_identity_residual(&model, lambda, mu, &f).unwrap();
            assert!(residual <= 1e-9 * pi_norm(&f, &model), "{residual}");
            assert!(oracle <= 1e-9 * pi_norm(&f, &model), "{oracle}");
        }
    }

    #[test]
    fn operator_norm_examples() {
        let (a, b) = operator_norm_bounds(&two_state(), 2.0).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-15);
        let (a, b) = operator_norm_bounds(&three_state(), 1e9).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        assert!(b < 1e-8);

        let model = build_random_reversible(30, 0.3, 1).unwrap();
        let spec = decompose(&model).unwrap();
        let (a, b) = operator_norm_bounds_spectral(&spec, 0.01).unwrap();
        let (pa, pb) = operator_norm_bounds_power(&model, 0.01).unwrap();
        assert!(a <= 1.0 && b <= 1.0);
        assert_abs_diff_eq!(a, pa, epsilon = 1e-8);
        assert_abs_diff_eq!(b, pb, epsilon = 1e-8);

        // non-reversible: still contractions in the pi norm
        let (a, b) = operator_norm_bounds(&build_cycle(5).unwrap(), 0.3).unwrap();
        assert!(a <= 1.0 + 1e-10 && b <= 1.0 + 1e-10, "{a} {b}");
    }

    #[test]
    fn yosida_single_mode_and_constants() {
        let model = three_state();
        let g = v(&[1.0, 0.0, -1.0]);
        let lambdas = [1.0, 0.1, 0.01];
        let rows = yosida_potential_residual(&model, &g, &lambdas).unwrap();
        let norm = pi_norm(&g, &model);
        for row in &rows {
            let expected = (1.0 / (row.lambda + 1.0) - 1.0).abs() * norm;
            assert_abs_diff_eq!(row.residual, expected, epsilon = 1e-13);
        }
        assert!(matches!(
            yosida_potential_residual(&model, &DVector::from_element(3, 1.0), &lambdas),
            Err(FcltError::NotCentered { .. })
        ));
        assert!(yosida_potential_residual(&model, &g, &[0.1, 1.0]).is_err());
        for n in scaled_resolvent_norms(&model, &DVector::from_element(3, 1.0), &[1.0, 1e-3, 1e-6]).unwrap() {
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn yosida_random_model_decays() {
        let model = build_random_reversible(30, 0.3, 4).unwrap();
        let spec = decompose(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_centered(&model, &mut rng);
        let lambdas: Vec<f64> = (0..=6).map(|k| 10f64.powi(-k)).collect();
        let rows = yosida_potential_residual(&model, &g, &lambdas).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].residual <= w[0].residual);
            assert!(w[1].scaled_norm <= w[0].scaled_norm);
        }
        assert!(rows.last().unwrap().residual <= 1e-5);

        // the bordered solve against the spectral pseudo-inverse
        let via_spectrum = fractional_power_apply(&spec, -1.0, &g).unwrap();
        let via_solve = potential_apply(&model, &g).unwrap();
        assert!(pi_norm(&(via_spectrum - via_solve), &model) <= 1e-10);
    }
}
