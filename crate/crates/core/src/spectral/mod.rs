//! Operator calculus on the centered subspace of `L^2(pi)`.
//!
//! Resolvents and the potential operator go through dense linear solves and work
//! for any ergodic generator. Reversible generators are self-adjoint in the
//! `pi`-weighted inner product; for those, [`decompose`] gives a spectral
//! representation used for fractional powers and as an independent route for
//! everything the solves compute.

mod resolvent;
mod semigroup;
mod variance;

pub use resolvent::{
    frep_residual, operator_norm_bounds, operator_norm_bounds_power, operator_norm_bounds_spectral,
    potential_apply, resolvent_apply, resolvent_identity_residual, scaled_resolvent_norms,
    yosida_potential_residual, YosidaRow,
};
pub use semigroup::{
    semigroup_apply, semigroup_apply_spectral, transition_matrix, tv_convergence_curve,
};
pub use variance::{
    default_lambda_grid, sigma2_fractional_formula, sigma2_lambda, sigma2_range_formula,
    spectral_gap, sqrt_lambda_bound_check, FormulaUsed, VarianceReport,
};

use nalgebra::{DMatrix, DVector};

use crate::chain_model::GeneratorModel;
use crate::error::{FcltError, Result};

/// `<f, g>_pi = sum_i pi_i f_i g_i`.
pub fn pi_inner(f: &DVector<f64>, g: &DVector<f64>, model: &GeneratorModel) -> Result<f64> {
    let m = model.size();
    for len in [f.len(), g.len()] {
        if len != m {
            return Err(FcltError::DimensionMismatch { expected: m, got: len });
        }
    }
    Ok(weighted_dot(f, g, model.pi()))
}

pub(crate) fn weighted_dot(f: &DVector<f64>, g: &DVector<f64>, pi: &DVector<f64>) -> f64 {
    f.iter().zip(g.iter()).zip(pi.iter()).map(|((a, b), p)| p * a * b).sum()
}

/// `||f||_pi`.
pub fn pi_norm(f: &DVector<f64>, model: &GeneratorModel) -> f64 {
    weighted_dot(f, f, model.pi()).sqrt()
}

/// Relative size of the constant component tolerated by operations restricted to `1-perp`.
pub const CENTERING_TOL: f64 = 1e-10;

/// Fails with `NotCentered` unless `|<f,1>_pi| <= 1e-10 ||f||_pi`.
pub fn require_centered(f: &DVector<f64>, model: &GeneratorModel) -> Result<()> {
    if f.len() != model.size() {
        return Err(FcltError::DimensionMismatch {
            expected: model.size(),
            got: f.len(),
        });
    }
    let component = model.pi().dot(f);
    if component.abs() > CENTERING_TOL * pi_norm(f, model) {
        return Err(FcltError::NotCentered { component });
    }
    Ok(())
}

/// Eigen-decomposition of a reversible generator, orthonormal in `<.,.>_pi`.
///
/// `eigenvalues[0] == 0` with `eigenvectors.column(0)` the constant vector; the rest
/// are sorted descending and strictly negative.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    model: GeneratorModel,
}

impl SpectralData {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors `e_k`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn model(&self) -> &GeneratorModel {
        &self.model
    }

    /// Spectral gaps `s_k = -mu_k` for `k >= 2`, ascending.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().skip(1).map(|mu| -mu)
    }

    /// Smallest nonzero gap `s_2`.
    pub fn gap_min(&self) -> f64 {
        -self.eigenvalues[1]
    }

    pub fn gap_max(&self) -> f64 {
        -self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Mode coefficients `<f, e_k>_pi`.
    pub fn coefficients(&self, f: &DVector<f64>) -> DVector<f64> {
        let weighted = f.component_mul(self.model.pi());
        self.eigenvectors.transpose() * weighted
    }

    /// `sum_k phi(s_k) <f, e_k>_pi e_k` over the non-null modes.
    pub fn apply_function(&self, f: &DVector<f64>, phi: impl Fn(f64) -> f64) -> DVector<f64> {
        let coeffs = self.coefficients(f);
        let mut out = DVector::zeros(f.len());
        for k in 1..coeffs.len() {
            let s = -self.eigenvalues[k];
            out.axpy(phi(s) * coeffs[k], &self.eigenvectors.column(k), 1.0);
        }
        out
    }

    /// `Q f` synthesized from the spectrum.
    pub fn reconstruct(&self, f: &DVector<f64>) -> DVector<f64> {
        self.apply_function(f, |s| -s)
    }
}

/// Symmetric eigendecomposition of `D^{1/2} Q D^{-1/2}`, mapped back by `D^{-1/2}`.
pub fn decompose(model: &GeneratorModel) -> Result<SpectralData> {
    if !model.is_reversible() {
        return Err(FcltError::NotReversible {
            residual: model.detailed_balance_residual(),
        });
    }
    let m = model.size();
    let pi = model.pi();
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let q = model.q();
    let mut sym = DMatrix::from_fn(m, m, |i, j| sqrt_pi[i] * q[(i, j)] / sqrt_pi[j]);
    // detailed balance holds to 1e-10; average away the residual asymmetry
    let transposed = sym.transpose();
    sym += transposed;
    sym *= 0.5;

    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| FcltError::SpectralFailure("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = DVector::zeros(m);
    let mut eigenvectors = DMatrix::zeros(m, m);
    for (slot, &k) in order.iter().enumerate() {
        eigenvalues[slot] = eig.eigenvalues[k];
        for i in 0..m {
            eigenvectors[(i, slot)] = eig.eigenvectors[(i, k)] / sqrt_pi[i];
        }
    }

    let scale = model.max_exit_rate().max(1.0);
    if eigenvalues[0].abs() > 1e-9 * scale {
        return Err(FcltError::SpectralFailure(format!(
            "top eigenvalue {:e} is not zero",
            eigenvalues[0]
        )));
    }
    let top = eigenvectors.column(0);
    let sign = top.sum().signum();
    if top.iter().any(|&x| (sign * x - 1.0).abs() > 1e-6) {
        return Err(FcltError::SpectralFailure(
            "null eigenvector is not constant".into(),
        ));
    }
    eigenvalues[0] = 0.0;
    eigenvectors.column_mut(0).fill(1.0);
    if m > 1 && !(eigenvalues[1] < 0.0) {
        return Err(FcltError::SpectralFailure(format!(
            "second eigenvalue {:e} is not negative; null space is not spanned by constants",
            eigenvalues[1]
        )));
    }

    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        model: model.clone(),
    })
}

/// `(-Q)^alpha f = sum_{k>=2} s_k^alpha <f,e_k>_pi e_k`.
///
/// For `alpha < 0` the operator is only defined on `1-perp`, so a constant
/// component is an error. For `alpha >= 0` it is annihilated.
pub fn fractional_power_apply(spec: &SpectralData, alpha: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    if alpha < 0.0 {
        require_centered(f, &spec.model)?;
    } else if f.len() != spec.model.size() {
        return Err(FcltError::DimensionMismatch {
            expected: spec.model.size(),
            got: f.len(),
        });
    }
    Ok(spec.apply_function(f, |s| s.powf(alpha)))
}
