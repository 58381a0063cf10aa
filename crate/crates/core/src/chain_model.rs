//! Finite-state Markov generators, their invariant laws, and centered observables.
//!
//! Every constructor funnels through the same validation: sign and row-sum
//! structure of the rate matrix, strong connectivity of the rate graph, a
//! one-dimensional null space, and a left-null-vector solve for `pi`. A `pi`
//! implied by the construction (detailed-balance products, sampled weights) is
//! only ever used after it agrees with the solved one.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FcltError, Result};
use crate::linalg::{max_abs, solve_bordered};

/// Numerical tolerances used when certifying models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Identities that hold exactly in exact arithmetic (row sums, sum of pi, centering).
    pub exact: f64,
    /// Residuals of linear solves (pi Q = 0, detailed balance).
    pub solve: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-12,
            solve: 1e-10,
        }
    }
}

/// A validated rate matrix together with its invariant law and certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    states: Vec<String>,
    q: DMatrix<f64>,
    pi: DVector<f64>,
    reversible: bool,
    ergodic: bool,
    balance_residual: f64,
}

impl GeneratorModel {
    pub fn states(&self) -> &[String] {
        &self.states
    }

    /// The rate matrix `Q` (rows index the current state).
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn size(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn is_ergodic(&self) -> bool {
        self.ergodic
    }

    /// `max_{i,j} |pi_i Q_ij - pi_j Q_ji|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        self.balance_residual
    }

    /// `max_i |sum_j Q_ij|`.
    pub fn row_sum_residual(&self) -> f64 {
        self.q
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }

    /// `max_j |(pi Q)_j|`.
    pub fn stationarity_residual(&self) -> f64 {
        max_abs(&(self.q.transpose() * &self.pi))
    }

    /// Largest total exit rate `max_i (-Q_ii)`.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.size()).map(|i| -self.q[(i, i)]).fold(0.0, f64::max)
    }

    pub fn with_states(mut self, states: Vec<String>) -> Result<Self> {
        if states.len() != self.size() {
            return Err(FcltError::DimensionMismatch {
                expected: self.size(),
                got: states.len(),
            });
        }
        self.states = states;
        Ok(self)
    }
}

/// A real function on the state space, stored as a vector, with its centering status.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    values: DVector<f64>,
    centered: bool,
}

impl Observable {
    /// Wraps `values` as-is, recording whether `|sum_i pi_i f_i| <= 1e-12`.
    pub fn new(values: DVector<f64>, model: &GeneratorModel) -> Result<Self> {
        check_len(values.len(), model)?;
        let centered = model.pi.dot(&values).abs() <= Tolerances::default().exact;
        Ok(Observable { values, centered })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }
}

fn check_len(len: usize, model: &GeneratorModel) -> Result<()> {
    if len != model.size() {
        return Err(FcltError::DimensionMismatch {
            expected: model.size(),
            got: len,
        });
    }
    Ok(())
}

/// Birth-death chain on `0..m` with `birth[i]` the rate `i -> i+1` and
/// `death[i]` the rate `i+1 -> i`.
pub fn build_birth_death(birth_rates: &[f64], death_rates: &[f64]) -> Result<GeneratorModel> {
    if birth_rates.len() != death_rates.len() {
        return Err(FcltError::DimensionMismatch {
            expected: birth_rates.len(),
            got: death_rates.len(),
        });
    }
    for (kind, rates) in [("birth", birth_rates), ("death", death_rates)] {
        if let Some((index, &value)) = rates.iter().enumerate().find(|(_, &r)| !(r > 0.0)) {
            return Err(FcltError::ZeroRate { kind, index, value });
        }
    }

    let m = birth_rates.len() + 1;
    let mut q = DMatrix::<f64>::zeros(m, m);
    for i in 0..m - 1 {
        q[(i, i + 1)] = birth_rates[i];
        q[(i + 1, i)] = death_rates[i];
    }
    fill_diagonal(&mut q);

    // pi_{i+1} / pi_i = birth_i / death_i
    let mut weights = vec![1.0; m];
    for i in 0..m - 1 {
        weights[i + 1] = weights[i] * birth_rates[i] / death_rates[i];
    }
    let total: f64 = weights.iter().sum();
    let pi_hint = DVector::from_iterator(m, weights.into_iter().map(|w| w / total));

    finalize(default_states(m), q, Some(pi_hint), &Tolerances::default())
}

/// Random reversible generator: positive symmetric edge weights `w_ij` on a
/// connected random graph and a positive law `pi`, with `Q_ij = w_ij / pi_i`.
///
/// Each edge is kept with probability `connectivity`; a random spanning tree is
/// always added so the graph is connected. Deterministic given `seed`.
pub fn build_random_reversible(m: usize, connectivity: f64, seed: u64) -> Result<GeneratorModel> {
    if m < 2 {
        return Err(FcltError::invalid(format!("need at least 2 states, got {m}")));
    }
    if !(connectivity > 0.0 && connectivity <= 1.0) {
        return Err(FcltError::invalid(format!(
            "connectivity must lie in (0, 1], got {connectivity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let pi = DVector::from_iterator(m, raw.into_iter().map(|x| x / total));

    let mut adjacent = vec![vec![false; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            if rng.random::<f64>() < connectivity {
                adjacent[i][j] = true;
            }
        }
    }
    // spanning tree over a random ordering of the states
    let mut order: Vec<usize> = (0..m).collect();
    for k in (1..m).rev() {
        let swap = rng.random_range(0..=k);
        order.swap(k, swap);
    }
    for k in 1..m {
        let parent = order[rng.random_range(0..k)];
        let (a, b) = (order[k].min(parent), order[k].max(parent));
        adjacent[a][b] = true;
    }

    // Weights scaled by 1/m keep exit rates O(1) regardless of m.
    let mut q = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            if adjacent[i][j] {
                let w = rng.random_range(0.5..1.5) / m as f64;
                q[(i, j)] = w / pi[i];
                q[(j, i)] = w / pi[j];
            }
        }
    }
    fill_diagonal(&mut q);

    finalize(default_states(m), q, Some(pi), &Tolerances::default())
}

/// Deterministic cycle `0 -> 1 -> ... -> m-1 -> 0` with unit rates (non-reversible for m >= 3).
pub fn build_cycle(m: usize) -> Result<GeneratorModel> {
    if m < 2 {
        return Err(FcltError::invalid(format!("need at least 2 states, got {m}")));
    }
    let mut q = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        q[(i, (i + 1) % m)] += 1.0;
    }
    fill_diagonal(&mut q);
    build_from_rates(&q)
}

/// Validates a user-supplied rate matrix and certifies it.
pub fn build_from_rates(q_raw: &DMatrix<f64>) -> Result<GeneratorModel> {
    build_from_rates_with(q_raw, &Tolerances::default())
}

pub fn build_from_rates_with(q_raw: &DMatrix<f64>, tol: &Tolerances) -> Result<GeneratorModel> {
    let m = q_raw.nrows();
    if m == 0 || q_raw.ncols() != m {
        return Err(FcltError::NotAGenerator {
            row: 0,
            reason: format!("matrix is {}x{}, expected square and nonempty", m, q_raw.ncols()),
        });
    }
    finalize(default_states(m), q_raw.clone(), None, tol)
}

/// Returns `f_raw - (sum_i pi_i f_i) 1`.
///
/// A vector that is already centered within tolerance is returned unchanged, so
/// centering is exactly idempotent.
pub fn center(f_raw: &DVector<f64>, model: &GeneratorModel) -> Result<Observable> {
    check_len(f_raw.len(), model)?;
    let mean = model.pi.dot(f_raw);
    let values = if mean.abs() <= Tolerances::default().exact {
        f_raw.clone()
    } else {
        f_raw.add_scalar(-mean)
    };
    if values.iter().all(|&x| x == 0.0) || max_abs(&values) <= Tolerances::default().exact * max_abs(f_raw) {
        return Err(FcltError::DegenerateObservable);
    }
    Ok(Observable {
        values,
        centered: true,
    })
}

fn default_states(m: usize) -> Vec<String> {
    (0..m).map(|i| i.to_string()).collect()
}

fn fill_diagonal(q: &mut DMatrix<f64>) {
    for i in 0..q.nrows() {
        q[(i, i)] = 0.0;
        let out: f64 = q.row(i).sum();
        q[(i, i)] = -out;
    }
}

fn validate_structure(q: &DMatrix<f64>, tol: &Tolerances) -> Result<()> {
    for (i, row) in q.row_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(FcltError::NotAGenerator {
                    row: i,
                    reason: format!("entry ({i},{j}) is not finite"),
                });
            }
            if i != j && v < 0.0 {
                return Err(FcltError::NotAGenerator {
                    row: i,
                    reason: format!("off-diagonal entry ({i},{j}) = {v} is negative"),
                });
            }
        }
        let sum = row.sum();
        let scale = q[(i, i)].abs().max(1.0);
        if sum.abs() > tol.exact * scale {
            return Err(FcltError::NotAGenerator {
                row: i,
                reason: format!("row sums to {sum:e}, expected 0"),
            });
        }
    }
    Ok(())
}

/// Strong connectivity of the directed graph `i -> j` whenever `Q_ij > 0`.
pub fn is_strongly_connected(q: &DMatrix<f64>) -> bool {
    let m = q.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let rate = if forward { q[(i, j)] } else { q[(j, i)] };
                if i != j && rate > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Number of singular values of `Q` below `rel_tol * max(1, sigma_max)`.
pub fn null_space_dimension(q: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = q.singular_values();
    let cutoff = rel_tol * sv.max().max(1.0);
    sv.iter().filter(|&&s| s <= cutoff).count()
}

/// Left null vector of `Q`, normalized to sum 1.
fn solve_invariant_law(q: &DMatrix<f64>) -> Option<DVector<f64>> {
    let m = q.nrows();
    let ones = DVector::from_element(m, 1.0);
    solve_bordered(&q.transpose(), &ones, &DVector::zeros(m), 1.0)
}

fn finalize(
    states: Vec<String>,
    q: DMatrix<f64>,
    pi_hint: Option<DVector<f64>>,
    tol: &Tolerances,
) -> Result<GeneratorModel> {
    validate_structure(&q, tol)?;
    let m = q.nrows();

    let connected = is_strongly_connected(&q);
    let nullity = null_space_dimension(&q, tol.solve);
    if !connected {
        return Err(FcltError::NotErgodic(
            "rate graph is not strongly connected".to_string(),
        ));
    }
    if nullity != 1 {
        return Err(FcltError::NotErgodic(format!(
            "null space of Q has dimension {nullity}, expected 1"
        )));
    }

    let solved = solve_invariant_law(&q)
        .ok_or_else(|| FcltError::NotErgodic("invariant law solve is singular".to_string()))?;
    let pi = match pi_hint {
        Some(hint) => {
            let gap = max_abs(&(&hint - &solved));
            if gap > tol.solve {
                return Err(FcltError::violation(
                    "constructed pi agrees with null-space solve",
                    format!("max deviation {gap:e}"),
                ));
            }
            hint
        }
        None => solved,
    };

    if let Some(i) = pi.iter().position(|&p| !(p > 0.0)) {
        return Err(FcltError::NotErgodic(format!("pi_{i} = {} is not positive", pi[i])));
    }
    if (pi.sum() - 1.0).abs() > tol.exact {
        return Err(FcltError::violation("sum of pi is 1", format!("sum = {}", pi.sum())));
    }
    let rate_scale = (0..m).map(|i| -q[(i, i)]).fold(1.0, f64::max);
    let stationarity = max_abs(&(q.transpose() * &pi));
    if stationarity > tol.solve * rate_scale {
        return Err(FcltError::violation(
            "pi Q = 0",
            format!("residual {stationarity:e}"),
        ));
    }

    let mut balance_residual = 0.0f64;
    for i in 0..m {
        for j in i + 1..m {
            balance_residual = balance_residual.max((pi[i] * q[(i, j)] - pi[j] * q[(j, i)]).abs());
        }
    }

    Ok(GeneratorModel {
        states,
        q,
        pi,
        reversible: balance_residual <= tol.solve,
        ergodic: true,
        balance_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dm(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    /// Null-space oracle: pi from the SVD right singular vector of Q^T with
    /// the smallest singular value, independent of the bordered QR solve.
    fn svd_null_pi(q: &DMatrix<f64>) -> DVector<f64> {
        let svd = q.transpose().svd(true, true);
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let v = svd.v_t.unwrap().row(k).transpose();
        &v / v.sum()
    }

    #[test]
    fn two_state_birth_death() {
        let model = build_birth_death(&[1.0], &[1.0]).unwrap();
        assert_eq!(model.q(), &dm(&[&[-1.0, 1.0], &[1.0, -1.0]]));
        assert_abs_diff_eq!(model.pi()[0], 0.5, epsilon = 1e-15);
        assert!(model.is_reversible() && model.is_ergodic());
    }

    #[test]
    fn three_state_unit_birth_death() {
        let model = build_birth_death(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(
            model.q(),
            &dm(&[&[-1.0, 1.0, 0.0], &[1.0, -2.0, 1.0], &[0.0, 1.0, -1.0]])
        );
        for p in model.pi().iter() {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn asymmetric_birth_death_matches_null_space() {
        let model = build_birth_death(&[2.0, 1.0], &[1.0, 2.0]).unwrap();
        let oracle = svd_null_pi(model.q());
        let expected = [0.25, 0.5, 0.25];
        for i in 0..3 {
            assert_abs_diff_eq!(oracle[i], expected[i], epsilon = 1e-12);
            assert_abs_diff_eq!(model.pi()[i], expected[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_rate_rejected() {
        assert!(matches!(
            build_birth_death(&[1.0, 0.0], &[1.0, 1.0]),
            Err(FcltError::ZeroRate { kind: "birth", index: 1, .. })
        ));
        assert!(matches!(
            build_birth_death(&[1.0], &[-2.0]),
            Err(FcltError::ZeroRate { kind: "death", .. })
        ));
    }

    #[test]
    fn random_reversible_is_certified_and_deterministic() {
        let a = build_random_reversible(20, 0.3, 42).unwrap();
        let b = build_random_reversible(20, 0.3, 42).unwrap();
        assert!(a.is_ergodic() && a.is_reversible());
        assert_eq!(a.q().as_slice(), b.q().as_slice());
        let small = build_random_reversible(2, 0.01, 7).unwrap();
        assert!(small.detailed_balance_residual() <= 1e-12);
    }

    #[test]
    fn cyclic_chain_is_ergodic_not_reversible() {
        let q = dm(&[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0]]);
        let model = build_from_rates(&q).unwrap();
        let oracle = svd_null_pi(&q);
        for i in 0..3 {
            assert_abs_diff_eq!(model.pi()[i], 1.0 / 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(oracle[i], 1.0 / 3.0, epsilon = 1e-12);
        }
        assert!(model.is_ergodic());
        assert!(!model.is_reversible());
        assert_abs_diff_eq!(model.detailed_balance_residual(), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn absorbing_pair_is_not_ergodic() {
        let q = DMatrix::zeros(2, 2);
        assert!(matches!(build_from_rates(&q), Err(FcltError::NotErgodic(_))));
    }

    #[test]
    fn bad_generators_name_the_row() {
        let q = dm(&[&[-1.0, 1.0], &[1.0, -0.5]]);
        match build_from_rates(&q) {
            Err(FcltError::NotAGenerator { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
        let q = dm(&[&[1.0, -1.0], &[1.0, -1.0]]);
        assert!(matches!(
            build_from_rates(&q),
            Err(FcltError::NotAGenerator { row: 0, .. })
        ));
    }

    #[test]
    fn reducible_but_unique_law_fails_graph_certificate() {
        // state 0 is transient: 0 -> 1 only, 1 <-> 2
        let q = dm(&[&[-1.0, 1.0, 0.0], &[0.0, -1.0, 1.0], &[0.0, 1.0, -1.0]]);
        assert!(matches!(build_from_rates(&q), Err(FcltError::NotErgodic(_))));
    }

    #[test]
    fn centering_examples() {
        let two = build_birth_death(&[1.0], &[1.0]).unwrap();
        let f = center(&DVector::from_vec(vec![1.0, -1.0]), &two).unwrap();
        assert_eq!(f.values().as_slice(), &[1.0, -1.0]);
        assert!(f.is_centered());
        assert_eq!(
            center(&DVector::from_vec(vec![5.0, 5.0]), &two),
            Err(FcltError::DegenerateObservable)
        );

        let three = build_birth_death(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let f = center(&DVector::from_vec(vec![1.0, 0.0, 0.0]), &three).unwrap();
        assert_abs_diff_eq!(f.values()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.values()[1], -1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.values()[2], -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn length_mismatch() {
        let two = build_birth_death(&[1.0], &[1.0]).unwrap();
        assert!(matches!(
            center(&DVector::from_vec(vec![1.0, 2.0, 3.0]), &two),
            Err(FcltError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn null_space_is_constants_for_ergodic_models() {
        for seed in 0..10 {
            let model = build_random_reversible(12, 0.4, seed).unwrap();
            let sv = model.q().singular_values();
            let mut sorted: Vec<f64> = sv.iter().copied().collect();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert!(sorted[0] < 1e-12);
            assert!(sorted[1] > 1e-6);
            let q1 = model.q() * DVector::from_element(12, 1.0);
            assert!(max_abs(&q1) < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn random_models_satisfy_invariants(m in 2usize..40, p in 0.05f64..1.0, seed in any::<u64>()) {
                let model = build_random_reversible(m, p, seed).unwrap();
                prop_assert!(model.row_sum_residual() <= 1e-12 * model.max_exit_rate().max(1.0));
                prop_assert!(model.stationarity_residual() <= 1e-10);
                prop_assert!((model.pi().sum() - 1.0).abs() <= 1e-12);
                prop_assert!(model.detailed_balance_residual() <= 1e-10);
                prop_assert!(model.is_reversible() && model.is_ergodic());
            }

            #[test]
            fn centering_is_idempotent(values in proptest::collection::vec(-10.0f64..10.0, 5), seed in 0u64..1000) {
                let model = build_random_reversible(5, 0.5, seed).unwrap();
                let f = DVector::from_vec(values);
                if let Ok(once) = center(&f, &model) {
                    let twice = center(once.values(), &model).unwrap();
                    prop_assert_eq!(once.values(), twice.values());
                    prop_assert!(model.pi().dot(once.values()).abs() <= 1e-12);
                }
            }
        }
    }
}
