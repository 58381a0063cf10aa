//! Acceptance run: one pass/fail line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fclt_core::chain_model::{build_birth_death, GeneratorModel};
use fclt_core::fclt_verifier::{
    finite_t_variance_oracle, lambda_collapse_test, normality_test, observable_from, run_experiment,
    variance_scaling_test, FcltExperiment, ReplicateStats,
};
use fclt_core::path_simulator::{unit_grid, Schedule};
use fclt_core::spectral::{decompose, sigma2_fractional_formula, sigma2_range_formula, tv_convergence_curve};
use fclt_core::suite::{self, run_operator_suite, SuiteConfig, SuiteReport};

const SEED_VARIANCE: u64 = 7_700_001;
const SEED_COLLAPSE: u64 = 9_900_001;
const SEED_IDENTITY: u64 = 6_600_001;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed<T>(run: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = run();
    (out, start.elapsed())
}

fn two_state() -> GeneratorModel {
    build_birth_death(&[1.0], &[1.0]).unwrap()
}

fn three_state() -> GeneratorModel {
    build_birth_death(&[1.0, 1.0], &[1.0, 1.0]).unwrap()
}

/// Dense Gauss-Jordan with partial pivoting on a small square system.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let factor = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                    *x -= factor * p;
                }
                b[row] -= factor * b[col];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// `2 <g, f>_pi` where `-Q g = f` and `pi . g = 0`, with `pi` uniform.
///
/// Replaces the last Poisson row by the constraint, which is valid because the
/// rows of `-Q` sum to the zero vector against a uniform `pi`.
fn sigma2_oracle_uniform(q: &[Vec<f64>], f: &[f64]) -> f64 {
    let m = f.len();
    let mut a: Vec<Vec<f64>> = q.iter().map(|row| row.iter().map(|x| -x).collect()).collect();
    let mut b = f.to_vec();
    a[m - 1] = vec![1.0; m];
    b[m - 1] = 0.0;
    let g = gauss_solve(a, b);
    2.0 * g.iter().zip(f).map(|(x, y)| x * y).sum::<f64>() / m as f64
}

/// `f = (1, 0, -1)` is the `s = 1` eigenvector of the unit 3-state chain with
/// `||f||^2_pi = 2/3`, so `Var int_0^t f = (4/3)(t - 1 + e^{-t})`.
fn three_state_variance(t: f64) -> f64 {
    4.0 / 3.0 * (t - 1.0 + (-t).exp())
}

const THREE_STATE_HALF_NORM_SQ: f64 = 2.0 / 3.0;

fn criterion_1() -> Outcome {
    let ((range, frac), elapsed) = timed(|| {
        let model = two_state();
        let f = observable_from(&[1.0, -1.0], &model).unwrap();
        let spec = decompose(&model).unwrap();
        (
            sigma2_range_formula(&model, &f).unwrap().sigma2,
            sigma2_fractional_formula(&spec, &f).unwrap().sigma2,
        )
    });
    // 2 pi_0 pi_1 (f_0 - f_1)^2 / (a + b)
    let (pi0, pi1, a, b) = (0.5, 0.5, 1.0, 1.0);
    let oracle = 2.0 * pi0 * pi1 * (1.0f64 - -1.0).powi(2) / (a + b);
    let err = (range - oracle).abs().max((frac - oracle).abs());
    Outcome {
        id: 1,
        pass: err <= 1e-12 && elapsed < Duration::from_secs(1),
        detail: format!("sigma2 = {range:.15} / {frac:.15}, max error {err:.2e}"),
        elapsed,
    }
}

fn criterion_2() -> Outcome {
    let ((range, frac), elapsed) = timed(|| {
        let model = three_state();
        let f = observable_from(&[1.0, 0.0, -1.0], &model).unwrap();
        let spec = decompose(&model).unwrap();
        (
            sigma2_range_formula(&model, &f).unwrap().sigma2,
            sigma2_fractional_formula(&spec, &f).unwrap().sigma2,
        )
    });
    let q = vec![vec![-1.0, 1.0, 0.0], vec![1.0, -2.0, 1.0], vec![0.0, 1.0, -1.0]];
    let oracle = sigma2_oracle_uniform(&q, &[1.0, 0.0, -1.0]);
    let rel = (range - oracle).abs() / oracle;
    let agree = (range - frac).abs();
    Outcome {
        id: 2,
        pass: (oracle - 4.0 / 3.0).abs() <= 1e-14
            && rel <= 1e-10
            && agree <= 1e-12
            && elapsed < Duration::from_secs(1),
        detail: format!("sigma2 = {range:.15}, oracle {oracle:.15}, rel error {rel:.2e}, formulas differ by {agree:.2e}"),
        elapsed,
    }
}

fn describe(report: &SuiteReport, names: &[&str]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        let check = report.check(name).expect("suite check present");
        pass &= check.pass;
        parts.push(format!("{} {:.2e} (tol {:.0e})", check.name, check.worst, check.tolerance));
    }
    (pass, parts.join(", "))
}

fn suite_criteria() -> Vec<Outcome> {
    let config = SuiteConfig::default();
    let (report, elapsed) = timed(|| run_operator_suite(&config).unwrap());
    let groups: [(u32, &[&str], u64); 3] = [
        (
            3,
            &[suite::CHECK_FREP, suite::CHECK_NORMS, suite::CHECK_IDENTITY, suite::CHECK_SQRT],
            30,
        ),
        (4, &[suite::CHECK_MONOTONE, suite::CHECK_LIMIT], 10),
        (5, &[suite::CHECK_YOSIDA_MONO, suite::CHECK_YOSIDA, suite::CHECK_CONSTANTS], 5),
    ];
    groups
        .iter()
        .map(|&(id, names, budget)| {
            let (pass, detail) = describe(&report, names);
            Outcome {
                id,
                pass: pass && elapsed < Duration::from_secs(budget),
                detail: format!("{} models x {} triples: {detail}", report.models, report.triples),
                elapsed,
            }
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let (stats, elapsed) = timed(|| {
        let model = three_state();
        let f = observable_from(&[1.0, 0.0, -1.0], &model).unwrap();
        let exp = FcltExperiment::new(f, vec![100], 1000, SEED_IDENTITY, Schedule::default(), unit_grid(50)).unwrap();
        run_experiment(&model, &exp).unwrap()
    });
    let residual = stats[0].max_identity_residual;
    Outcome {
        id: 6,
        pass: residual <= 1e-10 && elapsed < Duration::from_secs(10),
        detail: format!("{} replicates, max |I - Lambda - A| = {residual:.2e}", stats[0].replicates),
        elapsed,
    }
}

fn variance_run() -> Vec<ReplicateStats> {
    let model = three_state();
    let f = observable_from(&[1.0, 0.0, -1.0], &model).unwrap();
    let exp = FcltExperiment::new(f, vec![1000], 10_000, SEED_VARIANCE, Schedule::default(), vec![0.5, 1.0]).unwrap();
    run_experiment(&model, &exp).unwrap()
}

fn collapse_run() -> Vec<ReplicateStats> {
    let model = three_state();
    let f = observable_from(&[1.0, 0.0, -1.0], &model).unwrap();
    let exp = FcltExperiment::new(
        f,
        vec![100, 1000, 10_000],
        1000,
        SEED_COLLAPSE,
        Schedule::default(),
        unit_grid(20),
    )
    .unwrap();
    run_experiment(&model, &exp).unwrap()
}

fn report_bytes(stats: &[ReplicateStats]) -> Vec<u8> {
    let mut out = serde_json::to_vec(stats).unwrap();
    for s in stats {
        out.extend(serde_json::to_vec(&s.samples).unwrap());
        out.extend(serde_json::to_vec(&s.sup_samples).unwrap());
    }
    out
}

fn criteria_7_8(stats: &[ReplicateStats], elapsed: Duration) -> [Outcome; 2] {
    let model = three_state();
    let f = observable_from(&[1.0, 0.0, -1.0], &model).unwrap();
    let spec = decompose(&model).unwrap();
    let sigma2 = sigma2_range_formula(&model, &f).unwrap().sigma2;

    let n = 1000.0;
    let oracle = three_state_variance(n) / n;
    let library_oracle = finite_t_variance_oracle(&spec, &f, n).unwrap() / n;
    let near_limit = (oracle - sigma2).abs() / sigma2;
    let exact = |x: f64| three_state_variance(x);
    let verdicts = variance_scaling_test(stats, sigma2, Some(&exact)).unwrap();
    let at_one = verdicts.iter().find(|v| v.t == 1.0).unwrap();
    let pass7 = at_one.pass_exact == Some(true)
        && (library_oracle - oracle).abs() <= 1e-12
        && near_limit <= 2e-3
        && elapsed < Duration::from_secs(120);

    let ks = normality_test(&stats[0], sigma2, 1.0).unwrap();
    [
        Outcome {
            id: 7,
            pass: pass7,
            detail: format!(
                "Var = {:.5} +/- {:.5} (3 SE band), oracle {oracle:.6}, sigma2 {sigma2:.6}",
                at_one.empirical,
                3.0 * at_one.std_error
            ),
            elapsed,
        },
        Outcome {
            id: 8,
            pass: ks.p_value > 0.01,
            detail: format!("KS D = {:.4}, p = {:.3}, R = {}", ks.statistic, ks.p_value, ks.sample_size),
            elapsed,
        },
    ]
}

fn criterion_9(stats: &[ReplicateStats], elapsed: Duration) -> Outcome {
    let report = lambda_collapse_test(stats, &Schedule::default(), Some(THREE_STATE_HALF_NORM_SQ)).unwrap();
    let strict_envelope = report
        .rows
        .iter()
        .all(|r| r.within_envelope == Some(true));
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "n={} median {:.3e} mean sup^2 {:.3e} <= {:.3e}",
                r.n,
                r.median_sup,
                r.mean_sup_sq,
                r.envelope.unwrap()
            )
        })
        .collect();
    Outcome {
        id: 9,
        pass: report.strictly_decreasing && strict_envelope && elapsed < Duration::from_secs(300),
        detail: rows.join("; "),
        elapsed,
    }
}

fn criterion_10() -> Outcome {
    let (tv, elapsed) = timed(|| tv_convergence_curve(&two_state(), &[1.0]).unwrap()[0][0]);
    // P_1(0, 0) = (1 + e^{-2}) / 2, so TV = |P_1(0, 0) - 1/2|
    let oracle = 0.5 * (-2.0f64).exp();
    let err = (tv - oracle).abs();
    Outcome {
        id: 10,
        pass: err <= 1e-10 && elapsed < Duration::from_secs(1),
        detail: format!("TV(1, 0) = {tv:.15}, error {err:.2e}"),
        elapsed,
    }
}

fn main() -> ExitCode {
    let mut outcomes = vec![criterion_1(), criterion_2()];
    outcomes.extend(suite_criteria());
    outcomes.push(criterion_6());

    let (variance, t7) = timed(variance_run);
    outcomes.extend(criteria_7_8(&variance, t7));
    let (collapse, t9) = timed(collapse_run);
    outcomes.push(criterion_9(&collapse, t9));
    outcomes.push(criterion_10());

    let (repeat, t11) = timed(|| (variance_run(), collapse_run()));
    let same = report_bytes(&variance) == report_bytes(&repeat.0) && report_bytes(&collapse) == report_bytes(&repeat.1);
    outcomes.push(Outcome {
        id: 11,
        pass: same,
        detail: format!("repeated runs 7-9 byte-identical: {same}"),
        elapsed: t11,
    });

    let mut failed = 0;
    for o in &outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2}: {verdict} [{:.2} s] {}",
            o.id,
            o.elapsed.as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        println!("acceptance: all {} criteria pass", outcomes.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria FAILED", outcomes.len());
        ExitCode::FAILURE
    }
}
