//! Small dense helpers shared by the model and operator modules.

use nalgebra::{DMatrix, DVector};

/// Solves the overdetermined but consistent system `[top; constraint] x = [rhs; c]`
/// in the least-squares sense via Householder QR.
///
/// `top` is `m x m` (rank `m - 1` in every use here), `constraint` is a length-`m`
/// row that pins the component along the missing direction.
pub(crate) fn solve_bordered(
    top: &DMatrix<f64>,
    constraint: &DVector<f64>,
    rhs: &DVector<f64>,
    constraint_rhs: f64,
) -> Option<DVector<f64>> {
    let m = top.ncols();
    let mut a = DMatrix::<f64>::zeros(m + 1, m);
    a.view_mut((0, 0), (m, m)).copy_from(top);
    for j in 0..m {
        a[(m, j)] = constraint[j];
    }
    let mut b = DVector::<f64>::zeros(m + 1);
    b.rows_mut(0, m).copy_from(rhs);
    b[m] = constraint_rhs;

    let qr = a.qr();
    let r = qr.r();
    if (0..m).any(|i| r[(i, i)].abs() < f64::EPSILON * 1e-3) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
}

/// Max absolute entry.
pub(crate) fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}
