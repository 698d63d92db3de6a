//! Thomas algorithm for tridiagonal systems.

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored. The solution overwrites `rhs`;
/// `scratch` must have the same length and is clobbered. No pivoting, so the
/// matrix should be diagonally dominant (every system assembled by the
/// stepper is).
pub fn solve_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n && scratch.len() == n);
    if n == 0 {
        return;
    }

    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_by_three() {
        let lower = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, 0.0];
        let mut x = [1.0, 0.0, 1.0];
        let mut w = [0.0; 3];
        solve_in_place(&lower, &diag, &upper, &mut x, &mut w);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn residual_vanishes_for_dominant_systems(
            rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -5.0f64..5.0), 1..50)
        ) {
            let n = rows.len();
            let lower: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let upper: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let diag: Vec<f64> = rows.iter().map(|r| 2.5 + r.0.abs() + r.1.abs()).collect();
            let rhs: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let mut x = rhs.clone();
            let mut w = vec![0.0; n];
            solve_in_place(&lower, &diag, &upper, &mut x, &mut w);
            for i in 0..n {
                let mut ax = diag[i] * x[i];
                if i > 0 { ax += lower[i] * x[i - 1]; }
                if i + 1 < n { ax += upper[i] * x[i + 1]; }
                prop_assert!((ax - rhs[i]).abs() < 1e-12);
            }
        }
    }
}
