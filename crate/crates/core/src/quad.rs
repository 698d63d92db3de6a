//! Trapezoid quadrature on the uniform unit grid, mapped to `[0, s]`.

/// `int_0^1 f dy`.
pub(crate) fn trap(f: impl ExactSizeIterator<Item = f64>, dy: f64) -> f64 {
    let n = f.len();
    let mut sum = 0.0;
    for (i, v) in f.enumerate() {
        sum += if i == 0 || i + 1 == n { 0.5 * v } else { v };
    }
    sum * dy
}

/// `int_0^s |d/dx w|^2 dx` for the piecewise-linear interpolant of a field on
/// the unit grid (exact for that interpolant).
pub(crate) fn grad_sq(field: &[f64], dy: f64, s: f64) -> f64 {
    let sum: f64 = field
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum();
    sum / (dy * s)
}

/// `int_0^s x (u + v) dx = s^2 int_0^1 y (u + v) dy`.
pub(crate) fn moment(u: &[f64], v: &[f64], dy: f64, s: f64) -> f64 {
    let n = u.len();
    let it = (0..n).map(|i| (i as f64 * dy) * (u[i] + v[i]));
    s * s * trap(it, dy)
}

/// `1/2 int_0^s |u - g|^2 + gamma/2 int_0^s |v - h|^2` with `g = u[0]`,
/// `h = v[0]` (the Dirichlet nodes).
pub(crate) fn energy(u: &[f64], v: &[f64], gamma: f64, dy: f64, s: f64) -> f64 {
    let (g, h) = (u[0], v[0]);
    let n = u.len();
    let it = (0..n).map(|i| 0.5 * (u[i] - g).powi(2) + 0.5 * gamma * (v[i] - h).powi(2));
    s * trap(it, dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_linear_data() {
        let n = 11;
        let dy = 0.1;
        let lin: Vec<f64> = (0..n).map(|i| i as f64 * dy).collect();
        assert!((trap(lin.iter().copied(), dy) - 0.5).abs() < 1e-15);
        // d/dx of y = x/s is 1/s, squared and integrated over [0, s]: 1/s
        assert!((grad_sq(&lin, dy, 2.0) - 0.5).abs() < 1e-14);
        let one = vec![1.0; n];
        let zero = vec![0.0; n];
        // int_0^s x dx = s^2/2
        assert!((moment(&one, &zero, dy, 3.0) - 4.5).abs() < 1e-13);
        assert_eq!(energy(&one, &one, 2.0, dy, 3.0), 0.0);
    }
}
