//! Front-fixing change of variables `y = x / s(t)` between the moving physical
//! interval `[0, s]` and the unit interval.

use crate::error::{Error, Result};

/// Uniform nodes `y_i = i / (n - 1)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedGrid {
    nodes: Vec<f64>,
}

impl FixedGrid {
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes, got {n_nodes}"
            )));
        }
        let last = (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| i as f64 / last).collect();
        nodes[n_nodes - 1] = 1.0;
        Ok(Self { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dy(&self) -> f64 {
        1.0 / (self.nodes.len() - 1) as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Grid with every cell split in two; the old nodes are the even ones.
    pub fn refined(&self) -> Self {
        Self::new(2 * self.len() - 1).expect("refined grid is larger")
    }
}

/// Piecewise-linear function through `(xs[i], ys[i])`, constant beyond the
/// end points.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidParameter(format!(
                "piecewise-linear data needs matching nonempty abscissae ({}) and values ({})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "piecewise-linear abscissae must be strictly increasing".into(),
            ));
        }
        Ok(Self { xs, ys })
    }

    /// Samples equally spaced on `[0, length]`. A single sample is a constant.
    pub fn uniform(length: f64, ys: Vec<f64>) -> Self {
        let n = ys.len();
        let xs = if n <= 1 {
            vec![0.0; n]
        } else {
            (0..n).map(|i| length * i as f64 / (n - 1) as f64).collect()
        };
        Self { xs, ys }
    }

    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.xs, &self.ys, x)
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }
}

/// Linear interpolation on sorted abscissae, clamped at the ends.
pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 1 || x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&xi| xi <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    if w == 0.0 {
        ys[k]
    } else {
        ys[k] + w * (ys[k + 1] - ys[k])
    }
}

/// Samples a physical profile on `[0, s]` at the images `s * y_i` of the
/// grid nodes.
pub fn to_fixed(profile: &PiecewiseLinear, s: f64, grid: &FixedGrid) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidState(format!(
            "front position must be positive, got {s}"
        )));
    }
    Ok(grid.nodes().iter().map(|&y| profile.eval(s * y)).collect())
}

/// Value at physical position `x` of a field stored on the unit grid, for a
/// front at `s`.
pub fn to_physical(field: &[f64], grid: &FixedGrid, s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidState(format!(
            "front position must be positive, got {s}"
        )));
    }
    if !(0.0..=s).contains(&x) {
        return Err(Error::Domain {
            value: x,
            lo: 0.0,
            hi: s,
        });
    }
    if field.len() != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "field has {} values for a {}-node grid",
            field.len(),
            grid.len()
        )));
    }
    Ok(interp(grid.nodes(), field, x / s))
}
