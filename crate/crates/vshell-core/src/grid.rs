//! Radial grids with quadrature weights.
//!
//! Shells have an inner support radius `R1 > 0` and fields that decay like
//! `1/r^2`, so the grids are geometrically spaced to resolve both edges of
//! the support. The quadrature is the composite trapezoidal rule in the
//! linear measure `dr` on those nodes; integrating a constant telescopes and
//! is exact to rounding.

use crate::{CoreError, Result};

/// A strictly increasing radial grid on `[r_min, r_cut]` with trapezoidal
/// quadrature weights for integrals `int f(r) dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    radii: Vec<f64>,
    weights: Vec<f64>,
    r_cut: f64,
}

impl RadialGrid {
    /// Builds a grid from strictly increasing positive radii.
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 {
            return Err(CoreError::InvalidArgument(
                "grid needs at least two radii".into(),
            ));
        }
        if radii[0] <= 0.0 || !radii[0].is_finite() {
            return Err(CoreError::InvalidArgument(
                "grid radii must be positive and finite".into(),
            ));
        }
        if radii.windows(2).any(|p| !(p[1] > p[0]) || !p[1].is_finite()) {
            return Err(CoreError::InvalidArgument(
                "grid radii must be strictly increasing".into(),
            ));
        }
        let n = radii.len();
        let mut weights = vec![0.0; n];
        weights[0] = 0.5 * (radii[1] - radii[0]);
        weights[n - 1] = 0.5 * (radii[n - 1] - radii[n - 2]);
        for i in 1..n - 1 {
            weights[i] = 0.5 * (radii[i + 1] - radii[i - 1]);
        }
        let r_cut = radii[n - 1];
        Ok(Self {
            radii,
            weights,
            r_cut,
        })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Outer truncation radius; fields are continued analytically as `M/r` beyond it.
    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }

    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }

    /// `int f dr` over `[r_min, r_cut]` with the grid weights.
    pub fn quadrature(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.radii.len());
        pairwise_sum_by(values.len(), |i| values[i] * self.weights[i])
    }

    /// Index of the grid cell `[r_i, r_{i+1})` containing `r`, clamped to the
    /// first/last cell for out-of-range queries.
    pub fn cell_of(&self, r: f64) -> usize {
        match self
            .radii
            .binary_search_by(|x| x.partial_cmp(&r).expect("finite radius"))
        {
            Ok(i) => i.min(self.radii.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.radii.len() - 2),
        }
    }
}

/// Geometrically spaced grid on `[r_min, r_max]` with `count` nodes.
pub fn make_log_grid(r_min: f64, r_max: f64, count: usize) -> Result<RadialGrid> {
    if !(r_min > 0.0) || !r_min.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "r_min must be positive, got {r_min}"
        )));
    }
    if !(r_max > r_min) || !r_max.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "need r_min < r_max, got [{r_min}, {r_max}]"
        )));
    }
    if count < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "count must be at least 2, got {count}"
        )));
    }
    let ratio = (r_max / r_min).ln() / (count - 1) as f64;
    let mut radii: Vec<f64> = (0..count).map(|i| r_min * (ratio * i as f64).exp()).collect();
    // pin the endpoints exactly
    radii[0] = r_min;
    radii[count - 1] = r_max;
    RadialGrid::new(radii)
}

/// Pairwise (cascade) summation of `f(0), ..., f(n-1)`.
///
/// Used for every reduction whose result feeds a determinism contract: the
/// order is fixed by the index range, so the sum is bit-identical across runs
/// and worker counts.
pub fn pairwise_sum_by<F: Fn(usize) -> f64 + Copy>(n: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64 + Copy>(lo: usize, hi: usize, f: F) -> f64 {
        match hi - lo {
            0 => 0.0,
            1 => f(lo),
            2 => f(lo) + f(lo + 1),
            len => {
                let mid = lo + len / 2;
                go(lo, mid, f) + go(mid, hi, f)
            }
        }
    }
    go(0, n, f)
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), |i| values[i])
}
