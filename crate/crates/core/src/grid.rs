//! Uniform spatial grids, staggered frequency grids, and quadrature weights.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid on `[x_min, x_max)` with `n` points and spacing
/// `dx = (x_max - x_min) / n`.
///
/// The right endpoint is excluded so the grid doubles as an FFT grid; for
/// integrals of decaying functions the plain `dx`-weighted sum coincides with
/// the trapezoidal rule to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl XGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min < 0.0 && 0.0 < x_max) {
            return Err(Error::InvalidSpec(format!(
                "x grid must straddle 0, got [{x_min}, {x_max}]"
            )));
        }
        if n < 16 {
            return Err(Error::InvalidSpec(format!("n_x must be >= 16, got {n}")));
        }
        Ok(Self { x_min, x_max, n })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).round() as isize;
        i.clamp(0, self.n as isize - 1) as usize
    }

    /// Grid refined by an integer factor (same span, `factor * n` points).
    pub fn refined(&self, factor: usize) -> XGrid {
        XGrid { x_min: self.x_min, x_max: self.x_max, n: self.n * factor }
    }
}

/// Frequency grid. Scattering formulas divide by `2ik`, so `k = 0` is never
/// sampled: the staggered variant places points at `(j + 1/2) dk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KGrid {
    /// `k_j = (j + 1/2) dk` for `j = 0..n_half`; the symmetric negative half
    /// is implied by conjugation.
    Staggered { dk: f64, n_half: usize },
    /// Explicit list of positive frequencies (ascending, all `> 0`).
    Explicit { ks: Vec<f64> },
}

impl KGrid {
    pub fn staggered(dk: f64, n_half: usize) -> Result<Self> {
        if dk <= 0.0 || n_half == 0 {
            return Err(Error::InvalidSpec(format!(
                "staggered k grid needs dk > 0 and n_half > 0, got dk={dk}, n_half={n_half}"
            )));
        }
        Ok(KGrid::Staggered { dk, n_half })
    }

    pub fn explicit(ks: Vec<f64>) -> Result<Self> {
        if ks.is_empty() || ks.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
            return Err(Error::InvalidSpec("explicit k grid must be positive and finite".into()));
        }
        if ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("explicit k grid must be ascending".into()));
        }
        Ok(KGrid::Explicit { ks })
    }

    /// Positive frequencies, ascending.
    pub fn positive(&self) -> Vec<f64> {
        match self {
            KGrid::Staggered { dk, n_half } => {
                (0..*n_half).map(|j| (j as f64 + 0.5) * dk).collect()
            }
            KGrid::Explicit { ks } => ks.clone(),
        }
    }

    /// Full symmetric grid `(-k_max, ..., -k_min, k_min, ..., k_max)`.
    pub fn full(&self) -> Vec<f64> {
        let pos = self.positive();
        let mut all: Vec<f64> = pos.iter().rev().map(|k| -k).collect();
        all.extend_from_slice(&pos);
        all
    }

    pub fn len_positive(&self) -> usize {
        match self {
            KGrid::Staggered { n_half, .. } => *n_half,
            KGrid::Explicit { ks } => ks.len(),
        }
    }

    /// Quadrature weight for integrals over the full symmetric grid.
    /// Staggered grids use the midpoint rule (weight `dk` per sample).
    pub fn weight(&self) -> Result<f64> {
        match self {
            KGrid::Staggered { dk, .. } => Ok(*dk),
            KGrid::Explicit { .. } => Err(Error::InvalidSpec(
                "explicit k grids carry no quadrature weight".into(),
            )),
        }
    }
}

/// Composite trapezoidal rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * values[0] + interior + 0.5 * values[values.len() - 1])
}

/// Composite Simpson rule; falls back to trapezoid on the last panel when the
/// sample count is even.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return trapezoid(values, h);
    }
    let m = if n % 2 == 1 { n } else { n - 1 };
    let mut s = values[0] + values[m - 1];
    for (i, v) in values[1..m - 1].iter().enumerate() {
        s += if i % 2 == 0 { 4.0 * v } else { 2.0 * v };
    }
    let mut out = s * h / 3.0;
    if n % 2 == 0 {
        out += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    out
}

/// Quadrature value with a Richardson error estimate from comparing the full
/// resolution with the same rule on every other sample.
pub fn simpson_with_error(values: &[f64], h: f64) -> (f64, f64) {
    let fine = simpson(values, h);
    let coarse_vals: Vec<f64> = values.iter().step_by(2).copied().collect();
    let coarse = simpson(&coarse_vals, 2.0 * h);
    // Smooth integrands would allow /15; absolute-value kinks (|V'| etc.)
    // degrade the order, so the estimate stays conservative.
    (fine, (fine - coarse).abs() / 2.0)
}

/// End-corrected (Gregory) weights for 4th-order accuracy on uniformly spaced
/// samples: trapezoid weights plus `[-5/8, 1/6, -1/24]` corrections at both
/// ends. Falls back to trapezoid for short ranges.
pub fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n < 2 {
        return vec![0.0; n];
    }
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    if n >= 7 {
        const C: [f64; 3] = [-1.0 / 8.0, 1.0 / 6.0, -1.0 / 24.0];
        // -1/8 on top of the 1/2 endpoint weight reproduces 3/8.
        for (i, c) in C.iter().enumerate() {
            w[i] += c * h;
            w[n - 1 - i] += c * h;
        }
    }
    w
}

/// Dot product of `gregory_weights` with the samples.
pub fn gregory(values: &[f64], h: f64) -> f64 {
    gregory_weights(values.len(), h)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn xgrid_basics() {
        let g = XGrid::new(-10.0, 10.0, 64).unwrap();
        assert_relative_eq!(g.dx(), 0.3125);
        assert_relative_eq!(g.x(0), -10.0);
        assert!(g.x(63) < 10.0);
        assert_eq!(g.nearest(0.0), 32);
        assert!(XGrid::new(1.0, 10.0, 64).is_err());
        assert!(XGrid::new(-1.0, 1.0, 8).is_err());
    }

    #[test]
    fn staggered_grid_avoids_zero_and_is_symmetric() {
        let g = KGrid::staggered(0.1, 5).unwrap();
        let pos = g.positive();
        assert_relative_eq!(pos[0], 0.05);
        assert_relative_eq!(pos[4], 0.45);
        let full = g.full();
        assert_eq!(full.len(), 10);
        for (a, b) in full.iter().zip(full.iter().rev()) {
            assert_relative_eq!(*a, -*b);
        }
        assert!(full.iter().all(|&k| k != 0.0));
    }

    #[test]
    fn quadrature_orders() {
        // f(x) = x^4 on [0, 1]: integral 1/5.
        for &n in &[33usize, 65, 129] {
            let h = 1.0 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(4)).collect();
            let t = trapezoid(&vals, h);
            let s = simpson(&vals, h);
            let g = gregory(&vals, h);
            assert!((t - 0.2).abs() < 2.0 * h * h);
            assert!((s - 0.2).abs() < 1e-3 * h * h);
            assert!((g - 0.2).abs() < 1e-2 * h * h, "gregory err {}", (g - 0.2).abs());
        }
    }

    #[test]
    fn gregory_is_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| (-1.0 + i as f64 * h).cos()).collect();
            (gregory(&vals, h) - 2.0 * 1.0_f64.sin()).abs()
        };
        let e1 = err(101);
        let e2 = err(201);
        // Halving h should shrink the error ~16x.
        assert!(e1 / e2 > 10.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn simpson_error_estimate_brackets_truth() {
        let n = 257;
        let h = 4.0 / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|i| (-2.0 + i as f64 * h).cos()).collect();
        let exact = 2.0 * 2.0_f64.sin();
        let (v, e) = simpson_with_error(&vals, h);
        assert!((v - exact).abs() <= 10.0 * e + 1e-12);
    }
}
