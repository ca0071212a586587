//! Catalog of admissible potentials, their sampled representation, and
//! numerical checks of the decay/regularity hypotheses on `V`.

use serde::{Deserialize, Serialize};

use crate::grid::{simpson_with_error, XGrid};
use crate::{Error, Result};

/// Analytic potential families. All catalog barriers are non-negative, hence
/// free of bound states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianBarrier,
    Sech2Barrier,
    SquareBarrier,
    CustomSamples,
}

/// Potential specification: family, coefficients, declared decay exponent
/// `gamma`, and the sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: Family,
    /// Barrier height; `width` is the Gaussian/sech scale or the square
    /// half-width.
    pub amplitude: f64,
    pub width: f64,
    /// Declared decay exponent: `<x>^gamma V` is integrable.
    pub gamma: f64,
    pub grid: XGrid,
    /// Samples for `custom_samples`; ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

/// JSON document layout: `{"family", "params": {...}, "gamma", "grid"}`.
#[derive(Serialize, Deserialize)]
struct SpecDoc {
    family: Family,
    #[serde(default)]
    params: Params,
    gamma: f64,
    grid: GridDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<f64>>,
    /// Optional explicit abscissas for custom samples; must be uniform and
    /// match `grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_samples: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize, Default)]
struct Params {
    #[serde(default)]
    amplitude: f64,
    #[serde(default, alias = "half_width")]
    width: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    x_min: f64,
    x_max: f64,
    n_x: usize,
}

impl PotentialSpec {
    pub fn new(family: Family, amplitude: f64, width: f64, gamma: f64, grid: XGrid) -> Result<Self> {
        let spec = Self { family, amplitude, width, gamma, grid, samples: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn custom(samples: Vec<f64>, gamma: f64, grid: XGrid) -> Result<Self> {
        let spec = Self {
            family: Family::CustomSamples,
            amplitude: 0.0,
            width: 1.0,
            gamma,
            grid,
            samples: Some(samples),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        XGrid::new(self.grid.x_min, self.grid.x_max, self.grid.n)?;
        match self.family {
            Family::CustomSamples => {
                let s = self
                    .samples
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec("custom_samples requires samples".into()))?;
                if s.len() != self.grid.n {
                    return Err(Error::InvalidSpec(format!(
                        "custom samples length {} does not match n_x {}",
                        s.len(),
                        self.grid.n
                    )));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("custom potential samples"));
                }
            }
            _ => {
                if self.amplitude < 0.0 {
                    return Err(Error::InvalidSpec(
                        "catalog barriers require amplitude >= 0 (no bound states)".into(),
                    ));
                }
                if self.width <= 0.0 {
                    return Err(Error::InvalidSpec("width must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Parse the JSON document format.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDoc = serde_json::from_str(text)?;
        let grid = XGrid::new(doc.grid.x_min, doc.grid.x_max, doc.grid.n_x)?;
        if let Some(xs) = &doc.x_samples {
            if xs.len() != grid.n {
                return Err(Error::InvalidSpec("x_samples length mismatch".into()));
            }
            let dx = grid.dx();
            let max_dev = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| (x - grid.x(i)).abs())
                .fold(0.0f64, f64::max);
            if max_dev > 1e-9 * dx.max(1.0) {
                return Err(Error::NonUniformGrid { max_dev });
            }
        }
        let spec = Self {
            family: doc.family,
            amplitude: doc.params.amplitude,
            width: doc.params.width.unwrap_or(1.0),
            gamma: doc.gamma,
            grid,
            samples: doc.samples,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        let doc = SpecDoc {
            family: self.family,
            params: Params { amplitude: self.amplitude, width: Some(self.width) },
            gamma: self.gamma,
            grid: GridDoc { x_min: self.grid.x_min, x_max: self.grid.x_max, n_x: self.grid.n },
            samples: self.samples.clone(),
            x_samples: None,
        };
        serde_json::to_string_pretty(&doc).expect("spec serialization")
    }

    /// Pointwise value of the analytic families. The square barrier takes the
    /// value `amplitude` on the closed interval `|x| <= width` so that
    /// node-aligned quadrature decomposes exactly into smooth panels.
    pub fn eval(&self, x: f64) -> f64 {
        let a = self.amplitude;
        let w = self.width;
        match self.family {
            Family::GaussianBarrier => a * (-(x / w) * (x / w)).exp(),
            Family::Sech2Barrier => {
                let s = 1.0 / (x / w).cosh();
                a * s * s
            }
            Family::SquareBarrier => {
                if x.abs() <= w {
                    a
                } else {
                    0.0
                }
            }
            Family::CustomSamples => {
                let i = self.grid.nearest(x);
                self.samples.as_ref().map_or(0.0, |s| s[i])
            }
        }
    }

    /// First and second derivatives of the analytic families (zero a.e. for
    /// the square barrier, whose distributional derivatives are flagged by
    /// [`hypothesis_report`]).
    pub fn eval_derivatives(&self, x: f64) -> (f64, f64) {
        let a = self.amplitude;
        let w = self.width;
        match self.family {
            Family::GaussianBarrier => {
                let v = a * (-(x / w) * (x / w)).exp();
                let vp = -2.0 * x / (w * w) * v;
                let vpp = (-2.0 / (w * w) + 4.0 * x * x / (w * w * w * w)) * v;
                (vp, vpp)
            }
            Family::Sech2Barrier => {
                let u = x / w;
                let sech = 1.0 / u.cosh();
                let tanh = u.tanh();
                let vp = -2.0 * a * sech * sech * tanh / w;
                let vpp = a * (4.0 * sech * sech * tanh * tanh - 2.0 * sech.powi(4)) / (w * w);
                (vp, vpp)
            }
            Family::SquareBarrier => (0.0, 0.0),
            Family::CustomSamples => (0.0, 0.0),
        }
    }

    /// Whether the profile is even in `x` (true for all analytic families).
    pub fn is_even(&self) -> bool {
        !matches!(self.family, Family::CustomSamples)
    }
}

/// Sample the potential on its grid.
pub fn sample_potential(spec: &PotentialSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let v: Vec<f64> = match spec.family {
        Family::CustomSamples => spec.samples.clone().unwrap(),
        _ => spec.grid.points().iter().map(|&x| spec.eval(x)).collect(),
    };
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("potential samples"));
    }
    Ok(v)
}

/// Numerical check of the standing hypotheses on `V`.
///
/// Reports, never aborts: quadrature values carry Richardson error estimates
/// plus an analytic tail bound for the catalog families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `int <x>^gamma |V| dx` on the truncated grid plus tail bound.
    pub l1_gamma_norm: f64,
    pub l1_gamma_error: f64,
    /// `int |V| + |V'| + |V''| dx`; meaningless when `w21_finite` is false.
    pub w21_norm_estimate: f64,
    pub w21_error: f64,
    /// False for potentials with jump discontinuities (square barrier).
    pub w21_finite: bool,
    pub positivity_flag: bool,
    pub gamma: f64,
    /// gamma > 6: full hypotheses of the decay theorem.
    pub gamma_exceeds_6: bool,
    /// gamma >= 4: enough for the coefficient derivative bounds.
    pub gamma_at_least_4: bool,
    /// gamma >= 1: enough for the transform isometry.
    pub gamma_at_least_1: bool,
    /// Analytic bound on the weighted mass beyond the grid.
    pub tail_bound: f64,
}

/// Weighted `L^1` quadrature of `<x>^gamma |V|` including derivative norms.
pub fn hypothesis_report(spec: &PotentialSpec, v: &[f64]) -> Result<HypothesisReport> {
    if v.len() != spec.grid.n {
        return Err(Error::GridMismatch(format!(
            "potential samples {} vs grid {}",
            v.len(),
            spec.grid.n
        )));
    }
    let xs = spec.grid.points();
    let h = spec.grid.dx();
    let bracket = |x: f64| (1.0 + x * x).sqrt();

    let weighted: Vec<f64> = xs
        .iter()
        .zip(v)
        .map(|(&x, &vv)| bracket(x).powf(spec.gamma) * vv.abs())
        .collect();
    let (l1_gamma, l1_err) = simpson_with_error(&weighted, h);

    let tail_bound = analytic_tail_bound(spec);

    let w21_finite = !matches!(spec.family, Family::SquareBarrier);
    let sob: Vec<f64> = xs
        .iter()
        .zip(v)
        .map(|(&x, &vv)| {
            let (vp, vpp) = spec.eval_derivatives(x);
            vv.abs() + vp.abs() + vpp.abs()
        })
        .collect();
    let (w21, w21_err) = simpson_with_error(&sob, h);

    Ok(HypothesisReport {
        l1_gamma_norm: l1_gamma + tail_bound,
        l1_gamma_error: l1_err + tail_bound,
        w21_norm_estimate: w21,
        w21_error: w21_err,
        w21_finite,
        positivity_flag: v.iter().all(|&x| x >= 0.0),
        gamma: spec.gamma,
        gamma_exceeds_6: spec.gamma > 6.0,
        gamma_at_least_4: spec.gamma >= 4.0,
        gamma_at_least_1: spec.gamma >= 1.0,
        tail_bound,
    })
}

/// Bound on `int_{|x| > x_edge} <x>^gamma |V| dx` for the catalog families.
///
/// Uses the first-term-times-geometric-factor bound for integrands decaying
/// at least exponentially past the grid edge; returns infinity when the
/// integrand is not yet decreasing there.
fn analytic_tail_bound(spec: &PotentialSpec) -> f64 {
    let edge = spec.grid.x_max.min(-spec.grid.x_min);
    let g = spec.gamma;
    let w = spec.width;
    let bracket = (1.0 + edge * edge).sqrt();
    let integrand = bracket.powf(g) * spec.eval(edge).abs();
    match spec.family {
        Family::SquareBarrier => {
            if edge > spec.width {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Family::GaussianBarrier => {
            // log-derivative of the integrand: g x/<x>^2 - 2x/w^2.
            let rate = 2.0 * edge / (w * w) - g * edge / (1.0 + edge * edge);
            if rate > 0.0 {
                2.0 * integrand / rate
            } else {
                f64::INFINITY
            }
        }
        Family::Sech2Barrier => {
            let rate = 2.0 / w - g * edge / (1.0 + edge * edge);
            if rate > 0.0 {
                2.0 * integrand / rate
            } else {
                f64::INFINITY
            }
        }
        // No analytic form; report the edge value scale as the bound.
        Family::CustomSamples => integrand,
    }
}

/// Sampled weight functions `W_+^s(x) = int_x^inf <y>^s |V| dy` and the
/// mirror `W_-^s`, for `s = 0..=4`.
#[derive(Debug, Clone)]
pub struct WeightFunctions {
    pub grid: XGrid,
    /// `w_plus[s][i]`, non-increasing in `i`.
    pub w_plus: Vec<Vec<f64>>,
    /// `w_minus[s][i]`, non-decreasing in `i`.
    pub w_minus: Vec<Vec<f64>>,
}

impl WeightFunctions {
    pub const S_MAX: usize = 4;

    pub fn compute(grid: &XGrid, v: &[f64]) -> Result<Self> {
        if v.len() != grid.n {
            return Err(Error::GridMismatch("weight functions".into()));
        }
        let h = grid.dx();
        let xs = grid.points();
        let mut w_plus = Vec::with_capacity(Self::S_MAX + 1);
        let mut w_minus = Vec::with_capacity(Self::S_MAX + 1);
        for s in 0..=Self::S_MAX {
            let f: Vec<f64> = xs
                .iter()
                .zip(v)
                .map(|(&x, &vv)| (1.0 + x * x).sqrt().powi(s as i32) * vv.abs())
                .collect();
            // Shared panel decomposition keeps w_plus + w_minus exactly equal
            // to the total on every node.
            let mut plus = vec![0.0; grid.n];
            for i in (0..grid.n - 1).rev() {
                plus[i] = plus[i + 1] + 0.5 * h * (f[i] + f[i + 1]);
            }
            let total = plus[0];
            let minus: Vec<f64> = plus.iter().map(|p| total - p).collect();
            w_plus.push(plus);
            w_minus.push(minus);
        }
        Ok(Self { grid: *grid, w_plus, w_minus })
    }

    pub fn total(&self, s: usize) -> f64 {
        self.w_plus[s][0]
    }
}

/// The three analytic catalog entries used throughout the test batteries.
pub fn catalog() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::new(
            Family::GaussianBarrier,
            2.0,
            1.0,
            7.0,
            XGrid::new(-10.0, 10.0, 4096).unwrap(),
        )
        .unwrap(),
        PotentialSpec::new(
            Family::Sech2Barrier,
            1.0,
            1.0,
            7.0,
            XGrid::new(-16.0, 16.0, 4096).unwrap(),
        )
        .unwrap(),
        PotentialSpec::new(
            Family::SquareBarrier,
            1.0,
            1.0,
            7.0,
            XGrid::new(-8.0, 8.0, 4096).unwrap(),
        )
        .unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss21(n: usize) -> PotentialSpec {
        PotentialSpec::new(
            Family::GaussianBarrier,
            2.0,
            1.0,
            7.0,
            XGrid::new(-10.0, 10.0, n).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_amplitude_gaussian_is_zero_potential() {
        let spec = PotentialSpec::new(
            Family::GaussianBarrier,
            0.0,
            1.0,
            7.0,
            XGrid::new(-10.0, 10.0, 64).unwrap(),
        )
        .unwrap();
        let v = sample_potential(&spec).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        let rep = hypothesis_report(&spec, &v).unwrap();
        assert_eq!(rep.l1_gamma_norm, 0.0);
        assert_eq!(rep.w21_norm_estimate, 0.0);
        assert!(rep.positivity_flag);
    }

    #[test]
    fn gaussian_value_at_origin_is_amplitude() {
        let spec = gauss21(4096);
        assert_eq!(spec.eval(0.0), 2.0);
    }

    #[test]
    fn square_barrier_vanishes_outside_support() {
        let spec = PotentialSpec::new(
            Family::SquareBarrier,
            1.0,
            1.0,
            7.0,
            XGrid::new(-8.0, 8.0, 64).unwrap(),
        )
        .unwrap();
        assert_eq!(spec.eval(1.5), 0.0);
        assert_eq!(spec.eval(-1.5), 0.0);
        assert_eq!(spec.eval(0.0), 1.0);
        assert_eq!(spec.eval(1.0), 1.0);
    }

    /// Independent oracle for the weighted norm: adaptive Simpson of the
    /// closed-form integrand, refined until the panel estimates settle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let h = b - a;
        let s1 = h / 6.0 * (f(a) + 4.0 * f(m) + f(b));
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let s2 = h / 12.0 * (f(a) + 4.0 * f(lm) + 2.0 * f(m) + 4.0 * f(rm) + f(b));
        if depth == 0 || (s2 - s1).abs() < 15.0 * tol {
            s2 + (s2 - s1) / 15.0
        } else {
            adaptive_simpson(f, a, m, 0.5 * tol, depth - 1)
                + adaptive_simpson(f, m, b, 0.5 * tol, depth - 1)
        }
    }

    #[test]
    fn gamma_weighted_norm_matches_adaptive_quadrature_oracle() {
        let spec = gauss21(8192);
        let v = sample_potential(&spec).unwrap();
        let rep = hypothesis_report(&spec, &v).unwrap();
        // 2 * int <x>^7 e^{-x^2} dx by adaptive Simpson of the closed form.
        let f = |x: f64| (1.0 + x * x).powf(3.5) * 2.0 * (-x * x).exp();
        let oracle = adaptive_simpson(&f, -12.0, 12.0, 1e-12, 30);
        assert!(
            (rep.l1_gamma_norm - oracle).abs() < 1e-6 * oracle + rep.l1_gamma_error,
            "norm {} vs oracle {} (err est {})",
            rep.l1_gamma_norm,
            oracle,
            rep.l1_gamma_error
        );
    }

    #[test]
    fn square_barrier_w21_violation_is_reported() {
        let spec = PotentialSpec::new(
            Family::SquareBarrier,
            1.0,
            1.0,
            7.0,
            XGrid::new(-8.0, 8.0, 1024).unwrap(),
        )
        .unwrap();
        let v = sample_potential(&spec).unwrap();
        let rep = hypothesis_report(&spec, &v).unwrap();
        assert!(!rep.w21_finite);
        assert!(rep.positivity_flag);
    }

    #[test]
    fn low_gamma_is_reported_not_rejected() {
        let mut spec = gauss21(512);
        spec.gamma = 3.0;
        let v = sample_potential(&spec).unwrap();
        let rep = hypothesis_report(&spec, &v).unwrap();
        assert!(!rep.gamma_exceeds_6);
        assert!(!rep.gamma_at_least_4);
        assert!(rep.gamma_at_least_1);
    }

    #[test]
    fn weight_functions_partition_and_monotonicity() {
        for spec in catalog() {
            if spec.amplitude == 0.0 {
                continue;
            }
            let v = sample_potential(&spec).unwrap();
            let w = WeightFunctions::compute(&spec.grid, &v).unwrap();
            for s in 0..=WeightFunctions::S_MAX {
                let total = w.total(s);
                assert!(total > 0.0);
                for i in 0..spec.grid.n {
                    assert!(w.w_plus[s][i] >= -1e-15);
                    assert!(w.w_minus[s][i] >= -1e-15);
                    let sum = w.w_plus[s][i] + w.w_minus[s][i];
                    assert!(
                        (sum - total).abs() < 1e-12 * total.max(1.0),
                        "partition defect at i={i}, s={s}"
                    );
                    if i > 0 {
                        assert!(w.w_plus[s][i] <= w.w_plus[s][i - 1] + 1e-15);
                        assert!(w.w_minus[s][i] >= w.w_minus[s][i - 1] - 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn refinement_stays_within_error_estimate() {
        let coarse = gauss21(2048);
        let fine = gauss21(4096);
        let rc = hypothesis_report(&coarse, &sample_potential(&coarse).unwrap()).unwrap();
        let rf = hypothesis_report(&fine, &sample_potential(&fine).unwrap()).unwrap();
        assert!((rc.l1_gamma_norm - rf.l1_gamma_norm).abs() <= rc.l1_gamma_error.max(1e-12));
        assert!((rc.w21_norm_estimate - rf.w21_norm_estimate).abs() <= rc.w21_error.max(1e-12));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let text = r#"{
            "family": "gaussian_barrier",
            "params": {"amplitude": 2.0, "width": 1.0},
            "gamma": 7.0,
            "grid": {"x_min": -10.0, "x_max": 10.0, "n_x": 256}
        }"#;
        let spec = PotentialSpec::from_json(text).unwrap();
        assert_eq!(spec.family, Family::GaussianBarrier);
        assert_eq!(spec.amplitude, 2.0);
        let round = PotentialSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(round, spec);

        let bad = r#"{
            "family": "custom_samples",
            "gamma": 7.0,
            "grid": {"x_min": -1.0, "x_max": 1.0, "n_x": 16},
            "samples": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0],
            "x_samples": [-1,-0.9,-0.8,-0.7,-0.6,-0.5,-0.4,-0.3,-0.2,-0.1,0,0.1,0.2,0.3,0.45,0.5]
        }"#;
        match PotentialSpec::from_json(bad) {
            Err(Error::NonUniformGrid { .. }) => {}
            other => panic!("expected NonUniformGrid, got {other:?}"),
        }

        let nan = r#"{
            "family": "custom_samples",
            "gamma": 7.0,
            "grid": {"x_min": -1.0, "x_max": 1.0, "n_x": 16},
            "samples": [0,0,0,0,0,0,0,null,0,0,0,0,0,0,0,0]
        }"#;
        assert!(PotentialSpec::from_json(nan).is_err());
    }
}
