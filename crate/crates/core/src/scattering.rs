//! Transmission and reflection coefficients, the scattering matrix, and the
//! genericity diagnostics.
//!
//! With both Jost modifiers in hand,
//!
//! `1/T(k)  = 1 - (1/2ik) int V m± dx`            (either sign; cross-checked)
//! `R±(k)/T = (1/2ik) int e^{∓2ikx} V m∓ dx`,
//!
//! evaluated on the positive staggered grid only; negative frequencies follow
//! from `T(-k) = conj T(k)`, `R±(-k) = conj R±(k)` by construction.

use num_complex::Complex64;

use crate::grid::gregory_weights;
use crate::jost::{JostField, Side};
use crate::mat2::Mat2;
use crate::potential::PotentialSpec;
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Scattering coefficients sampled on positive frequencies.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub k: Vec<f64>,
    pub t: Vec<Complex64>,
    pub r_plus: Vec<Complex64>,
    pub r_minus: Vec<Complex64>,
    /// First k-derivatives, when the Jost field carried derivative data.
    pub dk_t: Option<Vec<Complex64>>,
    pub dk_r_plus: Option<Vec<Complex64>>,
    pub dk_r_minus: Option<Vec<Complex64>>,
    /// Disagreement between the two 1/T routes, per k.
    pub inv_t_mismatch: Vec<f64>,
}

impl ScatteringData {
    /// `|T|^2 + |R+|^2 - 1` (the `R-` defect coincides up to rounding).
    pub fn unitarity_defect(&self, i: usize) -> f64 {
        (self.t[i].norm_sqr() + self.r_plus[i].norm_sqr() - 1.0).abs()
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        (0..self.k.len()).map(|i| self.unitarity_defect(i)).fold(0.0, f64::max)
    }

    /// T at signed frequency, linear interpolation on the grid.
    pub fn t_at(&self, k: f64) -> Complex64 {
        let v = self.interp(&self.t, k.abs());
        if k >= 0.0 {
            v
        } else {
            v.conj()
        }
    }

    pub fn r_plus_at(&self, k: f64) -> Complex64 {
        let v = self.interp(&self.r_plus, k.abs());
        if k >= 0.0 {
            v
        } else {
            v.conj()
        }
    }

    pub fn r_minus_at(&self, k: f64) -> Complex64 {
        let v = self.interp(&self.r_minus, k.abs());
        if k >= 0.0 {
            v
        } else {
            v.conj()
        }
    }

    fn interp(&self, f: &[Complex64], k: f64) -> Complex64 {
        let ks = &self.k;
        if ks.len() == 1 {
            return f[0];
        }
        if k <= ks[0] {
            // Toward 0 the coefficients approach T(0)=0, R(0)=-1 linearly;
            // extrapolate through the first two samples.
            let s = (f[1] - f[0]) / (ks[1] - ks[0]);
            return f[0] + s * (k - ks[0]);
        }
        if k >= ks[ks.len() - 1] {
            return f[ks.len() - 1];
        }
        let j = ks.partition_point(|&x| x < k).max(1);
        let (k0, k1) = (ks[j - 1], ks[j]);
        let w = (k - k0) / (k1 - k0);
        f[j - 1] * (1.0 - w) + f[j] * w
    }
}

/// Integrals of `w(x) V(x) m(x,k)` over the support of `V` with end-corrected
/// weights.
fn support_integral(
    xs: &[f64],
    v: &[f64],
    row: &[Complex64],
    phase: impl Fn(f64) -> Complex64,
) -> Complex64 {
    let j_min = v.iter().position(|&x| x != 0.0).unwrap_or(0);
    let j_max = v.iter().rposition(|&x| x != 0.0).unwrap_or(0);
    if j_max <= j_min {
        return Complex64::new(0.0, 0.0);
    }
    let h = xs[1] - xs[0];
    let w = gregory_weights(j_max - j_min + 1, h);
    let mut acc = Complex64::new(0.0, 0.0);
    for (off, wj) in w.iter().enumerate() {
        let j = j_min + off;
        acc += *wj * phase(xs[j]) * v[j] * row[j];
    }
    acc
}

/// Compute T and R± from a two-sided Jost field.
///
/// The two 1/T evaluations must agree to `tol_cross` relative; disagreement
/// signals an under-resolved grid.
pub fn compute_tr(field: &JostField, spec: &PotentialSpec, tol_cross: f64) -> Result<ScatteringData> {
    let m_plus = field.m(Side::Plus)?;
    let m_minus = field.m(Side::Minus)?;
    let g = &field.x_grid;
    let xs = g.points();
    let v: Vec<f64> = xs.iter().map(|&x| spec.eval(x)).collect();

    let n_k = field.k.len();
    let mut t = Vec::with_capacity(n_k);
    let mut r_plus = Vec::with_capacity(n_k);
    let mut r_minus = Vec::with_capacity(n_k);
    let mut mismatch = Vec::with_capacity(n_k);

    for (ki, &k) in field.k.iter().enumerate() {
        let two_ik = 2.0 * I * k;
        let ip = support_integral(&xs, &v, m_plus.row(ki), |_| Complex64::new(1.0, 0.0));
        let im = support_integral(&xs, &v, m_minus.row(ki), |_| Complex64::new(1.0, 0.0));
        let inv_t_p = 1.0 - ip / two_ik;
        let inv_t_m = 1.0 - im / two_ik;
        let diff = (inv_t_p - inv_t_m).norm();
        let scale = inv_t_p.norm().max(1.0);
        if diff > tol_cross * scale {
            return Err(Error::NoConvergence { residual: diff / scale, iterations: 0 });
        }
        mismatch.push(diff / scale);
        let inv_t = 0.5 * (inv_t_p + inv_t_m);
        let tk = 1.0 / inv_t;

        let rp_over_t =
            support_integral(&xs, &v, m_minus.row(ki), |x| Complex64::from_polar(1.0, -2.0 * k * x))
                / two_ik;
        let rm_over_t =
            support_integral(&xs, &v, m_plus.row(ki), |x| Complex64::from_polar(1.0, 2.0 * k * x))
                / two_ik;
        t.push(tk);
        r_plus.push(rp_over_t * tk);
        r_minus.push(rm_over_t * tk);
    }

    // First derivatives when the modifier derivatives are available:
    // d(1/T) = I/(2ik^2) - I'/(2ik), T' = -T^2 d(1/T), and the product rule
    // on R±/T.
    let (mut dk_t, mut dk_rp, mut dk_rm) = (None, None, None);
    if field.derivative_order >= 1 {
        let dm_plus = field.dk_m(Side::Plus)?;
        let dm_minus = field.dk_m(Side::Minus)?;
        let mut dt = Vec::with_capacity(n_k);
        let mut drp = Vec::with_capacity(n_k);
        let mut drm = Vec::with_capacity(n_k);
        for (ki, &k) in field.k.iter().enumerate() {
            let two_ik = 2.0 * I * k;
            let ip = support_integral(&xs, &v, m_plus.row(ki), |_| Complex64::new(1.0, 0.0));
            let ip_dot = support_integral(&xs, &v, dm_plus.row(ki), |_| Complex64::new(1.0, 0.0));
            let d_inv_t = ip / (two_ik * k) - ip_dot / two_ik;
            let tk = t[ki];
            let dtk = -tk * tk * d_inv_t;
            dt.push(dtk);

            let jp = support_integral(&xs, &v, m_minus.row(ki), |x| {
                Complex64::from_polar(1.0, -2.0 * k * x)
            });
            let jp_dot = support_integral(&xs, &v, dm_minus.row(ki), |x| {
                Complex64::from_polar(1.0, -2.0 * k * x)
            }) + support_integral(&xs, &v, m_minus.row(ki), |x| {
                -2.0 * I * x * Complex64::from_polar(1.0, -2.0 * k * x)
            });
            let d_rp_over_t = -jp / (two_ik * k) + jp_dot / two_ik;
            drp.push(d_rp_over_t * tk + (jp / two_ik) * dtk);

            let jm = support_integral(&xs, &v, m_plus.row(ki), |x| {
                Complex64::from_polar(1.0, 2.0 * k * x)
            });
            let jm_dot = support_integral(&xs, &v, dm_plus.row(ki), |x| {
                Complex64::from_polar(1.0, 2.0 * k * x)
            }) + support_integral(&xs, &v, m_plus.row(ki), |x| {
                2.0 * I * x * Complex64::from_polar(1.0, 2.0 * k * x)
            });
            let d_rm_over_t = -jm / (two_ik * k) + jm_dot / two_ik;
            drm.push(d_rm_over_t * tk + (jm / two_ik) * dtk);
        }
        dk_t = Some(dt);
        dk_rp = Some(drp);
        dk_rm = Some(drm);
    }

    Ok(ScatteringData {
        k: field.k.clone(),
        t,
        r_plus,
        r_minus,
        dk_t,
        dk_r_plus: dk_rp,
        dk_r_minus: dk_rm,
        inv_t_mismatch: mismatch,
    })
}

/// `S(k) = [[T, R+], [R-, T]]` and its inverse `[[conj T, conj R-],
/// [conj R+, conj T]]` at a signed frequency.
pub fn scattering_matrix(sd: &ScatteringData, k: f64) -> (Mat2, Mat2) {
    let t = sd.t_at(k);
    let rp = sd.r_plus_at(k);
    let rm = sd.r_minus_at(k);
    let s = Mat2::new(t, rp, rm, t);
    let s_inv = Mat2::new(t.conj(), rm.conj(), rp.conj(), t.conj());
    (s, s_inv)
}

/// Genericity diagnostics: the zero-energy integral `int V m dx`, the slope
/// `T'(0)`, and the resulting classification.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GenericityReport {
    /// `int V m(x, k) dx` extrapolated to k = 0.
    pub wronskian_integral: Complex64,
    /// Spread of the extrapolation, used as its error bar.
    pub wronskian_error: f64,
    /// `T'(0)` from Richardson extrapolation of `T(k)/k`.
    pub t_slope_at_zero: Complex64,
    pub is_generic: bool,
    /// Set when the integral sits inside its own error bar.
    pub inconclusive: bool,
    /// `|T'(0) int V m + 2i|`: the two genericity routes must be consistent.
    pub cross_check_defect: f64,
}

/// Assemble the report from the three smallest grid frequencies.
pub fn genericity_report(
    field: &JostField,
    sd: &ScatteringData,
    spec: &PotentialSpec,
) -> Result<GenericityReport> {
    if field.k.len() < 3 {
        return Err(Error::InvalidSpec("need at least 3 frequencies for extrapolation".into()));
    }
    let m_plus = field.m(Side::Plus)?;
    let g = &field.x_grid;
    let xs = g.points();
    let v: Vec<f64> = xs.iter().map(|&x| spec.eval(x)).collect();

    let ints: Vec<Complex64> = (0..3)
        .map(|ki| support_integral(&xs, &v, m_plus.row(ki), |_| Complex64::new(1.0, 0.0)))
        .collect();
    let ks = [field.k[0], field.k[1], field.k[2]];
    let at_zero = quadratic_extrapolate(&ks, &ints);
    let spread = (at_zero - ints[0]).norm().max((ints[0] - ints[1]).norm() / 4.0);

    let slopes: Vec<Complex64> = (0..3).map(|ki| sd.t[ki] / field.k[ki]).collect();
    let t_slope = quadratic_extrapolate(&ks, &slopes);

    let err = spread.max(1e-14);
    let is_generic = at_zero.norm() > 3.0 * err;
    let inconclusive = at_zero.norm() <= err;
    let cross = (t_slope * at_zero + 2.0 * I).norm();

    Ok(GenericityReport {
        wronskian_integral: at_zero,
        wronskian_error: spread,
        t_slope_at_zero: t_slope,
        is_generic,
        inconclusive,
        cross_check_defect: cross,
    })
}

/// Value at 0 of the quadratic through `(k_i, f_i)`.
fn quadratic_extrapolate(ks: &[f64; 3], f: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..3 {
        let mut l = Complex64::new(1.0, 0.0);
        for j in 0..3 {
            if i != j {
                l *= Complex64::new((0.0 - ks[j]) / (ks[i] - ks[j]), 0.0);
            }
        }
        acc += l * f[i];
    }
    acc
}
