//! Small complex 2x2 matrices: scattering matrices, intensity matrices, and
//! closed-form exponentials of Hermitian generators.

use num_complex::Complex64;

/// Row-major complex 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mat2 {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        Self::new(a, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), d)
    }

    pub fn scale(self, s: Complex64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn mul(self, o: Self) -> Self {
        Self::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn apply(self, v: (Complex64, Complex64)) -> (Complex64, Complex64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn adjoint(self) -> Self {
        Self::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    /// Max-abs entry of `self - other`.
    pub fn dist(self, o: Self) -> f64 {
        (self.a - o.a)
            .norm()
            .max((self.b - o.b).norm())
            .max((self.c - o.c).norm())
            .max((self.d - o.d).norm())
    }

    pub fn hermiticity_defect(self) -> f64 {
        self.dist(self.adjoint())
    }

    /// `exp(i H)` for Hermitian `H`, via the Pauli decomposition
    /// `H = p I + v . sigma`:
    /// `exp(iH) = e^{ip} (cos|v| I + i sin|v|/|v| v . sigma)`.
    /// Exactly unitary up to rounding.
    pub fn exp_i_hermitian(self) -> Self {
        let p = 0.5 * (self.a.re + self.d.re);
        let vx = 0.5 * (self.b.re + self.c.re);
        let vy = 0.5 * (self.c.im - self.b.im);
        let vz = 0.5 * (self.a.re - self.d.re);
        let r = (vx * vx + vy * vy + vz * vz).sqrt();
        let (cos_r, sinc_r) = if r < 1e-30 {
            (1.0, 1.0)
        } else {
            (r.cos(), r.sin() / r)
        };
        let phase = Complex64::from_polar(1.0, p);
        let i = Complex64::new(0.0, 1.0);
        // v . sigma = [[vz, vx - i vy], [vx + i vy, -vz]]
        let m = Mat2::new(
            Complex64::new(cos_r, 0.0) + i * sinc_r * vz,
            i * sinc_r * Complex64::new(vx, -vy),
            i * sinc_r * Complex64::new(vx, vy),
            Complex64::new(cos_r, 0.0) - i * sinc_r * vz,
        );
        m.scale(phase)
    }

    /// `max_entry |U* U - I|`.
    pub fn unitarity_defect(self) -> f64 {
        self.adjoint().mul(self).dist(Mat2::identity())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = Mat2::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert!(z.exp_i_hermitian().dist(Mat2::identity()) < 1e-15);
    }

    #[test]
    fn exp_diagonal_matches_scalar_phases() {
        let h = Mat2::diag(c(0.3, 0.0), c(-1.2, 0.0));
        let u = h.exp_i_hermitian();
        assert!((u.a - Complex64::from_polar(1.0, 0.3)).norm() < 1e-15);
        assert!((u.d - Complex64::from_polar(1.0, -1.2)).norm() < 1e-15);
        assert!(u.b.norm() < 1e-15 && u.c.norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn exp_i_hermitian_is_unitary(a in -5.0f64..5.0, d in -5.0f64..5.0,
                                      br in -5.0f64..5.0, bi in -5.0f64..5.0) {
            let h = Mat2::new(c(a, 0.0), c(br, bi), c(br, -bi), c(d, 0.0));
            prop_assert!(h.hermiticity_defect() < 1e-12);
            let u = h.exp_i_hermitian();
            prop_assert!(u.unitarity_defect() < 1e-12);
        }

        #[test]
        fn exp_preserves_pair_norm(a in -3.0f64..3.0, d in -3.0f64..3.0,
                                   br in -3.0f64..3.0, bi in -3.0f64..3.0,
                                   z1r in -2.0f64..2.0, z1i in -2.0f64..2.0,
                                   z2r in -2.0f64..2.0, z2i in -2.0f64..2.0) {
            let h = Mat2::new(c(a, 0.0), c(br, bi), c(br, -bi), c(d, 0.0));
            let u = h.exp_i_hermitian();
            let z = (c(z1r, z1i), c(z2r, z2i));
            let w = u.apply(z);
            let n0 = (z.0.norm_sqr() + z.1.norm_sqr()).sqrt();
            let n1 = (w.0.norm_sqr() + w.1.norm_sqr()).sqrt();
            prop_assert!((n0 - n1).abs() <= 1e-12 * (1.0 + n0));
        }
    }
}
