//! Scalar math shims and small 3-vector helpers.
//!
//! `core` has no float math, so every transcendental goes through this module
//! and dispatches to `std` or `libm` depending on the feature set.

pub const PI: f64 = core::f64::consts::PI;
pub const TWO_PI: f64 = 2.0 * PI;
pub const FOUR_PI: f64 = 4.0 * PI;

#[cfg(feature = "std")]
mod imp {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline(always)]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    #[inline(always)]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline(always)]
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    #[inline(always)]
    pub fn expm1(x: f64) -> f64 {
        x.exp_m1()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline(always)]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline(always)]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline(always)]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    #[inline(always)]
    pub fn expm1(x: f64) -> f64 {
        libm::expm1(x)
    }
}

pub use imp::{abs, cos, exp, expm1, floor, ln, powf, sin, sqrt};

/// `x^k` for small nonnegative integer exponents by repeated squaring.
#[inline]
pub fn powi(x: f64, mut k: u32) -> f64 {
    let mut base = x;
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

pub type Vec3 = [f64; 3];

#[inline(always)]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline(always)]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline(always)]
pub fn norm(a: Vec3) -> f64 {
    sqrt(norm_sq(a))
}

#[inline(always)]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline(always)]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline(always)]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s*b`.
#[inline(always)]
pub fn axpy(a: Vec3, s: f64, b: Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Unit vector along `a`; `None` when `|a|` is below `eps`.
#[inline]
pub fn unit(a: Vec3, eps: f64) -> Option<Vec3> {
    let n = norm(a);
    if n < eps {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Two unit vectors completing `n` to an orthonormal frame.
pub fn orthonormal_complement(n: Vec3) -> (Vec3, Vec3) {
    // pick the axis least aligned with n to avoid degeneracy
    let ax = if abs(n[0]) <= abs(n[1]) && abs(n[0]) <= abs(n[2]) {
        [1.0, 0.0, 0.0]
    } else if abs(n[1]) <= abs(n[2]) {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut e1 = sub(ax, scale(n, dot(ax, n)));
    let inv = 1.0 / norm(e1);
    e1 = scale(e1, inv);
    let e2 = [
        n[1] * e1[2] - n[2] * e1[1],
        n[2] * e1[0] - n[0] * e1[2],
        n[0] * e1[1] - n[1] * e1[0],
    ];
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_powf() {
        for &x in &[0.3, 1.7, 2.0] {
            for k in 0..12u32 {
                let a = powi(x, k);
                let b = powf(x, k as f64);
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn complement_is_orthonormal() {
        let n = unit([0.3, -1.2, 0.5], 1e-300).unwrap();
        let (e1, e2) = orthonormal_complement(n);
        assert!(dot(e1, n).abs() < 1e-14);
        assert!(dot(e2, n).abs() < 1e-14);
        assert!(dot(e1, e2).abs() < 1e-14);
        assert!((norm(e1) - 1.0).abs() < 1e-14);
        assert!((norm(e2) - 1.0).abs() < 1e-14);
    }
}
