//! Collision kernel data: `B_ij(|v-v*|, cos t) = C^Phi_ij |v-v*|^gamma b_ij(cos t)`.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::grid::gauss_legendre;
use crate::math;

/// Angular part `b(cos theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngularKind {
    /// Constant angular part (hard spheres `b = 1`, Maxwell molecules).
    Constant(f64),
    /// `scale * |cos| * sqrt(1 - cos^2)`, the strong Grad-cutoff shape that
    /// vanishes at grazing and head-on angles.
    SinCos(f64),
}

impl AngularKind {
    #[inline(always)]
    pub fn eval(&self, cos_theta: f64) -> f64 {
        match *self {
            AngularKind::Constant(b0) => b0,
            AngularKind::SinCos(s) => {
                let c = cos_theta.clamp(-1.0, 1.0);
                s * math::abs(c) * math::sqrt((1.0 - c * c).max(0.0))
            }
        }
    }

    /// `b^inf = sup |b|`.
    pub fn sup(&self) -> f64 {
        match *self {
            AngularKind::Constant(b0) => b0,
            // |c| sqrt(1-c^2) peaks at 1/2 for c = 1/sqrt(2)
            AngularKind::SinCos(s) => 0.5 * s,
        }
    }

    /// `l_b = int_{S^2} b(cos theta) dsigma`.
    pub fn integral(&self) -> f64 {
        match *self {
            AngularKind::Constant(b0) => math::FOUR_PI * b0,
            // 2 pi * int_-1^1 |c| sqrt(1-c^2) dc = 2 pi * 2/3
            AngularKind::SinCos(s) => math::FOUR_PI / 3.0 * s,
        }
    }
}

/// Per-pair collision kernel data for an `N`-species mixture.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub n_species: usize,
    /// Exponent of the kinetic part, hard (`(0,1]`) or Maxwellian (`0`).
    pub gamma: f64,
    /// Symmetric positive matrix `C^Phi_ij`, row-major `N x N`.
    c_phi: Vec<f64>,
    /// Angular part per ordered pair, row-major (symmetric).
    angular: Vec<AngularKind>,
    /// Cached `sup b_ij`.
    b_sup: Vec<f64>,
    /// Cached `int_{S^2} b_ij`.
    b_int: Vec<f64>,
    /// The lower sphere-overlap constant of the cutoff assumption, kept for
    /// completeness.
    pub cb: f64,
}

impl KernelSpec {
    /// Kernel with the same kinetic constant and angular part for every pair.
    pub fn uniform(
        n_species: usize,
        gamma: f64,
        c_phi: f64,
        angular: AngularKind,
    ) -> Result<Self, CoreError> {
        let c = alloc::vec![c_phi; n_species * n_species];
        let a = alloc::vec![angular; n_species * n_species];
        KernelSpec::new(n_species, gamma, c, a)
    }

    /// Hard-sphere kernel (`gamma = 1`, `b = 1`) with unit kinetic constants.
    pub fn hard_spheres(n_species: usize) -> Self {
        KernelSpec::uniform(n_species, 1.0, 1.0, AngularKind::Constant(1.0)).unwrap()
    }

    /// Maxwell-molecule kernel (`gamma = 0`, `b = 1`).
    pub fn maxwell(n_species: usize) -> Self {
        KernelSpec::uniform(n_species, 0.0, 1.0, AngularKind::Constant(1.0)).unwrap()
    }

    pub fn new(
        n_species: usize,
        gamma: f64,
        c_phi: Vec<f64>,
        angular: Vec<AngularKind>,
    ) -> Result<Self, CoreError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(CoreError::InvalidConfig("gamma must lie in [0, 1]"));
        }
        if c_phi.len() != n_species * n_species || angular.len() != n_species * n_species {
            return Err(CoreError::ShapeMismatch("kernel matrices"));
        }
        for i in 0..n_species {
            for j in 0..n_species {
                let a = c_phi[i * n_species + j];
                let b = c_phi[j * n_species + i];
                if !(a > 0.0) {
                    return Err(CoreError::NonPositiveParameter("C^Phi entry"));
                }
                if math::abs(a - b) > 1e-14 * a.max(b) {
                    return Err(CoreError::InvalidConfig("C^Phi must be symmetric"));
                }
                if angular[i * n_species + j] != angular[j * n_species + i] {
                    return Err(CoreError::InvalidConfig("angular parts must be symmetric"));
                }
            }
        }
        let b_sup: Vec<f64> = angular.iter().map(|a| a.sup()).collect();
        let b_int: Vec<f64> = angular.iter().map(|a| a.integral()).collect();
        if b_int.iter().any(|&l| !(l > 0.0)) {
            return Err(CoreError::NonPositiveParameter("angular integral"));
        }
        let cb = cutoff_overlap_constant(&angular, n_species);
        Ok(KernelSpec {
            n_species,
            gamma,
            c_phi,
            angular,
            b_sup,
            b_int,
            cb,
        })
    }

    #[inline(always)]
    pub fn c_phi(&self, i: usize, j: usize) -> f64 {
        self.c_phi[i * self.n_species + j]
    }

    #[inline(always)]
    pub fn angular(&self, i: usize, j: usize) -> AngularKind {
        self.angular[i * self.n_species + j]
    }

    /// `sup b_ij`.
    #[inline(always)]
    pub fn b_sup(&self, i: usize, j: usize) -> f64 {
        self.b_sup[i * self.n_species + j]
    }

    /// `l_{b_ij} = int_{S^2} b_ij`.
    #[inline(always)]
    pub fn b_int(&self, i: usize, j: usize) -> f64 {
        self.b_int[i * self.n_species + j]
    }

    /// Kinetic part `Phi_ij(r) = C^Phi_ij r^gamma`.
    #[inline(always)]
    pub fn phi(&self, i: usize, j: usize, r: f64) -> f64 {
        self.c_phi(i, j) * math::powf(r, self.gamma)
    }

    /// Full kernel `B_ij(r, cos theta)`.
    #[inline(always)]
    pub fn eval(&self, i: usize, j: usize, r: f64, cos_theta: f64) -> f64 {
        self.phi(i, j, r) * self.angular(i, j).eval(cos_theta)
    }

    /// `max_{ij} 4 pi b_ij^inf / l_{b_ij}`, the angular factor of the moment
    /// constant `C_k`.
    pub fn max_angular_ratio(&self) -> f64 {
        let mut best = 0.0_f64;
        for k in 0..self.b_sup.len() {
            best = best.max(math::FOUR_PI * self.b_sup[k] / self.b_int[k]);
        }
        best
    }
}

/// Numeric evaluation of
/// `min_i inf_{s1,s2} int_{S^2} min(b_ii(s1.s3), b_ii(s2.s3)) ds3`.
///
/// For a constant angular part the infimum is just `l_b`; otherwise it is
/// scanned over the angle between `s1` and `s2`.
fn cutoff_overlap_constant(angular: &[AngularKind], n_species: usize) -> f64 {
    let mut cb = f64::INFINITY;
    for i in 0..n_species {
        let a = angular[i * n_species + i];
        let val = match a {
            AngularKind::Constant(b0) => math::FOUR_PI * b0,
            AngularKind::SinCos(_) => overlap_scan(a),
        };
        cb = cb.min(val);
    }
    cb
}

fn overlap_scan(a: AngularKind) -> f64 {
    // place s1 = e_z, s2 at angle psi in the xz-plane; integrate over s3
    let (nodes, weights) = gauss_legendre(48);
    let n_phi = 64usize;
    let dphi = math::TWO_PI / n_phi as f64;
    let mut inf = f64::INFINITY;
    let scan = 96usize;
    for t in 0..=scan {
        let psi = math::PI * t as f64 / scan as f64;
        let (sp, cp) = (math::sin(psi), math::cos(psi));
        let mut total = 0.0;
        for (z, wz) in nodes.iter().zip(weights.iter()) {
            let r = math::sqrt((1.0 - z * z).max(0.0));
            for kphi in 0..n_phi {
                let phi = (kphi as f64 + 0.5) * dphi;
                let s3 = [r * math::cos(phi), r * math::sin(phi), *z];
                let c1 = s3[2];
                let c2 = sp * s3[0] + cp * s3[2];
                total += wz * dphi * a.eval(c1).min(a.eval(c2));
            }
        }
        inf = inf.min(total);
    }
    inf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_sphere_constants() {
        let k = KernelSpec::hard_spheres(2);
        assert_eq!(k.b_sup(0, 1), 1.0);
        assert!((k.b_int(0, 1) - math::FOUR_PI).abs() < 1e-12);
        assert!((k.max_angular_ratio() - 1.0).abs() < 1e-12);
        assert!((k.cb - math::FOUR_PI).abs() < 1e-12);
    }

    #[test]
    fn sincos_constants() {
        let a = AngularKind::SinCos(1.0);
        assert!((a.sup() - 0.5).abs() < 1e-15);
        assert!((a.integral() - math::FOUR_PI / 3.0).abs() < 1e-12);
        // quadrature check of the integral; |cos| has a kink at the equator
        // so the product rule converges only algebraically here
        let s = crate::grid::SphereQuadrature::product(64, 8).unwrap();
        let num = s.integrate(|n| a.eval(n[2]));
        assert!((num - a.integral()).abs() < 5e-3, "num = {num}");
        // the angular moment ratio is 4 pi (1/2) / (4 pi / 3) = 3/2
        let k = KernelSpec::uniform(1, 1.0, 1.0, a).unwrap();
        assert!((k.max_angular_ratio() - 1.5).abs() < 1e-12);
        // the overlap constant is positive
        assert!(k.cb > 0.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(KernelSpec::uniform(1, 1.5, 1.0, AngularKind::Constant(1.0)).is_err());
        assert!(KernelSpec::uniform(1, 0.5, 0.0, AngularKind::Constant(1.0)).is_err());
        let asym = KernelSpec::new(
            2,
            1.0,
            alloc::vec![1.0, 2.0, 3.0, 1.0],
            alloc::vec![AngularKind::Constant(1.0); 4],
        );
        assert!(asym.is_err());
    }

    #[test]
    fn kernel_evaluation() {
        let k = KernelSpec::uniform(1, 0.5, 2.0, AngularKind::Constant(3.0)).unwrap();
        let b = k.eval(0, 0, 4.0, 0.3);
        assert!((b - 2.0 * 2.0 * 3.0).abs() < 1e-14);
    }
}
