//! Elastic collision kinematics for unequal masses and the Carleman
//! admissible sets (a hyperplane, and a sphere when the masses differ).

use crate::error::CoreError;
use crate::math::{self, Vec3};
use crate::mixture::SpeciesSet;

/// Separations below this threshold are treated as grazing: the collision
/// returns the incoming pair unchanged.
pub const GRAZING_EPS: f64 = 1e-14;

/// One collision configuration between species `i` and `j`.
#[derive(Clone, Debug)]
pub struct CollisionPair {
    pub v: Vec3,
    pub v_star: Vec3,
    pub i: usize,
    pub j: usize,
    pub sigma: Vec3,
}

impl CollisionPair {
    pub fn new(v: Vec3, v_star: Vec3, i: usize, j: usize, sigma: Vec3) -> Result<Self, CoreError> {
        if math::abs(math::norm(sigma) - 1.0) > 1e-12 {
            return Err(CoreError::InvalidConfig("sigma must be a unit vector"));
        }
        Ok(CollisionPair {
            v,
            v_star,
            i,
            j,
            sigma,
        })
    }
}

/// Carleman admissible set: the hyperplane through `V_E` orthogonal to
/// `v - v'`, or the sphere around `O` for unequal masses.
#[derive(Clone, Debug)]
pub enum CarlemanSet {
    Hyperplane { origin: Vec3, normal: Vec3 },
    Sphere { center: Vec3, radius: f64 },
}

/// Post-collisional velocities
/// `v' = (m_i v + m_j v* + m_j |v-v*| sigma) / (m_i+m_j)` and
/// `v'* = (m_i v + m_j v* - m_i |v-v*| sigma) / (m_i+m_j)`.
///
/// Momentum `m_i v + m_j v*` and kinetic energy `m_i|v|^2 + m_j|v*|^2` are
/// preserved exactly up to floating point.
#[inline]
pub fn post_collision(pair: &CollisionPair, species: &SpeciesSet) -> (Vec3, Vec3) {
    post_collision_raw(
        pair.v,
        pair.v_star,
        species.mass(pair.i),
        species.mass(pair.j),
        pair.sigma,
    )
}

#[inline]
pub fn post_collision_raw(v: Vec3, v_star: Vec3, mi: f64, mj: f64, sigma: Vec3) -> (Vec3, Vec3) {
    let u = math::sub(v, v_star);
    let r = math::norm(u);
    if r < GRAZING_EPS {
        return (v, v_star);
    }
    let inv = 1.0 / (mi + mj);
    let center = math::scale(math::axpy(math::scale(v, mi), mj, v_star), inv);
    let vp = math::axpy(center, mj * r * inv, sigma);
    let vsp = math::axpy(center, -(mi * r * inv), sigma);
    (vp, vsp)
}

/// Hyperplane of admissible `v'*` for the gain term in `f_i(v')`: passes
/// through `V_E(v,v') = ((m_i+m_j)/(2 m_j)) v - ((m_i-m_j)/(2 m_j)) v'` and is
/// orthogonal to `v - v'`.
pub fn carleman_hyperplane(
    v: Vec3,
    v_prime: Vec3,
    i: usize,
    j: usize,
    species: &SpeciesSet,
) -> Result<CarlemanSet, CoreError> {
    let normal = math::sub(v, v_prime);
    if math::norm(normal) < GRAZING_EPS {
        return Err(CoreError::DegenerateSet("v = v' gives no hyperplane"));
    }
    let mi = species.mass(i);
    let mj = species.mass(j);
    let a = (mi + mj) / (2.0 * mj);
    let b = (mi - mj) / (2.0 * mj);
    let origin = math::sub(math::scale(v, a), math::scale(v_prime, b));
    Ok(CarlemanSet::Hyperplane { origin, normal })
}

/// Sphere of admissible `v'` for the gain term in `f_j(v'*)` when the masses
/// differ: center `(m_i v - m_j v'*)/(m_i - m_j)`, radius
/// `m_j |v - v'*| / |m_i - m_j|`.
pub fn carleman_sphere(
    v: Vec3,
    v_star_prime: Vec3,
    i: usize,
    j: usize,
    species: &SpeciesSet,
) -> Result<CarlemanSet, CoreError> {
    let mi = species.mass(i);
    let mj = species.mass(j);
    if mi == mj {
        return Err(CoreError::KindMismatch(
            "equal masses: the admissible set is a hyperplane",
        ));
    }
    let sep = math::sub(v, v_star_prime);
    if math::norm(sep) < GRAZING_EPS {
        return Err(CoreError::DegenerateSet("v = v'* gives no sphere"));
    }
    let inv = 1.0 / (mi - mj);
    let center = math::sub(math::scale(v, mi * inv), math::scale(v_star_prime, mj * inv));
    let radius = mj / math::abs(mi - mj) * math::norm(sep);
    Ok(CarlemanSet::Sphere { center, radius })
}

/// Signed membership residual of a point in a Carleman set (zero on the set).
pub fn carleman_residual(set: &CarlemanSet, point: Vec3) -> f64 {
    match set {
        CarlemanSet::Hyperplane { origin, normal } => {
            math::dot(math::sub(point, *origin), *normal) / math::norm_sq(*normal).max(1e-300)
                * math::norm(*normal)
        }
        CarlemanSet::Sphere { center, radius } => {
            math::norm(math::sub(point, *center)) - *radius
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec;

    fn species2(m1: f64, m2: f64) -> SpeciesSet {
        SpeciesSet::new(vec![m1, m2], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn identity_direction_returns_inputs() {
        let s = species2(1.0, 2.5);
        let v = [1.0, -0.5, 2.0];
        let vs = [0.2, 0.2, -1.0];
        let sigma = math::unit(math::sub(v, vs), 1e-300).unwrap();
        let pair = CollisionPair::new(v, vs, 0, 1, sigma).unwrap();
        let (vp, vsp) = post_collision(&pair, &s);
        assert!(math::norm(math::sub(vp, v)) < 1e-14);
        assert!(math::norm(math::sub(vsp, vs)) < 1e-14);
    }

    #[test]
    fn equal_masses_swap() {
        let s = species2(1.3, 1.3);
        let v = [0.7, 0.1, -0.4];
        let vs = [-0.5, 0.9, 0.3];
        let sigma = math::scale(math::unit(math::sub(v, vs), 1e-300).unwrap(), -1.0);
        let pair = CollisionPair::new(v, vs, 0, 1, sigma).unwrap();
        let (vp, vsp) = post_collision(&pair, &s);
        assert!(math::norm(math::sub(vp, vs)) < 1e-14);
        assert!(math::norm(math::sub(vsp, v)) < 1e-14);
    }

    #[test]
    fn worked_unequal_mass_example() {
        // m = (1,2), v = e1, v* = 0, sigma = e2
        let s = species2(1.0, 2.0);
        let pair =
            CollisionPair::new([1.0, 0.0, 0.0], [0.0; 3], 0, 1, [0.0, 1.0, 0.0]).unwrap();
        let (vp, vsp) = post_collision(&pair, &s);
        assert!(math::norm(math::sub(vp, [1.0 / 3.0, 2.0 / 3.0, 0.0])) < 1e-15);
        assert!(math::norm(math::sub(vsp, [1.0 / 3.0, -1.0 / 3.0, 0.0])) < 1e-15);
        // conservation
        let energy = 1.0 * math::norm_sq(vp) + 2.0 * math::norm_sq(vsp);
        assert!((energy - 1.0).abs() < 1e-14);
        let mom = math::axpy(math::scale(vp, 1.0), 2.0, vsp);
        assert!(math::norm(math::sub(mom, [1.0, 0.0, 0.0])) < 1e-14);
    }

    #[test]
    fn conservation_and_relative_speed_random() {
        let mut rng = Rng::new(17);
        for _ in 0..2000 {
            let m1 = rng.uniform_in(0.2, 5.0);
            let m2 = rng.uniform_in(0.2, 5.0);
            let s = species2(m1, m2);
            let v = rng.gaussian_vector(1.5);
            let vs = rng.gaussian_vector(1.5);
            let sigma = rng.unit_vector();
            let pair = CollisionPair::new(v, vs, 0, 1, sigma).unwrap();
            let (vp, vsp) = post_collision(&pair, &s);
            let p_in = math::axpy(math::scale(v, m1), m2, vs);
            let p_out = math::axpy(math::scale(vp, m1), m2, vsp);
            let e_in = m1 * math::norm_sq(v) + m2 * math::norm_sq(vs);
            let e_out = m1 * math::norm_sq(vp) + m2 * math::norm_sq(vsp);
            let scale = e_in.max(1e-30);
            assert!(math::norm(math::sub(p_in, p_out)) < 1e-12 * scale.max(1.0));
            assert!((e_in - e_out).abs() < 1e-12 * scale);
            // |v - v*| = |v' - v'*|
            let r_in = math::norm(math::sub(v, vs));
            let r_out = math::norm(math::sub(vp, vsp));
            assert!((r_in - r_out).abs() < 1e-12 * r_in.max(1.0));
            // |v - v'| <= (2 m_j / (m_i+m_j)) |v' - v'*| and |v - v'*| <= |v' - v'*|
            let d1 = math::norm(math::sub(v, vp));
            let d2 = math::norm(math::sub(v, vsp));
            assert!(d1 <= 2.0 * m2 / (m1 + m2) * r_out + 1e-12);
            assert!(d2 <= r_out + 1e-12);
        }
    }

    #[test]
    fn collision_map_inverts_with_incoming_direction() {
        // applying the map to (v', v'*) with the incoming relative direction
        // (v - v*)/|v - v*| recovers (v, v*)
        let mut rng = Rng::new(5);
        for _ in 0..500 {
            let s = species2(rng.uniform_in(0.3, 4.0), rng.uniform_in(0.3, 4.0));
            let v = rng.gaussian_vector(1.0);
            let vs = rng.gaussian_vector(1.0);
            let sigma = rng.unit_vector();
            let pair = CollisionPair::new(v, vs, 0, 1, sigma).unwrap();
            let (vp, vsp) = post_collision(&pair, &s);
            let u_hat = match math::unit(math::sub(v, vs), 1e-12) {
                Some(u) => u,
                None => continue,
            };
            let back = CollisionPair::new(vp, vsp, 0, 1, u_hat).unwrap();
            let (v2, vs2) = post_collision(&back, &s);
            assert!(math::norm(math::sub(v2, v)) < 1e-11);
            assert!(math::norm(math::sub(vs2, vs)) < 1e-11);
        }
    }

    #[test]
    fn hyperplane_origin_examples() {
        // equal masses: V_E = v
        let s = species2(2.0, 2.0);
        let v = [0.3, 0.4, -0.1];
        let vp = [1.0, 0.0, 0.0];
        match carleman_hyperplane(v, vp, 0, 1, &s).unwrap() {
            CarlemanSet::Hyperplane { origin, .. } => {
                assert!(math::norm(math::sub(origin, v)) < 1e-14);
            }
            _ => panic!("expected hyperplane"),
        }
        // m = (1,3), v = 0, v' = e1: V_E = (1/3, 0, 0), normal -e1
        let s13 = species2(1.0, 3.0);
        match carleman_hyperplane([0.0; 3], [1.0, 0.0, 0.0], 0, 1, &s13).unwrap() {
            CarlemanSet::Hyperplane { origin, normal } => {
                assert!(math::norm(math::sub(origin, [1.0 / 3.0, 0.0, 0.0])) < 1e-14);
                assert!(math::norm(math::sub(normal, [-1.0, 0.0, 0.0])) < 1e-14);
            }
            _ => panic!("expected hyperplane"),
        }
    }

    #[test]
    fn sphere_example_and_scaling() {
        let s = species2(1.0, 2.0);
        match carleman_sphere([1.0, 0.0, 0.0], [0.0; 3], 0, 1, &s).unwrap() {
            CarlemanSet::Sphere { center, radius } => {
                assert!(math::norm(math::sub(center, [-1.0, 0.0, 0.0])) < 1e-14);
                assert!((radius - 2.0).abs() < 1e-14);
            }
            _ => panic!("expected sphere"),
        }
        // radius is homogeneous of degree one in the separation
        match carleman_sphere([2.0, 0.0, 0.0], [0.0; 3], 0, 1, &s).unwrap() {
            CarlemanSet::Sphere { radius, .. } => assert!((radius - 4.0).abs() < 1e-14),
            _ => panic!("expected sphere"),
        }
        assert!(matches!(
            carleman_sphere([1.0, 0.0, 0.0], [0.0; 3], 0, 1, &species2(1.0, 1.0)),
            Err(CoreError::KindMismatch(_))
        ));
    }

    #[test]
    fn sampled_collisions_lie_on_carleman_sets() {
        let mut rng = Rng::new(23);
        for _ in 0..2000 {
            let m1 = rng.uniform_in(0.2, 4.0);
            let m2 = rng.uniform_in(0.2, 4.0);
            let s = species2(m1, m2);
            let v = rng.gaussian_vector(1.2);
            let vs = rng.gaussian_vector(1.2);
            let sigma = rng.unit_vector();
            let pair = CollisionPair::new(v, vs, 0, 1, sigma).unwrap();
            let (vp, vsp) = post_collision(&pair, &s);
            if math::norm(math::sub(v, vp)) < 1e-6 || math::norm(math::sub(v, vsp)) < 1e-6 {
                continue;
            }
            // orthogonality: v'* lies on the plane through V_E(v, v')
            let plane = carleman_hyperplane(v, vp, 0, 1, &s).unwrap();
            let res = carleman_residual(&plane, vsp);
            assert!(res.abs() < 1e-10, "plane residual {res}");
            // sphere membership for unequal masses: v' on the sphere of (v, v'*)
            if (m1 - m2).abs() > 1e-3 {
                let sphere = carleman_sphere(v, vsp, 0, 1, &s).unwrap();
                let res = carleman_residual(&sphere, vp);
                assert!(res.abs() < 1e-10, "sphere residual {res}");
            }
        }
    }

    #[test]
    fn grazing_pair_is_returned_unchanged() {
        let s = species2(1.0, 2.0);
        let v = [0.5, 0.5, 0.5];
        let pair = CollisionPair::new(v, v, 0, 1, [1.0, 0.0, 0.0]).unwrap();
        let (vp, vsp) = post_collision(&pair, &s);
        assert_eq!(vp, v);
        assert_eq!(vsp, v);
    }
}
