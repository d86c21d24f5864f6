//! Truncation of the gain operator and the splitting `K = A + B`, with a
//! randomized estimate of the bound constant `C_B(k, delta)`.

use alloc::vec::Vec;

use crate::error::CoreError;
use crate::field::DistributionField;
use crate::linear::engine::{CollisionEngine, SigmaWeight};
use crate::math;
use crate::rng::Rng;
use crate::weights::{norm, NormFlavor, WeightSpec};

/// Smooth truncation `Theta_delta(v, v*, sigma)`: identically one on the
/// inner set
/// `{|v| <= 1/delta, 2 delta <= |v-v*| <= 1/delta, |cos| <= 1 - 2 delta}`
/// and identically zero outside the outer set
/// `{|v| <= 2/delta, delta <= |v-v*| <= 2/delta, |cos| <= 1 - delta}`.
#[derive(Clone, Copy, Debug)]
pub struct TruncationSpec {
    pub delta: f64,
}

impl TruncationSpec {
    pub fn new(delta: f64) -> Result<Self, CoreError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CoreError::InvalidConfig("delta must lie in (0, 1)"));
        }
        Ok(TruncationSpec { delta })
    }

    /// Smooth step: 0 for `x <= 0`, 1 for `x >= 1`, strictly increasing
    /// in between (the standard `exp(-1/x)` mollifier ratio).
    pub fn smoothstep(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            let a = math::exp(-1.0 / x);
            let b = math::exp(-1.0 / (1.0 - x));
            a / (a + b)
        }
    }

    /// Ramp that is 1 below `lo` and 0 above `hi`.
    fn ramp_down(x: f64, lo: f64, hi: f64) -> f64 {
        Self::smoothstep((hi - x) / (hi - lo))
    }

    /// Ramp that is 0 below `lo` and 1 above `hi`.
    fn ramp_up(x: f64, lo: f64, hi: f64) -> f64 {
        Self::smoothstep((x - lo) / (hi - lo))
    }

    /// `|v|` factor: one up to `1/delta`, zero beyond `2/delta`.
    pub fn ramp_speed(&self, v_abs: f64) -> f64 {
        Self::ramp_down(v_abs, 1.0 / self.delta, 2.0 / self.delta)
    }

    /// `|v - v*|` factor: supported on `[delta, 2/delta]`, one on
    /// `[2 delta, 1/delta]`.
    pub fn ramp_separation(&self, r: f64) -> f64 {
        Self::ramp_up(r, self.delta, 2.0 * self.delta)
            * Self::ramp_down(r, 1.0 / self.delta, 2.0 / self.delta)
    }

    /// `|cos theta|` factor: one up to `1 - 2 delta`, zero beyond `1 - delta`.
    pub fn ramp_angle(&self, cos_theta: f64) -> f64 {
        Self::ramp_down(math::abs(cos_theta), 1.0 - 2.0 * self.delta, 1.0 - self.delta)
    }

    /// Full truncation value.
    pub fn theta(&self, v_abs: f64, separation: f64, cos_theta: f64) -> f64 {
        self.ramp_speed(v_abs) * self.ramp_separation(separation) * self.ramp_angle(cos_theta)
    }
}

/// Pointwise truncation value `Theta_delta(v, v*, sigma)`.
pub fn theta_delta(
    v: math::Vec3,
    v_star: math::Vec3,
    sigma: math::Vec3,
    spec: &TruncationSpec,
) -> f64 {
    let sep = math::sub(v, v_star);
    let r = math::norm(sep);
    let cos_theta = if r > 0.0 {
        math::dot(sep, sigma) / r
    } else {
        0.0
    };
    spec.theta(math::norm(v), r, cos_theta)
}

/// Truncated gain-plus-loss operator `A`.
pub fn apply_a(
    f: &DistributionField,
    spec: &TruncationSpec,
    engine: &CollisionEngine<'_>,
    out: &mut DistributionField,
) {
    engine.apply_k_sigma(f, out, SigmaWeight::Theta(spec));
}

/// Complementary operator `B` with `A + B = K`.
pub fn apply_b(
    f: &DistributionField,
    spec: &TruncationSpec,
    engine: &CollisionEngine<'_>,
    out: &mut DistributionField,
) {
    engine.apply_k_sigma(f, out, SigmaWeight::OneMinusTheta(spec));
}

/// Randomized lower estimate of the operator norm of `B` from
/// `L^1_v L^inf_x (w_k nu)` to `L^1_v L^inf_x (w_k)` with
/// `w_k = 1 + m_i^{k/2} |v|^k`: the max over sampled smooth test fields of
/// `|B f|_{w_k} / |f|_{w_k nu}`.
pub fn estimate_cb(
    k: f64,
    spec: &TruncationSpec,
    engine: &CollisionEngine<'_>,
    nu_table: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<f64, CoreError> {
    if !(k > 2.0) {
        return Err(CoreError::InvalidConfig("estimate_cb requires k > 2"));
    }
    let species = engine.species;
    let grid = engine.grid;
    let w_num = WeightSpec::PolyBar { k }.table(species, grid, None)?;
    let w_den = WeightSpec::PolyBarNu { k }.table(species, grid, Some(nu_table))?;
    let mut rng = Rng::new(seed);
    let mut best = 0.0_f64;
    let mut out = DistributionField::homogeneous(species.len(), grid.len());
    for _ in 0..samples {
        let f = sample_bump_field(&mut rng, engine);
        let den = norm(&f, &w_den, grid, NormFlavor::L1VLinfX)?;
        if den <= 1e-14 {
            continue;
        }
        apply_b(&f, spec, engine, &mut out);
        let num = norm(&out, &w_num, grid, NormFlavor::L1VLinfX)?;
        best = best.max(num / den);
    }
    Ok(best)
}

/// Smooth nonnegative random test field: a few Gaussian bumps per species.
pub fn sample_bump_field(rng: &mut Rng, engine: &CollisionEngine<'_>) -> DistributionField {
    let species = engine.species;
    let grid = engine.grid;
    let mut f = DistributionField::homogeneous(species.len(), grid.len());
    for i in 0..species.len() {
        let n_bumps = 1 + rng.index(3);
        let mut centers = Vec::new();
        for _ in 0..n_bumps {
            let c = rng.gaussian_vector(0.35 * grid.extent);
            let width = rng.uniform_in(0.6, 1.6);
            let amp = rng.uniform_in(0.2, 1.0);
            centers.push((c, width, amp));
        }
        let fs = f.slice_mut(i, 0);
        for (p, node) in grid.nodes().iter().enumerate() {
            let mut v = 0.0;
            for (c, w, a) in &centers {
                let d2 = math::norm_sq(math::sub(*node, *c));
                v += a * math::exp(-d2 / (w * w));
            }
            fs[p] = v;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SphereQuadrature, VelocityGrid};
    use crate::kernel::KernelSpec;
    use crate::linear::engine::InterpOrder;
    use crate::linear::nu_table;
    use crate::mixture::SpeciesSet;
    use alloc::vec;

    #[test]
    fn theta_plateau_and_support() {
        let spec = TruncationSpec::new(0.1).unwrap();
        // inside the inner set
        assert_eq!(spec.theta(0.5, 1.0, 0.0), 1.0);
        // outside the support in each coordinate
        assert_eq!(spec.theta(3.0 / 0.1, 1.0, 0.0), 0.0);
        assert_eq!(spec.theta(0.5, 0.05, 0.0), 0.0);
        assert_eq!(spec.theta(0.5, 1.0, 0.99), 0.0);
        // on a ramp: strictly inside (0, 1) and monotone along the ramp
        let spec2 = TruncationSpec::new(0.2).unwrap();
        let mid = spec2.ramp_speed(7.5); // between 5 and 10
        assert!(mid > 0.0 && mid < 1.0);
        let mut prev = 1.0;
        let mut x = 5.0;
        while x <= 10.0 {
            let v = spec2.ramp_speed(x);
            assert!(v <= prev + 1e-14);
            prev = v;
            x += 0.25;
        }
        // product-grid check of the inner/outer sets
        for &va in &[0.0, 4.9, 5.1, 9.9, 10.1, 12.0] {
            for &r in &[0.1, 0.21, 0.39, 0.41, 1.0, 4.9, 5.1, 9.9, 10.1] {
                for &ct in &[0.0, 0.59, 0.61, 0.79, 0.81, 1.0] {
                    let t = spec2.theta(va, r, ct);
                    assert!((0.0..=1.0).contains(&t));
                    let inner = va <= 5.0 && (0.4..=5.0).contains(&r) && ct <= 0.6;
                    let outer = va <= 10.0 && (0.2..=10.0).contains(&r) && ct <= 0.8;
                    if inner {
                        assert_eq!(t, 1.0, "inner set at ({va},{r},{ct})");
                    }
                    if !outer {
                        assert_eq!(t, 0.0, "outside support at ({va},{r},{ct})");
                    }
                }
            }
        }
    }

    #[test]
    fn theta_monotone_in_delta() {
        // pointwise nondecreasing as delta decreases
        let d1 = TruncationSpec::new(0.2).unwrap();
        let d2 = TruncationSpec::new(0.1).unwrap();
        let mut rng = crate::rng::Rng::new(4);
        for _ in 0..2000 {
            let v = rng.uniform_in(0.0, 15.0);
            let r = rng.uniform_in(0.0, 15.0);
            let c = rng.uniform_in(-1.0, 1.0);
            assert!(d2.theta(v, r, c) >= d1.theta(v, r, c) - 1e-14);
        }
    }

    fn small_engine_parts() -> (SpeciesSet, KernelSpec, VelocityGrid, SphereQuadrature) {
        let s = SpeciesSet::new(vec![1.0, 2.0], vec![1.0, 0.8]).unwrap();
        let k = KernelSpec::hard_spheres(2);
        let g = VelocityGrid::new(4.2, 8).unwrap();
        let q = SphereQuadrature::product(4, 4).unwrap();
        (s, k, g, q)
    }

    #[test]
    fn partition_of_unity() {
        // A + B = K nodewise, exactly up to roundoff by construction
        let (s, k, g, q) = small_engine_parts();
        let engine = CollisionEngine::new(&s, &k, &g, &q, InterpOrder::Quadratic).unwrap();
        let spec = TruncationSpec::new(0.1).unwrap();
        let mut rng = crate::rng::Rng::new(6);
        let mut f = DistributionField::homogeneous(2, g.len());
        f.fill_from(|i, _, p| engine.mu(i, p) * rng.normal());
        let mut a = DistributionField::homogeneous(2, g.len());
        let mut b = DistributionField::homogeneous(2, g.len());
        let mut kfull = DistributionField::homogeneous(2, g.len());
        apply_a(&f, &spec, &engine, &mut a);
        apply_b(&f, &spec, &engine, &mut b);
        engine.apply_k_sigma(&f, &mut kfull, SigmaWeight::Full);
        let scale = kfull.max_abs().max(1e-30);
        for i in 0..2 {
            for p in 0..g.len() {
                let diff = a.get(i, 0, p) + b.get(i, 0, p) - kfull.get(i, 0, p);
                assert!(
                    diff.abs() < 1e-12 * scale,
                    "partition defect {diff} at ({i},{p})"
                );
            }
        }
    }

    #[test]
    fn a_output_vanishes_outside_theta_support() {
        let (s, k, g, q) = small_engine_parts();
        let engine = CollisionEngine::new(&s, &k, &g, &q, InterpOrder::Quadratic).unwrap();
        // delta chosen so 2/delta < grid extent: outside nodes must be zero
        let spec = TruncationSpec::new(0.55).unwrap();
        let mut f = DistributionField::homogeneous(2, g.len());
        f.fill_from(|i, _, p| engine.mu(i, p));
        let mut a = DistributionField::homogeneous(2, g.len());
        apply_a(&f, &spec, &engine, &mut a);
        let bound = 2.0 / 0.55;
        for i in 0..2 {
            for (p, node) in g.nodes().iter().enumerate() {
                if math::norm(*node) > bound {
                    assert_eq!(a.get(i, 0, p), 0.0, "nonzero outside support");
                }
            }
        }
    }

    #[test]
    fn cb_estimate_behaviour() {
        let (s, k, g, q) = small_engine_parts();
        let engine = CollisionEngine::new(&s, &k, &g, &q, InterpOrder::Quadratic).unwrap();
        let nu = nu_table(&s, &k, &g);
        // estimate is nonnegative and, for shrinking delta with common
        // samples, trends down
        let mut prev = f64::INFINITY;
        for delta in [0.2, 0.1, 0.05] {
            let spec = TruncationSpec::new(delta).unwrap();
            let est = estimate_cb(3.0, &spec, &engine, &nu, 6, 99).unwrap();
            assert!(est >= 0.0);
            assert!(
                est <= prev + 0.05,
                "delta scan not trending down: {est} vs {prev}"
            );
            prev = est;
        }
        assert!(
            estimate_cb(2.0, &TruncationSpec::new(0.1).unwrap(), &engine, &nu, 1, 1).is_err()
        );
    }
}
