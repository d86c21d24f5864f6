//! Direct sigma-form evaluation of `K` on analytically given fields.
//!
//! This is the reference route for the kernel-form consistency check: the
//! test fields are smooth closures, the primed points are evaluated exactly
//! (no grid interpolation), and the `(v*, sigma)` quadrature is the midpoint
//! times sphere product rule. Away from kinks the midpoint rule on rapidly
//! decaying smooth integrands is spectrally accurate, so this route gives
//! near machine-precision values of `K_i(f)(v)` for bump-type fields.

use crate::geometry::post_collision_raw;
use crate::grid::{SphereQuadrature, VelocityGrid};
use crate::kernel::KernelSpec;
use crate::math::{self, Vec3};
use crate::mixture::SpeciesSet;

/// `K_i(f)(v) = sum_j int B [mu_j(v'*) f_i(v') + mu_i(v') f_j(v'*)
///   - mu_i(v) f_j(v*)] dsigma dv*` with `f` given analytically.
pub fn k_sigma_analytic<F>(
    i: usize,
    v: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    grid: &VelocityGrid,
    sphere: &SphereQuadrature,
    f: F,
) -> f64
where
    F: Fn(usize, Vec3) -> f64,
{
    let w_cell = grid.weight();
    let mu_i_v = species.maxwellian_at(i, v);
    let mut total = 0.0;
    for j in 0..species.len() {
        let mi = species.mass(i);
        let mj = species.mass(j);
        let l_b = kernel.b_int(i, j);
        for v_star in grid.nodes() {
            let r = math::norm(math::sub(v, *v_star));
            if r == 0.0 {
                continue;
            }
            let phi = kernel.phi(i, j, r);
            if phi == 0.0 {
                continue;
            }
            let u_hat = math::scale(math::sub(v, *v_star), 1.0 / r);
            let f_j_star = f(j, *v_star);
            // loss: the sigma integral reduces to l_b
            total -= w_cell * phi * l_b * mu_i_v * f_j_star;
            // gain terms over the sphere rule
            let mut gain = 0.0;
            for (sigma, w_s) in sphere.nodes.iter().zip(sphere.weights.iter()) {
                let b = kernel.angular(i, j).eval(math::dot(u_hat, *sigma));
                if b == 0.0 {
                    continue;
                }
                let (vp, vsp) = post_collision_raw(v, *v_star, mi, mj, *sigma);
                gain += w_s
                    * b
                    * (species.maxwellian_at(j, vsp) * f(i, vp)
                        + species.maxwellian_at(i, vp) * f(j, vsp));
            }
            total += w_cell * phi * gain;
        }
    }
    total
}

/// Same sigma-form value with the partner integral in polar coordinates
/// around `v` (radial Gauss-Legendre times a sphere rule), which integrates
/// the full partner space rather than a truncated box. For fields supported
/// inside the grid this matches the unbounded-surface kernel representation
/// to quadrature accuracy.
#[allow(clippy::too_many_arguments)]
pub fn k_sigma_analytic_polar<F>(
    i: usize,
    v: Vec3,
    species: &SpeciesSet,
    kernel: &KernelSpec,
    sphere: &SphereQuadrature,
    radial_nodes: usize,
    radial_extent: f64,
    direction_rule: &SphereQuadrature,
    f: F,
) -> f64
where
    F: Fn(usize, Vec3) -> f64,
{
    let (gl_x, gl_w) = crate::grid::gauss_legendre(radial_nodes);
    let mu_i_v = species.maxwellian_at(i, v);
    let mut total = 0.0;
    for j in 0..species.len() {
        let mi = species.mass(i);
        let mj = species.mass(j);
        let l_b = kernel.b_int(i, j);
        for (x, wx) in gl_x.iter().zip(gl_w.iter()) {
            let r = 0.5 * (x + 1.0) * radial_extent;
            if r == 0.0 {
                continue;
            }
            let w_r = wx * 0.5 * radial_extent * r * r;
            for (dir, w_d) in direction_rule
                .nodes
                .iter()
                .zip(direction_rule.weights.iter())
            {
                let v_star = math::axpy(v, r, *dir);
                let phi = kernel.phi(i, j, r);
                let w_out = w_r * w_d * phi;
                if w_out == 0.0 {
                    continue;
                }
                let u_hat = math::scale(math::sub(v, v_star), 1.0 / r);
                total -= w_out * l_b * mu_i_v * f(j, v_star);
                let mut gain = 0.0;
                for (sigma, w_s) in sphere.nodes.iter().zip(sphere.weights.iter()) {
                    let b = kernel.angular(i, j).eval(math::dot(u_hat, *sigma));
                    if b == 0.0 {
                        continue;
                    }
                    let (vp, vsp) = post_collision_raw(v, v_star, mi, mj, *sigma);
                    gain += w_s
                        * b
                        * (species.maxwellian_at(j, vsp) * f(i, vp)
                            + species.maxwellian_at(i, vp) * f(j, vsp));
                }
                total += w_out * gain;
            }
        }
    }
    total
}
