//! Scratch probe: compare the sphere-gain and hyperplane-gain terms of the
//! kernel representation against their sigma-form counterparts separately.

use boltzmix_core::geometry::post_collision_raw;
use boltzmix_core::grid::{SphereQuadrature, VelocityGrid};
use boltzmix_core::kernel::KernelSpec;
use boltzmix_core::math;
use boltzmix_core::mixture::SpeciesSet;
use boltzmix_core::rng::Rng;

fn main() {
    let s = SpeciesSet::new(vec![1.0, 2.0], vec![1.0, 0.8]).unwrap();
    let k = KernelSpec::hard_spheres(2);
    let grid = VelocityGrid::new(7.2, 32).unwrap();
    let o_polar: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(48);
    let o_az: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(48);
    let sphere = SphereQuadrature::product(o_polar, o_az).unwrap();
    let v = [0.45, -0.15, 0.3];
    let mut rng = Rng::new(77);
    // one Gaussian bump per species, away from v
    let mut centers = Vec::new();
    for sp in 0..2usize {
        let c = loop {
            let c = rng.gaussian_vector(1.6);
            if math::norm(math::sub(c, v)) >= 3.4 && math::norm(c) <= 3.6 {
                break c;
            }
        };
        centers.push((sp, c, 0.9, 0.8));
    }
    let field = |species: usize, u: [f64; 3]| -> f64 {
        let mut acc = 0.0;
        for (sp, c, w, a) in &centers {
            if *sp == species {
                acc += a * math::exp(-math::norm_sq(math::sub(u, *c)) / (w * w));
            }
        }
        acc
    };

    for (i, j) in [(1usize, 0usize)] {
        let mi = s.mass(i);
        let mj = s.mass(j);
        // sigma form of the two gain terms, separately
        let mut gain_plane_sigma = 0.0; // int B mu_j(v'*) f_i(v')
        let mut gain_sphere_sigma = 0.0; // int B mu_i(v') f_j(v'*)
        let w_cell = grid.weight();
        for v_star in grid.nodes() {
            let r = math::norm(math::sub(v, *v_star));
            if r == 0.0 {
                continue;
            }
            let u_hat = math::scale(math::sub(v, *v_star), 1.0 / r);
            let phi = k.phi(i, j, r);
            for (sig, w_s) in sphere.nodes.iter().zip(sphere.weights.iter()) {
                let b = k.angular(i, j).eval(math::dot(u_hat, *sig));
                let (vp, vsp) = post_collision_raw(v, *v_star, mi, mj, *sig);
                gain_plane_sigma +=
                    w_cell * phi * w_s * b * s.maxwellian_at(j, vsp) * field(i, vp);
                gain_sphere_sigma +=
                    w_cell * phi * w_s * b * s.maxwellian_at(i, vp) * field(j, vsp);
            }
        }
        // kernel form, term by term (mirrors the library internals)
        let quad = boltzmix_core::linear::kernelform::CarlemanQuad {
            radial_nodes: 64,
            azimuth_nodes: 48,
            sphere_polar: 64,
            sphere_azimuth: 64,
            ..Default::default()
        };
        let ws = boltzmix_core::linear::kernelform::CarlemanWorkspace::new(quad);
        let mut gain_sphere_kernel = 0.0;
        let mut gain_plane_kernel = 0.0;
        for node in grid.nodes() {
            let r = math::norm(math::sub(v, *node));
            if r < 0.5 * grid.h {
                continue;
            }
            gain_sphere_kernel += w_cell
                * field(j, *node)
                * boltzmix_core::linear::kernelform::partner_gain_term_public(
                    i, j, v, *node, &s, &k, &ws,
                );
            gain_plane_kernel += w_cell
                * field(i, *node)
                * boltzmix_core::linear::kernelform::hyperplane_gain_term_public(
                    i, j, v, *node, &s, &k, &ws,
                );
        }
        println!(
            "pair ({i},{j}): sphere term sigma {gain_sphere_sigma:+.8e} kernel {gain_sphere_kernel:+.8e} rel {:.2e}",
            (gain_sphere_sigma - gain_sphere_kernel).abs() / gain_sphere_sigma.abs().max(1e-300)
        );
        println!(
            "           plane  term sigma {gain_plane_sigma:+.8e} kernel {gain_plane_kernel:+.8e} rel {:.2e}",
            (gain_plane_sigma - gain_plane_kernel).abs() / gain_plane_sigma.abs().max(1e-300)
        );
    }
}
