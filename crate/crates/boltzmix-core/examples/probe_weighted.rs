//! Scratch probe: shape of the weighted kernel integral over |v| shells.

use boltzmix_core::grid::{gauss_legendre, SphereQuadrature, VelocityGrid};
use boltzmix_core::kernel::KernelSpec;
use boltzmix_core::linear::kernelform::{kernel_k, CarlemanQuad, CarlemanWorkspace};
use boltzmix_core::math;
use boltzmix_core::mixture::SpeciesSet;

fn main() {
    let s = SpeciesSet::new(vec![1.0, 2.0], vec![1.0, 0.8]).unwrap();
    let k = KernelSpec::hard_spheres(2);
    let grid = VelocityGrid::new(6.0, 10).unwrap();
    let mut quad = CarlemanQuad::default();
    quad.band_fraction = 1e-3;
    quad.sphere_polar = 32;
    quad.sphere_azimuth = 32;
    quad.radial_nodes = 32;
    quad.azimuth_nodes = 24;
    let ws = CarlemanWorkspace::new(quad);
    let beta = 2.0;
    let w_of = |i: usize, v: [f64; 3]| -> f64 {
        math::powf(1.0 + math::norm_sq(v), 0.5 * beta)
            / s.maxwellian_at(i, v).max(1e-300).sqrt()
    };
    let (gl_x, gl_w) = gauss_legendre(32);
    let dirs = SphereQuadrature::product(6, 6).unwrap();
    let r_max = 10.0;
    for shell in 0..8 {
        let radius = 0.4 + 0.8 * shell as f64;
        let v = math::scale(math::unit([1.0, 0.6, -0.3], 1e-300).unwrap(), radius);
        for i in 0..2 {
            let mut total = 0.0;
            for j in 0..2 {
                for (x, wx) in gl_x.iter().zip(gl_w.iter()) {
                    let r = 0.5 * (x + 1.0) * r_max;
                    if r < 1e-3 * grid.h {
                        continue;
                    }
                    let w_r = wx * 0.5 * r_max * r * r;
                    for (n_s, w_s) in dirs.nodes.iter().zip(dirs.weights.iter()) {
                        let v_star = math::axpy(v, r, *n_s);
                        let kv = kernel_k(i, j, v, v_star, &s, &k, &grid, &ws).unwrap();
                        total += w_r * w_s * kv.abs() * w_of(i, v) / w_of(j, v_star);
                    }
                }
            }
            println!("|v| = {radius:.1} species {i}: I = {total:10.3}  I*(1+|v|) = {:10.3}", total * (1.0 + radius));
        }
    }
}
