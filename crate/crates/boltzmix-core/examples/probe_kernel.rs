//! Scratch probe: sensitivity of the kernel-vs-sigma consistency to each
//! quadrature resolution.

use boltzmix_core::field::DistributionField;
use boltzmix_core::grid::{SphereQuadrature, VelocityGrid};
use boltzmix_core::kernel::KernelSpec;
use boltzmix_core::linear::kernelform::{kernel_apply_row, kernel_row, CarlemanQuad, CarlemanWorkspace};
use boltzmix_core::linear::sigma::{k_sigma_analytic, k_sigma_analytic_polar};
use boltzmix_core::math;
use boltzmix_core::mixture::SpeciesSet;

fn main() {
    let s = SpeciesSet::new(vec![1.0, 2.0], vec![1.0, 0.8]).unwrap();
    let k = KernelSpec::hard_spheres(2);
    let v = [0.45, -0.15, 0.3];
    let centers: Vec<(usize, [f64; 3], f64, f64)> = vec![
        (0, [3.6, 0.7, -0.8], 0.95, 0.7),
        (0, [-2.8, 2.1, 1.4], 0.9, 0.5),
        (1, [1.4, -3.4, 1.0], 1.0, 0.9),
        (1, [-1.6, -1.4, -3.0], 0.92, 0.6),
    ];
    let field = move |species: usize, u: [f64; 3]| -> f64 {
        let mut acc = 0.0;
        for (sp, c, w, a) in &centers {
            if *sp == species {
                acc += a * math::exp(-math::norm_sq(math::sub(u, *c)) / (w * w));
            }
        }
        acc
    };
    for (label, n_grid, ext, o_sph, k_rad, k_az, k_sp) in [
        ("base32", 32usize, 7.2, 40usize, 64usize, 48usize, 64usize),
    ] {
        let grid = VelocityGrid::new(ext, n_grid).unwrap();
        let sphere = SphereQuadrature::product(o_sph, o_sph).unwrap();
        let ws = CarlemanWorkspace::new(CarlemanQuad {
            radial_nodes: k_rad,
            azimuth_nodes: k_az,
            sphere_polar: k_sp,
            sphere_azimuth: k_sp,
            ..CarlemanQuad::default()
        });
        let rows = kernel_row(1, v, &s, &k, &grid, &ws);
        let mut f_grid = DistributionField::homogeneous(2, grid.len());
        f_grid.fill_from(|sp, _, p| field(sp, grid.node(p)));
        let kf = kernel_apply_row(&rows, &f_grid, &grid);
        let n_dir: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(32);
        let dirs = SphereQuadrature::product(n_dir, n_dir).unwrap();
        let n_rad: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(128);
        let sf = k_sigma_analytic_polar(1, v, &s, &k, &sphere, n_rad, 16.0, &dirs, &field);
        let sg = k_sigma_analytic(1, v, &s, &k, &grid, &sphere, &field);
        // polar oracle restricted to the partner cube: same integral as the
        // grid oracle, different quadrature
        let cube = grid.extent;
        let field_cube = |sp: usize, u: [f64; 3]| field(sp, u);
        let _ = &field_cube;
        let sp_cut = {
            let (gl_x, gl_w) = boltzmix_core::grid::gauss_legendre(128);
            let mut total = 0.0;
            let mu_i_v = s.maxwellian_at(1, v);
            for j in 0..2usize {
                let mi = s.mass(1);
                let mj = s.mass(j);
                let l_b = k.b_int(1, j);
                for (x, wx) in gl_x.iter().zip(gl_w.iter()) {
                    let r = 0.5 * (x + 1.0) * 16.0;
                    if r == 0.0 { continue; }
                    let w_r = wx * 0.5 * 16.0 * r * r;
                    for (dir, w_d) in dirs.nodes.iter().zip(dirs.weights.iter()) {
                        let v_star = boltzmix_core::math::axpy(v, r, *dir);
                        if v_star[0].abs() > cube || v_star[1].abs() > cube || v_star[2].abs() > cube {
                            continue;
                        }
                        let phi = k.phi(1, j, r);
                        let w_out = w_r * w_d * phi;
                        let u_hat = boltzmix_core::math::scale(boltzmix_core::math::sub(v, v_star), 1.0 / r);
                        total -= w_out * l_b * mu_i_v * field(j, v_star);
                        let mut gain = 0.0;
                        for (sig, w_s) in sphere.nodes.iter().zip(sphere.weights.iter()) {
                            let b = k.angular(1, j).eval(boltzmix_core::math::dot(u_hat, *sig));
                            let (vp, vsp) = boltzmix_core::geometry::post_collision_raw(v, v_star, mi, mj, *sig);
                            gain += w_s * b * (s.maxwellian_at(j, vsp) * field(1, vp)
                                + s.maxwellian_at(1, vp) * field(j, vsp));
                        }
                        total += w_out * gain;
                    }
                }
            }
            total
        };
        println!("         polar-cube-cut {sp_cut:+.10e} vs grid-oracle: rel {:.3e}", (sp_cut - sg).abs() / sg.abs());
        println!(
            "{label:8} kernel {kf:+.10e}  polar {sf:+.10e} (rel {:.3e})  grid-oracle {sg:+.10e} (rel {:.3e})",
            (kf - sf).abs() / sf.abs(),
            (kf - sg).abs() / sg.abs()
        );
    }
}
