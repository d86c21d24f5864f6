//! `kernel-check`: consistency of the Carleman kernel representation of `K`
//! with the direct sigma form on random smooth fields.

use boltzmix_core::field::DistributionField;
use boltzmix_core::grid::{SphereQuadrature, VelocityGrid};
use boltzmix_core::linear::kernelform::{kernel_apply_row, kernel_row, CarlemanQuad, CarlemanWorkspace};
use boltzmix_core::math;
use boltzmix_core::rng::Rng;

use crate::commands::CommandError;
use crate::config::ScenarioFile;
use crate::report::{Csv, CsvValue, Report};
use crate::CliArgs;

pub const TOLERANCE: f64 = 1e-6;

/// A bump dictionary makes the sigma-form reference affordable: the
/// expensive collision sweep is shared, and each random field is a random
/// combination of dictionary bumps.
pub struct BumpDictionary {
    pub bumps: Vec<(usize, [f64; 3], f64)>,
}

impl BumpDictionary {
    pub fn sample(rng: &mut Rng, v: [f64; 3], n_species: usize, per_species: usize) -> Self {
        let mut bumps = Vec::new();
        for sp in 0..n_species {
            for _ in 0..per_species {
                let c = loop {
                    let c = rng.gaussian_vector(1.7);
                    let d = math::norm(math::sub(c, v));
                    if (3.6..=4.4).contains(&d) && math::norm(c) <= 4.0 {
                        break c;
                    }
                };
                bumps.push((sp, c, rng.uniform_in(0.88, 1.0)));
            }
        }
        BumpDictionary { bumps }
    }

    pub fn eval_bump(&self, b: usize, species: usize, u: [f64; 3]) -> f64 {
        let (sp, c, w) = self.bumps[b];
        if sp != species {
            return 0.0;
        }
        math::exp(-math::norm_sq(math::sub(u, c)) / (w * w))
    }
}

pub fn run(cfg: &ScenarioFile, args: &CliArgs) -> Result<bool, CommandError> {
    let species = cfg.species()?;
    let kernel = cfg.kernel(species.len())?;
    let grid = VelocityGrid::new(cfg.kernel_check_extent()?, cfg.kernel_check_nodes()?)
        .map_err(CommandError::Core)?;
    let n_fields = cfg.kernel_check_fields()?;
    let seed = args.seed.unwrap_or(1);
    let mut rng = Rng::new(seed);
    let v = [0.45, -0.15, 0.3];
    let n_sp = species.len();

    let ws = CarlemanWorkspace::new(CarlemanQuad {
        radial_nodes: 64,
        azimuth_nodes: 48,
        sphere_polar: 64,
        sphere_azimuth: 64,
        ..CarlemanQuad::default()
    });
    let sphere = SphereQuadrature::product(40, 40).map_err(CommandError::Core)?;
    let dirs = SphereQuadrature::product(44, 44).map_err(CommandError::Core)?;

    let dict = BumpDictionary::sample(&mut rng, v, n_sp, 12);
    let n_bumps = dict.bumps.len();

    // per species row + per-bump values via both routes; the sigma-form
    // pass is batched over the dictionary so the expensive collision sweep
    // is shared by every bump
    let mut kernel_per_bump = vec![vec![0.0; n_bumps]; n_sp];
    let mut sigma_per_bump = vec![vec![0.0; n_bumps]; n_sp];
    for i in 0..n_sp {
        let rows = kernel_row(i, v, &species, &kernel, &grid, &ws);
        for b in 0..n_bumps {
            let mut f_grid = DistributionField::homogeneous(n_sp, grid.len());
            f_grid.fill_from(|sp, _, p| dict.eval_bump(b, sp, grid.node(p)));
            kernel_per_bump[i][b] = kernel_apply_row(&rows, &f_grid, &grid);
        }
        sigma_batch(
            i,
            v,
            &species,
            &kernel,
            &sphere,
            96,
            16.0,
            &dirs,
            &dict,
            &mut sigma_per_bump[i],
        );
    }

    // random nonnegative combinations of dictionary bumps
    let mut csv = Csv::new(
        "kernel form vs sigma form of K on random smooth fields",
        &["field", "species", "kernel_value", "sigma_value", "rel_error"],
    );
    let mut worst: f64 = 0.0;
    for field_idx in 0..n_fields {
        let coeffs: Vec<f64> = (0..n_bumps).map(|_| rng.uniform_in(0.1, 1.0)).collect();
        for i in 0..n_sp {
            let kf: f64 = coeffs
                .iter()
                .zip(kernel_per_bump[i].iter())
                .map(|(c, v)| c * v)
                .sum();
            let sf: f64 = coeffs
                .iter()
                .zip(sigma_per_bump[i].iter())
                .map(|(c, v)| c * v)
                .sum();
            let rel = (kf - sf).abs() / sf.abs().max(1e-12);
            worst = worst.max(rel);
            csv.row_mixed(&[
                CsvValue::Int(field_idx as i64),
                CsvValue::Int(i as i64),
                CsvValue::Float(kf),
                CsvValue::Float(sf),
                CsvValue::Float(rel),
            ]);
        }
    }
    csv.write_to(&args.out_dir.join("kernel_check.csv"))?;

    let pass = worst < TOLERANCE;
    let mut out = Report::new("kernel consistency report");
    out.kv("fields", n_fields);
    out.kv("dictionary_bumps", n_bumps);
    out.kv_f("max_rel_error", worst);
    out.kv_f("tolerance", TOLERANCE);
    out.kv("pass", pass);
    out.write_to(&args.out_dir.join("kernel_check_report.txt"))?;
    println!("{}", out.as_str());
    Ok(pass)
}

/// Batched polar sigma-form evaluation: accumulates `K_i` applied to every
/// dictionary bump in one sweep over the collision variables.
#[allow(clippy::too_many_arguments)]
fn sigma_batch(
    i: usize,
    v: [f64; 3],
    species: &boltzmix_core::mixture::SpeciesSet,
    kernel: &boltzmix_core::kernel::KernelSpec,
    sphere: &SphereQuadrature,
    radial_nodes: usize,
    radial_extent: f64,
    dirs: &SphereQuadrature,
    dict: &BumpDictionary,
    out: &mut [f64],
) {
    let (gl_x, gl_w) = boltzmix_core::grid::gauss_legendre(radial_nodes);
    let mu_i_v = species.maxwellian_at(i, v);
    let n_bumps = dict.bumps.len();
    out.fill(0.0);
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
            for (dir, w_d) in dirs.nodes.iter().zip(dirs.weights.iter()) {
                let v_star = math::axpy(v, r, *dir);
                let phi = kernel.phi(i, j, r);
                let w_out = w_r * w_d * phi;
                if w_out == 0.0 {
                    continue;
                }
                let u_hat = math::scale(math::sub(v, v_star), 1.0 / r);
                for b in 0..n_bumps {
                    out[b] -= w_out * l_b * mu_i_v * dict.eval_bump(b, j, v_star);
                }
                for (sigma, w_s) in sphere.nodes.iter().zip(sphere.weights.iter()) {
                    let bval = kernel.angular(i, j).eval(math::dot(u_hat, *sigma));
                    if bval == 0.0 {
                        continue;
                    }
                    let (vp, vsp) =
                        boltzmix_core::geometry::post_collision_raw(v, v_star, mi, mj, *sigma);
                    let mu_j_sp = species.maxwellian_at(j, vsp);
                    let mu_i_p = species.maxwellian_at(i, vp);
                    let w = w_out * w_s * bval;
                    for b in 0..n_bumps {
                        let gain = mu_j_sp * dict.eval_bump(b, i, vp)
                            + mu_i_p * dict.eval_bump(b, j, vsp);
                        if gain != 0.0 {
                            out[b] += w * gain;
                        }
                    }
                }
            }
        }
    }
}
