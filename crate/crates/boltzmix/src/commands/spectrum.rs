//! `spectrum`: assemble the symmetrized linearized operator and estimate
//! its spectral gap and kernel structure.

use boltzmix_core::linear::engine::{CollisionEngine, InterpOrder};
use boltzmix_core::linear::spectral::DENSE_CAP;
use boltzmix_core::linear::{assemble_matrix, projection_basis, spectral_gap};
use boltzmix_core::grid::{SphereQuadrature, VelocityGrid};

use crate::commands::CommandError;
use crate::config::ScenarioFile;
use crate::report::{Csv, Report};
use crate::CliArgs;

pub fn run(cfg: &ScenarioFile, args: &CliArgs) -> Result<bool, CommandError> {
    let species = cfg.species()?;
    let kernel = cfg.kernel(species.len())?;
    let grid = VelocityGrid::new(cfg.grid_extent(&species)?, cfg.grid_nodes()?)
        .map_err(CommandError::Core)?;
    let (np, na) = cfg.sphere_rule()?;
    let sphere = SphereQuadrature::product(np, na).map_err(CommandError::Core)?;
    let engine = CollisionEngine::new(&species, &kernel, &grid, &sphere, InterpOrder::Quadratic)?;
    let basis = projection_basis(&species, &grid)?;
    let matrix = assemble_matrix(&engine, DENSE_CAP)?;
    let seed = args.seed.unwrap_or(1);
    let report = spectral_gap(&matrix, &basis, &engine, cfg.coercivity_samples()?, seed)?;

    let mut csv = Csv::new("eigenvalues of the symmetrized linearized operator, ascending", &["index", "eigenvalue"]);
    for (i, ev) in report.eigenvalues.iter().enumerate() {
        csv.row_mixed(&[crate::report::CsvValue::Int(i as i64), crate::report::CsvValue::Float(*ev)]);
    }
    csv.write_to(&args.out_dir.join("eigenvalues.csv"))?;

    let expected_kernel = species.len() + 4;
    let pass = report.gap > 0.0
        && report.kernel_dim_check == expected_kernel
        && report.coercivity_lambda > 0.0
        && report.asymmetry <= 1e-8;

    let mut out = Report::new("spectral report");
    out.kv("n", matrix.n);
    out.kv("species", species.len());
    out.kv_f("gap", report.gap);
    out.kv("kernel_dim", report.kernel_dim_check);
    out.kv("kernel_dim_expected", expected_kernel);
    out.kv_f("coercivity_lambda", report.coercivity_lambda);
    out.kv_f("asymmetry", report.asymmetry);
    out.kv("coercivity_samples", report.dirichlet_samples.len());
    for (i, (lo, hi)) in report.nu_fit.iter().enumerate() {
        out.kv_f(&format!("nu0_{i}"), *lo);
        out.kv_f(&format!("nu1_{i}"), *hi);
    }
    out.kv("pass", pass);
    out.write_to(&args.out_dir.join("spectrum_report.txt"))?;
    println!("{}", out.as_str());
    Ok(pass)
}
