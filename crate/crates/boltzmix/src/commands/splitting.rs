//! `splitting`: estimate the regularized-part bound `C_A` and the
//! hypodissipativity bound `C_B(k, delta)` over a delta scan.

use boltzmix_core::field::DistributionField;
use boltzmix_core::grid::{SphereQuadrature, VelocityGrid};
use boltzmix_core::linear::engine::{CollisionEngine, InterpOrder};
use boltzmix_core::linear::nu_table;
use boltzmix_core::rng::Rng;
use boltzmix_core::splitting::{apply_a, estimate_cb, sample_bump_field, TruncationSpec};
use boltzmix_core::weights::{norm, NormFlavor, WeightSpec};

use crate::commands::CommandError;
use crate::config::ScenarioFile;
use crate::report::{Csv, CsvValue, Report};
use crate::CliArgs;

pub fn run(cfg: &ScenarioFile, args: &CliArgs) -> Result<bool, CommandError> {
    let species = cfg.species()?;
    let kernel = cfg.kernel(species.len())?;
    let grid = VelocityGrid::new(cfg.grid_extent(&species)?, cfg.grid_nodes()?)
        .map_err(CommandError::Core)?;
    let (np, na) = cfg.sphere_rule()?;
    let sphere = SphereQuadrature::product(np, na).map_err(CommandError::Core)?;
    let engine = CollisionEngine::new(&species, &kernel, &grid, &sphere, InterpOrder::Quadratic)?;
    let nu = nu_table(&species, &kernel, &grid);
    let k = cfg.cb_k()?;
    if k <= 2.0 {
        return Err(CommandError::Config("[analysis] cb_k must exceed 2".into()));
    }
    let deltas = cfg.deltas()?;
    let samples = cfg.cb_samples()?;
    let seed = args.seed.unwrap_or(1);

    let mut csv = Csv::new("randomized operator norm estimates of B", &["delta", "cb_estimate"]);
    let mut estimates = Vec::new();
    for &delta in &deltas {
        let spec = TruncationSpec::new(delta).map_err(CommandError::Core)?;
        let est = estimate_cb(k, &spec, &engine, &nu, samples, seed)?;
        csv.row(&[delta, est]);
        estimates.push(est);
    }
    csv.write_to(&args.out_dir.join("cb_estimates.csv"))?;

    // regularization bound of A over the same samples
    let spec = TruncationSpec::new(*deltas.last().unwrap()).map_err(CommandError::Core)?;
    let w_inf = WeightSpec::AngleBracketMaxwell { beta: 2.0 }.table(&species, &grid, None)?;
    let w_k = WeightSpec::AngleBracket { k }.table(&species, &grid, None)?;
    let mut rng = Rng::new(seed ^ 0x5eed);
    let mut c_a: f64 = 0.0;
    let mut out_f = DistributionField::homogeneous(species.len(), grid.len());
    for _ in 0..samples {
        let f = sample_bump_field(&mut rng, &engine);
        let den = norm(&f, &w_k, &grid, NormFlavor::L1VLinfX)?;
        if den <= 1e-14 {
            continue;
        }
        apply_a(&f, &spec, &engine, &mut out_f);
        let num = norm(&out_f, &w_inf, &grid, NormFlavor::LinfXV)?;
        c_a = c_a.max(num / den);
    }

    let last = *estimates.last().unwrap();
    let pass = last < 1.0 && c_a.is_finite() && c_a > 0.0;

    let mut out = Report::new("splitting report");
    out.kv_f("k", k);
    for (d, e) in deltas.iter().zip(estimates.iter()) {
        out.kv_f(&format!("cb_delta_{d}"), *e);
    }
    out.kv_f("cb_final", last);
    out.kv_f("ca_fit", c_a);
    out.kv("samples", samples);
    out.kv("pass", pass);
    out.write_to(&args.out_dir.join("splitting_report.txt"))?;
    println!("{}", out.as_str());
    Ok(pass)
}
