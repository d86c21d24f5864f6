//! `povzner`: scan the moment contraction constant, locate the threshold,
//! and verify the sphere-averaged inequality on random samples.

use boltzmix_core::povzner::povzner_report;

use crate::commands::CommandError;
use crate::config::ScenarioFile;
use crate::report::{Csv, Report};
use crate::CliArgs;

pub fn run(cfg: &ScenarioFile, args: &CliArgs) -> Result<bool, CommandError> {
    let species = cfg.species()?;
    let kernel = cfg.kernel(species.len())?;
    let k_values = cfg.k_values()?;
    if k_values.iter().any(|&k| k <= 2.0) {
        return Err(CommandError::Config(
            "[analysis] k_values must all exceed 2".into(),
        ));
    }
    let samples = cfg.povzner_samples()?;
    let seed = args.seed.unwrap_or(1);
    let report = povzner_report(&species, &kernel, &k_values, samples, seed)?;

    let mut csv = Csv::new("moment contraction constants", &["k", "c_k", "samples", "max_ratio"]);
    for ((k, ck), (n, ratio)) in report
        .k_values
        .iter()
        .zip(report.c_k.iter())
        .zip(report.verification.iter())
    {
        csv.row_mixed(&[
            crate::report::CsvValue::Float(*k),
            crate::report::CsvValue::Float(*ck),
            crate::report::CsvValue::Int(*n as i64),
            crate::report::CsvValue::Float(*ratio),
        ]);
    }
    csv.write_to(&args.out_dir.join("povzner.csv"))?;

    let monotone = report.c_k.windows(2).all(|w| w[1] < w[0]);
    let verified = report.verification.iter().all(|&(_, r)| r <= 1.0 + 1e-9);
    let pass = monotone && verified;

    let mut out = Report::new("Povzner report");
    out.kv("k0_integer", report.k0_integer);
    out.kv_f("k0_real", report.k0_real);
    out.kv("samples_per_k", samples);
    out.kv("monotone", monotone);
    out.kv("verified", verified);
    out.kv("pass", pass);
    out.write_to(&args.out_dir.join("povzner_report.txt"))?;
    println!("{}", out.as_str());
    Ok(pass)
}
