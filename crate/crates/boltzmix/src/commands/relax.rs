//! `relax`: integrate the perturbed equation and emit the relaxation trace;
//! `--positive` selects the nonnegativity-preserving gain/loss scheme.

use boltzmix_core::solver::{run as run_scenario, run_positive, InitialShape, RelaxationTrace};

use crate::commands::CommandError;
use crate::config::ScenarioFile;
use crate::report::{Csv, CsvValue, Report};
use crate::CliArgs;

pub fn run(cfg: &ScenarioFile, args: &CliArgs, positive: bool) -> Result<bool, CommandError> {
    let sc = cfg.scenario(args.seed)?;
    let trace = if positive {
        run_positive(&sc)?
    } else {
        run_scenario(&sc)?
    };
    write_trace(&trace, &sc.species.len(), args)?;

    // checks: moment drift, entropy monotonicity and decay where applicable
    let drift = trace.max_moment_drift_rate();
    let h_monotone = trace.h_monotone(1e-10);
    let zero_run = sc.shape == InitialShape::Zero;
    let min_f_ok = !positive || trace.rows.iter().all(|r| r.min_f >= 0.0);
    let decay_ok = if zero_run {
        true
    } else {
        trace.lambda_l2.map(|l| l > 0.0).unwrap_or(false)
            && trace.lambda_linf.map(|l| l > 0.0).unwrap_or(false)
            && trace.lambda_l1.map(|l| l > 0.0).unwrap_or(false)
    };
    let pass = drift < 1e-8 && h_monotone && decay_ok && min_f_ok;

    let mut out = Report::new(if positive {
        "relaxation report (gain/loss scheme)"
    } else {
        "relaxation report"
    });
    out.kv_f("t_end", sc.t_end);
    out.kv_f("dt", sc.dt);
    out.kv_f("moment_drift_rate", drift);
    out.kv("h_monotone", h_monotone);
    if let Some(g) = trace.operator_gap {
        out.kv_f("operator_gap", g);
    }
    if let Some(l) = trace.lambda_l2 {
        out.kv_f("lambda_fit_l2_mu", l);
    }
    if let Some(l) = trace.lambda_linf {
        out.kv_f("lambda_fit_linf_beta", l);
    }
    if let Some(l) = trace.lambda_l1 {
        out.kv_f("lambda_fit_l1v_linfx_k", l);
    }
    out.kv(
        "min_f",
        trace
            .rows
            .iter()
            .map(|r| r.min_f)
            .fold(f64::INFINITY, f64::min),
    );
    out.kv("pass", pass);
    out.write_to(&args.out_dir.join("relax_report.txt"))?;
    println!("{}", out.as_str());
    Ok(pass)
}

fn write_trace(
    trace: &RelaxationTrace,
    n_species: &usize,
    args: &CliArgs,
) -> Result<(), CommandError> {
    let mut columns: Vec<String> = vec!["t".into()];
    for i in 0..*n_species {
        columns.push(format!("mass_drift_{i}"));
    }
    columns.extend(
        [
            "momentum_drift_x",
            "momentum_drift_y",
            "momentum_drift_z",
            "energy_drift",
            "h",
            "norm_l2_mu",
            "norm_linf_beta",
            "norm_l1v_linfx_k",
            "min_f",
        ]
        .map(String::from),
    );
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(
        "relaxation trace: conserved-moment drifts, entropy, perturbation norms, minimum of F",
        &cols,
    );
    for row in &trace.rows {
        let mut vals: Vec<CsvValue> = vec![CsvValue::Float(row.t)];
        for d in &row.mass_drift {
            vals.push(CsvValue::Float(*d));
        }
        vals.push(CsvValue::Float(row.momentum_drift[0]));
        vals.push(CsvValue::Float(row.momentum_drift[1]));
        vals.push(CsvValue::Float(row.momentum_drift[2]));
        vals.push(CsvValue::Float(row.energy_drift));
        vals.push(CsvValue::Float(row.h_value));
        vals.push(CsvValue::Float(row.norm_l2_mu));
        vals.push(CsvValue::Float(row.norm_linf_beta));
        vals.push(CsvValue::Float(row.norm_l1v_k));
        vals.push(CsvValue::Float(row.min_f));
        csv.row_mixed(&vals);
    }
    csv.write_to(&args.out_dir.join("relax_trace.csv"))?;
    Ok(())
}
