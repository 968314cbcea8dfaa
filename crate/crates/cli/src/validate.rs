use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use speckle_core::montecarlo::{
    run_gabor_suite, run_intensity_suite, run_mi_consistency, run_perturbation_suite, ComparisonReport, Criterion, ReportRow,
    Verdict, Z_PASS,
};

use crate::config::RunConfig;
use crate::{create_dir, io_err, write_file, write_snapshot, CliError, Suite};

/// Shifts every z-tested prediction by `offset` standard errors (harness self-test).
fn offset_theory(rep: &mut ComparisonReport, offset: f64) {
    for row in &mut rep.rows {
        if let Criterion::ZScore { max } = row.criterion {
            *row = ReportRow::new(
                row.quantity.clone(),
                row.operation.clone(),
                row.formula.clone(),
                row.empirical.clone(),
                row.theoretical + offset * row.empirical.std_error,
                Criterion::ZScore { max },
            );
        }
    }
}

pub fn run(cfg: &RunConfig, suite: Suite, out: &Path) -> Result<(), CliError> {
    let ens = cfg.ensemble()?;
    let noise = ens.noise(cfg.real("noise.n_over_iav"))?;
    let mut reports = Vec::new();
    let wanted = |s: Suite| suite == Suite::All || suite == s;
    if wanted(Suite::Intensity) {
        reports.push(run_intensity_suite(&ens)?);
    }
    if wanted(Suite::Gabor) {
        reports.push(run_gabor_suite(&ens)?);
    }
    if wanted(Suite::Perturbation) {
        reports.push(run_perturbation_suite(&ens)?);
    }
    if wanted(Suite::Mi) {
        reports.push(run_mi_consistency(&ens, &noise)?);
    }
    let offset = cfg.real("validate.theory_offset_se");
    if offset != 0.0 {
        for r in &mut reports {
            offset_theory(r, offset);
        }
    }
    let name = match suite {
        Suite::Intensity => "intensity",
        Suite::Gabor => "gabor",
        Suite::Perturbation => "perturbation",
        Suite::Mi => "mi",
        Suite::All => "all",
    };
    let report = ComparisonReport::merge(reports, name);

    let dir = out.join(name);
    create_dir(&dir)?;
    write_snapshot(cfg, &dir)?;
    let json = serde_json::to_string_pretty(&report.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&dir.join("report.json"), json + "\n")?;
    let csv_path = dir.join("report.csv");
    report.write_csv(BufWriter::new(File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?))?;
    let sc_path = dir.join("scatter.csv");
    report.write_scatter_csv(BufWriter::new(File::create(&sc_path).map_err(|e| io_err(&sc_path, e))?))?;

    for row in &report.rows {
        let z = row.z_score.map(|z| format!("{z:+.2}")).unwrap_or_else(|| "-".into());
        let tag = match row.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "info",
        };
        println!(
            "{tag} {} | {:.6e} +- {:.2e} vs {:.6e} | z {z}",
            row.quantity, row.empirical.value, row.empirical.std_error, row.theoretical
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    let failed = report.failures().count();
    println!(
        "{} rows, {failed} failed (|z| <= {Z_PASS} rule); report in {}",
        report.rows.len(),
        dir.display()
    );
    if failed > 0 {
        return Err(CliError::ValidationFailed(failed));
    }
    Ok(())
}
