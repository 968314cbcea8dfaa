//! First- and second-order intensity statistics of simulated patterns.

use super::{mean_se, per_trial, ComparisonReport, Criterion, EnsembleConfig, EstimatorResult, ReportRow, Z_PASS};
use crate::error::Result;
use crate::theory::intensity_correlation;

struct TrialStats {
    mean: f64,
    var_ratio: f64,
    /// Per offset: average of `(x - 1)(x' - 1)` over horizontal and vertical pairs.
    corr: Vec<f64>,
    normalized: Vec<f64>,
}

fn shifted_covariance(x: &[f64], width: usize, height: usize, shift: usize) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for row in 0..height {
        let line = &x[row * width..(row + 1) * width];
        for col in 0..width.saturating_sub(shift) {
            s += (line[col] - 1.0) * (line[col + shift] - 1.0);
            n += 1;
        }
    }
    for row in 0..height.saturating_sub(shift) {
        for col in 0..width {
            s += (x[row * width + col] - 1.0) * (x[(row + shift) * width + col] - 1.0);
            n += 1;
        }
    }
    s / n as f64
}

/// Kolmogorov-Smirnov distance of sorted samples to the unit exponential law.
pub(crate) fn ks_exponential(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = -(-x).exp_m1();
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Exponential intensity law, its variance and the intensity correlation at
/// the configured separations.
pub fn run_intensity_suite(cfg: &EnsembleConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let i_av = cfg.geometry.mean_intensity();
    let (width, height) = (cfg.grid.width(), cfg.grid.height());
    let m_px = cfg.speckle_px();
    let shifts: Vec<usize> = cfg
        .correlation_offsets
        .iter()
        .map(|r| (r * m_px).round().max(0.0) as usize)
        .collect();

    let trials = per_trial(cfg.trials, |t| {
        let map = cfg.render(&cfg.source(t))?;
        let x: Vec<f64> = map.values().iter().map(|v| v / i_av).collect();
        let n = x.len() as f64;
        let mean = super::stable_sum(x.iter().copied()) / n;
        let var_ratio = super::stable_sum(x.iter().map(|v| (v - 1.0) * (v - 1.0))) / n;
        let corr = shifts.iter().map(|&s| shifted_covariance(&x, width, height, s)).collect();
        Ok(TrialStats {
            mean,
            var_ratio,
            corr,
            normalized: x,
        })
    })?;

    let n_eff_frame = cfg.n_eff_per_frame();
    let n_eff = n_eff_frame * cfg.trials as f64;
    let mut rep = ComparisonReport::new("intensity");

    let (m, se) = mean_se(&trials.iter().map(|t| t.mean).collect::<Vec<_>>());
    rep.push(ReportRow::new(
        "mean intensity / I_av",
        "SourceGeometry::mean_intensity",
        "I_av = N_reg (p^2 / lambda z)^2",
        EstimatorResult::new("mean", m, se, n_eff),
        1.0,
        Criterion::ZScore { max: Z_PASS },
    ));

    let (v, se) = mean_se(&trials.iter().map(|t| t.var_ratio).collect::<Vec<_>>());
    rep.push(ReportRow::new(
        "Var(I) / I_av^2",
        "intensity_pdf",
        "exponential law: variance = I_av^2",
        EstimatorResult::new("variance ratio", v, se, n_eff),
        1.0,
        Criterion::Absolute { tol: 0.05 },
    ));
    rep.push(ReportRow::new(
        "C_I(0)",
        "intensity_correlation",
        "C_I(0) = 1",
        EstimatorResult::new("C_I(0)", v, se, n_eff),
        1.0,
        Criterion::ZScore { max: Z_PASS },
    ));

    for (idx, (&r, &s)) in cfg.correlation_offsets.iter().zip(&shifts).enumerate() {
        if s == 0 {
            continue;
        }
        let (c, se) = mean_se(&trials.iter().map(|t| t.corr[idx]).collect::<Vec<_>>());
        let theory = intensity_correlation([s as f64, 0.0], m_px)?;
        rep.push(ReportRow::new(
            format!("C_I(r/M = {r}) [shift {s} px]"),
            "intensity_correlation",
            "C_I = 4 [J1(r/M) / (r/M)]^2",
            EstimatorResult::new(format!("C_I({r})"), c, se, n_eff),
            theory,
            Criterion::ZScore { max: Z_PASS },
        ));
    }

    let mut pooled: Vec<f64> = trials.into_iter().flat_map(|t| t.normalized).collect();
    pooled.sort_by(f64::total_cmp);
    let ks = ks_exponential(&pooled);
    rep.push(ReportRow::new(
        "KS distance to exponential law",
        "intensity_pdf",
        "p(I) = exp(-I / I_av) / I_av",
        EstimatorResult::new("KS", ks, 0.0, n_eff),
        0.0,
        Criterion::Absolute { tol: 0.01 },
    ));
    rep.notes.push(format!(
        "effective samples: {n_eff:.0} ({} trials x {n_eff_frame:.0} per frame, correlation area pi M^2 with M = {m_px:.3} px)",
        cfg.trials
    ));
    Ok(rep.finish())
}
