//! Correlation and bit flips between a pattern and its perturbed versions,
//! and the pairwise scatter of a drifting sequence.

use super::{
    drift_analysis_fields, mean_se, per_trial, ratio_se, simulate_drift_sequence, ComparisonReport, Criterion,
    EnsembleConfig, EstimatorResult, ReportRow, ScatterPoint, Z_PASS,
};
use crate::error::{Error, Result};
use crate::gabor::{binarize, bit_flips, empirical_correlation_gabor, empirical_correlation_intensity, gabor_map, GaborMap};
use crate::rng;
use crate::source::PerturbationSpec;
use crate::theory::{bit_error_probability, BitErrorMethod, PerturbationFactor};

struct PerturbedOut {
    xi_i: f64,
    xi_g: [f64; 2],
    xi_g_pooled: f64,
    gmap: GaborMap,
}

struct TrialOut {
    base: GaborMap,
    perturbed: Vec<PerturbedOut>,
}

fn flips_or_empty(base: &GaborMap, probe: &GaborMap, threshold: f64) -> Result<(usize, usize)> {
    let bits = binarize(base, threshold)?;
    match bit_flips(&bits, probe) {
        Ok(v) => Ok(v),
        Err(Error::Degenerate(_)) => Ok((0, 0)),
        Err(e) => Err(e),
    }
}

/// For every `q`: `Xi_I` and `Xi_G` against `Q = sin^2 q / q^2`, bit-flip
/// rates against the flip probability for every threshold, and the drift
/// sequence scatter with and without detector noise.
pub fn run_perturbation_suite(cfg: &EnsembleConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let trials = per_trial(cfg.trials, |t| {
        let seed = rng::trial_seed(cfg.base_seed, t as u64);
        let src = cfg.source(t);
        let base_map = cfg.render(&src)?;
        let base = gabor_map(&base_map, &cfg.gabor)?;
        let mut perturbed = Vec::with_capacity(cfg.q_list.len());
        for (qi, &q) in cfg.q_list.iter().enumerate() {
            let spec = PerturbationSpec::new(q, rng::derive_seed(seed, rng::DOMAIN_PERTURB, qi as u64))?;
            let map = cfg.render(&src.perturb(&spec))?;
            let gmap = gabor_map(&map, &cfg.gabor)?;
            let xi_i = empirical_correlation_intensity(&base_map, &map)?;
            let g = empirical_correlation_gabor(&base, &gmap)?;
            perturbed.push(PerturbedOut {
                xi_i,
                xi_g: g.per_direction,
                xi_g_pooled: g.pooled,
                gmap,
            });
        }
        Ok(TrialOut { base, perturbed })
    })?;

    let mut rep = ComparisonReport::new("perturbation");
    let m_px = cfg.speckle_px();
    let n_eff_i = cfg.n_eff_per_frame() * cfg.trials as f64;
    let n_eff_g = super::lattice_n_eff(&cfg.gabor, m_px) * cfg.trials as f64;

    // threshold unit: empirical sigma_G of the unperturbed maps
    let sq: Vec<f64> = trials
        .iter()
        .map(|t| t.base.iter_all().map(|v| v * v).sum::<f64>() / t.base.len() as f64)
        .collect();
    let sigma_g = (super::stable_sum(sq.iter().copied()) / sq.len() as f64).sqrt();
    rep.notes.push(format!(
        "thresholds T are in units of the empirical sigma_G = {sigma_g:.6e} of the unperturbed maps"
    ));

    for (qi, &q) in cfg.q_list.iter().enumerate() {
        let factor = PerturbationFactor::new(q)?;
        let big_q = factor.value();
        let crit = if q == 0.0 {
            Criterion::Absolute { tol: 1e-12 }
        } else {
            Criterion::ZScore { max: Z_PASS }
        };
        let (xi, se) = mean_se(&trials.iter().map(|t| t.perturbed[qi].xi_i).collect::<Vec<_>>());
        rep.push(ReportRow::new(
            format!("Xi_I, q = {q:.4}"),
            "PerturbationFactor::value",
            "Xi_I = Q = sin^2 q / q^2",
            EstimatorResult::new("Xi_I", xi, se, n_eff_i),
            big_q,
            crit,
        ));
        let (xg, se) = mean_se(&trials.iter().map(|t| t.perturbed[qi].xi_g_pooled).collect::<Vec<_>>());
        rep.push(ReportRow::new(
            format!("Xi_G, q = {q:.4}"),
            "PerturbationFactor::value",
            "Xi_G = Q = sin^2 q / q^2",
            EstimatorResult::new("Xi_G", xg, se, n_eff_g),
            big_q,
            crit,
        ));

        for &t_over in &cfg.t_list {
            let counts: Vec<(usize, usize)> = trials
                .iter()
                .map(|t| flips_or_empty(&t.base, &t.perturbed[qi].gmap, t_over * sigma_g))
                .collect::<Result<_>>()?;
            let flips: Vec<f64> = counts.iter().map(|c| c.0 as f64).collect();
            let robust: Vec<f64> = counts.iter().map(|c| c.1 as f64).collect();
            let total_robust: f64 = robust.iter().sum();
            if total_robust == 0.0 {
                rep.notes.push(format!("no robust bits at q = {q}, T = {t_over} sigma_G"));
                continue;
            }
            let (rate, spread_se) = ratio_se(&flips, &robust);
            let (method, operation, formula) = if t_over == 0.0 {
                (BitErrorMethod::ExactT0, "bit_error_probability(exact_t0)", "P = arccos(Q) / pi")
            } else {
                (
                    BitErrorMethod::Quadrature,
                    "bit_error_probability(quadrature)",
                    "P = int_T^inf N(G) (1/2) Erfc(Q G / (sqrt(2(1-Q^2)) sigma_G)) dG / ((1/2) Erfc(T / (sigma_G sqrt 2)))",
                )
            };
            let theory = bit_error_probability(t_over, &factor, method)?.probability;
            // rare flips can leave every trial at zero; the binomial error of
            // independent bits bounds the spread from below
            let se = spread_se.max((theory * (1.0 - theory) / total_robust).sqrt());
            let n_eff = (total_robust / (2.0 * cfg.gabor.n_points() as f64 * cfg.trials as f64)) * n_eff_g;
            rep.push(ReportRow::new(
                format!("bit flip rate, q = {q:.4}, T = {t_over} sigma_G"),
                operation,
                formula,
                EstimatorResult::new("flip rate", rate, se, n_eff),
                theory,
                Criterion::ZScore { max: Z_PASS },
            ));
        }
        for (t, tr) in trials.iter().enumerate() {
            let p = &tr.perturbed[qi];
            rep.scatter.push(ScatterPoint {
                label: format!("trial {t}, q = {q:.4}"),
                xi_i: p.xi_i,
                xi_g: p.xi_g,
                xi_g_pooled: p.xi_g_pooled,
            });
        }
    }

    // drifting source, noiseless and with detector noise
    let drift_seed = rng::derive_seed(cfg.base_seed, rng::DOMAIN_TRIAL, u64::MAX);
    let (w, h) = (cfg.grid.width(), cfg.grid.height());
    let d = cfg.drift;
    let clean = simulate_drift_sequence(cfg, d.images, d.q_step, None, drift_seed)?;
    let drift_gabor = cfg.drift_gabor()?;
    let clean = drift_analysis_fields(&clean, w, h, &drift_gabor)?;
    let noise = cfg.noise(d.noise_over_iav)?;
    let noisy = simulate_drift_sequence(cfg, d.images, d.q_step, Some(&noise), drift_seed)?;
    let noisy = drift_analysis_fields(&noisy, w, h, &drift_gabor)?;
    let n_pairs = clean.rows.len() as f64;

    rep.push(ReportRow::new(
        format!("drift scatter slope Xi_G on Xi_I, {} frames, noiseless", d.images),
        "drift_analysis_fields",
        "Xi_G = Xi_I",
        EstimatorResult::new("slope", clean.regression.slope, clean.regression.slope_se, n_pairs),
        1.0,
        Criterion::Absolute { tol: 0.05 },
    ));
    rep.push(ReportRow::new(
        "drift scatter intercept, noiseless",
        "drift_analysis_fields",
        "Xi_G = Xi_I",
        EstimatorResult::exact("intercept", clean.regression.intercept),
        0.0,
        Criterion::Diagnostic,
    ));
    // pairs share frames, so the spread is scaled by the number of frames
    // rather than the number of pairs
    let diffs: Vec<f64> = noisy.rows.iter().map(|r| r.xi_g_pooled - r.xi_i).collect();
    let (md, _) = mean_se(&diffs);
    let sd = (super::stable_sum(diffs.iter().map(|x| (x - md).powi(2))) / (diffs.len() as f64 - 1.0)).sqrt();
    let se = sd / ((d.images - 1) as f64).sqrt();
    rep.push(ReportRow::new(
        format!("mean(Xi_G - Xi_I), detector noise N_I = {} I_av", d.noise_over_iav),
        "drift_analysis_fields",
        "Gabor filtering averages out white noise: Xi_G > Xi_I",
        EstimatorResult::new("mean difference", md, se, d.images as f64),
        0.0,
        Criterion::Exceeds { min_z: Z_PASS },
    ));
    rep.push(ReportRow::new(
        "drift scatter slope, with detector noise",
        "drift_analysis_fields",
        "least squares",
        EstimatorResult::new("slope", noisy.regression.slope, noisy.regression.slope_se, n_pairs),
        1.0,
        Criterion::Diagnostic,
    ));
    for (tag, analysis) in [("drift", &clean), ("noisy drift", &noisy)] {
        for r in &analysis.rows {
            rep.scatter.push(ScatterPoint {
                label: format!("{tag} {}-{}", r.i, r.j),
                xi_i: r.xi_i,
                xi_g: r.xi_g,
                xi_g_pooled: r.xi_g_pooled,
            });
        }
    }
    Ok(rep.finish())
}
