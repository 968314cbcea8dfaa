//! Gabor coefficients of injected detector noise, and the agreement of the
//! two mutual-information evaluations.

use super::{mean_se, per_trial, white_noise, ComparisonReport, Criterion, EnsembleConfig, EstimatorResult, ReportRow, Z_PASS};
use crate::error::Result;
use crate::gabor::gabor_map_field;
use crate::rng;
use crate::theory::{cov_blocks_n, mi_detector, Block, MiMethod, MiParams, NoiseParams, SIGMA_DEFAULT};

/// Reference parameters of the detector-noise MI comparison (pixels).
pub const MI_L: f64 = 800.0;
pub const MI_M: f64 = 3.0;
pub const MI_ELL: f64 = 5.0;

/// Per trial: `<G1^2>`, `<G2^2>`, `<G1 G2>` at zero separation, and
/// `<G1 G1'>`, `<G2 G2'>` at one lattice pitch along x.
struct TrialOut([f64; 5]);

/// Empirical noise covariance blocks against their closed forms, and the
/// momentum-sum MI against the dilogarithm form in both SNR regimes.
pub fn run_mi_consistency(cfg: &EnsembleConfig, noise: &NoiseParams) -> Result<ComparisonReport> {
    cfg.validate()?;
    let (width, height) = (cfg.grid.width(), cfg.grid.height());
    let grid = &cfg.gabor;
    let n = grid.n_side();
    let sd = noise.n_i * noise.t.sqrt();
    let trials = per_trial(cfg.trials, |t| {
        let seed = rng::derive_seed(rng::trial_seed(cfg.base_seed, t as u64), rng::DOMAIN_NOISE, 0);
        let field = white_noise(width * height, sd, seed);
        let g = gabor_map_field(&field, width, height, grid)?;
        let (a, b) = (g.direction(0), g.direction(1));
        let np = a.len() as f64;
        let mut s = [0.0; 5];
        for (x, y) in a.iter().zip(b) {
            s[0] += x * x;
            s[1] += y * y;
            s[2] += x * y;
        }
        let mut lag = 0usize;
        for j in 0..n {
            for i in 0..n - 1 {
                let (p, q) = (j * n + i, j * n + i + 1);
                s[3] += a[p] * a[q];
                s[4] += b[p] * b[q];
                lag += 1;
            }
        }
        Ok(TrialOut([s[0] / np, s[1] / np, s[2] / np, s[3] / lag as f64, s[4] / lag as f64]))
    })?;

    let mut rep = ComparisonReport::new("mi");
    let (k1, k2) = (grid.k_vector(0), grid.k_vector(1));
    let w = grid.w();
    let d = [grid.pitch() as f64, 0.0];
    // noise decorrelates over ~w, so coefficients one window apart are
    // close to independent
    let n_eff = cfg.trials as f64 * ((grid.extent() as f64 / w).powi(2)).min(grid.n_points() as f64).max(1.0);
    let cases = [
        ("Sigma_N[11](0)", 0usize, Block::Diagonal(0), [0.0, 0.0]),
        ("Sigma_N[22](0)", 1, Block::Diagonal(1), [0.0, 0.0]),
        ("Sigma_N[12](0)", 2, Block::Cross, [0.0, 0.0]),
        ("Sigma_N[11](dx)", 3, Block::Diagonal(0), d),
        ("Sigma_N[22](dx)", 4, Block::Diagonal(1), d),
    ];
    for (name, idx, block, dx) in cases {
        let (v, se) = mean_se(&trials.iter().map(|t| t.0[idx]).collect::<Vec<_>>());
        let theory = cov_blocks_n(dx, block, k1, k2, noise, w);
        rep.push(ReportRow::new(
            format!("{name}, dx = ({}, {}) px", dx[0], dx[1]),
            "cov_blocks_n",
            "Sigma_N = N_I^2 t / (8 pi w^2) e^{-dx^2/4w^2} [cos(k.dx) - e^{-w^2k^2}] (diagonal)",
            EstimatorResult::new(name, v, se, n_eff),
            theory,
            Criterion::ZScore { max: Z_PASS },
        ));
    }

    // MI evaluations at the reference parameters, one SNR per regime, plus the
    // SNR of the injected noise
    let i_av = cfg.geometry.mean_intensity();
    let snrs = [0.05, 0.1, 3.0, 30.0, i_av / noise.n_i.max(f64::MIN_POSITIVE)];
    for &snr in &snrs {
        let p = MiParams::from_physical(MI_L, MI_ELL, MI_M, SIGMA_DEFAULT, snr, noise.t)?;
        let y = p.y();
        let exact = mi_detector(&p, MiMethod::ExactSum);
        let dilog = mi_detector(&p, MiMethod::Dilog);
        let in_regime = y > 10.0 || y < 0.1;
        rep.push(ReportRow::new(
            format!("MI exact sum / dilog, I_av/N_I = {snr:.4}, y = {y:.3e}"),
            "mi_detector(exact_sum)",
            "1/2 sum_p ln(1 + c1 e^{-c2 p^2}) vs (L^2 / 2 pi c2) [Li2(-c1 e^{-c2 s1}) - Li2(-c1 e^{-c2 s0})]",
            EstimatorResult::exact("exact_sum", exact.nats),
            dilog.nats,
            if in_regime {
                Criterion::Relative { tol: 0.02 }
            } else {
                Criterion::Diagnostic
            },
        ));
    }
    Ok(rep.finish())
}
