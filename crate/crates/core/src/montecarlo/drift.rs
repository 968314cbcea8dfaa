//! Pairwise correlations over a sequence of frames from a slowly drifting source.

use rayon::prelude::*;
use serde::Serialize;

use super::{white_noise, EnsembleConfig};
use crate::error::{Error, Result};
use crate::gabor::{empirical_correlation_gabor, gabor_map_field, pearson, GaborGrid, GaborMap};
use crate::rng;
use crate::source::PerturbationSpec;
use crate::theory::NoiseParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftRow {
    pub i: usize,
    pub j: usize,
    pub xi_i: f64,
    pub xi_g: [f64; 2],
    pub xi_g_pooled: f64,
}

/// Least-squares line `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftAnalysis {
    pub rows: Vec<DriftRow>,
    /// Pooled `Xi_G` regressed on `Xi_I`.
    pub regression: Regression,
}

pub fn regression(x: &[f64], y: &[f64]) -> Result<Regression> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} points", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Degenerate("regression needs at least 3 points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(Regression {
        slope,
        intercept,
        slope_se: (rss / (nf - 2.0) / sxx).sqrt(),
        n,
    })
}

/// `Xi_I` and `Xi_G` for every unordered pair of frames (row-major fields
/// of equal size), plus the regression of `Xi_G` on `Xi_I`.
pub fn drift_analysis_fields(frames: &[Vec<f64>], width: usize, height: usize, grid: &GaborGrid) -> Result<DriftAnalysis> {
    if frames.len() < 2 {
        return Err(Error::param("frames", "need at least 2 frames"));
    }
    if let Some(f) = frames.iter().find(|f| f.len() != width * height) {
        return Err(Error::ShapeMismatch(format!("frame of {} values, expected {width}x{height}", f.len())));
    }
    let maps: Vec<GaborMap> = frames
        .par_iter()
        .map(|f| gabor_map_field(f, width, height, grid))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..frames.len())
        .flat_map(|i| (i + 1..frames.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<DriftRow> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let xi_i = pearson(&frames[i], &frames[j])?;
            let g = empirical_correlation_gabor(&maps[i], &maps[j])?;
            Ok(DriftRow {
                i,
                j,
                xi_i,
                xi_g: g.per_direction,
                xi_g_pooled: g.pooled,
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.xi_i).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.xi_g_pooled).collect();
    let regression = if rows.len() >= 3 {
        regression(&x, &y)?
    } else {
        Regression {
            slope: f64::NAN,
            intercept: f64::NAN,
            slope_se: f64::NAN,
            n: rows.len(),
        }
    };
    Ok(DriftAnalysis { rows, regression })
}

/// Frames of a source whose phases take a uniform random step of half-width
/// `q_step` between consecutive frames; optional white detector noise of
/// spectral density `N_I^2 t` (per-pixel standard deviation `N_I sqrt(t)` on
/// unit pixels) is added to each frame.
pub fn simulate_drift_sequence(
    cfg: &EnsembleConfig,
    images: usize,
    q_step: f64,
    noise: Option<&NoiseParams>,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if images < 2 {
        return Err(Error::param("images", "need at least 2 frames"));
    }
    let mut sources = Vec::with_capacity(images);
    sources.push(crate::source::SpeckleSource::new(&cfg.geometry, seed));
    for k in 1..images {
        let spec = PerturbationSpec::new(q_step, rng::derive_seed(seed, rng::DOMAIN_PERTURB, k as u64))?;
        let next = sources[k - 1].perturb(&spec);
        sources.push(next);
    }
    sources
        .par_iter()
        .enumerate()
        .map(|(k, src)| {
            let mut values = cfg.render(src)?.into_values();
            if let Some(n) = noise {
                let sd = n.n_i * n.t.sqrt();
                let z = white_noise(values.len(), sd, rng::derive_seed(seed, rng::DOMAIN_NOISE, k as u64));
                for (v, e) in values.iter_mut().zip(z) {
                    *v += e;
                }
            }
            Ok(values)
        })
        .collect()
}
