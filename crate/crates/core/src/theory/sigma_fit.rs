//! Width of the Gaussian curve that best approximates the intensity correlation.

use super::intensity::intensity_correlation;

/// Result of fitting `exp(-u^2 / (2 Sigma^2))` to `4 (J1(u)/u)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaFit {
    pub sigma: f64,
    /// Root-mean-square residual over the fit range.
    pub rms_residual: f64,
}

fn residual(sigma: f64, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(u, c)| {
            let d = (-u * u / (2.0 * sigma * sigma)).exp() - c;
            d * d
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Least-squares fit on `n` equally spaced points of `u = r/M` in `[0, u_max]`.
pub fn fit_sigma(u_max: f64, n: usize) -> SigmaFit {
    let n = n.max(2);
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let u = u_max * i as f64 / (n - 1) as f64;
            (u, intensity_correlation([u, 0.0], 1.0).expect("M = 1"))
        })
        .collect();
    // golden-section search; the residual is unimodal in Sigma on this bracket
    let (mut a, mut b) = (0.5f64, 3.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (residual(c, &samples), residual(d, &samples));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = residual(c, &samples);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = residual(d, &samples);
        }
    }
    let sigma = 0.5 * (a + b);
    SigmaFit {
        sigma,
        rms_residual: residual(sigma, &samples).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::SIGMA_DEFAULT;

    #[test]
    fn fitted_width_is_near_default() {
        let f = fit_sigma(8.0, 4001);
        eprintln!("Sigma fit {:.4} rms {:.2e}", f.sigma, f.rms_residual);
        assert!((f.sigma - SIGMA_DEFAULT).abs() < 0.1);
        assert!(f.rms_residual < 0.03);
        // a grid fit finds no better width nearby
        let samples: Vec<(f64, f64)> = (0..4001)
            .map(|i| {
                let u = 8.0 * i as f64 / 4000.0;
                (u, intensity_correlation([u, 0.0], 1.0).unwrap())
            })
            .collect();
        let best = residual(f.sigma, &samples);
        for i in -20..=20 {
            assert!(residual(f.sigma + 1e-3 * i as f64, &samples) >= best - 1e-15);
        }
    }
}
