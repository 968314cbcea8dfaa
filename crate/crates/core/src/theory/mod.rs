//! Closed-form speckle and Gabor-coefficient statistics.
//!
//! Detection-plane quantities use pixel units: `w`, `M`, `L` and `ell` in
//! pixels, wave numbers in radians per pixel, pixel area `t` in pixels^2.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub mod bit_error;
pub mod gabor_stats;
pub mod information;
pub mod intensity;
pub mod moments;
pub mod quad;
pub mod sigma_fit;
pub mod special;

pub use bit_error::{bit_error_probability, BitErrorMethod, BitErrorResult};
pub use gabor_stats::{correlation_cg, cov_blocks_g, cov_blocks_n, fourier_cov, sigma_g_sq, Block, CovKind};
pub use information::{
    mi_detector, mi_gaussian_general, mi_perturbed, MiMethod, MiResult, PerturbedMiMethod,
};
pub use intensity::{
    intensity_correlation, intensity_pdf, joint_intensity_moment, joint_intensity_pdf,
    perturbed_intensity_mean,
};
pub use moments::{
    brute_force_moment, continuum_gabor_coefficient, cycle_trace_moment, fourth_moment_g, lattice_covariance, small_w_linearized_moments,
    small_w_sigma_sq, FourthMomentRegime, MomentResult,
};
pub use sigma_fit::{fit_sigma, SigmaFit};

/// Default width constant of the Gaussian approximation to the intensity correlation.
pub const SIGMA_DEFAULT: f64 = 1.29;

/// Parameters of the Gabor-coefficient statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborStatParams {
    pub w: f64,
    pub k_mag: f64,
    pub m: f64,
    pub sigma: f64,
    pub i_av: f64,
}

impl GaborStatParams {
    pub fn new(w: f64, k_mag: f64, m: f64, i_av: f64) -> Result<Self> {
        Self::with_sigma(w, k_mag, m, i_av, SIGMA_DEFAULT)
    }

    pub fn with_sigma(w: f64, k_mag: f64, m: f64, i_av: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("w", w), ("M", m), ("Sigma", sigma), ("I_av", i_av)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(k_mag >= 0.0 && k_mag.is_finite()) {
            return Err(Error::param("k", format!("must be >= 0, got {k_mag}")));
        }
        Ok(Self {
            w,
            k_mag,
            m,
            sigma,
            i_av,
        })
    }

    /// `gamma = 1 / (2 (1 + M^2 Sigma^2 / (2 w^2)))`, always in `(0, 1/2)`.
    pub fn gamma(&self) -> f64 {
        0.5 / (1.0 + self.m * self.m * self.sigma * self.sigma / (2.0 * self.w * self.w))
    }

    pub fn with_k(&self, k_mag: f64) -> Self {
        Self { k_mag, ..*self }
    }
}

/// White detector noise: amplitude `N_I` per square-root pixel area, pixel area `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    pub n_i: f64,
    pub t: f64,
}

impl NoiseParams {
    pub fn new(n_i: f64, t: f64) -> Result<Self> {
        if !(n_i >= 0.0 && n_i.is_finite()) {
            return Err(Error::param("N_I", format!("must be >= 0, got {n_i}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::param("t", format!("must be positive, got {t}")));
        }
        Ok(Self { n_i, t })
    }
}

/// Inputs of the detector-noise mutual information.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiParams {
    pub l: f64,
    pub ell: f64,
    pub c1: f64,
    pub c2: f64,
    /// Average speckle area `pi M^2` (pixels^2) used for per-speckle normalization.
    pub speckle_area: f64,
}

impl MiParams {
    /// From the SNR constants directly; the speckle area is inferred from
    /// `c2 = M^2 Sigma^2 / 2` with the default `Sigma`.
    pub fn new(l: f64, ell: f64, c1: f64, c2: f64) -> Result<Self> {
        let area = 2.0 * PI * c2 / (SIGMA_DEFAULT * SIGMA_DEFAULT);
        Self::validated(l, ell, c1, c2, area)
    }

    /// `c1 = 2 pi Sigma^2 (I_av/N_I)^2 M^2 / t`, `c2 = M^2 Sigma^2 / 2`.
    pub fn from_physical(l: f64, ell: f64, m: f64, sigma: f64, snr: f64, t: f64) -> Result<Self> {
        if !(snr >= 0.0 && m > 0.0 && sigma > 0.0 && t > 0.0) {
            return Err(Error::param("MI inputs", "need I_av/N_I >= 0, M, Sigma, t > 0"));
        }
        let c1 = 2.0 * PI * sigma * sigma * snr * snr * m * m / t;
        let c2 = 0.5 * m * m * sigma * sigma;
        Self::validated(l, ell, c1, c2, PI * m * m)
    }

    fn validated(l: f64, ell: f64, c1: f64, c2: f64, speckle_area: f64) -> Result<Self> {
        if !(c1 >= 0.0 && c1.is_finite()) {
            return Err(Error::param("c1", format!("must be >= 0, got {c1}")));
        }
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(Error::param("c2", format!("must be positive, got {c2}")));
        }
        if !(ell > 0.0 && l > ell) {
            return Err(Error::param("ell", format!("need 0 < ell < L, got ell={ell}, L={l}")));
        }
        Ok(Self {
            l,
            ell,
            c1,
            c2,
            speckle_area,
        })
    }

    pub fn with_c1(&self, c1: f64) -> Self {
        Self { c1, ..*self }
    }

    /// Regime indicator `y = c1 exp(-c2 pi^2 / ell^2)`.
    pub fn y(&self) -> f64 {
        self.c1 * (-self.c2 * PI * PI / (self.ell * self.ell)).exp()
    }

    /// Factor converting a whole-grid value to a per-speckle value (`L^2 -> pi M^2`).
    pub fn per_speckle_factor(&self) -> f64 {
        self.speckle_area / (self.l * self.l)
    }
}

/// Correlation factor `Q = sin^2 q / q^2` of a uniform phase perturbation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationFactor {
    q: f64,
    value: f64,
    one_minus_sq: f64,
}

impl PerturbationFactor {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&q) {
            return Err(Error::param("q", format!("must lie in [0, pi], got {q}")));
        }
        let (value, one_minus_sq) = if q < 0.1 {
            // 1 - sin(q)/q = d, computed without cancellation
            let q2 = q * q;
            let d = q2 / 6.0 * (1.0 - q2 / 20.0 * (1.0 - q2 / 42.0 * (1.0 - q2 / 72.0 * (1.0 - q2 / 110.0))));
            let s = 1.0 - d;
            // 1 - s^4 = 4d - 6d^2 + 4d^3 - d^4
            (s * s, d * (4.0 - d * (6.0 - d * (4.0 - d))))
        } else if q == PI {
            (0.0, 1.0)
        } else {
            let s = q.sin() / q;
            let v = s * s;
            (v, 1.0 - v * v)
        };
        Ok(Self {
            q,
            value,
            one_minus_sq,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Q`.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// `1 - Q^2`, accurate for small `q`.
    pub fn one_minus_q_sq(&self) -> f64 {
        self.one_minus_sq
    }
}
