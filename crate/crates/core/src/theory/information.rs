//! Mutual information between Gabor coefficients and their noisy or
//! perturbed versions, under a Gaussian model diagonalized in momentum space.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

use super::special::dilog;
use super::{MiParams, PerturbationFactor};

/// Evaluation method for the detector-noise mutual information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MiMethod {
    /// `1/2 sum_p ln(1 + c1 exp(-c2 p^2))` over the momentum lattice.
    ExactSum,
    /// Momentum integral in closed form with the dilogarithm.
    Dilog,
    /// Leading behaviour for `y >> 1`.
    LargeSnr,
    /// Leading behaviour for `y << 1` (also needs `c1 >> 1`).
    SmallSnr,
}

impl MiMethod {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "exact_sum" | "exact-sum" => MiMethod::ExactSum,
            "dilog" => MiMethod::Dilog,
            "large_snr" | "large-snr" => MiMethod::LargeSnr,
            "small_snr" | "small-snr" => MiMethod::SmallSnr,
            other => return Err(Error::Parse(format!("unknown MI method `{other}`"))),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MiMethod::ExactSum => "exact_sum",
            MiMethod::Dilog => "dilog",
            MiMethod::LargeSnr => "large_snr",
            MiMethod::SmallSnr => "small_snr",
        }
    }
}

/// Evaluation method for the perturbed mutual information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbedMiMethod {
    /// Difference of two log-determinants, each as an exact momentum sum.
    Determinant,
    /// Closed form with dilogarithms.
    Dilog,
}

/// Mutual information for one Gabor direction, with its regime indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct MiResult {
    pub nats: f64,
    pub y: f64,
    /// Set when the chosen asymptotic method is used outside its regime.
    pub regime_warning: Option<String>,
}

impl MiResult {
    pub fn bits(&self) -> f64 {
        self.nats / LN_2
    }

    /// Value per average speckle area (`L^2 -> pi M^2`).
    pub fn per_speckle(&self, params: &MiParams) -> f64 {
        self.nats * params.per_speckle_factor()
    }
}

/// Nonzero momenta `(i, j) pi / L` with `|p| < pi / ell`, as `p^2` values.
fn for_each_momentum(params: &MiParams, mut f: impl FnMut(f64)) {
    let unit = PI / params.l;
    let p_max2 = (PI / params.ell).powi(2);
    let n = (params.l / params.ell).ceil() as i64 + 1;
    for i in -n..=n {
        for j in -n..=n {
            if i == 0 && j == 0 {
                continue;
            }
            let p2 = unit * unit * (i * i + j * j) as f64;
            if p2 < p_max2 {
                f(p2);
            }
        }
    }
}

fn exact_sum(params: &MiParams, c1: f64) -> f64 {
    let mut s = 0.0;
    for_each_momentum(params, |p2| s += (c1 * (-params.c2 * p2).exp()).ln_1p());
    0.5 * s
}

fn momentum_bounds(params: &MiParams) -> (f64, f64) {
    ((PI / params.l).powi(2), (PI / params.ell).powi(2))
}

/// Closed-form momentum integral.
///
/// The antiderivative `-(1/c2) Li2(-e^{c2 s}/c1) - c2 s^2/2 + s ln c1` (with
/// `s = p^2`) differs from `(1/c2) Li2(-c1 e^{-c2 s})` by a constant
/// (dilogarithm inversion), so the bracket is evaluated in that form, which
/// stays well conditioned for every `c1`.
fn dilog_closed_form(params: &MiParams, c1: f64) -> f64 {
    if c1 == 0.0 {
        return 0.0;
    }
    let (s0, s1) = momentum_bounds(params);
    let c2 = params.c2;
    let f = |s: f64| dilog(-c1 * (-c2 * s).exp()).expect("argument is negative");
    params.l * params.l / (2.0 * PI * c2) * (f(s1) - f(s0))
}

fn large_snr(params: &MiParams, c1: f64) -> f64 {
    let e2 = params.ell * params.ell;
    PI * params.l * params.l / (2.0 * e2) * (c1.ln() - params.c2 * PI * PI / (2.0 * e2))
}

fn small_snr(params: &MiParams, c1: f64) -> f64 {
    let l1 = c1.ln();
    params.l * params.l / (4.0 * PI * params.c2) * (l1 * l1 + PI * PI / 3.0)
}

fn evaluate(params: &MiParams, c1: f64, method: MiMethod) -> f64 {
    if c1 == 0.0 {
        return 0.0;
    }
    match method {
        MiMethod::ExactSum => exact_sum(params, c1),
        MiMethod::Dilog => dilog_closed_form(params, c1),
        MiMethod::LargeSnr => large_snr(params, c1),
        MiMethod::SmallSnr => small_snr(params, c1),
    }
}

/// Mutual information (nats) between a noiseless and a noisy Gabor vector.
pub fn mi_detector(params: &MiParams, method: MiMethod) -> MiResult {
    let y = params.y();
    let regime_warning = match method {
        MiMethod::LargeSnr if y < 10.0 => Some(format!("large-SNR limit used at y = {y:.3e} (needs y >> 1)")),
        MiMethod::SmallSnr if y > 0.1 || params.c1 < 10.0 => Some(format!(
            "small-SNR limit used at y = {y:.3e}, c1 = {:.3e} (needs y << 1 and c1 >> 1)",
            params.c1
        )),
        _ => None,
    };
    MiResult {
        nats: evaluate(params, params.c1, method),
        y,
        regime_warning,
    }
}

/// Mutual information (nats) between a noiseless Gabor vector and a noisy,
/// perturbed one.
pub fn mi_perturbed(params: &MiParams, q: &PerturbationFactor, method: PerturbedMiMethod) -> MiResult {
    let y = params.y();
    let c1 = params.c1;
    let reduced = q.one_minus_q_sq() * c1;
    let nats = if q.value() == 0.0 || c1 == 0.0 {
        0.0
    } else {
        match method {
            PerturbedMiMethod::Determinant => {
                let mut s = 0.0;
                for_each_momentum(params, |p2| {
                    let e = (-params.c2 * p2).exp();
                    s += (c1 * e).ln_1p() - (reduced * e).ln_1p();
                });
                0.5 * s
            }
            // ln(1/(1-Q^2)) term plus the two dilogarithm brackets; each
            // bracket is the closed-form integral at its own SNR.
            PerturbedMiMethod::Dilog => dilog_closed_form(params, c1) - dilog_closed_form(params, reduced),
        }
    };
    MiResult {
        nats,
        y,
        regime_warning: None,
    }
}

/// `-1/2 sum ln(1 - l_xy^2 / (l_x l_y))` (nats) for jointly Gaussian vectors
/// whose covariances share an eigenbasis.
pub fn mi_gaussian_general(lx: &[f64], ly: &[f64], lxy: &[f64]) -> Result<f64> {
    if lx.len() != ly.len() || lx.len() != lxy.len() {
        return Err(Error::ShapeMismatch("eigenvalue lists differ in length".into()));
    }
    let mut s = 0.0;
    for ((&a, &b), &c) in lx.iter().zip(ly).zip(lxy) {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::param("spectrum", "covariance eigenvalues must be positive"));
        }
        let r = 1.0 - c * c / (a * b);
        if !(r > 0.0) {
            return Err(Error::param("spectrum", format!("1 - l_xy^2/(l_x l_y) = {r} is not positive")));
        }
        s += r.ln();
    }
    Ok(-0.5 * s)
}
