//! Single- and two-point intensity statistics of fully developed speckle.

use crate::error::{Error, Result};

use super::special::{bessel_i0_scaled, bessel_j1, hyp2f1_neg_int};

/// Exponential density `exp(-I/I_av) / I_av` for `I >= 0`.
pub fn intensity_pdf(i: f64, i_av: f64) -> Result<f64> {
    if !(i_av > 0.0) {
        return Err(Error::param("I_av", format!("must be positive, got {i_av}")));
    }
    Ok(if i < 0.0 { 0.0 } else { (-i / i_av).exp() / i_av })
}

/// Normalized intensity correlation `4 [J1(r/M) / (r/M)]^2`, `r = |dx|`.
pub fn intensity_correlation(dx: [f64; 2], m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::param("M", format!("must be positive, got {m}")));
    }
    let u = dx[0].hypot(dx[1]) / m;
    Ok(if u < 1e-8 {
        1.0 - 0.25 * u * u
    } else {
        let r = 2.0 * bessel_j1(u) / u;
        r * r
    })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `<I^n I'^m> = I_av^{n+m} n! m! 2F1(-n, -m; 1; C)`.
pub fn joint_intensity_moment(n: u32, m: u32, c: f64, i_av: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::param("C", format!("must lie in [0, 1], got {c}")));
    }
    Ok(i_av.powi((n + m) as i32) * factorial(n) * factorial(m) * hyp2f1_neg_int(n, m, c))
}

/// Joint density of the intensities at two points with correlation `C < 1`.
pub fn joint_intensity_pdf(i1: f64, i2: f64, c: f64, i_av: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::param("C", format!("joint density needs 0 <= C < 1, got {c}")));
    }
    if !(i_av > 0.0) {
        return Err(Error::param("I_av", format!("must be positive, got {i_av}")));
    }
    if i1 < 0.0 || i2 < 0.0 {
        return Ok(0.0);
    }
    let d = i_av * (1.0 - c);
    let z = 2.0 * (i1 * i2 * c).sqrt() / d;
    // I0(z) = e^z * scaled; fold e^z into the exponential to avoid overflow
    Ok((z - (i1 + i2) / d).exp() * bessel_i0_scaled(z) / (i_av * d))
}

/// Ensemble mean of the perturbed intensity given the unperturbed value.
pub fn perturbed_intensity_mean(i: f64, i_av: f64, q_factor: f64) -> f64 {
    q_factor * i + (1.0 - q_factor) * i_av
}
