//! Special functions: Bessel J0/J1/I0, erfc, the dilogarithm and the
//! terminating hypergeometric series.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest argument accepted by [`bessel_i0`] before the result overflows.
pub const I0_MAX_ARG: f64 = 700.0;

/// Miller backward recurrence for `(J0(x), J1(x))`, `0 < x <= 60`.
fn bessel_j01_miller(x: f64) -> (f64, f64) {
    let start = 2 * ((x + 25.0 + 8.0 * x.sqrt()) as usize / 2 + 2);
    let mut jp = 0.0; // J_{k+1}
    let mut j = 1e-300; // J_k
    let mut norm = 0.0;
    let (mut j0, mut j1) = (0.0, 0.0);
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
        // j now holds J_{k-1}
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
        if k == 2 {
            j1 = j;
        }
        if k == 1 {
            j0 = j;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

/// Hankel asymptotic expansion for `J_nu(x)`, `nu` in {0, 1}, large `x`.
fn bessel_j_asymptotic(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let z8 = 8.0 * x;
    for k in 1..30 {
        let kk = (2 * k - 1) as f64;
        term *= (mu - kk * kk) / (k as f64 * z8);
        if k % 2 == 1 {
            // odd k contributes to Q with sign (+, -, +, ...)
            let s = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            q += s * term;
        } else {
            let s = if (k / 2) % 2 == 1 { -1.0 } else { 1.0 };
            p += s * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn bessel_j01(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (j0, j1) = if ax < 1e-4 {
        let h = 0.25 * ax * ax;
        (1.0 - h + h * h / 4.0, 0.5 * ax * (1.0 - 0.5 * h))
    } else if ax <= 60.0 {
        bessel_j01_miller(ax)
    } else {
        (bessel_j_asymptotic(0, ax), bessel_j_asymptotic(1, ax))
    };
    (j0, if x < 0.0 { -j1 } else { j1 })
}

/// Bessel function of the first kind, order 0.
pub fn bessel_j0(x: f64) -> f64 {
    bessel_j01(x).0
}

/// Bessel function of the first kind, order 1.
pub fn bessel_j1(x: f64) -> f64 {
    bessel_j01(x).1
}

/// `e^{-x} I0(x)` for `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        let h = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= h / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // e^{-x} I0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let kk = (2 * k - 1) as f64;
            let next = term * kk * kk / (k as f64 * 8.0 * x);
            if next > term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Modified Bessel function `I0(x)` for `0 <= x <= I0_MAX_ARG`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::param("x", format!("I0 argument must be >= 0, got {x}")));
    }
    if x > I0_MAX_ARG {
        return Err(Error::param("x", format!("I0({x}) overflows (limit {I0_MAX_ARG})")));
    }
    Ok(bessel_i0_scaled(x) * x.exp())
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 10.0 {
        if x < -26.0 {
            return f64::INFINITY;
        }
        (x * x).exp() * erfc(x)
    } else {
        // 1/(x sqrt(pi)) sum_k (-1)^k (2k-1)!! / (2x^2)^k
        let r = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let next = -term * (2 * k - 1) as f64 * r;
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        sum / (x * PI.sqrt())
    }
}

/// Bernoulli numbers `B_{2k}`, k = 1..15.
const BERNOULLI_EVEN: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

/// `Li2(x)` for `-1 <= x <= 1/2` via the Bernoulli series in `u = -ln(1-x)`.
fn dilog_core(x: f64) -> f64 {
    let u = -(-x).ln_1p();
    let u2 = u * u;
    let mut sum = u - 0.25 * u2;
    let mut power = u; // u^{2k+1}
    let mut fact = 1.0; // (2k+1)!
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let n = 2 * (k + 1) + 1;
        power *= u2;
        fact *= ((n - 1) * n) as f64;
        let term = b * power / fact;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Real dilogarithm `Li2(x) = -int_0^x ln(1-t)/t dt` for `x <= 1`.
pub fn dilog(x: f64) -> Result<f64> {
    if x.is_nan() || x > 1.0 {
        return Err(Error::param("x", format!("dilog is real only for x <= 1, got {x}")));
    }
    const PI2_6: f64 = PI * PI / 6.0;
    Ok(if x == 1.0 {
        PI2_6
    } else if x > 0.5 {
        PI2_6 - x.ln() * (-x).ln_1p() - dilog_core(1.0 - x)
    } else if x >= -1.0 {
        dilog_core(x)
    } else if x.is_infinite() {
        f64::NEG_INFINITY
    } else {
        let l = (-x).ln();
        -PI2_6 - 0.5 * l * l - dilog_core(1.0 / x)
    })
}

/// Terminating Gauss series `2F1(-n, -m; 1; x)`.
pub fn hyp2f1_neg_int(n: u32, m: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 0..n.min(m) {
        let j = j as f64;
        term *= (j - n as f64) * (j - m as f64) / ((j + 1.0) * (j + 1.0)) * x;
        sum += term;
    }
    sum
}
