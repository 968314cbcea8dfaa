//! Probability that a robust bit flips under a source perturbation.
//!
//! `G` and its perturbed counterpart are jointly Gaussian with equal variance
//! and correlation `Q`; a bit is robust when `|G| > T`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

use super::quad::integrate_breaks;
use super::special::erfcx;
use super::PerturbationFactor;

/// Threshold beyond which an expansion parameter is considered too large.
pub const EXPANSION_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitErrorMethod {
    /// Adaptive quadrature of the remaining one-dimensional integral.
    Quadrature,
    /// Asymptotic expansion in `epsilon`, valid for `Q -> 1` or large `T`.
    Weak,
    /// Taylor expansion in `eta = 1 / epsilon`, valid for `Q -> 0` or small `T`.
    Strong,
    /// `arccos(Q) / pi`, only for `T = 0`.
    ExactT0,
}

impl BitErrorMethod {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "quadrature" => BitErrorMethod::Quadrature,
            "weak" => BitErrorMethod::Weak,
            "strong" => BitErrorMethod::Strong,
            "exact_t0" | "exact-t0" => BitErrorMethod::ExactT0,
            other => return Err(Error::Parse(format!("unknown bit error method `{other}`"))),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BitErrorMethod::Quadrature => "quadrature",
            BitErrorMethod::Weak => "weak",
            BitErrorMethod::Strong => "strong",
            BitErrorMethod::ExactT0 => "exact_t0",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitErrorResult {
    pub probability: f64,
    /// `epsilon = (sqrt 2 / t) sqrt(1 - Q^2) / Q`; infinite at `t = 0` or `Q = 0`.
    pub epsilon: f64,
    pub regime_warning: Option<String>,
}

/// `epsilon` for threshold `t = T / sigma_G`.
pub fn expansion_parameter(t: f64, q: &PerturbationFactor) -> f64 {
    let big_q = q.value();
    if big_q == 0.0 || t == 0.0 {
        return f64::INFINITY;
    }
    SQRT_2 / t * q.one_minus_q_sq().sqrt() / big_q
}

/// Bit-flip probability for threshold ratio `t = T / sigma_G`.
pub fn bit_error_probability(t_over_sigma: f64, q: &PerturbationFactor, method: BitErrorMethod) -> Result<BitErrorResult> {
    let t = t_over_sigma;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("T/sigma_G", format!("must be finite and >= 0, got {t}")));
    }
    let epsilon = expansion_parameter(t, q);
    let big_q = q.value();
    let mut regime_warning = None;
    let probability = match method {
        BitErrorMethod::ExactT0 => {
            if t > 0.0 {
                return Err(Error::param("T/sigma_G", "the arccos law holds only at T = 0"));
            }
            big_q.acos() / PI
        }
        BitErrorMethod::Quadrature => quadrature(t, q),
        BitErrorMethod::Weak => {
            if big_q == 1.0 {
                0.0
            } else {
                if !(epsilon < EXPANSION_LIMIT) {
                    regime_warning = Some(format!("weak expansion used at epsilon = {epsilon:.3} (needs epsilon << 1)"));
                }
                weak(t, epsilon)
            }
        }
        BitErrorMethod::Strong => {
            let eta = 1.0 / epsilon;
            if !(eta < EXPANSION_LIMIT) {
                regime_warning = Some(format!("strong expansion used at eta = {eta:.3} (needs eta << 1)"));
            }
            strong(t, q)
        }
    };
    Ok(BitErrorResult {
        probability,
        epsilon,
        regime_warning,
    })
}

fn quadrature(t: f64, q: &PerturbationFactor) -> f64 {
    let big_q = q.value();
    if big_q == 0.0 {
        return 0.5;
    }
    let omq = q.one_minus_q_sq();
    if omq == 0.0 {
        return 0.0;
    }
    let a = big_q / (2.0 * omq).sqrt();
    let b = 0.5 + a * a;
    // Integrand after substituting G = T + u and factoring out the Gaussian
    // tail at T; every factor stays O(1) so no underflow for large t or a.
    let mut f = |u: f64| {
        (0.5 / (2.0 * PI).sqrt()) * erfcx(a * (t + u)) * (-b * u * (u + 2.0 * t)).exp()
    };
    let scale = if t > 0.0 {
        (1.0 / ((1.0 + 2.0 * a * a) * t)).min(1.0 / b.sqrt())
    } else {
        1.0 / b.sqrt()
    };
    let u_max = (800.0 / b).sqrt() + scale;
    let mut breaks = vec![0.0];
    let mut x = scale / 16.0;
    while x < u_max {
        breaks.push(x);
        x *= 2.0;
    }
    breaks.push(u_max);
    let s = integrate_breaks(&mut f, &breaks, 1e-300, 1e-13).value;
    (-a * a * t * t).exp() * s / (0.5 * erfcx(t / SQRT_2))
}

fn weak(t: f64, epsilon: f64) -> f64 {
    if t == 0.0 || !epsilon.is_finite() {
        return f64::NAN;
    }
    let e2 = epsilon * epsilon;
    // exp(-t^2/2) / erfc(t/sqrt2) = 1 / erfcx(t/sqrt2)
    (-1.0 / e2).exp() / erfcx(t / SQRT_2) * t / (2.0 * PI * SQRT_2)
        * epsilon
        * e2
        * (1.0 - e2 * (1.5 + 0.5 * t * t))
}

fn strong(t: f64, q: &PerturbationFactor) -> f64 {
    // (sqrt2/(pi t)) (eta - eta^3 (1 + 2/t^2)/3) with eta = t r / sqrt2,
    // written so that t = 0 is regular
    let r = q.value() / q.one_minus_q_sq().sqrt();
    let bracket = r / PI * (1.0 - r * r * (t * t + 2.0) / 6.0);
    0.5 * (1.0 - bracket / (0.5 * erfcx(t / SQRT_2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pf(q: f64) -> PerturbationFactor {
        PerturbationFactor::new(q).unwrap()
    }

    /// Composite Simpson on the original (unscaled) integral.
    fn simpson_oracle(t: f64, big_q: f64) -> f64 {
        let c = big_q / ((1.0 - big_q * big_q).sqrt() * SQRT_2);
        let f = |g: f64| {
            (-0.5 * g * g).exp() / (2.0 * PI).sqrt() * 0.5 * statrs::function::erf::erfc(c * g)
        };
        let (a, b) = (t, t + 40.0);
        let n = 400_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0 / (0.5 * statrs::function::erf::erfc(t / SQRT_2))
    }

    #[test]
    fn quadrature_matches_simpson() {
        for &t in &[0.0, 0.5, 1.0, 2.0, 4.0] {
            for &q in &[0.3, 1.0, 2.0, 3.0] {
                let f = pf(q);
                let p = bit_error_probability(t, &f, BitErrorMethod::Quadrature).unwrap().probability;
                let o = simpson_oracle(t, f.value());
                assert!((p - o).abs() <= 1e-9 * o.max(1e-6), "t={t} q={q}: {p} vs {o}");
            }
        }
    }

    #[test]
    fn arccos_law_at_zero_threshold() {
        for i in 0..=40 {
            let q = PI * i as f64 / 40.0;
            let f = pf(q);
            let quad = bit_error_probability(0.0, &f, BitErrorMethod::Quadrature).unwrap().probability;
            let exact = bit_error_probability(0.0, &f, BitErrorMethod::ExactT0).unwrap().probability;
            assert!((quad - exact).abs() < 1e-8, "q={q}: {quad} vs {exact}");
        }
        assert!(bit_error_probability(0.1, &pf(1.0), BitErrorMethod::ExactT0).is_err());
    }

    #[test]
    fn limits() {
        assert_eq!(bit_error_probability(2.0, &pf(0.0), BitErrorMethod::Quadrature).unwrap().probability, 0.0);
        assert_eq!(bit_error_probability(2.0, &pf(PI), BitErrorMethod::Quadrature).unwrap().probability, 0.5);
        assert!(bit_error_probability(-1.0, &pf(1.0), BitErrorMethod::Quadrature).is_err());
    }

    #[test]
    fn weak_expansion_tracks_quadrature() {
        // error shrinks at least like the next order epsilon^7 / epsilon^3
        for &(t, q) in &[(3.0, 0.3), (4.0, 0.4), (6.0, 0.5), (5.0, 0.25)] {
            let f = pf(q);
            let w = bit_error_probability(t, &f, BitErrorMethod::Weak).unwrap();
            assert!(w.regime_warning.is_none(), "eps = {}", w.epsilon);
            let exact = quadrature(t, &f);
            let e = w.epsilon;
            let rel = (w.probability / exact - 1.0).abs();
            let next = e.powi(4) * (1.0 + t * t).powi(2);
            assert!(rel < next, "t={t} q={q}: rel {rel} vs next-order {next}");
        }
    }

    #[test]
    fn strong_expansion_tracks_quadrature() {
        for &(t, q) in &[(0.0, 2.8), (0.2, 2.5), (0.5, 2.9), (1.0, 3.0), (0.0, 2.2)] {
            let f = pf(q);
            let s = bit_error_probability(t, &f, BitErrorMethod::Strong).unwrap();
            let eta = 1.0 / s.epsilon;
            assert!(eta < EXPANSION_LIMIT);
            let exact = quadrature(t, &f);
            let diff = (s.probability - exact).abs();
            // size of the first neglected term, in units of the bracket scale
            let r = f.value() / f.one_minus_q_sq().sqrt();
            let next = r.powi(5) * (1.0 + t * t).powi(2);
            assert!(diff < next, "t={t} q={q}: diff {diff} vs {next}");
        }
    }

    #[test]
    fn monotone_in_q_and_t() {
        let mut prev = 0.0;
        for i in 1..=30 {
            let p = quadrature(1.0, &pf(PI * i as f64 / 30.0));
            assert!(p >= prev);
            prev = p;
        }
        let f = pf(1.0);
        let mut prev = 1.0;
        for i in 0..=20 {
            let p = quadrature(0.25 * i as f64, &f);
            assert!(p < prev);
            prev = p;
        }
    }
}
