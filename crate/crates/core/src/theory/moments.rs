//! Phase-ensemble moments of a Gabor coefficient.
//!
//! For a lattice source with independent uniform phases,
//! `G = i c^2 e^{-w^2 k^2/2} sum_{a,b} alpha_a alpha_b^* P_a P_b^* K(a, b)` with
//! `c = p^2/(lambda z)`, `P_a = exp(-i pi (a^2 - 2 x0.a) / (lambda z))` and
//! `K(a, b) = exp(-beta^2 |a-b|^2 / 2) sinh(w^2 k.(a-b) / MR)`,
//! `MR = lambda z / (2 pi)`, `beta = w / MR`. All lengths are physical.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::source::{SourceGeometry, SpeckleSource};

use super::{sigma_g_sq, GaborStatParams};

/// Largest number of index tuples `N_reg^n` the brute-force sum will visit.
pub const ENUMERATION_BUDGET: u64 = 1_000_000_000;

/// Largest moment order accepted by the brute-force sum.
pub const MAX_ORDER: u32 = 6;

/// Exact ensemble moment with its decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentResult {
    /// `<G^n>` (real part of the complex sum).
    pub value: f64,
    /// Imaginary part of the complex sum; zero up to rounding.
    pub imaginary_residual: f64,
    /// Contribution of permutations made only of 2-cycles, `(n-1)!! <G^2>^{n/2}`.
    pub gaussian_part: f64,
    /// `value - gaussian_part`.
    pub connected_part: f64,
    /// Sum over all fixed-point-free permutations without merging coincident
    /// index tuples; equals the cycle-trace form.
    pub permutation_sum: f64,
}

struct Kernel {
    n: usize,
    k: Vec<f64>,
    prefactor: f64,
}

fn kernel(geometry: &SourceGeometry, w: f64, k: [f64; 2]) -> Result<Kernel> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::param("w", format!("must be positive, got {w}")));
    }
    if !(k[0].is_finite() && k[1].is_finite()) {
        return Err(Error::param("k", "must be finite"));
    }
    let lz = geometry.wavelength() * geometry.distance();
    let mr = lz / (2.0 * std::f64::consts::PI);
    let beta2 = (w / mr).powi(2);
    let pos: Vec<[f64; 2]> = geometry.lattice().iter().map(|&c| geometry.position(c)).collect();
    let n = pos.len();
    let mut kk = vec![0.0; n * n];
    for (i, a) in pos.iter().enumerate() {
        for (j, b) in pos.iter().enumerate() {
            let d = [a[0] - b[0], a[1] - b[1]];
            let arg = w * w * (k[0] * d[0] + k[1] * d[1]) / mr;
            kk[i * n + j] = (-0.5 * beta2 * (d[0] * d[0] + d[1] * d[1])).exp() * arg.sinh();
        }
    }
    let c = geometry.region_amplitude();
    let k2 = k[0] * k[0] + k[1] * k[1];
    Ok(Kernel {
        n,
        k: kk,
        prefactor: c * c * (-0.5 * w * w * k2).exp(),
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn is_involution(p: &[usize]) -> bool {
    p.iter().enumerate().all(|(i, &j)| p[j] == i)
}

/// `i^n` as a complex number.
fn i_pow(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Exact `<G^n>` over the phase ensemble by explicit summation over index
/// tuples and fixed-point-free permutations.
///
/// The moment does not depend on `x0`: every phase factor cancels around the
/// cycles of a permutation. `x0` is accepted so callers can state where the
/// coefficient sits.
pub fn brute_force_moment(n: u32, geometry: &SourceGeometry, w: f64, k: [f64; 2], x0: [f64; 2]) -> Result<MomentResult> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::param("n", format!("must lie in 1..={MAX_ORDER}, got {n}")));
    }
    if !(x0[0].is_finite() && x0[1].is_finite()) {
        return Err(Error::param("x0", "must be finite"));
    }
    let ker = kernel(geometry, w, k)?;
    let nr = ker.n as u64;
    let terms = (nr as f64).powi(n as i32);
    if terms > ENUMERATION_BUDGET as f64 {
        return Err(Error::EnumerationBudget {
            terms,
            budget: ENUMERATION_BUDGET as f64,
        });
    }
    let order = n as usize;
    let derangements: Vec<Vec<usize>> = permutations(order)
        .into_iter()
        .filter(|p| p.iter().enumerate().all(|(i, &j)| i != j))
        .collect();
    let pairings: Vec<bool> = derangements.iter().map(|p| is_involution(p)).collect();

    let nn = ker.n;
    // (exact, permutation sum, pairing sum) per leading index, summed in order
    let partial: Vec<[f64; 3]> = (0..nn)
        .into_par_iter()
        .map(|first| {
            let mut acc = [0.0; 3];
            let mut tuple = vec![0usize; order];
            tuple[0] = first;
            let rest = nr.pow(n - 1);
            let mut seen: Vec<Vec<usize>> = Vec::new();
            for idx in 0..rest {
                let mut r = idx;
                for slot in tuple.iter_mut().skip(1) {
                    *slot = (r % nr) as usize;
                    r /= nr;
                }
                let mut distinct = true;
                'outer: for i in 0..order {
                    for j in i + 1..order {
                        if tuple[i] == tuple[j] {
                            distinct = false;
                            break 'outer;
                        }
                    }
                }
                seen.clear();
                for (perm, &pairing) in derangements.iter().zip(&pairings) {
                    let mut prod = 1.0;
                    for (i, &j) in perm.iter().enumerate() {
                        prod *= ker.k[tuple[i] * nn + tuple[j]];
                    }
                    acc[1] += prod;
                    if pairing {
                        acc[2] += prod;
                    }
                    if distinct {
                        acc[0] += prod;
                    } else {
                        let image: Vec<usize> = perm.iter().map(|&j| tuple[j]).collect();
                        if !seen.contains(&image) {
                            acc[0] += prod;
                            seen.push(image);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut sums = [0.0; 3];
    for p in &partial {
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    let scale = i_pow(n) * ker.prefactor.powi(n as i32);
    let exact = scale * sums[0];
    let perm = (scale * sums[1]).re;
    let gauss = (scale * sums[2]).re;
    Ok(MomentResult {
        value: exact.re,
        imaginary_residual: exact.im,
        gaussian_part: gauss,
        connected_part: exact.re - gauss,
        permutation_sum: perm,
    })
}

/// `<G^2>` and the permutation-sum `<G^4>` from traces of the kernel matrix:
/// `-c^2 tr K^2` and `c^4 (3 (tr K^2)^2 + 6 tr K^4)` with
/// `c = (p^2/(lambda z))^2 e^{-w^2 k^2/2}`.
pub fn cycle_trace_moment(n: u32, geometry: &SourceGeometry, w: f64, k: [f64; 2]) -> Result<f64> {
    let ker = kernel(geometry, w, k)?;
    let nn = ker.n;
    // K is antisymmetric, so tr K^2 = -sum K_ab^2
    let tr2 = -ker.k.iter().map(|v| v * v).sum::<f64>();
    let c = ker.prefactor;
    match n {
        1 | 3 => Ok(0.0),
        2 => Ok(-c * c * tr2),
        4 => {
            let mut k2 = vec![0.0; nn * nn];
            for i in 0..nn {
                for l in 0..nn {
                    let a = ker.k[i * nn + l];
                    if a != 0.0 {
                        for j in 0..nn {
                            k2[i * nn + j] += a * ker.k[l * nn + j];
                        }
                    }
                }
            }
            let tr4: f64 = (0..nn)
                .flat_map(|i| (0..nn).map(move |j| (i, j)))
                .map(|(i, j)| k2[i * nn + j] * k2[j * nn + i])
                .sum();
            Ok(c.powi(4) * (3.0 * tr2 * tr2 + 6.0 * tr4))
        }
        _ => Err(Error::param("n", format!("cycle-trace form covers n <= 4, got {n}"))),
    }
}

/// Exact ensemble covariance `<G(x, k) G(x + dx, k')>` for the region
/// lattice: `c c' sum_{a,b} K_ab K'_ab cos(2 pi dx.(a-b) / (lambda z))`.
pub fn lattice_covariance(geometry: &SourceGeometry, w: f64, k: [f64; 2], k_other: [f64; 2], dx: [f64; 2]) -> Result<f64> {
    if !(dx[0].is_finite() && dx[1].is_finite()) {
        return Err(Error::param("dx", "must be finite"));
    }
    let ka = kernel(geometry, w, k)?;
    let kb = kernel(geometry, w, k_other)?;
    let lz = geometry.wavelength() * geometry.distance();
    let pos: Vec<[f64; 2]> = geometry.lattice().iter().map(|&c| geometry.position(c)).collect();
    let n = ka.n;
    let s: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = 0.0;
            for j in 0..n {
                let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                let phase = 2.0 * std::f64::consts::PI * (dx[0] * d[0] + dx[1] * d[1]) / lz;
                row += ka.k[i * n + j] * kb.k[i * n + j] * phase.cos();
            }
            row
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(ka.prefactor * kb.prefactor * s)
}

/// Gabor coefficient of one phase realization, evaluated from the
/// region-pair sum instead of a rendered image.
pub fn continuum_gabor_coefficient(source: &SpeckleSource, w: f64, k: [f64; 2], x0: [f64; 2]) -> Result<f64> {
    let geometry = source.geometry();
    let ker = kernel(geometry, w, k)?;
    let lz = geometry.wavelength() * geometry.distance();
    let beta: Vec<Complex64> = geometry
        .lattice()
        .iter()
        .zip(source.phases())
        .map(|(&cell, &phi)| {
            let a = geometry.position(cell);
            let a2 = a[0] * a[0] + a[1] * a[1];
            let xa = x0[0] * a[0] + x0[1] * a[1];
            Complex64::from_polar(1.0, phi - std::f64::consts::PI * (a2 - 2.0 * xa) / lz)
        })
        .collect();
    let nn = ker.n;
    let mut s = Complex64::new(0.0, 0.0);
    for a in 0..nn {
        let mut row = Complex64::new(0.0, 0.0);
        for b in 0..nn {
            row += beta[b].conj() * ker.k[a * nn + b];
        }
        s += beta[a] * row;
    }
    // s is purely imaginary because K is antisymmetric
    Ok(-ker.prefactor * s.im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FourthMomentRegime {
    /// Gaussian window much wider than a speckle (`w >~ 3M`).
    LargeW,
    /// Gaussian window much narrower than a speckle (`w << M`).
    SmallW,
}

/// Approximate `<G^4>` in the two limiting regimes.
///
/// `LargeW`: `3 sigma_G^4 + (3/2) I_av^4 (M/w)^6 (1 - 2 e^{-w^2k^2/2} + e^{-2 w^2k^2})`.
/// `SmallW`: `3 sigma^4 (1 + 1/64)` with `sigma^2` from [`small_w_sigma_sq`].
pub fn fourth_moment_g(p: &GaborStatParams, regime: FourthMomentRegime) -> f64 {
    match regime {
        FourthMomentRegime::LargeW => {
            let s2 = sigma_g_sq(p);
            let wk2 = p.w * p.w * p.k_mag * p.k_mag;
            let tail = 1.0 - 2.0 * (-0.5 * wk2).exp() + (-2.0 * wk2).exp();
            3.0 * s2 * s2 + 1.5 * p.i_av.powi(4) * (p.m / p.w).powi(6) * tail
        }
        FourthMomentRegime::SmallW => {
            let s2 = small_w_sigma_sq(p);
            3.0 * s2 * s2 * (1.0 + 1.0 / 64.0)
        }
    }
}

/// Small-window variance `4 w^4 k^2 I_av^2 M^-2 e^{-w^2 k^2}` used by the
/// `SmallW` fourth-moment formula.
pub fn small_w_sigma_sq(p: &GaborStatParams) -> f64 {
    let wk2 = p.w * p.w * p.k_mag * p.k_mag;
    4.0 * p.w.powi(4) * p.k_mag * p.k_mag * p.i_av * p.i_av / (p.m * p.m) * (-wk2).exp()
}

/// Variance and fourth moment of the linearized coefficient
/// `w^2 (grad I . k) e^{-w^2k^2/2}` for a uniform disc source, evaluated
/// without further approximation: `sigma^2 = w^4 k^2 I_av^2 e^{-w^2k^2} / (2 M^2)`
/// and `<G^4> = 6 sigma^4` (the coefficient is `2 Im(A' A^*)` with independent
/// circular Gaussian `A`, `A'`).
pub fn small_w_linearized_moments(p: &GaborStatParams) -> (f64, f64) {
    let wk2 = p.w * p.w * p.k_mag * p.k_mag;
    let s2 = p.w.powi(4) * p.k_mag * p.k_mag * p.i_av * p.i_av * (-wk2).exp() / (2.0 * p.m * p.m);
    (s2, 6.0 * s2 * s2)
}
