//! Second-order statistics of Gabor coefficients: variance, correlation,
//! signal and noise covariance blocks and their Fourier transforms.

use std::f64::consts::PI;

use super::{GaborStatParams, NoiseParams};

/// Which pair of directions a covariance block couples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    /// Same direction `j` at both positions.
    Diagonal(usize),
    /// Direction 1 at `x`, direction 2 at `x'`.
    Cross,
}

/// Signal or noise covariance.
#[derive(Clone, Copy, Debug)]
pub enum CovKind<'a> {
    Signal(&'a GaborStatParams),
    Noise(&'a NoiseParams),
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `sigma_G^2 = I_av^2 (1 - 2 gamma) exp(-(1 - gamma) w^2 k^2) sinh(gamma w^2 k^2)`.
pub fn sigma_g_sq(p: &GaborStatParams) -> f64 {
    let g = p.gamma();
    let wk2 = p.w * p.w * p.k_mag * p.k_mag;
    // e^{-(1-g)a} sinh(g a) = (e^{-(1-2g)a} - e^{-a}) / 2
    p.i_av * p.i_av * (1.0 - 2.0 * g) * 0.5 * ((-(1.0 - 2.0 * g) * wk2).exp() - (-wk2).exp())
}

/// Normalized correlation of `G(w, k, x)` and `G(w, k', x')` (equal widths).
pub fn correlation_cg(k: [f64; 2], k2: [f64; 2], dx: [f64; 2], p: &GaborStatParams) -> f64 {
    let g = p.gamma();
    let w2 = p.w * p.w;
    let kk = dot(k, k2);
    let plus = [k[0] + k2[0], k[1] + k2[1]];
    let minus = [k2[0] - k[0], k2[1] - k[1]];
    let num = (g * w2 * kk).exp() * (g * dot(dx, plus)).cos()
        - (-g * w2 * kk).exp() * (g * dot(dx, minus)).cos();
    let den = 2.0 * (g * w2 * dot(k, k)).sinh().sqrt() * (g * w2 * dot(k2, k2)).sinh().sqrt();
    (-0.5 * g * dot(dx, dx) / w2).exp() * num / den
}

/// Signal covariance blocks `<G(k_a, x) G(k_b, x + dx)>` for perpendicular
/// wave vectors of equal length.
pub fn cov_blocks_g(dx: [f64; 2], block: Block, k1: [f64; 2], k2: [f64; 2], p: &GaborStatParams) -> f64 {
    let g = p.gamma();
    let w2 = p.w * p.w;
    let kk = p.k_mag * p.k_mag;
    let env = (-0.5 * g * dot(dx, dx) / w2).exp();
    let i2 = p.i_av * p.i_av;
    match block {
        Block::Diagonal(j) => {
            let kj = if j == 0 { k1 } else { k2 };
            i2 * (0.5 - g)
                * env
                * (((2.0 * g - 1.0) * w2 * kk).exp() * (2.0 * g * dot(kj, dx)).cos() - (-w2 * kk).exp())
        }
        Block::Cross => {
            -i2 * (1.0 - 2.0 * g) * ((g - 1.0) * w2 * kk).exp() * env * (g * dot(k1, dx)).sin() * (g * dot(k2, dx)).sin()
        }
    }
}

/// Noise covariance blocks of Gabor coefficients under white pixel noise.
pub fn cov_blocks_n(dx: [f64; 2], block: Block, k1: [f64; 2], k2: [f64; 2], noise: &NoiseParams, w: f64) -> f64 {
    let w2 = w * w;
    let kk = dot(k1, k1);
    let pre = noise.n_i * noise.n_i * noise.t / (8.0 * PI * w2);
    let env = (-dot(dx, dx) / (4.0 * w2)).exp();
    match block {
        Block::Diagonal(j) => {
            let kj = if j == 0 { k1 } else { k2 };
            pre * env * (dot(kj, dx).cos() - (-w2 * kk).exp())
        }
        Block::Cross => -pre * env * (-0.5 * w2 * kk).exp() * (0.5 * dot(k1, dx)).sin() * (0.5 * dot(k2, dx)).sin(),
    }
}

/// Fourier transform (per lattice cell `ell^2`) of a diagonal covariance block at momentum `p`.
pub fn fourier_cov(pvec: [f64; 2], kj: [f64; 2], w: f64, ell: f64, kind: CovKind<'_>) -> f64 {
    let w2 = w * w;
    let kk = dot(kj, kj);
    let p2 = dot(pvec, pvec);
    let sh = (w2 * dot(kj, pvec)).sinh();
    match kind {
        CovKind::Signal(s) => {
            let g = s.gamma();
            4.0 * PI * s.i_av * s.i_av * (w2 / (ell * ell)) * (0.5 / g - 1.0)
                * (-w2 * kk).exp()
                * (-w2 * p2 / (2.0 * g)).exp()
                * sh
                * sh
        }
        CovKind::Noise(n) => n.n_i * n.n_i * (n.t / (ell * ell)) * (-w2 * kk).exp() * (-w2 * p2).exp() * sh * sh,
    }
}
