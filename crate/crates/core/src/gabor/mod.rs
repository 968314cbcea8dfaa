//! Imaginary-part Gabor transform, robust bit extraction and empirical
//! correlation statistics.
//!
//! Positions are in pixels with pixel `(col, row)` centered at `(col, row)`;
//! wave vectors are in radians per pixel. Each pixel has area 1.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::detector::IntensityMap;
use crate::error::{Error, Result};

mod io;

/// Envelope truncation radius in units of `w`.
pub const SUPPORT_WIDTHS: f64 = 4.0;

/// Parameters of a single Gabor filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborParams {
    w: f64,
    k: [f64; 2],
    x0: [f64; 2],
}

impl GaborParams {
    pub fn new(w: f64, k: [f64; 2], x0: [f64; 2]) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::param("w", format!("must be positive, got {w}")));
        }
        let kk = k[0].hypot(k[1]);
        if !(kk > 0.0 && kk.is_finite()) {
            return Err(Error::param("k", "wave vector must be nonzero"));
        }
        if !(x0[0].is_finite() && x0[1].is_finite()) {
            return Err(Error::param("x0", "must be finite"));
        }
        Ok(Self { w, k, x0 })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn k(&self) -> [f64; 2] {
        self.k
    }

    pub fn x0(&self) -> [f64; 2] {
        self.x0
    }
}

/// One kernel tap: pixel offset relative to the lower corner of the support box and its weight.
struct Tap {
    dx: usize,
    dy: usize,
    weight: f64,
}

/// Sampled filter `(2 pi w^2)^-1 sin(k.u) exp(-u^2 / 2w^2)` on pixels with `|u| <= 4w`.
struct Kernel {
    lo: [isize; 2],
    taps: Vec<Tap>,
}

impl Kernel {
    fn new(w: f64, k: [f64; 2], x0: [f64; 2]) -> Self {
        let r = SUPPORT_WIDTHS * w;
        let lo = [(x0[0] - r).ceil() as isize, (x0[1] - r).ceil() as isize];
        let hi = [(x0[0] + r).floor() as isize, (x0[1] + r).floor() as isize];
        let norm = 1.0 / (2.0 * PI * w * w);
        let mut taps = Vec::new();
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let u = [x as f64 - x0[0], y as f64 - x0[1]];
                let u2 = u[0] * u[0] + u[1] * u[1];
                if u2 > r * r {
                    continue;
                }
                let weight = norm * (k[0] * u[0] + k[1] * u[1]).sin() * (-u2 / (2.0 * w * w)).exp();
                taps.push(Tap {
                    dx: (x - lo[0]) as usize,
                    dy: (y - lo[1]) as usize,
                    weight,
                });
            }
        }
        Self { lo, taps }
    }

    /// Sum over taps with the support box anchored at pixel `(ox, oy)`.
    #[inline]
    fn apply(&self, values: &[f64], width: usize, ox: usize, oy: usize) -> f64 {
        self.taps
            .iter()
            .map(|t| t.weight * values[(oy + t.dy) * width + ox + t.dx])
            .sum()
    }
}

fn check_support(x0: [f64; 2], w: f64, width: usize, height: usize) -> Result<()> {
    let r = SUPPORT_WIDTHS * w;
    let inside = x0[0] - r >= 0.0
        && x0[1] - r >= 0.0
        && x0[0] + r <= (width - 1) as f64
        && x0[1] + r <= (height - 1) as f64;
    if inside {
        Ok(())
    } else {
        Err(Error::SupportOutsideImage {
            x: x0[0],
            y: x0[1],
            radius: r,
            width,
            height,
        })
    }
}

/// `G(w, k, x0) = sum_x Gamma_IM(x) I(x)` with unit pixel area.
pub fn gabor_coefficient(map: &IntensityMap, params: &GaborParams) -> Result<f64> {
    let (width, height) = (map.width(), map.height());
    check_support(params.x0, params.w, width, height)?;
    let kernel = Kernel::new(params.w, params.k, params.x0);
    Ok(kernel.apply(
        map.values(),
        width,
        kernel.lo[0] as usize,
        kernel.lo[1] as usize,
    ))
}

/// Lattice of filter positions with two perpendicular wave vectors.
///
/// Positions are `origin + pitch * (i, j)` for `0 <= i, j < n_side`, where
/// `n_side = (extent - 1) / pitch + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborGrid {
    w: f64,
    k_mag: f64,
    psi1: f64,
    pitch: usize,
    extent: usize,
    origin: [usize; 2],
}

impl GaborGrid {
    pub fn new(
        w: f64,
        k_mag: f64,
        psi1: f64,
        pitch: usize,
        extent: usize,
        origin: [usize; 2],
    ) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::param("w", format!("must be positive, got {w}")));
        }
        if !(k_mag > 0.0 && k_mag.is_finite()) {
            return Err(Error::param("k_mag", format!("must be positive, got {k_mag}")));
        }
        if !psi1.is_finite() {
            return Err(Error::param("psi1", "must be finite"));
        }
        if pitch < 1 {
            return Err(Error::param("pitch", "must be >= 1"));
        }
        if extent < pitch {
            return Err(Error::param("extent", format!("{extent} is smaller than pitch {pitch}")));
        }
        let margin = Self::margin_for(w);
        if origin[0] < margin || origin[1] < margin {
            return Err(Error::param(
                "origin",
                format!("lattice origin {origin:?} is closer than {margin} px to the border"),
            ));
        }
        Ok(Self {
            w,
            k_mag,
            psi1,
            pitch,
            extent,
            origin,
        })
    }

    /// Largest square lattice that fits a `width x height` image with the
    /// required border margin, centered in the image.
    pub fn fitted(w: f64, k_mag: f64, psi1: f64, pitch: usize, width: usize, height: usize) -> Result<Self> {
        let margin = Self::margin_for(w);
        let avail = width.min(height).saturating_sub(2 * margin);
        if avail == 0 {
            return Err(Error::param(
                "w",
                format!("support margin {margin} px leaves no room in a {width}x{height} image"),
            ));
        }
        let n_side = (avail - 1) / pitch.max(1) + 1;
        let span = (n_side - 1) * pitch.max(1);
        let ox = margin + (width - 2 * margin - 1 - span) / 2;
        let oy = margin + (height - 2 * margin - 1 - span) / 2;
        Self::new(w, k_mag, psi1, pitch, span + 1, [ox, oy])
    }

    /// Border margin in whole pixels, `ceil(4w)`.
    pub fn margin_for(w: f64) -> usize {
        (SUPPORT_WIDTHS * w).ceil() as usize
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn k_mag(&self) -> f64 {
        self.k_mag
    }

    pub fn psi(&self, direction: usize) -> f64 {
        self.psi1 + direction as f64 * 0.5 * PI
    }

    pub fn pitch(&self) -> usize {
        self.pitch
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn origin(&self) -> [usize; 2] {
        self.origin
    }

    pub fn n_side(&self) -> usize {
        (self.extent - 1) / self.pitch + 1
    }

    /// Number of lattice points per direction.
    pub fn n_points(&self) -> usize {
        self.n_side() * self.n_side()
    }

    /// Wave vector of direction 0 or 1.
    pub fn k_vector(&self, direction: usize) -> [f64; 2] {
        let psi = self.psi(direction);
        [self.k_mag * psi.cos(), self.k_mag * psi.sin()]
    }

    /// Pixel position of lattice point `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> [usize; 2] {
        [self.origin[0] + i * self.pitch, self.origin[1] + j * self.pitch]
    }

    /// Filter parameters at lattice point `(i, j)` for a direction.
    pub fn params(&self, i: usize, j: usize, direction: usize) -> GaborParams {
        let p = self.point(i, j);
        GaborParams {
            w: self.w,
            k: self.k_vector(direction),
            x0: [p[0] as f64, p[1] as f64],
        }
    }

    /// Checks that every lattice point keeps its support inside the image.
    pub fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        let margin = Self::margin_for(self.w);
        let last = self.point(self.n_side() - 1, self.n_side() - 1);
        if last[0] + margin > width - 1 || last[1] + margin > height - 1 {
            return Err(Error::ShapeMismatch(format!(
                "gabor lattice ending at {last:?} with margin {margin} does not fit a {width}x{height} image"
            )));
        }
        Ok(())
    }
}

/// Gabor coefficients on a lattice, one row-major array per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaborMap {
    grid: GaborGrid,
    coefficients: [Vec<f64>; 2],
}

impl GaborMap {
    pub fn from_coefficients(grid: GaborGrid, coefficients: [Vec<f64>; 2]) -> Result<Self> {
        let n = grid.n_points();
        for c in &coefficients {
            if c.len() != n {
                return Err(Error::ShapeMismatch(format!("{} coefficients for {n} lattice points", c.len())));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("coefficients", "non-finite value"));
            }
        }
        Ok(Self { grid, coefficients })
    }

    pub fn grid(&self) -> &GaborGrid {
        &self.grid
    }

    pub fn direction(&self, d: usize) -> &[f64] {
        &self.coefficients[d]
    }

    /// All coefficients, direction-major.
    /// Coefficient-wise sum of two maps on the same lattice; by linearity the
    /// map of a sum of fields.
    pub fn sum(&self, other: &GaborMap) -> Result<GaborMap> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("gabor maps use different lattices".into()));
        }
        let add = |d: usize| -> Vec<f64> {
            self.coefficients[d].iter().zip(&other.coefficients[d]).map(|(a, b)| a + b).collect()
        };
        Ok(GaborMap {
            grid: self.grid,
            coefficients: [add(0), add(1)],
        })
    }

    pub fn iter_all(&self) -> impl Iterator<Item = f64> + '_ {
        self.coefficients[0].iter().chain(&self.coefficients[1]).copied()
    }

    pub fn len(&self) -> usize {
        2 * self.grid.n_points()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gabor coefficients of `map` at every lattice point, both directions.
pub fn gabor_map(map: &IntensityMap, grid: &GaborGrid) -> Result<GaborMap> {
    gabor_map_field(map.values(), map.width(), map.height(), grid)
}

/// Gabor coefficients of an arbitrary real row-major field (for example a
/// zero-mean noise realization), same lattice and kernel as [`gabor_map`].
pub fn gabor_map_field(values: &[f64], width: usize, height: usize, grid: &GaborGrid) -> Result<GaborMap> {
    if values.len() != width * height {
        return Err(Error::ShapeMismatch(format!("{} values for a {width}x{height} field", values.len())));
    }
    grid.check_fits(width, height)?;
    let n = grid.n_side();
    let coefficients = [0usize, 1].map(|d| {
        let p0 = grid.point(0, 0);
        let kernel = Kernel::new(grid.w, grid.k_vector(d), [p0[0] as f64, p0[1] as f64]);
        // Integer lattice points share one tap list; only the anchor moves.
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                let p = grid.point(i, j);
                let ox = (kernel.lo[0] + (p[0] - p0[0]) as isize) as usize;
                let oy = (kernel.lo[1] + (p[1] - p0[1]) as isize) as usize;
                *v = kernel.apply(values, width, ox, oy);
            }
        });
        out
    });
    Ok(GaborMap { grid: *grid, coefficients })
}

/// Thresholded sign bits of a Gabor map.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustBitstring {
    grid: GaborGrid,
    threshold: f64,
    bits: Vec<bool>,
    mask: Vec<bool>,
}

impl RobustBitstring {
    pub fn grid(&self) -> &GaborGrid {
        &self.grid
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Sign bits, direction-major; `false` where the mask is unset.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn robust_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Bit at a position, `None` if the position is not robust.
    pub fn bit(&self, index: usize) -> Option<bool> {
        self.mask[index].then_some(self.bits[index])
    }
}

/// `mask = |G| > T`, `bit = G > 0` on masked positions.
pub fn binarize(gmap: &GaborMap, threshold: f64) -> Result<RobustBitstring> {
    if !(threshold >= 0.0) {
        return Err(Error::param("T", format!("must be >= 0, got {threshold}")));
    }
    let mut bits = Vec::with_capacity(gmap.len());
    let mut mask = Vec::with_capacity(gmap.len());
    for g in gmap.iter_all() {
        let robust = g.abs() > threshold;
        mask.push(robust);
        bits.push(robust && g > 0.0);
    }
    Ok(RobustBitstring {
        grid: gmap.grid,
        threshold,
        bits,
        mask,
    })
}

/// Fraction of enrolled robust positions whose sign differs in `probe`.
pub fn bit_error_rate(enrolled: &RobustBitstring, probe: &GaborMap) -> Result<f64> {
    let (flips, robust) = bit_flips(enrolled, probe)?;
    Ok(flips as f64 / robust as f64)
}

/// Number of flipped bits and the number of enrolled robust positions.
pub fn bit_flips(enrolled: &RobustBitstring, probe: &GaborMap) -> Result<(usize, usize)> {
    if enrolled.grid.n_points() != probe.grid.n_points() {
        return Err(Error::ShapeMismatch(format!(
            "enrolled lattice has {} points, probe has {}",
            enrolled.grid.n_points(),
            probe.grid.n_points()
        )));
    }
    let mut flips = 0usize;
    let mut robust = 0usize;
    for ((&m, &b), g) in enrolled.mask.iter().zip(&enrolled.bits).zip(probe.iter_all()) {
        if m {
            robust += 1;
            if (g > 0.0) != b {
                flips += 1;
            }
        }
    }
    if robust == 0 {
        return Err(Error::Degenerate("enrolled bitstring has no robust positions".into()));
    }
    Ok((flips, robust))
}

/// Pearson correlation with two-pass centering.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Degenerate("no samples".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Empirical intensity correlation over all pixels.
pub fn empirical_correlation_intensity(a: &IntensityMap, b: &IntensityMap) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    pearson(a.values(), b.values())
}

/// Gabor-coefficient correlation per direction and pooled over both.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborCorrelation {
    pub per_direction: [f64; 2],
    pub pooled: f64,
}

pub fn empirical_correlation_gabor(a: &GaborMap, b: &GaborMap) -> Result<GaborCorrelation> {
    if a.grid.n_points() != b.grid.n_points() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} lattice points",
            a.grid.n_points(),
            b.grid.n_points()
        )));
    }
    let d0 = pearson(a.direction(0), b.direction(0))?;
    let d1 = pearson(a.direction(1), b.direction(1))?;
    let pa: Vec<f64> = a.iter_all().collect();
    let pb: Vec<f64> = b.iter_all().collect();
    Ok(GaborCorrelation {
        per_direction: [d0, d1],
        pooled: pearson(&pa, &pb)?,
    })
}

pub use io::{read_bitstring, write_bitstring, write_gabor_csv};

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(width: usize, height: usize, f: impl Fn(f64, f64) -> f64) -> IntensityMap {
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                v.push(f(x as f64, y as f64));
            }
        }
        IntensityMap::from_pixels(width, height, v).unwrap()
    }

    #[test]
    fn constant_image_gives_zero() {
        let img = image(41, 41, |_, _| 3.5);
        for &(kx, ky) in &[(0.7, 0.0), (0.3, 0.4), (1.9, -0.2)] {
            let p = GaborParams::new(4.0, [kx, ky], [20.0, 20.0]).unwrap();
            let g = gabor_coefficient(&img, &p).unwrap();
            assert!(g.abs() <= 1e-6 * 3.5, "{g}");
        }
    }

    /// Radial integral of the truncated envelope against 1 + sin(k.u):
    /// int_0^{4w} (r/w^2) exp(-r^2/2w^2) (1 - J0(2kr)) / 2 dr, with J0 from its
    /// integral representation.
    fn truncated_sine_oracle(w: f64, k: f64) -> f64 {
        let j0 = |x: f64| {
            let n = 400;
            let h = PI / n as f64;
            (0..n).map(|i| (x * ((i as f64 + 0.5) * h).sin()).cos()).sum::<f64>() / n as f64
        };
        let r_max = SUPPORT_WIDTHS * w;
        let n = 4000;
        let h = r_max / n as f64;
        let f = |r: f64| (r / (w * w)) * (-r * r / (2.0 * w * w)).exp() * 0.5 * (1.0 - j0(2.0 * k * r));
        // composite Simpson
        let mut s = f(0.0) + f(r_max);
        for i in 1..n {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += c * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn sine_image_matches_gaussian_integral() {
        let w = 6.0;
        let k = [0.25f64, 0.1];
        let kk = k[0].hypot(k[1]);
        let x0 = [40.0, 40.0];
        let img = image(81, 81, |x, y| 1.0 + (k[0] * (x - x0[0]) + k[1] * (y - x0[1])).sin());
        let g = gabor_coefficient(&img, &GaborParams::new(w, k, x0).unwrap()).unwrap();
        let oracle = truncated_sine_oracle(w, kk);
        assert!((g / oracle - 1.0).abs() < 1e-4, "{g} vs {oracle}");
        // The untruncated value differs only by the envelope tail.
        let full = 0.5 * (1.0 - (-2.0 * w * w * kk * kk).exp());
        assert!((oracle / full - 1.0).abs() < 1e-3);
    }

    #[test]
    fn reflection_negates() {
        let n = 33;
        let img = image(n, n, |x, y| ((x * 0.37).sin() + (y * 0.11 + x * x * 0.01).cos() + 2.0).abs());
        let refl = image(n, n, |x, y| {
            let (xr, yr) = (32.0 - x, 32.0 - y);
            ((xr * 0.37).sin() + (yr * 0.11 + xr * xr * 0.01).cos() + 2.0).abs()
        });
        let p = GaborParams::new(3.5, [0.6, -0.3], [16.0, 16.0]).unwrap();
        let a = gabor_coefficient(&img, &p).unwrap();
        let b = gabor_coefficient(&refl, &p).unwrap();
        assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn support_outside_image_is_an_error() {
        let img = image(20, 20, |_, _| 1.0);
        let p = GaborParams::new(3.0, [0.5, 0.0], [10.0, 10.0]).unwrap();
        assert!(matches!(gabor_coefficient(&img, &p), Err(Error::SupportOutsideImage { .. })));
    }

    #[test]
    fn map_matches_pointwise_coefficients() {
        let img = image(48, 44, |x, y| 1.0 + (0.3 * x).sin() * (0.2 * y).cos() + 0.01 * x);
        let grid = GaborGrid::fitted(2.5, 0.8, 0.3, 3, 48, 44).unwrap();
        let gm = gabor_map(&img, &grid).unwrap();
        let n = grid.n_side();
        assert!(n > 1);
        for d in 0..2 {
            for j in 0..n {
                for i in 0..n {
                    let g = gabor_coefficient(&img, &grid.params(i, j, d)).unwrap();
                    assert_eq!(gm.direction(d)[j * n + i], g);
                }
            }
        }
    }

    #[test]
    fn single_point_lattice() {
        let img = image(25, 25, |x, y| (x * y * 0.01).sin() + 1.0);
        let grid = GaborGrid::new(3.0, 0.9, 0.0, 1, 1, [12, 12]).unwrap();
        let gm = gabor_map(&img, &grid).unwrap();
        assert_eq!(gm.direction(0).len(), 1);
        let p = GaborParams::new(3.0, [0.9, 0.0], [12.0, 12.0]).unwrap();
        assert_eq!(gm.direction(0)[0], gabor_coefficient(&img, &p).unwrap());
    }

    #[test]
    fn grid_margin_enforced() {
        assert!(GaborGrid::new(2.0, 1.0, 0.0, 1, 4, [7, 8]).is_err());
        let grid = GaborGrid::new(2.0, 1.0, 0.0, 2, 10, [8, 8]).unwrap();
        assert_eq!(grid.n_side(), 5);
        assert!(grid.check_fits(24, 25).is_err());
        assert!(grid.check_fits(25, 25).is_ok());
    }

    fn three_point_map(values: [f64; 3]) -> GaborMap {
        // 1x... lattice cannot hold 3 values per direction; use a 2x2 lattice and pad.
        let grid = GaborGrid::new(1.0, 1.0, 0.0, 1, 2, [4, 4]).unwrap();
        GaborMap::from_coefficients(
            grid,
            [vec![values[0], values[1], values[2], 0.0], vec![0.0; 4]],
        )
        .unwrap()
    }

    #[test]
    fn binarize_definition() {
        let t = 1.5;
        let gm = three_point_map([2.0 * t, -0.5 * t, -3.0 * t]);
        let b = binarize(&gm, t).unwrap();
        assert_eq!(&b.mask()[..3], &[true, false, true]);
        assert_eq!(b.bit(0), Some(true));
        assert_eq!(b.bit(1), None);
        assert_eq!(b.bit(2), Some(false));
        let all = binarize(&three_point_map([1.0, -1.0, 0.5]), 0.0).unwrap();
        assert_eq!(&all.mask()[..3], &[true, true, true]);
        let none = binarize(&gm, f64::INFINITY).unwrap();
        assert_eq!(none.robust_count(), 0);
        assert!(binarize(&gm, -1.0).is_err());
    }

    #[test]
    fn bit_error_rate_extremes() {
        let gm = three_point_map([1.0, -2.0, 3.0]);
        let enrolled = binarize(&gm, 0.5).unwrap();
        assert_eq!(bit_error_rate(&enrolled, &gm).unwrap(), 0.0);
        let neg = GaborMap::from_coefficients(
            *gm.grid(),
            [gm.direction(0).iter().map(|v| -v).collect(), gm.direction(1).iter().map(|v| -v).collect()],
        )
        .unwrap();
        assert_eq!(bit_error_rate(&enrolled, &neg).unwrap(), 1.0);
        let empty = binarize(&gm, 10.0).unwrap();
        assert!(bit_error_rate(&empty, &gm).is_err());
    }

    #[test]
    fn correlation_identities() {
        let img = image(40, 40, |x, y| 1.0 + (0.5 * x + 0.2 * y).sin().powi(2) + 0.03 * y);
        assert!((empirical_correlation_intensity(&img, &img).unwrap() - 1.0).abs() < 1e-15);
        let affine = IntensityMap::from_pixels(40, 40, img.values().iter().map(|v| 2.5 * v + 7.0).collect()).unwrap();
        assert!((empirical_correlation_intensity(&img, &affine).unwrap() - 1.0).abs() < 1e-12);
        let flat = image(40, 40, |_, _| 1.0);
        assert!(empirical_correlation_intensity(&img, &flat).is_err());
        let grid = GaborGrid::fitted(2.0, 1.0, 0.0, 2, 40, 40).unwrap();
        let gm = gabor_map(&img, &grid).unwrap();
        let c = empirical_correlation_gabor(&gm, &gm).unwrap();
        assert!((c.pooled - 1.0).abs() < 1e-12);
        assert!((c.per_direction[0] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linearity(a in 0.0f64..5.0, b in 0.0f64..5.0, seed in 0u64..1000) {
            let s = seed as f64;
            let i1 = image(30, 30, |x, y| ((x * 0.3 + s).sin() * (y * 0.7).cos()).abs());
            let i2 = image(30, 30, |x, y| ((x * y * 0.013 + s).cos()).powi(2));
            let sum = IntensityMap::from_pixels(30, 30,
                i1.values().iter().zip(i2.values()).map(|(u, v)| a * u + b * v).collect()).unwrap();
            let p = GaborParams::new(3.0, [0.4, 0.8], [15.0, 14.5]).unwrap();
            let g1 = gabor_coefficient(&i1, &p).unwrap();
            let g2 = gabor_coefficient(&i2, &p).unwrap();
            let g = gabor_coefficient(&sum, &p).unwrap();
            let scale = (a * g1.abs() + b * g2.abs()).max(1e-3);
            prop_assert!((g - (a * g1 + b * g2)).abs() <= 1e-12 * scale);
        }

        #[test]
        fn threshold_monotone(t1 in 0.0f64..3.0, dt in 0.0f64..3.0, vals in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let gm = three_point_map([vals[0], vals[1], vals[2]]);
            let lo = binarize(&gm, t1).unwrap();
            let hi = binarize(&gm, t1 + dt).unwrap();
            for (l, h) in lo.mask().iter().zip(hi.mask()) {
                prop_assert!(!h || *l);
            }
        }
    }
}
