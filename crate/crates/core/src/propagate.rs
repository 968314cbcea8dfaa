//! Fresnel propagation from the source plane to the detector.
//!
//! The field at `x` is
//! `A(x) = (p^2 / (lambda z)) sum_a exp(i phi_a) exp(-i pi |x - a|^2 / (lambda z))`,
//! with `p` the region pitch. Two evaluators are provided: a direct sum and
//! a separable chirp-z (Bluestein) evaluation that reduces the lattice sum
//! to FFT convolutions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::detector::{DetectorGrid, IntensityMap};
use crate::error::{Error, Result};
use crate::source::SpeckleSource;

/// How the Fresnel sum is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RenderMethod {
    /// One complex exponential per (pixel, region) pair.
    Direct,
    /// Chirp-z transform via zero-padded FFT convolution.
    #[default]
    Fft,
}

impl RenderMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(RenderMethod::Direct),
            "fft" => Ok(RenderMethod::Fft),
            other => Err(Error::Parse(format!("unknown render method `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RenderMethod::Direct => "direct",
            RenderMethod::Fft => "fft",
        }
    }
}

/// Default cap on working memory for the FFT evaluator (1 GiB).
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub method: RenderMethod,
    pub memory_budget: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            method: RenderMethod::Fft,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl RenderOptions {
    pub fn method(method: RenderMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

/// `exp(i 2 pi turns)` with the integer part of `turns` removed first.
#[inline]
fn cis_turns(turns: f64) -> Complex64 {
    let f = turns - turns.round();
    Complex64::from_polar(1.0, 2.0 * PI * f)
}

/// Complex amplitude at a detector position `x` (meters).
pub fn amplitude_at(source: &SpeckleSource, x: [f64; 2]) -> Complex64 {
    let g = source.geometry();
    let lz = g.wavelength() * g.distance();
    let mut acc = Complex64::new(0.0, 0.0);
    for (cell, &phi) in g.lattice().iter().zip(source.phases()) {
        let a = g.position(*cell);
        let d0 = x[0] - a[0];
        let d1 = x[1] - a[1];
        // phi/(2 pi) - |x-a|^2/(2 lambda z) turns
        let turns = phi / (2.0 * PI) - 0.5 * (d0 * d0 + d1 * d1) / lz;
        acc += cis_turns(turns);
    }
    acc * g.region_amplitude()
}

/// Complex field on every pixel of `grid`, row-major.
pub fn render_amplitude(
    source: &SpeckleSource,
    grid: &DetectorGrid,
    options: &RenderOptions,
) -> Result<Vec<Complex64>> {
    match options.method {
        RenderMethod::Direct => Ok(render_direct(source, grid)),
        RenderMethod::Fft => render_chirp_z(source, grid, options.memory_budget),
    }
}

/// Intensity `|A|^2` on every pixel of `grid`.
pub fn render_intensity(
    source: &SpeckleSource,
    grid: &DetectorGrid,
    options: &RenderOptions,
) -> Result<IntensityMap> {
    let field = render_amplitude(source, grid, options)?;
    let values = field.iter().map(|a| a.norm_sqr()).collect();
    Ok(IntensityMap::new(*grid, values)?.with_source(source.geometry().clone()))
}

fn render_direct(source: &SpeckleSource, grid: &DetectorGrid) -> Vec<Complex64> {
    let w = grid.width();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
        for (col, v) in line.iter_mut().enumerate() {
            *v = amplitude_at(source, grid.position(col, row));
        }
    });
    out
}

/// Chirp-z transform `X_j = sum_{n<N} x_n exp(2 pi i theta j n)` for `j < J`.
struct ChirpZ {
    n: usize,
    j: usize,
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel: Vec<Complex64>,
}

impl ChirpZ {
    fn new(planner: &mut FftPlanner<f64>, n: usize, j: usize, theta: f64) -> Self {
        let len = (n + j - 1).next_power_of_two();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        // exp(2 pi i theta j n) = c(j) c(n) conj(c(j - n)), c(m) = exp(i pi theta m^2)
        let chirp = |m: i64| cis_turns(0.5 * theta * (m * m) as f64);
        let pre = (0..n as i64).map(chirp).collect();
        let scale = 1.0 / len as f64;
        let post = (0..j as i64).map(|m| chirp(m) * scale).collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        for m in -(n as i64 - 1)..(j as i64) {
            kernel[m.rem_euclid(len as i64) as usize] = chirp(m).conj();
        }
        fft.process(&mut kernel);
        Self {
            n,
            j,
            len,
            fft,
            ifft,
            pre,
            post,
            kernel,
        }
    }

    fn scratch_len(&self) -> usize {
        self.fft
            .get_inplace_scratch_len()
            .max(self.ifft.get_inplace_scratch_len())
    }

    /// `input.len() == n`, `output.len() == j`, `buf.len() == len`.
    fn apply(
        &self,
        input: impl Iterator<Item = Complex64>,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
        mut output: impl FnMut(usize, Complex64),
    ) {
        buf.fill(Complex64::new(0.0, 0.0));
        for ((b, x), p) in buf.iter_mut().zip(input).zip(&self.pre) {
            *b = x * p;
        }
        self.fft.process_with_scratch(buf, scratch);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.ifft.process_with_scratch(buf, scratch);
        for (m, p) in self.post.iter().enumerate() {
            output(m, buf[m] * p);
        }
    }
}

fn render_chirp_z(
    source: &SpeckleSource,
    grid: &DetectorGrid,
    memory_budget: usize,
) -> Result<Vec<Complex64>> {
    let g = source.geometry();
    let lz = g.wavelength() * g.distance();
    let p = g.region_pitch();
    let dx = grid.pixel_pitch();
    let (w, h) = (grid.width(), grid.height());

    let cells = g.lattice();
    let (mut imin, mut imax, mut jmin, mut jmax) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    for c in cells {
        imin = imin.min(c[0]);
        imax = imax.max(c[0]);
        jmin = jmin.min(c[1]);
        jmax = jmax.max(c[1]);
    }
    let n1 = (imax - imin + 1) as usize;
    let n2 = (jmax - jmin + 1) as usize;
    let len1 = (n1 + w - 1).next_power_of_two();
    let len2 = (n2 + h - 1).next_power_of_two();
    let complex = std::mem::size_of::<Complex64>();
    let threads = rayon::current_num_threads().max(1);
    let estimate = complex
        * (n1 * n2 + w * n2 + w * h + len1 + len2 + threads * 2 * (len1.max(len2)));
    if estimate > memory_budget {
        return Err(Error::ResourceLimit(format!(
            "chirp-z evaluation needs about {estimate} bytes (budget {memory_budget}); \
             reduce the grid or use the direct method"
        )));
    }

    // a = a0 + p n, x = x0 + dx j
    let a0 = g.position([imin, jmin]);
    let x0 = grid.corner();
    let theta = dx * p / lz;

    // Source coefficients c_n = exp(i phi) exp(-i pi |a|^2/lz) exp(2 pi i x0.(p n)/lz),
    // stored column-major in n1 so each column is contiguous for the first pass.
    let mut coeff = vec![Complex64::new(0.0, 0.0); n1 * n2];
    for (cell, &phi) in cells.iter().zip(source.phases()) {
        let a = g.position(*cell);
        let i = (cell[0] - imin) as usize;
        let j = (cell[1] - jmin) as usize;
        let turns = phi / (2.0 * PI) - 0.5 * (a[0] * a[0] + a[1] * a[1]) / lz
            + (x0[0] * p * i as f64 + x0[1] * p * j as f64) / lz;
        coeff[j * n1 + i] = cis_turns(turns);
    }

    let mut planner = FftPlanner::new();
    let cz1 = ChirpZ::new(&mut planner, n1, w, theta);
    let cz2 = ChirpZ::new(&mut planner, n2, h, theta);

    // First pass along the x lattice axis: stage[j2][col].
    let mut stage = vec![Complex64::new(0.0, 0.0); n2 * w];
    stage.par_chunks_mut(w).enumerate().for_each_init(
        || {
            (
                vec![Complex64::new(0.0, 0.0); cz1.len],
                vec![Complex64::new(0.0, 0.0); cz1.scratch_len()],
            )
        },
        |(buf, scratch), (j2, out)| {
            let input = coeff[j2 * n1..(j2 + 1) * n1].iter().copied();
            cz1.apply(input, buf, scratch, |col, v| out[col] = v);
        },
    );
    debug_assert_eq!(cz1.n, n1);
    debug_assert_eq!(cz1.j, w);

    // Second pass along y, one detector column at a time.
    let mut columns = vec![Complex64::new(0.0, 0.0); w * h];
    columns.par_chunks_mut(h).enumerate().for_each_init(
        || {
            (
                vec![Complex64::new(0.0, 0.0); cz2.len],
                vec![Complex64::new(0.0, 0.0); cz2.scratch_len()],
            )
        },
        |(buf, scratch), (col, out)| {
            let input = (0..n2).map(|j2| stage[j2 * w + col]);
            cz2.apply(input, buf, scratch, |row, v| out[row] = v);
        },
    );

    // Output phase: exp(-i pi |x|^2/lz) exp(2 pi i x.a0/lz) scaled by region amplitude.
    let amp = g.region_amplitude();
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
        for (col, v) in line.iter_mut().enumerate() {
            let x = grid.position(col, row);
            let turns = -0.5 * (x[0] * x[0] + x[1] * x[1]) / lz + (x[0] * a0[0] + x[1] * a0[1]) / lz;
            *v = columns[col * h + row] * cis_turns(turns) * amp;
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{LatticeCentering, SourceGeometry};

    #[test]
    fn single_region_on_axis() {
        let lambda = 1e-6;
        let g = SourceGeometry::new(lambda, 0.4 * lambda, 0.01).unwrap();
        assert_eq!(g.n_regions(), 1);
        let s = SpeckleSource::from_phases(&g, vec![0.0]).unwrap();
        let a = amplitude_at(&s, [0.0, 0.0]);
        assert_eq!(a, Complex64::new(lambda / 0.01, 0.0));
    }

    fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    #[test]
    fn fft_matches_direct_off_axis() {
        let lambda = 633e-9;
        let g = SourceGeometry::with_lattice(lambda, 9.0 * lambda, 0.05, 1.3 * lambda, LatticeCentering::HalfPitch)
            .unwrap();
        let s = SpeckleSource::new(&g, 5);
        let m = g.speckle_scale();
        let grid = DetectorGrid::new(23, 17, 0.37 * m, [3.1 * m, -1.7 * m]).unwrap();
        let d = render_intensity(&s, &grid, &RenderOptions::method(RenderMethod::Direct)).unwrap();
        let f = render_intensity(&s, &grid, &RenderOptions::method(RenderMethod::Fft)).unwrap();
        assert!(relative_gap(d.values(), f.values()) < 1e-8);
        let ad = render_amplitude(&s, &grid, &RenderOptions::method(RenderMethod::Direct)).unwrap();
        let af = render_amplitude(&s, &grid, &RenderOptions::method(RenderMethod::Fft)).unwrap();
        for (x, y) in ad.iter().zip(&af) {
            assert!((x - y).norm() <= 1e-9 * x.norm().max(1e-3 * g.region_amplitude()));
        }
    }

    #[test]
    fn memory_budget_enforced() {
        let lambda = 1e-6;
        let g = SourceGeometry::new(lambda, 5.0 * lambda, 0.01).unwrap();
        let s = SpeckleSource::new(&g, 1);
        let grid = DetectorGrid::centered(64, 1e-4).unwrap();
        let opts = RenderOptions {
            method: RenderMethod::Fft,
            memory_budget: 1024,
        };
        assert!(matches!(render_intensity(&s, &grid, &opts), Err(Error::ResourceLimit(_))));
    }
}
