//! Camera images: PGM input/output, gray-value histograms and pairwise drift
//! correlations over an image sequence.
//!
//! Gray values are taken as proportional to intensity. A gray value `v`
//! stands for intensities in `[v - 1/2, v + 1/2)` (with `0` covering
//! `[0, 1/2)`), which is the quantization the exponential fit assumes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::detector::IntensityMap;
use crate::error::{Error, Result};
use crate::gabor::GaborGrid;
use crate::montecarlo::{drift_analysis_fields, DriftAnalysis};

/// Gray value reported by a saturated pixel.
pub const SATURATED: u8 = u8::MAX;

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("dimensions", format!("{width}x{height} image is empty")));
        }
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn min(&self) -> u8 {
        self.pixels.iter().copied().min().unwrap_or(0)
    }

    pub fn saturated_count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v == SATURATED).count()
    }

    /// Gray values as a real field.
    pub fn to_field(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| f64::from(v)).collect()
    }

    /// The image as an intensity map on unit pixels.
    pub fn to_intensity_map(&self) -> Result<IntensityMap> {
        IntensityMap::from_pixels(self.width, self.height, self.to_field())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                Error::Parse(format!("truncated PGM: missing {what}"))
            } else {
                Error::Parse(format!("malformed PGM: expected {what} at byte {start}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("malformed PGM: {what} out of range")))
    }
}

/// Decodes a P2 (ASCII) or P5 (binary) PGM with `maxval <= 255`.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(Error::Parse("not a PGM file (expected P2 or P5 magic)".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|c| c.is_ascii_whitespace() || *c == b'#') {
        return Err(Error::Parse("malformed PGM: no separator after magic".into()));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse(format!("malformed PGM: {width}x{height} image")));
    }
    if maxval == 0 {
        return Err(Error::Parse("malformed PGM: maxval 0".into()));
    }
    if maxval > 255 {
        return Err(Error::Unsupported(format!("PGM maxval {maxval}: only 8-bit images are handled")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse("malformed PGM: image too large".into()))?;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        let start = cur.pos + 1;
        let data = bytes.get(start..start + n).ok_or_else(|| {
            Error::Parse(format!(
                "truncated PGM: {} of {n} pixel bytes",
                bytes.len().saturating_sub(start)
            ))
        })?;
        pixels.extend_from_slice(data);
    } else {
        for i in 0..n {
            let v = cur.number(&format!("pixel {i}"))?;
            if v > maxval {
                return Err(Error::Parse(format!("PGM pixel value {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as u8);
        }
    }
    if let Some(v) = pixels.iter().find(|&&v| u64::from(v) > maxval) {
        return Err(Error::Parse(format!("PGM pixel value {v} exceeds maxval {maxval}")));
    }
    GrayImage::new(width, height, pixels)
}

pub fn load_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::at_path(path, e))?;
    parse_pgm(&bytes).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::Unsupported(m) => Error::Unsupported(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Binary (P5) encoding with `maxval = 255`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn save_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::at_path(path, e))
}

/// Subtracts the image minimum from every pixel.
pub fn normalize_floor(img: &GrayImage) -> GrayImage {
    let floor = img.min();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|v| v - floor).collect(),
    }
}

/// Gray-value histogram with an exponential fit of the same mean.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: usize,
    /// `counts[b]` covers gray values `[b w, (b + 1) w)`.
    pub counts: Vec<u64>,
    pub total: u64,
    /// Sample mean of the counted gray values.
    pub mean: f64,
    /// Kolmogorov-Smirnov distance of the counted values to the quantized
    /// exponential law with that mean.
    pub ks_distance: f64,
    pub saturated: usize,
    pub excluded_saturated: bool,
}

/// One CSV row of a histogram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub gray_lo: usize,
    pub gray_hi: usize,
    pub count: u64,
    /// `count / (total * bin_width)`.
    pub density: f64,
    /// Exponential probability of the bin per gray value.
    pub exponential_fit: f64,
}

fn quantized_exp_cdf(gray: f64, mean: f64) -> f64 {
    // P(gray value <= g) under rounding of an exponential intensity
    if gray < 0.0 || mean <= 0.0 {
        return if gray < 0.0 { 0.0 } else { 1.0 };
    }
    -(-(gray + 0.5) / mean).exp_m1()
}

impl Histogram {
    pub fn edges(&self, bin: usize) -> (usize, usize) {
        (bin * self.bin_width, (bin + 1) * self.bin_width)
    }

    pub fn bins(&self) -> Vec<HistogramBin> {
        let total = self.total.max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(b, &count)| {
                let (lo, hi) = self.edges(b);
                let p = quantized_exp_cdf(hi as f64 - 1.0, self.mean) - quantized_exp_cdf(lo as f64 - 1.0, self.mean);
                HistogramBin {
                    gray_lo: lo,
                    gray_hi: hi,
                    count,
                    density: count as f64 / (total * self.bin_width as f64),
                    exponential_fit: p / self.bin_width as f64,
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in self.bins() {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn gray_histogram(img: &GrayImage, bin_width: usize) -> Result<Histogram> {
    gray_histogram_with(img, bin_width, false)
}

/// As [`gray_histogram`], optionally leaving saturated pixels out of the
/// counts, the mean and the fit.
pub fn gray_histogram_with(img: &GrayImage, bin_width: usize, exclude_saturated: bool) -> Result<Histogram> {
    if bin_width == 0 {
        return Err(Error::param("bin_width", "must be at least 1"));
    }
    let mut per_value = [0u64; 256];
    for &v in &img.pixels {
        per_value[v as usize] += 1;
    }
    let saturated = per_value[SATURATED as usize] as usize;
    if exclude_saturated {
        per_value[SATURATED as usize] = 0;
    }
    let total: u64 = per_value.iter().sum();
    if total == 0 {
        return Err(Error::Degenerate("no pixels left to histogram".into()));
    }
    let mean = per_value.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum::<f64>() / total as f64;
    let top = per_value.iter().rposition(|&c| c > 0).unwrap_or(0);
    let mut counts = vec![0u64; top / bin_width + 1];
    for (v, &c) in per_value.iter().enumerate().take(top + 1) {
        counts[v / bin_width] += c;
    }
    let mut cum = 0u64;
    let mut ks = 0.0f64;
    for (v, &c) in per_value.iter().enumerate() {
        let below = cum as f64 / total as f64;
        cum += c;
        let upto = cum as f64 / total as f64;
        ks = ks
            .max((upto - quantized_exp_cdf(v as f64, mean)).abs())
            .max((below - quantized_exp_cdf(v as f64 - 1.0, mean)).abs());
    }
    Ok(Histogram {
        bin_width,
        counts,
        total,
        mean,
        ks_distance: ks,
        saturated,
        excluded_saturated: exclude_saturated,
    })
}

/// Images of one sample taken over time.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftSequence {
    images: Vec<GrayImage>,
    timestamps: Vec<f64>,
}

impl DriftSequence {
    /// `timestamps` in seconds, one per image.
    pub fn new(images: Vec<GrayImage>, timestamps: Vec<f64>) -> Result<Self> {
        if images.len() < 2 {
            return Err(Error::param("images", format!("need at least 2, got {}", images.len())));
        }
        if timestamps.len() != images.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} timestamps for {} images",
                timestamps.len(),
                images.len()
            )));
        }
        let (w, h) = (images[0].width, images[0].height);
        if let Some((i, img)) = images.iter().enumerate().find(|(_, m)| (m.width, m.height) != (w, h)) {
            return Err(Error::ShapeMismatch(format!(
                "image {i} is {}x{}, image 0 is {w}x{h}",
                img.width, img.height
            )));
        }
        Ok(Self { images, timestamps })
    }

    /// Images captured at a fixed interval starting from zero.
    pub fn uniform(images: Vec<GrayImage>, interval: f64) -> Result<Self> {
        let t = (0..images.len()).map(|i| i as f64 * interval).collect();
        Self::new(images, t)
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Gabor parameters the scatter was computed with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaborSettings {
    pub w: f64,
    pub k: f64,
    pub psi1: f64,
    pub pitch: usize,
    pub n_side: usize,
}

impl From<&GaborGrid> for GaborSettings {
    fn from(g: &GaborGrid) -> Self {
        Self {
            w: g.w(),
            k: g.k_mag(),
            psi1: g.psi(0),
            pitch: g.pitch(),
            n_side: g.n_side(),
        }
    }
}

/// Pairwise correlations of a drift sequence with its metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageDriftAnalysis {
    pub gabor: GaborSettings,
    pub timestamps: Vec<f64>,
    /// Saturated pixels per image.
    pub saturated: Vec<usize>,
    pub analysis: DriftAnalysis,
}

#[derive(Serialize)]
struct ScatterCsvRow {
    pair_i: usize,
    pair_j: usize,
    #[serde(rename = "Xi_I")]
    xi_i: f64,
    #[serde(rename = "Xi_G_dir1")]
    xi_g_dir1: f64,
    #[serde(rename = "Xi_G_dir2")]
    xi_g_dir2: f64,
}

impl ImageDriftAnalysis {
    /// Rows `pair_i, pair_j, Xi_I, Xi_G_dir1, Xi_G_dir2`.
    pub fn write_scatter_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.analysis.rows {
            w.serialize(ScatterCsvRow {
                pair_i: r.i,
                pair_j: r.j,
                xi_i: r.xi_i,
                xi_g_dir1: r.xi_g[0],
                xi_g_dir2: r.xi_g[1],
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Xi_I` and both `Xi_G` for every unordered pair of images, with the
/// regression of pooled `Xi_G` on `Xi_I`.
pub fn drift_analysis(seq: &DriftSequence, grid: &GaborGrid) -> Result<ImageDriftAnalysis> {
    let (w, h) = (seq.images[0].width, seq.images[0].height);
    let fields: Vec<Vec<f64>> = seq.images.iter().map(GrayImage::to_field).collect();
    let analysis = drift_analysis_fields(&fields, w, h, grid)?;
    Ok(ImageDriftAnalysis {
        gabor: grid.into(),
        timestamps: seq.timestamps.clone(),
        saturated: seq.images.iter().map(GrayImage::saturated_count).collect(),
        analysis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ascii_and_binary_agree() {
        let a = parse_pgm(b"P2\n# two by two\n2 2\n3\n0 1\n2 3\n").unwrap();
        assert_eq!(a.pixels(), &[0, 1, 2, 3]);
        let mut bin = b"P5 2 2 3\n".to_vec();
        bin.extend_from_slice(&[0, 1, 2, 3]);
        assert_eq!(parse_pgm(&bin).unwrap(), a);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(parse_pgm(b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0"), Err(Error::Unsupported(_))));
        assert!(matches!(parse_pgm(b"P6\n2 2\n255\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_pgm(b"P2\n2 x\n255\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_pgm(b"P5\n2 2\n255\n\x01\x02"), Err(Error::Parse(m)) if m.contains("truncated")));
        assert!(matches!(parse_pgm(b"P2\n2 2\n255\n1 2 3"), Err(Error::Parse(m)) if m.contains("truncated")));
        assert!(matches!(parse_pgm(b"P2\n1 1\n10\n11\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_pgm(b"P2\n0 1\n10\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn floor_normalization() {
        let img = GrayImage::new(3, 1, vec![5, 10, 7]).unwrap();
        assert_eq!(normalize_floor(&img).pixels(), &[0, 5, 2]);
        let flat = GrayImage::new(2, 2, vec![9; 4]).unwrap();
        assert_eq!(normalize_floor(&flat).pixels(), &[0; 4]);
        let zero = GrayImage::new(2, 1, vec![0, 4]).unwrap();
        assert_eq!(normalize_floor(&zero), zero);
    }

    #[test]
    fn histogram_bins() {
        let img = GrayImage::new(4, 1, vec![0, 4, 5, 12]).unwrap();
        let h = gray_histogram(&img, 5).unwrap();
        assert_eq!(h.counts, vec![2, 1, 1]);
        assert_eq!(h.edges(1), (5, 10));
        let flat = GrayImage::new(3, 3, vec![17; 9]).unwrap();
        let h = gray_histogram(&flat, 5).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!(gray_histogram(&flat, 0).is_err());
    }

    #[test]
    fn exponential_fit_sums_to_one() {
        let img = GrayImage::new(3, 1, vec![0, 40, 254]).unwrap();
        let h = gray_histogram(&img, 5).unwrap();
        let s: f64 = h.bins().iter().map(|b| b.exponential_fit * 5.0).sum();
        let tail = (-(h.counts.len() as f64 * 5.0 - 0.5) / h.mean).exp();
        assert!((s + tail - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_flag_and_exclusion() {
        let img = GrayImage::new(4, 1, vec![1, 255, 3, 255]).unwrap();
        let h = gray_histogram(&img, 5).unwrap();
        assert_eq!((h.saturated, h.total), (2, 4));
        let h = gray_histogram_with(&img, 5, true).unwrap();
        assert_eq!((h.saturated, h.total), (2, 2));
        assert_eq!(h.mean, 2.0);
    }

    #[test]
    fn sequence_checks_dimensions() {
        let a = GrayImage::new(2, 2, vec![0; 4]).unwrap();
        let b = GrayImage::new(4, 1, vec![0; 4]).unwrap();
        assert!(DriftSequence::uniform(vec![a.clone()], 1.0).is_err());
        assert!(matches!(DriftSequence::uniform(vec![a.clone(), b], 1.0), Err(Error::ShapeMismatch(_))));
        assert!(DriftSequence::new(vec![a.clone(), a], vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn encode_parse_roundtrip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..w * h).map(|i| (crate::rng::mix64(seed ^ i as u64) >> 56) as u8).collect();
            let img = GrayImage::new(w, h, pixels).unwrap();
            let bytes = encode_pgm(&img);
            let back = parse_pgm(&bytes).unwrap();
            prop_assert_eq!(encode_pgm(&back), bytes);
            prop_assert_eq!(back, img);
        }

        #[test]
        fn normalized_minimum_is_zero(pixels in proptest::collection::vec(any::<u8>(), 1..64)) {
            let img = GrayImage::new(pixels.len(), 1, pixels.clone()).unwrap();
            let n = normalize_floor(&img);
            prop_assert_eq!(n.min(), 0);
            let floor = img.min();
            for (a, b) in n.pixels().iter().zip(&pixels) {
                prop_assert_eq!(*a + floor, *b);
            }
        }
    }
}
