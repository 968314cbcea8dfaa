//! Detection-plane pixel grid and intensity maps.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::source::{LatticeCentering, SourceGeometry};

/// Rectangular pixel grid in the detection plane.
///
/// Pixel `(col, row)` is centered at
/// `origin + ((col - (width-1)/2) * pitch, (row - (height-1)/2) * pitch)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorGrid {
    width: usize,
    height: usize,
    pixel_pitch: f64,
    origin: [f64; 2],
}

impl DetectorGrid {
    pub fn new(width: usize, height: usize, pixel_pitch: f64, origin: [f64; 2]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("grid", format!("dimensions must be >= 1, got {width}x{height}")));
        }
        if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
            return Err(Error::param("pixel_pitch", format!("must be positive, got {pixel_pitch}")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::param("origin", "must be finite"));
        }
        Ok(Self {
            width,
            height,
            pixel_pitch,
            origin,
        })
    }

    /// Square grid centered on the optical axis.
    pub fn centered(size: usize, pixel_pitch: f64) -> Result<Self> {
        Self::new(size, size, pixel_pitch, [0.0, 0.0])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Physical position of the first pixel `(0, 0)`.
    pub fn corner(&self) -> [f64; 2] {
        [
            self.origin[0] - 0.5 * (self.width as f64 - 1.0) * self.pixel_pitch,
            self.origin[1] - 0.5 * (self.height as f64 - 1.0) * self.pixel_pitch,
        ]
    }

    /// Physical center of pixel `(col, row)`.
    pub fn position(&self, col: usize, row: usize) -> [f64; 2] {
        let c = self.corner();
        [
            c[0] + col as f64 * self.pixel_pitch,
            c[1] + row as f64 * self.pixel_pitch,
        ]
    }
}

/// Detected intensities on a grid, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMap {
    grid: DetectorGrid,
    values: Vec<f64>,
    source: Option<SourceGeometry>,
}

const MAGIC: &str = "SPECKLE-INTENSITY v1";
const END_HEADER: &str = "end_header";

impl IntensityMap {
    pub fn new(grid: DetectorGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.width(),
                grid.height()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param(
                "values",
                format!("intensity at index {i} is {} (must be finite and >= 0)", values[i]),
            ));
        }
        Ok(Self {
            grid,
            values,
            source: None,
        })
    }

    /// Pixel-unit map (pitch 1, centered) from raw values.
    pub fn from_pixels(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(DetectorGrid::new(width, height, 1.0, [0.0, 0.0])?, values)
    }

    /// Attaches the source geometry that produced this map.
    pub fn with_source(mut self, geometry: SourceGeometry) -> Self {
        self.source = Some(geometry);
        self
    }

    pub fn grid(&self) -> &DetectorGrid {
        &self.grid
    }

    pub fn source(&self) -> Option<&SourceGeometry> {
        self.source.as_ref()
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.grid.width() + col]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Writes the self-describing binary format (text header + LE f64 payload).
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::at_path(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_binary_to(&mut out)
            .map_err(|e| Error::at_path(path, e))?;
        out.flush().map_err(|e| Error::at_path(path, e))
    }

    pub fn write_binary_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "width={}", self.grid.width())?;
        writeln!(out, "height={}", self.grid.height())?;
        writeln!(out, "pixel_pitch={}", self.grid.pixel_pitch())?;
        writeln!(out, "origin_x={}", self.grid.origin()[0])?;
        writeln!(out, "origin_y={}", self.grid.origin()[1])?;
        if let Some(g) = &self.source {
            writeln!(out, "wavelength={}", g.wavelength())?;
            writeln!(out, "radius={}", g.radius())?;
            writeln!(out, "distance={}", g.distance())?;
            writeln!(out, "region_pitch={}", g.region_pitch())?;
            writeln!(out, "lattice_centering={}", g.centering().as_str())?;
        }
        writeln!(out, "{END_HEADER}")?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::at_path(path, e))?;
        Self::read_binary_from(&mut BufReader::new(file))
    }

    pub fn read_binary_from<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Parse(format!("bad magic line `{}`", line.trim_end())));
        }
        let mut keys = std::collections::BTreeMap::new();
        loop {
            line.clear();
            if input.read_line(&mut line)? == 0 {
                return Err(Error::Parse("header not terminated".into()));
            }
            let l = line.trim_end();
            if l == END_HEADER {
                break;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header line `{l}`")))?;
            keys.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&str> {
            keys.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Parse(format!("missing header key `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("header key `{k}`: {e}")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("header key `{k}`: {e}")))
        };
        let grid = DetectorGrid::new(
            int("width")?,
            int("height")?,
            num("pixel_pitch")?,
            [num("origin_x")?, num("origin_y")?],
        )?;
        let n = grid.len();
        let mut bytes = vec![0u8; n * 8];
        input
            .read_exact(&mut bytes)
            .map_err(|_| Error::Parse(format!("payload truncated: expected {n} float64 values")))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut map = IntensityMap::new(grid, values)?;
        if keys.contains_key("wavelength") {
            let centering = match keys.get("lattice_centering") {
                Some(s) => LatticeCentering::parse(s)?,
                None => LatticeCentering::Origin,
            };
            map.source = Some(SourceGeometry::with_lattice(
                num("wavelength")?,
                num("radius")?,
                num("distance")?,
                num("region_pitch")?,
                centering,
            )?);
        }
        Ok(map)
    }

    /// 8-bit grayscale rendering; values at or above the given quantile map to 255.
    pub fn to_gray8(&self, saturation_quantile: f64) -> Result<Vec<u8>> {
        if !(saturation_quantile > 0.0 && saturation_quantile <= 1.0) {
            return Err(Error::param(
                "saturation_quantile",
                format!("must lie in (0, 1], got {saturation_quantile}"),
            ));
        }
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let idx = ((sorted.len() as f64 * saturation_quantile).ceil() as usize).clamp(1, sorted.len()) - 1;
        let sat = sorted[idx];
        Ok(self
            .values
            .iter()
            .map(|&v| {
                if sat > 0.0 {
                    (255.0 * (v / sat).min(1.0)).round() as u8
                } else {
                    0
                }
            })
            .collect())
    }

    /// Binary (P5) PGM export for visual inspection.
    pub fn write_pgm(&self, path: &Path, saturation_quantile: f64) -> Result<()> {
        let gray = self.to_gray8(saturation_quantile)?;
        let file = File::create(path).map_err(|e| Error::at_path(path, e))?;
        let mut out = BufWriter::new(file);
        let res = (|| -> std::io::Result<()> {
            write!(out, "P5\n{} {}\n255\n", self.width(), self.height())?;
            out.write_all(&gray)?;
            out.flush()
        })();
        res.map_err(|e| Error::at_path(path, e))
    }
}
