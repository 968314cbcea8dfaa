//! Run configuration: built-in defaults, an optional INI file and
//! `--section.key=value` overrides, resolved and type-checked up front.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ini::Ini;

use speckle_core::detector::DetectorGrid;
use speckle_core::gabor::GaborGrid;
use speckle_core::montecarlo::{DriftConfig, EnsembleConfig, GaborSweep};
use speckle_core::propagate::{RenderMethod, RenderOptions};
use speckle_core::source::{LatticeCentering, SourceGeometry};

use crate::CliError;

/// Environment variable overriding the output root.
pub const OUT_DIR_ENV: &str = "SPECKLE_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Seed,
    Flag,
    Reals,
    Text,
    /// Real that may be left empty.
    OptReal,
}

struct Key {
    section: &'static str,
    key: &'static str,
    kind: Kind,
    default: &'static str,
}

const fn key(section: &'static str, key: &'static str, kind: Kind, default: &'static str) -> Key {
    Key {
        section,
        key,
        kind,
        default,
    }
}

const SCHEMA: &[Key] = &[
    key("geometry", "wavelength", Kind::Real, "7.8e-7"),
    key("geometry", "radius_over_wavelength", Kind::Real, "25.25"),
    key("geometry", "distance", Kind::Real, "0.05"),
    key("geometry", "region_pitch_over_wavelength", Kind::Real, "1"),
    key("geometry", "centering", Kind::Text, "origin"),
    key("grid", "size", Kind::Count, "512"),
    key("grid", "pixels_per_m", Kind::Real, "4"),
    key("gabor", "w_over_m", Kind::Real, "5"),
    key("gabor", "wk", Kind::Real, "1.5"),
    key("gabor", "psi1", Kind::Real, "0"),
    key("gabor", "pitch", Kind::Count, "8"),
    key("gabor", "threshold", Kind::Real, "1"),
    key("ensemble", "trials", Kind::Count, "64"),
    key("ensemble", "seed", Kind::Seed, "2026"),
    key("ensemble", "q_list", Kind::Reals, "0, 0.5, 1, 2, 3.141592653589793"),
    key("ensemble", "t_list", Kind::Reals, "0, 1, 2"),
    key("ensemble", "render", Kind::Text, "fft"),
    key("ensemble", "correlation_offsets", Kind::Reals, "0.5, 1, 2, 3"),
    key("sweep", "w_over_m", Kind::Reals, "0.7, 1.7, 3.3"),
    key("sweep", "wk", Kind::Reals, "0.5, 1, 1.5, 2, 2.5, 3"),
    key("drift", "images", Kind::Count, "24"),
    key("drift", "q_step", Kind::Real, "0.5"),
    key("drift", "noise_over_iav", Kind::Real, "0.5"),
    key("drift", "w_over_m", Kind::Real, "1.7"),
    key("drift", "wk", Kind::Real, "1.5"),
    key("drift", "pitch", Kind::Count, "4"),
    key("noise", "n_over_iav", Kind::Real, "0.5"),
    key("simulate", "patterns", Kind::Count, "1"),
    key("simulate", "q_list", Kind::Reals, ""),
    key("simulate", "saturation_quantile", Kind::Real, "0.999"),
    key("theory", "l", Kind::Real, "800"),
    key("theory", "m", Kind::Real, "3"),
    key("theory", "ell", Kind::Real, "5"),
    key("theory", "t", Kind::Real, "1"),
    key("theory", "sigma", Kind::Real, "1.29"),
    key("theory", "snr_min", Kind::Real, "0.01"),
    key("theory", "snr_max", Kind::Real, "10000"),
    key("theory", "points", Kind::Count, "81"),
    key("theory", "perturbed_snr", Kind::Real, "10"),
    key("theory", "q_points", Kind::Count, "50"),
    key("theory", "t_over_sigma", Kind::Reals, "0, 1, 2"),
    key("theory", "sigma_m", Kind::Real, "5"),
    key("theory", "sigma_w", Kind::Reals, "3.5, 8.5, 16.5"),
    key("theory", "k_max", Kind::Real, "1"),
    key("theory", "c1", Kind::Real, "100"),
    key("theory", "c2", Kind::Real, "7.5"),
    key("validate", "theory_offset_se", Kind::Real, "0"),
    key("analyze", "w", Kind::OptReal, ""),
    key("analyze", "k", Kind::OptReal, ""),
    key("analyze", "psi1", Kind::Real, "0"),
    key("analyze", "pitch", Kind::Count, "8"),
    key("analyze", "bin_width", Kind::Count, "5"),
    key("analyze", "interval", Kind::Real, "1800"),
    key("analyze", "normalize_floor", Kind::Flag, "false"),
    key("analyze", "exclude_saturated", Kind::Flag, "false"),
    key("output", "dir", Kind::Text, "speckle-out"),
];

#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.reason)
    }
}

fn bad(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config(ConfigError {
        key: key.to_string(),
        reason: reason.into(),
    })
}

fn check(kind: Kind, name: &str, value: &str) -> Result<(), CliError> {
    let real = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(name, format!("`{s}` is not a finite number")))
    };
    match kind {
        Kind::Real => real(value).map(|_| ()),
        Kind::OptReal if value.trim().is_empty() => Ok(()),
        Kind::OptReal => real(value).map(|_| ()),
        Kind::Count => value
            .trim()
            .parse::<usize>()
            .map(|_| ())
            .map_err(|_| bad(name, format!("`{value}` is not a non-negative integer"))),
        Kind::Seed => value
            .trim()
            .parse::<u64>()
            .map(|_| ())
            .map_err(|_| bad(name, format!("`{value}` is not a 64-bit unsigned integer"))),
        Kind::Flag => match value.trim() {
            "true" | "false" => Ok(()),
            other => Err(bad(name, format!("`{other}` is not true/false"))),
        },
        Kind::Reals => split_list(value).try_for_each(|s| real(s).map(|_| ())),
        Kind::Text => Ok(()),
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Fully resolved configuration, keyed by `section.key`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn defaults() -> Self {
        Self {
            values: SCHEMA
                .iter()
                .map(|k| (format!("{}.{}", k.section, k.key), k.default.to_string()))
                .collect(),
        }
    }

    /// Defaults, then the file (if any), then the overrides in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = Self::defaults();
        if let Some(path) = file {
            let ini = Ini::load_from_file(path).map_err(|e| match e {
                ini::Error::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
                ini::Error::Parse(p) => bad(&path.display().to_string(), format!("cannot parse INI: {p}")),
            })?;
            for (section, props) in ini.iter() {
                for (k, v) in props.iter() {
                    let name = match section {
                        Some(s) => format!("{s}.{k}"),
                        None => k.to_string(),
                    };
                    cfg.set(&name, v)?;
                }
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<(), CliError> {
        let entry = SCHEMA
            .iter()
            .find(|k| format!("{}.{}", k.section, k.key) == name)
            .ok_or_else(|| bad(name, "unknown key"))?;
        check(entry.kind, name, value)?;
        self.values.insert(name.to_string(), value.trim().to_string());
        Ok(())
    }

    fn raw(&self, name: &str) -> &str {
        self.values.get(name).map(String::as_str).unwrap_or_else(|| panic!("`{name}` is not in the schema"))
    }

    pub fn real(&self, name: &str) -> f64 {
        self.raw(name).parse().expect("checked on insert")
    }

    pub fn opt_real(&self, name: &str) -> Option<f64> {
        let v = self.raw(name);
        (!v.is_empty()).then(|| v.parse().expect("checked on insert"))
    }

    pub fn count(&self, name: &str) -> usize {
        self.raw(name).parse().expect("checked on insert")
    }

    pub fn seed(&self, name: &str) -> u64 {
        self.raw(name).parse().expect("checked on insert")
    }

    pub fn flag(&self, name: &str) -> bool {
        self.raw(name) == "true"
    }

    pub fn reals(&self, name: &str) -> Vec<f64> {
        split_list(self.raw(name)).map(|s| s.parse().expect("checked on insert")).collect()
    }

    pub fn text(&self, name: &str) -> &str {
        self.raw(name)
    }

    /// INI text listing every key; loading it reproduces this configuration.
    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        for k in SCHEMA {
            let name = format!("{}.{}", k.section, k.key);
            ini.with_section(Some(k.section)).set(k.key, self.raw(&name));
        }
        let mut out = Vec::new();
        ini.write_to(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("INI output is UTF-8")
    }

    /// Output root: the `output.dir` key unless the environment overrides it.
    pub fn output_root(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(self.text("output.dir")),
        }
    }

    pub fn geometry(&self) -> Result<SourceGeometry, CliError> {
        let lambda = self.real("geometry.wavelength");
        let centering = LatticeCentering::parse(self.text("geometry.centering")).map_err(|e| bad("geometry.centering", e.to_string()))?;
        SourceGeometry::with_lattice(
            lambda,
            self.real("geometry.radius_over_wavelength") * lambda,
            self.real("geometry.distance"),
            self.real("geometry.region_pitch_over_wavelength") * lambda,
            centering,
        )
        .map_err(|e| bad("geometry", e.to_string()))
    }

    pub fn detector(&self, geometry: &SourceGeometry) -> Result<DetectorGrid, CliError> {
        let ppm = self.real("grid.pixels_per_m");
        if !(ppm > 0.0) {
            return Err(bad("grid.pixels_per_m", "must be positive"));
        }
        DetectorGrid::centered(self.count("grid.size"), geometry.speckle_scale() / ppm).map_err(|e| bad("grid.size", e.to_string()))
    }

    pub fn gabor(&self) -> Result<GaborGrid, CliError> {
        let size = self.count("grid.size");
        let w = self.real("gabor.w_over_m") * self.real("grid.pixels_per_m");
        GaborGrid::fitted(
            w,
            self.real("gabor.wk") / w,
            self.real("gabor.psi1"),
            self.count("gabor.pitch"),
            size,
            size,
        )
        .map_err(|e| bad("gabor", e.to_string()))
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig, CliError> {
        let geometry = self.geometry()?;
        let grid = self.detector(&geometry)?;
        let gabor = self.gabor()?;
        let mut cfg = EnsembleConfig::new(geometry, grid, gabor, self.count("ensemble.trials"), self.seed("ensemble.seed"))
            .map_err(|e| bad("ensemble", e.to_string()))?;
        cfg.q_list = self.reals("ensemble.q_list");
        cfg.t_list = self.reals("ensemble.t_list");
        cfg.correlation_offsets = self.reals("ensemble.correlation_offsets");
        cfg.render = RenderOptions::method(
            RenderMethod::parse(self.text("ensemble.render")).map_err(|e| bad("ensemble.render", e.to_string()))?,
        );
        cfg.sweep = GaborSweep {
            w_over_m: self.reals("sweep.w_over_m"),
            wk: self.reals("sweep.wk"),
        };
        cfg.drift = DriftConfig {
            images: self.count("drift.images"),
            q_step: self.real("drift.q_step"),
            noise_over_iav: self.real("drift.noise_over_iav"),
            w_over_m: self.real("drift.w_over_m"),
            wk: self.real("drift.wk"),
            pitch: self.count("drift.pitch"),
        };
        cfg.validate().map_err(|e| bad("ensemble", e.to_string()))?;
        Ok(cfg)
    }
}

/// Splits `--section.key=value` arguments from the rest of the command line.
pub fn extract_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for a in args {
        let parsed = a.strip_prefix("--").and_then(|s| s.split_once('=')).filter(|(k, _)| {
            k.split_once('.')
                .is_some_and(|(s, k)| !s.is_empty() && !k.is_empty() && !k.contains('.'))
        });
        match parsed {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => rest.push(a),
        }
    }
    (rest, overrides)
}
