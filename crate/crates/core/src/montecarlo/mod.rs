//! Monte-Carlo ensembles of simulated speckle patterns compared against the
//! closed-form statistics in [`crate::theory`].
//!
//! Every trial derives its own seed from `(base_seed, trial)`, trials run in
//! parallel and results are reduced in trial order, so reports do not depend
//! on the number of worker threads.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::DetectorGrid;
use crate::error::{Error, Result};
use crate::gabor::GaborGrid;
use crate::propagate::{render_intensity, RenderOptions};
use crate::rng;
use crate::source::{SourceGeometry, SpeckleSource};
use crate::theory::NoiseParams;

mod drift;
mod gabor_suite;
mod intensity;
mod mi;
mod perturbation;

pub use drift::{drift_analysis_fields, regression, simulate_drift_sequence, DriftAnalysis, DriftRow, Regression};
pub use gabor_suite::run_gabor_suite;
pub use intensity::run_intensity_suite;
pub use mi::run_mi_consistency;
pub use perturbation::run_perturbation_suite;

/// Version tag of the JSON report layout.
pub const REPORT_SCHEMA: &str = "speckle-report/1";

/// Pass threshold on `|z|` for statistical rows.
pub const Z_PASS: f64 = 3.0;

/// Window sizes and frequencies of the Gabor-statistics sweep, in units of
/// the speckle scale `M` (pixels).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaborSweep {
    pub w_over_m: Vec<f64>,
    pub wk: Vec<f64>,
}

impl Default for GaborSweep {
    fn default() -> Self {
        Self {
            w_over_m: vec![0.7, 1.7, 3.3],
            wk: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }
}

/// Simulated drift: each frame perturbs the previous source by `q_step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriftConfig {
    pub images: usize,
    pub q_step: f64,
    /// Detector noise amplitude in units of `I_av` for the noisy variant.
    pub noise_over_iav: f64,
    /// Gabor lattice for the scatter: width in units of `M`, `w k`, spacing in pixels.
    pub w_over_m: f64,
    pub wk: f64,
    pub pitch: usize,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            images: 24,
            q_step: 0.5,
            noise_over_iav: 0.5,
            w_over_m: 1.7,
            wk: 1.5,
            pitch: 4,
        }
    }
}

/// Everything a validation suite needs to run.
#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub geometry: SourceGeometry,
    pub grid: DetectorGrid,
    pub gabor: GaborGrid,
    pub trials: usize,
    pub base_seed: u64,
    pub q_list: Vec<f64>,
    /// Thresholds in units of the empirical `sigma_G`.
    pub t_list: Vec<f64>,
    pub render: RenderOptions,
    pub sweep: GaborSweep,
    /// Separations `r / M` for the intensity correlation.
    pub correlation_offsets: Vec<f64>,
    pub drift: DriftConfig,
}

impl EnsembleConfig {
    pub fn new(geometry: SourceGeometry, grid: DetectorGrid, gabor: GaborGrid, trials: usize, base_seed: u64) -> Result<Self> {
        let cfg = Self {
            geometry,
            grid,
            gabor,
            trials,
            base_seed,
            q_list: vec![0.0, 0.5, 1.0, 2.0, PI],
            t_list: vec![0.0, 1.0, 2.0],
            render: RenderOptions::default(),
            sweep: GaborSweep::default(),
            correlation_offsets: vec![0.5, 1.0, 2.0, 3.0],
            drift: DriftConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Desk-scale defaults: about 2000 source regions, a 512^2 detector with
    /// four pixels per speckle scale, and a Gabor lattice at `w = 5 M`,
    /// `wk = 1.5`.
    pub fn desk_scale(trials: usize, base_seed: u64) -> Result<Self> {
        let lambda = 780e-9;
        let geometry = SourceGeometry::new(lambda, 25.25 * lambda, 0.05)?;
        let m_px = 4.0;
        let size = 512;
        let grid = DetectorGrid::centered(size, geometry.speckle_scale() / m_px)?;
        let w = 5.0 * m_px;
        let gabor = GaborGrid::fitted(w, 1.5 / w, 0.0, 8, size, size)?;
        Self::new(geometry, grid, gabor, trials, base_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::param("trials", format!("need at least 2, got {}", self.trials)));
        }
        if let Some(q) = self.q_list.iter().find(|q| !(0.0..=PI).contains(*q)) {
            return Err(Error::param("q_list", format!("{q} is outside [0, pi]")));
        }
        if let Some(t) = self.t_list.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::param("t_list", format!("threshold {t} must be finite and >= 0")));
        }
        if self.drift.images < 2 {
            return Err(Error::param("drift.images", "need at least 2 frames"));
        }
        if !(0.0..=PI).contains(&self.drift.q_step) {
            return Err(Error::param("drift.q_step", "must lie in [0, pi]"));
        }
        self.drift_gabor()?;
        self.gabor.check_fits(self.grid.width(), self.grid.height())
    }

    /// Gabor lattice used for the drift scatter.
    pub fn drift_gabor(&self) -> Result<GaborGrid> {
        let d = &self.drift;
        let w = d.w_over_m * self.speckle_px();
        GaborGrid::fitted(w, d.wk / w, 0.0, d.pitch, self.grid.width(), self.grid.height())
    }

    /// Speckle scale `M` in pixels.
    pub fn speckle_px(&self) -> f64 {
        self.geometry.speckle_scale() / self.grid.pixel_pitch()
    }

    /// Effective independent samples in one frame, `n_pixels / (pi M^2)`.
    pub fn n_eff_per_frame(&self) -> f64 {
        (self.grid.len() as f64 / (PI * self.speckle_px().powi(2))).max(1.0)
    }

    pub(crate) fn source(&self, trial: usize) -> SpeckleSource {
        SpeckleSource::new(&self.geometry, rng::trial_seed(self.base_seed, trial as u64))
    }

    pub(crate) fn render(&self, source: &SpeckleSource) -> Result<crate::detector::IntensityMap> {
        render_intensity(source, &self.grid, &self.render)
    }

    /// Noise parameters for a noise amplitude given in units of `I_av`.
    pub fn noise(&self, n_over_iav: f64) -> Result<NoiseParams> {
        NoiseParams::new(n_over_iav * self.geometry.mean_intensity(), 1.0)
    }
}

/// Effective independent coefficients of one Gabor map: the lattice area
/// over the speckle correlation area, at most the number of coefficients.
pub(crate) fn lattice_n_eff(grid: &GaborGrid, m_px: f64) -> f64 {
    let area = (grid.extent() as f64).powi(2) / (PI * m_px * m_px);
    area.min(2.0 * grid.n_points() as f64).max(1.0)
}

/// Independent Gaussian samples with standard deviation `sd`.
pub(crate) fn white_noise(len: usize, sd: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| sd * r.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// Runs `f(trial)` for every trial in parallel; results come back in trial order.
pub(crate) fn per_trial<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

/// Neumaier-compensated sum in slice order.
pub(crate) fn stable_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean and standard error of independent per-trial values.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = stable_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = stable_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ratio `sum(a)/sum(b)` of per-trial totals with a delta-method standard error.
pub(crate) fn ratio_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let sa = stable_sum(a.iter().copied());
    let sb = stable_sum(b.iter().copied());
    let r = sa / sb;
    let mb = sb / n;
    let var = stable_sum(a.iter().zip(b).map(|(x, y)| (x - r * y).powi(2))) / (n - 1.0);
    (r, (var / n).sqrt() / mb)
}

/// One empirical estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    pub n_eff: f64,
}

impl EstimatorResult {
    pub fn new(name: impl Into<String>, value: f64, std_error: f64, n_eff: f64) -> Self {
        Self {
            name: name.into(),
            value,
            std_error: std_error.max(0.0),
            n_eff: n_eff.max(1.0),
        }
    }

    /// A deterministic value with no sampling error.
    pub fn exact(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, 0.0, 1.0)
    }
}

/// How a row is judged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// `|empirical - theoretical| <= max * std_error`.
    ZScore { max: f64 },
    /// `|empirical / theoretical - 1| <= tol`.
    Relative { tol: f64 },
    /// `|empirical - theoretical| <= tol`.
    Absolute { tol: f64 },
    /// `empirical - theoretical >= min_z * std_error`.
    Exceeds { min_z: f64 },
    /// Reported only; does not affect the verdict.
    Diagnostic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

/// One comparison between an estimate and a prediction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub quantity: String,
    /// Theory routine that produced the prediction.
    pub operation: String,
    /// Closed form or identity being tested.
    pub formula: String,
    pub empirical: EstimatorResult,
    pub theoretical: f64,
    pub z_score: Option<f64>,
    pub criterion: Criterion,
    pub verdict: Verdict,
}

impl ReportRow {
    pub fn new(
        quantity: impl Into<String>,
        operation: impl Into<String>,
        formula: impl Into<String>,
        empirical: EstimatorResult,
        theoretical: f64,
        criterion: Criterion,
    ) -> Self {
        let diff = empirical.value - theoretical;
        let z_score = (empirical.std_error > 0.0).then(|| diff / empirical.std_error);
        let ok = match criterion {
            Criterion::ZScore { max } => match z_score {
                Some(z) => z.abs() <= max,
                None => diff == 0.0,
            },
            Criterion::Relative { tol } => (empirical.value / theoretical - 1.0).abs() <= tol,
            Criterion::Absolute { tol } => diff.abs() <= tol,
            Criterion::Exceeds { min_z } => match z_score {
                Some(z) => z >= min_z,
                None => diff > 0.0,
            },
            Criterion::Diagnostic => true,
        };
        let verdict = match (criterion, ok) {
            (Criterion::Diagnostic, _) => Verdict::Info,
            (_, true) => Verdict::Pass,
            (_, false) => Verdict::Fail,
        };
        Self {
            quantity: quantity.into(),
            operation: operation.into(),
            formula: formula.into(),
            empirical,
            theoretical,
            z_score,
            criterion,
            verdict,
        }
    }
}

/// A pair of patterns in a perturbation or drift scatter plot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub label: String,
    pub xi_i: f64,
    pub xi_g: [f64; 2],
    pub xi_g_pooled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub suite: String,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
    pub scatter: Vec<ScatterPoint>,
}

impl ComparisonReport {
    pub fn new(suite: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            rows: Vec::new(),
            notes: Vec::new(),
            scatter: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    /// True iff no row failed.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    /// Appends the multiple-comparison note for the statistical rows.
    pub(crate) fn finish(mut self) -> Self {
        let n = self
            .rows
            .iter()
            .filter(|r| matches!(r.criterion, Criterion::ZScore { .. } | Criterion::Exceeds { .. }))
            .count();
        if n > 0 {
            let p_any = 1.0 - (1.0 - 0.0027f64).powi(n as i32);
            self.notes.push(format!(
                "{n} rows use a |z| <= {Z_PASS} rule (0.27% false alarms each); chance of at least one false alarm under the null is {:.1}%",
                100.0 * p_any
            ));
        }
        self
    }

    pub fn merge(reports: Vec<ComparisonReport>, suite: impl Into<String>) -> Self {
        let mut out = ComparisonReport::new(suite);
        for r in reports {
            out.rows.extend(r.rows);
            out.notes.extend(r.notes);
            out.scatter.extend(r.scatter);
        }
        out
    }

    /// RFC-4180 CSV, one line per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "suite",
            "quantity",
            "operation",
            "formula",
            "empirical",
            "std_error",
            "n_eff",
            "theoretical",
            "z_score",
            "criterion",
            "verdict",
        ])?;
        for r in &self.rows {
            let criterion = match r.criterion {
                Criterion::ZScore { max } => format!("|z|<={max}"),
                Criterion::Relative { tol } => format!("rel<={tol}"),
                Criterion::Absolute { tol } => format!("abs<={tol}"),
                Criterion::Exceeds { min_z } => format!("z>={min_z}"),
                Criterion::Diagnostic => "diagnostic".to_string(),
            };
            let verdict = match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::Info => "info",
            };
            w.write_record([
                self.suite.clone(),
                r.quantity.clone(),
                r.operation.clone(),
                r.formula.clone(),
                format!("{:e}", r.empirical.value),
                format!("{:e}", r.empirical.std_error),
                format!("{:.1}", r.empirical.n_eff),
                format!("{:e}", r.theoretical),
                r.z_score.map(|z| format!("{z:.3}")).unwrap_or_default(),
                criterion,
                verdict.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Scatter points as CSV (`label, Xi_I, Xi_G_dir1, Xi_G_dir2, Xi_G_pooled`).
    pub fn write_scatter_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label", "Xi_I", "Xi_G_dir1", "Xi_G_dir2", "Xi_G_pooled"])?;
        for p in &self.scatter {
            w.write_record([
                p.label.clone(),
                format!("{:e}", p.xi_i),
                format!("{:e}", p.xi_g[0]),
                format!("{:e}", p.xi_g[1]),
                format!("{:e}", p.xi_g_pooled),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": REPORT_SCHEMA,
            "suite": self.suite,
            "passed": self.passed(),
            "rows": self.rows,
            "notes": self.notes,
            "scatter": self.scatter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(stable_sum(xs), 2.0);
    }

    #[test]
    fn mean_and_ratio_errors() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let (r, se) = ratio_se(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]);
        assert_eq!(r, 0.5);
        assert!(se.abs() < 1e-15);
    }

    #[test]
    fn row_verdicts() {
        let e = EstimatorResult::new("x", 1.1, 0.05, 10.0);
        let r = ReportRow::new("x", "op", "f", e.clone(), 1.0, Criterion::ZScore { max: 3.0 });
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.z_score.unwrap() - 2.0).abs() < 1e-12);
        let r = ReportRow::new("x", "op", "f", e.clone(), 0.8, Criterion::ZScore { max: 3.0 });
        assert_eq!(r.verdict, Verdict::Fail);
        let r = ReportRow::new("x", "op", "f", e.clone(), 1.0, Criterion::Relative { tol: 0.05 });
        assert_eq!(r.verdict, Verdict::Fail);
        let r = ReportRow::new("x", "op", "f", e.clone(), 0.0, Criterion::Exceeds { min_z: 3.0 });
        assert_eq!(r.verdict, Verdict::Pass);
        let r = ReportRow::new("x", "op", "f", e, 5.0, Criterion::Diagnostic);
        assert_eq!(r.verdict, Verdict::Info);
        let exact = EstimatorResult::exact("y", 1.0);
        let r = ReportRow::new("y", "op", "f", exact, 1.0, Criterion::ZScore { max: 3.0 });
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn report_outputs() {
        let mut rep = ComparisonReport::new("demo");
        rep.push(ReportRow::new(
            "mean, \"quoted\"",
            "op",
            "f",
            EstimatorResult::new("m", 1.0, 0.1, 4.0),
            1.0,
            Criterion::ZScore { max: 3.0 },
        ));
        let rep = rep.finish();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("suite,quantity,"));
        assert!(text.contains("\"mean, \"\"quoted\"\"\""));
        let j = rep.to_json();
        assert_eq!(j["schema"], REPORT_SCHEMA);
        assert_eq!(j["passed"], true);
        assert_eq!(j["rows"][0]["criterion"]["kind"], "z_score");
        assert_eq!(rep.notes.len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EnsembleConfig::desk_scale(2, 1).unwrap();
        assert!((cfg.speckle_px() - 4.0).abs() < 1e-12);
        assert!(EnsembleConfig::desk_scale(1, 1).is_err());
        cfg.q_list.push(4.0);
        assert!(cfg.validate().is_err());
    }
}
