use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::json;

use speckle_core::gabor::GaborGrid;
use speckle_core::ingest::{drift_analysis, gray_histogram_with, load_pgm, normalize_floor, DriftSequence, GrayImage};

use crate::config::RunConfig;
use crate::{create_dir, io_err, write_file, write_snapshot, CliError};

fn stem(path: &Path, index: usize) -> String {
    let s = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    format!("{index:03}_{s}")
}

/// Histogram per image; with two or more images also the pairwise
/// correlation scatter and its regression.
pub fn run(cfg: &RunConfig, paths: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut images: Vec<GrayImage> = Vec::with_capacity(paths.len());
    for p in paths {
        let img = load_pgm(p)?;
        images.push(if cfg.flag("analyze.normalize_floor") { normalize_floor(&img) } else { img });
    }
    let grid = if images.len() >= 2 {
        let (w, k) = match (cfg.opt_real("analyze.w"), cfg.opt_real("analyze.k")) {
            (Some(w), Some(k)) => (w, k),
            _ => {
                return Err(CliError::Usage(
                    "drift analysis needs the Gabor width and wave number: pass --w and --k (or analyze.w / analyze.k)".into(),
                ))
            }
        };
        let (wd, ht) = (images[0].width(), images[0].height());
        Some(GaborGrid::fitted(w, k, cfg.real("analyze.psi1"), cfg.count("analyze.pitch"), wd, ht)?)
    } else {
        None
    };

    create_dir(out)?;
    write_snapshot(cfg, out)?;
    let bin_width = cfg.count("analyze.bin_width");
    let mut summaries = Vec::new();
    for (i, (img, path)) in images.iter().zip(paths).enumerate() {
        let h = gray_histogram_with(img, bin_width, cfg.flag("analyze.exclude_saturated"))?;
        let name = format!("histogram_{}.csv", stem(path, i));
        let p = out.join(&name);
        h.write_csv(BufWriter::new(File::create(&p).map_err(|e| io_err(&p, e))?))?;
        summaries.push(json!({
            "path": path.display().to_string(),
            "histogram": name,
            "width": img.width(),
            "height": img.height(),
            "mean_gray": h.mean,
            "ks_distance_to_exponential": h.ks_distance,
            "saturated_pixels": h.saturated,
        }));
        println!("{}: mean gray {:.3}, KS to exponential {:.4}, {} saturated", path.display(), h.mean, h.ks_distance, h.saturated);
    }

    let mut meta = json!({ "images": summaries });
    if let Some(grid) = grid {
        let seq = DriftSequence::uniform(images, cfg.real("analyze.interval"))?;
        let res = drift_analysis(&seq, &grid)?;
        let p = out.join("scatter.csv");
        res.write_scatter_csv(BufWriter::new(File::create(&p).map_err(|e| io_err(&p, e))?))?;
        let r = &res.analysis.regression;
        println!(
            "{} pairs; Xi_G = {:.4} Xi_I + {:.4} (slope se {:.4})",
            res.analysis.rows.len(),
            r.slope,
            r.intercept,
            r.slope_se
        );
        meta["drift"] = json!({
            "gabor": res.gabor,
            "timestamps": res.timestamps,
            "saturated": res.saturated,
            "regression": res.analysis.regression,
            "pairs": res.analysis.rows.len(),
        });
    }
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&out.join("analysis.json"), text + "\n")
}
