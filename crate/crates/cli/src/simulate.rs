use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use speckle_core::detector::IntensityMap;
use speckle_core::gabor::{binarize, bit_error_rate, empirical_correlation_gabor, empirical_correlation_intensity, gabor_map, write_bitstring, write_gabor_csv, GaborMap, RobustBitstring};
use speckle_core::propagate::render_intensity;
use speckle_core::rng;
use speckle_core::source::{PerturbationSpec, SpeckleSource};
use speckle_core::theory::PerturbationFactor;

use crate::config::RunConfig;
use crate::{create_dir, io_err, write_file, write_snapshot, CliError};

fn sha256_hex(path: &Path) -> Result<(String, usize), CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok((digest.iter().map(|b| format!("{b:02x}")).collect(), bytes.len()))
}

fn write_set(dir: &Path, map: &IntensityMap, gmap: &GaborMap, bits: &RobustBitstring, quantile: f64) -> Result<Vec<&'static str>, CliError> {
    create_dir(dir)?;
    map.write_binary(&dir.join("intensity.bin"))?;
    map.write_pgm(&dir.join("intensity.pgm"), quantile)?;
    write_gabor_csv(gmap, &dir.join("gabor.csv"))?;
    write_bitstring(bits, &dir.join("bits.bin"))?;
    Ok(vec!["intensity.bin", "intensity.pgm", "gabor.csv", "bits.bin"])
}

/// Renders `simulate.patterns` sources and, per `q` in `simulate.q_list`, a
/// perturbed copy of each; writes every artifact and a manifest of SHA-256
/// hashes.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let ens = cfg.ensemble()?;
    let q_list = cfg.reals("simulate.q_list");
    let quantile = cfg.real("simulate.saturation_quantile");
    let t_over_sigma = cfg.real("gabor.threshold");
    for &q in &q_list {
        PerturbationFactor::new(q).map_err(|e| CliError::Usage(format!("simulate.q_list: {e}")))?;
    }
    create_dir(out)?;
    write_snapshot(cfg, out)?;

    let mut files = vec!["config.ini".to_string()];
    let mut patterns = Vec::new();
    for p in 0..cfg.count("simulate.patterns") {
        let seed = rng::trial_seed(ens.base_seed, p as u64);
        let src = SpeckleSource::new(&ens.geometry, seed);
        let map = render_intensity(&src, &ens.grid, &ens.render)?;
        let gmap = gabor_map(&map, &ens.gabor)?;
        let sigma = (gmap.iter_all().map(|v| v * v).sum::<f64>() / gmap.len() as f64).sqrt();
        let threshold = t_over_sigma * sigma;
        let enrolled = binarize(&gmap, threshold)?;
        let pdir = format!("pattern_{p:03}");
        for f in write_set(&out.join(&pdir).join("base"), &map, &gmap, &enrolled, quantile)? {
            files.push(format!("{pdir}/base/{f}"));
        }
        let mut sets = Vec::new();
        for (qi, &q) in q_list.iter().enumerate() {
            let spec = PerturbationSpec::new(q, rng::derive_seed(seed, rng::DOMAIN_PERTURB, qi as u64))?;
            let moved = render_intensity(&src.perturb(&spec), &ens.grid, &ens.render)?;
            let gm = gabor_map(&moved, &ens.gabor)?;
            let bits = binarize(&gm, threshold)?;
            let sub = format!("q_{q:.4}");
            for f in write_set(&out.join(&pdir).join(&sub), &moved, &gm, &bits, quantile)? {
                files.push(format!("{pdir}/{sub}/{f}"));
            }
            let ber = bit_error_rate(&enrolled, &gm).ok();
            sets.push(json!({
                "q": q,
                "Q": PerturbationFactor::new(q)?.value(),
                "xi_i": empirical_correlation_intensity(&map, &moved)?,
                "xi_g": empirical_correlation_gabor(&gmap, &gm)?.pooled,
                "bit_error_rate": ber,
            }));
        }
        patterns.push(json!({
            "index": p,
            "seed": seed,
            "sigma_g": sigma,
            "threshold": threshold,
            "robust_bits": enrolled.robust_count(),
            "perturbed": sets,
        }));
    }

    let mut listed = Vec::new();
    for f in &files {
        let (hash, bytes) = sha256_hex(&out.join(f))?;
        listed.push(json!({ "path": f, "sha256": hash, "bytes": bytes }));
    }
    let manifest = json!({
        "mean_intensity": ens.geometry.mean_intensity(),
        "speckle_scale_px": ens.speckle_px(),
        "n_regions": ens.geometry.n_regions(),
        "files": listed,
        "patterns": patterns,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&out.join("manifest.json"), text + "\n")?;
    println!("wrote {} files and manifest.json to {}", files.len(), out.display());
    Ok(())
}
