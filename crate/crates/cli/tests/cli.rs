use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[geometry]
radius_over_wavelength = 8.25
[grid]
size = 96
[gabor]
w_over_m = 2
pitch = 4
[ensemble]
trials = 24
q_list = 0, 1
t_list = 0, 1
[drift]
images = 4
[simulate]
patterns = 2
";

fn speckle(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("small.ini");
    if !cfg.exists() {
        std::fs::write(&cfg, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_speckle"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env_remove("SPECKLE_OUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn simulate_is_reproducible_and_sweeps_q() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = speckle(d.path(), &["simulate", "--q-sweep", "0.5, 1"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &tempfile::TempDir| {
        let text = std::fs::read_to_string(d.path().join("out/simulate/manifest.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap()
    };
    let (ma, mb) = (read(&a), read(&b));
    // config.ini records the output root, which differs between the two runs
    assert_eq!(ma["patterns"], mb["patterns"]);
    assert_eq!(ma["files"].as_array().unwrap()[1..], mb["files"].as_array().unwrap()[1..]);
    let pats = ma["patterns"].as_array().unwrap();
    assert_eq!(pats.len(), 2);
    for p in pats {
        assert_eq!(p["perturbed"].as_array().unwrap().len(), 2);
    }
    for sub in ["base", "q_0.5000", "q_1.0000"] {
        assert!(a.path().join("out/simulate/pattern_001").join(sub).join("bits.bin").exists());
    }
}

#[test]
fn rerun_from_snapshot_is_bit_identical() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&speckle(d.path(), &["simulate"])), 0);
    let dir = d.path().join("out/simulate");
    let first = std::fs::read(dir.join("manifest.json")).unwrap();
    let snap = d.path().join("snapshot.ini");
    std::fs::copy(dir.join("config.ini"), &snap).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_speckle"))
        .arg("--config")
        .arg(&snap)
        .arg("simulate")
        .env_remove("SPECKLE_OUT_DIR")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first, std::fs::read(dir.join("manifest.json")).unwrap());
}

#[test]
fn theory_curves_are_written() {
    let d = tempfile::tempdir().unwrap();
    for (fig, rows) in [("fig1", 7), ("fig3", 6), ("fig4", 6), ("fig5", 7)] {
        let o = speckle(d.path(), &["theory", fig, "--theory.points=7", "--theory.q_points=6"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let t = read_csv(&d.path().join(format!("out/theory/{fig}.csv")));
        assert_eq!(t.len(), rows, "{fig}");
        for r in &t {
            for v in r {
                assert!(v.parse::<f64>().unwrap().is_finite(), "{fig}: {v}");
            }
        }
    }
    assert!(d.path().join("out/theory/config.ini").exists());
}

#[test]
fn custom_mi_with_zero_snr_is_zero() {
    let d = tempfile::tempdir().unwrap();
    let o = speckle(d.path(), &["theory", "custom", "--theory.c1=0"]);
    assert_eq!(code(&o), 0);
    let t = read_csv(&d.path().join("out/theory/custom.csv"));
    assert_eq!(t.len(), 4);
    for r in t {
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0, "{}", r[0]);
        assert_eq!(r[5].parse::<f64>().unwrap(), 0.0, "{}", r[0]);
    }
}

#[test]
fn validate_passes_and_offset_theory_fails() {
    let d = tempfile::tempdir().unwrap();
    let o = speckle(d.path(), &["validate", "intensity"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let dir = d.path().join("out/validate/intensity");
    for f in ["report.json", "report.csv", "scatter.csv", "config.ini"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let o = speckle(d.path(), &["validate", "intensity", "--validate.theory_offset_se=10"]);
    assert_eq!(code(&o), 1);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["rows"].as_array().unwrap().iter().any(|r| r["verdict"] == "fail"));
}

#[test]
fn analyze_images_histograms_and_scatter() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&speckle(d.path(), &["simulate", "--q-sweep", "0.5, 1"])), 0);
    let p = d.path().join("out/simulate/pattern_000");
    let imgs: Vec<String> = ["base", "q_0.5000", "q_1.0000"]
        .iter()
        .map(|s| p.join(s).join("intensity.pgm").display().to_string())
        .collect();

    let o = speckle(d.path(), &["analyze-images", &imgs[0]]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out/analyze");
    assert!(out.join("histogram_000_intensity.csv").exists());
    assert!(!out.join("scatter.csv").exists());

    let mut args = vec!["analyze-images", "--w", "10", "--k", "0.15", "--pitch", "4"];
    args.extend(imgs.iter().map(String::as_str));
    let o = speckle(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("scatter.csv"));
    assert_eq!(rows.len(), 3);
    assert!(out.join("histogram_002_intensity.csv").exists());
    assert!(out.join("analysis.json").exists());

    let o = speckle(d.path(), &["analyze-images", &imgs[0], &imgs[1]]);
    assert_eq!(code(&o), 2, "missing w/k");
}

#[test]
fn error_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&speckle(d.path(), &["no-such-command"])), 2);
    assert_eq!(code(&speckle(d.path(), &["theory", "custom", "--theory.bogus=1"])), 2);
    assert_eq!(code(&speckle(d.path(), &["theory", "custom", "--theory.c1=abc"])), 2);
    let o = speckle(d.path(), &["analyze-images", "missing.pgm"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.pgm"));
    let o = Command::new(env!("CARGO_BIN_EXE_speckle"))
        .args(["--config", "/no/such/file.ini", "theory", "custom"])
        .output()
        .unwrap();
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/file.ini"));
}
