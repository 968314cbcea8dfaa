use speckle_core::detector::DetectorGrid;
use speckle_core::gabor::GaborGrid;
use speckle_core::montecarlo::*;
use speckle_core::source::{PerturbationSpec, SourceGeometry, SpeckleSource};

fn small(trials: usize, seed: u64) -> EnsembleConfig {
    let lambda = 780e-9;
    let geometry = SourceGeometry::new(lambda, 8.25 * lambda, 0.05).unwrap();
    let m_px = 4.0;
    let grid = DetectorGrid::centered(96, geometry.speckle_scale() / m_px).unwrap();
    let gabor = GaborGrid::fitted(1.7 * m_px, 1.5 / (1.7 * m_px), 0.0, 4, 96, 96).unwrap();
    let mut cfg = EnsembleConfig::new(geometry, grid, gabor, trials, seed).unwrap();
    cfg.sweep = GaborSweep {
        w_over_m: vec![0.7, 1.7],
        wk: vec![1.0, 2.0],
    };
    cfg.q_list = vec![0.0, 1.0];
    cfg.t_list = vec![0.0, 1.0];
    cfg.drift.images = 4;
    cfg
}

fn all_suites(cfg: &EnsembleConfig) -> Vec<serde_json::Value> {
    let noise = cfg.noise(0.5).unwrap();
    vec![
        run_intensity_suite(cfg).unwrap().to_json(),
        run_gabor_suite(cfg).unwrap().to_json(),
        run_perturbation_suite(cfg).unwrap().to_json(),
        run_mi_consistency(cfg, &noise).unwrap().to_json(),
    ]
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let cfg = small(3, 99);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| all_suites(&cfg))
    };
    let one = run(1);
    let four = run(4);
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(serde_json::to_string(a).unwrap(), serde_json::to_string(b).unwrap());
    }
}

#[test]
fn different_seeds_give_different_reports() {
    let a = run_intensity_suite(&small(3, 1)).unwrap().to_json();
    let b = run_intensity_suite(&small(3, 2)).unwrap().to_json();
    assert_ne!(a, b);
}

#[test]
fn standard_errors_shrink_with_trials() {
    let se = |trials: usize| {
        let rep = run_intensity_suite(&small(trials, 5)).unwrap();
        rep.rows
            .iter()
            .filter(|r| r.quantity.starts_with("mean intensity"))
            .map(|r| r.empirical.std_error)
            .next()
            .unwrap()
    };
    let ratio = se(240) / se(120);
    assert!((0.6..=0.85).contains(&ratio), "SE ratio {ratio}");
}

#[test]
fn perturbed_phasors_average_to_sinc() {
    let geometry = SourceGeometry::new(780e-9, 60.25 * 780e-9, 0.05).unwrap();
    let src = SpeckleSource::new(&geometry, 3);
    for q in [0.3, 1.0, 2.5] {
        let moved = src.perturb(&PerturbationSpec::new(q, 17).unwrap());
        let n = geometry.n_regions() as f64;
        let mean = src
            .phasors()
            .iter()
            .zip(moved.phasors())
            .map(|(a, b)| b * a.conj())
            .sum::<num_complex::Complex64>()
            / n;
        let expected = q.sin() / q;
        // each term has unit modulus, so the mean has spread below 1/sqrt(n)
        assert!((mean.re - expected).abs() < 4.0 / n.sqrt(), "q = {q}: {mean} vs {expected}");
        assert!(mean.im.abs() < 4.0 / n.sqrt());
    }
}

#[test]
fn forced_theory_offset_fails_the_row() {
    let rep = run_intensity_suite(&small(4, 8)).unwrap();
    let row = rep.rows.iter().find(|r| r.quantity.starts_with("mean intensity")).unwrap();
    let shifted = ReportRow::new(
        row.quantity.clone(),
        row.operation.clone(),
        row.formula.clone(),
        row.empirical.clone(),
        row.empirical.value + 10.0 * row.empirical.std_error,
        Criterion::ZScore { max: Z_PASS },
    );
    assert_eq!(shifted.verdict, Verdict::Fail);
}
