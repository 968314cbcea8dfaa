use std::f64::consts::{LN_2, PI};
use std::path::Path;

use speckle_core::theory::{
    bit_error_probability, mi_detector, mi_perturbed, sigma_g_sq, BitErrorMethod, GaborStatParams, MiMethod, MiParams,
    PerturbationFactor, PerturbedMiMethod,
};

use crate::config::RunConfig;
use crate::{create_dir, io_err, write_snapshot, CliError, Figure};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(|v| v.to_string()).collect());
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let fail = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(&self.header).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn q_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| PI * i as f64 / n as f64).collect()
}

fn bits_per_speckle(r: &speckle_core::theory::MiResult, p: &MiParams) -> f64 {
    r.per_speckle(p) / LN_2
}

fn mi_params(cfg: &RunConfig, snr: f64) -> Result<MiParams, CliError> {
    Ok(MiParams::from_physical(
        cfg.real("theory.l"),
        cfg.real("theory.ell"),
        cfg.real("theory.m"),
        cfg.real("theory.sigma"),
        snr,
        cfg.real("theory.t"),
    )?)
}

fn fig1(cfg: &RunConfig) -> Result<Table, CliError> {
    let (lo, hi) = (cfg.real("theory.snr_min"), cfg.real("theory.snr_max"));
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Usage("theory.snr_min/snr_max: need 0 < snr_min < snr_max".into()));
    }
    let mut t = Table::new([
        "I_av/N_I",
        "y = c1 exp(-c2 pi^2/ell^2)",
        "MI bits/speckle: momentum sum 1/2 sum_p ln(1 + c1 exp(-c2 p^2))",
        "MI bits/speckle: dilogarithm closed form",
        "MI bits/speckle: large-SNR limit",
        "MI bits/speckle: small-SNR limit",
    ]);
    for snr in log_grid(lo, hi, cfg.count("theory.points")) {
        let p = mi_params(cfg, snr)?;
        let v = |m| bits_per_speckle(&mi_detector(&p, m), &p);
        t.push([snr, p.y(), v(MiMethod::ExactSum), v(MiMethod::Dilog), v(MiMethod::LargeSnr), v(MiMethod::SmallSnr)]);
    }
    Ok(t)
}

fn fig3(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = mi_params(cfg, cfg.real("theory.perturbed_snr"))?;
    let mut t = Table::new([
        "q",
        "Q = sin^2 q / q^2",
        "perturbed MI bits/speckle: dilogarithm form",
        "perturbed MI bits/speckle: log-determinant momentum sum",
    ]);
    for q in q_grid(cfg.count("theory.q_points")) {
        let f = PerturbationFactor::new(q)?;
        t.push([
            q,
            f.value(),
            bits_per_speckle(&mi_perturbed(&p, &f, PerturbedMiMethod::Dilog), &p),
            bits_per_speckle(&mi_perturbed(&p, &f, PerturbedMiMethod::Determinant), &p),
        ]);
    }
    Ok(t)
}

fn fig4(cfg: &RunConfig) -> Result<Table, CliError> {
    let ts = cfg.reals("theory.t_over_sigma");
    let mut header = vec!["q".to_string(), "Q = sin^2 q / q^2".to_string(), "arccos(Q)/pi".to_string()];
    header.extend(ts.iter().map(|t| format!("P(bit flip), T/sigma_G = {t}, Gaussian quadrature")));
    let mut t = Table::new(header);
    for q in q_grid(cfg.count("theory.q_points")) {
        let f = PerturbationFactor::new(q)?;
        let mut row = vec![q, f.value(), f.value().acos() / PI];
        for &th in &ts {
            row.push(bit_error_probability(th, &f, BitErrorMethod::Quadrature)?.probability);
        }
        t.push(row);
    }
    Ok(t)
}

fn fig5(cfg: &RunConfig) -> Result<Table, CliError> {
    let ws = cfg.reals("theory.sigma_w");
    let m = cfg.real("theory.sigma_m");
    let n = cfg.count("theory.points").max(2);
    let k_max = cfg.real("theory.k_max");
    let mut header = vec!["k (rad/px)".to_string()];
    header.extend(ws.iter().map(|w| format!("sigma_G/I_av, w = {w} px, M = {m} px")));
    let mut t = Table::new(header);
    for i in 0..n {
        let k = k_max * i as f64 / (n - 1) as f64;
        let mut row = vec![k];
        for &w in &ws {
            let p = GaborStatParams::with_sigma(w, k, m, 1.0, cfg.real("theory.sigma"))?;
            row.push(sigma_g_sq(&p).sqrt());
        }
        t.push(row);
    }
    Ok(t)
}

fn custom(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = MiParams::new(cfg.real("theory.l"), cfg.real("theory.ell"), cfg.real("theory.c1"), cfg.real("theory.c2"))?;
    let mut t = Table::new(["method", "c1", "c2", "y", "MI nats", "MI bits", "regime warning"]);
    for m in [MiMethod::ExactSum, MiMethod::Dilog, MiMethod::LargeSnr, MiMethod::SmallSnr] {
        let r = mi_detector(&p, m);
        t.rows.push(vec![
            m.as_str().to_string(),
            p.c1.to_string(),
            p.c2.to_string(),
            r.y.to_string(),
            r.nats.to_string(),
            r.bits().to_string(),
            r.regime_warning.clone().unwrap_or_default(),
        ]);
    }
    Ok(t)
}

pub fn run(cfg: &RunConfig, figure: Figure, out: &Path) -> Result<(), CliError> {
    let (name, table) = match figure {
        Figure::Fig1 => ("fig1", fig1(cfg)?),
        Figure::Fig3 => ("fig3", fig3(cfg)?),
        Figure::Fig4 => ("fig4", fig4(cfg)?),
        Figure::Fig5 => ("fig5", fig5(cfg)?),
        Figure::Custom => ("custom", custom(cfg)?),
    };
    create_dir(out)?;
    write_snapshot(cfg, out)?;
    let path = out.join(format!("{name}.csv"));
    table.write(&path)?;
    println!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}
