//! Single experiments: run a module pipeline, write its series and a
//! manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ptkr_core::classical::{
    default_fit_window, detect_threshold_time, evolve_ensemble, fit_diffusion, threshold_time_tc,
};
use ptkr_core::otoc::otoc_series;
use ptkr_core::quantum::{
    angular_distribution, evolve, init_gaussian_state, init_uniform_state, momentum_distribution,
    FloquetPropagator,
};
use ptkr_core::spectrum::{find_lambda_c, floquet_spectrum, is_pt_broken, DEFAULT_PT_TOL};
use ptkr_core::{EnsembleConfig, SystemParams};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, InitialState, Kind};
use crate::error::{CliError, Result};
use crate::table::{write_atomic, Table};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub kind: Kind,
    pub config: std::collections::BTreeMap<String, String>,
    pub config_hash: String,
    pub version: String,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
    /// Fitted and detected quantities; `null` where unavailable.
    pub derived: Map<String, Value>,
    pub warnings: Vec<String>,
    pub status: String,
    pub error: Option<String>,
}

/// Series and derived quantities of one run, before anything is written.
pub(crate) struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub derived: Map<String, Value>,
    pub warnings: Vec<String>,
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(crate::table::format_float(v))
    }
}

fn params(cfg: &ExperimentConfig) -> Result<SystemParams> {
    Ok(SystemParams::new(cfg.k, cfg.lambda, cfg.hbar)?
        .with_guards(cfg.p_clamp, cfg.theta_i_guard)?)
}

fn classical(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let ens = EnsembleConfig::new(cfg.n_traj, cfg.seed, cfg.t_max)?;
    let series = evolve_ensemble(&ens, &p);
    let mut table = Table::new(["t", "mean_pr", "mean_pi", "m2_r", "m2_i", "n_diverged"]);
    for r in &series.rows {
        table.push(vec![
            r.t.into(),
            r.mean_pr.into(),
            r.mean_pi.into(),
            r.m2_r.into(),
            r.m2_i.into(),
            r.n_diverged.into(),
        ]);
    }

    let mut derived = Map::new();
    let mut warnings = Vec::new();
    let tau = detect_threshold_time(&series).ok().flatten();
    derived.insert("tau".into(), json!(tau));
    derived.insert("t_c".into(), json!(threshold_time_tc(&p).ok()));
    let window = match cfg.fit_window {
        Some((lo, hi)) => Ok(lo..=hi),
        None => default_fit_window(&p),
    };
    match window.and_then(|w| fit_diffusion(&series, w.clone(), w)) {
        Ok(fit) => {
            derived.insert("D".into(), num(fit.d));
            derived.insert("alpha".into(), num(fit.alpha));
            derived.insert("beta".into(), num(fit.beta));
            derived.insert("fit_window".into(), json!([fit.window_r.0, fit.window_r.1]));
        }
        Err(e) => warnings.push(format!("diffusion fit skipped: {e}")),
    }
    Ok(Outcome {
        tables: vec![("classical".into(), table)],
        derived,
        warnings,
    })
}

fn initial_state(cfg: &ExperimentConfig) -> Result<ptkr_core::quantum::QuantumState> {
    Ok(match cfg.initial {
        InitialState::Uniform => init_uniform_state(cfg.dim)?,
        InitialState::Gaussian => init_gaussian_state(cfg.dim, cfg.sigma)?,
    })
}

fn quantum(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let prop = FloquetPropagator::new(&p, cfg.dim)?.with_tail_guard(cfg.tail_guard);
    let mut state = initial_state(cfg)?;
    let series = evolve(
        &mut state,
        &prop,
        cfg.t_max,
        ptkr_core::quantum::Direction::Forward,
    )?;

    let mut table = Table::new(["t", "log_norm", "mean_p", "mean_p2", "m2"]);
    for (t, o) in series.observables.iter().enumerate() {
        table.push(vec![
            t.into(),
            o.log_norm.into(),
            o.mean_p.into(),
            o.mean_p2.into(),
            o.m2.into(),
        ]);
    }
    let mut momentum = Table::new(["n", "probability"]);
    for (n, prob) in momentum_distribution(&state) {
        momentum.push(vec![n.into(), prob.into()]);
    }
    let mut angle = Table::new(["theta", "density"]);
    for (th, d) in angular_distribution(&state)? {
        angle.push(vec![th.into(), d.into()]);
    }

    let mut derived = Map::new();
    let last = series.observables.last().expect("t_max >= 1");
    derived.insert("final_mean_p".into(), num(last.mean_p));
    derived.insert("final_m2".into(), num(last.m2));
    derived.insert("final_log_norm".into(), num(last.log_norm));
    let mut warnings = Vec::new();
    if let Some(w) = series.truncation {
        warnings.push(format!(
            "basis truncation: tail probability exceeded {:e} at {} kicks (first at t = {}, max {:e}); increase dim",
            w.guard, w.kicks_over_guard, w.first_kick, w.max_tail_mass
        ));
    }
    Ok(Outcome {
        tables: vec![
            ("quantum".into(), table),
            ("quantum_final_momentum".into(), momentum),
            ("quantum_final_angle".into(), angle),
        ],
        derived,
        warnings,
    })
}

fn otoc(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let init = initial_state(cfg)?;
    let series = otoc_series(&p, cfg.t_max, &init, cfg.backward_mode)?;
    let mut table = Table::new(["t", "c_value", "finite"]);
    for e in &series.entries {
        table.push(vec![e.t.into(), e.value().into(), e.finite.into()]);
    }
    let mut derived = Map::new();
    derived.insert("gamma".into(), json!(series.gamma));
    derived.insert("t_star".into(), json!(series.t_star));
    derived.insert("t_ehrenfest".into(), json!(series.t_ehrenfest));
    Ok(Outcome {
        tables: vec![("otoc".into(), table)],
        derived,
        warnings: Vec::new(),
    })
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = params(cfg)?;
    let qs = floquet_spectrum(&p, cfg.dim)?;
    let mut table = Table::new(["index", "eps_real", "eps_imag", "eigenvalue_modulus"]);
    for (i, q) in qs.quasienergies.iter().enumerate() {
        table.push(vec![i.into(), q.re.into(), q.im.into(), q.modulus.into()]);
    }
    let mut derived = Map::new();
    derived.insert("max_abs_eps_imag".into(), num(qs.max_abs_imag()));
    derived.insert(
        "max_modulus_deviation".into(),
        num(qs.max_modulus_deviation),
    );
    derived.insert("pt_broken".into(), json!(is_pt_broken(&qs, DEFAULT_PT_TOL)));
    if let Some(bracket) = cfg.lambda_c_bracket {
        let b = find_lambda_c(&p, cfg.dim, bracket, cfg.tol_lambda)?;
        derived.insert("lambda_c".into(), num(b.lambda_c));
        derived.insert("lambda_c_bracket".into(), json!([b.low, b.high]));
    }
    Ok(Outcome {
        tables: vec![("spectrum".into(), table)],
        derived,
        warnings: Vec::new(),
    })
}

/// Runs a non-sweep experiment without writing anything.
pub(crate) fn compute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.kind {
        Kind::Classical => classical(cfg),
        Kind::Quantum => quantum(cfg),
        Kind::Otoc => otoc(cfg),
        Kind::Spectrum => spectrum(cfg),
        Kind::Sweep => Err(CliError::config("use run_sweep for sweep configs")),
    }
}

pub(crate) fn write_tables(
    cfg: &ExperimentConfig,
    dir: &Path,
    tables: &[(String, Table)],
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for (stem, table) in tables {
        let name = format!("{stem}.{}", cfg.format.extension());
        write_atomic(&dir.join(&name), &table.render(cfg.format)?)?;
        files.push(name);
    }
    Ok(files)
}

pub(crate) fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

pub(crate) fn manifest(cfg: &ExperimentConfig, started: Instant) -> RunManifest {
    RunManifest {
        kind: cfg.kind,
        config: cfg.canonical(),
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        files: Vec::new(),
        wall_clock_seconds: 0.0,
        derived: Map::new(),
        warnings: Vec::new(),
        status: "ok".into(),
        error: None,
    }
    .with_elapsed(started)
}

impl RunManifest {
    pub(crate) fn with_elapsed(mut self, started: Instant) -> Self {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        self
    }
}

/// Runs one experiment and writes its series plus `manifest.json` into
/// `cfg.out_dir`. A numerical failure still writes the manifest, with the
/// error recorded, before the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    if cfg.kind == Kind::Sweep {
        return crate::sweep::run_sweep(cfg);
    }
    let started = Instant::now();
    let mut m = manifest(cfg, started);
    match compute(cfg) {
        Ok(out) => {
            m.files = write_tables(cfg, &cfg.out_dir, &out.tables)?;
            m.derived = out.derived;
            m.warnings = out.warnings;
            m.files.push("manifest.json".into());
            m = m.with_elapsed(started);
            write_manifest(&cfg.out_dir, &m)?;
            Ok(m)
        }
        Err(e) => {
            m.status = "failed".into();
            m.error = Some(e.to_string());
            m.files.push("manifest.json".into());
            m = m.with_elapsed(started);
            write_manifest(&cfg.out_dir, &m)?;
            Err(e)
        }
    }
}
