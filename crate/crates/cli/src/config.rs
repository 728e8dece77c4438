//! Flat `key = value` experiment configuration.
//!
//! Values are layered defaults < config file < `--set` overrides, then
//! parsed into an [`ExperimentConfig`]. The canonical form re-renders every
//! resolved value, so configs that differ only in spelling (`1e-10` vs
//! `0.0000000001`) share a hash.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ptkr_core::otoc::BackwardMode;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Classical,
    Quantum,
    Otoc,
    Spectrum,
    Sweep,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Classical => "classical",
            Kind::Quantum => "quantum",
            Kind::Otoc => "otoc",
            Kind::Spectrum => "spectrum",
            Kind::Sweep => "sweep",
        }
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Kind::Classical),
            "quantum" => Ok(Kind::Quantum),
            "otoc" => Ok(Kind::Otoc),
            "spectrum" => Ok(Kind::Spectrum),
            "sweep" => Ok(Kind::Sweep),
            _ => Err(CliError::config(format!("unknown experiment kind `{s}`"))),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Keys a sweep may vary.
pub const SWEEPABLE: &[&str] = &[
    "k",
    "lambda",
    "hbar",
    "n_traj",
    "seed",
    "t_max",
    "dim",
    "sigma",
    "tail_guard",
];

const KEYS: &[&str] = &[
    "k",
    "lambda",
    "hbar",
    "p_clamp",
    "theta_i_guard",
    "n_traj",
    "seed",
    "t_max",
    "dim",
    "sigma",
    "initial",
    "backward_mode",
    "tail_guard",
    "fit_window",
    "lambda_c_bracket",
    "tol_lambda",
    "sweep_kind",
    "format",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub k: f64,
    pub lambda: f64,
    pub hbar: f64,
    pub p_clamp: f64,
    pub theta_i_guard: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub t_max: usize,
    pub dim: usize,
    pub sigma: f64,
    pub initial: InitialState,
    pub backward_mode: BackwardMode,
    pub tail_guard: f64,
    /// Classical fit window `[lo, hi]`; the library default when unset.
    pub fit_window: Option<(usize, usize)>,
    /// Spectrum runs bisect for `λ_c` in this bracket when set.
    pub lambda_c_bracket: Option<(f64, f64)>,
    pub tol_lambda: f64,
    pub sweep_kind: Option<Kind>,
    pub sweep_axes: Vec<SweepAxis>,
    pub format: Format,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

fn parse<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::config(format!("`{key}`: cannot parse `{raw}`")))
}

fn parse_pair<T: FromStr>(key: &str, raw: &str) -> Result<(T, T)> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::config(format!(
            "`{key}`: expected `a,b`, got `{raw}`"
        )));
    }
    Ok((parse(key, parts[0])?, parse(key, parts[1])?))
}

fn float(v: f64) -> String {
    format!("{v:e}")
}

fn default_dim(kind: Kind) -> usize {
    match kind {
        Kind::Otoc => 1 << 14,
        Kind::Spectrum => 256,
        _ => 4096,
    }
}

fn default_t_max(kind: Kind) -> usize {
    match kind {
        Kind::Quantum => 200,
        Kind::Otoc => 20,
        _ => 30,
    }
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::config(format!("{origin}:{}: expected `key = value`", i + 1))
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Merges the optional config file with `--set key=value` overrides.
pub fn load_layers(file: Option<&Path>, sets: &[String]) -> Result<BTreeMap<String, String>> {
    let mut map = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            parse_kv(&text, &path.display().to_string())?
        }
        None => BTreeMap::new(),
    };
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--set expects key=value, got `{s}`")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl ExperimentConfig {
    /// Parses a merged key-value map, filling unset keys with defaults.
    pub fn from_map(kind: Kind, map: &BTreeMap<String, String>, out_dir: PathBuf) -> Result<Self> {
        let mut axes = Vec::new();
        for (key, raw) in map {
            if let Some(swept) = key.strip_prefix("sweep.") {
                if !SWEEPABLE.contains(&swept) {
                    return Err(CliError::config(format!("`{swept}` cannot be swept")));
                }
                let values: Vec<String> = raw
                    .split(',')
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect();
                axes.push(SweepAxis {
                    key: swept.to_string(),
                    values,
                });
            } else if !KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("unknown key `{key}`")));
            }
        }

        let get = |key: &str| map.get(key).map(String::as_str);
        let sweep_kind = get("sweep_kind").map(str::parse).transpose()?;
        if sweep_kind == Some(Kind::Sweep) {
            return Err(CliError::config("sweep_kind cannot be `sweep`"));
        }
        let effective = match kind {
            Kind::Sweep => sweep_kind.unwrap_or(Kind::Classical),
            k => k,
        };

        macro_rules! value {
            ($key:literal, $default:expr) => {
                match get($key) {
                    Some(raw) => parse($key, raw)?,
                    None => $default,
                }
            };
        }

        let initial = match get("initial") {
            None if effective == Kind::Otoc => InitialState::Gaussian,
            None | Some("uniform") => InitialState::Uniform,
            Some("gaussian") => InitialState::Gaussian,
            Some(other) => {
                return Err(CliError::config(format!(
                    "`initial`: unknown state `{other}`"
                )))
            }
        };
        let backward_mode = match get("backward_mode") {
            None | Some("adjoint") => BackwardMode::Adjoint,
            Some("inverse") => BackwardMode::Inverse,
            Some(other) => {
                return Err(CliError::config(format!(
                    "`backward_mode`: unknown mode `{other}`"
                )))
            }
        };
        let format = match get("format") {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => {
                return Err(CliError::config(format!(
                    "`format`: unknown format `{other}`"
                )))
            }
        };

        let cfg = Self {
            kind,
            k: value!("k", 5.0),
            lambda: value!("lambda", 1e-10),
            hbar: value!("hbar", 1.0),
            p_clamp: value!("p_clamp", ptkr_core::params::DEFAULT_P_CLAMP),
            theta_i_guard: value!("theta_i_guard", ptkr_core::params::DEFAULT_THETA_I_GUARD),
            n_traj: value!("n_traj", 10_000),
            seed: value!("seed", 0),
            t_max: value!("t_max", default_t_max(effective)),
            dim: value!("dim", default_dim(effective)),
            sigma: value!("sigma", 10.0),
            initial,
            backward_mode,
            tail_guard: value!("tail_guard", ptkr_core::quantum::DEFAULT_TAIL_GUARD),
            fit_window: get("fit_window")
                .map(|r| parse_pair("fit_window", r))
                .transpose()?,
            lambda_c_bracket: get("lambda_c_bracket")
                .map(|r| parse_pair("lambda_c_bracket", r))
                .transpose()?,
            tol_lambda: value!("tol_lambda", 1e-4),
            sweep_kind,
            sweep_axes: axes,
            format,
            out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(CliError::config("`t_max` must be >= 1"));
        }
        if self.kind == Kind::Sweep {
            if self.sweep_axes.is_empty() {
                return Err(CliError::config(
                    "sweep needs at least one `sweep.<key>` axis",
                ));
            }
            if let Some(axis) = self.sweep_axes.iter().find(|a| a.values.is_empty()) {
                return Err(CliError::config(format!(
                    "sweep axis `{}` has no values",
                    axis.key
                )));
            }
        } else if !self.sweep_axes.is_empty() {
            return Err(CliError::config(
                "`sweep.<key>` axes are only valid for the sweep kind",
            ));
        }
        Ok(())
    }

    /// The kind a sweep runs at each grid point.
    pub fn base_kind(&self) -> Kind {
        match self.kind {
            Kind::Sweep => self.sweep_kind.unwrap_or(Kind::Classical),
            k => k,
        }
    }

    /// Every resolved value, rendered canonically. The output directory is
    /// not part of the configuration.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("kind", self.kind.name().into());
        put("k", float(self.k));
        put("lambda", float(self.lambda));
        put("hbar", float(self.hbar));
        put("p_clamp", float(self.p_clamp));
        put("theta_i_guard", float(self.theta_i_guard));
        put("n_traj", self.n_traj.to_string());
        put("seed", self.seed.to_string());
        put("t_max", self.t_max.to_string());
        put("dim", self.dim.to_string());
        put("sigma", float(self.sigma));
        put(
            "initial",
            match self.initial {
                InitialState::Uniform => "uniform",
                InitialState::Gaussian => "gaussian",
            }
            .into(),
        );
        put(
            "backward_mode",
            match self.backward_mode {
                BackwardMode::Adjoint => "adjoint",
                BackwardMode::Inverse => "inverse",
            }
            .into(),
        );
        put("tail_guard", float(self.tail_guard));
        if let Some((lo, hi)) = self.fit_window {
            put("fit_window", format!("{lo},{hi}"));
        }
        if let Some((lo, hi)) = self.lambda_c_bracket {
            put("lambda_c_bracket", format!("{},{}", float(lo), float(hi)));
        }
        put("tol_lambda", float(self.tol_lambda));
        if let Some(k) = self.sweep_kind {
            put("sweep_kind", k.name().into());
        }
        for axis in &self.sweep_axes {
            put(&format!("sweep.{}", axis.key), axis.values.join(","));
        }
        put("format", self.format.extension().into());
        m
    }

    /// Hex SHA-256 of the canonical `key=value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.canonical() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// The single-run config at one sweep grid point.
    pub fn at_point(&self, point: &[(String, String)], out_dir: PathBuf) -> Result<Self> {
        let mut map = self.canonical();
        map.retain(|k, _| !k.starts_with("sweep") && k != "kind");
        for (k, v) in point {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(self.base_kind(), &map, out_dir)
    }

    /// Cartesian product of the sweep axes, first axis slowest.
    pub fn grid(&self) -> Vec<Vec<(String, String)>> {
        let mut grid = vec![Vec::new()];
        for axis in &self.sweep_axes {
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push((axis.key.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn parses_file_text() {
        let m = parse_kv("# header\nk = 5\n\nlambda=1e-10  # tiny\n", "cfg").unwrap();
        assert_eq!(m, map(&[("k", "5"), ("lambda", "1e-10")]));
        assert!(parse_kv("oops\n", "cfg").is_err());
    }

    #[test]
    fn defaults_depend_on_kind() {
        let otoc = ExperimentConfig::from_map(Kind::Otoc, &BTreeMap::new(), "o".into()).unwrap();
        assert_eq!((otoc.dim, otoc.initial), (1 << 14, InitialState::Gaussian));
        let spectrum =
            ExperimentConfig::from_map(Kind::Spectrum, &BTreeMap::new(), "o".into()).unwrap();
        assert_eq!(spectrum.dim, 256);
    }

    #[test]
    fn hash_ignores_spelling_and_output_dir() {
        let a =
            ExperimentConfig::from_map(Kind::Classical, &map(&[("lambda", "1e-10")]), "a".into())
                .unwrap();
        let b = ExperimentConfig::from_map(
            Kind::Classical,
            &map(&[("lambda", "0.0000000001")]),
            "b".into(),
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c =
            ExperimentConfig::from_map(Kind::Classical, &map(&[("lambda", "1e-8")]), "a".into())
                .unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_keys_and_values() {
        assert!(
            ExperimentConfig::from_map(Kind::Classical, &map(&[("kk", "1")]), "o".into()).is_err()
        );
        assert!(
            ExperimentConfig::from_map(Kind::Classical, &map(&[("k", "five")]), "o".into())
                .is_err()
        );
        assert!(ExperimentConfig::from_map(Kind::Sweep, &BTreeMap::new(), "o".into()).is_err());
        assert!(
            ExperimentConfig::from_map(Kind::Sweep, &map(&[("sweep.k", "")]), "o".into()).is_err()
        );
        assert!(ExperimentConfig::from_map(
            Kind::Sweep,
            &map(&[("sweep.format", "csv")]),
            "o".into()
        )
        .is_err());
        assert!(
            ExperimentConfig::from_map(Kind::Classical, &map(&[("sweep.k", "5")]), "o".into())
                .is_err()
        );
    }

    #[test]
    fn grid_is_cartesian() {
        let cfg = ExperimentConfig::from_map(
            Kind::Sweep,
            &map(&[("sweep.k", "5,50"), ("sweep.lambda", "1e-10,1e-8,1e-6")]),
            "o".into(),
        )
        .unwrap();
        let g = cfg.grid();
        assert_eq!(g.len(), 6);
        assert_eq!(
            g[1],
            vec![("k".into(), "5".into()), ("lambda".into(), "1e-8".into())]
        );
        let point = cfg.at_point(&g[5], "p".into()).unwrap();
        assert_eq!(
            (point.kind, point.k, point.lambda),
            (Kind::Classical, 50.0, 1e-6)
        );
    }
}
