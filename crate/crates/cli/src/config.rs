//! Layered configuration: built-in defaults, then an optional preset, then a
//! flat `key = value` file, then command-line flags. Later layers win per key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mplql::model::dbm_to_watts;
use mplql::montecarlo::{Grid, Parallelism, SweepConfig, TrackingSpec};
use mplql::{sinr_threshold_from_se, LevelMode, Protocol, SystemParams};
use thiserror::Error;

/// Every key accepted in a config file. The matching flag is `--` plus the
/// key with `_` replaced by `-`.
pub const KEYS: &[&str] = &[
    "protocol",
    "load",
    "levels",
    "beta",
    "alpha",
    "devices",
    "slots",
    "packets",
    "gamma_lin",
    "spectral_eff",
    "cell_radius_m",
    "ref_distance_m",
    "bandwidth_hz",
    "carrier_hz",
    "pathloss_exponent",
    "noise_psd_dbm_hz",
    "max_power_dbm",
    "level_mode",
    "max_frames",
    "sa_sinr_check",
    "runs",
    "seed",
    "threads",
    "tracking",
    "format",
    "out",
    "trace",
    "warn_only",
];

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Preset(String),
    File { path: PathBuf, line: usize },
    Flag(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Preset(name) => write!(f, "preset {name}"),
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Flag(flag) => write!(f, "flag {flag}"),
        }
    }
}

/// One key with its raw value tokens (a list has several).
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub tokens: Vec<String>,
    pub origin: Origin,
}

impl Setting {
    /// A flag value; commas separate list entries.
    pub fn flag(key: &str, value: &str) -> Setting {
        Setting {
            key: key.to_string(),
            tokens: value.split(',').map(|t| t.trim().to_string()).collect(),
            origin: Origin::Flag(format!("--{}", key.replace('_', "-"))),
        }
    }

    pub fn preset(name: &str, key: &str, value: &str) -> Setting {
        Setting {
            origin: Origin::Preset(name.to_string()),
            ..Setting::flag(key, value)
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { key: String, origin: Origin },

    #[error("{origin}: {message}")]
    Parse { origin: Origin, message: String },

    #[error("{}", join(.0))]
    Invalid(Vec<(Origin, mplql::Error)>),

    #[error("cannot read config file {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn join(errs: &[(Origin, mplql::Error)]) -> String {
    errs.iter()
        .map(|(o, e)| format!("{o}: {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputOptions {
    pub format: Format,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub warn_only: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub sweep: SweepConfig,
    pub output: OutputOptions,
}

/// Reads a config file into settings.
pub fn read_config_file(path: &Path) -> Result<Vec<Setting>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text, path)
}

/// Parses flat `key = value` lines. Values use TOML syntax: strings, numbers,
/// booleans or single-line arrays. `#` starts a comment; sections are
/// rejected.
pub fn parse_config_text(text: &str, path: &Path) -> Result<Vec<Setting>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let origin = Origin::File {
            path: path.to_path_buf(),
            line: i + 1,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') {
            return Err(ConfigError::Parse {
                origin,
                message: "sections are not supported; the file must be flat".into(),
            });
        }
        let table: toml::Table = toml::from_str(trimmed).map_err(|e| ConfigError::Parse {
            origin: origin.clone(),
            message: e.message().to_string(),
        })?;
        for (key, value) in table {
            let tokens = match value {
                toml::Value::Array(items) => items
                    .iter()
                    .map(|v| scalar(v, &origin))
                    .collect::<Result<Vec<_>, _>>()?,
                v => vec![scalar(&v, &origin)?],
            };
            out.push(Setting {
                key: key.replace('-', "_"),
                tokens,
                origin: origin.clone(),
            });
        }
    }
    Ok(out)
}

fn scalar(v: &toml::Value, origin: &Origin) -> Result<String, ConfigError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(x) => Ok(x.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(ConfigError::Parse {
            origin: origin.clone(),
            message: format!("unsupported value `{other}`"),
        }),
    }
}

/// Merges the layers (later wins per key) and resolves them against the
/// default parameters.
pub fn parse_config(
    preset: Vec<Setting>,
    file: Option<&Path>,
    flags: Vec<Setting>,
) -> Result<Resolved, ConfigError> {
    let file_settings = match file {
        Some(p) => read_config_file(p)?,
        None => Vec::new(),
    };
    resolve(preset.into_iter().chain(file_settings).chain(flags))
}

/// Resolves an ordered sequence of settings.
pub fn resolve(settings: impl IntoIterator<Item = Setting>) -> Result<Resolved, ConfigError> {
    let mut merged: BTreeMap<String, Setting> = BTreeMap::new();
    let mut order: BTreeMap<String, usize> = BTreeMap::new();
    for (i, s) in settings.into_iter().enumerate() {
        if !KEYS.contains(&s.key.as_str()) {
            return Err(ConfigError::UnknownKey {
                key: s.key,
                origin: s.origin,
            });
        }
        order.insert(s.key.clone(), i);
        merged.insert(s.key.clone(), s);
    }

    // Alternative spellings of one parameter: a later layer replaces an
    // earlier one, both in one layer is an error.
    for (a, b) in [("gamma_lin", "spectral_eff"), ("devices", "load")] {
        if let (Some(sa), Some(sb)) = (merged.get(a), merged.get(b)) {
            if same_layer(&sa.origin, &sb.origin) {
                return Err(ConfigError::Parse {
                    origin: sb.origin.clone(),
                    message: format!("`{a}` and `{b}` cannot both be set"),
                });
            }
            let older = if order[a] < order[b] { a } else { b };
            merged.remove(older);
        }
    }
    let get = |k: &str| merged.get(k);

    let mut p = SystemParams::default();
    let mut grid = Grid::default();

    if let Some(s) = get("slots") {
        p.n_slots = one(s)?;
    }
    if let Some(s) = get("devices") {
        p.n_devices = one(s)?;
    }
    if let Some(s) = get("load") {
        grid.loading_factors = list(s)?;
        p.set_loading_factor(grid.loading_factors[0]);
    }
    if let Some(s) = get("protocol") {
        grid.protocols = list(s)?;
        p.protocol = grid.protocols[0];
    }
    if let Some(s) = get("levels") {
        grid.power_levels = list(s)?;
        p.n_power_levels = grid.power_levels[0];
    }
    if let Some(s) = get("beta") {
        grid.sic_error_factors = list(s)?;
        p.sic_error_factor = grid.sic_error_factors[0];
    }
    if let Some(s) = get("alpha") {
        grid.learning_rates = list(s)?;
        p.learning_rate = grid.learning_rates[0];
    }
    if let Some(s) = get("packets") {
        p.packets_per_device = one(s)?;
    }
    if let Some(s) = get("gamma_lin") {
        p.sinr_threshold = one(s)?;
    }
    if let Some(s) = get("spectral_eff") {
        let se: f64 = one(s)?;
        p.sinr_threshold = sinr_threshold_from_se(se).map_err(|e| invalid(s, e))?;
    }
    for (key, field) in [
        ("cell_radius_m", &mut p.cell_radius_m),
        ("ref_distance_m", &mut p.ref_distance_m),
        ("bandwidth_hz", &mut p.bandwidth_hz),
        ("carrier_hz", &mut p.carrier_hz),
        ("pathloss_exponent", &mut p.pathloss_exponent),
        ("noise_psd_dbm_hz", &mut p.noise_psd_dbm_hz),
    ] {
        if let Some(s) = get(key) {
            *field = one(s)?;
        }
    }
    if let Some(s) = get("max_power_dbm") {
        p.max_power_w = dbm_to_watts(one(s)?);
    }
    if let Some(s) = get("level_mode") {
        p.level_mode = one::<LevelMode>(s)?;
    }
    if let Some(s) = get("max_frames") {
        p.max_frames = Some(one(s)?);
    }
    if let Some(s) = get("sa_sinr_check") {
        p.sa_sinr_check = one(s)?;
    }

    let mut sweep = SweepConfig::new(p);
    sweep.grid = grid;
    if let Some(s) = get("runs") {
        sweep.n_realizations = one(s)?;
    }
    if let Some(s) = get("seed") {
        sweep.master_seed = one(s)?;
    }
    if let Some(s) = get("threads") {
        let n: usize = one(s)?;
        sweep.parallelism = if n == 0 {
            Parallelism::Auto
        } else {
            Parallelism::Threads(n)
        };
    }
    if let Some(s) = get("tracking") {
        sweep.tracking = match s.tokens.as_slice() {
            [t] if t == "median" => TrackingSpec::MedianDevice,
            [t] if t == "none" => TrackingSpec::Nothing,
            _ => TrackingSpec::Devices(list(s)?),
        };
    }

    let mut output = OutputOptions::default();
    if let Some(s) = get("format") {
        output.format = one(s)?;
    }
    if let Some(s) = get("out") {
        output.out = Some(PathBuf::from(one::<String>(s)?));
    }
    if let Some(s) = get("trace") {
        output.trace = Some(PathBuf::from(one::<String>(s)?));
    }
    if let Some(s) = get("warn_only") {
        output.warn_only = one(s)?;
    }

    check(&sweep, &merged)?;
    Ok(Resolved { sweep, output })
}

fn same_layer(a: &Origin, b: &Origin) -> bool {
    match (a, b) {
        (Origin::Flag(_), Origin::Flag(_)) => true,
        (Origin::File { path: p, .. }, Origin::File { path: q, .. }) => p == q,
        (Origin::Preset(p), Origin::Preset(q)) => p == q,
        _ => false,
    }
}

fn one<T: FromStr>(s: &Setting) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    match s.tokens.as_slice() {
        [t] => parse_token(s, t),
        _ => Err(ConfigError::Parse {
            origin: s.origin.clone(),
            message: format!("`{}` takes a single value", s.key),
        }),
    }
}

fn list<T: FromStr>(s: &Setting) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    if s.tokens.is_empty() || s.tokens.iter().any(String::is_empty) {
        return Err(ConfigError::Parse {
            origin: s.origin.clone(),
            message: format!("`{}` has an empty value", s.key),
        });
    }
    s.tokens.iter().map(|t| parse_token(s, t)).collect()
}

fn parse_token<T: FromStr>(s: &Setting, t: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    t.parse().map_err(|e| ConfigError::Parse {
        origin: s.origin.clone(),
        message: format!("bad value `{t}` for `{}`: {e}", s.key),
    })
}

fn invalid(s: &Setting, e: mplql::Error) -> ConfigError {
    ConfigError::Invalid(vec![(s.origin.clone(), e)])
}

/// Config key that feeds a validated parameter.
fn key_for(param: &str) -> &'static [&'static str] {
    match param {
        "learning_rate" => &["alpha"],
        "sic_error_factor" => &["beta"],
        "n_power_levels" => &["levels"],
        "n_devices" => &["load", "devices"],
        "n_slots" => &["slots"],
        "packets_per_device" => &["packets"],
        "sinr_threshold" => &["gamma_lin", "spectral_eff"],
        "cell_radius_m" => &["cell_radius_m"],
        "ref_distance_m" => &["ref_distance_m"],
        "bandwidth_hz" => &["bandwidth_hz"],
        "carrier_hz" => &["carrier_hz"],
        "pathloss_exponent" => &["pathloss_exponent"],
        "noise_psd_dbm_hz" => &["noise_psd_dbm_hz"],
        "max_power_w" => &["max_power_dbm"],
        "max_frames" => &["max_frames"],
        "n_realizations" => &["runs"],
        _ => &[],
    }
}

fn origin_of(err: &mplql::Error, merged: &BTreeMap<String, Setting>) -> Origin {
    let keys: &[&str] = match err {
        mplql::Error::NonPositiveParameter { name, .. }
        | mplql::Error::RangeViolation { name, .. } => key_for(name),
        mplql::Error::GeometryError { .. } => &["ref_distance_m", "cell_radius_m"],
        _ => &[],
    };
    keys.iter()
        .find_map(|k| merged.get(*k).map(|s| s.origin.clone()))
        .unwrap_or_else(|| Origin::Preset("defaults".into()))
}

fn check(sweep: &SweepConfig, merged: &BTreeMap<String, Setting>) -> Result<(), ConfigError> {
    let tag = |e: &mplql::Error| (origin_of(e, merged), e.clone());
    if let Err(e) = sweep.base_params.clone().validate() {
        return Err(ConfigError::Invalid(
            e.violations().into_iter().map(tag).collect(),
        ));
    }
    if let Err(e) = sweep.validate() {
        return Err(ConfigError::Invalid(
            e.violations().into_iter().map(tag).collect(),
        ));
    }
    Ok(())
}

/// Names accepted for `--protocol`.
pub fn protocol_names() -> Vec<&'static str> {
    Protocol::ALL.iter().map(|p| p.as_str()).collect()
}
