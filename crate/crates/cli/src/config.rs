//! Run configuration: a flat `key = value` file merged with command-line
//! flags of the same names.
//!
//! ```text
//! # three planted clusters plus three far households
//! synth-clusters = 3
//! synth-outliers = 3
//! seed = 7
//! k = fpc          # or a number
//! dprime = elbow   # or a number
//! ```
//!
//! Keys are case-insensitive and `_` may stand for `-`. `input` may repeat;
//! every other key may appear once. Flags override the file, and `--input`
//! flags replace the file's inputs as a whole. Relative input paths in a
//! file are resolved against the file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cvilab::cluster::{FcmConfig, Fuzzifier, DEFAULT_MAX_CLUSTERS};
use cvilab::profiles::OutlierPlacement;
use cvilab::{ExperimentKind, PerturbConfig, SynthSpec};

use crate::error::CliError;

const KEYS: &[&str] = &[
    "input",
    "out",
    "seed",
    "dprime",
    "k",
    "m",
    "trials",
    "shrink",
    "density-fraction",
    "sigma-divisor",
    "max-rejections",
    "recluster",
    "space",
    "experiments",
    "restarts",
    "max-iter",
    "tol",
    "k-max",
    "synth-clusters",
    "synth-size",
    "synth-spread",
    "synth-outliers",
    "synth-placement",
];

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Raw settings before interpretation: key to one or more values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, Vec<String>>,
}

fn normalize_key(key: &str) -> Result<String, CliError> {
    let key = key.trim().to_ascii_lowercase().replace('_', "-");
    if KEYS.contains(&key.as_str()) {
        Ok(key)
    } else {
        Err(config_error(format!("unknown key `{key}`")))
    }
}

impl Settings {
    /// Parses a config file's text. `base` resolves relative `input` paths.
    pub fn parse(text: &str, origin: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let mut settings = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| config_error(format!("{origin}:{}: {msg}", n + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let key = normalize_key(key).map_err(|e| at(e.to_string()))?;
            let mut value = value.trim().to_string();
            if value.is_empty() {
                return Err(at(format!("`{key}` has no value")));
            }
            if key == "input" {
                if let Some(base) = base {
                    value = base.join(&value).to_string_lossy().into_owned();
                }
            } else if settings.values.contains_key(&key) {
                return Err(at(format!("`{key}` is set twice")));
            }
            settings.values.entry(key).or_default().push(value);
        }
        Ok(settings)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Settings::parse(&text, &path.display().to_string(), path.parent())
    }

    /// Sets `key`, replacing whatever was there.
    pub fn set(&mut self, key: &str, values: Vec<String>) -> Result<(), CliError> {
        let key = normalize_key(key)?;
        if values.is_empty() {
            self.values.remove(&key);
        } else {
            self.values.insert(key, values);
        }
        Ok(())
    }

    /// Applies `overrides` on top of `self`, key by key.
    pub fn merged(mut self, overrides: Settings) -> Self {
        self.values.extend(overrides.values);
        self
    }

    fn one(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.one(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| config_error(format!("invalid value `{v}` for `{key}`: {e}"))),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.char_indices().find(|&(i, c)| c == '#' && (i == 0 || line[..i].ends_with(char::is_whitespace))) {
        Some((i, _)) => &line[..i],
        None => line,
    }
}

/// A number, or an automatic choice named by `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice<T> {
    Auto,
    Fixed(T),
}

impl<T: FromStr> Choice<T>
where
    T::Err: fmt::Display,
{
    fn parse(settings: &Settings, key: &str, auto: &str) -> Result<Self, CliError> {
        match settings.one(key) {
            None => Ok(Choice::Auto),
            Some(v) if v.eq_ignore_ascii_case(auto) => Ok(Choice::Auto),
            Some(v) => v
                .parse()
                .map(Choice::Fixed)
                .map_err(|e| config_error(format!("`{key}` must be `{auto}` or a number, got `{v}`: {e}"))),
        }
    }
}

fn show_choice<T: fmt::Display>(c: &Choice<T>, auto: &str) -> String {
    match c {
        Choice::Auto => auto.to_string(),
        Choice::Fixed(v) => v.to_string(),
    }
}

/// Where the indices are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// The `d'` principal-component coordinates the clustering ran in.
    Reduced,
    /// The normalized 96-slot profiles.
    Original,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Reduced => "reduced",
            Space::Original => "original",
        }
    }
}

impl FromStr for Space {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reduced" => Ok(Space::Reduced),
            "original" => Ok(Space::Original),
            other => Err(format!("expected `reduced` or `original`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub clusters: usize,
    pub size: usize,
    pub spread: f64,
    pub outliers: usize,
    pub placement: OutlierPlacement,
}

impl SynthConfig {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        let mut spec = SynthSpec::with_random_templates(self.clusters, self.size, self.spread, self.outliers, seed);
        spec.outlier_placement = self.placement;
        spec
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { clusters: 3, size: 50, spread: 0.05, outliers: 0, placement: OutlierPlacement::Far }
    }
}

fn placement_name(p: OutlierPlacement) -> &'static str {
    match p {
        OutlierPlacement::Far => "far",
        OutlierPlacement::Near => "near",
    }
}

/// Whether a command needs a data source in its settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    /// Input files or a synthetic recipe must be given.
    Required,
    /// The command can work from earlier artifacts alone.
    Optional,
    /// Always synthetic, with default recipe values for missing keys.
    Synthetic,
}

/// Everything a run needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub synth: Option<SynthConfig>,
    pub out: PathBuf,
    pub seed: u64,
    pub dprime: Choice<usize>,
    pub k: Choice<usize>,
    pub m: Choice<f64>,
    pub space: Space,
    pub trials: usize,
    pub shrink: f64,
    pub density_fraction: f64,
    pub sigma_divisor: f64,
    pub max_rejections: usize,
    pub recluster: bool,
    pub experiments: Vec<ExperimentKind>,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub k_max: usize,
}

impl RunConfig {
    /// Interprets `settings` for a command that needs a data source.
    pub fn from_settings(settings: &Settings) -> Result<Self, CliError> {
        Self::from_settings_for(settings, DataSource::Required)
    }

    pub fn from_settings_for(settings: &Settings, source: DataSource) -> Result<Self, CliError> {
        let force_synth = source == DataSource::Synthetic;
        let synth_keys = ["synth-clusters", "synth-size", "synth-spread", "synth-outliers", "synth-placement"];
        let wants_synth = force_synth || synth_keys.iter().any(|k| settings.values.contains_key(*k));
        let inputs: Vec<PathBuf> = settings.values.get("input").into_iter().flatten().map(PathBuf::from).collect();
        let synth = if wants_synth {
            let d = SynthConfig::default();
            let placement = match settings.one("synth-placement").unwrap_or("far") {
                "far" => OutlierPlacement::Far,
                "near" => OutlierPlacement::Near,
                other => return Err(config_error(format!("`synth-placement` must be `far` or `near`, got `{other}`"))),
            };
            Some(SynthConfig {
                clusters: settings.parsed("synth-clusters", d.clusters)?,
                size: settings.parsed("synth-size", d.size)?,
                spread: settings.parsed("synth-spread", d.spread)?,
                outliers: settings.parsed("synth-outliers", d.outliers)?,
                placement,
            })
        } else {
            None
        };
        match (inputs.is_empty(), synth.is_some()) {
            (false, true) => return Err(config_error("give either `input` files or a synthetic spec (`synth-*`), not both")),
            (true, false) if source == DataSource::Required => {
                return Err(config_error("no data: give `input` files or a synthetic spec (`synth-*`)"))
            }
            _ => {}
        }

        let experiments = match settings.one("experiments") {
            None => ExperimentKind::ALL.to_vec(),
            Some(list) => list
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<ExperimentKind>().map_err(config_error))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let recluster = match settings.one("recluster").unwrap_or("false") {
            "true" | "yes" | "1" | "on" => true,
            "false" | "no" | "0" | "off" => false,
            other => return Err(config_error(format!("`recluster` must be true or false, got `{other}`"))),
        };

        let config = RunConfig {
            inputs,
            synth,
            out: PathBuf::from(settings.one("out").unwrap_or("cvilab-out")),
            seed: settings.parsed("seed", 0u64)?,
            dprime: Choice::parse(settings, "dprime", "elbow")?,
            k: Choice::parse(settings, "k", "fpc")?,
            m: Choice::parse(settings, "m", "default")?,
            space: settings.parsed("space", Space::Reduced)?,
            trials: settings.parsed("trials", 100usize)?,
            shrink: settings.parsed("shrink", 0.8)?,
            density_fraction: settings.parsed("density-fraction", 1.0)?,
            sigma_divisor: settings.parsed("sigma-divisor", 4.0)?,
            max_rejections: settings.parsed("max-rejections", 1000usize)?,
            recluster,
            experiments,
            restarts: settings.parsed("restarts", 10usize)?,
            max_iter: settings.parsed("max-iter", 300usize)?,
            tol: settings.parsed("tol", 1e-6)?,
            k_max: settings.parsed("k-max", DEFAULT_MAX_CLUSTERS)?,
        };
        config.validate()?;
        Ok(config)
    }

    /// True when neither input files nor a synthetic recipe were given.
    pub fn is_data_free(&self) -> bool {
        self.inputs.is_empty() && self.synth.is_none()
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Some(s) = &self.synth {
            if s.clusters == 0 || s.size == 0 {
                return Err(config_error("`synth-clusters` and `synth-size` must be at least 1"));
            }
            if !(s.spread >= 0.0 && s.spread.is_finite()) {
                return Err(config_error("`synth-spread` must be finite and >= 0"));
            }
        }
        if self.dprime == Choice::Fixed(0) {
            return Err(config_error("`dprime` must be at least 1"));
        }
        if let Choice::Fixed(k) = self.k {
            if k < 2 || k > self.k_max {
                return Err(config_error(format!("`k` must lie in 2..={}, got {k}", self.k_max)));
            }
        }
        let mut fcm = self.fcm_template();
        fcm.k = 2.max(fcm.k);
        fcm.validate().map_err(|e| config_error(e.to_string()))?;
        self.perturb_config().validate().map_err(|e| config_error(e.to_string()))?;
        Ok(())
    }

    pub fn fuzzifier(&self) -> Fuzzifier {
        match self.m {
            Choice::Auto => Fuzzifier::Estimate,
            Choice::Fixed(m) => Fuzzifier::Fixed(m),
        }
    }

    /// Fuzzy c-means settings; `k` is filled in by the caller.
    pub fn fcm_template(&self) -> FcmConfig {
        FcmConfig {
            k: match self.k {
                Choice::Fixed(k) => k,
                Choice::Auto => 2,
            },
            fuzzifier: self.fuzzifier(),
            max_iter: self.max_iter,
            tol: self.tol,
            seed: cvilab::rng::derive_seed(self.seed, SEED_DOMAIN_FCM, 0),
            restarts: self.restarts,
            k_max: self.k_max,
        }
    }

    pub fn perturb_config(&self) -> PerturbConfig {
        PerturbConfig {
            seed: cvilab::rng::derive_seed(self.seed, SEED_DOMAIN_PERTURB, 0),
            trials: self.trials,
            density_add_fraction: self.density_fraction,
            shrink_factor: self.shrink,
            sigma_divisor: self.sigma_divisor,
            max_rejection_attempts: self.max_rejections,
            recluster: self.recluster.then(|| self.fcm_template()),
        }
    }

    pub fn synth_seed(&self) -> u64 {
        cvilab::rng::derive_seed(self.seed, SEED_DOMAIN_SYNTH, 0)
    }

    /// The effective settings as `key = value` pairs (the output directory
    /// is left out: it is where the echo is written).
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut e = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            e.insert(k.to_string(), v);
        };
        if !self.inputs.is_empty() {
            put("input", self.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","));
        }
        if let Some(s) = &self.synth {
            put("synth-clusters", s.clusters.to_string());
            put("synth-size", s.size.to_string());
            put("synth-spread", s.spread.to_string());
            put("synth-outliers", s.outliers.to_string());
            put("synth-placement", placement_name(s.placement).to_string());
        }
        put("seed", self.seed.to_string());
        put("dprime", show_choice(&self.dprime, "elbow"));
        put("k", show_choice(&self.k, "fpc"));
        put("m", show_choice(&self.m, "default"));
        put("space", self.space.name().to_string());
        put("trials", self.trials.to_string());
        put("shrink", self.shrink.to_string());
        put("density-fraction", self.density_fraction.to_string());
        put("sigma-divisor", self.sigma_divisor.to_string());
        put("max-rejections", self.max_rejections.to_string());
        put("recluster", self.recluster.to_string());
        put("experiments", self.experiments.iter().map(|k| k.name()).collect::<Vec<_>>().join(","));
        put("restarts", self.restarts.to_string());
        put("max-iter", self.max_iter.to_string());
        put("tol", self.tol.to_string());
        put("k-max", self.k_max.to_string());
        e
    }
}

// Each consumer of the run seed gets its own derived seed.
const SEED_DOMAIN_SYNTH: u64 = 10;
const SEED_DOMAIN_FCM: u64 = 11;
const SEED_DOMAIN_PERTURB: u64 = 12;
