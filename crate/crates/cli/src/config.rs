//! Experiment configuration.
//!
//! Settings are resolved in layers: built-in defaults, then a preset, then a TOML file, then
//! command-line flags. Every value remembers where it came from so range errors can point at
//! the offending line or flag.
//!
//! File layout (all keys optional):
//!
//! ```toml
//! preset = "fig2"
//!
//! [link]
//! N = 200
//! mu = 1.0
//! sigma_l2 = 1.0
//! alpha = 10.0
//! sample_model = "circular"
//!
//! [sweep]
//! delta_db = [0, 5, 10]
//! mu = [0.57, 1.0]        # or N = [100, 200]
//! trials = 1_000_000
//! seed = 7
//!
//! [baseline]
//! enabled = true
//! N = 400
//! norm = "equal-pair-energy"
//! ```

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use tnoisemod::montecarlo::{default_delta_grid, BaselineSpec, CurveAxis, MIN_SWEEP_TRIALS};
use tnoisemod::{EnergyNorm, LinkConfig, SampleModel, SweepSpec};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Fig2,
    Fig3,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    fn spec(self) -> SweepSpec {
        match self {
            Preset::Fig2 => SweepSpec::fig2(DEFAULT_TRIALS, DEFAULT_SEED),
            Preset::Fig3 => SweepSpec::fig3(DEFAULT_TRIALS, DEFAULT_SEED),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            other => Err(format!("unknown preset {other:?}, expected fig2 or fig3")),
        }
    }
}

/// Where a setting was last assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Default,
    Preset(Preset),
    File {
        path: PathBuf,
        line: usize,
        column: usize,
    },
    Flag(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => f.write_str("default"),
            Origin::Preset(p) => write!(f, "preset {p}"),
            Origin::File { path, line, column } => {
                write!(f, "{}:{line}:{column}", path.display())
            }
            Origin::Flag(name) => write!(f, "--{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting<T> {
    pub value: T,
    pub origin: Origin,
}

impl<T> Setting<T> {
    fn new(value: T, origin: Origin) -> Self {
        Setting { value, origin }
    }

    fn set(&mut self, value: T, origin: Origin) {
        self.value = value;
        self.origin = origin;
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Invalid { origin: Origin, message: String },
}

impl ConfigError {
    fn invalid(origin: &Origin, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            origin: origin.clone(),
            message: message.into(),
        }
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<Spanned<String>>,
    #[serde(default)]
    link: LinkSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    baseline: BaselineSection,
    /// Provenance block written into manifests; ignored on input.
    #[allow(dead_code)]
    meta: Option<toml::Table>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    #[serde(rename = "N")]
    n: Option<Spanned<usize>>,
    mu: Option<Spanned<f64>>,
    sigma_l2: Option<Spanned<f64>>,
    alpha: Option<Spanned<f64>>,
    sample_model: Option<Spanned<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    delta_db: Option<Spanned<Vec<f64>>>,
    mu: Option<Spanned<Vec<f64>>>,
    #[serde(rename = "N")]
    n: Option<Spanned<Vec<usize>>>,
    trials: Option<Spanned<u64>>,
    seed: Option<Spanned<u64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaselineSection {
    enabled: Option<Spanned<bool>>,
    #[serde(rename = "N")]
    n: Option<Spanned<usize>>,
    norm: Option<Spanned<String>>,
}

/// Command-line overrides; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub mu: Option<f64>,
    pub sigma_l2: Option<f64>,
    pub alpha: Option<f64>,
    pub sample_model: Option<SampleModel>,
    pub delta_db: Option<Vec<f64>>,
    pub mu_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub baseline: Option<bool>,
    pub baseline_n: Option<usize>,
    pub norm: Option<EnergyNorm>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub preset: Option<Preset>,
    pub n: Setting<usize>,
    pub mu: Setting<f64>,
    pub sigma_l2: Setting<f64>,
    pub alpha: Setting<f64>,
    pub sample_model: Setting<SampleModel>,
    pub delta_db: Setting<Vec<f64>>,
    pub curves: Setting<CurveAxis>,
    pub trials: Setting<u64>,
    pub seed: Setting<u64>,
    pub baseline: Setting<bool>,
    pub baseline_n: Setting<Option<usize>>,
    pub norm: Setting<EnergyNorm>,
}

impl Default for Experiment {
    fn default() -> Self {
        let d = || Origin::Default;
        Experiment {
            preset: None,
            n: Setting::new(200, d()),
            mu: Setting::new(1.0, d()),
            sigma_l2: Setting::new(1.0, d()),
            alpha: Setting::new(10.0, d()),
            sample_model: Setting::new(SampleModel::default(), d()),
            delta_db: Setting::new(default_delta_grid(), d()),
            curves: Setting::new(CurveAxis::Single, d()),
            trials: Setting::new(DEFAULT_TRIALS, d()),
            seed: Setting::new(DEFAULT_SEED, d()),
            baseline: Setting::new(false, d()),
            baseline_n: Setting::new(None, d()),
            norm: Setting::new(EnergyNorm::default(), d()),
        }
    }
}

impl Experiment {
    /// Resolves defaults, preset, optional file and flags, in that order. A preset given on
    /// the command line replaces one named in the file.
    pub fn resolve(
        config: Option<&Path>,
        preset: Option<Preset>,
        overrides: &Overrides,
    ) -> Result<Self, ConfigError> {
        let (text, path) = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                (text, path.to_path_buf())
            }
            None => (String::new(), PathBuf::new()),
        };
        let file = parse_file(&text, &path)?;
        let at = |span: Range<usize>| {
            let (line, column) = line_column(&text, span.start);
            Origin::File {
                path: path.clone(),
                line,
                column,
            }
        };

        let mut exp = Experiment::default();
        let file_preset = match &file.preset {
            Some(p) => Some(
                p.get_ref()
                    .parse::<Preset>()
                    .map_err(|e| ConfigError::invalid(&at(p.span()), e))?,
            ),
            None => None,
        };
        if let Some(p) = preset.or(file_preset) {
            exp.apply_preset(p);
        }
        exp.apply_file(&file, at)?;
        exp.apply_overrides(overrides);
        Ok(exp)
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        let spec = preset.spec();
        let o = || Origin::Preset(preset);
        self.preset = Some(preset);
        self.n.set(spec.base.n(), o());
        self.mu.set(spec.base.mu(), o());
        self.sigma_l2.set(spec.base.sigma_l2(), o());
        self.alpha.set(spec.base.alpha(), o());
        self.sample_model.set(spec.base.sample_model(), o());
        self.delta_db.set(spec.delta_db, o());
        self.curves.set(spec.curves, o());
        self.baseline.set(spec.baseline.is_some(), o());
        if let Some(b) = spec.baseline {
            self.baseline_n.set(b.n, o());
            self.norm.set(b.norm, o());
        }
    }

    fn apply_file<F>(&mut self, file: &FileConfig, at: F) -> Result<(), ConfigError>
    where
        F: Fn(Range<usize>) -> Origin,
    {
        fn take<T: Clone>(
            target: &mut Setting<T>,
            value: &Option<Spanned<T>>,
            at: &dyn Fn(Range<usize>) -> Origin,
        ) {
            if let Some(v) = value {
                target.set(v.get_ref().clone(), at(v.span()));
            }
        }
        let link = &file.link;
        take(&mut self.n, &link.n, &at);
        take(&mut self.mu, &link.mu, &at);
        take(&mut self.sigma_l2, &link.sigma_l2, &at);
        take(&mut self.alpha, &link.alpha, &at);
        if let Some(v) = &link.sample_model {
            let model = v
                .get_ref()
                .parse()
                .map_err(|e: String| ConfigError::invalid(&at(v.span()), e))?;
            self.sample_model.set(model, at(v.span()));
        }

        let sweep = &file.sweep;
        take(&mut self.delta_db, &sweep.delta_db, &at);
        take(&mut self.trials, &sweep.trials, &at);
        take(&mut self.seed, &sweep.seed, &at);
        match (&sweep.mu, &sweep.n) {
            (Some(_), Some(n)) => {
                return Err(ConfigError::invalid(
                    &at(n.span()),
                    "sweep.mu and sweep.N are mutually exclusive",
                ))
            }
            (Some(mu), None) => self
                .curves
                .set(CurveAxis::Mu(mu.get_ref().clone()), at(mu.span())),
            (None, Some(n)) => self
                .curves
                .set(CurveAxis::N(n.get_ref().clone()), at(n.span())),
            (None, None) => {}
        }

        let baseline = &file.baseline;
        take(&mut self.baseline, &baseline.enabled, &at);
        if let Some(n) = &baseline.n {
            self.baseline_n.set(Some(*n.get_ref()), at(n.span()));
        }
        if let Some(v) = &baseline.norm {
            let norm = v
                .get_ref()
                .parse()
                .map_err(|e: String| ConfigError::invalid(&at(v.span()), e))?;
            self.norm.set(norm, at(v.span()));
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        fn flag<T: Clone>(target: &mut Setting<T>, value: &Option<T>, name: &'static str) {
            if let Some(v) = value {
                target.set(v.clone(), Origin::Flag(name));
            }
        }
        flag(&mut self.n, &o.n, "n");
        flag(&mut self.mu, &o.mu, "mu");
        flag(&mut self.sigma_l2, &o.sigma_l2, "sigma-l2");
        flag(&mut self.alpha, &o.alpha, "alpha");
        flag(&mut self.sample_model, &o.sample_model, "sample-model");
        flag(&mut self.delta_db, &o.delta_db, "delta-db");
        flag(&mut self.trials, &o.trials, "trials");
        flag(&mut self.seed, &o.seed, "seed");
        flag(&mut self.norm, &o.norm, "norm");
        if let Some(mu) = &o.mu_list {
            self.curves
                .set(CurveAxis::Mu(mu.clone()), Origin::Flag("mu-list"));
        }
        if let Some(n) = &o.n_list {
            self.curves
                .set(CurveAxis::N(n.clone()), Origin::Flag("n-list"));
        }
        if let Some(n) = o.baseline_n {
            self.baseline_n.set(Some(n), Origin::Flag("baseline-n"));
            self.baseline.set(true, Origin::Flag("baseline-n"));
        }
        flag(&mut self.baseline, &o.baseline, "baseline");
    }

    /// Base link parameters, each checked against the origin that set it.
    pub fn link(&self) -> Result<LinkConfig, ConfigError> {
        // Start from a known-good configuration so each failure belongs to one setting.
        let cfg = LinkConfig::new(200, 1.0, 1.0, 10.0, 0.0).expect("valid reference link");
        let cfg = cfg.with_n(self.n.value).map_err(located(&self.n.origin))?;
        let cfg = cfg
            .with_mu(self.mu.value)
            .map_err(located(&self.mu.origin))?;
        let cfg = cfg
            .with_sigma_l2(self.sigma_l2.value)
            .map_err(located(&self.sigma_l2.origin))?;
        let cfg = cfg
            .with_alpha(self.alpha.value)
            .map_err(located(&self.alpha.origin))?;
        Ok(cfg.with_sample_model(self.sample_model.value))
    }

    /// The sweep to run; validates every list entry and the trial budget.
    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let base = self.link()?;
        let deltas = &self.delta_db;
        if deltas.value.is_empty() {
            return Err(ConfigError::invalid(
                &deltas.origin,
                "delta_db list is empty",
            ));
        }
        for &d in &deltas.value {
            base.with_delta_db(d).map_err(located(&deltas.origin))?;
        }
        if !increasing(&deltas.value) {
            return Err(ConfigError::invalid(
                &deltas.origin,
                "delta_db list must be strictly increasing",
            ));
        }

        let curves = &self.curves;
        let check_list = |ok: bool, len: usize, what: &str| {
            if len == 0 {
                Err(ConfigError::invalid(
                    &curves.origin,
                    format!("{what} list is empty"),
                ))
            } else if !ok {
                Err(ConfigError::invalid(
                    &curves.origin,
                    format!("{what} list must be strictly increasing"),
                ))
            } else {
                Ok(())
            }
        };
        match &curves.value {
            CurveAxis::Single => {}
            CurveAxis::Mu(values) => {
                check_list(increasing(values), values.len(), "mu")?;
                for &mu in values {
                    base.with_mu(mu).map_err(located(&curves.origin))?;
                }
            }
            CurveAxis::N(values) => {
                check_list(increasing(values), values.len(), "N")?;
                for &n in values {
                    base.with_n(n).map_err(located(&curves.origin))?;
                }
            }
        }

        if self.trials.value < MIN_SWEEP_TRIALS {
            return Err(ConfigError::invalid(
                &self.trials.origin,
                format!(
                    "trials must be at least {MIN_SWEEP_TRIALS}, got {}",
                    self.trials.value
                ),
            ));
        }
        if self.seed.value > i64::MAX as u64 {
            return Err(ConfigError::invalid(
                &self.seed.origin,
                format!("seed must be at most {}, got {}", i64::MAX, self.seed.value),
            ));
        }
        if let Some(n) = self.baseline_n.value {
            base.with_n(n).map_err(located(&self.baseline_n.origin))?;
        }

        let spec = SweepSpec {
            base,
            delta_db: deltas.value.clone(),
            curves: curves.value.clone(),
            trials: self.trials.value,
            seed: self.seed.value,
            baseline: self.baseline.value.then_some(BaselineSpec {
                n: self.baseline_n.value,
                norm: self.norm.value,
            }),
        };
        spec.validate()
            .map_err(|e| ConfigError::invalid(&Origin::Default, e.to_string()))?;
        Ok(spec)
    }

    /// Serialises the resolved settings in the file format, so the result can be fed back
    /// through `--config`. The preset is not written; every value it set is.
    pub fn to_toml(&self, meta: Option<toml::Table>) -> String {
        use toml::{Table, Value};
        let floats = |v: &[f64]| Value::Array(v.iter().map(|&x| Value::Float(x)).collect());
        let ints =
            |v: &[usize]| Value::Array(v.iter().map(|&x| Value::Integer(x as i64)).collect());

        let mut link = Table::new();
        link.insert("N".into(), Value::Integer(self.n.value as i64));
        link.insert("mu".into(), Value::Float(self.mu.value));
        link.insert("sigma_l2".into(), Value::Float(self.sigma_l2.value));
        link.insert("alpha".into(), Value::Float(self.alpha.value));
        link.insert(
            "sample_model".into(),
            Value::String(self.sample_model.value.as_str().into()),
        );

        let mut sweep = Table::new();
        sweep.insert("delta_db".into(), floats(&self.delta_db.value));
        match &self.curves.value {
            CurveAxis::Single => {}
            CurveAxis::Mu(v) => {
                sweep.insert("mu".into(), floats(v));
            }
            CurveAxis::N(v) => {
                sweep.insert("N".into(), ints(v));
            }
        }
        sweep.insert("trials".into(), Value::Integer(self.trials.value as i64));
        sweep.insert("seed".into(), Value::Integer(self.seed.value as i64));

        let mut baseline = Table::new();
        baseline.insert("enabled".into(), Value::Boolean(self.baseline.value));
        if let Some(n) = self.baseline_n.value {
            baseline.insert("N".into(), Value::Integer(n as i64));
        }
        baseline.insert(
            "norm".into(),
            Value::String(self.norm.value.as_str().into()),
        );

        let mut doc = Table::new();
        doc.insert("link".into(), Value::Table(link));
        doc.insert("sweep".into(), Value::Table(sweep));
        doc.insert("baseline".into(), Value::Table(baseline));
        if let Some(meta) = meta {
            doc.insert("meta".into(), Value::Table(meta));
        }
        toml::to_string(&doc).expect("plain tables always serialise")
    }
}

fn parse_file(text: &str, path: &Path) -> Result<FileConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Invalid {
            origin: Origin::File {
                path: path.to_path_buf(),
                line,
                column,
            },
            message: e.message().to_string(),
        }
    })
}

fn increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn located(origin: &Origin) -> impl Fn(tnoisemod::CoreError) -> ConfigError + '_ {
    move |e| ConfigError::invalid(origin, strip_prefix(&e))
}

/// Core errors carry a category prefix that is noise next to a file location.
fn strip_prefix(e: &tnoisemod::CoreError) -> String {
    match e {
        tnoisemod::CoreError::InvalidConfig(msg) | tnoisemod::CoreError::InvalidSweep(msg) => {
            msg.clone()
        }
        other => other.to_string(),
    }
}
