use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use greenmono_core::greens::{build_u, USource};
use greenmono_core::model_manifolds::ExampleId;
use greenmono_core::monotonicity::{LevelParameter, LevelSets};
use greenmono_core::geom_quantities::tilde_beta;
use greenmono_core::{BetaParams, ModelSpec, Profile, RadiusGrid};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 20_240_917;
/// Fallback output directory when neither a flag, the file nor the environment names one.
pub const DEFAULT_OUTPUT: &str = "greenmono-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    Monotone,
    Umbilic,
    GreensProfile,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Monotone => "monotone",
            Suite::Umbilic => "umbilic",
            Suite::GreensProfile => "greens-profile",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        self != Format::Json
    }

    pub fn json(self) -> bool {
        self != Format::Csv
    }
}

/// One run, as read from a TOML file and/or flags. Absent keys take the
/// defaults of [`Resolved`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `kind:params` text, or an inline table for tabulated profiles.
    #[serde(default, with = "manifold_field", skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_source: Option<USource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// `rmin:rmax:ratio`, or a table with those three keys.
    #[serde(default, with = "grid_field", skip_serializing_if = "Option::is_none")]
    pub radius_grid: Option<RadiusGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_parameter: Option<LevelParameter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are always representable")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// `other`'s present keys win.
    pub fn overlay(mut self, other: &RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => {$( if other.$f.is_some() { self.$f = other.$f.clone(); } )*};
        }
        take!(manifold, u_source, suite, betas, radius_grid, level_parameter, seed, output, format);
        self
    }

    fn keys(&self) -> Vec<&'static str> {
        let mut k = Vec::new();
        macro_rules! key {
            ($($f:ident),*) => {$( if self.$f.is_some() { k.push(stringify!($f)); } )*};
        }
        key!(manifold, u_source, suite, betas, radius_grid, level_parameter, seed, output, format);
        k
    }
}

mod manifold_field {
    use super::*;
    use serde::de::{self, MapAccess, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<ModelSpec>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) if m.to_string().parse::<ModelSpec>().as_ref() == Ok(m) => s.serialize_str(&m.to_string()),
            Some(m) => m.serialize(s),
            None => s.serialize_none(),
        }
    }

    struct Spec;

    impl<'de> Visitor<'de> for Spec {
        type Value = Option<ModelSpec>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a manifold string like `rotsym:3:0.8:1` or a table with a `kind` key")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
            v.parse().map(Some).map_err(E::custom)
        }

        fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
            ModelSpec::deserialize(de::value::MapAccessDeserializer::new(map)).map(Some)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ModelSpec>, D::Error> {
        d.deserialize_any(Spec)
    }
}

mod grid_field {
    use super::*;
    use serde::de::{self, MapAccess, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(g: &Option<RadiusGrid>, s: S) -> Result<S::Ok, S::Error> {
        match g {
            Some(g) => s.serialize_str(&g.to_string()),
            None => s.serialize_none(),
        }
    }

    struct Grid;

    impl<'de> Visitor<'de> for Grid {
        type Value = Option<RadiusGrid>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("`rmin:rmax:ratio` or a table with r_min, r_max, ratio")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
            v.parse().map(Some).map_err(E::custom)
        }

        fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
            let g = RadiusGrid::deserialize(de::value::MapAccessDeserializer::new(map))?;
            g.validate().map_err(de::Error::custom)?;
            Ok(Some(g))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<RadiusGrid>, D::Error> {
        d.deserialize_any(Grid)
    }
}

/// A configuration problem, located in the file or on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// `path:line:col`, `--flag`, or `default`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// The config file text and where each key sits in it.
#[derive(Debug, Clone)]
pub struct Source {
    pub path: PathBuf,
    pub text: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<(Self, RunConfig), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            location: path.display().to_string(),
            message: format!("cannot read: {e}"),
        })?;
        let src = Source { path: path.to_path_buf(), text };
        let cfg = RunConfig::from_toml(&src.text).map_err(|e| src.locate(e.span(), e.message()))?;
        Ok((src, cfg))
    }

    fn locate(&self, span: Option<Range<usize>>, message: &str) -> ConfigError {
        let location = match span {
            Some(s) => {
                let (l, c) = line_col(&self.text, s.start);
                format!("{}:{l}:{c}", self.path.display())
            }
            None => self.path.display().to_string(),
        };
        ConfigError { location, message: message.to_string() }
    }

    /// Span of the value of a top-level `key`.
    fn key_span(&self, key: &str) -> Option<Range<usize>> {
        // Top-level keys precede any table header; a `[key]` header also counts.
        let mut offset = 0;
        for line in self.text.split_inclusive('\n') {
            let t = line.trim_start();
            let indent = line.len() - t.len();
            let is_key = t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='));
            let is_header = t.starts_with('[') && t.trim_start_matches('[').trim_end().trim_end_matches(']').trim() == key;
            if is_key || is_header {
                return Some(offset + indent..offset + line.len());
            }
            offset += line.len();
        }
        None
    }
}

/// Where each key's value came from, for error locations.
#[derive(Debug, Clone, Default)]
pub struct Origins {
    pub file: Option<Source>,
    pub flags: Vec<&'static str>,
}

impl Origins {
    pub fn new(file: Option<Source>, flags: &RunConfig) -> Self {
        Origins { file, flags: flags.keys() }
    }

    pub fn error(&self, key: &'static str, message: impl Into<String>) -> ConfigError {
        let message = message.into();
        if self.flags.contains(&key) {
            return ConfigError { location: format!("--{}", flag_name(key)), message };
        }
        if let Some(src) = &self.file {
            if let Some(span) = src.key_span(key) {
                return src.locate(Some(span), &format!("{key}: {message}"));
            }
        }
        ConfigError { location: "default".into(), message: format!("{key}: {message}") }
    }
}

fn flag_name(key: &str) -> &'static str {
    match key {
        "manifold" => "manifold",
        "u_source" => "u",
        "suite" => "suite",
        "betas" => "betas",
        "radius_grid" => "grid",
        "level_parameter" => "level-parameter",
        "seed" => "seed",
        "output" => "out",
        _ => "format",
    }
}

/// Manifold used when none is given (identities then use their three default cases).
pub fn default_manifold() -> ModelSpec {
    ModelSpec::RotSym { n: 3, profile: Profile::Concave { c: 0.8, a: 1.0 } }
}

pub fn default_u(spec: &ModelSpec) -> USource {
    match spec {
        ModelSpec::ProductR3S1 { .. } => USource::Example(ExampleId::ProductU2),
        _ => USource::Greens,
    }
}

/// `{(n−2)/(n−1), 1, 2, 3}`; on u₁ the volume weight is integrable at the pole only for β < 2.
pub fn default_betas(n: usize, u: USource) -> Vec<f64> {
    if u == USource::Example(ExampleId::ProductU1) {
        vec![BetaParams::critical(n), 1.0, 1.5]
    } else {
        vec![BetaParams::critical(n), 1.0, 2.0, 3.0]
    }
}

pub fn default_grid(suite: Suite, spec: &ModelSpec) -> RadiusGrid {
    let product = matches!(spec, ModelSpec::ProductR3S1 { .. });
    match (suite, product) {
        (Suite::Umbilic, true) => RadiusGrid { r_min: 1e2, r_max: 1e4, ratio: 10f64.powf(0.25) },
        (Suite::Umbilic, false) => RadiusGrid { r_min: 1.0, r_max: 1e2, ratio: 10f64.powf(0.5) },
        (_, true) => RadiusGrid { r_min: 1.0, r_max: 1e2, ratio: 2f64.sqrt() },
        _ => RadiusGrid::default(),
    }
}

pub fn default_level_parameter(u: USource) -> LevelParameter {
    if u == USource::Example(ExampleId::ProductU1) {
        LevelParameter::USquared
    } else {
        LevelParameter::U
    }
}

/// A validated config with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub suite: Suite,
    /// `None`: identities on the default cases, other suites on [`default_manifold`].
    pub manifold: Option<ModelSpec>,
    pub u_source: Option<USource>,
    pub betas: Option<Vec<f64>>,
    pub radius_grid: Option<RadiusGrid>,
    pub level_parameter: Option<LevelParameter>,
    pub seed: u64,
    pub output: PathBuf,
    pub format: Format,
}

impl Resolved {
    pub fn spec(&self) -> ModelSpec {
        self.manifold.clone().unwrap_or_else(default_manifold)
    }

    pub fn u(&self) -> USource {
        self.u_source.unwrap_or_else(|| default_u(&self.spec()))
    }

    pub fn betas(&self) -> Vec<f64> {
        self.betas.clone().unwrap_or_else(|| default_betas(self.spec().dim(), self.u()))
    }

    pub fn grid(&self, suite: Suite) -> RadiusGrid {
        self.radius_grid.unwrap_or_else(|| default_grid(suite, &self.spec()))
    }

    pub fn level_parameter(&self) -> LevelParameter {
        self.level_parameter.unwrap_or_else(|| default_level_parameter(self.u()))
    }

    /// The suites a run executes, with a reason for any skipped by `all`.
    pub fn plan(&self) -> Vec<(Suite, Option<&'static str>)> {
        let spec = self.spec();
        let radial = spec.is_radial();
        match self.suite {
            Suite::All => vec![
                (Suite::Identities, (!radial).then_some("identities need a radial u with the standing equation")),
                (Suite::Monotone, None),
                (Suite::Umbilic, None),
                (Suite::GreensProfile, (!radial).then_some("no pole: the model is not rotationally symmetric")),
            ],
            s => vec![(s, None)],
        }
    }

    /// The effective configuration as a config file, without the output path.
    pub fn canonical(&self) -> RunConfig {
        RunConfig {
            manifold: self.manifold.clone(),
            u_source: self.u_source,
            suite: Some(self.suite),
            betas: self.betas.clone(),
            radius_grid: self.radius_grid,
            level_parameter: self.level_parameter,
            seed: Some(self.seed),
            output: None,
            format: Some(self.format),
        }
    }
}

/// Fills defaults and checks every key against the model it will run on.
/// `env_output` is the environment's default output directory.
pub fn resolve(cfg: &RunConfig, origins: &Origins, env_output: Option<PathBuf>) -> Result<Resolved, ConfigError> {
    let r = Resolved {
        suite: cfg.suite.unwrap_or(Suite::All),
        manifold: cfg.manifold.clone(),
        u_source: cfg.u_source,
        betas: cfg.betas.clone(),
        radius_grid: cfg.radius_grid,
        level_parameter: cfg.level_parameter,
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        output: cfg.output.clone().or(env_output).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        format: cfg.format.unwrap_or(Format::Both),
    };
    if i64::try_from(r.seed).is_err() {
        return Err(origins.error("seed", format!("{} does not fit a TOML integer (max {})", r.seed, i64::MAX)));
    }
    let spec = r.spec();
    spec.validate().map_err(|e| origins.error("manifold", e.to_string()))?;
    if let Some(g) = r.radius_grid {
        g.validate().map_err(|e| origins.error("radius_grid", e.to_string()))?;
    }
    let plan = r.plan();
    let runs = |s: Suite| plan.iter().any(|(p, skip)| *p == s && skip.is_none());

    // Identities without a manifold run on the default cases, all of dimension 3.
    let n = if r.manifold.is_none() && r.suite == Suite::Identities { 3 } else { spec.dim() };
    if let Some(betas) = &r.betas {
        if betas.is_empty() {
            return Err(origins.error("betas", "empty list"));
        }
        for &b in betas {
            tilde_beta(n, b).map_err(|e| origins.error("betas", e.to_string()))?;
        }
    }
    if runs(Suite::Monotone) || runs(Suite::Umbilic) {
        LevelSets::new(&spec, r.u()).map_err(|e| origins.error(u_key(cfg), e.to_string()))?;
    }
    if runs(Suite::Identities) && (r.manifold.is_some() || r.u_source.is_some()) {
        build_u(&spec, r.u()).map_err(|e| origins.error(u_key(cfg), e.to_string()))?;
    }
    if runs(Suite::GreensProfile) && !spec.is_radial() {
        return Err(origins.error("manifold", format!("greens-profile needs a rotationally symmetric model, got {spec}")));
    }
    if runs(Suite::Monotone) && spec.is_radial() {
        let levels = r.grid(Suite::Monotone).levels().len();
        if levels < 5 {
            return Err(origins.error("radius_grid", format!("{levels} levels; the monotone suite needs at least 5")));
        }
    }
    Ok(r)
}

/// Blame u_source when it was given, the manifold otherwise.
fn u_key(cfg: &RunConfig) -> &'static str {
    if cfg.u_source.is_some() {
        "u_source"
    } else {
        "manifold"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_counts_from_one() {
        let text = "a = 1\nbb = 2\n";
        assert_eq!(line_col(text, 0), (1, 1));
        assert_eq!(line_col(text, 6), (2, 1));
        assert_eq!(line_col(text, 11), (2, 6));
    }

    #[test]
    fn key_span_finds_keys_and_headers() {
        let src = Source { path: "c.toml".into(), text: "seed = 3\n  betas = [1.0]\n[manifold]\nkind = \"euclidean\"\nn = 3\n".into() };
        let at = |k| src.key_span(k).map(|s| line_col(&src.text, s.start));
        assert_eq!(at("betas"), Some((2, 3)));
        assert_eq!(at("manifold"), Some((3, 1)));
        assert_eq!(at("format"), None);
    }
}
