//! Key=value configuration: file parsing, command-line overrides, and typed
//! resolution into the core library's configuration structs.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment.
//! Values given on the command line (`--set key=value`) override file values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use sgm_core::baselines::Bm25Params;
use sgm_core::smoothing::{BackgroundSpec, DiscountSpec, SmoothingConfig};
use sgm_core::weighting::{IdfVariant, WeightingConfig, WeightingMode};

/// Raw key=value pairs, file order irrelevant.
pub type ConfigMap = BTreeMap<String, String>;

/// Splits a single `key=value` argument.
pub fn parse_pair(s: &str) -> Result<(String, String)> {
    let (key, value) = s
        .split_once('=')
        .with_context(|| format!("expected key=value, got `{s}`"))?;
    let key = key.trim();
    if key.is_empty() {
        bail!("empty key in `{s}`");
    }
    Ok((key.to_string(), value.trim().to_string()))
}

/// Reads a config file into a map; later lines override earlier ones.
pub fn parse_config_file(path: &Path) -> Result<ConfigMap> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = ConfigMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            parse_pair(line).with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        map.insert(key, value);
    }
    Ok(map)
}

/// Assembles the effective configuration: the optional file first, then the
/// `--set` overrides on top.
pub fn load_config(file: Option<&Path>, sets: &[String]) -> Result<ConfigMap> {
    let mut map = match file {
        Some(path) => parse_config_file(path)?,
        None => ConfigMap::new(),
    };
    for s in sets {
        let (key, value) = parse_pair(s)?;
        map.insert(key, value);
    }
    Ok(map)
}

/// Which generative model to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Flat multinomial naive Bayes (one leaf per label).
    Mnb,
    /// Tied document mixture (one leaf per training document per label).
    Tdm,
}

/// Fully resolved, validated settings.
#[derive(Debug, Clone)]
pub struct Settings {
    /// Generalized TF-IDF transform configuration.
    pub weighting: WeightingConfig,
    /// Model family.
    pub model_kind: ModelKind,
    /// Prior-scaling exponent (1 = untouched priors).
    pub prior_scale: f64,
    /// Poisson length-model weight (0 = no length model).
    pub length_scale: f64,
    /// When set, every Dirichlet `mu` is multiplied by the number of labels
    /// at training time.
    pub mu_scale_labels: bool,
    /// Smoothing for flat models, and the fallback for unset per-level keys.
    pub smooth: SmoothingConfig,
    /// Document-level smoothing for the tied document mixture.
    pub tdm_document: SmoothingConfig,
    /// Label-level smoothing for the tied document mixture.
    pub tdm_label: SmoothingConfig,
    /// Collection-level smoothing for the tied document mixture.
    pub tdm_collection: SmoothingConfig,
    /// BM25 baseline parameters.
    pub bm25: Bm25Params,
}

const SMOOTH_SUFFIXES: &[&str] = &[
    "discount",
    "beta",
    "delta",
    "mu",
    "background",
    "upsilon_bg",
];

fn is_known_key(key: &str) -> bool {
    match key {
        "weighting.phi" | "weighting.upsilon" | "weighting.mode" | "weighting.idf" => true,
        "model.kind" | "model.prior_scale" | "model.length_scale" => true,
        "smooth.mu_scale" => true,
        "bm25.k1" | "bm25.b" | "bm25.k3" | "bm25.idf" => true,
        _ => {
            if let Some(rest) = key.strip_prefix("smooth.") {
                if SMOOTH_SUFFIXES.contains(&rest) {
                    return true;
                }
                for level in ["document", "label", "collection"] {
                    if let Some(suffix) = rest.strip_prefix(&format!("{level}.")) {
                        return SMOOTH_SUFFIXES.contains(&suffix);
                    }
                }
            }
            false
        }
    }
}

fn parse_f64(value: &str, key: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .with_context(|| format!("`{key}` expects a number, got `{value}`"))
}

fn idf_variant(value: &str, key: &str) -> Result<IdfVariant> {
    Ok(match value {
        "rw" => IdfVariant::RobertsonWalker,
        "chs" => IdfVariant::CroftHarperSmoothed,
        "chu" => IdfVariant::CroftHarperUnsmoothed,
        other => bail!("`{key}` must be one of rw|chs|chu, got `{other}`"),
    })
}

/// Resolves one smoothing level. `level` is `None` for the top-level
/// `smooth.*` keys and `Some("document" | "label" | "collection")` for the
/// per-level keys, which fall back to the top-level values.
fn resolve_smoothing(map: &ConfigMap, level: Option<&str>) -> Result<SmoothingConfig> {
    let lookup = |suffix: &str| -> Option<&String> {
        if let Some(level) = level {
            if let Some(v) = map.get(&format!("smooth.{level}.{suffix}")) {
                return Some(v);
            }
        }
        map.get(&format!("smooth.{suffix}"))
    };
    let key_name = |suffix: &str| match level {
        Some(level) => format!("smooth.{level}.{suffix}"),
        None => format!("smooth.{suffix}"),
    };

    let beta = match lookup("beta") {
        Some(v) => parse_f64(v, &key_name("beta"))?,
        None => 0.5,
    };
    let delta = lookup("delta")
        .map(|v| parse_f64(v, &key_name("delta")))
        .transpose()?;
    let require_delta = |what: &str| -> Result<f64> {
        delta.with_context(|| {
            format!(
                "`{}` is required for the {what} discount",
                key_name("delta")
            )
        })
    };

    let discount_name = lookup("discount").map(String::as_str).unwrap_or("linear");
    let discount = match discount_name {
        "none" => DiscountSpec::None,
        "linear" => DiscountSpec::Linear { beta },
        "absolute" => DiscountSpec::Absolute {
            delta: require_delta("absolute")?,
        },
        "power_law" => DiscountSpec::PowerLaw {
            delta: require_delta("power-law")?,
        },
        "combined" => DiscountSpec::Combined {
            delta: require_delta("combined")?,
            beta,
        },
        other => bail!(
            "`{}` must be one of none|linear|absolute|power_law|combined, got `{other}`",
            key_name("discount")
        ),
    };

    let background_name = lookup("background")
        .map(String::as_str)
        .unwrap_or("collection");
    let background = match background_name {
        "uniform" => BackgroundSpec::Uniform,
        "collection" => BackgroundSpec::Collection,
        "uniform_collection" => {
            let upsilon = match lookup("upsilon_bg") {
                Some(v) => parse_f64(v, &key_name("upsilon_bg"))?,
                None => 0.5,
            };
            BackgroundSpec::UniformSmoothedCollection { upsilon }
        }
        "kn_context" => BackgroundSpec::KnContext,
        "power_residual" => BackgroundSpec::PowerResidual { delta },
        other => bail!(
            "`{}` must be one of uniform|collection|uniform_collection|kn_context|power_residual, got `{other}`",
            key_name("background")
        ),
    };

    let dirichlet_mu = match lookup("mu") {
        Some(v) => parse_f64(v, &key_name("mu"))?,
        None => 0.0,
    };

    let config = SmoothingConfig {
        discount,
        background,
        dirichlet_mu,
    };
    config
        .validate()
        .with_context(|| format!("invalid smoothing for `{}`", key_name("*")))?;
    Ok(config)
}

impl Settings {
    /// Resolves and validates a raw config map; unknown keys are errors.
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        for key in map.keys() {
            if !is_known_key(key) {
                bail!("unknown configuration key `{key}`");
            }
        }

        let weighting = WeightingConfig {
            phi: match map.get("weighting.phi") {
                Some(v) => parse_f64(v, "weighting.phi")?,
                None => 0.0,
            },
            upsilon: match map.get("weighting.upsilon") {
                Some(v) => parse_f64(v, "weighting.upsilon")?,
                None => 0.0,
            },
            mode: match map.get("weighting.mode").map(String::as_str) {
                None | Some("none") => WeightingMode::None,
                Some("query_only") => WeightingMode::QueryOnly,
                Some("document_and_train") => WeightingMode::DocumentAndTrain,
                Some(other) => bail!(
                    "`weighting.mode` must be one of none|query_only|document_and_train, got `{other}`"
                ),
            },
            idf_variant: match map.get("weighting.idf") {
                Some(v) => idf_variant(v, "weighting.idf")?,
                None => IdfVariant::RobertsonWalker,
            },
        };
        weighting
            .validate()
            .context("invalid weighting configuration")?;

        let model_kind = match map.get("model.kind").map(String::as_str) {
            None | Some("mnb") => ModelKind::Mnb,
            Some("tdm") => ModelKind::Tdm,
            Some(other) => bail!("`model.kind` must be mnb or tdm, got `{other}`"),
        };
        let prior_scale = match map.get("model.prior_scale") {
            Some(v) => parse_f64(v, "model.prior_scale")?,
            None => 1.0,
        };
        let length_scale = match map.get("model.length_scale") {
            Some(v) => parse_f64(v, "model.length_scale")?,
            None => 0.0,
        };
        let mu_scale_labels = match map.get("smooth.mu_scale").map(String::as_str) {
            None | Some("raw") => false,
            Some("labels") => true,
            Some(other) => bail!("`smooth.mu_scale` must be raw or labels, got `{other}`"),
        };

        let defaults = Bm25Params::default();
        let bm25 = Bm25Params {
            k1: match map.get("bm25.k1") {
                Some(v) => parse_f64(v, "bm25.k1")?,
                None => defaults.k1,
            },
            b: match map.get("bm25.b") {
                Some(v) => parse_f64(v, "bm25.b")?,
                None => defaults.b,
            },
            k3: match map.get("bm25.k3") {
                Some(v) => parse_f64(v, "bm25.k3")?,
                None => defaults.k3,
            },
            idf_variant: match map.get("bm25.idf") {
                Some(v) => idf_variant(v, "bm25.idf")?,
                None => defaults.idf_variant,
            },
        };
        bm25.validate().context("invalid bm25 configuration")?;

        Ok(Self {
            weighting,
            model_kind,
            prior_scale,
            length_scale,
            mu_scale_labels,
            smooth: resolve_smoothing(map, None)?,
            tdm_document: resolve_smoothing(map, Some("document"))?,
            tdm_label: resolve_smoothing(map, Some("label"))?,
            tdm_collection: resolve_smoothing(map, Some("collection"))?,
            bm25,
        })
    }

    /// Applies the label-count scaling of `mu` (when configured) to every
    /// smoothing level, returning the configs to train with.
    pub fn scaled_smoothing(&self, num_labels: usize) -> ScaledSmoothing {
        let scale = if self.mu_scale_labels {
            num_labels as f64
        } else {
            1.0
        };
        let apply = |cfg: &SmoothingConfig| SmoothingConfig {
            dirichlet_mu: cfg.dirichlet_mu * scale,
            ..*cfg
        };
        ScaledSmoothing {
            flat: apply(&self.smooth),
            document: apply(&self.tdm_document),
            label: apply(&self.tdm_label),
            collection: apply(&self.tdm_collection),
        }
    }
}

/// Smoothing configs with the label-count `mu` scaling already applied.
#[derive(Debug, Clone)]
pub struct ScaledSmoothing {
    /// For flat models.
    pub flat: SmoothingConfig,
    /// Document level of the tied document mixture.
    pub document: SmoothingConfig,
    /// Label level of the tied document mixture.
    pub label: SmoothingConfig,
    /// Collection level of the tied document mixture.
    pub collection: SmoothingConfig,
}
