//! The unified smoothing framework: discount functions, background models,
//! and backoff-weight computation.
//!
//! Everything is one generalized interpolation. A label's counts `C(l, n)`
//! are discounted by `D(l, n)`, the kept mass is normalized into the
//! unsmoothed distribution `p_l^u`, and the removed mass becomes the backoff
//! weight
//!
//! ```text
//! alpha_l = 1 - Σ_n (C(l,n) - D(l,n)) / (mu + Σ_n C(l,n))
//! ```
//!
//! routed to a background distribution: `p_l(n) = (1-alpha_l)·p_l^u(n) +
//! alpha_l·p^u(n)`. The classic schemes are rows of this scheme:
//! Jelinek-Mercer is a linear discount with `mu = 0` (`alpha = beta`), the
//! Dirichlet prior is no discount with `mu > 0`, two-stage smoothing combines
//! both, absolute/power-law discounting subtract `min(delta, c)` /
//! `delta·c^delta`, and the Pitman-Yor approximation is power-law discounting
//! plus a Dirichlet `mu`.

use thiserror::Error;

use crate::corpus::Collection;

/// Errors produced by smoothing computations.
#[derive(Debug, Error)]
pub enum SmoothingError {
    /// A parameter is outside its permitted range.
    #[error("invalid smoothing parameter: {0}")]
    InvalidParameter(String),
    /// A background model was requested over all-zero statistics.
    #[error("background model is degenerate: collection statistics are all zero")]
    DegenerateBackground,
    /// The power-residual background needs a discount parameter and none was
    /// given directly or via the conditional discount.
    #[error("power-residual background needs a delta (none given, and the discount has none)")]
    MissingDiscountDelta,
}

/// The discount function `D(l, n)` applied to a count `c = C(l, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscountSpec {
    /// No discounting: `D = 0`.
    None,
    /// Linear discounting `D = beta·c` (Jelinek-Mercer interpolation).
    Linear {
        /// Fraction of each count removed, in `[0, 1]`.
        beta: f64,
    },
    /// Absolute discounting `D = min(delta, c)`, floored at the observed mass
    /// so fractional counts below `delta` never go negative.
    Absolute {
        /// Constant subtracted from each count, in `[0, 1]`.
        delta: f64,
    },
    /// Power-law discounting `D = delta·c^delta` (with `D = 0` at `c = 0`),
    /// clamped to the observed mass.
    PowerLaw {
        /// Discount exponent and scale, in `[0, 1]`.
        delta: f64,
    },
    /// Power-law plus linear: `D = delta·c^delta + beta·(c - delta·c^delta)`.
    Combined {
        /// Power-law part, in `[0, 1]`.
        delta: f64,
        /// Linear part applied to what the power-law discount left, in `[0, 1]`.
        beta: f64,
    },
}

impl DiscountSpec {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<(), SmoothingError> {
        let check = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                Err(SmoothingError::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            DiscountSpec::None => Ok(()),
            DiscountSpec::Linear { beta } => check("beta", beta),
            DiscountSpec::Absolute { delta } | DiscountSpec::PowerLaw { delta } => {
                check("delta", delta)
            }
            DiscountSpec::Combined { delta, beta } => {
                check("delta", delta)?;
                check("beta", beta)
            }
        }
    }

    /// The `delta` parameter, for discounts that have one.
    pub fn delta(&self) -> Option<f64> {
        match *self {
            DiscountSpec::Absolute { delta }
            | DiscountSpec::PowerLaw { delta }
            | DiscountSpec::Combined { delta, .. } => Some(delta),
            _ => None,
        }
    }
}

/// The background distribution backoff mass flows to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundSpec {
    /// `1/N` for every term.
    Uniform,
    /// Collection relative frequencies `Σ_l C(l,n) / Σ_l Σ_n C(l,n)`.
    Collection,
    /// `(1 - upsilon)·collection + upsilon·uniform`.
    UniformSmoothedCollection {
        /// Uniform mixing weight, in `[0, 1]`.
        upsilon: f64,
    },
    /// Context counts: `p^u(n) ∝ |{l : C(l,n) > 0}|` — how many labels a term
    /// appears under, the natural companion of absolute discounting.
    KnContext,
    /// Power-law residuals: `p^u(n) ∝ Σ_l delta·C(l,n)^delta` — the mass the
    /// power-law discount removes, as a distribution.
    PowerResidual {
        /// Explicit exponent; when `None` the conditional discount's `delta`
        /// is reused.
        delta: Option<f64>,
    },
}

impl BackgroundSpec {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<(), SmoothingError> {
        match *self {
            BackgroundSpec::UniformSmoothedCollection { upsilon }
                if !(0.0..=1.0).contains(&upsilon) =>
            {
                Err(SmoothingError::InvalidParameter(format!(
                    "background upsilon must lie in [0, 1], got {upsilon}"
                )))
            }
            BackgroundSpec::PowerResidual { delta: Some(d) } if !(0.0..=1.0).contains(&d) => {
                Err(SmoothingError::InvalidParameter(format!(
                    "power-residual delta must lie in [0, 1], got {d}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// A complete smoothing selection: discount, background, and Dirichlet mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    /// Discount function for the conditional counts.
    pub discount: DiscountSpec,
    /// Background distribution specification.
    pub background: BackgroundSpec,
    /// Dirichlet pseudo-mass `mu ≥ 0` added to the normalizer.
    pub dirichlet_mu: f64,
}

impl SmoothingConfig {
    /// Jelinek-Mercer interpolation: `alpha = beta` for every label.
    pub fn jelinek_mercer(beta: f64) -> Self {
        Self {
            discount: DiscountSpec::Linear { beta },
            background: BackgroundSpec::Collection,
            dirichlet_mu: 0.0,
        }
    }

    /// Dirichlet-prior smoothing: `alpha = 1 - ΣC/(mu + ΣC)`.
    pub fn dirichlet(mu: f64) -> Self {
        Self {
            discount: DiscountSpec::None,
            background: BackgroundSpec::Collection,
            dirichlet_mu: mu,
        }
    }

    /// Two-stage smoothing: linear discount plus Dirichlet mass.
    pub fn two_stage(beta: f64, mu: f64) -> Self {
        Self {
            discount: DiscountSpec::Linear { beta },
            background: BackgroundSpec::Collection,
            dirichlet_mu: mu,
        }
    }

    /// Absolute discounting.
    pub fn absolute(delta: f64) -> Self {
        Self {
            discount: DiscountSpec::Absolute { delta },
            background: BackgroundSpec::Collection,
            dirichlet_mu: 0.0,
        }
    }

    /// Power-law discounting.
    pub fn power_law(delta: f64) -> Self {
        Self {
            discount: DiscountSpec::PowerLaw { delta },
            background: BackgroundSpec::Collection,
            dirichlet_mu: 0.0,
        }
    }

    /// Pitman-Yor approximation: power-law discount plus Dirichlet mass.
    pub fn pitman_yor(delta: f64, mu: f64) -> Self {
        Self {
            discount: DiscountSpec::PowerLaw { delta },
            background: BackgroundSpec::Collection,
            dirichlet_mu: mu,
        }
    }

    /// Replaces the background specification.
    pub fn with_background(mut self, background: BackgroundSpec) -> Self {
        self.background = background;
        self
    }

    /// Checks parameter ranges and that some smoothing mass exists
    /// (a discount or a positive `mu`), so no zero-probability terms survive.
    pub fn validate(&self) -> Result<(), SmoothingError> {
        self.discount.validate()?;
        self.background.validate()?;
        if !self.dirichlet_mu.is_finite() || self.dirichlet_mu < 0.0 {
            return Err(SmoothingError::InvalidParameter(format!(
                "mu must be finite and ≥ 0, got {}",
                self.dirichlet_mu
            )));
        }
        if matches!(self.discount, DiscountSpec::None) && self.dirichlet_mu == 0.0 {
            return Err(SmoothingError::InvalidParameter(
                "no smoothing mass: either use a discount or a positive mu".into(),
            ));
        }
        Ok(())
    }
}

/// The discounted amount `D` for one count `c ≥ 0`; always `0 ≤ D ≤ c`.
pub fn discount_amount(c: f64, spec: &DiscountSpec) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    match *spec {
        DiscountSpec::None => 0.0,
        DiscountSpec::Linear { beta } => beta * c,
        DiscountSpec::Absolute { delta } => delta.min(c),
        DiscountSpec::PowerLaw { delta } => (delta * c.powf(delta)).min(c),
        DiscountSpec::Combined { delta, beta } => {
            let power = (delta * c.powf(delta)).min(c);
            power + beta * (c - power)
        }
    }
}

/// The backoff weight `alpha_l = 1 - Σ(C - D)/(mu + ΣC)` of a label whose
/// non-zero counts are `counts`. Empty or all-zero labels back off fully
/// (`alpha = 1`).
pub fn smoothing_weight(counts: impl IntoIterator<Item = f64>, cfg: &SmoothingConfig) -> f64 {
    let mut total = 0.0;
    let mut kept = 0.0;
    for c in counts {
        total += c;
        kept += c - discount_amount(c, &cfg.discount);
    }
    if total <= 0.0 {
        return 1.0;
    }
    (1.0 - kept / (cfg.dirichlet_mu + total)).clamp(0.0, 1.0)
}

/// Discounts and normalizes a label's sparse counts into its unsmoothed
/// distribution `p_l^u` (entries that lose all mass are dropped), returning
/// the distribution together with the backoff weight `alpha_l`.
pub fn discounted_distribution(
    counts: &[(u32, f64)],
    cfg: &SmoothingConfig,
) -> (Vec<(u32, f64)>, f64) {
    let alpha = smoothing_weight(counts.iter().map(|&(_, c)| c), cfg);
    let kept: Vec<(u32, f64)> = counts
        .iter()
        .map(|&(n, c)| (n, c - discount_amount(c, &cfg.discount)))
        .filter(|&(_, k)| k > 0.0)
        .collect();
    let kept_sum: f64 = kept.iter().map(|&(_, k)| k).sum();
    if kept_sum <= 0.0 {
        return (Vec::new(), alpha);
    }
    (
        kept.into_iter().map(|(n, k)| (n, k / kept_sum)).collect(),
        alpha,
    )
}

/// Builds the dense background distribution over terms `0..N-1`.
///
/// `discount` supplies a fallback `delta` for the power-residual background
/// when its own is not set; the other backgrounds ignore it.
pub fn background_model(
    stats: &Collection,
    spec: &BackgroundSpec,
    discount: &DiscountSpec,
) -> Result<Vec<f64>, SmoothingError> {
    spec.validate()?;
    let n = stats.num_terms() as usize;
    if n == 0 {
        return Err(SmoothingError::DegenerateBackground);
    }
    let normalize = |mut values: Vec<f64>| -> Result<Vec<f64>, SmoothingError> {
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(SmoothingError::DegenerateBackground);
        }
        for v in &mut values {
            *v /= total;
        }
        Ok(values)
    };
    match *spec {
        BackgroundSpec::Uniform => Ok(vec![1.0 / n as f64; n]),
        BackgroundSpec::Collection => {
            let mut values = vec![0.0; n];
            for (_, term, c) in stats.joint_counts() {
                values[term as usize] += c;
            }
            normalize(values)
        }
        BackgroundSpec::UniformSmoothedCollection { upsilon } => {
            let collection = background_model(stats, &BackgroundSpec::Collection, discount)?;
            let uniform = 1.0 / n as f64;
            Ok(collection
                .into_iter()
                .map(|p| (1.0 - upsilon) * p + upsilon * uniform)
                .collect())
        }
        BackgroundSpec::KnContext => {
            let mut values = vec![0.0; n];
            for (_, term, c) in stats.joint_counts() {
                if c > 0.0 {
                    values[term as usize] += 1.0;
                }
            }
            normalize(values)
        }
        BackgroundSpec::PowerResidual { delta } => {
            let delta = delta
                .or_else(|| discount.delta())
                .ok_or(SmoothingError::MissingDiscountDelta)?;
            let mut values = vec![0.0; n];
            for (_, term, c) in stats.joint_counts() {
                if c > 0.0 {
                    values[term as usize] += delta * c.powf(delta);
                }
            }
            normalize(values)
        }
    }
}

/// The discount estimate `delta = n1 / (n1 + 2·n2)` from (possibly
/// fractional, expected) counts of count-1 and count-2 types; 0 when both
/// vanish.
pub fn kneser_ney_delta(n1: f64, n2: f64) -> f64 {
    let denom = n1 + 2.0 * n2;
    if denom <= 0.0 {
        return 0.0;
    }
    (n1 / denom).clamp(0.0, 1.0)
}

/// Reference path: the fully materialized smoothed conditional
/// `p_l(n) = (1 - alpha_l)·p_l^u(n) + alpha_l·p^u(n)` as a dense
/// distribution. The inverted index computes the same values sparsely.
pub fn smooth_conditional(
    label_counts: &[(u32, f64)],
    background: &[f64],
    cfg: &SmoothingConfig,
) -> Result<Vec<f64>, SmoothingError> {
    let (unsmoothed, alpha) = discounted_distribution(label_counts, cfg);
    let mut out: Vec<f64> = background.iter().map(|&b| alpha * b).collect();
    for (term, p) in unsmoothed {
        let slot = out.get_mut(term as usize).ok_or_else(|| {
            SmoothingError::InvalidParameter(format!(
                "count for term {term} outside background dictionary of size {}",
                background.len()
            ))
        })?;
        *slot += (1.0 - alpha) * p;
    }
    Ok(out)
}
