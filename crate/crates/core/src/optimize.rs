//! Box-constrained random search for meta-parameter tuning.
//!
//! The search keeps a small set of best-so-far anchor points. Each iteration
//! draws Gaussian perturbations around the anchors (rotating through them),
//! clamps the samples into the box, and accepts any sample at least as good
//! as the incumbent: strictly better replaces the anchor set, ties extend it
//! up to a cap. The perturbation scale starts at half the box width per
//! dimension and shrinks geometrically every iteration, so the search
//! coarsely explores first and then polishes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Search failures: bad setup, or an objective error (reported together with
/// the point that triggered it).
#[derive(Debug, Error)]
pub enum SearchError<E>
where
    E: std::error::Error + 'static,
{
    /// The space or configuration is unusable.
    #[error("invalid search setup: {0}")]
    InvalidParameter(String),
    /// The objective failed; `point` is where.
    #[error("objective evaluation failed at {point:?}: {source}")]
    Objective {
        /// The parameter point whose evaluation failed.
        point: Vec<f64>,
        /// The objective's own error.
        source: E,
    },
}

/// One box-constrained parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParam {
    /// Parameter name, used for reporting.
    pub name: String,
    /// Lower bound (inclusive).
    pub min: f64,
    /// Upper bound (inclusive).
    pub max: f64,
}

impl SearchParam {
    /// A named parameter over `[min, max]`.
    pub fn new(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            min,
            max,
        }
    }
}

/// The box the search explores.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    params: Vec<SearchParam>,
}

impl SearchSpace {
    /// Builds a space; every parameter needs finite bounds with `min < max`.
    pub fn new(params: Vec<SearchParam>) -> Result<Self, String> {
        if params.is_empty() {
            return Err("search space has no parameters".into());
        }
        for p in &params {
            if !(p.min.is_finite() && p.max.is_finite() && p.min < p.max) {
                return Err(format!(
                    "parameter `{}` needs finite bounds with min < max, got [{}, {}]",
                    p.name, p.min, p.max
                ));
            }
        }
        Ok(Self { params })
    }

    /// The parameters in order.
    pub fn params(&self) -> &[SearchParam] {
        &self.params
    }

    /// Number of dimensions.
    pub fn dims(&self) -> usize {
        self.params.len()
    }

    /// The center of the box: the default start point.
    pub fn midpoint(&self) -> Vec<f64> {
        self.params.iter().map(|p| (p.min + p.max) / 2.0).collect()
    }

    fn clamp(&self, point: &mut [f64]) {
        for (x, p) in point.iter_mut().zip(&self.params) {
            *x = x.clamp(p.min, p.max);
        }
    }
}

/// Search schedule and seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Outer iterations; the perturbation scale decays once per iteration.
    pub iterations: usize,
    /// Samples drawn per iteration.
    pub subiterations: usize,
    /// Geometric decay of the perturbation scale, in (0, 1].
    pub decay: f64,
    /// Maximum number of tied best points kept as anchors.
    pub ties_kept: usize,
    /// RNG seed; equal seeds reproduce the search exactly.
    pub seed: u64,
    /// Start point; the box midpoint when omitted.
    pub start: Option<Vec<f64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            subiterations: 8,
            decay: 0.9,
            ties_kept: 4,
            seed: 0,
            start: None,
        }
    }
}

/// One objective evaluation in the search trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    /// Outer iteration (0-based).
    pub iteration: usize,
    /// Sample within the iteration (0-based).
    pub subiteration: usize,
    /// The evaluated point.
    pub point: Vec<f64>,
    /// Its objective value.
    pub value: f64,
}

/// What the search found.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// The tied best points, in discovery order (at most `ties_kept`).
    pub best_points: Vec<Vec<f64>>,
    /// The best objective value seen.
    pub best_value: f64,
    /// Every sampled evaluation, in order; the start point is not included.
    pub trace: Vec<TracePoint>,
}

/// Maximizes `objective` over `space` by seeded Gaussian random search.
///
/// The start point is evaluated first to initialize the incumbent; each of
/// `iterations × subiterations` samples perturbs one anchor (rotating through
/// the tied set), is clamped into the box, and is accepted when its value is
/// at least the incumbent's. An objective error anywhere aborts the search.
pub fn random_search<E>(
    space: &SearchSpace,
    config: &SearchConfig,
    mut objective: impl FnMut(&[f64]) -> Result<f64, E>,
) -> Result<SearchOutcome, SearchError<E>>
where
    E: std::error::Error + 'static,
{
    if config.ties_kept == 0 {
        return Err(SearchError::InvalidParameter(
            "ties_kept must be at least 1".into(),
        ));
    }
    if !(config.decay > 0.0 && config.decay <= 1.0) {
        return Err(SearchError::InvalidParameter(format!(
            "decay must lie in (0, 1], got {}",
            config.decay
        )));
    }
    let start = match &config.start {
        Some(point) => {
            if point.len() != space.dims() {
                return Err(SearchError::InvalidParameter(format!(
                    "start point has {} coordinates for {} parameters",
                    point.len(),
                    space.dims()
                )));
            }
            for (x, p) in point.iter().zip(space.params()) {
                if !(p.min..=p.max).contains(x) {
                    return Err(SearchError::InvalidParameter(format!(
                        "start coordinate {x} outside [{}, {}] for `{}`",
                        p.min, p.max, p.name
                    )));
                }
            }
            point.clone()
        }
        None => space.midpoint(),
    };

    let evaluate = |point: &[f64], objective: &mut dyn FnMut(&[f64]) -> Result<f64, E>| {
        objective(point).map_err(|source| SearchError::Objective {
            point: point.to_vec(),
            source,
        })
    };

    let mut best_value = evaluate(&start, &mut objective)?;
    let mut best_points = vec![start];
    let mut trace = Vec::with_capacity(config.iterations * config.subiterations);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut sigma: Vec<f64> = space
        .params()
        .iter()
        .map(|p| 0.5 * (p.max - p.min))
        .collect();
    for iteration in 0..config.iterations {
        for subiteration in 0..config.subiterations {
            let anchor = &best_points[subiteration % best_points.len()];
            let mut point: Vec<f64> = anchor
                .iter()
                .zip(&sigma)
                .map(|(&a, &s)| a + s * unit.sample(&mut rng))
                .collect();
            space.clamp(&mut point);
            let value = evaluate(&point, &mut objective)?;
            trace.push(TracePoint {
                iteration,
                subiteration,
                point: point.clone(),
                value,
            });
            if value > best_value {
                best_value = value;
                best_points.clear();
                best_points.push(point);
            } else if value == best_value && best_points.len() < config.ties_kept {
                best_points.push(point);
            }
        }
        for s in &mut sigma {
            *s *= config.decay;
        }
    }
    Ok(SearchOutcome {
        best_points,
        best_value,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn space(bounds: &[(f64, f64)]) -> SearchSpace {
        SearchSpace::new(
            bounds
                .iter()
                .enumerate()
                .map(|(i, &(min, max))| SearchParam::new(format!("p{i}"), min, max))
                .collect(),
        )
        .unwrap()
    }

    fn ok(value: f64) -> Result<f64, Infallible> {
        Ok(value)
    }

    #[test]
    fn finds_a_quadratic_peak() {
        let space = space(&[(0.0, 1.0)]);
        let config = SearchConfig {
            iterations: 50,
            subiterations: 8,
            seed: 7,
            ..Default::default()
        };
        let outcome = random_search(&space, &config, |x| ok(-(x[0] - 0.3) * (x[0] - 0.3))).unwrap();
        assert!((outcome.best_points[0][0] - 0.3).abs() <= 0.01);
        assert_eq!(outcome.trace.len(), 400);
        // The running best over the trace never decreases.
        let mut best = f64::NEG_INFINITY;
        for tp in &outcome.trace {
            let running = tp.value.max(best);
            assert!(running >= best);
            best = running;
        }
        assert_eq!(best, outcome.best_value);
    }

    #[test]
    fn equal_seeds_reproduce_and_different_seeds_diverge() {
        let space = space(&[(0.0, 1.0), (-2.0, 2.0)]);
        let config = SearchConfig {
            iterations: 10,
            subiterations: 5,
            seed: 42,
            ..Default::default()
        };
        let f = |x: &[f64]| ok(-(x[0] * x[0]) - (x[1] - 1.0) * (x[1] - 1.0));
        let a = random_search(&space, &config, f).unwrap();
        let b = random_search(&space, &config, f).unwrap();
        assert_eq!(a, b);
        let other = SearchConfig { seed: 43, ..config };
        let c = random_search(&space, &other, f).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn samples_stay_inside_the_box_and_constant_objectives_tie() {
        let space = space(&[(0.25, 0.5)]);
        let config = SearchConfig {
            iterations: 6,
            subiterations: 10,
            ties_kept: 3,
            seed: 1,
            ..Default::default()
        };
        let outcome = random_search(&space, &config, |_| ok(1.0)).unwrap();
        assert_eq!(outcome.trace.len(), 60, "one trace entry per sample");
        for tp in &outcome.trace {
            assert!((0.25..=0.5).contains(&tp.point[0]));
        }
        assert_eq!(outcome.best_value, 1.0);
        assert_eq!(outcome.best_points.len(), 3, "tied set capped at ties_kept");
    }

    #[test]
    fn start_point_overrides_the_midpoint() {
        let space = space(&[(0.0, 10.0)]);
        let config = SearchConfig {
            iterations: 0,
            subiterations: 0,
            start: Some(vec![9.0]),
            ..Default::default()
        };
        let outcome = random_search(&space, &config, |x| ok(x[0])).unwrap();
        assert_eq!(outcome.best_points, vec![vec![9.0]]);
        assert_eq!(outcome.best_value, 9.0);
        assert!(outcome.trace.is_empty());

        let no_start = SearchConfig {
            iterations: 0,
            subiterations: 0,
            ..Default::default()
        };
        let outcome = random_search(&space, &no_start, |x| ok(x[0])).unwrap();
        assert_eq!(outcome.best_points, vec![vec![5.0]]);

        let bad = SearchConfig {
            start: Some(vec![11.0]),
            ..Default::default()
        };
        assert!(matches!(
            random_search(&space, &bad, |x| ok(x[0])),
            Err(SearchError::InvalidParameter(_))
        ));
        let bad = SearchConfig {
            start: Some(vec![1.0, 2.0]),
            ..Default::default()
        };
        assert!(matches!(
            random_search(&space, &bad, |x| ok(x[0])),
            Err(SearchError::InvalidParameter(_))
        ));
    }

    #[test]
    fn objective_failures_carry_the_point() {
        let space = space(&[(0.0, 1.0)]);
        let config = SearchConfig {
            iterations: 3,
            subiterations: 3,
            seed: 9,
            ..Default::default()
        };
        let result = random_search(&space, &config, |x| {
            if x[0] > 0.5 {
                Err(std::io::Error::other("unstable configuration"))
            } else {
                Ok(x[0])
            }
        });
        match result {
            Err(SearchError::Objective { point, source }) => {
                assert!(point[0] > 0.5);
                assert_eq!(source.to_string(), "unstable configuration");
            }
            other => panic!("expected an objective failure, got {other:?}"),
        }
        assert!(matches!(
            random_search(
                &space,
                &SearchConfig {
                    ties_kept: 0,
                    ..Default::default()
                },
                |x| ok(x[0])
            ),
            Err(SearchError::InvalidParameter(_))
        ));
        assert!(SearchSpace::new(vec![SearchParam::new("x", 1.0, 1.0)]).is_err());
        assert!(SearchSpace::new(vec![]).is_err());
    }
}
