//! Isometries, displacement functions and translation lengths.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::error::{LabError, Result};
use crate::metric::{stream_rng, MetricSpace, ToleranceConfig};

type PointMap<P> = Arc<dyn Fn(&P) -> P + Send + Sync>;

/// An invertible distance-preserving self-map together with its inverse.
///
/// `equivariant` records whether the space's bicombing commutes with the map.
#[derive(Clone)]
pub struct IsometryDescriptor<P> {
    pub name: String,
    pub space_id: String,
    pub equivariant: bool,
    forward: PointMap<P>,
    inverse: PointMap<P>,
}

impl<P> fmt::Debug for IsometryDescriptor<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IsometryDescriptor")
            .field("name", &self.name)
            .field("space_id", &self.space_id)
            .field("equivariant", &self.equivariant)
            .finish()
    }
}

impl<P: Clone + 'static> IsometryDescriptor<P> {
    pub fn new(
        name: impl Into<String>,
        space_id: impl Into<String>,
        equivariant: bool,
        forward: impl Fn(&P) -> P + Send + Sync + 'static,
        inverse: impl Fn(&P) -> P + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            space_id: space_id.into(),
            equivariant,
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
        }
    }

    pub fn identity(space_id: impl Into<String>) -> Self {
        Self::new("identity", space_id, true, P::clone, P::clone)
    }

    pub fn apply(&self, x: &P) -> P {
        (self.forward)(x)
    }

    pub fn apply_inverse(&self, x: &P) -> P {
        (self.inverse)(x)
    }

    /// `gamma^n(x)` by repeated application (the inverse for negative `n`).
    pub fn power(&self, x: &P, n: i64) -> P {
        let step = if n >= 0 { &self.forward } else { &self.inverse };
        let mut y = x.clone();
        for _ in 0..n.unsigned_abs() {
            y = step(&y);
        }
        y
    }

    pub fn inverse(&self) -> Self {
        Self {
            name: format!("{}^-1", self.name),
            space_id: self.space_id.clone(),
            equivariant: self.equivariant,
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// `self o other`.
    pub fn compose(&self, other: &Self) -> Self {
        let (f1, f2) = (self.forward.clone(), other.forward.clone());
        let (i1, i2) = (self.inverse.clone(), other.inverse.clone());
        Self {
            name: format!("{}*{}", self.name, other.name),
            space_id: self.space_id.clone(),
            equivariant: self.equivariant && other.equivariant,
            forward: Arc::new(move |x| f1(&f2(x))),
            inverse: Arc::new(move |x| i2(&i1(x))),
        }
    }
}

/// `d_gamma(x) = d(x, gamma x)`.
pub fn displacement<S: MetricSpace>(space: &S, iso: &IsometryDescriptor<S::Point>, x: &S::Point) -> f64
where
    S::Point: 'static,
{
    space.distance(x, &iso.apply(x))
}

/// Result of a translation-length estimate or a minimal-displacement search.
#[derive(Debug, Clone, Serialize)]
pub struct DisplacementReport<P> {
    pub translation_length_estimate: f64,
    /// `(lower, upper)`: lower is the reference length (or the final estimate),
    /// upper is `d_gamma(y) + 2 d(x, y) / n` at `n = 1`.
    pub bracket: (f64, f64),
    /// `(n, d(x, gamma^n x) / n)` for `n = 1, 2, 4, ...`.
    pub trace: Vec<(u64, f64)>,
    pub min_point: Option<P>,
    /// Largest amount by which any trace value leaves its bracket.
    pub bracket_residual: f64,
    /// Largest increase of the trace between consecutive doublings.
    pub monotone_residual: f64,
    pub evaluations: usize,
}

impl<P> DisplacementReport<P> {
    pub fn bracket_holds(&self, tol: f64) -> bool {
        self.bracket_residual <= tol
    }
}

/// Estimates `|gamma|` from `d(x, gamma^n x) / n` along doubling `n` up to
/// `n_max` and checks `|gamma| <= d(x, gamma^n x)/n <= d_gamma(x)` at every
/// recorded `n`. `reference` supplies a known `|gamma|` for the lower side.
pub fn translation_length<S: MetricSpace>(
    space: &S,
    iso: &IsometryDescriptor<S::Point>,
    x: &S::Point,
    n_max: u64,
    reference: Option<f64>,
) -> DisplacementReport<S::Point>
where
    S::Point: 'static,
{
    translation_length_with_witness(space, iso, x, x, n_max, reference)
}

/// As [`translation_length`] with the upper bracket
/// `d_gamma(y) + 2 d(x, y) / n` taken at an arbitrary witness `y`.
pub fn translation_length_with_witness<S: MetricSpace>(
    space: &S,
    iso: &IsometryDescriptor<S::Point>,
    x: &S::Point,
    y: &S::Point,
    n_max: u64,
    reference: Option<f64>,
) -> DisplacementReport<S::Point>
where
    S::Point: 'static,
{
    let n_max = n_max.max(1);
    let disp_y = displacement(space, iso, y);
    let dxy = space.distance(x, y);
    let mut trace = Vec::new();
    let mut orbit = x.clone();
    let mut applied = 0u64;
    let mut n = 1u64;
    loop {
        while applied < n {
            orbit = iso.apply(&orbit);
            applied += 1;
        }
        trace.push((n, space.distance(x, &orbit) / n as f64));
        if n >= n_max {
            break;
        }
        n = (n * 2).min(n_max);
    }
    let estimate = trace.last().map_or(0.0, |t| t.1);
    let lower = reference.unwrap_or(estimate);
    let mut bracket_residual: f64 = 0.0;
    for &(n, v) in &trace {
        let upper = disp_y + 2.0 * dxy / n as f64;
        bracket_residual = bracket_residual.max(lower - v).max(v - upper);
    }
    let monotone_residual = trace
        .windows(2)
        .fold(0.0_f64, |m, w| m.max(w[1].1 - w[0].1));
    DisplacementReport {
        translation_length_estimate: estimate,
        bracket: (lower, disp_y + 2.0 * dxy),
        trace,
        min_point: None,
        bracket_residual,
        monotone_residual,
        evaluations: applied as usize,
    }
}

/// Raised when a search runs out of evaluations; carries the best point found.
#[derive(Debug, Clone, Error)]
#[error("search budget exhausted; best displacement so far {}", .best.translation_length_estimate)]
pub struct BudgetExhausted<P: fmt::Debug> {
    pub best: DisplacementReport<P>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub starts: usize,
    /// Maximum displacement evaluations per start.
    pub budget: usize,
    /// Search stops once the step length falls below this value.
    pub min_step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            budget: 20_000,
            min_step: 1e-9,
        }
    }
}

struct LocalResult<P> {
    point: P,
    value: f64,
    evaluations: usize,
    finished: bool,
}

fn descend<S: MetricSpace>(
    space: &S,
    iso: &IsometryDescriptor<S::Point>,
    start: S::Point,
    initial_step: f64,
    cfg: &SearchConfig,
) -> LocalResult<S::Point>
where
    S::Point: 'static,
{
    let mut point = start;
    let mut value = displacement(space, iso, &point);
    let mut evaluations = 1;
    let mut step = initial_step;
    while step >= cfg.min_step {
        let mut improved = false;
        for coord in 0..space.coordinate_count(&point) {
            for sign in [1.0, -1.0] {
                if evaluations >= cfg.budget {
                    return LocalResult { point, value, evaluations, finished: false };
                }
                let Some(candidate) = space.nudge(&point, coord, sign * step) else {
                    continue;
                };
                evaluations += 1;
                let v = displacement(space, iso, &candidate);
                if v < value {
                    point = candidate;
                    value = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    LocalResult { point, value, evaluations, finished: true }
}

fn lexicographic<P: Serialize>(a: &P, b: &P) -> Ordering {
    let sa = serde_json::to_string(a).unwrap_or_default();
    let sb = serde_json::to_string(b).unwrap_or_default();
    sa.cmp(&sb)
}

/// Multi-start coordinate descent on `d_gamma` over the sampler domain.
///
/// Starts run concurrently and are merged by value, then by the serialized
/// point, so the outcome does not depend on scheduling.
pub fn minimize_displacement<S: MetricSpace>(
    space: &S,
    iso: &IsometryDescriptor<S::Point>,
    seed: u64,
    cfg: &SearchConfig,
) -> std::result::Result<DisplacementReport<S::Point>, SearchError<S::Point>>
where
    S::Point: 'static,
{
    let domain = space
        .sampler_domain()
        .ok_or_else(|| SearchError::Lab(LabError::UnsupportedSpace(space.space_id())))?;
    let initial_step = (domain.extent() / 4.0).max(cfg.min_step);
    let tag = format!("min-displacement/{}/{}", space.space_id(), iso.name);
    let results: Vec<LocalResult<S::Point>> = (0..cfg.starts.max(1) as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng: ChaCha8Rng = stream_rng(seed, &tag, i);
            let start = space
                .sample_in(&domain, &mut rng)
                .expect("sampler domain declared");
            descend(space, iso, start, initial_step, cfg)
        })
        .collect();
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let finished = results.iter().all(|r| r.finished);
    let best = results
        .into_iter()
        .min_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then_with(|| lexicographic(&a.point, &b.point))
        })
        .expect("at least one start");
    let report = DisplacementReport {
        translation_length_estimate: best.value,
        bracket: (best.value, best.value),
        trace: Vec::new(),
        min_point: Some(best.point),
        bracket_residual: 0.0,
        monotone_residual: 0.0,
        evaluations,
    };
    if finished {
        Ok(report)
    } else {
        Err(SearchError::Exhausted(BudgetExhausted { best: report }))
    }
}

#[derive(Debug, Clone, Error)]
pub enum SearchError<P: fmt::Debug> {
    #[error(transparent)]
    Exhausted(BudgetExhausted<P>),
    #[error(transparent)]
    Lab(LabError),
}

/// Sampled check that `iso` preserves distances and that its inverse undoes it.
pub fn isometry_residual<S: MetricSpace>(
    space: &S,
    iso: &IsometryDescriptor<S::Point>,
    cfg: &ToleranceConfig,
) -> Result<f64>
where
    S::Point: 'static,
{
    let pts = crate::metric::sample_points(space, 2 * cfg.sample_count, cfg.seed)?;
    Ok(pts
        .par_chunks(2)
        .map(|pair| {
            let (x, y) = (&pair[0], &pair[1]);
            let dist = (space.distance(&iso.apply(x), &iso.apply(y)) - space.distance(x, y)).abs();
            let back = space.distance(&iso.apply_inverse(&iso.apply(x)), x);
            dist.max(back)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max))
}
