//! Shared contracts: metric spaces, bicombings, geodesic tracks, tolerances
//! and deterministic sampling.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{LabError, Result};
use crate::report::{to_value, ExperimentReport, Violation};

/// Tolerances and sampling controls shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceConfig {
    /// Slack for identities that hold exactly up to rounding.
    pub eq_tol: f64,
    /// Stopping tolerance for iterative procedures.
    pub conv_tol: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            eq_tol: 1e-9,
            conv_tol: 1e-8,
            sample_count: 1000,
            seed: 0,
        }
    }
}

impl ToleranceConfig {
    pub fn with_samples(mut self, n: usize) -> Self {
        self.sample_count = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eq_tol > 0.0 && self.conv_tol > 0.0) {
            return Err(LabError::InvalidConfig(
                "tolerances must be strictly positive".into(),
            ));
        }
        if self.sample_count == 0 {
            return Err(LabError::InvalidConfig("sample_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Axis-aligned box in a space's native parameter coordinates.
///
/// Each space decides how a box is turned into points; e.g. the retraction
/// spaces draw the base point from the first two ranges and the height
/// uniformly between the two bounding graphs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerDomain {
    pub ranges: Vec<(f64, f64)>,
}

impl SamplerDomain {
    pub fn new(ranges: Vec<(f64, f64)>) -> Self {
        Self { ranges }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![(lo, hi); dim])
    }

    pub fn draw(&self, axis: usize, rng: &mut ChaCha8Rng) -> f64 {
        let (lo, hi) = self.ranges[axis];
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    }

    pub fn holds(&self, axis: usize, v: f64) -> bool {
        let (lo, hi) = self.ranges[axis];
        lo <= v && v <= hi
    }

    /// Largest side length; used to scale discretization slack.
    pub fn extent(&self) -> f64 {
        self.ranges
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }
}

/// A metric space with computable distance and (optionally) a sampler.
pub trait MetricSpace: Send + Sync {
    type Point: Clone + fmt::Debug + PartialEq + Serialize + Send + Sync + 'static;

    fn space_id(&self) -> String;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> f64;

    fn contains(&self, x: &Self::Point) -> bool;

    /// Default region for random points; `None` if the space cannot be sampled.
    fn sampler_domain(&self) -> Option<SamplerDomain> {
        None
    }

    /// Region of linear size `length` used by the large-scale experiments.
    fn box_domain(&self, _length: f64) -> Option<SamplerDomain> {
        None
    }

    /// Draws one point from `domain`. Only called with domains produced by
    /// this space.
    fn sample_in(&self, _domain: &SamplerDomain, _rng: &mut ChaCha8Rng) -> Option<Self::Point> {
        None
    }

    /// Whether `x` lies in `domain` (a domain produced by this space).
    fn within(&self, _x: &Self::Point, _domain: &SamplerDomain) -> bool {
        true
    }

    /// Number of free coordinates of `x` available to local search.
    fn coordinate_count(&self, _x: &Self::Point) -> usize {
        0
    }

    /// Moves coordinate `coord` of `x` by `step`, staying inside the space.
    fn nudge(&self, _x: &Self::Point, _coord: usize, _step: f64) -> Option<Self::Point> {
        None
    }
}

/// Distinguished geodesics `(x, y, t) -> sigma_xy(t)` on a metric space.
pub trait Bicombing: MetricSpace {
    fn segment_point(&self, x: &Self::Point, y: &Self::Point, t: f64) -> Self::Point;

    /// Whether the segments are claimed to restrict to themselves.
    fn claims_consistent(&self) -> bool;

    fn midpoint(&self, x: &Self::Point, y: &Self::Point) -> Self::Point {
        self.segment_point(x, y, 0.5)
    }
}

/// Parameter interval; unbounded ends are infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const HALF_LINE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    /// Intersection with `[-window, window]`, so unbounded domains can be sampled.
    pub fn clip(&self, window: f64) -> Interval {
        Interval::new(self.lo.max(-window), self.hi.min(window))
    }

    /// `n >= 2` equally spaced points over the (clipped) interval.
    pub fn grid(&self, n: usize, window: f64) -> Vec<f64> {
        let c = self.clip(window);
        let n = n.max(2);
        (0..n)
            .map(|i| c.lo + (c.hi - c.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// A constant-speed curve given by a closure over space data.
#[derive(Clone)]
pub struct GeodesicTrack<P> {
    pub label: String,
    pub space_id: String,
    pub domain: Interval,
    pub speed: f64,
    param: Arc<dyn Fn(f64) -> P + Send + Sync>,
}

impl<P> fmt::Debug for GeodesicTrack<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicTrack")
            .field("label", &self.label)
            .field("space_id", &self.space_id)
            .field("domain", &self.domain)
            .field("speed", &self.speed)
            .finish()
    }
}

impl<P> GeodesicTrack<P> {
    pub fn new(
        label: impl Into<String>,
        space_id: impl Into<String>,
        domain: Interval,
        speed: f64,
        param: impl Fn(f64) -> P + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            space_id: space_id.into(),
            domain,
            speed,
            param: Arc::new(param),
        }
    }

    pub fn at(&self, t: f64) -> P {
        (self.param)(t)
    }

    /// Reparametrized track `s -> self(offset + s)` on the shifted domain.
    pub fn shifted(&self, offset: f64) -> Self
    where
        P: 'static,
    {
        let inner = self.param.clone();
        GeodesicTrack {
            label: format!("{}(+{offset})", self.label),
            space_id: self.space_id.clone(),
            domain: Interval::new(self.domain.lo - offset, self.domain.hi - offset),
            speed: self.speed,
            param: Arc::new(move |s| inner(offset + s)),
        }
    }
}

/// Worst deviation from the speed identity `d(c(t), c(t')) = speed |t - t'|`
/// over all pairs of an `n`-point grid (unbounded domains clipped to `window`).
pub fn speed_identity_residual<S: MetricSpace>(
    space: &S,
    track: &GeodesicTrack<S::Point>,
    n: usize,
    window: f64,
) -> f64 {
    let grid = track.domain.grid(n, window);
    let pts: Vec<S::Point> = grid.iter().map(|&t| track.at(t)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let want = track.speed * (grid[j] - grid[i]).abs();
            worst = worst.max((space.distance(&pts[i], &pts[j]) - want).abs());
        }
    }
    worst
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Counter-based generator for sample `index` of the stream named `tag`.
///
/// The state depends only on `(seed, tag, index)`, so samples can be drawn in
/// any order or in parallel with identical results.
pub fn stream_rng(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(tag));
    rng.set_stream(index);
    rng
}

/// Draws `n` points of `space` from `domain`; point `i` depends only on `(seed, i)`.
pub fn sample_points_in<S: MetricSpace>(
    space: &S,
    domain: &SamplerDomain,
    n: usize,
    seed: u64,
) -> Result<Vec<S::Point>> {
    let tag = format!("points/{}", space.space_id());
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &tag, i);
            space
                .sample_in(domain, &mut rng)
                .ok_or_else(|| LabError::UnsupportedSpace(space.space_id()))
        })
        .collect()
}

/// Draws `n` points from the space's default sampler domain.
pub fn sample_points<S: MetricSpace>(space: &S, n: usize, seed: u64) -> Result<Vec<S::Point>> {
    if n == 0 {
        return Err(LabError::InvalidConfig("n must be >= 1".into()));
    }
    let domain = space
        .sampler_domain()
        .ok_or_else(|| LabError::UnsupportedSpace(space.space_id()))?;
    sample_points_in(space, &domain, n, seed)
}

/// Samples `cfg.sample_count` triples and records every breach of identity,
/// symmetry or the triangle inequality beyond `eq_tol`.
pub fn check_metric_axioms<S: MetricSpace>(space: &S, cfg: &ToleranceConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let domain = space
        .sampler_domain()
        .ok_or_else(|| LabError::UnsupportedSpace(space.space_id()))?;
    let tag = format!("metric-axioms/{}", space.space_id());
    let per_sample: Vec<Vec<Violation>> = (0..cfg.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &tag, i);
            let mut draw = || space.sample_in(&domain, &mut rng).expect("sampler domain declared");
            let (x, y, z) = (draw(), draw(), draw());
            let mut out = Vec::new();
            let dxx = space.distance(&x, &x);
            if dxx.abs() > cfg.eq_tol {
                out.push(Violation::new("identity", json!([to_value(&x)]), 0.0, dxx, dxx.abs()));
            }
            let dxy = space.distance(&x, &y);
            let dyx = space.distance(&y, &x);
            if (dxy - dyx).abs() > cfg.eq_tol {
                out.push(Violation::new(
                    "symmetry",
                    json!([to_value(&x), to_value(&y)]),
                    dxy,
                    dyx,
                    (dxy - dyx).abs(),
                ));
            }
            if dxy < -cfg.eq_tol {
                out.push(Violation::new("nonnegativity", json!([to_value(&x), to_value(&y)]), 0.0, dxy, -dxy));
            }
            let dxz = space.distance(&x, &z);
            let bound = dxy + space.distance(&y, &z);
            if dxz > bound + cfg.eq_tol {
                out.push(Violation::new(
                    "triangle",
                    json!([to_value(&x), to_value(&y), to_value(&z)]),
                    bound,
                    dxz,
                    dxz - bound,
                ));
            }
            out
        })
        .collect();
    let mut report = ExperimentReport::new("metric-axioms", &space.space_id(), cfg.seed)
        .param("samples", cfg.sample_count)
        .param("eq_tol", cfg.eq_tol);
    for v in per_sample.into_iter().flatten() {
        report.push(v);
    }
    report.set_summary("violations", report.violations.len());
    Ok(report)
}
