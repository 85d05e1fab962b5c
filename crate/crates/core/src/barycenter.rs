//! Barycenters of finite tuples.
//!
//! The exact backend iterates leave-one-out barycenters until the working
//! tuple collapses; it is symmetric in its arguments but its cost grows
//! factorially, so it is capped at [`EXACT_CAP`] points. The tree backend
//! combines halves of the ordered tuple and scales to large inputs at the
//! price of depending on the order.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::assignment::min_cost_assignment;
use crate::error::{LabError, Result};
use crate::isometry::IsometryDescriptor;
use crate::metric::{stream_rng, Bicombing, MetricSpace, ToleranceConfig};
use crate::report::{to_value, ExperimentReport, Violation};

pub const EXACT_CAP: usize = 6;

/// Tuples at least this long split their tree halves across threads.
const PAR_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Tree,
}

impl std::str::FromStr for Backend {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "tree" => Ok(Backend::Tree),
            other => Err(LabError::InvalidConfig(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterRequest<'a, B: Bicombing> {
    pub space: &'a B,
    pub tuple: Vec<B::Point>,
    pub backend: Backend,
    pub conv_tol: f64,
    /// `None` selects `max(100, 10 n ln(D / conv_tol))`.
    pub max_iters: Option<usize>,
    pub cap: usize,
}

impl<'a, B: Bicombing> BarycenterRequest<'a, B> {
    pub fn new(space: &'a B, tuple: Vec<B::Point>, backend: Backend) -> Self {
        Self {
            space,
            tuple,
            backend,
            conv_tol: ToleranceConfig::default().conv_tol,
            max_iters: None,
            cap: EXACT_CAP,
        }
    }

    pub fn with_conv_tol(mut self, tol: f64) -> Self {
        self.conv_tol = tol;
        self
    }

    pub fn run(&self) -> Result<B::Point> {
        match self.backend {
            Backend::Exact => barycenter_exact(self),
            Backend::Tree => barycenter_tree(self.space, &self.tuple),
        }
    }
}

pub fn diameter<S: MetricSpace>(space: &S, pts: &[S::Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            d = d.max(space.distance(p, q));
        }
    }
    d
}

fn default_max_iters(n: usize, diam: f64, tol: f64) -> usize {
    let est = 10.0 * n as f64 * (diam / tol).ln();
    (est.ceil() as usize).max(100)
}

/// Per-iteration diameters of the exact construction, with the result.
#[derive(Debug, Clone)]
pub struct ExactTrace<P> {
    pub point: P,
    pub diameters: Vec<f64>,
}

pub fn barycenter_exact<B: Bicombing>(req: &BarycenterRequest<'_, B>) -> Result<B::Point> {
    barycenter_exact_traced(req).map(|t| t.point)
}

/// Exact barycenter plus the diameter of the working tuple after each
/// top-level iteration.
pub fn barycenter_exact_traced<B: Bicombing>(req: &BarycenterRequest<'_, B>) -> Result<ExactTrace<B::Point>> {
    let n = req.tuple.len();
    if n == 0 || n > req.cap {
        return Err(LabError::TupleSize { n, cap: req.cap });
    }
    if !(req.conv_tol > 0.0) {
        return Err(LabError::InvalidConfig("conv_tol must be positive".into()));
    }
    exact_rec(req.space, req.tuple.clone(), req.conv_tol, req.max_iters)
}

fn exact_rec<B: Bicombing>(
    b: &B,
    tuple: Vec<B::Point>,
    tol: f64,
    max_iters: Option<usize>,
) -> Result<ExactTrace<B::Point>> {
    let n = tuple.len();
    match n {
        1 => {
            return Ok(ExactTrace {
                point: tuple.into_iter().next().expect("n = 1"),
                diameters: vec![0.0],
            })
        }
        2 => {
            let m = b.midpoint(&tuple[0], &tuple[1]);
            return Ok(ExactTrace {
                point: m,
                diameters: vec![0.0],
            });
        }
        _ => {}
    }
    let mut work = tuple;
    let mut diam = diameter(b, &work);
    let mut trace = vec![diam];
    let budget = max_iters.unwrap_or_else(|| default_max_iters(n, diam, tol));
    let mut iters = 0;
    while diam >= tol {
        if iters >= budget {
            return Err(LabError::NoConvergence {
                iterations: iters,
                residual: diam,
                trace,
            });
        }
        let next: Result<Vec<B::Point>> = (0..n)
            .into_par_iter()
            .map(|skip| {
                let sub: Vec<B::Point> = work
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, p)| p.clone())
                    .collect();
                // inner errors must stay below the outer stopping threshold
                exact_rec(b, sub, tol * 0.25, None).map(|t| t.point)
            })
            .collect();
        work = next?;
        diam = diameter(b, &work);
        trace.push(diam);
        iters += 1;
    }
    Ok(ExactTrace {
        point: work.swap_remove(0),
        diameters: trace,
    })
}

/// Ordered binary-split barycenter: `sigma(bar(left), bar(right), |right| / n)`
/// with `|left| = ceil(n / 2)`.
pub fn barycenter_tree<B: Bicombing>(b: &B, tuple: &[B::Point]) -> Result<B::Point> {
    if tuple.is_empty() {
        return Err(LabError::TupleSize { n: 0, cap: usize::MAX });
    }
    Ok(tree_rec(b, tuple))
}

fn tree_rec<B: Bicombing>(b: &B, tuple: &[B::Point]) -> B::Point {
    let n = tuple.len();
    if n == 1 {
        return tuple[0].clone();
    }
    let (left, right) = tuple.split_at(n.div_ceil(2));
    let (l, r) = if n >= PAR_THRESHOLD {
        rayon::join(|| tree_rec(b, left), || tree_rec(b, right))
    } else {
        (tree_rec(b, left), tree_rec(b, right))
    };
    b.segment_point(&l, &r, right.len() as f64 / n as f64)
}

/// `min over permutations (1/n) sum d(x_i, y_pi(i))`.
pub fn matching_average<S: MetricSpace>(space: &S, xs: &[S::Point], ys: &[S::Point]) -> f64 {
    let cost: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| ys.iter().map(|y| space.distance(x, y)).collect())
        .collect();
    min_cost_assignment(&cost).0 / xs.len() as f64
}

pub fn aligned_average<S: MetricSpace>(space: &S, xs: &[S::Point], ys: &[S::Point]) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| space.distance(x, y)).sum::<f64>() / xs.len() as f64
}

/// One Lipschitz comparison of two tuples. The exact backend is compared
/// against the optimal matching, the tree backend against the
/// index-aligned average. Exact results carry `2 conv_tol` of extra slack
/// since each is only resolved to that diameter.
pub fn verify_barycenter_lipschitz<B: Bicombing>(
    b: &B,
    xs: &[B::Point],
    ys: &[B::Point],
    backend: Backend,
    cfg: &ToleranceConfig,
) -> Result<ExperimentReport> {
    if xs.len() != ys.len() {
        return Err(LabError::SizeMismatch(xs.len(), ys.len()));
    }
    let (lhs, bound) = lipschitz_pair(b, xs, ys, backend, cfg)?;
    let slack = lipschitz_slack(backend, cfg);
    let mut report = ExperimentReport::new("barycenter-lipschitz", &b.space_id(), cfg.seed)
        .param("backend", backend)
        .param("n", xs.len());
    report.set_summary("distance", lhs);
    report.set_summary("bound", bound);
    if lhs > bound + slack {
        report.push(Violation::new(
            "lipschitz",
            json!({"x": to_value(xs), "y": to_value(ys)}),
            bound,
            lhs,
            lhs - bound,
        ));
    }
    Ok(report)
}

fn lipschitz_slack(backend: Backend, cfg: &ToleranceConfig) -> f64 {
    match backend {
        Backend::Exact => cfg.eq_tol + 2.0 * cfg.conv_tol,
        Backend::Tree => cfg.eq_tol,
    }
}

fn lipschitz_pair<B: Bicombing>(
    b: &B,
    xs: &[B::Point],
    ys: &[B::Point],
    backend: Backend,
    cfg: &ToleranceConfig,
) -> Result<(f64, f64)> {
    let bx = BarycenterRequest::new(b, xs.to_vec(), backend).with_conv_tol(cfg.conv_tol).run()?;
    let by = BarycenterRequest::new(b, ys.to_vec(), backend).with_conv_tol(cfg.conv_tol).run()?;
    let bound = match backend {
        Backend::Exact => matching_average(b, xs, ys),
        Backend::Tree => aligned_average(b, xs, ys),
    };
    Ok((b.distance(&bx, &by), bound))
}

/// `d(gamma bar(x), bar(gamma x))`.
pub fn equivariance_residual<B: Bicombing>(
    b: &B,
    iso: &IsometryDescriptor<B::Point>,
    xs: &[B::Point],
    backend: Backend,
    conv_tol: f64,
) -> Result<f64> {
    let moved: Vec<B::Point> = xs.iter().map(|x| iso.apply(x)).collect();
    let lhs = iso.apply(&BarycenterRequest::new(b, xs.to_vec(), backend).with_conv_tol(conv_tol).run()?);
    let rhs = BarycenterRequest::new(b, moved, backend).with_conv_tol(conv_tol).run()?;
    Ok(b.distance(&lhs, &rhs))
}

/// Distance from `p` to a sampled approximation of the iterated-σ hull of
/// `tuple`. Each sample is a chain `sigma(... sigma(x_a, x_b, t1) ..., x_c, tk)`
/// over random members and parameters. Coarse by nature; callers supply
/// their own slack.
pub fn hull_distance<B: Bicombing>(b: &B, tuple: &[B::Point], p: &B::Point, samples: usize, seed: u64) -> f64 {
    let n = tuple.len();
    let nearest_member = tuple.iter().map(|q| b.distance(p, q)).fold(f64::INFINITY, f64::min);
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "hull", i);
            let mut q = tuple[rng.gen_range(0..n)].clone();
            for _ in 1..n.max(2) {
                let t: f64 = rng.gen();
                q = b.segment_point(&q, &tuple[rng.gen_range(0..n)], t);
            }
            b.distance(p, &q)
        })
        .reduce(|| nearest_member, f64::min)
}

/// Batch experiment behind the `barycenter` subcommand: `trials` random
/// pairs of `n`-tuples, each checked for the Lipschitz bound, plus the
/// exact-versus-tree discrepancy when both backends apply (reported only).
pub fn barycenter_trials<B: Bicombing>(
    b: &B,
    n: usize,
    backend: Backend,
    trials: usize,
    cfg: &ToleranceConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if n == 0 {
        return Err(LabError::TupleSize { n, cap: EXACT_CAP });
    }
    if backend == Backend::Exact && n > EXACT_CAP {
        return Err(LabError::TupleSize { n, cap: EXACT_CAP });
    }
    let domain = b
        .sampler_domain()
        .ok_or_else(|| LabError::UnsupportedSpace(b.space_id()))?;
    let tag = format!("barycenter/{}", b.space_id());
    let slack = lipschitz_slack(backend, cfg);
    let rows: Vec<Result<(f64, f64, Option<f64>, Option<Violation>)>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &tag, i);
            let mut draw = || b.sample_in(&domain, &mut rng).expect("sampler domain declared");
            let xs: Vec<B::Point> = (0..n).map(|_| draw()).collect();
            let ys: Vec<B::Point> = (0..n).map(|_| draw()).collect();
            let (lhs, bound) = lipschitz_pair(b, &xs, &ys, backend, cfg)?;
            let gap = if n <= EXACT_CAP {
                let e = BarycenterRequest::new(b, xs.clone(), Backend::Exact)
                    .with_conv_tol(cfg.conv_tol)
                    .run()?;
                let t = barycenter_tree(b, &xs)?;
                Some(b.distance(&e, &t))
            } else {
                None
            };
            let v = (lhs > bound + slack).then(|| {
                Violation::new(
                    "lipschitz",
                    json!({"x": to_value(&xs), "y": to_value(&ys)}),
                    bound,
                    lhs,
                    lhs - bound,
                )
            });
            Ok((lhs, bound, gap, v))
        })
        .collect();
    let mut report = ExperimentReport::new("barycenter", &b.space_id(), cfg.seed)
        .param("backend", backend)
        .param("n", n)
        .param("trials", trials);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for row in rows {
        let (lhs, bound, gap, v) = row?;
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(lhs / bound);
        }
        if let Some(g) = gap {
            worst_gap = worst_gap.max(g);
        }
        if let Some(v) = v {
            report.push(v);
        }
    }
    report.set_summary("max_distance_over_bound", worst_ratio);
    if n <= EXACT_CAP {
        report.set_summary("max_exact_tree_gap", worst_gap);
    }
    Ok(report)
}
