//! Flat strips between parallel lines, the norm they induce, the asymptotic
//! cone metric between rays, and the half-plane monotonicity predicate.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{LabError, Result};
use crate::metric::{stream_rng, Bicombing, GeodesicTrack, Interval, MetricSpace, ToleranceConfig};
use crate::report::{ExperimentReport, Violation};
use crate::spaces::NormedSpace;

/// Samples of `nu(r) = d(xi(0), xi'(r))`.
#[derive(Debug, Clone, Serialize)]
pub struct StripProfile {
    pub r_grid: Vec<f64>,
    pub nu: Vec<f64>,
    /// `max |d(xi(R), xi'(R + r)) - nu(r)|` over both grids.
    pub constancy_residual: f64,
    /// Largest breach of `||r| - nu(0)| <= nu(r) <= nu(0) + |r|`.
    pub triangle_residual: f64,
}

impl StripProfile {
    /// Piecewise-linear interpolation, extended linearly past the ends.
    pub fn interpolate(&self, r: f64) -> f64 {
        let g = &self.r_grid;
        let n = g.len();
        if n == 1 {
            return self.nu[0];
        }
        let i = match g.partition_point(|&x| x <= r) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (r0, r1) = (g[i], g[i + 1]);
        let w = (r - r0) / (r1 - r0);
        self.nu[i] + w * (self.nu[i + 1] - self.nu[i])
    }
}

pub fn nu_profile<S: MetricSpace>(
    space: &S,
    xi: &GeodesicTrack<S::Point>,
    xi2: &GeodesicTrack<S::Point>,
    r_grid: &[f64],
    big_r_grid: &[f64],
) -> StripProfile {
    let base = xi.at(0.0);
    let nu: Vec<f64> = r_grid.par_iter().map(|&r| space.distance(&base, &xi2.at(r))).collect();
    let constancy_residual = big_r_grid
        .par_iter()
        .map(|&big_r| {
            let p = xi.at(big_r);
            r_grid
                .iter()
                .zip(&nu)
                .map(|(&r, &v)| (space.distance(&p, &xi2.at(big_r + r)) - v).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let nu0 = space.distance(&base, &xi2.at(0.0));
    let triangle_residual = r_grid
        .iter()
        .zip(&nu)
        .map(|(&r, &v)| ((r.abs() - nu0).abs() - v).max(v - nu0 - r.abs()).max(0.0))
        .fold(0.0, f64::max);
    StripProfile {
        r_grid: r_grid.to_vec(),
        nu,
        constancy_residual,
        triangle_residual,
    }
}

type PlaneNorm = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A norm on the plane given by an evaluator, with helpers for sampled
/// validation and for plotting its unit ball.
#[derive(Clone)]
pub struct ReconstructedNorm {
    pub label: String,
    eval: PlaneNorm,
}

impl fmt::Debug for ReconstructedNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReconstructedNorm").field("label", &self.label).finish()
    }
}

impl ReconstructedNorm {
    pub fn new(label: impl Into<String>, eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    /// `(ds, dt) -> |dt| nu(ds / dt)`, and `|ds|` on the horizontal axis.
    pub fn from_nu(label: impl Into<String>, nu: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, move |ds, dt| if dt == 0.0 { ds.abs() } else { dt.abs() * nu(ds / dt) })
    }

    /// Evaluates `nu(r) = d(xi(0), xi2(r))` exactly on demand.
    pub fn from_lines<S: MetricSpace + Clone + 'static>(
        space: &S,
        xi: &GeodesicTrack<S::Point>,
        xi2: &GeodesicTrack<S::Point>,
    ) -> Self {
        let (space, base, line) = (space.clone(), xi.at(0.0), xi2.clone());
        Self::from_nu(format!("nu[{},{}]", xi.label, xi2.label), move |r| space.distance(&base, &line.at(r)))
    }

    pub fn from_profile(profile: StripProfile) -> Self {
        Self::from_nu("nu[interpolated]", move |r| profile.interpolate(r))
    }

    /// Gauge of the symmetric convex hull of `points` (which must surround
    /// the origin).
    pub fn from_unit_points(label: impl Into<String>, points: &[[f64; 2]]) -> Result<Self> {
        let mut all: Vec<[f64; 2]> = points.iter().flat_map(|&[x, y]| [[x, y], [-x, -y]]).collect();
        all.retain(|p| p[0].is_finite() && p[1].is_finite());
        let hull = convex_hull(all);
        // each edge p -> q of the counter-clockwise hull gives n.x <= c
        let mut facets = Vec::new();
        for i in 0..hull.len() {
            let (p, q) = (hull[i], hull[(i + 1) % hull.len()]);
            let n = [q[1] - p[1], p[0] - q[0]];
            let c = n[0] * p[0] + n[1] * p[1];
            if !(c > 0.0) {
                return Err(LabError::InvalidNorm("unit points do not surround the origin".into()));
            }
            facets.push([n[0] / c, n[1] / c]);
        }
        if facets.len() < 3 {
            return Err(LabError::InvalidNorm("unit points span less than the plane".into()));
        }
        Ok(Self::new(label, move |x, y| {
            facets.iter().map(|f| f[0] * x + f[1] * y).fold(0.0, f64::max)
        }))
    }

    pub fn norm(&self, ds: f64, dt: f64) -> f64 {
        (self.eval)(ds, dt)
    }

    /// Boundary points of the unit ball along `m` equally spaced angles.
    pub fn unit_ball_polygon(&self, m: usize) -> Vec<[f64; 2]> {
        (0..m)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / m as f64;
                let (x, y) = (th.cos(), th.sin());
                let n = self.norm(x, y);
                [x / n, y / n]
            })
            .collect()
    }

    pub fn polygon_csv(&self, m: usize) -> String {
        let mut out = String::from("x,y\n");
        for [x, y] in self.unit_ball_polygon(m) {
            out.push_str(&format!("{x:.16e},{y:.16e}\n"));
        }
        out
    }

    /// Largest `||u + v|| - ||u|| - ||v||` over sampled pairs in `[-5, 5]^2`.
    pub fn triangle_excess(&self, samples: usize, seed: u64) -> f64 {
        (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, "norm-triangle", i);
                let mut c = || rng.gen_range(-5.0..5.0);
                let (a, b, x, y) = (c(), c(), c(), c());
                self.norm(a + x, b + y) - self.norm(a, b) - self.norm(x, y)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    /// `max_eps |norm(ds, eps) - |ds||` for `eps = 2^-k`, `k = 10..40`.
    pub fn horizontal_limit_residual(&self, ds: f64) -> f64 {
        (10..=40)
            .map(|k| (self.norm(ds, 2f64.powi(-k)) - ds.abs()).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Andrew's monotone chain, counter-clockwise, collinear points dropped.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// `s -> sigma(xi(s), xi2(s), .)`, each on `[0, 1]` at its own speed.
pub fn sigma_family<B: Bicombing + Clone + 'static>(
    b: &B,
    xi: &GeodesicTrack<B::Point>,
    xi2: &GeodesicTrack<B::Point>,
) -> impl Fn(f64) -> GeodesicTrack<B::Point> + Sync {
    let (b, xi, xi2) = (b.clone(), xi.clone(), xi2.clone());
    move |s| {
        let (p, q) = (xi.at(s), xi2.at(s));
        let speed = b.distance(&p, &q);
        let bb = b.clone();
        GeodesicTrack::new(format!("eta({s})"), b.space_id(), Interval::UNIT, speed, move |t| {
            bb.segment_point(&p, &q, t)
        })
    }
}

/// Checks that `f(s, t) = eta_s(t)` is an isometric embedding of the strip
/// `R x [0, 1]` with the norm reconstructed from `xi`, `xi2`. Parameters `s`
/// are drawn from `[-window, window]`.
pub fn verify_flat_strip<S, F>(
    space: &S,
    xi: &GeodesicTrack<S::Point>,
    xi2: &GeodesicTrack<S::Point>,
    eta: F,
    cfg: &ToleranceConfig,
    window: f64,
) -> Result<(ExperimentReport, ReconstructedNorm)>
where
    S: MetricSpace + Clone + 'static,
    F: Fn(f64) -> GeodesicTrack<S::Point> + Sync,
{
    cfg.validate()?;
    let grid: Vec<f64> = (0..=40).map(|i| -window + 2.0 * window * i as f64 / 40.0).collect();
    for &s in &grid {
        for &s2 in &grid {
            let d = space.distance(&xi.at(s), &xi2.at(s2));
            if d < cfg.eq_tol {
                return Err(LabError::DisjointnessViolated { s, s2, distance: d });
            }
        }
    }
    let norm = ReconstructedNorm::from_lines(space, xi, xi2);
    let tag = format!("strip/{}", space.space_id());
    let rows: Vec<(f64, Option<Violation>)> = (0..cfg.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &tag, i);
            let s = rng.gen_range(-window..=window);
            let t: f64 = rng.gen();
            let (s2, t2) = if i % 3 == 0 {
                // nearby pairs exercise small displacements
                let h = 0.05;
                (s + rng.gen_range(-h..=h), (t + rng.gen_range(-h..=h)).clamp(0.0, 1.0))
            } else {
                (rng.gen_range(-window..=window), rng.gen())
            };
            let d = space.distance(&eta(s).at(t), &eta(s2).at(t2));
            let want = norm.norm(s2 - s, t2 - t);
            let res = (d - want).abs();
            let v = (res > cfg.eq_tol)
                .then(|| Violation::new("flat_strip", json!({"p": [s, t], "q": [s2, t2]}), want, d, res));
            (res, v)
        })
        .collect();
    let mut report = ExperimentReport::new("strip", &space.space_id(), cfg.seed)
        .param("xi", &xi.label)
        .param("xi2", &xi2.label)
        .param("samples", cfg.sample_count)
        .param("window", window);
    let mut worst: f64 = 0.0;
    for (r, v) in rows {
        worst = worst.max(r);
        if let Some(v) = v {
            report.push(v);
        }
    }
    report.set_summary("max_embedding_residual", worst);
    let tri = norm.triangle_excess(cfg.sample_count.max(1000), cfg.seed);
    report.set_summary("norm_triangle_excess", tri);
    if tri > cfg.eq_tol {
        report.push(Violation::new("norm_triangle", json!({}), 0.0, tri, tri));
    }
    let lim = [0.5, 1.0, 2.0, -3.0]
        .iter()
        .map(|&ds| norm.horizontal_limit_residual(ds))
        .fold(0.0, f64::max);
    report.set_summary("horizontal_limit_residual", lim);
    Ok((report, norm))
}

/// A scaled ray `(a, xi)` of the asymptotic cone.
#[derive(Debug, Clone)]
pub struct ConeVector<P> {
    pub radius: f64,
    pub ray: GeodesicTrack<P>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeConfig {
    pub lambda_start: f64,
    pub lambda_max: f64,
    pub conv_tol: f64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            lambda_start: 1.0,
            lambda_max: 65536.0,
            conv_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeEstimate {
    pub value: f64,
    pub trace: Vec<(f64, f64)>,
    pub converged: bool,
    /// Largest increase between successive values (0 when non-increasing).
    pub monotone_excess: f64,
    /// Largest breach of `|a - b| <= value <= a + b`.
    pub bound_excess: f64,
}

/// `lim (1/lambda) d(xi(a lambda), eta(b lambda))` along doubling `lambda`
/// with Cauchy stopping.
pub fn cone_distance<S: MetricSpace>(
    space: &S,
    u: &ConeVector<S::Point>,
    v: &ConeVector<S::Point>,
    cfg: &ConeConfig,
) -> ConeEstimate {
    let mut lambda = cfg.lambda_start;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut converged = false;
    let mut monotone_excess: f64 = 0.0;
    loop {
        let val = space.distance(&u.ray.at(u.radius * lambda), &v.ray.at(v.radius * lambda)) / lambda;
        if let Some(&(_, prev)) = trace.last() {
            monotone_excess = monotone_excess.max(val - prev);
            if (val - prev).abs() <= cfg.conv_tol {
                converged = true;
            }
        }
        trace.push((lambda, val));
        if converged || lambda * 2.0 > cfg.lambda_max {
            break;
        }
        lambda *= 2.0;
    }
    let value = trace.last().map_or(0.0, |t| t.1);
    let (a, b) = (u.radius, v.radius);
    let bound_excess = ((a - b).abs() - value).max(value - (a + b)).max(0.0);
    ConeEstimate {
        value,
        trace,
        converged,
        monotone_excess,
        bound_excess,
    }
}

/// Compares the cone distance between rays from the origin with
/// `||a u - b v||` for `trials` random unit vectors `u, v` and radii in
/// `[0.25, 4]`.
pub fn cone_formula_report(space: &NormedSpace, trials: usize, cfg: &ToleranceConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if space.dim() != 2 {
        return Err(LabError::UnsupportedSpace(space.space_id()));
    }
    let cone_cfg = ConeConfig {
        conv_tol: cfg.eq_tol * 0.1,
        ..ConeConfig::default()
    };
    let rows: Vec<(f64, Option<Violation>)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, "cone", i);
            let mut unit = || {
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let d = vec![th.cos(), th.sin()];
                let n = space.norm(&d);
                d.into_iter().map(|c| c / n).collect::<Vec<f64>>()
            };
            let (u, v) = (unit(), unit());
            let a: f64 = rng.gen_range(0.25..4.0);
            let b: f64 = rng.gen_range(0.25..4.0);
            let ray = |d: &[f64]| space.affine_track("ray", vec![0.0, 0.0], d.to_vec(), Interval::HALF_LINE);
            let est = cone_distance(
                space,
                &ConeVector { radius: a, ray: ray(&u) },
                &ConeVector { radius: b, ray: ray(&v) },
                &cone_cfg,
            );
            let want = space.norm(&[a * u[0] - b * v[0], a * u[1] - b * v[1]]);
            let res = (est.value - want).abs();
            let viol = (res > cfg.eq_tol)
                .then(|| Violation::new("cone_formula", json!({"u": u, "v": v, "a": a, "b": b}), want, est.value, res));
            (res, viol)
        })
        .collect();
    let mut report = ExperimentReport::new("cone", &space.space_id(), cfg.seed).param("trials", trials);
    report.set_summary("max_residual", rows.iter().map(|r| r.0).fold(0.0, f64::max));
    for (_, v) in rows {
        if let Some(v) = v {
            report.push(v);
        }
    }
    Ok(report)
}

/// Checks that `s -> d(xi(s + a), eta_s(b))` is non-decreasing on `s_grid`
/// and that its last value does not exceed the cone distance between
/// `(a, xi)` and `(b, eta_0)`. Rays whose mutual distance grows along a
/// probe schedule raise the `non_asymptotic` flag.
pub fn check_halfplane_monotone<S, F>(
    space: &S,
    xi: &GeodesicTrack<S::Point>,
    eta: F,
    a: f64,
    b: f64,
    s_grid: &[f64],
    cfg: &ToleranceConfig,
) -> Result<ExperimentReport>
where
    S: MetricSpace,
    F: Fn(f64) -> GeodesicTrack<S::Point> + Sync,
{
    if !(a > 0.0 && b > 0.0) {
        return Err(LabError::InvalidConfig("a and b must be positive".into()));
    }
    if s_grid.is_empty() {
        return Err(LabError::InvalidConfig("empty s grid".into()));
    }
    let eta0 = eta(0.0);
    let probes: Vec<f64> = (0..=10).map(|k| 2f64.powi(k)).collect();
    let mut drift: f64 = 0.0;
    let values: Vec<f64> = s_grid
        .par_iter()
        .map(|&s| space.distance(&xi.at(s + a), &eta(s).at(b)))
        .collect();
    for &s in s_grid {
        let es = eta(s);
        let d0 = space.distance(&es.at(0.0), &eta0.at(0.0));
        let far = probes
            .iter()
            .map(|&t| space.distance(&es.at(t), &eta0.at(t)))
            .fold(0.0, f64::max);
        drift = drift.max(far - d0);
    }
    let non_asymptotic = drift > cfg.eq_tol;
    let hyp: Vec<f64> = s_grid
        .iter()
        .map(|&s| space.distance(&xi.at(s + a), &eta(s).at(1.0)))
        .collect();
    let hyp_spread = hyp.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - hyp.iter().cloned().fold(f64::INFINITY, f64::min);

    let forward = GeodesicTrack::new(xi.label.clone(), xi.space_id.clone(), Interval::HALF_LINE, xi.speed, {
        let xi = xi.clone();
        move |t| xi.at(t)
    });
    let cone = cone_distance(
        space,
        &ConeVector { radius: a, ray: forward },
        &ConeVector { radius: b, ray: eta0 },
        &ConeConfig {
            conv_tol: cfg.conv_tol,
            ..ConeConfig::default()
        },
    );
    let mut report = ExperimentReport::new("halfplane", &space.space_id(), cfg.seed)
        .param("a", a)
        .param("b", b)
        .param("s_window", [s_grid[0], s_grid[s_grid.len() - 1]])
        .param("s_points", s_grid.len());
    for (i, w) in values.windows(2).enumerate() {
        if w[1] < w[0] - cfg.eq_tol {
            report.push(Violation::new(
                "monotone",
                json!({"s": [s_grid[i], s_grid[i + 1]]}),
                w[0],
                w[1],
                w[0] - w[1],
            ));
        }
    }
    let last = *values.last().expect("non-empty grid");
    if last > cone.value + cfg.conv_tol {
        report.push(Violation::new("cone_limit", json!({"s": s_grid[s_grid.len() - 1]}), cone.value, last, last - cone.value));
    }
    report.set_summary("values", &values);
    report.set_summary("cone_distance", cone.value);
    report.set_summary("cone_converged", cone.converged);
    report.set_summary("non_asymptotic", non_asymptotic);
    report.set_summary("ray_drift", drift);
    report.set_summary("hypothesis_spread", hyp_spread);
    report.set_summary("hypothesis_nonzero", hyp.iter().all(|&d| d > cfg.eq_tol));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{make_ex22_space, make_normed_space, NormSpec, NormedSpace};
    use approx::assert_abs_diff_eq;

    fn plane(spec: NormSpec) -> NormedSpace {
        make_normed_space(spec).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn strip_profile_of_ex22() {
        let x = make_ex22_space();
        let p = nu_profile(&x, &x.xi(), &x.xi_prime(), &grid(-4.0, 4.0, 33), &grid(-5.0, 5.0, 21));
        for (r, v) in p.r_grid.iter().zip(&p.nu) {
            assert_abs_diff_eq!(*v, r.abs().max(1.0), epsilon = 1e-12);
        }
        assert!(p.constancy_residual <= 1e-12);
        assert_eq!(p.triangle_residual, 0.0);
    }

    #[test]
    fn profiles_in_the_l1_plane() {
        let s = plane(NormSpec::l1(2));
        let a = s.affine_track("a", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
        let b = s.affine_track("b", vec![0.0, 1.0], vec![1.0, 0.0], Interval::LINE);
        let rs = grid(-3.0, 3.0, 13);
        let p = nu_profile(&s, &a, &b, &rs, &grid(-2.0, 2.0, 5));
        for (r, v) in rs.iter().zip(&p.nu) {
            assert_abs_diff_eq!(*v, r.abs() + 1.0, epsilon = 1e-12);
        }
        let p = nu_profile(&s, &a, &a, &rs, &grid(-2.0, 2.0, 5));
        for (r, v) in rs.iter().zip(&p.nu) {
            assert_abs_diff_eq!(*v, r.abs(), epsilon = 1e-12);
        }
        assert_eq!(p.constancy_residual, 0.0);
        let interp = ReconstructedNorm::from_profile(p);
        assert_abs_diff_eq!(interp.norm(2.5, 1.0), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn linf_strip_between_horizontal_lines() {
        let s = plane(NormSpec::linf(2));
        let a = s.affine_track("a", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
        let b = s.affine_track("b", vec![0.0, 1.0], vec![1.0, 0.0], Interval::LINE);
        let cfg = ToleranceConfig::default().with_samples(1000);
        let (r, norm) = verify_flat_strip(&s, &a, &b, sigma_family(&s, &a, &b), &cfg, 5.0).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations.first());
        assert_eq!(norm.norm(3.0, -1.0), 3.0);
        assert_eq!(norm.norm(0.5, 1.0), 1.0);
        assert!(r.summary_f64("horizontal_limit_residual").unwrap() <= 1e-12);
    }

    #[test]
    fn ex22_strip_is_flat() {
        let x = make_ex22_space();
        let xi = x.xi();
        let xi2 = x.xi_prime().shifted(1.0);
        let cfg = ToleranceConfig::default().with_samples(1000);
        let (r, norm) = verify_flat_strip(&x, &xi, &xi2, sigma_family(&x, &xi, &xi2), &cfg, 5.0).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations.first());
        assert_abs_diff_eq!(norm.norm(1.0, 1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn crossing_lines_rejected() {
        let s = plane(NormSpec::l2(2));
        let a = s.affine_track("a", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
        let b = s.affine_track("b", vec![0.0, 0.0], vec![0.0, 1.0], Interval::LINE);
        let err = verify_flat_strip(&s, &a, &b, sigma_family(&s, &a, &b), &ToleranceConfig::default(), 5.0);
        assert!(matches!(err, Err(LabError::DisjointnessViolated { .. })));
    }

    #[test]
    fn unit_point_gauge_recovers_linf() {
        let n = ReconstructedNorm::from_unit_points("l", &[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0], [1.0, 0.5]]).unwrap();
        assert_abs_diff_eq!(n.norm(3.0, -2.0), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.norm(-0.5, 0.25), 0.5, epsilon = 1e-12);
        assert!(ReconstructedNorm::from_unit_points("bad", &[[1.0, 0.0], [2.0, 0.0]]).is_err());
        assert_eq!(n.polygon_csv(4).lines().count(), 5);
    }

    fn ray(s: &NormedSpace, dir: Vec<f64>) -> GeodesicTrack<Vec<f64>> {
        s.affine_track("ray", vec![0.0, 0.0], dir, Interval::HALF_LINE)
    }

    #[test]
    fn cone_distance_examples() {
        let cfg = ConeConfig::default();
        let l1 = plane(NormSpec::l1(2));
        let u = ConeVector { radius: 1.0, ray: ray(&l1, vec![1.0, 0.0]) };
        let v = ConeVector { radius: 1.0, ray: ray(&l1, vec![0.0, 1.0]) };
        let e = cone_distance(&l1, &u, &v, &cfg);
        assert_eq!(e.value, 2.0);
        assert!(e.converged && e.bound_excess == 0.0 && e.monotone_excess == 0.0);
        assert_eq!(cone_distance(&l1, &u, &u, &cfg).value, 0.0);
        let li = plane(NormSpec::linf(2));
        let u = ConeVector { radius: 1.0, ray: ray(&li, vec![1.0, 0.0]) };
        let v = ConeVector { radius: 1.0, ray: ray(&li, vec![0.0, 1.0]) };
        assert_eq!(cone_distance(&li, &u, &v, &cfg).value, 1.0);
    }

    fn vertical_rays(s: &NormedSpace) -> impl Fn(f64) -> GeodesicTrack<Vec<f64>> + Sync + '_ {
        move |x| s.affine_track("eta", vec![x, 0.0], vec![0.0, 1.0], Interval::HALF_LINE)
    }

    #[test]
    fn halfplane_examples() {
        let cfg = ToleranceConfig::default();
        let sg = grid(-5.0, 5.0, 21);
        for (spec, want) in [(NormSpec::l1(2), 3.0), (NormSpec::linf(2), 2.0)] {
            let s = plane(spec);
            let xi = s.affine_track("xi", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
            let r = check_halfplane_monotone(&s, &xi, vertical_rays(&s), 1.0, 2.0, &sg, &cfg).unwrap();
            assert!(r.is_clean(), "{:?}", r.violations.first());
            assert_eq!(r.summary["non_asymptotic"], serde_json::Value::Bool(false));
            assert_abs_diff_eq!(r.summary_f64("cone_distance").unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn diverging_rays_are_flagged() {
        let s = plane(NormSpec::l2(2));
        let xi = s.affine_track("xi", vec![0.0, 0.0], vec![1.0, 0.0], Interval::LINE);
        let fan = |x: f64| s.affine_track("fan", vec![x, 0.0], vec![x, 1.0], Interval::HALF_LINE);
        let r = check_halfplane_monotone(&s, &xi, fan, 1.0, 1.0, &grid(-2.0, 2.0, 9), &ToleranceConfig::default()).unwrap();
        assert_eq!(r.summary["non_asymptotic"], serde_json::Value::Bool(true));
    }

    #[test]
    fn cone_formula_in_polyhedral_planes() {
        let cfg = ToleranceConfig::default().with_seed(3);
        for spec in [NormSpec::l1(2), NormSpec::linf(2)] {
            let r = cone_formula_report(&plane(spec), 20, &cfg).unwrap();
            assert!(r.is_clean(), "{:?}", r.violations.first());
        }
    }
}
