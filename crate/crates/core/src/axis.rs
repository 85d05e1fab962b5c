//! The midpoint map `phi(x) = sigma(gamma x, gamma^-1 x, 1/2)`, a
//! certificate-based fixed-point solver for it, and σ-axes through its
//! fixed points.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::axioms::segment_consistency;
use crate::error::{LabError, Result};
use crate::isometry::{displacement, IsometryDescriptor};
use crate::metric::{speed_identity_residual, stream_rng, Bicombing, GeodesicTrack, Interval, ToleranceConfig};
use crate::report::{to_value, ExperimentReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisSolverConfig {
    pub lambda: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub displacement_tol: f64,
}

impl Default for AxisSolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            inner_tol: 1e-12,
            inner_max: 10_000,
            outer_max: 200,
            displacement_tol: 1e-8,
        }
    }
}

impl AxisSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(LabError::InvalidConfig(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if !(self.inner_tol > 0.0 && self.displacement_tol > 0.0) {
            return Err(LabError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.outer_max == 0 || self.inner_max == 0 {
            return Err(LabError::InvalidConfig("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisStatus {
    Converged,
    NoConvergence,
}

pub fn phi_map<B: Bicombing>(b: &B, iso: &IsometryDescriptor<B::Point>, x: &B::Point) -> B::Point {
    b.segment_point(&iso.apply(x), &iso.apply_inverse(x), 0.5)
}

/// `d(x, phi^n x) <= sqrt(n) d_gamma(x)` for `n = 1..=n_max`.
pub fn check_sqrt_bound<B: Bicombing>(
    b: &B,
    iso: &IsometryDescriptor<B::Point>,
    x: &B::Point,
    n_max: usize,
    eq_tol: f64,
) -> ExperimentReport {
    let dg = displacement(b, iso, x);
    let mut report = ExperimentReport::new("sqrt-bound", &b.space_id(), 0)
        .param("iso", &iso.name)
        .param("n_max", n_max)
        .param("equivariant", iso.equivariant);
    let mut y = x.clone();
    let mut trace = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for n in 1..=n_max {
        y = phi_map(b, iso, &y);
        let d = b.distance(x, &y);
        let bound = (n as f64).sqrt() * dg;
        if n.is_power_of_two() || n == n_max {
            trace.push((n, d));
        }
        if dg > 0.0 {
            worst_ratio = worst_ratio.max(d / bound);
        }
        if d > bound + eq_tol {
            report.push(Violation::new("sqrt_bound", json!({"n": n}), bound, d, d - bound));
        }
    }
    report.set_summary("displacement", dg);
    report.set_summary("max_ratio", worst_ratio);
    report.set_summary("trace", trace);
    report
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint<P> {
    pub point: P,
    pub residual: f64,
    pub outer_iterations: usize,
    /// `d(x_k, phi(x_k))` per outer step, starting with the start point.
    pub trace: Vec<f64>,
    /// Largest observed ratio of successive inner-iterate distances.
    pub inner_contraction: f64,
}

/// `f_lambda(x)`: the fixed point of `y -> sigma(x, phi(y), lambda)`.
fn f_lambda<B: Bicombing>(
    b: &B,
    iso: &IsometryDescriptor<B::Point>,
    x: &B::Point,
    cfg: &AxisSolverConfig,
    contraction: &mut f64,
) -> B::Point {
    let mut y = x.clone();
    let mut prev_step = f64::INFINITY;
    for _ in 0..cfg.inner_max {
        let next = b.segment_point(x, &phi_map(b, iso, &y), cfg.lambda);
        let step = b.distance(&y, &next);
        if prev_step.is_finite() && prev_step > 0.0 {
            *contraction = contraction.max(step / prev_step);
        }
        y = next;
        if step <= cfg.inner_tol {
            break;
        }
        prev_step = step;
    }
    y
}

/// Outer iteration `x <- f_lambda(x)` until `d(x, phi x) <= displacement_tol`.
/// Fails with the displacement trace when the budget runs out.
pub fn solve_phi_fixed_point<B: Bicombing>(
    b: &B,
    iso: &IsometryDescriptor<B::Point>,
    start: &B::Point,
    cfg: &AxisSolverConfig,
) -> Result<FixedPoint<B::Point>> {
    cfg.validate()?;
    if !b.contains(start) {
        return Err(LabError::InvalidPoint(format!("{start:?}")));
    }
    let mut x = start.clone();
    let mut res = b.distance(&x, &phi_map(b, iso, &x));
    let mut trace = vec![res];
    let mut contraction: f64 = 0.0;
    let mut k = 0;
    while res > cfg.displacement_tol {
        if k >= cfg.outer_max {
            return Err(LabError::NoConvergence {
                iterations: k,
                residual: res,
                trace,
            });
        }
        x = f_lambda(b, iso, &x, cfg, &mut contraction);
        res = b.distance(&x, &phi_map(b, iso, &x));
        trace.push(res);
        k += 1;
    }
    Ok(FixedPoint {
        point: x,
        residual: res,
        outer_iterations: k,
        trace,
        inner_contraction: contraction,
    })
}

#[derive(Debug, Clone)]
pub struct AxisResult<P> {
    pub status: AxisStatus,
    pub fixed_point: P,
    pub fixed_point_residual: f64,
    pub axis: Option<GeodesicTrack<P>>,
    /// `d_gamma` at the fixed point.
    pub period: f64,
    pub sigma_line_residual: f64,
    /// Consistency residual of the first period `tau`.
    pub tau_consistency: f64,
    pub axis_property_residual: f64,
    pub speed_residual: f64,
    pub displacement_residual: f64,
    pub trace: Vec<f64>,
}

/// `xi(n t + s) = gamma^n(tau(s))` with `tau(s) = sigma(x, gamma x, s / t)`,
/// `t = d_gamma(x)` and `s in [0, t)`.
pub fn build_axis<B: Bicombing + Clone + 'static>(
    b: &B,
    iso: &IsometryDescriptor<B::Point>,
    fixed_point: &B::Point,
    displacement_tol: f64,
) -> Result<GeodesicTrack<B::Point>> {
    let t = displacement(b, iso, fixed_point);
    if t <= displacement_tol {
        return Err(LabError::NotHyperbolic(t));
    }
    let x = fixed_point.clone();
    let gx = iso.apply(&x);
    let (space, g) = (b.clone(), iso.clone());
    let label = format!("axis[{}]", iso.name);
    Ok(GeodesicTrack::new(label, b.space_id(), Interval::LINE, 1.0, move |arg| {
        let n = (arg / t).floor();
        let s = arg - n * t;
        let tau = space.segment_point(&x, &gx, (s / t).clamp(0.0, 1.0));
        g.power(&tau, n as i64)
    }))
}

/// `max d(sigma(xi(r), xi(s), t), xi((1-t) r + t s))` over samples with
/// `r, s` in `[-window, window]` (clipped to the track domain) and `t` in `[0, 1]`.
pub fn verify_sigma_line<B: Bicombing>(
    b: &B,
    track: &GeodesicTrack<B::Point>,
    window: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let dom = track.domain.clip(window);
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, "sigma-line", i);
            let r = rng.gen_range(dom.lo..=dom.hi);
            let s = rng.gen_range(dom.lo..=dom.hi);
            let t: f64 = rng.gen();
            let p = b.segment_point(&track.at(r), &track.at(s), t);
            b.distance(&p, &track.at((1.0 - t) * r + t * s))
        })
        .reduce(|| 0.0, f64::max)
}

/// Solver plus axis construction and its checks. Solver failure is
/// reported through `status` rather than as an error.
pub fn axis_pipeline<B: Bicombing + Clone + 'static>(
    b: &B,
    iso: &IsometryDescriptor<B::Point>,
    start: &B::Point,
    cfg: &AxisSolverConfig,
    window: f64,
    samples: usize,
    seed: u64,
) -> Result<AxisResult<B::Point>> {
    let fp = match solve_phi_fixed_point(b, iso, start, cfg) {
        Ok(fp) => fp,
        Err(LabError::NoConvergence { residual, trace, .. }) => {
            return Ok(AxisResult {
                status: AxisStatus::NoConvergence,
                fixed_point: start.clone(),
                fixed_point_residual: residual,
                axis: None,
                period: displacement(b, iso, start),
                sigma_line_residual: f64::NAN,
                tau_consistency: f64::NAN,
                axis_property_residual: f64::NAN,
                speed_residual: f64::NAN,
                displacement_residual: f64::NAN,
                trace,
            })
        }
        Err(e) => return Err(e),
    };
    let axis = build_axis(b, iso, &fp.point, cfg.displacement_tol)?;
    let period = displacement(b, iso, &fp.point);
    let sigma_line_residual = verify_sigma_line(b, &axis, window, samples, seed);
    let tau_consistency = segment_consistency(b, &fp.point, &iso.apply(&fp.point), 9);
    let grid: Vec<f64> = (0..=200).map(|i| -window + 2.0 * window * i as f64 / 200.0).collect();
    let axis_property_residual = grid
        .par_iter()
        .map(|&s| b.distance(&iso.apply(&axis.at(s)), &axis.at(s + period)))
        .reduce(|| 0.0, f64::max);
    let displacement_residual = grid
        .par_iter()
        .map(|&s| (displacement(b, iso, &axis.at(s)) - period).abs())
        .reduce(|| 0.0, f64::max);
    let speed_residual = speed_identity_residual(b, &axis, 41, window);
    Ok(AxisResult {
        status: AxisStatus::Converged,
        fixed_point: fp.point,
        fixed_point_residual: fp.residual,
        axis: Some(axis),
        period,
        sigma_line_residual,
        tau_consistency,
        axis_property_residual,
        speed_residual,
        displacement_residual,
        trace: fp.trace,
    })
}

impl<P: Serialize> AxisResult<P> {
    /// Writes the result into `report` and raises violations for the
    /// assertion-level checks. The σ-line residual is asserted only when the
    /// first period passes the consistency check; otherwise it is reported.
    pub fn record(&self, report: &mut ExperimentReport, cfg: &AxisSolverConfig, eq_tol: f64) {
        report.set_summary("status", self.status);
        report.set_summary("fixed_point", to_value(&self.fixed_point));
        report.set_summary("fixed_point_residual", self.fixed_point_residual);
        report.set_summary("period", self.period);
        report.set_summary("displacement_trace", &self.trace);
        if self.status == AxisStatus::NoConvergence {
            return;
        }
        report.set_summary("sigma_line_residual", self.sigma_line_residual);
        report.set_summary("tau_consistency", self.tau_consistency);
        report.set_summary("axis_property_residual", self.axis_property_residual);
        report.set_summary("speed_residual", self.speed_residual);
        report.set_summary("displacement_residual", self.displacement_residual);
        let mut check = |name: &str, value: f64, tol: f64| {
            if value > tol {
                report.push(Violation::new(name, json!({}), 0.0, value, value));
            }
        };
        check("fixed_point", self.fixed_point_residual, cfg.displacement_tol);
        check("axis_property", self.axis_property_residual, eq_tol);
        check("speed", self.speed_residual, eq_tol);
        check("constant_displacement", self.displacement_residual, cfg.displacement_tol);
        if self.tau_consistency <= eq_tol {
            check("sigma_line", self.sigma_line_residual, 1e-6);
        }
    }
}

/// Sampled 1-Lipschitz check of `phi`, and of `phi gamma = gamma phi` when
/// the isometry is flagged equivariant.
pub fn check_phi_properties<B: Bicombing>(
    b: &B,
    iso: &IsometryDescriptor<B::Point>,
    cfg: &ToleranceConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let domain = b
        .sampler_domain()
        .ok_or_else(|| LabError::UnsupportedSpace(b.space_id()))?;
    let tag = format!("phi/{}/{}", b.space_id(), iso.name);
    let rows: Vec<(f64, f64, Vec<Violation>)> = (0..cfg.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &tag, i);
            let x = b.sample_in(&domain, &mut rng).expect("sampler domain declared");
            let y = b.sample_in(&domain, &mut rng).expect("sampler domain declared");
            let (px, py) = (phi_map(b, iso, &x), phi_map(b, iso, &y));
            let (lhs, rhs) = (b.distance(&px, &py), b.distance(&x, &y));
            let lip = (lhs - rhs).max(0.0);
            let mut out = Vec::new();
            if lip > cfg.eq_tol {
                out.push(Violation::new(
                    "phi_lipschitz",
                    json!({"x": to_value(&x), "y": to_value(&y)}),
                    rhs,
                    lhs,
                    lip,
                ));
            }
            let comm = b.distance(&phi_map(b, iso, &iso.apply(&x)), &iso.apply(&px));
            if iso.equivariant && comm > cfg.eq_tol {
                out.push(Violation::new("phi_commutes", json!({"x": to_value(&x)}), 0.0, comm, comm));
            }
            (lip, comm, out)
        })
        .collect();
    let mut report = ExperimentReport::new("phi-properties", &b.space_id(), cfg.seed)
        .param("iso", &iso.name)
        .param("samples", cfg.sample_count);
    let (mut lip, mut comm) = (0.0_f64, 0.0_f64);
    for (l, c, vs) in rows {
        lip = lip.max(l);
        comm = comm.max(c);
        for v in vs {
            report.push(v);
        }
    }
    report.set_summary("max_lipschitz_excess", lip);
    report.set_summary("max_commutator", comm);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpace;
    use crate::spaces::{make_ex63_space, make_normed_space, make_shift_space, NormSpec, ShiftPoint};
    use approx::assert_abs_diff_eq;

    #[test]
    fn phi_examples() {
        let s = make_normed_space(NormSpec::l2(2)).unwrap();
        let tr = s.translation(vec![1.0, 2.0]);
        assert_eq!(phi_map(&s, &tr, &vec![0.5, 0.5]), vec![0.5, 0.5]);
        let (sh, gamma) = make_shift_space();
        assert_eq!(phi_map(&sh, &gamma, &ShiftPoint::zero()), ShiftPoint::indicator(0).scale(-0.5));
        let w = make_ex63_space();
        let p = phi_map(&w, &w.lattice(1, 0), &[0.3, 0.0, 0.0]);
        assert!(w.distance(&p, &[0.3, 0.0, 0.0]) <= 1e-15);
    }

    #[test]
    fn sqrt_bound_on_shift_space() {
        let (sh, gamma) = make_shift_space();
        let r = check_sqrt_bound(&sh, &gamma, &ShiftPoint::zero(), 256, 1e-9);
        assert!(r.is_clean());
        let first = phi_map(&sh, &gamma, &ShiftPoint::zero());
        assert_eq!(sh.distance(&ShiftPoint::zero(), &first), 0.5);
    }

    #[test]
    fn translation_start_is_already_fixed() {
        let s = make_normed_space(NormSpec::linf(2)).unwrap();
        let tr = s.translation(vec![3.0, 4.0]);
        let fp = solve_phi_fixed_point(&s, &tr, &vec![1.0, -1.0], &AxisSolverConfig::default()).unwrap();
        assert_eq!(fp.point, vec![1.0, -1.0]);
        assert_eq!(fp.outer_iterations, 0);
        let axis = build_axis(&s, &tr, &fp.point, 1e-8).unwrap();
        let p = axis.at(2.0);
        assert_abs_diff_eq!(p[0], 1.0 + 2.0 * 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], -1.0 + 2.0, epsilon = 1e-12);
        assert!(verify_sigma_line(&s, &axis, 10.0, 500, 1) <= 1e-9);
    }

    #[test]
    fn identity_is_not_hyperbolic() {
        let s = make_normed_space(NormSpec::l1(2)).unwrap();
        let id = IsometryDescriptor::identity(s.space_id());
        assert!(matches!(build_axis(&s, &id, &vec![0.0, 0.0], 1e-8), Err(LabError::NotHyperbolic(_))));
    }

    #[test]
    fn wedge_axis_through_origin() {
        let w = make_ex63_space();
        let iso = w.lattice(1, 0);
        let res = axis_pipeline(&w, &iso, &[0.0, 0.0, 0.0], &AxisSolverConfig::default(), 10.0, 2000, 3).unwrap();
        assert_eq!(res.status, AxisStatus::Converged);
        assert_eq!(res.period, 1.0);
        let axis = res.axis.as_ref().unwrap();
        assert_eq!(axis.at(2.5), [2.5, 0.0, 0.0]);
        assert_eq!(axis.at(-3.25), [-3.25, 0.0, 0.0]);
        assert!(res.sigma_line_residual <= 1e-9);
        assert!(res.axis_property_residual <= 1e-12);
        assert!(res.displacement_residual <= 1e-12);
    }

    #[test]
    fn shift_space_has_no_fixed_point() {
        let (sh, gamma) = make_shift_space();
        let cfg = AxisSolverConfig {
            outer_max: 8,
            inner_tol: 1e-9,
            ..AxisSolverConfig::default()
        };
        match solve_phi_fixed_point(&sh, &gamma, &ShiftPoint::zero(), &cfg) {
            Err(LabError::NoConvergence { trace, .. }) => {
                assert!(trace.iter().all(|&d| d > 0.0));
                assert!(trace.windows(2).all(|w| w[1] < w[0]), "{trace:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn phi_is_nonexpansive_and_commutes() {
        let (sh, gamma) = make_shift_space();
        let r = check_phi_properties(&sh, &gamma, &ToleranceConfig::default().with_samples(200)).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations.first());
        let w = make_ex63_space();
        let r = check_phi_properties(&w, &w.lattice(1, 1), &ToleranceConfig::default().with_samples(500)).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations.first());
    }

    #[test]
    fn bad_lambda_rejected() {
        let cfg = AxisSolverConfig {
            lambda: 1.0,
            ..AxisSolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
