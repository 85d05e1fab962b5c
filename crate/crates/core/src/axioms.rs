//! Sampled verification of the bicombing properties, convexity along
//! segment pairs, coherence of geodesic families and σ-convexity.
//!
//! Properties checked by [`check_bicombing_properties`]:
//!
//! * `i`: `sigma_xy` is a constant-speed geodesic from `x` to `y`;
//! * `ii`: `sigma_yx(t) = sigma_xy(1 - t)`;
//! * `iii`: `d(sigma_xy(t), sigma_x'y'(t)) <= (1-t) d(x,x') + t d(y,y')`;
//! * `iv`: for `p = sigma_xy(r)`, `q = sigma_xy(s)`, `r < s`, the segment
//!   `sigma_pq` is the reparametrized restriction `sigma_xy((1-t) r + t s)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::error::{LabError, Result};
use crate::metric::{stream_rng, Bicombing, GeodesicTrack, MetricSpace, SamplerDomain, ToleranceConfig};
use crate::report::{to_value, ExperimentReport, Violation};
use crate::spaces::slab::{Point3, SlabBounds, SlabSpace};

pub const PROPERTIES: [&str; 4] = ["i", "ii", "iii", "iv"];

/// Every sixteenth sample uses coincident endpoints.
const DEGENERATE_EVERY: u64 = 16;

#[derive(Default)]
struct SampleOutcome {
    residuals: [f64; 4],
    exceed: [usize; 4],
    violations: Vec<Violation>,
}

/// Stratified `(r, s)` with `r < s`, covering the endpoint cases.
fn stratified_pair(i: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a: f64 = rng.gen();
    let b: f64 = rng.gen();
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    match i % 4 {
        0 => (0.0, hi),
        1 => (lo, 1.0),
        2 => (0.0, 1.0),
        _ => (lo, hi),
    }
}

/// Residual of property (iv) for the segment `x -> y` at `(r, s, t)`.
pub fn consistency_residual<B: Bicombing>(b: &B, x: &B::Point, y: &B::Point, r: f64, s: f64, t: f64) -> f64 {
    let p = b.segment_point(x, y, r);
    let q = b.segment_point(x, y, s);
    let lhs = b.segment_point(&p, &q, t);
    let rhs = b.segment_point(x, y, (1.0 - t) * r + t * s);
    b.distance(&lhs, &rhs)
}

/// Largest (iv) residual of one segment over an `n x n x n` grid of `(r, s, t)`.
pub fn segment_consistency<B: Bicombing>(b: &B, x: &B::Point, y: &B::Point, n: usize) -> f64 {
    let n = n.max(2);
    let g: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let mut worst: f64 = 0.0;
    for (i, &r) in g.iter().enumerate() {
        for &s in &g[i + 1..] {
            for &t in &g {
                worst = worst.max(consistency_residual(b, x, y, r, s, t));
            }
        }
    }
    worst
}

fn check_one<B: Bicombing>(b: &B, domain: &SamplerDomain, cfg: &ToleranceConfig, i: u64, tag: &str) -> SampleOutcome {
    let mut rng = stream_rng(cfg.seed, tag, i);
    let draw = |rng: &mut ChaCha8Rng| b.sample_in(domain, rng).expect("sampler domain declared");
    let x = draw(&mut rng);
    let mut y = draw(&mut rng);
    let x2 = draw(&mut rng);
    let mut y2 = draw(&mut rng);
    if i % DEGENERATE_EVERY == DEGENERATE_EVERY - 1 {
        y = x.clone();
        y2 = x2.clone();
    }
    let t: f64 = rng.gen();
    let t2: f64 = rng.gen();
    let (r, s) = stratified_pair(i, &mut rng);
    let tol = cfg.eq_tol;
    // (iv) is only asserted for bicombings that claim it
    let asserted = [true, true, true, b.claims_consistent()];
    let mut out = SampleOutcome::default();
    let mut record = |k: usize, inputs: serde_json::Value, expected: f64, actual: f64, residual: f64| {
        out.residuals[k] = out.residuals[k].max(residual);
        if residual > tol {
            out.exceed[k] += 1;
            if asserted[k] {
                out.violations
                    .push(Violation::new(PROPERTIES[k], inputs, expected, actual, residual));
            }
        }
    };

    // (i): endpoints and the speed identity
    let dxy = b.distance(&x, &y);
    let p0 = b.segment_point(&x, &y, 0.0);
    let p1 = b.segment_point(&x, &y, 1.0);
    let end = b.distance(&p0, &x).max(b.distance(&p1, &y));
    let pt = b.segment_point(&x, &y, t);
    let pt2 = b.segment_point(&x, &y, t2);
    let want = (t - t2).abs() * dxy;
    let got = b.distance(&pt, &pt2);
    let speed = (got - want).abs();
    let inputs = json!({"x": to_value(&x), "y": to_value(&y), "t": t, "t2": t2});
    if end >= speed {
        record(0, inputs, 0.0, end, end);
    } else {
        record(0, inputs, want, got, speed);
    }

    // (ii): reversibility
    let rev = b.segment_point(&y, &x, 1.0 - t);
    let dr = b.distance(&rev, &pt);
    record(1, json!({"x": to_value(&x), "y": to_value(&y), "t": t}), 0.0, dr, dr);

    // (iii): conical inequality
    let q = b.segment_point(&x2, &y2, t);
    let bound = (1.0 - t) * b.distance(&x, &x2) + t * b.distance(&y, &y2);
    let lhs = b.distance(&pt, &q);
    record(
        2,
        json!({"x": to_value(&x), "y": to_value(&y), "x2": to_value(&x2), "y2": to_value(&y2), "t": t}),
        bound,
        lhs,
        (lhs - bound).max(0.0),
    );

    // (iv): consistency
    if r < s {
        let res = consistency_residual(b, &x, &y, r, s, t);
        record(
            3,
            json!({"x": to_value(&x), "y": to_value(&y), "r": r, "s": s, "t": t}),
            0.0,
            res,
            res,
        );
    }
    out
}

/// Samples `cfg.sample_count` tuples `(x, y, x', y', t, t', r, s)` and checks
/// properties (i)-(iv); every breach beyond `eq_tol` becomes a violation, for
/// (iv) only when the bicombing claims consistency.
pub fn check_bicombing_properties<B: Bicombing>(b: &B, cfg: &ToleranceConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let domain = b
        .sampler_domain()
        .ok_or_else(|| LabError::UnsupportedSpace(b.space_id()))?;
    let tag = format!("bicombing/{}", b.space_id());
    let outcomes: Vec<SampleOutcome> = (0..cfg.sample_count as u64)
        .into_par_iter()
        .map(|i| check_one(b, &domain, cfg, i, &tag))
        .collect();
    let mut report = ExperimentReport::new("axioms", &b.space_id(), cfg.seed)
        .param("samples", cfg.sample_count)
        .param("eq_tol", cfg.eq_tol)
        .param("claims_consistent", b.claims_consistent());
    let mut worst = [0.0_f64; 4];
    let mut exceed = [0usize; 4];
    for o in outcomes {
        for k in 0..4 {
            worst[k] = worst[k].max(o.residuals[k]);
            exceed[k] += o.exceed[k];
        }
        for v in o.violations {
            report.push(v);
        }
    }
    for (k, name) in PROPERTIES.iter().enumerate() {
        report.set_summary(&format!("max_residual.{name}"), worst[k]);
        let count = report.violations_of(name);
        report.set_summary(&format!("violations.{name}"), count);
        report.set_summary(&format!("exceedances.{name}"), exceed[k]);
    }
    Ok(report)
}

/// Midpoint-convexity residuals of `t -> d(sigma_xy(t), sigma_x'y'(t))` on
/// adjacent triples of a `grid`-point partition of `[0, 1]`.
pub fn check_convexity_along<B: Bicombing>(
    b: &B,
    pairs: &[(B::Point, B::Point, B::Point, B::Point)],
    grid: usize,
    eq_tol: f64,
) -> Result<ExperimentReport> {
    if grid < 3 {
        return Err(LabError::InvalidConfig("convexity grid needs >= 3 points".into()));
    }
    let ts: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let per_pair: Vec<(f64, f64, Vec<Violation>)> = pairs
        .par_iter()
        .map(|(x, y, x2, y2)| {
            let d: Vec<f64> = ts
                .iter()
                .map(|&t| b.distance(&b.segment_point(x, y, t), &b.segment_point(x2, y2, t)))
                .collect();
            let mut worst: f64 = 0.0;
            let mut out = Vec::new();
            for j in 1..grid - 1 {
                let chord = 0.5 * (d[j - 1] + d[j + 1]);
                let excess = d[j] - chord;
                worst = worst.max(excess);
                if excess > eq_tol {
                    out.push(Violation::new(
                        "convexity",
                        json!({"x": to_value(x), "y": to_value(y), "x2": to_value(x2), "y2": to_value(y2), "t": ts[j]}),
                        chord,
                        d[j],
                        excess,
                    ));
                }
            }
            let iv = segment_consistency(b, x, y, 5).max(segment_consistency(b, x2, y2, 5));
            (worst, iv, out)
        })
        .collect();
    let mut report = ExperimentReport::new("convexity", &b.space_id(), 0)
        .param("pairs", pairs.len())
        .param("grid", grid);
    let mut worst: f64 = 0.0;
    let mut iv: f64 = 0.0;
    for (w, c, vs) in per_pair {
        worst = worst.max(w);
        iv = iv.max(c);
        for v in vs {
            report.push(v);
        }
    }
    report.set_summary("max_excess", worst);
    report.set_summary("iv_max_residual", iv);
    report.set_summary("iv_holds", iv <= eq_tol);
    Ok(report)
}

/// Samples pairs of tracks and affine reparametrizations and checks midpoint
/// convexity of `t -> d(xi_a(alpha(t)), xi_b(beta(t)))`. Unbounded domains
/// are restricted to `[-window, window]`.
pub fn check_coherence<S: MetricSpace>(
    space: &S,
    tracks: &[GeodesicTrack<S::Point>],
    cfg: &ToleranceConfig,
    window: f64,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let id = space.space_id();
    if let Some(bad) = tracks.iter().find(|t| t.space_id != id) {
        return Err(LabError::DomainMismatch(id, bad.space_id.clone()));
    }
    if tracks.is_empty() {
        return Err(LabError::InvalidConfig("no tracks given".into()));
    }
    const GRID: usize = 9;
    let ts: Vec<f64> = (0..GRID).map(|i| i as f64 / (GRID - 1) as f64).collect();
    let tag = format!("coherence/{id}");
    let per_sample: Vec<(f64, Vec<Violation>)> = (0..cfg.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &tag, i);
            let ia = rng.gen_range(0..tracks.len());
            let ib = rng.gen_range(0..tracks.len());
            let (ta, tb) = (&tracks[ia], &tracks[ib]);
            let da = ta.domain.clip(window);
            let db = tb.domain.clip(window);
            let (a0, a1) = (rng.gen_range(da.lo..=da.hi), rng.gen_range(da.lo..=da.hi));
            let (b0, b1) = (rng.gen_range(db.lo..=db.hi), rng.gen_range(db.lo..=db.hi));
            let d: Vec<f64> = ts
                .iter()
                .map(|&t| {
                    let pa = ta.at(a0 + t * (a1 - a0));
                    let pb = tb.at(b0 + t * (b1 - b0));
                    space.distance(&pa, &pb)
                })
                .collect();
            let mut worst: f64 = 0.0;
            let mut out = Vec::new();
            for j in 1..GRID - 1 {
                let chord = 0.5 * (d[j - 1] + d[j + 1]);
                let excess = d[j] - chord;
                worst = worst.max(excess);
                if excess > cfg.eq_tol {
                    out.push(Violation::new(
                        "coherence",
                        json!({"a": ta.label, "b": tb.label, "alpha": [a0, a1], "beta": [b0, b1], "t": ts[j]}),
                        chord,
                        d[j],
                        excess,
                    ));
                }
            }
            (worst, out)
        })
        .collect();
    let mut report = ExperimentReport::new("coherence", &id, cfg.seed)
        .param("tracks", tracks.iter().map(|t| t.label.clone()).collect::<Vec<_>>())
        .param("samples", cfg.sample_count)
        .param("window", window);
    let mut worst: f64 = 0.0;
    for (w, vs) in per_sample {
        worst = worst.max(w);
        for v in vs {
            report.push(v);
        }
    }
    report.set_summary("max_excess", worst);
    Ok(report)
}

/// Largest σ-convexity defect of a finite point set: the distance from
/// sampled segment points `sigma_xy(t)` to the nearest member of `set`,
/// where `x, y` range over `set`.
pub fn sigma_convexity_defect<B: Bicombing>(b: &B, set: &[B::Point], grid: usize) -> f64 {
    let ts: Vec<f64> = (0..grid.max(2)).map(|i| i as f64 / (grid.max(2) - 1) as f64).collect();
    let mut worst: f64 = 0.0;
    for (i, x) in set.iter().enumerate() {
        for y in &set[i + 1..] {
            for &t in &ts {
                let p = b.segment_point(x, y, t);
                let near = set.iter().map(|z| b.distance(&p, z)).fold(f64::INFINITY, f64::min);
                worst = worst.max(near);
            }
        }
    }
    worst
}

/// Samples ambient pairs (heights spread beyond both graphs) and checks
/// `d(pi a, pi b) <= d(a, b)` for the vertical retraction `pi`.
pub fn check_retraction_lipschitz<Bd: SlabBounds>(
    space: &SlabSpace<Bd>,
    cfg: &ToleranceConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let domain = space
        .sampler_domain()
        .ok_or_else(|| LabError::UnsupportedSpace(space.space_id()))?;
    let tag = format!("retraction/{}", space.space_id());
    let results: Vec<(f64, Option<Violation>)> = (0..cfg.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &tag, i);
            let ambient = |rng: &mut ChaCha8Rng| -> Point3 {
                [domain.draw(0, rng), domain.draw(1, rng), rng.gen_range(-1.0..1.5)]
            };
            let a = ambient(&mut rng);
            let mut c = ambient(&mut rng);
            if i % 2 == 0 {
                // nearby pairs exercise the kinks of the bounding graphs
                let h: f64 = rng.gen_range(0.0..0.05);
                c = [a[0] + h * rng.gen_range(-1.0..1.0), a[1] + h * rng.gen_range(-1.0..1.0), c[2]];
                c[1] = c[1].clamp(domain.ranges[1].0, domain.ranges[1].1);
            }
            let pa = space.retract(a).expect("sampled base point");
            let pc = space.retract(c).expect("sampled base point");
            let before = space.distance(&a, &c);
            let after = space.distance(&pa, &pc);
            let excess = after - before;
            let v = (excess > cfg.eq_tol).then(|| {
                Violation::new("retraction_lipschitz", json!([a, c]), before, after, excess)
            });
            (excess.max(0.0), v)
        })
        .collect();
    let mut report = ExperimentReport::new("retraction-lipschitz", &space.space_id(), cfg.seed)
        .param("samples", cfg.sample_count);
    let mut worst: f64 = 0.0;
    for (w, v) in results {
        worst = worst.max(w);
        if let Some(v) = v {
            report.push(v);
        }
    }
    report.set_summary("max_excess", worst);
    Ok(report)
}
