//! Four-point hyperbolicity, tight spans of quadruples and slim triangles.
//!
//! A quadruple is given as a symmetric 4x4 distance matrix with labels
//! `0..4` read as `w, x, y, z`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{LabError, Result};
use crate::metric::{stream_rng, Bicombing, MetricSpace, SamplerDomain};
use crate::report::{to_value, ExperimentReport};

pub type Dist4 = [[f64; 4]; 4];

/// Checks symmetry, zero diagonal, non-negativity and all triangle
/// inequalities up to `tol`.
pub fn validate_quadruple(d: &Dist4, tol: f64) -> Result<()> {
    for i in 0..4 {
        if d[i][i].abs() > tol {
            return Err(LabError::NotAMetric(format!("d({i},{i}) = {}", d[i][i])));
        }
        for j in 0..4 {
            if !d[i][j].is_finite() || d[i][j] < -tol {
                return Err(LabError::NotAMetric(format!("d({i},{j}) = {}", d[i][j])));
            }
            if (d[i][j] - d[j][i]).abs() > tol {
                return Err(LabError::NotAMetric(format!("d({i},{j}) != d({j},{i})")));
            }
            for k in 0..4 {
                let excess = d[i][k] - d[i][j] - d[j][k];
                if excess > tol {
                    return Err(LabError::NotAMetric(format!(
                        "d({i},{k}) exceeds d({i},{j}) + d({j},{k}) by {excess}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The three pairing sums `(wy + xz, wx + yz, wz + xy)`.
fn pairings(d: &Dist4) -> [f64; 3] {
    [d[0][2] + d[1][3], d[0][1] + d[2][3], d[0][3] + d[1][2]]
}

fn pair_distances(d: &Dist4, k: usize) -> (f64, f64) {
    match k {
        0 => (d[0][2], d[1][3]),
        1 => (d[0][1], d[2][3]),
        _ => (d[0][3], d[1][2]),
    }
}

/// Half the gap between the largest and the second largest pairing sum,
/// i.e. the least `delta` for which the quadruple is `delta`-hyperbolic.
pub fn four_point_delta(d: &Dist4, tol: f64) -> Result<f64> {
    validate_quadruple(d, tol)?;
    Ok(delta_unchecked(d))
}

fn delta_unchecked(d: &Dist4) -> f64 {
    let mut s = pairings(d);
    s.sort_by(f64::total_cmp);
    ((s[2] - s[1]) / 2.0).max(0.0)
}

pub fn quadruple_matrix<S: MetricSpace>(space: &S, pts: &[S::Point]) -> Dist4 {
    let mut d = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            d[i][j] = space.distance(&pts[i], &pts[j]);
            d[j][i] = d[i][j];
        }
    }
    d
}

/// The tight span of a quadruple: an l1 rectangle `[0, Q] x [0, P]` with a
/// leg attached at each corner. After relabeling, `w y + x z` is the largest
/// pairing; `w, x` are joined across the side of length `Q` and `w, z`
/// across the side of length `P`.
#[derive(Debug, Clone, Serialize)]
pub struct QuadrupleSpan {
    /// Original indices of the relabeled points `w, x, y, z`.
    pub labels: [usize; 4],
    /// `(c, a, b) = (wy + xz, wx + yz, wz + xy)` in the relabeled order.
    pub sums: [f64; 3],
    /// `(P, Q) = ((c - a) / 2, (c - b) / 2)`.
    pub rect_sides: [f64; 2],
    /// Leg lengths at `w, x, y, z`.
    pub legs: [f64; 4],
    pub width: f64,
    /// Rectangle corners of `w, x, y, z`.
    pub corners: [[f64; 2]; 4],
    /// Largest deviation of realized from given distances.
    pub realization_residual: f64,
    pub tie_note: Option<String>,
}

impl QuadrupleSpan {
    /// Realized distance between relabeled points `i` and `j`.
    pub fn realized(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (p, q) = (self.corners[i], self.corners[j]);
        self.legs[i] + (p[0] - q[0]).abs() + (p[1] - q[1]).abs() + self.legs[j]
    }

    /// Realized distance between original points `i` and `j`.
    pub fn realized_original(&self, i: usize, j: usize) -> f64 {
        let pos = |k: usize| self.labels.iter().position(|&l| l == k).expect("label");
        self.realized(pos(i), pos(j))
    }
}

pub fn tight_span_quadruple(d: &Dist4, tol: f64) -> Result<QuadrupleSpan> {
    validate_quadruple(d, tol)?;
    let s = pairings(d);
    // ties between maximal pairings are broken by the pair distances, so the
    // choice does not depend on the order of the points
    let key = |k: usize| {
        let (u, v) = pair_distances(d, k);
        (s[k], u.max(v), u.min(v))
    };
    let top = (0..3).fold(0, |best, k| if key(k).partial_cmp(&key(best)) == Some(Ordering::Greater) { k } else { best });
    let labels: [usize; 4] = match top {
        0 => [0, 1, 2, 3],
        1 => [0, 2, 1, 3],
        _ => [0, 1, 3, 2],
    };
    let e = |i: usize, j: usize| d[labels[i]][labels[j]];
    let (w, x, y, z) = (0, 1, 2, 3);
    let c = e(w, y) + e(x, z);
    let a = e(w, x) + e(y, z);
    let b = e(w, z) + e(x, y);
    let p = (c - a) / 2.0;
    let q = (c - b) / 2.0;
    let legs = [
        (e(w, x) + e(w, z) - e(x, z)) / 2.0,
        (e(x, w) + e(x, y) - e(w, y)) / 2.0,
        (e(y, x) + e(y, z) - e(x, z)) / 2.0,
        (e(z, w) + e(z, y) - e(w, y)) / 2.0,
    ];
    let corners = [[0.0, 0.0], [q, 0.0], [q, p], [0.0, p]];
    let tie_note = {
        let ties: Vec<&str> = [("wx+yz", a), ("wz+xy", b)]
            .iter()
            .filter(|(_, v)| *v == c)
            .map(|(n, _)| *n)
            .collect();
        (!ties.is_empty()).then(|| format!("maximal pairing tied with {}; rectangle is degenerate", ties.join(", ")))
    };
    let mut span = QuadrupleSpan {
        labels,
        sums: [c, a, b],
        rect_sides: [p, q],
        legs,
        width: p.min(q),
        corners,
        realization_residual: 0.0,
        tie_note,
    };
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            worst = worst.max((span.realized(i, j) - e(i, j)).abs());
        }
    }
    span.realization_residual = worst;
    Ok(span)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaConfig {
    pub box_length: f64,
    pub quadruples: usize,
    pub seed: u64,
    /// Witnesses refined by local search after sampling (0 disables).
    pub refine_top: usize,
    pub refine_budget: usize,
    pub tol: f64,
}

impl DeltaConfig {
    pub fn new(box_length: f64, quadruples: usize, seed: u64) -> Self {
        Self {
            box_length,
            quadruples,
            seed,
            refine_top: 8,
            refine_budget: 4000,
            tol: 1e-9,
        }
    }
}

/// Largest four-point delta found in the space's box domain, with its
/// witness.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaEstimate<P> {
    pub delta: f64,
    pub sampled_delta: f64,
    pub witness: Vec<P>,
    pub span: QuadrupleSpan,
}

fn cmp_witness<P: Serialize>(a: &(f64, Vec<P>), b: &(f64, Vec<P>)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| {
        let ka = serde_json::to_string(&a.1).unwrap_or_default();
        let kb = serde_json::to_string(&b.1).unwrap_or_default();
        ka.cmp(&kb)
    })
}

/// Coordinate ascent on the four-point delta of `pts`, never leaving `domain`.
fn refine_witness<S: MetricSpace>(space: &S, domain: &SamplerDomain, mut pts: Vec<S::Point>, budget: usize) -> (f64, Vec<S::Point>) {
    let mut best = delta_unchecked(&quadruple_matrix(space, &pts));
    let mut step = domain.extent() / 8.0;
    let floor = domain.extent() * 1e-9;
    let mut evals = 0;
    while step > floor && evals < budget {
        let mut improved = false;
        for k in 0..4 {
            for c in 0..space.coordinate_count(&pts[k]) {
                for dir in [1.0, -1.0] {
                    let Some(moved) = space.nudge(&pts[k], c, dir * step) else {
                        continue;
                    };
                    if !space.within(&moved, domain) {
                        continue;
                    }
                    let mut trial = pts.clone();
                    trial[k] = moved;
                    let v = delta_unchecked(&quadruple_matrix(space, &trial));
                    evals += 1;
                    if v > best {
                        best = v;
                        pts = trial;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (best, pts)
}

pub fn estimate_delta<S: MetricSpace>(space: &S, cfg: &DeltaConfig) -> Result<DeltaEstimate<S::Point>> {
    let domain = space
        .box_domain(cfg.box_length)
        .ok_or_else(|| LabError::UnsupportedSpace(space.space_id()))?;
    if cfg.quadruples == 0 {
        return Err(LabError::InvalidConfig("need at least one quadruple".into()));
    }
    let tag = format!("delta/{}/{}", space.space_id(), cfg.box_length);
    let mut sampled: Vec<(f64, Vec<S::Point>)> = (0..cfg.quadruples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &tag, i);
            let pts: Vec<S::Point> = (0..4)
                .map(|_| space.sample_in(&domain, &mut rng).expect("box domain declared"))
                .collect();
            (delta_unchecked(&quadruple_matrix(space, &pts)), pts)
        })
        .collect();
    sampled.sort_by(cmp_witness);
    let sampled_delta = sampled[0].0;
    let mut candidates: Vec<(f64, Vec<S::Point>)> = sampled[..cfg.refine_top.min(sampled.len())]
        .par_iter()
        .map(|(_, pts)| refine_witness(space, &domain, pts.clone(), cfg.refine_budget))
        .collect();
    candidates.push(sampled.swap_remove(0));
    candidates.sort_by(cmp_witness);
    let (delta, witness) = candidates.swap_remove(0);
    let span = tight_span_quadruple(&quadruple_matrix(space, &witness), cfg.tol)?;
    Ok(DeltaEstimate {
        delta,
        sampled_delta,
        witness,
        span,
    })
}

pub fn delta_report<S: MetricSpace>(space: &S, cfg: &DeltaConfig) -> Result<ExperimentReport> {
    let est = estimate_delta(space, cfg)?;
    let mut report = ExperimentReport::new("hyperbolicity", &space.space_id(), cfg.seed)
        .param("box", cfg.box_length)
        .param("quadruples", cfg.quadruples)
        .param("refine_top", cfg.refine_top);
    report.set_summary("delta", est.delta);
    report.set_summary("sampled_delta", est.sampled_delta);
    report.set_summary("witness", to_value(&est.witness));
    // the witness rectangle is an isometric l1 copy of [0, P] x [0, Q]
    report.set_summary("square_certificate", to_value(&est.span));
    Ok(report)
}

/// Upper estimate of `dist(p, sigma_xy)`: best grid parameter, then a
/// ternary refinement on its neighbouring cells.
fn distance_to_segment<B: Bicombing>(b: &B, p: &B::Point, x: &B::Point, y: &B::Point, ts: &[f64]) -> f64 {
    let f = |t: f64| b.distance(p, &b.segment_point(x, y, t));
    let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let (k, &best) = vals
        .iter()
        .enumerate()
        .min_by(|a, c| a.1.total_cmp(c.1))
        .expect("non-empty grid");
    let (mut lo, mut hi) = (ts[k.saturating_sub(1)], ts[(k + 1).min(ts.len() - 1)]);
    let mut out = best;
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let (f1, f2) = (f(m1), f(m2));
        out = out.min(f1).min(f2);
        if f1 <= f2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    out
}

/// Largest distance from a grid point of `sigma_xz` to the other two sides
/// of the triangle (`grid` parameters per side).
pub fn triangle_slimness<B: Bicombing>(b: &B, x: &B::Point, y: &B::Point, z: &B::Point, grid: usize) -> f64 {
    let ts: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    ts.iter()
        .map(|&t| {
            let p = b.segment_point(x, z, t);
            distance_to_segment(b, &p, x, y, &ts).min(distance_to_segment(b, &p, y, z, &ts))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SlimEstimate {
    pub s_max: f64,
    /// Largest distance between the endpoints of an examined diagonal.
    pub diameter: f64,
    pub grid: usize,
    /// `diameter / (grid - 1)`: one grid step on the longest diagonal.
    pub slack: f64,
}

/// Slim constant over `n_triples` sampled triangles in the box plus the
/// two triangles on each diagonal of every quadruple in `shared`.
pub fn slim_constant<B: Bicombing>(
    b: &B,
    box_length: f64,
    n_triples: usize,
    grid: usize,
    seed: u64,
    shared: &[Vec<B::Point>],
) -> Result<SlimEstimate> {
    if grid < 2 {
        return Err(LabError::InvalidConfig("slim grid needs >= 2 points".into()));
    }
    let domain = b
        .box_domain(box_length)
        .ok_or_else(|| LabError::UnsupportedSpace(b.space_id()))?;
    let tag = format!("slim/{}/{}", b.space_id(), box_length);
    let mut triples: Vec<[B::Point; 3]> = (0..n_triples as u64)
        .map(|i| {
            let mut rng = stream_rng(seed, &tag, i);
            let mut draw = || b.sample_in(&domain, &mut rng).expect("box domain declared");
            [draw(), draw(), draw()]
        })
        .collect();
    for q in shared {
        let [w, x, y, z] = [&q[0], &q[1], &q[2], &q[3]];
        for (p, m, r) in [(x, y, z), (x, w, z), (w, x, y), (w, z, y)] {
            triples.push([p.clone(), m.clone(), r.clone()]);
        }
    }
    let (s_max, diameter) = triples
        .par_iter()
        .map(|[x, y, z]| (triangle_slimness(b, x, y, z, grid), b.distance(x, z)))
        .reduce(|| (0.0, 0.0), |a, c| (a.0.max(c.0), a.1.max(c.1)));
    Ok(SlimEstimate {
        s_max,
        diameter,
        grid,
        slack: diameter / (grid - 1) as f64,
    })
}

/// Runs both estimators on the same box and checks
/// `delta <= 2 s_max + slack`; the delta witness quadruple is part of the
/// slim sample.
pub fn slim_relation_report<B: Bicombing>(
    b: &B,
    delta_cfg: &DeltaConfig,
    n_triples: usize,
    grid: usize,
) -> Result<ExperimentReport> {
    let est = estimate_delta(b, delta_cfg)?;
    let slim = slim_constant(b, delta_cfg.box_length, n_triples, grid, delta_cfg.seed, std::slice::from_ref(&est.witness))?;
    let rhs = 2.0 * slim.s_max + slim.slack;
    let mut report = ExperimentReport::new("slim", &b.space_id(), delta_cfg.seed)
        .param("box", delta_cfg.box_length)
        .param("quadruples", delta_cfg.quadruples)
        .param("triples", n_triples)
        .param("grid", grid);
    report.set_summary("delta", est.delta);
    report.set_summary("s_max", slim.s_max);
    report.set_summary("slack", slim.slack);
    report.set_summary("rhs", rhs);
    if est.delta > rhs {
        report.push(crate::report::Violation::new(
            "slim_relation",
            json!({"witness": to_value(&est.witness)}),
            rhs,
            est.delta,
            est.delta - rhs,
        ));
    }
    Ok(report)
}

/// Parses a 4x4 whitespace-separated distance matrix; blank lines and `#`
/// comments are skipped.
pub fn parse_matrix(text: &str) -> Result<Dist4> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        let mut offset = 0;
        for tok in content.split_whitespace() {
            let col = content[offset..].find(tok).map_or(offset, |p| p + offset);
            offset = col + tok.len();
            let v: f64 = tok.parse().map_err(|_| {
                LabError::InvalidConfig(format!("line {}, column {}: `{tok}` is not a number", lineno + 1, col + 1))
            })?;
            row.push(v);
        }
        if row.len() != 4 {
            return Err(LabError::InvalidConfig(format!(
                "line {}, column 1: expected 4 entries, found {}",
                lineno + 1,
                row.len()
            )));
        }
        if rows.len() == 4 {
            return Err(LabError::InvalidConfig(format!("line {}, column 1: more than 4 rows", lineno + 1)));
        }
        rows.push(row);
    }
    if rows.len() != 4 {
        return Err(LabError::InvalidConfig(format!("expected 4 rows, found {}", rows.len())));
    }
    let mut d = [[0.0; 4]; 4];
    for (i, r) in rows.iter().enumerate() {
        d[i].copy_from_slice(r);
    }
    Ok(d)
}
