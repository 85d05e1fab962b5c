//! Averaging over a cocompact lattice action: the lattice norm from
//! translation lengths, the map `g` along lattice directions, the growth
//! function `e(k)`, the averaged maps `f_k` and their equivariance defect.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::barycenter::{barycenter_tree, BarycenterRequest, Backend};
use crate::error::{LabError, Result};
use crate::flats::ReconstructedNorm;
use crate::isometry::{displacement, translation_length, IsometryDescriptor};
use crate::metric::Bicombing;
use crate::report::{ExperimentReport, Violation};
use crate::spaces::{NormedSpace, WedgeSpace};

type Compose<P> = Arc<dyn Fn(&[i64]) -> IsometryDescriptor<P> + Send + Sync>;

/// A `Z^n` action by isometries; `compose(a)` is the image of `a`.
#[derive(Clone)]
pub struct LatticeAction<B: Bicombing> {
    pub space: B,
    pub rank: usize,
    compose: Compose<B::Point>,
}

impl<B: Bicombing> LatticeAction<B> {
    pub fn new(space: B, rank: usize, compose: impl Fn(&[i64]) -> IsometryDescriptor<B::Point> + Send + Sync + 'static) -> Self {
        Self {
            space,
            rank,
            compose: Arc::new(compose),
        }
    }

    pub fn compose(&self, a: &[i64]) -> IsometryDescriptor<B::Point> {
        (self.compose)(a)
    }

    pub fn generator(&self, i: usize) -> IsometryDescriptor<B::Point> {
        self.compose(&unit(self.rank, i))
    }

    /// Largest `d(beta_i beta_j x, beta_j beta_i x)` over generator pairs and
    /// the given points.
    pub fn commutator_residual(&self, pts: &[B::Point]) -> f64 {
        let gens: Vec<_> = (0..self.rank).map(|i| self.generator(i)).collect();
        let mut worst: f64 = 0.0;
        for x in pts {
            for gi in &gens {
                for gj in &gens {
                    let a = gi.apply(&gj.apply(x));
                    let b = gj.apply(&gi.apply(x));
                    worst = worst.max(self.space.distance(&a, &b));
                }
            }
        }
        worst
    }
}

fn unit(rank: usize, i: usize) -> Vec<i64> {
    (0..rank).map(|j| i64::from(j == i)).collect()
}

impl LatticeAction<WedgeSpace> {
    pub fn ex63(space: WedgeSpace) -> Self {
        let s = space.clone();
        Self::new(space, 2, move |a| s.lattice(a[0], a[1]))
    }
}

impl LatticeAction<NormedSpace> {
    /// Integer translations of a normed space.
    pub fn translations(space: NormedSpace) -> Self {
        let s = space.clone();
        let rank = space.dim();
        Self::new(space, rank, move |a| s.translation(a.iter().map(|&c| c as f64).collect()))
    }
}

/// `I_k = [-k, k]^n` in row-major order (last coordinate fastest).
pub fn index_set(rank: usize, k: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..rank {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-k..=k).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeLength {
    pub direction: Vec<i64>,
    pub length: f64,
    /// `|length(2a) - 2 length(a)|`.
    pub homogeneity_residual: f64,
}

#[derive(Debug, Clone)]
pub struct LatticeNorm {
    pub lengths: Vec<LatticeLength>,
    pub norm: ReconstructedNorm,
}

/// Translation lengths of `compose(a)` from basepoint `x`; the returned norm
/// is the gauge of the symmetric hull of `a / |a|` (rank 2 only).
pub fn lattice_norm<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    directions: &[Vec<i64>],
    n_max: u64,
    conv_tol: f64,
) -> Result<LatticeNorm> {
    let lengths: Vec<LatticeLength> = directions
        .par_iter()
        .map(|a| {
            if a.len() != action.rank || a.iter().all(|&c| c == 0) {
                return Err(LabError::InvalidConfig(format!("bad lattice direction {a:?}")));
            }
            let len = translation_length(&action.space, &action.compose(a), x, n_max, None).translation_length_estimate;
            if len <= conv_tol {
                return Err(LabError::ZeroLength {
                    direction: a.clone(),
                    length: len,
                });
            }
            let doubled: Vec<i64> = a.iter().map(|c| 2 * c).collect();
            let len2 = translation_length(&action.space, &action.compose(&doubled), x, (n_max / 2).max(1), None)
                .translation_length_estimate;
            Ok(LatticeLength {
                direction: a.clone(),
                length: len,
                homogeneity_residual: (len2 - 2.0 * len).abs(),
            })
        })
        .collect::<Result<_>>()?;
    if action.rank != 2 {
        return Err(LabError::InvalidConfig("lattice norm interpolation needs rank 2".into()));
    }
    let unit_points: Vec<[f64; 2]> = lengths
        .iter()
        .map(|l| [l.direction[0] as f64 / l.length, l.direction[1] as f64 / l.length])
        .collect();
    let norm = ReconstructedNorm::from_unit_points("lattice", &unit_points)?;
    Ok(LatticeNorm { lengths, norm })
}

/// Writes `p = lambda a` with `a` integral and `lambda = 1 / q`, for the
/// least `q <= q_max` that makes `q p` integral up to `1e-12`.
pub fn rational_direction(p: &[f64], q_max: i64) -> Result<(Vec<i64>, f64)> {
    for q in 1..=q_max {
        let scaled: Vec<f64> = p.iter().map(|c| c * q as f64).collect();
        if scaled.iter().all(|c| (c - c.round()).abs() <= 1e-12) {
            return Ok((scaled.iter().map(|c| c.round() as i64).collect(), 1.0 / q as f64));
        }
    }
    Err(LabError::InvalidConfig(format!("{p:?} has no denominator <= {q_max}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GConfig {
    pub conv_tol: f64,
    pub k_max: u64,
    pub q_max: i64,
}

impl Default for GConfig {
    fn default() -> Self {
        Self {
            conv_tol: 1e-8,
            k_max: 1 << 20,
            q_max: 64,
        }
    }
}

/// `g(lambda a) = lim sigma(x, alpha^k x, lambda / k)` along doubling `k`
/// with Cauchy stopping. Returns the value and the trace of successive
/// differences.
pub fn g_map<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    a: &[i64],
    lambda: f64,
    cfg: &GConfig,
) -> Result<(B::Point, Vec<f64>)> {
    if lambda == 0.0 || a.iter().all(|&c| c == 0) {
        return Ok((x.clone(), Vec::new()));
    }
    let b = &action.space;
    let at = |k: u64| {
        let ka: Vec<i64> = a.iter().map(|&c| c * k as i64).collect();
        let far = action.compose(&ka).apply(x);
        b.segment_point(x, &far, lambda / k as f64)
    };
    let mut k = 1u64;
    let mut prev = at(k);
    let mut trace = Vec::new();
    while k < cfg.k_max {
        k *= 2;
        let next = at(k);
        let d = b.distance(&prev, &next);
        trace.push(d);
        prev = next;
        if d <= cfg.conv_tol {
            return Ok((prev, trace));
        }
    }
    let residual = trace.last().copied().unwrap_or(f64::NAN);
    Err(LabError::NoConvergence {
        iterations: trace.len(),
        residual,
        trace,
    })
}

/// `g` at an arbitrary rational point `p`.
pub fn g_at<B: Bicombing>(action: &LatticeAction<B>, x: &B::Point, p: &[f64], cfg: &GConfig) -> Result<B::Point> {
    let (a, lambda) = rational_direction(p, cfg.q_max)?;
    g_map(action, x, &a, lambda, cfg).map(|r| r.0)
}

/// `e(k) = max over a in I_k of d(g(a), alpha x)` for `k = 0..=k_max`.
pub fn growth_e<B: Bicombing>(action: &LatticeAction<B>, x: &B::Point, k_max: i64, cfg: &GConfig) -> Result<Vec<f64>> {
    let b = &action.space;
    (0..=k_max)
        .map(|k| {
            index_set(action.rank, k)
                .par_iter()
                .map(|a| {
                    let g = g_map(action, x, a, 1.0, cfg)?.0;
                    Ok(b.distance(&g, &action.compose(a).apply(x)))
                })
                .try_reduce(|| 0.0, |u, v| Ok(u.max(v)))
        })
        .collect()
}

fn offset(p: &[f64], a: &[i64]) -> Vec<f64> {
    p.iter().zip(a).map(|(c, &d)| c + d as f64).collect()
}

/// The tuple `alpha^-1 g(p + a)` for `a` in the given order.
fn averaging_tuple<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    p: &[f64],
    order: &[Vec<i64>],
    cfg: &GConfig,
) -> Result<Vec<B::Point>> {
    order
        .par_iter()
        .map(|a| Ok(action.compose(a).apply_inverse(&g_at(action, x, &offset(p, a), cfg)?)))
        .collect()
}

/// `f_k(p)`: tree barycenter of `alpha^-1 g(p + a)` over `I_k` in row-major
/// order.
pub fn averaged_map_fk<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    k: i64,
    p: &[f64],
    cfg: &GConfig,
) -> Result<B::Point> {
    let tuple = averaging_tuple(action, x, p, &index_set(action.rank, k), cfg)?;
    barycenter_tree(&action.space, &tuple)
}

/// Order of `I_k` for the shifted tuple: position `j` holds the partner of
/// `c_j - b_i` (with `c_j` the row-major order), which is the index itself
/// when it lies in `I_k` and `c_j - b_i + (2k+1) b_i` otherwise.
pub fn matched_order(rank: usize, k: i64, i: usize) -> Vec<Vec<i64>> {
    index_set(rank, k)
        .into_iter()
        .map(|mut c| {
            c[i] -= 1;
            if c[i] < -k {
                c[i] += 2 * k + 1;
            }
            c
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub generator: usize,
    pub k: i64,
    pub lhs: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TorusExperiment<P> {
    pub basepoint: P,
    /// `d_{beta_i}(x) - ||b_i||` per generator.
    pub basepoint_residuals: Vec<f64>,
    pub generator_lengths: Vec<f64>,
    pub e_values: Vec<f64>,
    pub residual_table: Vec<ResidualRow>,
}

impl<P> TorusExperiment<P> {
    pub fn csv(&self) -> String {
        let mut out = String::from("i,k,lhs,rhs_bound\n");
        for r in &self.residual_table {
            out.push_str(&format!("{},{},{:.16e},{:.16e}\n", r.generator + 1, r.k, r.lhs, r.bound));
        }
        out
    }

    pub fn bound_violations(&self, slack: f64) -> Vec<&ResidualRow> {
        self.residual_table.iter().filter(|r| r.lhs > r.bound + slack).collect()
    }
}

/// For each generator `i` and each `k`, compares `beta_i f_k(p)` with the
/// barycenter of the shifted tuple in matched order, against the bound
/// `2 (||p + b_i|| + e(k + 1)) / (2k + 1)` with `||.||` the lattice norm.
pub fn torus_residual<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    p: &[f64],
    k_list: &[i64],
    norm: &dyn Fn(&[f64]) -> f64,
    cfg: &GConfig,
) -> Result<TorusExperiment<B::Point>> {
    if k_list.is_empty() {
        return Err(LabError::InvalidConfig("empty k list".into()));
    }
    if p.len() != action.rank {
        return Err(LabError::SizeMismatch(p.len(), action.rank));
    }
    let b = &action.space;
    let k_top = k_list.iter().copied().max().unwrap_or(0) + 1;
    let e_values = growth_e(action, x, k_top, cfg)?;
    let mut rows = Vec::new();
    for &k in k_list {
        let fk = averaged_map_fk(action, x, k, p, cfg)?;
        for i in 0..action.rank {
            let beta = action.generator(i);
            let bi = unit(action.rank, i);
            let shifted_p = offset(p, &bi);
            let tuple = averaging_tuple(action, x, &shifted_p, &matched_order(action.rank, k, i), cfg)?;
            let rhs_point = barycenter_tree(b, &tuple)?;
            let lhs = b.distance(&beta.apply(&fk), &rhs_point);
            let bound = 2.0 * (norm(&shifted_p) + e_values[(k + 1) as usize]) / (2 * k + 1) as f64;
            rows.push(ResidualRow {
                generator: i,
                k,
                lhs,
                bound,
            });
        }
    }
    let gens: Vec<IsometryDescriptor<B::Point>> = (0..action.rank).map(|i| action.generator(i)).collect();
    let generator_lengths: Vec<f64> = (0..action.rank).map(|i| norm(&unit(action.rank, i).iter().map(|&c| c as f64).collect::<Vec<_>>())).collect();
    let basepoint_residuals = gens
        .iter()
        .zip(&generator_lengths)
        .map(|(g, l)| displacement(b, g, x) - l)
        .collect();
    Ok(TorusExperiment {
        basepoint: x.clone(),
        basepoint_residuals,
        generator_lengths,
        e_values,
        residual_table: rows,
    })
}

/// `d(compose(a) f_k(p), f_k(p + a))`.
pub fn pipeline_equivariance<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    k: i64,
    p: &[f64],
    a: &[i64],
    cfg: &GConfig,
) -> Result<f64> {
    let lhs = action.compose(a).apply(&averaged_map_fk(action, x, k, p, cfg)?);
    let rhs = averaged_map_fk(action, x, k, &offset(p, a), cfg)?;
    Ok(action.space.distance(&lhs, &rhs))
}

/// `max d(g(lambda a), g(mu a)) - |lambda - mu| ||a||` over a grid of
/// `lambda, mu` in `[0, 1]`.
pub fn g_lipschitz_excess<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    a: &[i64],
    a_norm: f64,
    grid: usize,
    cfg: &GConfig,
) -> Result<f64> {
    let lambdas: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1).max(1) as f64).collect();
    let pts: Vec<B::Point> = lambdas
        .par_iter()
        .map(|&l| g_map(action, x, a, l, cfg).map(|r| r.0))
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    for (i, p) in pts.iter().enumerate() {
        for (j, q) in pts.iter().enumerate() {
            worst = worst.max(action.space.distance(p, q) - (lambdas[i] - lambdas[j]).abs() * a_norm);
        }
    }
    Ok(worst)
}

pub const DEFAULT_DIRECTIONS: [[i64; 2]; 5] = [[1, 0], [0, 1], [1, 1], [2, 1], [1, -1]];

#[derive(Debug, Clone, Serialize)]
pub struct TorusConfig {
    pub k_list: Vec<i64>,
    pub p: Vec<f64>,
    pub directions: Vec<Vec<i64>>,
    pub n_max: u64,
    pub g: GConfig,
    pub eq_tol: f64,
}

impl TorusConfig {
    pub fn new(k_list: Vec<i64>, p: Vec<f64>) -> Self {
        Self {
            k_list,
            p,
            directions: DEFAULT_DIRECTIONS.iter().map(|d| d.to_vec()).collect(),
            n_max: 256,
            g: GConfig::default(),
            eq_tol: 1e-9,
        }
    }
}

/// The whole pipeline with its assertions: lattice norm, growth, the
/// residual bound, the trend along `k_list`, and basepoint diagnostics.
pub fn torus_report<B: Bicombing>(
    action: &LatticeAction<B>,
    x: &B::Point,
    cfg: &TorusConfig,
    seed: u64,
) -> Result<(ExperimentReport, TorusExperiment<B::Point>)> {
    if cfg.k_list.iter().any(|&k| k < 0) {
        return Err(LabError::InvalidConfig("k must be non-negative".into()));
    }
    let ln = lattice_norm(action, x, &cfg.directions, cfg.n_max, cfg.g.conv_tol)?;
    let norm = |v: &[f64]| ln.norm.norm(v[0], v[1]);
    let exp = torus_residual(action, x, &cfg.p, &cfg.k_list, &norm, &cfg.g)?;
    let mut report = ExperimentReport::new("torus", &action.space.space_id(), seed)
        .param("k", &cfg.k_list)
        .param("p", &cfg.p)
        .param("directions", &cfg.directions)
        .param("n_max", cfg.n_max)
        .param("conv_tol", cfg.g.conv_tol);
    let slack = cfg.g.conv_tol;
    for r in &exp.residual_table {
        if r.lhs > r.bound + slack {
            report.push(Violation::new("bound", json!({"i": r.generator + 1, "k": r.k}), r.bound, r.lhs, r.lhs - r.bound));
        }
    }
    let mut strict = true;
    for i in 0..action.rank {
        let rows: Vec<&ResidualRow> = exp.residual_table.iter().filter(|r| r.generator == i).collect();
        for w in rows.windows(2) {
            if w[1].lhs > w[0].lhs + slack {
                report.push(Violation::new("trend", json!({"i": i + 1, "k": [w[0].k, w[1].k]}), w[0].lhs, w[1].lhs, w[1].lhs - w[0].lhs));
            }
        }
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            strict &= rows.len() > 1 && last.lhs < first.lhs;
        }
    }
    for (k, w) in exp.e_values.windows(2).enumerate() {
        if w[1] < w[0] - cfg.eq_tol {
            report.push(Violation::new("e_monotone", json!({"k": k + 1}), w[0], w[1], w[0] - w[1]));
        }
    }
    for l in &ln.lengths {
        if l.homogeneity_residual > cfg.g.conv_tol {
            report.push(Violation::new("homogeneity", json!({"direction": l.direction}), 0.0, l.homogeneity_residual, l.homogeneity_residual));
        }
    }
    let commutator = action.commutator_residual(std::slice::from_ref(x));
    if commutator > cfg.eq_tol {
        report.push(Violation::new("commute", json!({}), 0.0, commutator, commutator));
    }
    let mut lip = f64::NEG_INFINITY;
    for l in &ln.lengths {
        lip = lip.max(g_lipschitz_excess(action, x, &l.direction, l.length, 9, &cfg.g)?);
    }
    if lip > cfg.g.conv_tol {
        report.push(Violation::new("g_lipschitz", json!({}), 0.0, lip, lip));
    }
    let e_over_k: Vec<Option<f64>> = exp
        .e_values
        .iter()
        .enumerate()
        .map(|(k, e)| (k > 0).then(|| e / k as f64))
        .collect();
    report.set_summary("lattice_lengths", &ln.lengths);
    report.set_summary("e_values", &exp.e_values);
    report.set_summary("e_over_k", e_over_k);
    report.set_summary("residual_table", &exp.residual_table);
    report.set_summary("strict_decrease", strict);
    report.set_summary("basepoint_residuals", &exp.basepoint_residuals);
    report.set_summary("commutator_residual", commutator);
    report.set_summary("g_lipschitz_excess", lip);
    Ok((report, exp))
}

/// Exact-backend barycenter of a short tuple, for cross-checks against the
/// tree backend on small index sets.
pub fn exact_average<B: Bicombing>(action: &LatticeAction<B>, tuple: Vec<B::Point>, conv_tol: f64) -> Result<B::Point> {
    BarycenterRequest::new(&action.space, tuple, Backend::Exact).with_conv_tol(conv_tol).run()
}

/// `max |x_i|`, the norm of the ex63 lattice action.
pub fn linf(p: &[f64]) -> f64 {
    p.iter().fold(0.0, |m, c| m.max(c.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricSpace;
    use crate::spaces::{make_ex63_space, make_normed_space, NormSpec};
    use approx::assert_abs_diff_eq;

    fn wedge() -> LatticeAction<WedgeSpace> {
        LatticeAction::ex63(make_ex63_space())
    }

    #[test]
    fn index_set_is_row_major() {
        let i1 = index_set(2, 1);
        assert_eq!(i1.len(), 9);
        assert_eq!(i1[0], vec![-1, -1]);
        assert_eq!(i1[1], vec![-1, 0]);
        assert_eq!(i1[8], vec![1, 1]);
        assert_eq!(index_set(2, 0), vec![vec![0, 0]]);
    }

    #[test]
    fn matched_order_pairs_partners() {
        let k = 2;
        for i in 0..2 {
            let canon = index_set(2, k);
            let order = matched_order(2, k, i);
            let mut sorted = order.clone();
            sorted.sort();
            let mut expect = canon.clone();
            expect.sort();
            assert_eq!(sorted, expect);
            let mut unmatched = 0;
            for (c, m) in canon.iter().zip(&order) {
                let mut a = c.clone();
                a[i] -= 1;
                if a != *m {
                    unmatched += 1;
                    assert_eq!(a[i] + 2 * k + 1, m[i]);
                }
            }
            assert_eq!(unmatched, 2 * k as usize + 1);
        }
    }

    #[test]
    fn lattice_norm_on_wedge() {
        let act = wedge();
        let dirs = vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![2, 1], vec![1, -1]];
        let ln = lattice_norm(&act, &[0.0, 0.0, 0.0], &dirs, 256, 1e-8).unwrap();
        let got: Vec<f64> = ln.lengths.iter().map(|l| l.length).collect();
        assert_eq!(got, vec![1.0, 1.0, 1.0, 2.0, 1.0]);
        assert!(ln.lengths.iter().all(|l| l.homogeneity_residual == 0.0));
        assert_abs_diff_eq!(ln.norm.norm(3.0, -2.0), 3.0, epsilon = 1e-12);
        assert!(act.commutator_residual(&[[0.2, 0.3, 0.3]]) == 0.0);
    }

    #[test]
    fn zero_direction_rejected() {
        let act = LatticeAction::new(make_ex63_space(), 2, |_| IsometryDescriptor::identity("ex63"));
        let err = lattice_norm(&act, &[0.0, 0.0, 0.0], &[vec![1, 0]], 16, 1e-8).unwrap_err();
        assert!(matches!(err, LabError::ZeroLength { .. }));
    }

    #[test]
    fn g_examples() {
        let act = wedge();
        let x = [0.0, 0.0, 0.0];
        let cfg = GConfig::default();
        assert_eq!(g_map(&act, &x, &[1, 0], 0.5, &cfg).unwrap().0, [0.5, 0.0, 0.0]);
        assert_eq!(g_map(&act, &x, &[1, 0], 0.0, &cfg).unwrap().0, x);
        let flat = LatticeAction::translations(make_normed_space(NormSpec::linf(2)).unwrap());
        let g = g_at(&flat, &vec![0.0, 0.0], &[0.75, -1.5], &cfg).unwrap();
        assert_abs_diff_eq!(g[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], -1.5, epsilon = 1e-12);
    }

    #[test]
    fn rational_directions() {
        assert_eq!(rational_direction(&[0.25, 0.25], 64).unwrap(), (vec![1, 1], 0.25));
        assert_eq!(rational_direction(&[1.25, 0.25], 64).unwrap(), (vec![5, 1], 0.25));
        assert_eq!(rational_direction(&[2.0, -1.0], 64).unwrap(), (vec![2, -1], 1.0));
        assert!(rational_direction(&[std::f64::consts::PI, 0.0], 64).is_err());
    }

    #[test]
    fn growth_on_wedge_and_plane() {
        let e = growth_e(&wedge(), &[0.0, 0.0, 0.0], 4, &GConfig::default()).unwrap();
        assert_eq!(e[0], 0.0);
        assert!(e.iter().all(|&v| v <= 0.5));
        assert!(e.windows(2).all(|w| w[1] >= w[0]));
        let flat = LatticeAction::translations(make_normed_space(NormSpec::l1(2)).unwrap());
        let e = growth_e(&flat, &vec![0.0, 0.0], 3, &GConfig::default()).unwrap();
        assert!(e.iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn averaged_maps() {
        let cfg = GConfig::default();
        let act = wedge();
        let x = [0.0, 0.0, 0.0];
        assert_eq!(averaged_map_fk(&act, &x, 0, &[0.25, 0.25], &cfg).unwrap(), g_at(&act, &x, &[0.25, 0.25], &cfg).unwrap());
        let f1 = averaged_map_fk(&act, &x, 1, &[0.25, 0.25], &cfg).unwrap();
        assert!(act.space.distance(&f1, &[0.25, 0.25, f1[2]]) <= 1e-12);
        let flat = LatticeAction::translations(make_normed_space(NormSpec::l2(2)).unwrap());
        let f = averaged_map_fk(&flat, &vec![0.0, 0.0], 2, &[0.3, -0.7], &cfg).unwrap();
        assert_abs_diff_eq!(f[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], -0.7, epsilon = 1e-12);
    }

    #[test]
    fn residuals_on_flat_plane_vanish() {
        let flat = LatticeAction::translations(make_normed_space(NormSpec::linf(2)).unwrap());
        let t = torus_residual(&flat, &vec![0.0, 0.0], &[0.25, 0.25], &[1, 2], &linf, &GConfig::default()).unwrap();
        assert!(t.residual_table.iter().all(|r| r.lhs <= 1e-12));
    }

    #[test]
    fn residuals_on_wedge_respect_bound() {
        let act = wedge();
        let t = torus_residual(&act, &[0.0, 0.0, 0.0], &[0.25, 0.25], &[1, 2, 3], &linf, &GConfig::default()).unwrap();
        assert!(t.bound_violations(1e-8).is_empty(), "{:?}", t.residual_table);
        assert_eq!(t.csv().lines().count(), 7);
        assert!(t.basepoint_residuals.iter().all(|r| r.abs() <= 1e-12));
    }

    #[test]
    fn lattice_equivariance_through_pipeline() {
        let act = wedge();
        let d = pipeline_equivariance(&act, &[0.0, 0.0, 0.0], 1, &[0.25, 0.25], &[1, 0], &GConfig::default()).unwrap();
        assert!(d <= 2.0 * (1.25 + 0.5) / 3.0);
    }

    #[test]
    fn report_on_wedge() {
        let (report, exp) = torus_report(&wedge(), &[0.0, 0.0, 0.0], &TorusConfig::new(vec![1, 2, 3], vec![0.25, 0.25]), 0).unwrap();
        assert!(report.is_clean(), "{:?}", report.violations);
        assert_eq!(exp.residual_table.len(), 6);
        assert_eq!(report.summary_f64("g_lipschitz_excess"), Some(0.0));
    }

    #[test]
    fn report_on_flat_plane() {
        let flat = LatticeAction::translations(make_normed_space(NormSpec::l1(2)).unwrap());
        let (report, exp) = torus_report(&flat, &vec![0.0, 0.0], &TorusConfig::new(vec![0, 1], vec![0.5, -0.25]), 0).unwrap();
        assert!(report.is_clean());
        assert!(exp.generator_lengths.iter().all(|&l| (l - 1.0).abs() <= 1e-12));
    }
}
