use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::isometry::IsometryDescriptor;
use crate::metric::{Bicombing, GeodesicTrack, Interval, MetricSpace, SamplerDomain};

/// Coordinates of a point in a finite-dimensional normed space.
pub type Vector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormKind {
    L1,
    L2,
    Linf,
    /// `max_i |<x, v_i>|` over a finite direction set.
    Polyhedral,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
            NormKind::Polyhedral => "poly",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSpec {
    pub kind: NormKind,
    pub dim: usize,
    pub polyhedral_directions: Vec<Vector>,
}

impl NormSpec {
    pub fn l1(dim: usize) -> Self {
        Self::plain(NormKind::L1, dim)
    }

    pub fn l2(dim: usize) -> Self {
        Self::plain(NormKind::L2, dim)
    }

    pub fn linf(dim: usize) -> Self {
        Self::plain(NormKind::Linf, dim)
    }

    pub fn polyhedral(directions: Vec<Vector>) -> Self {
        let dim = directions.first().map_or(0, Vec::len);
        Self {
            kind: NormKind::Polyhedral,
            dim,
            polyhedral_directions: directions,
        }
    }

    fn plain(kind: NormKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            polyhedral_directions: Vec::new(),
        }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            NormKind::L1 => v.iter().map(|c| c.abs()).sum(),
            NormKind::L2 => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().fold(0.0, |m, c| m.max(c.abs())),
            NormKind::Polyhedral => self.polyhedral_directions.iter().fold(0.0, |m, d| {
                let dot: f64 = d.iter().zip(v).map(|(a, b)| a * b).sum();
                m.max(dot.abs())
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(LabError::InvalidNorm("dimension must be >= 1".into()));
        }
        if self.kind == NormKind::Polyhedral {
            if let Some(bad) = self.polyhedral_directions.iter().find(|d| d.len() != self.dim) {
                return Err(LabError::InvalidNorm(format!(
                    "direction {bad:?} has length {} but the space has dimension {}",
                    bad.len(),
                    self.dim
                )));
            }
            if rank(&self.polyhedral_directions) < self.dim {
                return Err(LabError::DegenerateNorm { dim: self.dim });
            }
        }
        Ok(())
    }
}

/// Row rank by Gaussian elimination with partial pivoting.
fn rank(rows: &[Vector]) -> usize {
    let mut m: Vec<Vector> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let scale = m
        .iter()
        .flatten()
        .fold(0.0_f64, |a, b| a.max(b.abs()))
        .max(1.0);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())) else {
            break;
        };
        if m[p][c].abs() <= 1e-12 * scale {
            continue;
        }
        m.swap(r, p);
        for i in (r + 1)..m.len() {
            let f = m[i][c] / m[r][c];
            for k in c..cols {
                m[i][k] -= f * m[r][k];
            }
        }
        r += 1;
    }
    r
}

/// Parses a direction file: one vector per line, whitespace-separated decimals.
/// Blank lines and `#` comments are skipped.
pub fn parse_directions(text: &str) -> Result<Vec<Vector>> {
    let mut out: Vec<Vector> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut v = Vec::new();
        let mut col = 0;
        for (i, tok) in content.split_whitespace().enumerate() {
            col = content[col..].find(tok).map_or(col, |p| p + col);
            let x: f64 = tok.parse().map_err(|_| {
                LabError::InvalidNorm(format!(
                    "line {}, column {}: `{tok}` is not a number (entry {})",
                    lineno + 1,
                    col + 1,
                    i + 1
                ))
            })?;
            v.push(x);
            col += tok.len();
        }
        if let Some(first) = out.first() {
            if first.len() != v.len() {
                return Err(LabError::InvalidNorm(format!(
                    "line {}: expected {} entries, found {}",
                    lineno + 1,
                    first.len(),
                    v.len()
                )));
            }
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(LabError::InvalidNorm("no directions given".into()));
    }
    Ok(out)
}

/// Affine combination that is exact at both endpoints and when `x == y`.
pub(crate) fn lerp(x: &[f64], y: &[f64], t: f64) -> Vector {
    if t <= 0.5 {
        x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect()
    } else {
        let s = 1.0 - t;
        x.iter().zip(y).map(|(a, b)| b + s * (a - b)).collect()
    }
}

/// `(R^n, ||.||)` with the affine bicombing.
#[derive(Debug, Clone, PartialEq)]
pub struct NormedSpace {
    spec: NormSpec,
    id: String,
}

/// Builds the normed space; its affine bicombing is part of the same value.
pub fn make_normed_space(spec: NormSpec) -> Result<NormedSpace> {
    spec.validate()?;
    let id = match (spec.kind, spec.dim) {
        (k, 1) => format!("{k}-line"),
        (k, 2) => format!("{k}-plane"),
        (k, d) => format!("{k}-{d}d"),
    };
    Ok(NormedSpace { spec, id })
}

impl NormedSpace {
    pub fn spec(&self) -> &NormSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.spec.norm(v)
    }

    /// Translation by `v`; the affine bicombing commutes with it.
    pub fn translation(&self, v: Vector) -> IsometryDescriptor<Vector> {
        let back: Vector = v.iter().map(|c| -c).collect();
        IsometryDescriptor::new(
            format!("translate{v:?}"),
            self.id.clone(),
            true,
            move |x: &Vector| x.iter().zip(&v).map(|(a, b)| a + b).collect(),
            move |x: &Vector| x.iter().zip(&back).map(|(a, b)| a + b).collect(),
        )
    }

    /// Unit-speed affine curve `s -> base + s * dir / ||dir||` on `domain`.
    pub fn affine_track(&self, label: &str, base: Vector, dir: Vector, domain: Interval) -> GeodesicTrack<Vector> {
        let n = self.norm(&dir);
        let unit: Vector = if n > 0.0 {
            dir.iter().map(|c| c / n).collect()
        } else {
            dir
        };
        let speed = if n > 0.0 { 1.0 } else { 0.0 };
        GeodesicTrack::new(label, self.id.clone(), domain, speed, move |s| {
            base.iter().zip(&unit).map(|(b, u)| b + s * u).collect()
        })
    }
}

impl MetricSpace for NormedSpace {
    type Point = Vector;

    fn space_id(&self) -> String {
        self.id.clone()
    }

    fn distance(&self, x: &Vector, y: &Vector) -> f64 {
        let diff: Vector = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.spec.norm(&diff)
    }

    fn contains(&self, x: &Vector) -> bool {
        x.len() == self.spec.dim && x.iter().all(|c| c.is_finite())
    }

    fn sampler_domain(&self) -> Option<SamplerDomain> {
        Some(SamplerDomain::cube(self.spec.dim, -10.0, 10.0))
    }

    fn box_domain(&self, length: f64) -> Option<SamplerDomain> {
        Some(SamplerDomain::cube(self.spec.dim, 0.0, length))
    }

    fn sample_in(&self, domain: &SamplerDomain, rng: &mut ChaCha8Rng) -> Option<Vector> {
        Some((0..self.spec.dim).map(|i| domain.draw(i, rng)).collect())
    }

    fn within(&self, x: &Vector, domain: &SamplerDomain) -> bool {
        x.iter().enumerate().all(|(i, &c)| domain.holds(i, c))
    }

    fn coordinate_count(&self, _x: &Vector) -> usize {
        self.spec.dim
    }

    fn nudge(&self, x: &Vector, coord: usize, step: f64) -> Option<Vector> {
        let mut y = x.clone();
        *y.get_mut(coord)? += step;
        Some(y)
    }
}

impl Bicombing for NormedSpace {
    fn segment_point(&self, x: &Vector, y: &Vector, t: f64) -> Vector {
        lerp(x, y, t)
    }

    fn claims_consistent(&self) -> bool {
        true
    }
}
