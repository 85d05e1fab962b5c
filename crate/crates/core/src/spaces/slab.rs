//! Subsets of `(R^3, max-norm)` lying between two graphs `g <= u <= gbar`,
//! with the bicombing obtained by clamping affine segments vertically.

use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::isometry::IsometryDescriptor;
use crate::metric::{Bicombing, GeodesicTrack, Interval, MetricSpace, SamplerDomain};

pub type Point3 = [f64; 3];

/// Membership slack for points produced by floating-point arithmetic.
const MEMBERSHIP_TOL: f64 = 1e-12;

/// The two bounding graphs and the admissible base region.
pub trait SlabBounds: Send + Sync + Clone {
    const ID: &'static str;

    fn lower(&self, s: f64, t: f64) -> f64;
    fn upper(&self, s: f64, t: f64) -> f64;
    fn base_contains(&self, s: f64, t: f64) -> bool;
    fn sampler_domain(&self) -> SamplerDomain;
    fn box_domain(&self, length: f64) -> SamplerDomain;
    /// Projects a base point into the admissible region (used by local search).
    fn clamp_base(&self, s: f64, t: f64) -> (f64, f64) {
        (s, t)
    }
}

fn max_norm(x: &Point3, y: &Point3) -> f64 {
    (x[0] - y[0])
        .abs()
        .max((x[1] - y[1]).abs())
        .max((x[2] - y[2]).abs())
}

/// A slab space; points are `[s, t, u]`.
#[derive(Debug, Clone, Default)]
pub struct SlabSpace<B> {
    bounds: B,
}

impl<B: SlabBounds> SlabSpace<B> {
    pub fn new(bounds: B) -> Self {
        Self { bounds }
    }

    pub fn g(&self, s: f64, t: f64) -> f64 {
        self.bounds.lower(s, t)
    }

    pub fn gbar(&self, s: f64, t: f64) -> f64 {
        self.bounds.upper(s, t)
    }

    /// Vertical retraction of an ambient point onto the slab.
    pub fn retract(&self, ambient: Point3) -> Result<Point3> {
        let [s, t, _] = ambient;
        if !self.bounds.base_contains(s, t) {
            return Err(LabError::OutOfDomain { s, t });
        }
        Ok(self.clamp_height(ambient))
    }

    fn clamp_height(&self, [s, t, u]: Point3) -> Point3 {
        let lo = self.g(s, t);
        let hi = self.gbar(s, t);
        [s, t, u.max(lo).min(hi)]
    }

    /// The plain affine segment in the ambient space (before clamping).
    pub fn affine(&self, x: &Point3, y: &Point3, t: f64) -> Point3 {
        let l = super::normed::lerp(x, y, t);
        [l[0], l[1], l[2]]
    }
}

impl<B: SlabBounds> MetricSpace for SlabSpace<B> {
    type Point = Point3;

    fn space_id(&self) -> String {
        B::ID.to_string()
    }

    fn distance(&self, x: &Point3, y: &Point3) -> f64 {
        max_norm(x, y)
    }

    fn contains(&self, x: &Point3) -> bool {
        let [s, t, u] = *x;
        x.iter().all(|c| c.is_finite())
            && self.bounds.base_contains(s, t)
            && u >= self.g(s, t) - MEMBERSHIP_TOL
            && u <= self.gbar(s, t) + MEMBERSHIP_TOL
    }

    fn sampler_domain(&self) -> Option<SamplerDomain> {
        Some(self.bounds.sampler_domain())
    }

    fn box_domain(&self, length: f64) -> Option<SamplerDomain> {
        Some(self.bounds.box_domain(length))
    }

    /// Base point from the first two ranges; height uniform between the graphs.
    fn sample_in(&self, domain: &SamplerDomain, rng: &mut ChaCha8Rng) -> Option<Point3> {
        let s = domain.draw(0, rng);
        let t = domain.draw(1, rng);
        let frac = domain.draw(2, rng);
        let lo = self.g(s, t);
        let hi = self.gbar(s, t);
        Some([s, t, lo + frac * (hi - lo)])
    }

    fn within(&self, x: &Point3, domain: &SamplerDomain) -> bool {
        domain.holds(0, x[0]) && domain.holds(1, x[1])
    }

    fn coordinate_count(&self, _x: &Point3) -> usize {
        3
    }

    fn nudge(&self, x: &Point3, coord: usize, step: f64) -> Option<Point3> {
        let mut y = *x;
        *y.get_mut(coord)? += step;
        let (s, t) = self.bounds.clamp_base(y[0], y[1]);
        Some(self.clamp_height([s, t, y[2]]))
    }
}

impl<B: SlabBounds> Bicombing for SlabSpace<B> {
    fn segment_point(&self, x: &Point3, y: &Point3, t: f64) -> Point3 {
        let [s, b, u] = self.affine(x, y, t);
        let (s, b) = self.bounds.clamp_base(s, b);
        self.clamp_height([s, b, u])
    }

    /// The clamped affine bicombing is not known to restrict to itself.
    fn claims_consistent(&self) -> bool {
        false
    }
}

/// Bounds of the strip space: `g` equals `t/2`, `|s - t|/2`, `(1 - t)/2` on
/// `s <= 0`, `0 <= s <= 1`, `s >= 1`, and `gbar(s, t) = 1/2 - g(s, 1 - t)`.
#[derive(Debug, Clone, Copy)]
pub struct StripBounds {
    /// Samplers use `s` in `[-half_width, half_width + 1]`.
    pub half_width: f64,
}

impl Default for StripBounds {
    fn default() -> Self {
        Self { half_width: 10.0 }
    }
}

fn strip_g(s: f64, t: f64) -> f64 {
    if s <= 0.0 {
        0.5 * t
    } else if s <= 1.0 {
        0.5 * (s - t).abs()
    } else {
        0.5 * (1.0 - t)
    }
}

impl SlabBounds for StripBounds {
    const ID: &'static str = "ex22";

    fn lower(&self, s: f64, t: f64) -> f64 {
        strip_g(s, t)
    }

    fn upper(&self, s: f64, t: f64) -> f64 {
        0.5 - strip_g(s, 1.0 - t)
    }

    fn base_contains(&self, s: f64, t: f64) -> bool {
        s.is_finite() && (0.0..=1.0).contains(&t)
    }

    fn sampler_domain(&self) -> SamplerDomain {
        let l = self.half_width;
        SamplerDomain::new(vec![(-l, l + 1.0), (0.0, 1.0), (0.0, 1.0)])
    }

    fn box_domain(&self, length: f64) -> SamplerDomain {
        SamplerDomain::new(vec![(0.0, length), (0.0, 1.0), (0.0, 1.0)])
    }

    fn clamp_base(&self, s: f64, t: f64) -> (f64, f64) {
        (s, t.clamp(0.0, 1.0))
    }
}

pub type StripSpace = SlabSpace<StripBounds>;

pub fn make_ex22_space() -> StripSpace {
    SlabSpace::new(StripBounds::default())
}

impl StripSpace {
    /// `xi(s) = (s, 0, g(s, 0))`, the lower boundary line.
    pub fn xi(&self) -> GeodesicTrack<Point3> {
        GeodesicTrack::new("xi", "ex22", Interval::LINE, 1.0, |s| [s, 0.0, strip_g(s, 0.0)])
    }

    /// `xi'(s) = (s, 1, g(s, 1))`, the upper boundary line.
    pub fn xi_prime(&self) -> GeodesicTrack<Point3> {
        GeodesicTrack::new("xi'", "ex22", Interval::LINE, 1.0, |s| [s, 1.0, strip_g(s, 1.0)])
    }
}

/// The 1-periodic tent function with `w(t) = |t|` on `[-1/2, 1/2]`.
pub fn tent(t: f64) -> f64 {
    (t - t.round()).abs()
}

/// Bounds of the periodic wedge space: `g(s, t) = w(t)`, `gbar = max(w(s), w(t))`.
#[derive(Debug, Clone, Copy)]
pub struct WedgeBounds {
    /// Samplers use `s, t` in `[-half_width, half_width]`.
    pub half_width: f64,
}

impl Default for WedgeBounds {
    fn default() -> Self {
        Self { half_width: 10.0 }
    }
}

impl SlabBounds for WedgeBounds {
    const ID: &'static str = "ex63";

    fn lower(&self, _s: f64, t: f64) -> f64 {
        tent(t)
    }

    fn upper(&self, s: f64, t: f64) -> f64 {
        tent(s).max(tent(t))
    }

    fn base_contains(&self, s: f64, t: f64) -> bool {
        s.is_finite() && t.is_finite()
    }

    fn sampler_domain(&self) -> SamplerDomain {
        let l = self.half_width;
        SamplerDomain::new(vec![(-l, l), (-l, l), (0.0, 1.0)])
    }

    fn box_domain(&self, length: f64) -> SamplerDomain {
        SamplerDomain::new(vec![(0.0, length), (0.0, length), (0.0, 1.0)])
    }
}

pub type WedgeSpace = SlabSpace<WedgeBounds>;

pub fn make_ex63_space() -> WedgeSpace {
    SlabSpace::new(WedgeBounds::default())
}

impl WedgeSpace {
    /// The lattice element `(z, z')` acting by `x -> x + (z, z', 0)`.
    pub fn lattice(&self, z: i64, z2: i64) -> IsometryDescriptor<Point3> {
        let (a, b) = (z as f64, z2 as f64);
        IsometryDescriptor::new(
            format!("lattice({z},{z2})"),
            "ex63",
            true,
            move |x: &Point3| [x[0] + a, x[1] + b, x[2]],
            move |x: &Point3| [x[0] - a, x[1] - b, x[2]],
        )
    }

    /// `xi(s) = (s, 0, 0)` on the lower sheet.
    pub fn xi(&self) -> GeodesicTrack<Point3> {
        GeodesicTrack::new("xi", "ex63", Interval::LINE, 1.0, |s| [s, 0.0, 0.0])
    }

    /// `xi'(t) = (1/2, t, 1/2)` on the upper sheet.
    pub fn xi_prime(&self) -> GeodesicTrack<Point3> {
        GeodesicTrack::new("xi'", "ex63", Interval::LINE, 1.0, |t| [0.5, t, 0.5])
    }
}
