//! Bounded two-sided sequences that are eventually constant on each side,
//! with the sup metric, the affine bicombing and the shifted-step isometry.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::isometry::IsometryDescriptor;
use crate::metric::{Bicombing, MetricSpace, SamplerDomain};

/// `x(k) = left` for `k < start`, `values[k - start]` inside the window and
/// `right` beyond it. Kept in canonical (trimmed) form so that equal
/// sequences compare equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftPoint {
    pub start: i64,
    pub values: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

impl ShiftPoint {
    pub fn constant(c: f64) -> Self {
        Self::new(0, Vec::new(), c, c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// The indicator sequence of index `k`.
    pub fn indicator(k: i64) -> Self {
        Self::new(k, vec![1.0], 0.0, 0.0)
    }

    pub fn new(start: i64, values: Vec<f64>, left: f64, right: f64) -> Self {
        let mut p = Self {
            start,
            values,
            left,
            right,
        };
        p.trim();
        p
    }

    fn trim(&mut self) {
        let lead = self.values.iter().take_while(|&&v| v == self.left).count();
        self.values.drain(..lead);
        self.start += lead as i64;
        let keep = self.values.len()
            - self.values.iter().rev().take_while(|&&v| v == self.right).count();
        self.values.truncate(keep);
        if self.values.is_empty() && self.left == self.right {
            self.start = 0;
        }
    }

    /// One past the last window index.
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    pub fn get(&self, k: i64) -> f64 {
        if k < self.start {
            self.left
        } else if k >= self.end() {
            self.right
        } else {
            self.values[(k - self.start) as usize]
        }
    }

    /// Pointwise combination; exact because both inputs are constant outside
    /// the union of their windows.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        let values = (lo..hi).map(|k| f(self.get(k), other.get(k))).collect();
        Self::new(lo, values, f(self.left, other.left), f(self.right, other.right))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(
            self.start,
            self.values.iter().map(|&v| f(v)).collect(),
            f(self.left),
            f(self.right),
        )
    }

    /// `rho^by`, where `rho(x)(k) = x(k - 1)`.
    pub fn shifted(&self, by: i64) -> Self {
        let mut p = self.clone();
        if !(p.values.is_empty() && p.left == p.right) {
            p.start += by;
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Sup distance; exact for the eventually-constant representation.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        (lo..hi)
            .map(|k| (self.get(k) - other.get(k)).abs())
            .fold(
                (self.left - other.left).abs().max((self.right - other.right).abs()),
                f64::max,
            )
    }
}

/// The step sequence `p(k) = 1` for `k >= 1`, else `0`.
pub fn step_sequence() -> ShiftPoint {
    ShiftPoint::new(1, Vec::new(), 0.0, 1.0)
}

/// The closed form `phi(x) = (rho(x) + rho^-1(x) - z) / 2` with `z` the
/// indicator of `0`.
pub fn phi_closed_form(x: &ShiftPoint) -> ShiftPoint {
    x.shifted(1)
        .add(&x.shifted(-1))
        .sub(&ShiftPoint::indicator(0))
        .scale(0.5)
}

fn lerp1(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.5 {
        a + t * (b - a)
    } else {
        b + (1.0 - t) * (a - b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ShiftSpace {
    /// Sampled windows cover `[-window_radius, window_radius]`.
    pub window_radius: i64,
    /// Sampled entries and tails lie in `[-amplitude, amplitude]`.
    pub amplitude: f64,
}

impl Default for ShiftSpace {
    fn default() -> Self {
        Self {
            window_radius: 8,
            amplitude: 5.0,
        }
    }
}

/// The shift space and its isometry `gamma(x) = rho(x) + p`.
pub fn make_shift_space() -> (ShiftSpace, IsometryDescriptor<ShiftPoint>) {
    let p = step_sequence();
    let q = p.clone();
    let gamma = IsometryDescriptor::new(
        "gamma",
        "shift",
        true,
        move |x: &ShiftPoint| x.shifted(1).add(&p),
        move |y: &ShiftPoint| y.sub(&q).shifted(-1),
    );
    (ShiftSpace::default(), gamma)
}

impl MetricSpace for ShiftSpace {
    type Point = ShiftPoint;

    fn space_id(&self) -> String {
        "shift".into()
    }

    fn distance(&self, x: &ShiftPoint, y: &ShiftPoint) -> f64 {
        x.sup_distance(y)
    }

    fn contains(&self, x: &ShiftPoint) -> bool {
        x.left.is_finite() && x.right.is_finite() && x.values.iter().all(|v| v.is_finite())
    }

    fn sampler_domain(&self) -> Option<SamplerDomain> {
        let r = self.window_radius as f64;
        Some(SamplerDomain::new(vec![
            (-self.amplitude, self.amplitude),
            (-r, r),
        ]))
    }

    fn box_domain(&self, length: f64) -> Option<SamplerDomain> {
        let r = self.window_radius as f64;
        Some(SamplerDomain::new(vec![(0.0, length), (-r, r)]))
    }

    fn sample_in(&self, domain: &SamplerDomain, rng: &mut ChaCha8Rng) -> Option<ShiftPoint> {
        let (lo, hi) = domain.ranges[1];
        let (lo, hi) = (lo.round() as i64, hi.round() as i64);
        let values = (lo..=hi).map(|_| domain.draw(0, rng)).collect();
        let left = domain.draw(0, rng);
        let right = domain.draw(0, rng);
        Some(ShiftPoint::new(lo, values, left, right))
    }

    fn within(&self, x: &ShiftPoint, domain: &SamplerDomain) -> bool {
        let (lo, hi) = domain.ranges[1];
        let values_ok = x.values.iter().chain([&x.left, &x.right]).all(|&v| domain.holds(0, v));
        values_ok && (x.values.is_empty() || (lo <= x.start as f64 && (x.end() - 1) as f64 <= hi))
    }

    /// Coordinates: left tail, right tail, then the window entries.
    fn coordinate_count(&self, x: &ShiftPoint) -> usize {
        2 + x.values.len()
    }

    fn nudge(&self, x: &ShiftPoint, coord: usize, step: f64) -> Option<ShiftPoint> {
        let mut v = x.values.clone();
        let (mut left, mut right) = (x.left, x.right);
        match coord {
            0 => left += step,
            1 => right += step,
            c => *v.get_mut(c - 2)? += step,
        }
        // widen by one on each side so a tail move does not shift the window
        let mut full = vec![x.left];
        full.extend(v);
        full.push(x.right);
        Some(ShiftPoint::new(x.start - 1, full, left, right))
    }
}

impl Bicombing for ShiftSpace {
    fn segment_point(&self, x: &ShiftPoint, y: &ShiftPoint, t: f64) -> ShiftPoint {
        x.zip_with(y, |a, b| lerp1(a, b, t))
    }

    fn claims_consistent(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::sample_points;

    /// Brute-force sup over a generous index window.
    fn wide_sup(x: &ShiftPoint, y: &ShiftPoint) -> f64 {
        (-200..200)
            .map(|k| (x.get(k) - y.get(k)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gamma_orbit_of_zero_has_norm_n() {
        let (space, gamma) = make_shift_space();
        let zero = ShiftPoint::zero();
        for n in 1..=3 {
            let y = gamma.power(&zero, n);
            assert_eq!(space.distance(&zero, &y), n as f64);
        }
    }

    #[test]
    fn phi_at_zero() {
        let (space, gamma) = make_shift_space();
        let zero = ShiftPoint::zero();
        let phi = space.midpoint(&gamma.apply(&zero), &gamma.apply_inverse(&zero));
        let expected = ShiftPoint::indicator(0).scale(-0.5);
        assert_eq!(phi, expected);
        assert_eq!(phi_closed_form(&zero), expected);
    }

    #[test]
    fn gamma_inverse_roundtrip_on_samples() {
        let (space, gamma) = make_shift_space();
        for x in sample_points(&space, 50, 9).unwrap() {
            assert_eq!(gamma.apply_inverse(&gamma.apply(&x)), x);
            assert!(space.distance(&gamma.apply(&x), &gamma.apply(&gamma.apply(&x))) >= 0.0);
        }
    }

    #[test]
    fn sup_distance_matches_brute_force() {
        let space = ShiftSpace::default();
        let pts = sample_points(&space, 60, 4).unwrap();
        for pair in pts.chunks(2) {
            let shifted = pair[1].shifted(3);
            assert_eq!(space.distance(&pair[0], &shifted), wide_sup(&pair[0], &shifted));
        }
    }

    #[test]
    fn canonical_form() {
        assert_eq!(ShiftPoint::new(5, vec![0.0, 0.0], 0.0, 0.0), ShiftPoint::zero());
        let p = ShiftPoint::new(-2, vec![1.0, 2.0, 3.0, 3.0], 1.0, 3.0);
        assert_eq!(p.start, -1);
        assert_eq!(p.values, vec![2.0]);
        assert_eq!(p.get(-5), 1.0);
        assert_eq!(p.get(-1), 2.0);
        assert_eq!(p.get(10), 3.0);
    }

    #[test]
    fn nudge_moves_one_coordinate() {
        let space = ShiftSpace::default();
        let x = ShiftPoint::new(0, vec![2.0], 1.0, 3.0);
        let y = space.nudge(&x, 0, 0.5).unwrap();
        assert_eq!(y.get(-10), 1.5);
        assert_eq!(y.get(-1), 1.0);
        assert_eq!(y.get(0), 2.0);
        assert_eq!(y.get(10), 3.0);
        let z = space.nudge(&x, 2, -1.0).unwrap();
        assert_eq!(z.get(0), 1.0);
        assert_eq!(space.distance(&x, &z), 1.0);
    }
}
