//! Planar point-process sampling around a typical transmitter.
//!
//! The transmitter sits at the origin and the destination direction is the
//! `+x` axis. Angles are measured from `+x` and live in `(−π, π]`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::model::{NetworkConfig, SelectionRegion};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { x: r * c, y: r * s }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Polar angle in `(−π, π]`.
    pub fn angle(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(&self, by: f64) -> Self {
        let (s, c) = by.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Sector of opening `angle` centred on `+x`, between two radii.
///
/// Boundary points (on either arc or either ray) belong to the sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularSector {
    pub angle: f64,
    pub inner_radius: f64,
    /// May be infinite; sampling needs a finite value.
    pub outer_radius: f64,
}

impl AnnularSector {
    pub fn new(angle: f64, inner_radius: f64, outer_radius: f64) -> Result<Self> {
        require(
            angle > 0.0 && angle <= TAU,
            "angle",
            angle,
            "must lie in (0, 2π]",
        )?;
        require(
            inner_radius.is_finite() && inner_radius >= 0.0,
            "inner_radius",
            inner_radius,
            "must be finite and >= 0",
        )?;
        require(
            outer_radius > inner_radius,
            "outer_radius",
            outer_radius,
            "must exceed inner_radius",
        )?;
        Ok(Self {
            angle,
            inner_radius,
            outer_radius,
        })
    }

    /// The selection region cut off at `outer_radius`.
    pub fn from_selection(region: &SelectionRegion, outer_radius: f64) -> Result<Self> {
        Self::new(region.phi, region.r_m, outer_radius)
    }

    pub fn area(&self) -> f64 {
        self.angle / 2.0 * (self.outer_radius.powi(2) - self.inner_radius.powi(2))
    }

    pub fn contains(&self, p: &Point2) -> bool {
        let r = p.norm();
        r >= self.inner_radius && r <= self.outer_radius && p.angle().abs() <= self.angle / 2.0
    }
}

/// Sampling window for a point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Disk { radius: f64 },
    Sector(AnnularSector),
}

impl Region {
    pub fn disk(radius: f64) -> Result<Self> {
        require(radius > 0.0, "radius", radius, "must be > 0")?;
        Ok(Region::Disk { radius })
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Disk { radius } => PI * radius * radius,
            Region::Sector(s) => s.area(),
        }
    }

    pub fn contains(&self, p: &Point2) -> bool {
        match self {
            Region::Disk { radius } => p.norm() <= *radius,
            Region::Sector(s) => s.contains(p),
        }
    }

    /// Uniform point, by inverse transform in `r²` and uniform angle.
    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        let (inner, outer, angle) = match self {
            Region::Disk { radius } => (0.0, *radius, TAU),
            Region::Sector(s) => (s.inner_radius, s.outer_radius, s.angle),
        };
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
        let theta = if angle >= TAU {
            PI - v * TAU
        } else {
            (v - 0.5) * angle
        };
        let p = Point2::from_polar(r, theta);
        // rounding in sqrt or sin/cos can push a point a few ulps outside
        if self.contains(&p) {
            p
        } else {
            Point2::from_polar(
                r.clamp(inner, outer),
                theta.clamp(-angle / 2.0, angle / 2.0),
            )
        }
    }
}

/// One realisation of a homogeneous Poisson process on a region.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField {
    pub points: Vec<Point2>,
    pub density: f64,
    pub region: Region,
}

impl PointField {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point closest to the origin, if any.
    pub fn nearest(&self) -> Option<Point2> {
        self.points
            .iter()
            .copied()
            .min_by(|a, b| a.norm().total_cmp(&b.norm()))
    }
}

/// Homogeneous PPP on `region`: Poisson count, then i.i.d. uniform placement.
pub fn sample_ppp<R: Rng + ?Sized>(
    region: Region,
    density: f64,
    rng: &mut R,
) -> Result<PointField> {
    require(
        density.is_finite() && density >= 0.0,
        "density",
        density,
        "must be finite and >= 0",
    )?;
    let area = region.area();
    if !(area.is_finite() && area >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "region",
            value: area,
            reason: "sampling needs a finite area",
        });
    }
    let mean = density * area;
    let count = if mean > 0.0 {
        let dist = Poisson::new(mean).map_err(|_| Error::InvalidParameter {
            name: "density",
            value: density,
            reason: "expected count too large for a Poisson draw",
        })?;
        dist.sample(rng) as usize
    } else {
        0
    };
    let points = (0..count).map(|_| region.sample_point(rng)).collect();
    Ok(PointField {
        points,
        density,
        region,
    })
}

/// Hop to the nearest receiver inside a selection region, in polar form
/// relative to the transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayDraw {
    pub distance: f64,
    pub angle: f64,
}

impl RelayDraw {
    pub fn point(&self) -> Point2 {
        Point2::from_polar(self.distance, self.angle)
    }

    /// Projection onto the destination direction.
    pub fn progress(&self) -> f64 {
        self.distance * self.angle.cos()
    }
}

/// Inverse of the nearest-receiver distance CDF:
/// `d = √(r_m² + 2·(−ln(1−u)) / (λ(1−p)φ))`.
pub fn nearest_distance_from_uniform(cfg: &NetworkConfig, region: &SelectionRegion, u: f64) -> f64 {
    let e = -(-u).ln_1p();
    (region.r_m * region.r_m + 2.0 * e / (cfg.rx_density() * region.phi)).sqrt()
}

/// Nearest receiver in the (unbounded) selection region.
///
/// Exact: the distance comes from inverting its CDF and the angle is uniform
/// over `[−φ/2, φ/2]`. A relay exists almost surely, so the only failure is a
/// zero receiver density.
pub fn sample_nearest_in_region<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    region: &SelectionRegion,
    rng: &mut R,
) -> Result<RelayDraw> {
    if !(cfg.rx_density() > 0.0) {
        return Err(Error::NoRelay);
    }
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Ok(RelayDraw {
        distance: nearest_distance_from_uniform(cfg, region, u),
        angle: (v - 0.5) * region.phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn polar_round_trip() {
        for &(r, t) in &[(1.0, 0.3), (2.5, -3.0), (1e-3, PI), (7.0, -PI / 2.0)] {
            let p = Point2::from_polar(r, t);
            assert!((p.norm() - r).abs() <= 1e-12 * r);
            assert!((p.angle() - t).abs() <= 1e-12);
        }
    }

    #[test]
    fn contains_boundary_convention() {
        let s = AnnularSector::new(PI / 3.0, 0.5, 2.0).unwrap();
        assert!(s.contains(&Point2::new(0.5, 0.0)));
        assert!(!s.contains(&Point2::new(0.25, 0.0)));
        assert!(!s.contains(&Point2::from_polar(1.0, PI / 6.0 + 1e-9)));
        assert!(s.contains(&Point2::from_polar(1.0, PI / 6.0 - 1e-12)));
        assert!(s.contains(&Point2::new(2.0, 0.0)));
        assert!(!s.contains(&Point2::new(2.0 + 1e-9, 0.0)));
    }

    #[test]
    fn sector_validation_and_area() {
        assert!(AnnularSector::new(0.0, 0.0, 1.0).is_err());
        assert!(AnnularSector::new(1.0, 1.0, 1.0).is_err());
        let s = AnnularSector::new(PI, 1.0, 3.0).unwrap();
        assert!((s.area() - PI / 2.0 * 8.0).abs() < 1e-12);
        assert!(AnnularSector::new(1.0, 0.0, f64::INFINITY)
            .unwrap()
            .area()
            .is_infinite());
    }

    #[test]
    fn zero_density_gives_empty_field() {
        let mut rng = StreamKey::new(1, 0, 0).rng();
        let f = sample_ppp(Region::disk(1.0).unwrap(), 0.0, &mut rng).unwrap();
        assert!(f.is_empty());
        assert!(f.nearest().is_none());
    }

    #[test]
    fn invalid_sampling_inputs() {
        let mut rng = StreamKey::new(1, 0, 0).rng();
        assert!(sample_ppp(Region::disk(1.0).unwrap(), f64::NAN, &mut rng).is_err());
        assert!(sample_ppp(Region::disk(1.0).unwrap(), -1.0, &mut rng).is_err());
        let open = Region::Sector(AnnularSector::new(1.0, 0.0, f64::INFINITY).unwrap());
        assert!(sample_ppp(open, 1.0, &mut rng).is_err());
    }

    #[test]
    fn sampled_points_lie_in_region() {
        let sector = Region::Sector(AnnularSector::new(PI / 4.0, 0.7, 3.0).unwrap());
        let mut rng = StreamKey::new(5, 0, 0).rng();
        for _ in 0..50 {
            let f = sample_ppp(sector, 20.0, &mut rng).unwrap();
            assert!(f.points.iter().all(|p| sector.contains(p)));
        }
    }

    #[test]
    fn same_seed_same_field() {
        let region = Region::disk(2.0).unwrap();
        let a = sample_ppp(region, 3.0, &mut StreamKey::new(11, 2, 3).rng()).unwrap();
        let b = sample_ppp(region, 3.0, &mut StreamKey::new(11, 2, 3).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inversion_at_zero_is_reference_distance() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let region = SelectionRegion::new(PI / 3.0, 0.3).unwrap();
        assert_eq!(nearest_distance_from_uniform(&cfg, &region, 0.0), 0.3);
        let r0 = SelectionRegion::new(PI / 3.0, 0.0).unwrap();
        let median = nearest_distance_from_uniform(&cfg, &r0, 0.5);
        assert!((median - 1.180_460_927_334_791_3).abs() < 1e-14);
    }

    #[test]
    fn nearest_draw_respects_angle() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let region = SelectionRegion::new(PI / 3.0, 0.3).unwrap();
        let mut rng = StreamKey::new(2, 0, 0).rng();
        for _ in 0..10_000 {
            let h = sample_nearest_in_region(&cfg, &region, &mut rng).unwrap();
            assert!(h.angle.abs() <= PI / 6.0);
            assert!(h.distance >= 0.3);
        }
    }
}
