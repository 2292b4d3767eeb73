//! Optimisation of the selection region.
//!
//! Concavity of the objective is not known, so the reference distance is
//! found by scanning for every sign change of the stationarity residual and
//! comparing all roots with the `r_m = 0` boundary. The angle is profiled:
//! `φ ↦ max_{r_m} E[D]` is scanned on a grid, refined by golden section and
//! finally polished by bisection on the joint stationarity residual.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::model::{
    expected_density_of_progress, DerivedConstants, NetworkConfig, SelectionRegion,
};
use crate::special::incomplete_gamma_3_2;

/// Subdivisions of `(0, B]` scanned for sign changes of the `r_m` residual.
pub const BRACKET_SCAN_STEPS: usize = 400;

/// Ties closer than this in `E[D]` prefer the interior root.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum `|residual|` of the `r_m` stationarity condition at a root.
    pub residual_rm: f64,
    /// Maximum `|residual|` of the joint condition at an interior optimum.
    pub residual_joint: f64,
    /// Width at which golden-section search on φ stops.
    pub phi: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual_rm: 1e-10,
            residual_joint: 1e-8,
            phi: 1e-6,
        }
    }
}

/// Coarse φ grid for [`optimize_joint`]: `points` equispaced interior angles of `(0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiGrid {
    pub points: usize,
}

impl Default for PhiGrid {
    fn default() -> Self {
        Self { points: 64 }
    }
}

impl PhiGrid {
    fn angle(&self, i: usize) -> f64 {
        TAU * i as f64 / (self.points + 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub upper_bound: Option<f64>,
    pub discriminant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmOptimum {
    pub rm_star: f64,
    pub e_star: f64,
    /// `r_m = 0` beat every interior root.
    pub boundary_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub phi_star: f64,
    pub rm_star: f64,
    pub e_star: f64,
    pub residual_rm: f64,
    pub residual_joint: f64,
    pub boundary_flag: bool,
}

impl OptimizationResult {
    pub fn region(&self) -> SelectionRegion {
        SelectionRegion {
            phi: self.phi_star,
            r_m: self.rm_star,
        }
    }
}

/// `Γ(3/2, λk r²)·λ(1−p)φ·r − 2(λk)^(3/2)·r²·e^(−λk r²)`.
///
/// Zero at `r_m = 0` and at every interior stationary point of `E[D]` in `r_m`.
pub fn stationarity_residual_rm(cfg: &NetworkConfig, phi: f64, r_m: f64) -> f64 {
    r_m * scaled_residual_rm(cfg, phi, r_m)
}

/// Residual divided by `r_m`; positive at `r_m → 0⁺`, same sign elsewhere.
fn scaled_residual_rm(cfg: &NetworkConfig, phi: f64, r_m: f64) -> f64 {
    let lk = cfg.lambda * DerivedConstants::new(cfg, phi).k;
    let u = lk * r_m * r_m;
    let gamma = incomplete_gamma_3_2(u).expect("u >= 0");
    gamma * cfg.lambda * (1.0 - cfg.p) * phi - 2.0 * lk.powf(1.5) * r_m * (-u).exp()
}

/// Upper bound on the optimal reference distance for a fixed angle.
///
/// Comes from bounding `Γ(3/2, x)` by the mean of `Γ(1, x)` and `Γ(2, x)`,
/// which turns the stationarity condition into a quadratic in `r_m`.
pub fn rm_upper_bound(cfg: &NetworkConfig, phi: f64) -> BoundResult {
    let lk = cfg.lambda * DerivedConstants::new(cfg, phi).k;
    let a = cfg.lambda * (1.0 - cfg.p) * phi;
    let discriminant = 4.0 * lk.powi(3) - 2.0 * lk * a * a;
    let upper_bound =
        (discriminant >= 0.0).then(|| (2.0 * lk.powf(1.5) - discriminant.sqrt()) / (lk * a));
    BoundResult {
        upper_bound,
        discriminant,
    }
}

/// Bisection on a sign-changing bracket, run to machine resolution.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Global maximiser of `E[D]` over `r_m ≥ 0` at a fixed angle.
pub fn optimal_rm_given_phi(cfg: &NetworkConfig, phi: f64, tol: f64) -> Result<RmOptimum> {
    require(tol > 0.0, "tol", tol, "must be > 0")?;
    require(phi > 0.0 && phi <= TAU, "phi", phi, "must lie in (0, 2π]")?;
    let lk = cfg.lambda * DerivedConstants::new(cfg, phi).k;
    let scan_end = rm_upper_bound(cfg, phi)
        .upper_bound
        .unwrap_or(10.0 / lk.sqrt());
    let e_at = |r: f64| expected_density_of_progress(cfg, &SelectionRegion { phi, r_m: r });
    let s = |r: f64| scaled_residual_rm(cfg, phi, r);

    let mut roots = Vec::new();
    let mut prev_r = 0.0;
    let mut prev_s = s(0.0);
    for i in 1..=BRACKET_SCAN_STEPS {
        let r = scan_end * i as f64 / BRACKET_SCAN_STEPS as f64;
        let cur = s(r);
        if cur == 0.0 {
            roots.push(r);
        } else if (cur > 0.0) != (prev_s > 0.0) && prev_s != 0.0 {
            let root = bisect(s, prev_r, r);
            let res = stationarity_residual_rm(cfg, phi, root);
            if !(res.abs() <= tol) {
                return Err(Error::NumericFailure {
                    what: "r_m bisection",
                    estimate: root,
                });
            }
            roots.push(root);
        }
        prev_r = r;
        prev_s = cur;
    }

    let boundary = RmOptimum {
        rm_star: 0.0,
        e_star: e_at(0.0),
        boundary_flag: true,
    };
    let interior = roots
        .into_iter()
        .map(|r| RmOptimum {
            rm_star: r,
            e_star: e_at(r),
            boundary_flag: false,
        })
        .fold(None::<RmOptimum>, |best, c| match best {
            Some(b) if b.e_star >= c.e_star => Some(b),
            _ => Some(c),
        });
    Ok(match interior {
        Some(i) if i.e_star > boundary.e_star - TIE_EPS => i,
        _ => boundary,
    })
}

/// `cot(φ/2)·k/(1−p) − 3/2 + λ p t r_m²`; zero at a joint stationary point.
pub fn joint_residual(cfg: &NetworkConfig, phi: f64, r_m: f64) -> Result<f64> {
    if !(phi > 0.0 && phi < TAU) {
        return Err(Error::Domain {
            name: "phi",
            value: phi,
            what: "the joint stationarity residual (needs 0 < phi < 2π)",
        });
    }
    let DerivedConstants { t, k } = DerivedConstants::new(cfg, phi);
    let cot = 1.0 / (phi / 2.0).tan();
    Ok(cot * k / (1.0 - cfg.p) - 1.5 + cfg.lambda * cfg.p * t * r_m * r_m)
}

/// Reference distance solving the joint condition at angle `φ`, when the
/// radicand is non-negative.
pub fn rm_from_phi_closed_form(cfg: &NetworkConfig, phi: f64) -> Option<f64> {
    if !(phi > 0.0 && phi < TAU) {
        return None;
    }
    let DerivedConstants { t, k } = DerivedConstants::new(cfg, phi);
    let cot = 1.0 / (phi / 2.0).tan();
    let radicand = (1.5 - cot * k / (1.0 - cfg.p)) / (cfg.lambda * cfg.p * t);
    (radicand >= 0.0).then(|| radicand.sqrt())
}

/// Golden-section maximisation of a unimodal function on `(a, b)`.
fn golden_max<F: Fn(f64) -> Result<f64>>(
    f: F,
    mut a: f64,
    mut b: f64,
    width: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > width {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Joint maximisation of `E[D]` over `(φ, r_m)`.
pub fn optimize_joint(
    cfg: &NetworkConfig,
    grid: &PhiGrid,
    tol: &Tolerances,
) -> Result<OptimizationResult> {
    require(
        grid.points >= 1,
        "grid.points",
        grid.points as f64,
        "must be >= 1",
    )?;
    require(tol.phi > 0.0, "tol.phi", tol.phi, "must be > 0")?;
    let profile = |phi: f64| optimal_rm_given_phi(cfg, phi, tol.residual_rm);

    let mut best_i = 1;
    let mut best_e = f64::NEG_INFINITY;
    for i in 1..=grid.points {
        let e = profile(grid.angle(i))?.e_star;
        if e > best_e {
            best_e = e;
            best_i = i;
        }
    }
    let lo = grid.angle(best_i - 1);
    let hi = grid.angle(best_i + 1);
    let (mut phi, _) = golden_max(|x| profile(x).map(|o| o.e_star), lo, hi, tol.phi)?;
    let mut opt = profile(phi)?;
    if grid.angle(best_i) > 0.0 && best_e > opt.e_star {
        phi = grid.angle(best_i);
        opt = profile(phi)?;
    }

    // Polish: along the profile the joint residual has the sign of dE/dφ.
    let g = |x: f64| -> f64 {
        profile(x)
            .and_then(|o| joint_residual(cfg, x, o.rm_star))
            .unwrap_or(f64::NAN)
    };
    let mut width = 4.0 * tol.phi;
    while width <= hi - lo {
        let a = (phi - width).max(lo);
        let b = (phi + width).min(hi);
        let (ga, gb) = (g(a), g(b));
        if a > 0.0 && b < TAU && ga > 0.0 && gb < 0.0 {
            let polished = bisect(g, a, b);
            let cand = profile(polished)?;
            if cand.e_star >= opt.e_star * (1.0 - 1e-15) {
                phi = polished;
                opt = cand;
            }
            break;
        }
        width *= 4.0;
    }

    let residual_joint = if phi < TAU {
        joint_residual(cfg, phi, opt.rm_star)?
    } else {
        f64::NAN
    };
    Ok(OptimizationResult {
        phi_star: phi,
        rm_star: opt.rm_star,
        e_star: opt.e_star,
        residual_rm: stationarity_residual_rm(cfg, phi, opt.rm_star),
        residual_joint,
        boundary_flag: opt.boundary_flag,
    })
}

/// Best angle for plain nearest-neighbour routing (`r_m = 0`).
///
/// `E[D](φ, 0) ∝ k^(−3/2)·sin(φ/2)` has a single stationary point on `(0, π)`
/// where the joint residual at `r_m = 0` vanishes.
pub fn optimal_phi_nearest_neighbor(cfg: &NetworkConfig) -> Result<(f64, f64)> {
    let g = |phi: f64| joint_residual(cfg, phi, 0.0).unwrap_or(f64::NAN);
    let lo = 1e-9;
    if !(g(lo) > 0.0) {
        return Err(Error::NumericFailure {
            what: "nearest-neighbour angle",
            estimate: lo,
        });
    }
    let phi = if g(PI) >= 0.0 { PI } else { bisect(g, lo, PI) };
    let e = expected_density_of_progress(cfg, &SelectionRegion { phi, r_m: 0.0 });
    Ok((phi, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64) -> NetworkConfig {
        NetworkConfig::baseline(p).unwrap()
    }

    #[test]
    fn residual_vanishes_at_zero() {
        assert_eq!(stationarity_residual_rm(&cfg(0.05), 1.0, 0.0), 0.0);
    }

    #[test]
    fn residual_root_at_wide_angle() {
        // mpmath findroot on the residual at φ = 0.8π
        let root = 0.233_677_466_428_710_26;
        let c = cfg(0.05);
        let phi = 0.8 * PI;
        assert!(stationarity_residual_rm(&c, phi, root - 1e-3) > 0.0);
        assert!(stationarity_residual_rm(&c, phi, root + 1e-3) < 0.0);
        let opt = optimal_rm_given_phi(&c, phi, 1e-10).unwrap();
        assert!((opt.rm_star - root).abs() < 1e-12);
    }

    #[test]
    fn bound_reference_value() {
        let b = rm_upper_bound(&cfg(0.05), PI / 3.0);
        assert!((b.upper_bound.unwrap() - 0.150_066_123_603_944_27).abs() < 1e-14);
        assert!(b.discriminant > 0.0);
    }

    #[test]
    fn bound_absent_when_discriminant_negative() {
        let b = rm_upper_bound(&cfg(0.01), 3.0);
        assert!(b.discriminant < 0.0);
        assert!(b.upper_bound.is_none());
        // scan falls back to 10/sqrt(λk) and still finds the root
        let opt = optimal_rm_given_phi(&cfg(0.01), 3.0, 1e-10).unwrap();
        assert!(!opt.boundary_flag && opt.rm_star > 0.0);
    }

    #[test]
    fn joint_residual_domain_and_cot_zero() {
        let c = cfg(0.05);
        assert!(joint_residual(&c, 0.0, 0.1).is_err());
        assert!(joint_residual(&c, TAU, 0.1).is_err());
        let r = 0.3;
        let want = c.lambda * c.p * c.t() * r * r - 1.5;
        assert!((joint_residual(&c, PI, r).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn closed_form_rm_examples() {
        let c = cfg(0.05);
        assert!(rm_from_phi_closed_form(&c, PI / 3.0).is_none());
        let r = rm_from_phi_closed_form(&c, 0.8 * PI).unwrap();
        assert!((r - 0.526_417_778_822_470_4).abs() < 1e-13);
        assert!(joint_residual(&c, 0.8 * PI, r).unwrap().abs() < 1e-13);
        let at_pi = rm_from_phi_closed_form(&c, PI).unwrap();
        assert!((at_pi - (1.5 / (c.lambda * c.p * c.t())).sqrt()).abs() < 1e-14);
        assert!(rm_from_phi_closed_form(&c, TAU).is_none());
    }

    #[test]
    fn high_contention_degenerates() {
        let opt = optimal_rm_given_phi(&cfg(0.3), PI / 3.0, 1e-10).unwrap();
        assert!(opt.rm_star < 0.05);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(optimal_rm_given_phi(&cfg(0.05), 1.0, 0.0).is_err());
        assert!(
            optimize_joint(&cfg(0.05), &PhiGrid { points: 0 }, &Tolerances::default()).is_err()
        );
    }

    #[test]
    fn nearest_neighbor_angle_is_stationary() {
        let c = cfg(0.05);
        let (phi, e) = optimal_phi_nearest_neighbor(&c).unwrap();
        assert!(joint_residual(&c, phi, 0.0).unwrap().abs() < 1e-12);
        for d in [-1e-3, 1e-3] {
            let other = expected_density_of_progress(
                &c,
                &SelectionRegion {
                    phi: phi + d,
                    r_m: 0.0,
                },
            );
            assert!(other <= e);
        }
    }

    #[test]
    fn joint_optimum_baseline() {
        let c = cfg(0.05);
        let opt = optimize_joint(&c, &PhiGrid::default(), &Tolerances::default()).unwrap();
        assert!(!opt.boundary_flag);
        assert!(opt.residual_rm.abs() <= 1e-10);
        assert!(opt.residual_joint.abs() <= 1e-8);
        let r19 = rm_from_phi_closed_form(&c, opt.phi_star).unwrap();
        assert!(((r19 - opt.rm_star) / opt.rm_star).abs() < 1e-6);
    }
}
