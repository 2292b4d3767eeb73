//! Physical SIR simulation of a single link.
//!
//! Interferers around the receiver are generated nearest first, as the points
//! of a Poisson process in `r²` (exponential spacings). This makes runs with
//! different truncation radii share every interferer they have in common, and
//! lets a trial stop as soon as the accumulated interference already exceeds
//! the signal.
//!
//! Interference from beyond the truncation radius can either be dropped or
//! accounted for exactly. With Rayleigh fading on the desired link,
//! `γ₀ > c·(I_near + I_far)` is, by memorylessness, the intersection of
//! `γ₀ > c·I_near` with an independent event of probability
//! `E[exp(−μ c I_far)]`, the Laplace functional of the far-field shot noise.

use std::f64::consts::PI;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::model::NetworkConfig;
use crate::quadrature;

/// Treatment of interferers beyond the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarField {
    /// Ignore them (biased upwards by `O(1/R)` for `α = 3`).
    Ignore,
    /// Exact compensation through an independent Bernoulli draw.
    #[default]
    Compensate,
}

/// Default truncation radius `50/√(pλ)`.
pub fn default_trunc_radius(cfg: &NetworkConfig) -> f64 {
    50.0 / cfg.tx_density().sqrt()
}

/// Everything about one link that does not change between trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSetup {
    cfg: NetworkConfig,
    distance: f64,
    trunc_r2: f64,
    /// Probability that the far field alone does not break the link.
    far_survival: f64,
    path_loss: PathLoss,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PathLoss {
    Cubic,
    Quartic,
    General(f64),
}

impl PathLoss {
    fn new(alpha: f64) -> Self {
        if alpha == 3.0 {
            PathLoss::Cubic
        } else if alpha == 4.0 {
            PathLoss::Quartic
        } else {
            PathLoss::General(-alpha / 2.0)
        }
    }

    /// `r^(−α)` from `r²`.
    #[inline(always)]
    fn gain(self, r2: f64) -> f64 {
        self.scaled(1.0, r2)
    }

    /// `x·r^(−α)` from `r²`, with a single division.
    #[inline(always)]
    fn scaled(self, x: f64, r2: f64) -> f64 {
        match self {
            PathLoss::Cubic => x / (r2 * r2.sqrt()),
            PathLoss::Quartic => x / (r2 * r2),
            PathLoss::General(e) => x * r2.powf(e),
        }
    }
}

impl LinkSetup {
    pub fn new(
        cfg: &NetworkConfig,
        distance: f64,
        trunc_radius: f64,
        far_field: FarField,
    ) -> Result<Self> {
        require(
            distance > 0.0 && distance.is_finite(),
            "d",
            distance,
            "must be finite and > 0",
        )?;
        require(
            trunc_radius > 0.0 && trunc_radius.is_finite(),
            "trunc_radius",
            trunc_radius,
            "must be finite and > 0",
        )?;
        let far_survival = match far_field {
            FarField::Ignore => 1.0,
            FarField::Compensate => far_field_survival(cfg, distance, trunc_radius)?,
        };
        Ok(Self {
            cfg: *cfg,
            distance,
            trunc_r2: trunc_radius * trunc_radius,
            far_survival,
            path_loss: PathLoss::new(cfg.alpha),
        })
    }

    pub fn far_survival(&self) -> f64 {
        self.far_survival
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn trunc_radius(&self) -> f64 {
        self.trunc_r2.sqrt()
    }

    /// One realisation: true iff the SIR at the receiver exceeds `β`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        let mut out = [false];
        sample_links(std::slice::from_ref(self), rng, &mut out);
        out[0]
    }
}

/// Most links [`sample_links`] decides in one pass.
pub const MAX_SHARED_LINKS: usize = 8;

/// Decides several links against one shared realisation of the desired-link
/// fading and the interferer field.
///
/// All links must share the network configuration; they may differ in length
/// and truncation radius. Each outcome has exactly the law of
/// [`LinkSetup::sample`], and the outcomes are positively correlated (common
/// random numbers), which makes differences between them precise. For a
/// single link the random draws are identical to [`LinkSetup::sample`].
///
/// # Panics
///
/// If `links` and `out` differ in length, if there are more than
/// [`MAX_SHARED_LINKS`] links, or if the links have different configurations.
pub fn sample_links<R: Rng + ?Sized>(links: &[LinkSetup], rng: &mut R, out: &mut [bool]) {
    assert_eq!(links.len(), out.len(), "one output per link");
    assert!(
        links.len() <= MAX_SHARED_LINKS,
        "at most {MAX_SHARED_LINKS} links"
    );
    let Some(first) = links.first() else {
        return;
    };
    assert!(
        links.iter().all(|l| l.cfg == first.cfg),
        "links must share the network"
    );
    let cfg = &first.cfg;
    // received power of a unit-mean fading draw `e` at squared range `r2`
    // is `(ρ/μ)·e·r^(−α)`
    let scale = cfg.rho / cfg.mu;
    let path_loss = first.path_loss;
    let e0: f64 = Exp1.sample(rng);

    // interference level at which each undecided link fails
    let mut limit = [f64::INFINITY; MAX_SHARED_LINKS];
    let mut far_ok = [false; MAX_SHARED_LINKS];
    let mut pending = [false; MAX_SHARED_LINKS];
    for (i, link) in links.iter().enumerate() {
        let signal = scale * e0 * path_loss.gain(link.distance * link.distance);
        far_ok[i] = rng.random::<f64>() < link.far_survival;
        limit[i] = signal / cfg.beta / scale;
        pending[i] = limit[i] > 0.0;
        out[i] = false;
    }
    let next = |pending: &[bool; MAX_SHARED_LINKS], limit: &[f64; MAX_SHARED_LINKS]| {
        let mut lim = f64::INFINITY;
        let mut r2 = f64::NEG_INFINITY;
        for (i, link) in links.iter().enumerate() {
            if pending[i] {
                lim = lim.min(limit[i]);
                r2 = r2.max(link.trunc_r2);
            }
        }
        let first_r2 = links
            .iter()
            .enumerate()
            .filter(|(i, _)| pending[*i])
            .map(|(_, l)| l.trunc_r2)
            .fold(f64::INFINITY, f64::min);
        (lim, first_r2, r2)
    };
    let (mut next_limit, mut next_r2, mut last_r2) = next(&pending, &limit);
    if last_r2 == f64::NEG_INFINITY {
        return;
    }

    // points of the interferer process in r² have rate π·pλ
    let spacing = 1.0 / (PI * cfg.tx_density());
    let mut r2 = 0.0;
    let mut interference = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        r2 += e * spacing;
        if r2 > next_r2 {
            // links truncated before this point are decided by the far field
            for (i, link) in links.iter().enumerate() {
                if pending[i] && link.trunc_r2 < r2 {
                    pending[i] = false;
                    out[i] = far_ok[i];
                }
            }
            if r2 > last_r2 {
                return;
            }
            (next_limit, next_r2, last_r2) = next(&pending, &limit);
        }
        let fading: f64 = Exp1.sample(rng);
        interference += path_loss.scaled(fading, r2);
        if interference >= next_limit {
            for i in 0..links.len() {
                if pending[i] && interference >= limit[i] {
                    pending[i] = false;
                }
            }
            (next_limit, next_r2, last_r2) = next(&pending, &limit);
            if last_r2 == f64::NEG_INFINITY {
                return;
            }
        }
    }
}

/// `exp(−pλ ∫_R^∞ 2πr · s r^(−α)/(1 + s r^(−α)) dr)` with `s = β d^α`.
///
/// Substituting `w = R/r` maps the tail onto `(0, 1]`.
pub fn far_field_survival(cfg: &NetworkConfig, distance: f64, trunc_radius: f64) -> Result<f64> {
    let s = cfg.beta * distance.powf(cfg.alpha);
    let big_r = trunc_radius;
    let r_alpha = big_r.powf(cfg.alpha);
    let alpha = cfg.alpha;
    let integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        2.0 * PI * s * big_r * big_r * w.powf(alpha - 3.0) / (r_alpha + s * w.powf(alpha))
    };
    let integral = quadrature::integrate(integrand, 0.0, 1.0, 1e-15, 1e-12)?;
    Ok((-cfg.tx_density() * integral.value).exp())
}

/// Single physical SIR trial for a link of length `d`.
pub fn simulate_sir_success<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    d: f64,
    trunc_radius: f64,
    far_field: FarField,
    rng: &mut R,
) -> Result<bool> {
    Ok(LinkSetup::new(cfg, d, trunc_radius, far_field)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn tiny_threshold_always_succeeds() {
        let cfg = NetworkConfig::new(1.0, 0.05, 3.0, 1e-12).unwrap();
        let link = LinkSetup::new(&cfg, 0.5, default_trunc_radius(&cfg), FarField::Ignore).unwrap();
        for i in 0..200 {
            assert!(link.sample(&mut StreamKey::new(1, 0, i).rng()));
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        assert!(LinkSetup::new(&cfg, 0.0, 10.0, FarField::Ignore).is_err());
        assert!(LinkSetup::new(&cfg, 0.5, 0.0, FarField::Ignore).is_err());
    }

    #[test]
    fn far_field_survival_shrinks_with_radius() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let a = far_field_survival(&cfg, 1.0, 50.0).unwrap();
        let b = far_field_survival(&cfg, 1.0, 100.0).unwrap();
        assert!(a < b && b < 1.0);
        // α = 3: ∫_R^∞ 2π s/(r² + s/r) dr ≈ 2π s / R for R ≫ s^(1/3)
        let approx = (-cfg.tx_density() * 2.0 * PI * 10.0 / 1000.0).exp();
        let exact = far_field_survival(&cfg, 1.0, 1000.0).unwrap();
        assert!((exact - approx).abs() < 1e-8);
    }

    #[test]
    fn far_field_survival_general_exponent() {
        // α = 4: ∫_R^∞ 2πr s/(r⁴ + s) dr = π√s (π/2 − atan(R²/√s))
        let cfg = NetworkConfig::new(1.0, 0.1, 4.0, 2.0).unwrap();
        let (d, big_r) = (0.7f64, 3.0f64);
        let s = 2.0 * d.powi(4);
        let want = (-0.1 * PI * s.sqrt() * (PI / 2.0 - (big_r * big_r / s.sqrt()).atan())).exp();
        assert!((far_field_survival(&cfg, d, big_r).unwrap() - want).abs() < 1e-12);
        let cfg = NetworkConfig::new(1.0, 0.1, 2.5, 2.0).unwrap();
        assert!(far_field_survival(&cfg, d, big_r).unwrap() < 1.0);
    }

    #[test]
    fn same_stream_same_outcome() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let link = LinkSetup::new(&cfg, 0.5, 30.0, FarField::Compensate).unwrap();
        for i in 0..50 {
            let a = link.sample(&mut StreamKey::new(4, 0, i).rng());
            let b = link.sample(&mut StreamKey::new(4, 0, i).rng());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_shared_link_matches_link_sample() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let link = LinkSetup::new(&cfg, 0.5, 30.0, FarField::Compensate).unwrap();
        for i in 0..200 {
            let mut out = [true];
            sample_links(
                std::slice::from_ref(&link),
                &mut StreamKey::new(9, 0, i).rng(),
                &mut out,
            );
            assert_eq!(out[0], link.sample(&mut StreamKey::new(9, 0, i).rng()));
        }
    }

    #[test]
    fn shared_links_are_ordered_by_length() {
        // with a common signal draw a shorter link never fails when a longer one succeeds
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let links: Vec<LinkSetup> = [0.2, 0.5, 1.0]
            .iter()
            .map(|&d| LinkSetup::new(&cfg, d, 40.0, FarField::Ignore).unwrap())
            .collect();
        for i in 0..500 {
            let mut out = [false; 3];
            sample_links(&links, &mut StreamKey::new(2, 0, i).rng(), &mut out);
            assert!(out[0] >= out[1] && out[1] >= out[2], "trial {i}: {out:?}");
        }
    }

    #[test]
    fn longer_truncation_only_removes_successes_without_compensation() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let links = [
            LinkSetup::new(&cfg, 1.0, 10.0, FarField::Ignore).unwrap(),
            LinkSetup::new(&cfg, 1.0, 20.0, FarField::Ignore).unwrap(),
        ];
        for i in 0..500 {
            let mut out = [false; 2];
            sample_links(&links, &mut StreamKey::new(3, 0, i).rng(), &mut out);
            assert!(out[0] >= out[1], "trial {i}");
        }
    }
}
