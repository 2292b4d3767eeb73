//! Monte Carlo engine.
//!
//! Every trial `i` draws from its own counter-based stream
//! `StreamKey { seed, tag, trial: i }`, so estimates are identical for any
//! number of worker threads. Different sweep cells that reuse the same seed
//! and tag see common random numbers, which tightens comparisons between them.

mod route;
mod sir;

use std::f64::consts::{PI, TAU};

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

pub use route::{simulate_route, RouteHop, RouteOptions, RouteTrace, Termination};
pub use sir::{
    default_trunc_radius, far_field_survival, sample_links, simulate_sir_success, FarField,
    LinkSetup, MAX_SHARED_LINKS,
};

use crate::error::{require, Error, Result};
use crate::geometry::{
    sample_nearest_in_region, sample_ppp, AnnularSector, Point2, Region, RelayDraw,
};
use crate::model::{success_probability, NetworkConfig, SelectionRegion};
use crate::rng::StreamKey;
use crate::stats::{run_trials, EstimateWithCI};

/// Relay selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolSpec {
    /// Nearest receiver inside the annular sector `(φ, r_m)`.
    SelectionRegion { phi: f64, r_m: f64 },
    /// Nearest receiver inside the sector of angle `φ` (no reference distance).
    NearestNeighbor { phi: f64 },
    /// Receiver in the forward half-disk of radius `radius` maximising
    /// `d·cos θ·exp(−λ p t d²)`.
    BestProgress { radius: f64 },
}

impl ProtocolSpec {
    pub fn selection_region(region: SelectionRegion) -> Self {
        ProtocolSpec::SelectionRegion {
            phi: region.phi,
            r_m: region.r_m,
        }
    }

    /// Best-progress routing with the default candidate radius
    /// `18/√((1−p)λπ)`.
    pub fn best_progress(cfg: &NetworkConfig) -> Self {
        ProtocolSpec::BestProgress {
            radius: default_candidate_radius(cfg),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProtocolSpec::SelectionRegion { phi, r_m } => {
                SelectionRegion::new(phi, r_m).map(|_| ())
            }
            ProtocolSpec::NearestNeighbor { phi } => SelectionRegion::new(phi, 0.0).map(|_| ()),
            ProtocolSpec::BestProgress { radius } => require(
                radius > 0.0 && radius.is_finite(),
                "radius",
                radius,
                "must be finite and > 0",
            ),
        }
    }

    /// Sector the relay is restricted to, when the rule has one.
    pub fn region(&self) -> Option<SelectionRegion> {
        match *self {
            ProtocolSpec::SelectionRegion { phi, r_m } => Some(SelectionRegion { phi, r_m }),
            ProtocolSpec::NearestNeighbor { phi } => Some(SelectionRegion { phi, r_m: 0.0 }),
            ProtocolSpec::BestProgress { .. } => None,
        }
    }

    /// Half-width of the admissible angular window.
    pub fn half_angle(&self) -> f64 {
        match self.region() {
            Some(r) => r.phi / 2.0,
            None => PI / 2.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::SelectionRegion { .. } => "selection_region",
            ProtocolSpec::NearestNeighbor { .. } => "nearest_neighbor",
            ProtocolSpec::BestProgress { .. } => "best_progress",
        }
    }
}

pub fn default_candidate_radius(cfg: &NetworkConfig) -> f64 {
    18.0 / (cfg.rx_density() * PI).sqrt()
}

/// How hop success is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Bernoulli draw with the closed-form success probability.
    #[default]
    #[serde(alias = "semi")]
    SemiAnalytic,
    /// Explicit interferer field with Rayleigh fading.
    Physical,
}

/// How the relay of a sector rule is located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaySampling {
    /// Exact inversion of the nearest-distance CDF.
    #[default]
    Inversion,
    /// Explicit receiver field in the sector; counts inspected candidates.
    Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub seed: u64,
    pub stream_tag: u32,
    pub mode: Mode,
    pub relay_sampling: RelaySampling,
    /// Interference truncation radius; `None` means `50/√(pλ)`.
    pub trunc_radius: Option<f64>,
    pub far_field: FarField,
}

impl SimSettings {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            stream_tag: 0,
            mode: Mode::SemiAnalytic,
            relay_sampling: RelaySampling::Inversion,
            trunc_radius: None,
            far_field: FarField::Compensate,
        }
    }

    pub fn with_mode(self, mode: Mode) -> Self {
        Self { mode, ..self }
    }

    pub fn with_tag(self, stream_tag: u32) -> Self {
        Self { stream_tag, ..self }
    }

    pub fn with_relay_sampling(self, relay_sampling: RelaySampling) -> Self {
        Self {
            relay_sampling,
            ..self
        }
    }

    pub fn with_trunc_radius(self, r: f64) -> Self {
        Self {
            trunc_radius: Some(r),
            ..self
        }
    }

    pub fn with_far_field(self, far_field: FarField) -> Self {
        Self { far_field, ..self }
    }

    pub fn stream(&self, trial: u64) -> StreamKey {
        StreamKey::new(self.seed, self.stream_tag, trial)
    }

    fn trunc_radius_for(&self, cfg: &NetworkConfig) -> f64 {
        self.trunc_radius
            .unwrap_or_else(|| default_trunc_radius(cfg))
    }
}

/// Result of one relay selection plus transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopOutcome {
    /// Progress credited to the hop: `d·cos θ` on success, zero otherwise.
    pub progress: f64,
    pub success: bool,
    pub candidates_evaluated: u64,
    pub relay_found: bool,
    /// Chosen relay relative to the transmitter, destination along `+x`.
    pub relay: Option<RelayDraw>,
}

impl HopOutcome {
    fn no_relay(candidates_evaluated: u64) -> Self {
        Self {
            progress: 0.0,
            success: false,
            candidates_evaluated,
            relay_found: false,
            relay: None,
        }
    }
}

/// Estimated probability that a sector field of this size is empty is
/// `exp(−FIELD_MEAN_COUNT)`.
const FIELD_MEAN_COUNT: f64 = 40.0;

fn select_relay<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    protocol: &ProtocolSpec,
    sampling: RelaySampling,
    rng: &mut R,
) -> Result<(Option<RelayDraw>, u64)> {
    match *protocol {
        ProtocolSpec::SelectionRegion { .. } | ProtocolSpec::NearestNeighbor { .. } => {
            let region = protocol.region().expect("sector rule");
            match sampling {
                RelaySampling::Inversion => {
                    Ok((Some(sample_nearest_in_region(cfg, &region, rng)?), 1))
                }
                RelaySampling::Field => {
                    let outer = (region.r_m * region.r_m
                        + 2.0 * FIELD_MEAN_COUNT / (cfg.rx_density() * region.phi))
                        .sqrt();
                    let sector = AnnularSector::from_selection(&region, outer)?;
                    let field = sample_ppp(Region::Sector(sector), cfg.rx_density(), rng)?;
                    let relay = field.nearest().map(|p| RelayDraw {
                        distance: p.norm(),
                        angle: p.angle(),
                    });
                    Ok((relay, field.len() as u64))
                }
            }
        }
        ProtocolSpec::BestProgress { radius } => {
            let half_disk = AnnularSector::new(PI, 0.0, radius)?;
            let field = sample_ppp(Region::Sector(half_disk), cfg.rx_density(), rng)?;
            let decay = cfg.tx_density() * cfg.t();
            let score = |p: &Point2| p.x * (-decay * p.norm().powi(2)).exp();
            let relay = field
                .points
                .iter()
                .max_by(|a, b| score(a).total_cmp(&score(b)))
                .map(|p| RelayDraw {
                    distance: p.norm(),
                    angle: p.angle(),
                });
            Ok((relay, field.len() as u64))
        }
    }
}

fn hop_success<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    settings: &SimSettings,
    d: f64,
    rng: &mut R,
) -> Result<bool> {
    match settings.mode {
        Mode::SemiAnalytic => {
            let ps = success_probability(cfg, d)?;
            Ok(rng.random::<f64>() < ps)
        }
        Mode::Physical => {
            if d == 0.0 {
                return Ok(true);
            }
            let link = LinkSetup::new(cfg, d, settings.trunc_radius_for(cfg), settings.far_field)?;
            Ok(link.sample(rng))
        }
    }
}

/// One hop of a protocol at a typical transmitter.
pub fn simulate_hop<R: Rng + ?Sized>(
    cfg: &NetworkConfig,
    protocol: &ProtocolSpec,
    settings: &SimSettings,
    rng: &mut R,
) -> Result<HopOutcome> {
    let (relay, candidates) = select_relay(cfg, protocol, settings.relay_sampling, rng)?;
    let Some(relay) = relay else {
        return Ok(HopOutcome::no_relay(candidates));
    };
    let success = hop_success(cfg, settings, relay.distance, rng)?;
    Ok(HopOutcome {
        progress: if success { relay.progress() } else { 0.0 },
        success,
        candidates_evaluated: candidates,
        relay_found: true,
        relay: Some(relay),
    })
}

/// Raw per-trial hop outcomes, in trial order.
pub fn simulate_hops(
    cfg: &NetworkConfig,
    protocol: &ProtocolSpec,
    trials: u64,
    settings: &SimSettings,
) -> Result<Vec<HopOutcome>> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    protocol.validate()?;
    run_trials(trials, |i| {
        simulate_hop(cfg, protocol, settings, &mut settings.stream(i).rng())
    })
    .into_iter()
    .collect()
}

/// `pλ × mean(progress)` over independent hops.
pub fn estimate_density_of_progress(
    cfg: &NetworkConfig,
    protocol: &ProtocolSpec,
    trials: u64,
    settings: &SimSettings,
) -> Result<EstimateWithCI> {
    let progress: Vec<f64> = simulate_hops(cfg, protocol, trials, settings)?
        .iter()
        .map(|h| h.progress)
        .collect();
    Ok(EstimateWithCI::from_samples(&progress)?.scaled(cfg.tx_density()))
}

/// Success frequency of a fixed-length link under the physical model.
pub fn estimate_success_probability(
    cfg: &NetworkConfig,
    d: f64,
    trials: u64,
    trunc_radius: f64,
    settings: &SimSettings,
) -> Result<EstimateWithCI> {
    let mut out = estimate_success_probabilities(cfg, &[(d, trunc_radius)], trials, settings)?;
    Ok(out.remove(0))
}

/// Success probabilities of several `(distance, truncation radius)` links,
/// each trial deciding all of them against one shared field (see
/// [`sample_links`]). Every estimate has the same law as a separate
/// [`estimate_success_probability`] run; differences between them are
/// estimated with common random numbers.
pub fn estimate_success_probabilities(
    cfg: &NetworkConfig,
    links: &[(f64, f64)],
    trials: u64,
    settings: &SimSettings,
) -> Result<Vec<EstimateWithCI>> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    require(
        !links.is_empty() && links.len() <= MAX_SHARED_LINKS,
        "links",
        links.len() as f64,
        "must name between one and eight links",
    )?;
    let setups = links
        .iter()
        .map(|&(d, r)| LinkSetup::new(cfg, d, r, settings.far_field))
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<[bool; MAX_SHARED_LINKS]> = run_trials(trials, |i| {
        let mut out = [false; MAX_SHARED_LINKS];
        sample_links(
            &setups,
            &mut settings.stream(i).rng(),
            &mut out[..setups.len()],
        );
        out
    });
    (0..setups.len())
        .map(|k| {
            let hits: Vec<f64> = outcomes
                .iter()
                .map(|o| if o[k] { 1.0 } else { 0.0 })
                .collect();
            EstimateWithCI::from_samples(&hits)
        })
        .collect()
}

/// Fraction of the receivers within `radius` of the transmitter that fall in
/// the selection region, averaged over realisations with at least one
/// receiver.
pub fn candidate_count_ratio(
    cfg: &NetworkConfig,
    region: &SelectionRegion,
    radius: f64,
    trials: u64,
    settings: &SimSettings,
) -> Result<EstimateWithCI> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    require(radius > region.r_m, "radius", radius, "must exceed r_m")?;
    let disk = Region::disk(radius)?;
    let sector = AnnularSector::from_selection(region, radius)?;
    let ratios: Vec<Option<f64>> = run_trials(trials, |i| {
        let field = sample_ppp(disk, cfg.rx_density(), &mut settings.stream(i).rng()).ok()?;
        if field.is_empty() {
            return None;
        }
        let inside = field.points.iter().filter(|p| sector.contains(p)).count();
        Some(inside as f64 / field.len() as f64)
    });
    let ratios: Vec<f64> = ratios.into_iter().flatten().collect();
    EstimateWithCI::from_samples(&ratios)
}

/// Disk radius holding `mean_count` receivers on average.
pub fn candidate_disk_radius(cfg: &NetworkConfig, mean_count: f64) -> f64 {
    (mean_count / (PI * cfg.rx_density())).sqrt()
}

/// Expected candidate ratio `(φ/2π)(1 − r_m²/R²)`.
pub fn expected_candidate_ratio(region: &SelectionRegion, radius: f64) -> f64 {
    region.phi / TAU * (1.0 - (region.r_m / radius).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expected_density_of_progress;

    fn cfg() -> NetworkConfig {
        NetworkConfig::baseline(0.05).unwrap()
    }

    #[test]
    fn zero_trials_is_an_error() {
        let proto = ProtocolSpec::NearestNeighbor { phi: 1.0 };
        let s = SimSettings::new(1);
        assert_eq!(
            estimate_density_of_progress(&cfg(), &proto, 0, &s),
            Err(Error::NoTrials)
        );
        assert_eq!(
            estimate_success_probability(&cfg(), 0.5, 0, 10.0, &s),
            Err(Error::NoTrials)
        );
    }

    #[test]
    fn invalid_protocols_are_rejected() {
        let s = SimSettings::new(1);
        for proto in [
            ProtocolSpec::SelectionRegion { phi: 0.0, r_m: 0.1 },
            ProtocolSpec::NearestNeighbor { phi: 7.0 },
            ProtocolSpec::BestProgress { radius: -1.0 },
        ] {
            assert!(estimate_density_of_progress(&cfg(), &proto, 10, &s).is_err());
        }
    }

    #[test]
    fn sector_hops_stay_in_sector() {
        let proto = ProtocolSpec::SelectionRegion {
            phi: PI / 3.0,
            r_m: 0.3,
        };
        for sampling in [RelaySampling::Inversion, RelaySampling::Field] {
            let s = SimSettings::new(3).with_relay_sampling(sampling);
            for h in simulate_hops(&cfg(), &proto, 2000, &s).unwrap() {
                let relay = h.relay.unwrap();
                assert!(relay.angle.abs() <= PI / 6.0 + 1e-15);
                assert!(relay.distance >= 0.3 - 1e-15);
                assert!(relay.progress() >= 0.3 * (PI / 6.0).cos() - 1e-12);
                if !h.success {
                    assert_eq!(h.progress, 0.0);
                }
            }
        }
    }

    #[test]
    fn field_mode_counts_candidates() {
        let proto = ProtocolSpec::NearestNeighbor { phi: PI / 2.0 };
        let s = SimSettings::new(8).with_relay_sampling(RelaySampling::Field);
        let hops = simulate_hops(&cfg(), &proto, 500, &s).unwrap();
        let mean = hops
            .iter()
            .map(|h| h.candidates_evaluated as f64)
            .sum::<f64>()
            / 500.0;
        assert!((mean - FIELD_MEAN_COUNT).abs() < 2.0, "mean {mean}");
        let inv = simulate_hops(&cfg(), &proto, 10, &SimSettings::new(8)).unwrap();
        assert!(inv.iter().all(|h| h.candidates_evaluated == 1));
    }

    #[test]
    fn best_progress_picks_the_argmax() {
        let c = cfg();
        let radius = default_candidate_radius(&c);
        let decay = c.tx_density() * c.t();
        for i in 0..200 {
            let key = StreamKey::new(17, 0, i);
            let half_disk = AnnularSector::new(PI, 0.0, radius).unwrap();
            let field =
                sample_ppp(Region::Sector(half_disk), c.rx_density(), &mut key.rng()).unwrap();
            let (relay, n) = select_relay(
                &c,
                &ProtocolSpec::BestProgress { radius },
                RelaySampling::Inversion,
                &mut key.rng(),
            )
            .unwrap();
            assert_eq!(n as usize, field.len());
            let relay = relay.unwrap();
            let best = relay.progress() * (-decay * relay.distance.powi(2)).exp();
            for p in &field.points {
                assert!(p.x * (-decay * p.norm().powi(2)).exp() <= best + 1e-15);
            }
        }
    }

    #[test]
    fn semi_analytic_progress_matches_closed_form() {
        let c = cfg();
        let region = SelectionRegion::new(PI / 3.0, 0.3).unwrap();
        let est = estimate_density_of_progress(
            &c,
            &ProtocolSpec::selection_region(region),
            100_000,
            &SimSettings::new(2024),
        )
        .unwrap();
        let want = expected_density_of_progress(&c, &region);
        assert!(est.z_score(want).abs() < 3.0, "{est:?} vs {want}");
    }

    #[test]
    fn estimates_do_not_depend_on_thread_count() {
        let proto = ProtocolSpec::best_progress(&cfg());
        let s = SimSettings::new(99);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_density_of_progress(&cfg(), &proto, 3000, &s).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one.mean.to_bits(), run(3).mean.to_bits());
    }

    #[test]
    fn full_circle_ratio_is_one() {
        let region = SelectionRegion::new(TAU, 0.0).unwrap();
        let c = cfg();
        let r = candidate_count_ratio(
            &c,
            &region,
            candidate_disk_radius(&c, 50.0),
            200,
            &SimSettings::new(1),
        )
        .unwrap();
        assert_eq!(r.mean, 1.0);
    }
}
