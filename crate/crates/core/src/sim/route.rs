//! Multi-hop routes towards a far destination.

use serde::{Deserialize, Serialize};

use super::{simulate_hop, ProtocolSpec, SimSettings};
use crate::error::{require, Result};
use crate::geometry::Point2;
use crate::model::NetworkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Reached,
    MaxHops,
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteOptions {
    pub max_hops: u64,
    /// Distance to the destination at which the route counts as delivered;
    /// `None` means `max(r_m, 1/√((1−p)λ))`.
    pub reach_radius: Option<f64>,
}

impl RouteOptions {
    pub fn new(max_hops: u64) -> Self {
        Self {
            max_hops,
            reach_radius: None,
        }
    }
}

/// One transmission attempt along the route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteHop {
    /// Holder of the packet after this attempt.
    pub position: Point2,
    /// Projection of the hop on the direction to the destination; zero on failure.
    pub progress: f64,
    pub success: bool,
    /// Relay bearing relative to the destination direction.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTrace {
    pub source: Point2,
    pub hops: Vec<RouteHop>,
    pub terminated: Termination,
}

impl RouteTrace {
    pub fn final_position(&self) -> Point2 {
        self.hops.last().map_or(self.source, |h| h.position)
    }
}

/// Forwards a packet from `source` to `dest`.
///
/// Every attempt re-aims the protocol at the destination and sees a fresh
/// receiver and interferer field (hop `i` uses trial stream `i`). The packet
/// moves only on success.
pub fn simulate_route(
    cfg: &NetworkConfig,
    protocol: &ProtocolSpec,
    settings: &SimSettings,
    source: Point2,
    dest: Point2,
    options: &RouteOptions,
) -> Result<RouteTrace> {
    require(
        options.max_hops >= 1,
        "max_hops",
        options.max_hops as f64,
        "must be >= 1",
    )?;
    protocol.validate()?;
    let reach = options.reach_radius.unwrap_or_else(|| {
        let r_m = protocol.region().map_or(0.0, |r| r.r_m);
        r_m.max(1.0 / cfg.rx_density().sqrt())
    });
    require(reach >= 0.0, "reach_radius", reach, "must be >= 0")?;

    let mut pos = source;
    let mut hops = Vec::new();
    loop {
        if pos.distance(&dest) <= reach {
            return Ok(RouteTrace {
                source,
                hops,
                terminated: Termination::Reached,
            });
        }
        if hops.len() as u64 >= options.max_hops {
            return Ok(RouteTrace {
                source,
                hops,
                terminated: Termination::MaxHops,
            });
        }
        let heading = (dest - pos).angle();
        let outcome = simulate_hop(
            cfg,
            protocol,
            settings,
            &mut settings.stream(hops.len() as u64).rng(),
        )?;
        let Some(relay) = outcome.relay else {
            return Ok(RouteTrace {
                source,
                hops,
                terminated: Termination::Stuck,
            });
        };
        if outcome.success {
            pos = pos + relay.point().rotate(heading);
        }
        hops.push(RouteHop {
            position: pos,
            progress: outcome.progress,
            success: outcome.success,
            deviation: relay.angle,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn trivial_route() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let proto = ProtocolSpec::SelectionRegion { phi: 2.0, r_m: 0.2 };
        let p = Point2::new(3.0, -1.0);
        let trace = simulate_route(
            &cfg,
            &proto,
            &SimSettings::new(1),
            p,
            p,
            &RouteOptions::new(5),
        )
        .unwrap();
        assert!(trace.hops.is_empty());
        assert_eq!(trace.terminated, Termination::Reached);
    }

    #[test]
    fn route_moves_consistently() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let proto = ProtocolSpec::SelectionRegion {
            phi: PI / 2.0,
            r_m: 0.2,
        };
        let dest = Point2::new(40.0, 10.0);
        let trace = simulate_route(
            &cfg,
            &proto,
            &SimSettings::new(7),
            Point2::ORIGIN,
            dest,
            &RouteOptions::new(10_000),
        )
        .unwrap();
        assert_eq!(trace.terminated, Termination::Reached);
        let mut prev = Point2::ORIGIN;
        for h in &trace.hops {
            assert!(h.deviation.abs() <= PI / 4.0);
            let step = h.position.distance(&prev);
            if h.success {
                let before = prev.distance(&dest);
                let after = h.position.distance(&dest);
                // progress is the projection on the old heading
                assert!(
                    (before - h.progress - after).abs() <= step * step / after.max(1e-9) + 1e-9
                );
            } else {
                assert_eq!(step, 0.0);
            }
            prev = h.position;
        }
    }

    #[test]
    fn max_hops_stops_the_route() {
        let cfg = NetworkConfig::baseline(0.05).unwrap();
        let proto = ProtocolSpec::NearestNeighbor { phi: 1.0 };
        let trace = simulate_route(
            &cfg,
            &proto,
            &SimSettings::new(2),
            Point2::ORIGIN,
            Point2::new(1e6, 0.0),
            &RouteOptions::new(3),
        )
        .unwrap();
        assert_eq!(trace.hops.len(), 3);
        assert_eq!(trace.terminated, Termination::MaxHops);
        assert!(simulate_route(
            &cfg,
            &proto,
            &SimSettings::new(2),
            Point2::ORIGIN,
            Point2::ORIGIN,
            &RouteOptions::new(0)
        )
        .is_err());
    }
}
