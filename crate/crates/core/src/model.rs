//! Channel model and closed-form progress formulas.
//!
//! All formulas here use the dimensionally consistent placement of the node
//! density: the incomplete-gamma argument is `λ·k·r_m²` and the exponential
//! factor is `exp(λ(1−p)(φ/2)r_m²)`. At `λ = 1` this is identical to the
//! commonly quoted form without `λ`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::quadrature;
use crate::special;

/// Global network and channel parameters.
///
/// Noise power is fixed at zero, so `rho` and `mu` cancel from every
/// success probability; they are kept so the physical simulator can vary them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Node density per unit area.
    pub lambda: f64,
    /// ALOHA transmit probability.
    pub p: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// SIR threshold, linear scale.
    pub beta: f64,
    /// Transmit power.
    pub rho: f64,
    /// Rate of the exponential fading power (mean `1/mu`).
    pub mu: f64,
}

impl NetworkConfig {
    pub fn new(lambda: f64, p: f64, alpha: f64, beta: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            p,
            alpha,
            beta,
            rho: 1.0,
            mu: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// λ = 1, α = 3, β = 10 (10 dB) at the given transmit probability.
    pub fn baseline(p: f64) -> Result<Self> {
        Self::new(1.0, p, 3.0, 10.0)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        let cfg = Self { lambda, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_p(self, p: f64) -> Result<Self> {
        let cfg = Self { p, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rho(self, rho: f64) -> Result<Self> {
        let cfg = Self { rho, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mu(self, mu: f64) -> Result<Self> {
        let cfg = Self { mu, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        require(
            finite_pos(self.lambda),
            "lambda",
            self.lambda,
            "must be finite and > 0",
        )?;
        require(
            self.p > 0.0 && self.p < 1.0,
            "p",
            self.p,
            "must lie strictly inside (0, 1)",
        )?;
        require(
            self.alpha.is_finite() && self.alpha > 2.0,
            "alpha",
            self.alpha,
            "must be finite and > 2",
        )?;
        require(
            finite_pos(self.beta),
            "beta",
            self.beta,
            "must be finite and > 0",
        )?;
        require(
            finite_pos(self.rho),
            "rho",
            self.rho,
            "must be finite and > 0",
        )?;
        require(finite_pos(self.mu), "mu", self.mu, "must be finite and > 0")?;
        Ok(())
    }

    /// Thermal noise power; the model is interference limited.
    pub fn eta(&self) -> f64 {
        0.0
    }

    /// Density of the transmitter process, `pλ`.
    pub fn tx_density(&self) -> f64 {
        self.p * self.lambda
    }

    /// Density of the receiver process, `(1−p)λ`.
    pub fn rx_density(&self) -> f64 {
        (1.0 - self.p) * self.lambda
    }

    pub fn t(&self) -> f64 {
        interference_constant_t(self.alpha, self.beta).expect("validated config")
    }
}

/// Selection angle and reference distance of the relay selection region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRegion {
    /// Full opening angle φ, centred on the destination direction.
    pub phi: f64,
    /// Reference distance r_m: relays closer than this are not eligible.
    pub r_m: f64,
}

impl SelectionRegion {
    pub fn new(phi: f64, r_m: f64) -> Result<Self> {
        require(phi > 0.0 && phi <= TAU, "phi", phi, "must lie in (0, 2π]")?;
        require(
            r_m.is_finite() && r_m >= 0.0,
            "r_m",
            r_m,
            "must be finite and >= 0",
        )?;
        Ok(Self { phi, r_m })
    }

    /// Nearest-neighbour routing inside an angle: no reference distance.
    pub fn nearest_neighbor(phi: f64) -> Result<Self> {
        Self::new(phi, 0.0)
    }
}

/// Constants shared by the closed forms for one `(cfg, φ)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub t: f64,
    pub k: f64,
}

impl DerivedConstants {
    pub fn new(cfg: &NetworkConfig, phi: f64) -> Self {
        let t = cfg.t();
        Self {
            t,
            k: cfg.p * t + (1.0 - cfg.p) * phi / 2.0,
        }
    }
}

/// `t = (2π²/α)/sin(2π/α) · β^(2/α)`.
pub fn interference_constant_t(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 2.0) || !alpha.is_finite() {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            what: "the interference constant (needs alpha > 2)",
        });
    }
    require(
        beta.is_finite() && beta > 0.0,
        "beta",
        beta,
        "must be finite and > 0",
    )?;
    let delta = 2.0 / alpha;
    Ok((PI * PI * delta) / (PI * delta).sin() * beta.powf(delta))
}

/// `k = p·t + (1−p)·φ/2`.
pub fn composite_k(cfg: &NetworkConfig, phi: f64) -> f64 {
    DerivedConstants::new(cfg, phi).k
}

/// Success probability of a hop of length `d`: `exp(−λ p t d²)`.
pub fn success_probability(cfg: &NetworkConfig, d: f64) -> Result<f64> {
    require(d >= 0.0 && d.is_finite(), "d", d, "must be finite and >= 0")?;
    Ok((-cfg.tx_density() * cfg.t() * d * d).exp())
}

/// CDF of the hop distance to the nearest receiver inside the region.
pub fn hop_distance_cdf(cfg: &NetworkConfig, region: &SelectionRegion, r: f64) -> Result<f64> {
    if !(r >= region.r_m) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            what: "the hop-distance CDF (needs r >= r_m)",
        });
    }
    let rate = cfg.rx_density() * region.phi / 2.0;
    Ok(-(-rate * (r * r - region.r_m * region.r_m)).exp_m1())
}

/// Closed-form expected density of progress.
pub fn expected_density_of_progress(cfg: &NetworkConfig, region: &SelectionRegion) -> f64 {
    let DerivedConstants { t, k } = DerivedConstants::new(cfg, region.phi);
    let lambda = cfg.lambda;
    let r2 = region.r_m * region.r_m;
    // Γ(3/2, λk r²)·exp(λ(1−p)(φ/2) r²) = [e^u Γ(3/2, u)]·exp(−λ p t r²), u = λk r²
    let gamma_times_exp = special::incomplete_gamma_3_2_scaled(lambda * k * r2).expect("u >= 0")
        * (-lambda * cfg.p * t * r2).exp();
    lambda.sqrt()
        * cfg.p
        * (1.0 - cfg.p)
        * gamma_times_exp
        * k.powf(-1.5)
        * (region.phi / 2.0).sin()
}

/// Absolute tolerance of the quadrature oracle.
pub const NUMERIC_ABS_TOL: f64 = 1e-12;

/// Expected density of progress by direct quadrature of
/// `pλ ∫ e^(−pλt x²) · x · E[cos θ] · f_d(x) dx`.
///
/// The angular average `E[cos θ] = 2 sin(φ/2)/φ` is exact; the radial
/// integral runs adaptively over `[r_m, r_m + 40/√(λk)]`.
pub fn expected_density_numeric(cfg: &NetworkConfig, region: &SelectionRegion) -> Result<f64> {
    let SelectionRegion { phi, r_m } = *region;
    let t = cfg.t();
    let k = cfg.p * t + (1.0 - cfg.p) * phi / 2.0;
    let tx = cfg.tx_density();
    let rate = cfg.rx_density() * phi / 2.0;
    let mean_cos = if phi < 1e-8 {
        1.0
    } else {
        2.0 * (phi / 2.0).sin() / phi
    };
    let pdf = |x: f64| 2.0 * rate * x * (-rate * (x * x - r_m * r_m)).exp();
    let integrand = |x: f64| tx * (-tx * t * x * x).exp() * x * mean_cos * pdf(x);
    let upper = r_m + 40.0 / (cfg.lambda * k).sqrt();
    let res = quadrature::integrate(integrand, r_m, upper, NUMERIC_ABS_TOL, 0.0)?;
    if res.abs_error > NUMERIC_ABS_TOL {
        return Err(Error::NumericFailure {
            what: "expected_density_numeric",
            estimate: res.value,
        });
    }
    Ok(res.value)
}
