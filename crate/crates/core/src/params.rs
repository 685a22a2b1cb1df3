//! Model constants. Every field can be overridden from a TOML file and is
//! echoed verbatim into the results file.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::netmodel::{LatencyMatrix, Role};

/// Log-normal bandwidth distribution, parameterised by its median
/// (`exp(mu)`) and the shape `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalParams {
    pub median_kbps: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn mu(&self) -> f64 {
        self.median_kbps.ln()
    }

    /// Mean of the distribution, `exp(mu + sigma^2 / 2)`.
    pub fn mean(&self) -> f64 {
        (self.mu() + self.sigma * self.sigma / 2.0).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandwidthParams {
    pub guard: LogNormalParams,
    pub middle: LogNormalParams,
    pub exit: LogNormalParams,
}

impl Default for BandwidthParams {
    fn default() -> Self {
        BandwidthParams {
            guard: LogNormalParams {
                median_kbps: 640.0,
                sigma: 0.32,
            },
            middle: LogNormalParams {
                median_kbps: 480.0,
                sigma: 0.36,
            },
            exit: LogNormalParams {
                median_kbps: 560.0,
                sigma: 0.34,
            },
        }
    }
}

impl BandwidthParams {
    pub fn for_role(&self, role: Role) -> LogNormalParams {
        match role {
            Role::Guard => self.guard,
            Role::Middle => self.middle,
            Role::Exit => self.exit,
        }
    }
}

/// Mean uptime, in hours, of the exponential uptime distribution per role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UptimeParams {
    pub guard_mean_hours: f64,
    pub middle_mean_hours: f64,
    pub exit_mean_hours: f64,
    /// Uptime at which stability reaches 0.5: `stability = u / (u + h)`.
    pub stability_half_hours: f64,
}

impl Default for UptimeParams {
    fn default() -> Self {
        UptimeParams {
            guard_mean_hours: 720.0,
            middle_mean_hours: 360.0,
            exit_mean_hours: 480.0,
            stability_half_hours: 720.0,
        }
    }
}

impl UptimeParams {
    pub fn mean_for_role(&self, role: Role) -> f64 {
        match role {
            Role::Guard => self.guard_mean_hours,
            Role::Middle => self.middle_mean_hours,
            Role::Exit => self.exit_mean_hours,
        }
    }
}

/// Per-epoch congestion draw: `c ~ Beta(k*m, k*(1-m))` with
/// `m = clamp(base + slope * load_factor, min, max)` and `k = concentration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CongestionParams {
    pub base_mean: f64,
    /// Increase of the mean per unit of load factor (users per relay).
    pub load_slope: f64,
    pub min_mean: f64,
    pub max_mean: f64,
    pub concentration: f64,
}

impl Default for CongestionParams {
    fn default() -> Self {
        CongestionParams {
            base_mean: 0.15,
            load_slope: 0.005,
            min_mean: 0.05,
            max_mean: 0.85,
            concentration: 10.0,
        }
    }
}

impl CongestionParams {
    /// Expected congestion for a load factor. Nonpositive loads are treated
    /// as an infinitesimal positive load.
    pub fn mean_for_load(&self, load_factor: f64) -> f64 {
        let load = if load_factor > 0.0 { load_factor } else { f64::EPSILON };
        (self.base_mean + self.load_slope * load).clamp(self.min_mean, self.max_mean)
    }
}

/// Synthetic addressing: `/16` prefixes and AS numbers scale with N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AddressingParams {
    /// Roughly one `/16` prefix per this many relays.
    pub relays_per_prefix: usize,
    /// AS numbers are drawn from `[1, N / relays_per_as]`.
    pub relays_per_as: usize,
    /// Floor on both pool sizes, so tiny networks keep diverse triples.
    pub min_pool: usize,
    /// Extra ports an exit may allow beyond 80 and 443.
    pub extra_exit_ports: Vec<u16>,
    pub extra_port_probability: f64,
}

impl Default for AddressingParams {
    fn default() -> Self {
        AddressingParams {
            relays_per_prefix: 8,
            relays_per_as: 10,
            min_pool: 8,
            extra_exit_ports: vec![22, 53, 993, 6667, 8080],
            extra_port_probability: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub bandwidth: BandwidthParams,
    pub uptime: UptimeParams,
    /// Region probabilities in the order NA, EU, Asia, RoW.
    pub region_weights: [f64; 4],
    pub latency_ms: [[f64; 4]; 4],
    pub congestion: CongestionParams,
    pub addressing: AddressingParams,
    /// Relays at or above this congestion are excluded by the congestion-aware strategy.
    pub congestion_threshold: f64,
    /// Diversity checks allowed per circuit before it counts as failed.
    pub retry_budget: u32,
    /// Circuits between congestion updates within one run.
    pub congestion_update_interval: usize,
    /// Relays generated per batch.
    pub generation_batch: usize,
    pub target_port: u16,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            bandwidth: BandwidthParams::default(),
            uptime: UptimeParams::default(),
            region_weights: [0.30, 0.40, 0.20, 0.10],
            latency_ms: LatencyMatrix::default().into_rows(),
            congestion: CongestionParams::default(),
            addressing: AddressingParams::default(),
            congestion_threshold: 0.70,
            retry_budget: 50,
            congestion_update_interval: 500,
            generation_batch: 2500,
            target_port: 443,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ModelParams {
    /// Parses TOML overrides on top of the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let params: ModelParams =
            toml::from_str(text).map_err(|e| invalid("config", e.message().to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn latency_matrix(&self) -> Result<LatencyMatrix, ModelError> {
        LatencyMatrix::new(self.latency_ms)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, ln) in [
            ("bandwidth.guard", self.bandwidth.guard),
            ("bandwidth.middle", self.bandwidth.middle),
            ("bandwidth.exit", self.bandwidth.exit),
        ] {
            if !(ln.median_kbps.is_finite() && ln.median_kbps > 0.0) {
                return Err(invalid(&format!("{name}.median_kbps"), "must be positive"));
            }
            if !(ln.sigma.is_finite() && ln.sigma >= 0.0) {
                return Err(invalid(&format!("{name}.sigma"), "must be nonnegative"));
            }
        }
        let u = &self.uptime;
        for (name, v) in [
            ("uptime.guard_mean_hours", u.guard_mean_hours),
            ("uptime.middle_mean_hours", u.middle_mean_hours),
            ("uptime.exit_mean_hours", u.exit_mean_hours),
            ("uptime.stability_half_hours", u.stability_half_hours),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if self.region_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.region_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(invalid(
                "region_weights",
                "must be nonnegative with a positive sum",
            ));
        }
        self.latency_matrix()?;
        let c = &self.congestion;
        if !(0.0 < c.min_mean && c.min_mean <= c.max_mean && c.max_mean < 1.0) {
            return Err(invalid(
                "congestion",
                "need 0 < min_mean <= max_mean < 1",
            ));
        }
        if !(c.load_slope.is_finite() && c.load_slope >= 0.0) {
            return Err(invalid("congestion.load_slope", "must be nonnegative"));
        }
        if !(c.concentration.is_finite() && c.concentration > 0.0) {
            return Err(invalid("congestion.concentration", "must be positive"));
        }
        if !c.base_mean.is_finite() {
            return Err(invalid("congestion.base_mean", "must be finite"));
        }
        let a = &self.addressing;
        if a.relays_per_prefix == 0 || a.relays_per_as == 0 {
            return Err(invalid("addressing", "relays per prefix/AS must be positive"));
        }
        if a.min_pool < 3 {
            return Err(invalid("addressing.min_pool", "must be at least 3"));
        }
        if !(0.0..=1.0).contains(&a.extra_port_probability) {
            return Err(invalid(
                "addressing.extra_port_probability",
                "must lie in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.congestion_threshold) {
            return Err(invalid("congestion_threshold", "must lie in [0, 1]"));
        }
        if self.retry_budget == 0 {
            return Err(invalid("retry_budget", "must be positive"));
        }
        if self.congestion_update_interval == 0 {
            return Err(invalid("congestion_update_interval", "must be positive"));
        }
        if self.generation_batch == 0 {
            return Err(invalid("generation_batch", "must be positive"));
        }
        Ok(())
    }
}
