//! Scenario configuration.
//!
//! A scenario is read from a flat TOML file whose keys mirror the fields of
//! [`SystemConfig`]. Unknown keys are rejected. Every key is optional and
//! falls back to the desk-scale default:
//!
//! ```toml
//! num_aps = 10              # M
//! antennas_per_ap = 4       # N, ULA elements per AP
//! num_ues = 8               # K, single-antenna UEs
//! stream_cap = 2            # N_s, max UEs per AP
//! num_paths = 3             # L, resolvable paths per link
//! feedback_budget_bits = 10 # B, per AP
//! snr_db = 50               # per-AP transmit power over unit noise, dB
//! area_side = 1000          # meters
//! ap_height = 12.5          # meters (informational, baked into path loss)
//! ue_height = 1.5           # meters (informational, baked into path loss)
//! angular_spread = 0.349    # radians, total width of the per-link AoD spread
//! min_distance = 1          # meters, AP-UE distance floor for path loss
//! master_seed = 1
//! drops = 200
//! realizations = 50
//! quant_model = "test_channel"  # or "error_injection"
//! ap_phase = "independent"      # or "aligned"
//! ```
//!
//! Optional `per_ap_budget_bits = [..]` overrides the uniform budget with one
//! value per AP.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::QuantModel;
use crate::error::{Error, Result};

/// How the phase of each AP's precoders relates to the phases of other APs.
///
/// `Independent` rotates every AP's beams by an independent uniform phase per
/// channel realization: APs are not phase-synchronized and a UE served by
/// several APs combines their contributions non-coherently on average.
/// `Aligned` keeps the phase produced by the projection, so each AP's beam is
/// co-phased with its quantized channel estimate and contributions from
/// different APs add coherently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    #[default]
    Independent,
    Aligned,
}

impl std::str::FromStr for PhaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(PhaseMode::Independent),
            "aligned" => Ok(PhaseMode::Aligned),
            other => Err(Error::InvalidConfig(format!("unknown ap_phase `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_ues: usize,
    pub stream_cap: usize,
    pub num_paths: usize,
    pub feedback_budget_bits: f64,
    pub per_ap_budget_bits: Option<Vec<f64>>,
    pub snr_db: f64,
    pub area_side: f64,
    pub ap_height: f64,
    pub ue_height: f64,
    pub angular_spread: f64,
    pub min_distance: f64,
    pub master_seed: u64,
    pub drops: usize,
    pub realizations: usize,
    pub quant_model: QuantModel,
    pub ap_phase: PhaseMode,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl SystemConfig {
    /// Small scenario used by the acceptance runs: M=10, N=4, K=8, N_s=2,
    /// L=3, B=10, 200 drops of 50 realizations.
    pub fn desk_scale() -> Self {
        Self {
            num_aps: 10,
            antennas_per_ap: 4,
            num_ues: 8,
            stream_cap: 2,
            num_paths: 3,
            feedback_budget_bits: 10.0,
            per_ap_budget_bits: None,
            snr_db: 50.0,
            area_side: 1000.0,
            ap_height: 12.5,
            ue_height: 1.5,
            angular_spread: 20f64.to_radians(),
            min_distance: 1.0,
            master_seed: 1,
            drops: 200,
            realizations: 50,
            quant_model: QuantModel::TestChannel,
            ap_phase: PhaseMode::Independent,
        }
    }

    /// Full-size scenario: M=40, N=8, K=20, N_s=4, L=4, B=10.
    pub fn full_scale() -> Self {
        Self {
            num_aps: 40,
            antennas_per_ap: 8,
            num_ues: 20,
            stream_cap: 4,
            num_paths: 4,
            ..Self::desk_scale()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("num_aps", self.num_aps),
            ("antennas_per_ap", self.antennas_per_ap),
            ("num_ues", self.num_ues),
            ("stream_cap", self.stream_cap),
            ("num_paths", self.num_paths),
            ("drops", self.drops),
            ("realizations", self.realizations),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.stream_cap > self.antennas_per_ap {
            return fail(format!(
                "stream_cap ({}) exceeds antennas_per_ap ({})",
                self.stream_cap, self.antennas_per_ap
            ));
        }
        if !(self.feedback_budget_bits >= 0.0 && self.feedback_budget_bits.is_finite()) {
            return fail("feedback_budget_bits must be finite and non-negative".into());
        }
        if let Some(budgets) = &self.per_ap_budget_bits {
            if budgets.len() != self.num_aps {
                return fail(format!(
                    "per_ap_budget_bits has {} entries for {} APs",
                    budgets.len(),
                    self.num_aps
                ));
            }
            if budgets.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
                return fail("per_ap_budget_bits must be finite and non-negative".into());
            }
        }
        if !self.snr_db.is_finite() {
            return fail("snr_db must be finite".into());
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return fail("area_side must be positive".into());
        }
        if !(self.angular_spread >= 0.0 && self.angular_spread.is_finite()) {
            return fail("angular_spread must be non-negative".into());
        }
        if !(self.min_distance > 0.0) {
            return fail("min_distance must be positive".into());
        }
        Ok(())
    }

    /// Feedback budget `B_m` of AP `m`, in bits.
    pub fn budget(&self, m: usize) -> f64 {
        match &self.per_ap_budget_bits {
            Some(b) => b[m],
            None => self.feedback_budget_bits,
        }
    }

    /// Transmit power `P_m` of AP `m` against unit noise variance.
    pub fn transmit_power(&self, _m: usize) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}
