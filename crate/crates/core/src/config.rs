//! Experiment configuration files.
//!
//! TOML with the sections `[gate]`, `[window]`, `[input]`, `[noise]`,
//! `[pzt]` and `[cascade]`. Every key is optional; unknown keys are
//! rejected. An empty file describes the nominal setup: 19-bin (1.9 ns)
//! path difference, 0.1 ns bins, 1.0 ns coincidence window, θ1 = θ2 = 0,
//! and the `(|H> + |V>)/sqrt(2)` ⊗ `|H>` input.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuits::GateConfig;
use crate::error::{Error, Result};
use crate::measurement::{CoincidenceWindow, PHOTON_WAVELENGTH_NM, PZT_NM_PER_VOLT};
use crate::montecarlo::NoiseConfig;
use crate::state::{path_difference_to_ns, BinWidth, JonesVector, Polarization, C64};

/// Allowed deviation of `|alpha|² + |beta|²` from 1 before renormalizing.
pub const INPUT_NORM_TOLERANCE: f64 = 1e-6;

/// Relative bin-rounding error above which a path difference draws a warning.
pub const ROUNDING_WARN_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub gate: RawGate,
    pub window: RawWindow,
    pub input: RawInput,
    pub noise: RawNoise,
    pub pzt: RawPzt,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cascade: Option<RawCascade>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawGate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_bins: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_difference_m: Option<f64>,
    pub theta1_rad: f64,
    pub theta2_rad: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawWindow {
    pub delta_t_ns: f64,
    pub bin_ns: f64,
}

impl Default for RawWindow {
    fn default() -> Self {
        Self {
            delta_t_ns: 1.0,
            bin_ns: 0.1,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawInput {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub beta_re: f64,
    pub beta_im: f64,
    pub target_pol: String,
}

impl Default for RawInput {
    fn default() -> Self {
        Self {
            alpha_re: std::f64::consts::FRAC_1_SQRT_2,
            alpha_im: 0.0,
            beta_re: std::f64::consts::FRAC_1_SQRT_2,
            beta_im: 0.0,
            target_pol: "H".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawNoise {
    pub pair_rate: f64,
    pub efficiency_1: f64,
    pub efficiency_2: f64,
    pub dark_rate_1: f64,
    pub dark_rate_2: f64,
    pub phase_jitter_sigma: f64,
    pub leakage: f64,
    pub integration_s: f64,
    pub seed: u64,
}

impl Default for RawNoise {
    fn default() -> Self {
        let n = NoiseConfig::default();
        Self {
            pair_rate: n.pair_rate,
            efficiency_1: n.efficiency_1,
            efficiency_2: n.efficiency_2,
            dark_rate_1: n.dark_rate_1,
            dark_rate_2: n.dark_rate_2,
            phase_jitter_sigma: n.phase_jitter_sigma,
            leakage: n.leakage,
            integration_s: n.integration_s,
            seed: n.seed,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawPzt {
    pub nm_per_volt: f64,
    pub wavelength_nm: f64,
}

impl Default for RawPzt {
    fn default() -> Self {
        Self {
            nm_per_volt: PZT_NM_PER_VOLT,
            wavelength_nm: PHOTON_WAVELENGTH_NM,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RawCascade {
    pub delays_bins: Vec<u32>,
}

/// A validated configuration ready to drive the simulations.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub gate: GateConfig,
    pub bin: BinWidth,
    pub delta_t_ns: f64,
    pub window: CoincidenceWindow,
    pub control_input: JonesVector,
    pub target_pol: Polarization,
    pub noise: NoiseConfig,
    pub nm_per_volt: f64,
    pub wavelength_nm: f64,
    pub cascade_delays: Option<Vec<u32>>,
    /// Non-fatal notes produced while resolving (e.g. bin rounding).
    pub warnings: Vec<String>,
    /// The resolved configuration, serialized; hashed into output headers.
    pub canonical: String,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical resolved configuration, hex encoded.
    pub fn config_hash(&self) -> String {
        Sha256::digest(self.canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.seed = seed;
        self
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        key: key.into(),
        message: message.into(),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    resolve(raw)
}

pub fn resolve(mut raw: RawConfig) -> Result<ExperimentConfig> {
    let mut warnings = Vec::new();

    let bin = BinWidth::from_ns(raw.window.bin_ns).map_err(|e| invalid("window.bin_ns", e.to_string()))?;

    let delay_bins = match (raw.gate.delay_bins, raw.gate.path_difference_m) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "gate.path_difference_m",
                "give either gate.delay_bins or gate.path_difference_m, not both",
            ))
        }
        (Some(d), None) => d,
        (None, Some(m)) => {
            if !(m.is_finite() && m > 0.0) {
                return Err(invalid("gate.path_difference_m", format!("must be > 0, got {m}")));
            }
            let ns = path_difference_to_ns(m);
            let (bins, rel) = bin.bins_for_ns(ns);
            if rel > ROUNDING_WARN_FRACTION {
                warnings.push(format!(
                    "path difference {m} m = {ns:.4} ns rounds to {bins} bins ({:.2}% error)",
                    rel * 100.0
                ));
            }
            u32::try_from(bins).map_err(|_| invalid("gate.path_difference_m", "out of range"))?
        }
        (None, None) => 19,
    };
    if delay_bins < 1 {
        return Err(invalid("gate.delay_bins", "must be at least 1"));
    }
    raw.gate.delay_bins = Some(delay_bins);
    raw.gate.path_difference_m = None;
    for (key, x) in [
        ("gate.theta1_rad", raw.gate.theta1_rad),
        ("gate.theta2_rad", raw.gate.theta2_rad),
    ] {
        if !x.is_finite() {
            return Err(invalid(key, "must be finite"));
        }
    }
    let gate = GateConfig::new(delay_bins, raw.gate.theta1_rad, raw.gate.theta2_rad)
        .map_err(|e| invalid("gate.delay_bins", e.to_string()))?;

    let delta_t_ns = raw.window.delta_t_ns;
    let delay_ns = f64::from(delay_bins) * bin.ns();
    if !(delta_t_ns.is_finite() && delta_t_ns > 0.0) {
        return Err(invalid("window.delta_t_ns", format!("must be > 0, got {delta_t_ns}")));
    }
    if delta_t_ns >= delay_ns {
        return Err(invalid(
            "window.delta_t_ns",
            format!("window {delta_t_ns} ns must be shorter than the path delay {delay_ns:.4} ns"),
        ));
    }
    let window =
        CoincidenceWindow::from_ns(delta_t_ns, bin).map_err(|e| invalid("window.delta_t_ns", e.to_string()))?;

    let i = &raw.input;
    let control_input = JonesVector::normalized_within(
        C64::new(i.alpha_re, i.alpha_im),
        C64::new(i.beta_re, i.beta_im),
        INPUT_NORM_TOLERANCE,
    )
    .map_err(|e| invalid("input.alpha_re", e.to_string()))?;
    let target_pol: Polarization = i.target_pol.parse().map_err(|_| {
        invalid(
            "input.target_pol",
            format!("expected \"H\" or \"V\", got {:?}", i.target_pol),
        )
    })?;
    raw.input.target_pol = target_pol.to_string();

    let n = &raw.noise;
    let noise = NoiseConfig {
        pair_rate: n.pair_rate,
        efficiency_1: n.efficiency_1,
        efficiency_2: n.efficiency_2,
        dark_rate_1: n.dark_rate_1,
        dark_rate_2: n.dark_rate_2,
        phase_jitter_sigma: n.phase_jitter_sigma,
        leakage: n.leakage,
        integration_s: n.integration_s,
        window_s: delta_t_ns * 1e-9,
        seed: n.seed,
    };
    noise.validate().map_err(|e| {
        let msg = e.to_string();
        let field = [
            "pair_rate",
            "efficiency_1",
            "efficiency_2",
            "dark_rate_1",
            "dark_rate_2",
            "phase_jitter_sigma",
            "leakage",
            "integration_s",
        ]
        .into_iter()
        .find(|f| msg.contains(&format!("{f} ")))
        .unwrap_or("noise");
        invalid(&format!("noise.{field}"), msg)
    })?;

    if !(raw.pzt.wavelength_nm.is_finite() && raw.pzt.wavelength_nm > 0.0) {
        return Err(invalid("pzt.wavelength_nm", "must be > 0"));
    }
    if !(raw.pzt.nm_per_volt.is_finite() && raw.pzt.nm_per_volt != 0.0) {
        return Err(invalid("pzt.nm_per_volt", "must be finite and non-zero"));
    }

    let cascade_delays = match &raw.cascade {
        Some(c) => {
            if c.delays_bins.is_empty() {
                return Err(invalid("cascade.delays_bins", "needs at least one delay"));
            }
            if let Some(d) = c
                .delays_bins
                .iter()
                .find(|d| u64::from(**d) <= u64::from(window.window_bins))
            {
                return Err(invalid(
                    "cascade.delays_bins",
                    format!(
                        "delay {d} bins is not longer than the {}-bin window",
                        window.window_bins
                    ),
                ));
            }
            Some(c.delays_bins.clone())
        }
        None => None,
    };

    let canonical = toml::to_string(&raw).map_err(|e| Error::Io(e.to_string()))?;
    Ok(ExperimentConfig {
        gate,
        bin,
        delta_t_ns,
        window,
        control_input,
        target_pol,
        noise,
        nm_per_volt: raw.pzt.nm_per_volt,
        wavelength_nm: raw.pzt.wavelength_nm,
        cascade_delays,
        warnings,
        canonical,
    })
}
