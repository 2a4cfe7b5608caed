//! Shared domain types: system parameters, per-device state and the
//! records produced by a slot, a frame and a whole realization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::QTable;
use crate::error::{ensure_positive, ensure_unit_interval, Error, Result};

/// Random access protocol driving slot (and level) selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Protocol {
    /// Multi-power-level Q-learning over a K x P table.
    MplQl,
    /// Binary-reward Q-learning over slots only.
    IndependentQl,
    /// Q-learning whose failure penalty is the slot congestion.
    CollaborativeQl,
    /// Q-learning whose failure penalty is the device's delivered fraction.
    PacketQl,
    /// Uniform slot choice, no feedback.
    SlottedAloha,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::MplQl,
        Protocol::IndependentQl,
        Protocol::CollaborativeQl,
        Protocol::PacketQl,
        Protocol::SlottedAloha,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::MplQl => "mpl-ql",
            Protocol::IndependentQl => "independent-ql",
            Protocol::CollaborativeQl => "collaborative-ql",
            Protocol::PacketQl => "packet-ql",
            Protocol::SlottedAloha => "slotted-aloha",
        }
    }

    pub fn is_learning(self) -> bool {
        self != Protocol::SlottedAloha
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "mpl-ql" | "mplql" | "mpl" => Ok(Protocol::MplQl),
            "independent-ql" | "independent" | "ind" => Ok(Protocol::IndependentQl),
            "collaborative-ql" | "collaborative" | "col" => Ok(Protocol::CollaborativeQl),
            "packet-ql" | "packet" | "pac" => Ok(Protocol::PacketQl),
            "slotted-aloha" | "aloha" | "sa" => Ok(Protocol::SlottedAloha),
            _ => Err(format!("unknown protocol `{s}`")),
        }
    }
}

/// How the P selectable transmit levels map to powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LevelMode {
    /// Amplitudes p/P of V_max for p = 1..P; P distinct powers.
    PositiveEquidistant,
    /// Amplitudes equidistant over [-V_max, V_max]; powers are squared
    /// magnitudes, so sign-mirrored levels share a power.
    SymmetricLiteral,
}

impl LevelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LevelMode::PositiveEquidistant => "positive-equidistant",
            LevelMode::SymmetricLiteral => "symmetric-literal",
        }
    }
}

impl fmt::Display for LevelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LevelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "positive-equidistant" | "positive" => Ok(LevelMode::PositiveEquidistant),
            "symmetric-literal" | "symmetric" => Ok(LevelMode::SymmetricLiteral),
            _ => Err(format!("unknown level mode `{s}`")),
        }
    }
}

/// Physical and protocol constants of one operating point.
///
/// `Default` yields the reference configuration: K = 100 slots, L = 100
/// packets, alpha = 0.1, SINR threshold 3, 8 levels, r = 200 m, d0 = 1 m,
/// B = 125 kHz, fc = 915 MHz, eta = 3, N0 = -150 dBm/Hz, P_max = 1 mW, and
/// N = 400 devices (loading factor 4).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n_devices: u32,
    pub n_slots: u32,
    pub packets_per_device: u32,
    pub learning_rate: f64,
    /// Linear, not dB.
    pub sinr_threshold: f64,
    pub n_power_levels: u32,
    pub cell_radius_m: f64,
    pub ref_distance_m: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub pathloss_exponent: f64,
    pub noise_psd_dbm_hz: f64,
    pub max_power_w: f64,
    pub sic_error_factor: f64,
    pub protocol: Protocol,
    pub level_mode: LevelMode,
    /// Frame cap; `None` means ten times the packet count.
    pub max_frames: Option<u32>,
    /// Adds the SINR test to slotted ALOHA's collision-only success rule.
    pub sa_sinr_check: bool,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            n_devices: 400,
            n_slots: 100,
            packets_per_device: 100,
            learning_rate: 0.1,
            sinr_threshold: 3.0,
            n_power_levels: 8,
            cell_radius_m: 200.0,
            ref_distance_m: 1.0,
            bandwidth_hz: 125e3,
            carrier_hz: 915e6,
            pathloss_exponent: 3.0,
            noise_psd_dbm_hz: -150.0,
            max_power_w: 1e-3,
            sic_error_factor: 0.0,
            protocol: Protocol::MplQl,
            level_mode: LevelMode::PositiveEquidistant,
            max_frames: None,
            sa_sinr_check: false,
        }
    }
}

impl SystemParams {
    /// Level count actually used: baselines have no power dimension.
    pub fn effective_levels(&self) -> u32 {
        match self.protocol {
            Protocol::MplQl => self.n_power_levels,
            _ => 1,
        }
    }

    pub fn frame_cap(&self) -> u32 {
        self.max_frames
            .unwrap_or_else(|| self.packets_per_device.saturating_mul(10))
    }

    pub fn loading_factor(&self) -> f64 {
        f64::from(self.n_devices) / f64::from(self.n_slots)
    }

    /// Sets N = round(load * K) for the current slot count.
    pub fn set_loading_factor(&mut self, load: f64) {
        self.n_devices = devices_for_load(load, self.n_slots);
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(self) -> Result<Self> {
        let mut errs = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                errs.push(e);
            }
        };

        push(ensure_positive("n_devices", f64::from(self.n_devices)));
        push(ensure_positive("n_slots", f64::from(self.n_slots)));
        push(ensure_positive(
            "packets_per_device",
            f64::from(self.packets_per_device),
        ));
        push(ensure_positive(
            "n_power_levels",
            f64::from(self.n_power_levels),
        ));
        push(ensure_positive("sinr_threshold", self.sinr_threshold));
        push(ensure_positive("cell_radius_m", self.cell_radius_m));
        push(ensure_positive("ref_distance_m", self.ref_distance_m));
        push(ensure_positive("bandwidth_hz", self.bandwidth_hz));
        push(ensure_positive("carrier_hz", self.carrier_hz));
        push(ensure_positive("pathloss_exponent", self.pathloss_exponent));
        push(ensure_positive("max_power_w", self.max_power_w));
        if !self.noise_psd_dbm_hz.is_finite() {
            push(Err(Error::range(
                "noise_psd_dbm_hz",
                self.noise_psd_dbm_hz,
                f64::NEG_INFINITY,
                f64::INFINITY,
            )));
        }
        push(ensure_unit_interval("learning_rate", self.learning_rate));
        push(ensure_unit_interval(
            "sic_error_factor",
            self.sic_error_factor,
        ));
        if let Some(cap) = self.max_frames {
            push(ensure_positive("max_frames", f64::from(cap)));
        }
        if self.ref_distance_m > 0.0
            && self.cell_radius_m > 0.0
            && self.ref_distance_m >= self.cell_radius_m
        {
            push(Err(Error::GeometryError {
                d0: self.ref_distance_m,
                r: self.cell_radius_m,
            }));
        }

        match errs.len() {
            0 => Ok(self),
            1 => Err(errs.pop().unwrap()),
            _ => Err(Error::Invalid(errs)),
        }
    }
}

pub fn devices_for_load(load: f64, n_slots: u32) -> u32 {
    (load * f64::from(n_slots)).round().max(0.0) as u32
}

/// Linear SINR threshold at the Shannon limit for a spectral efficiency
/// given in bit/s/Hz: `2^se - 1`.
pub fn sinr_threshold_from_se(spectral_efficiency: f64) -> Result<f64> {
    ensure_positive("spectral_efficiency", spectral_efficiency)?;
    Ok(spectral_efficiency.exp2() - 1.0)
}

/// Per-device simulation state.
#[derive(Debug, Clone)]
pub struct Device {
    pub id: usize,
    pub distance_m: f64,
    /// Mean received power (dBm) for each selectable transmit level.
    pub mean_rx_power_dbm_per_level: Vec<f64>,
    pub remaining_packets: u32,
    /// Absent for slotted ALOHA, which keeps no action values.
    pub q_table: Option<QTable>,
}

impl Device {
    pub fn is_active(&self) -> bool {
        self.remaining_packets > 0
    }
}

/// One device's transmission in one slot of one frame. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionAttempt {
    pub device_id: usize,
    pub slot: usize,
    pub power_level: usize,
    /// Squared Rayleigh magnitude (unit-mean exponential).
    pub fading_gain: f64,
    pub rx_power_w: f64,
}

impl TransmissionAttempt {
    pub fn new(
        device_id: usize,
        slot: usize,
        power_level: usize,
        fading_gain: f64,
        mean_rx_power_dbm: f64,
    ) -> Self {
        TransmissionAttempt {
            device_id,
            slot,
            power_level,
            fading_gain,
            rx_power_w: fading_gain * dbm_to_watts(mean_rx_power_dbm),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

/// Contention result of a single slot. `sinr_per_contender`,
/// `success_flags` and `rewards` are aligned with `sic_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: usize,
    pub contenders: Vec<TransmissionAttempt>,
    pub sic_order: Vec<TransmissionAttempt>,
    pub sinr_per_contender: Vec<f64>,
    pub success_flags: Vec<bool>,
    pub rewards: Vec<f64>,
    pub congestion: f64,
}

impl SlotOutcome {
    pub fn successes(&self) -> usize {
        self.success_flags.iter().filter(|&&s| s).count()
    }

    pub fn position_of(&self, device_id: usize) -> Option<usize> {
        self.sic_order.iter().position(|a| a.device_id == device_id)
    }
}

/// Per-frame observation of a tracked device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based frame index.
    pub frame: u32,
    pub device_id: usize,
    /// `None` once the device has delivered every packet.
    pub slot: Option<usize>,
    pub level: Option<usize>,
    pub interference_w: f64,
    pub conv_factor: f64,
    pub success: bool,
}

/// Totals and traces of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub total_successes: u64,
    pub latency_frames: u32,
    pub converged: bool,
    pub throughput: f64,
    pub tracked_devices: Vec<usize>,
    /// `interference_trace[i][f]`: device `tracked_devices[i]`, frame `f`.
    pub interference_trace: Vec<Vec<f64>>,
    pub convergence_trace: Vec<Vec<f64>>,
    pub records: Vec<TraceRecord>,
}
