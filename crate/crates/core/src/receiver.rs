//! Central node: SIC ordering, NOMA SINR with residual cancellation error,
//! success decisions and the per-protocol reward rules.

use std::cmp::Ordering;

use crate::error::{ensure_positive, ensure_unit_interval, Error, Result};
use crate::model::{Protocol, TransmissionAttempt};

/// Strongest first; equal powers fall back to ascending device id.
pub fn sic_order(contenders: &[TransmissionAttempt]) -> Vec<TransmissionAttempt> {
    let mut ordered = contenders.to_vec();
    ordered.sort_by(|a, b| match b.rx_power_w.total_cmp(&a.rx_power_w) {
        Ordering::Equal => a.device_id.cmp(&b.device_id),
        o => o,
    });
    ordered
}

/// SINR of the `index`-th signal of a descending-power list: already
/// cancelled (stronger) signals leak a fraction `beta`, weaker ones count in
/// full.
pub fn sinr_noma(ordered_powers: &[f64], index: usize, beta: f64, noise_w: f64) -> Result<f64> {
    ensure_unit_interval("sic_error_factor", beta)?;
    ensure_positive("noise_w", noise_w)?;
    if index >= ordered_powers.len() {
        return Err(Error::range(
            "index",
            index as f64,
            0.0,
            ordered_powers.len() as f64 - 1.0,
        ));
    }
    let stronger: f64 = ordered_powers[..index].iter().sum();
    let weaker: f64 = ordered_powers[index + 1..].iter().sum();
    Ok(ordered_powers[index] / (beta * stronger + weaker + noise_w))
}

/// SINRs of every position in one pass (prefix/suffix sums).
pub fn sinr_noma_all(ordered_powers: &[f64], beta: f64, noise_w: f64) -> Vec<f64> {
    let total: f64 = ordered_powers.iter().sum();
    let mut stronger = 0.0;
    ordered_powers
        .iter()
        .map(|&p| {
            let weaker = (total - stronger - p).max(0.0);
            let sinr = p / (beta * stronger + weaker + noise_w);
            stronger += p;
            sinr
        })
        .collect()
}

/// Inclusive threshold test.
pub fn decide_success(sinr: f64, threshold: f64) -> bool {
    sinr >= threshold
}

pub fn reward_mplql(success: bool) -> f64 {
    if success {
        1.0
    } else {
        -1.0
    }
}

pub fn reward_independent(success: bool) -> f64 {
    reward_mplql(success)
}

/// Fraction of all devices that picked the slot.
pub fn congestion(n_contenders: usize, n_total: usize) -> Result<f64> {
    ensure_positive("n_devices", n_total as f64)?;
    if n_contenders > n_total {
        return Err(Error::range(
            "n_contenders",
            n_contenders as f64,
            0.0,
            n_total as f64,
        ));
    }
    Ok(n_contenders as f64 / n_total as f64)
}

pub fn reward_collaborative(success: bool, congestion: f64) -> Result<f64> {
    ensure_unit_interval("congestion", congestion)?;
    Ok(if success { 1.0 } else { -congestion })
}

/// Failure penalty equals the fraction of packets already delivered.
pub fn reward_packet(success: bool, remaining: u32, total: u32) -> Result<f64> {
    ensure_positive("packets_per_device", f64::from(total))?;
    if remaining > total {
        return Err(Error::range(
            "remaining_packets",
            f64::from(remaining),
            0.0,
            f64::from(total),
        ));
    }
    Ok(if success {
        1.0
    } else {
        -f64::from(total - remaining) / f64::from(total)
    })
}

/// Inputs a reward rule may depend on.
#[derive(Debug, Clone, Copy)]
pub struct RewardContext {
    pub success: bool,
    pub congestion: f64,
    pub remaining: u32,
    pub total: u32,
}

/// Dispatches to the protocol's reward rule. Slotted ALOHA sends no
/// feedback; it is scored like the binary rule for trace purposes only.
pub fn reward_for(protocol: Protocol, ctx: RewardContext) -> Result<f64> {
    match protocol {
        Protocol::MplQl => Ok(reward_mplql(ctx.success)),
        Protocol::IndependentQl | Protocol::SlottedAloha => Ok(reward_independent(ctx.success)),
        Protocol::CollaborativeQl => reward_collaborative(ctx.success, ctx.congestion),
        Protocol::PacketQl => reward_packet(ctx.success, ctx.remaining, ctx.total),
    }
}
