//! One Monte Carlo realization: frame loop, slot contention, synchronous
//! reward feedback, metric accumulation and convergence detection.

use rand::Rng;

use crate::agent::init_qtable;
use crate::channel::{
    draw_fading, level_table, mean_rx_power_dbm, noise_power_w, place_devices, LevelTable,
};
use crate::error::{Error, Result};
use crate::model::{
    watts_to_dbm, Device, Protocol, RunResult, SlotOutcome, SystemParams, TraceRecord,
    TransmissionAttempt,
};
use crate::receiver::{
    congestion, decide_success, reward_for, sic_order, sinr_noma_all, RewardContext,
};

/// Quantities fixed for a whole realization.
#[derive(Debug, Clone)]
pub struct Environment {
    pub levels: LevelTable,
    pub noise_w: f64,
}

impl Environment {
    pub fn new(params: &SystemParams) -> Result<Self> {
        Ok(Environment {
            levels: level_table(
                params.effective_levels(),
                params.max_power_w,
                params.level_mode,
            )?,
            noise_w: noise_power_w(params.noise_psd_dbm_hz, params.bandwidth_hz)?,
        })
    }
}

/// Which devices get per-frame trace records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Tracking {
    /// Lowest id among the devices at the (lower) median distance.
    #[default]
    MedianDevice,
    Devices(Vec<usize>),
    Nothing,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub tracking: Tracking,
    /// Fixed device distances instead of a random drop; length must be N.
    pub distances: Option<Vec<f64>>,
}

/// Everything that happened in one frame.
#[derive(Debug, Clone, Default)]
pub struct FrameOutcome {
    /// Only slots with at least one contender, ascending by slot.
    pub slots: Vec<SlotOutcome>,
    pub successes: u64,
}

impl FrameOutcome {
    /// Locates the slot outcome a device took part in.
    pub fn find(&self, device_id: usize) -> Option<(&SlotOutcome, usize)> {
        self.slots
            .iter()
            .find_map(|s| s.position_of(device_id).map(|pos| (s, pos)))
    }
}

/// Places devices, evaluates their mean received powers and, for learning
/// protocols, draws the initial Q-tables.
pub fn build_devices<R: Rng + ?Sized>(
    params: &SystemParams,
    env: &Environment,
    rng: &mut R,
) -> Result<Vec<Device>> {
    let distances = place_devices(
        params.n_devices as usize,
        params.cell_radius_m,
        params.ref_distance_m,
        rng,
    )?;
    build_devices_at(&distances, params, env, rng)
}

/// Like [`build_devices`] with given distances.
pub fn build_devices_at<R: Rng + ?Sized>(
    distances: &[f64],
    params: &SystemParams,
    env: &Environment,
    rng: &mut R,
) -> Result<Vec<Device>> {
    let levels_dbm = env.levels.powers_dbm();
    let mut devices = distances
        .iter()
        .enumerate()
        .map(|(id, &d)| {
            let mean = levels_dbm
                .iter()
                .map(|&pt| mean_rx_power_dbm(pt, d, params))
                .collect::<Result<Vec<_>>>()?;
            Ok(Device {
                id,
                distance_m: d,
                mean_rx_power_dbm_per_level: mean,
                remaining_packets: params.packets_per_device,
                q_table: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if params.protocol.is_learning() {
        for dev in &mut devices {
            dev.q_table = Some(init_qtable(params.n_slots as usize, env.levels.len(), rng)?);
        }
    }
    Ok(devices)
}

/// Runs one frame: action selection, fading, per-slot SIC reception, then
/// the synchronous Q-update and packet bookkeeping.
///
/// Devices must be indexed by id (`devices[i].id == i`).
pub fn run_frame<R: Rng + ?Sized>(
    devices: &mut [Device],
    params: &SystemParams,
    env: &Environment,
    rng: &mut R,
) -> Result<FrameOutcome> {
    let k_slots = params.n_slots as usize;
    let mut attempts = Vec::with_capacity(devices.len());
    for dev in devices.iter().filter(|d| d.is_active()) {
        let (slot, level) = match &dev.q_table {
            Some(q) => q.select(rng),
            None => (rng.random_range(0..k_slots), 0),
        };
        let h2 = draw_fading(rng);
        attempts.push(TransmissionAttempt::new(
            dev.id,
            slot,
            level,
            h2,
            dev.mean_rx_power_dbm_per_level[level],
        ));
    }
    // Stable: contenders keep ascending id order within a slot.
    attempts.sort_by_key(|a| a.slot);

    let mut outcome = FrameOutcome::default();
    for contenders in attempts.chunk_by(|a, b| a.slot == b.slot) {
        let slot_outcome = receive_slot(contenders[0].slot, contenders, devices, params, env)?;
        outcome.successes += slot_outcome.successes() as u64;
        outcome.slots.push(slot_outcome);
    }

    let alpha = params.learning_rate;
    for s in &outcome.slots {
        for ((att, &ok), &reward) in s.sic_order.iter().zip(&s.success_flags).zip(&s.rewards) {
            let dev = &mut devices[att.device_id];
            if let Some(q) = dev.q_table.as_mut() {
                q.update(att.slot, att.power_level, reward, alpha)?;
            }
            if ok {
                dev.remaining_packets -= 1;
            }
        }
    }
    Ok(outcome)
}

fn receive_slot(
    slot: usize,
    contenders: &[TransmissionAttempt],
    devices: &[Device],
    params: &SystemParams,
    env: &Environment,
) -> Result<SlotOutcome> {
    let order = sic_order(contenders);
    let powers: Vec<f64> = order.iter().map(|a| a.rx_power_w).collect();
    let sinr = sinr_noma_all(&powers, params.sic_error_factor, env.noise_w);
    let load = congestion(contenders.len(), params.n_devices as usize)?;
    let success: Vec<bool> = match params.protocol {
        Protocol::SlottedAloha => {
            let alone = order.len() == 1;
            sinr.iter()
                .map(|&g| {
                    alone && (!params.sa_sinr_check || decide_success(g, params.sinr_threshold))
                })
                .collect()
        }
        _ => sinr
            .iter()
            .map(|&g| decide_success(g, params.sinr_threshold))
            .collect(),
    };
    let rewards = order
        .iter()
        .zip(&success)
        .map(|(a, &ok)| {
            reward_for(
                params.protocol,
                RewardContext {
                    success: ok,
                    congestion: load,
                    remaining: devices[a.device_id].remaining_packets,
                    total: params.packets_per_device,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlotOutcome {
        slot,
        contenders: contenders.to_vec(),
        sic_order: order,
        sinr_per_contender: sinr,
        success_flags: success,
        rewards,
        congestion: load,
    })
}

/// Residual interference seen by a device after cancellation: the sum of
/// the powers decoded after it. Cancellation leakage is not included.
pub fn interference_sample(outcome: &SlotOutcome, device_id: usize) -> Result<f64> {
    let pos = outcome
        .position_of(device_id)
        .ok_or(Error::DeviceNotInSlot(device_id))?;
    Ok(outcome.sic_order[pos + 1..]
        .iter()
        .map(|a| a.rx_power_w)
        .sum())
}

/// Delivered fraction `(total - remaining) / total`.
pub fn convergence_factor(remaining: u32, total: u32) -> Result<f64> {
    if total == 0 || remaining > total {
        return Err(Error::range(
            "remaining_packets",
            f64::from(remaining),
            0.0,
            f64::from(total),
        ));
    }
    Ok(f64::from(total - remaining) / f64::from(total))
}

pub fn run_realization<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Result<RunResult> {
    run_realization_with(params, &RunOptions::default(), rng)
}

/// Slotted ALOHA run of the given operating point, whatever its protocol.
pub fn run_slotted_aloha<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Result<RunResult> {
    let sa = SystemParams {
        protocol: Protocol::SlottedAloha,
        ..params.clone()
    };
    run_realization(&sa, rng)
}

pub fn run_realization_with<R: Rng + ?Sized>(
    params: &SystemParams,
    opts: &RunOptions,
    rng: &mut R,
) -> Result<RunResult> {
    let env = Environment::new(params)?;
    let mut devices = match &opts.distances {
        Some(d) if d.len() != params.n_devices as usize => {
            return Err(Error::range(
                "distances",
                d.len() as f64,
                f64::from(params.n_devices),
                f64::from(params.n_devices),
            ))
        }
        Some(d) => build_devices_at(d, params, &env, rng)?,
        None => build_devices(params, &env, rng)?,
    };
    let tracked = tracked_ids(&devices, &opts.tracking)?;
    let total = params.packets_per_device;
    let cap = params.frame_cap();

    let mut interference_trace = vec![Vec::new(); tracked.len()];
    let mut convergence_trace = vec![Vec::new(); tracked.len()];
    let mut records = Vec::new();
    let mut pending: u64 = u64::from(total) * devices.len() as u64;
    let mut total_successes = 0u64;
    let mut frames = 0u32;

    while pending > 0 && frames < cap {
        let outcome = run_frame(&mut devices, params, &env, rng)?;
        frames += 1;
        total_successes += outcome.successes;
        pending -= outcome.successes;

        for (i, &id) in tracked.iter().enumerate() {
            let nu = convergence_factor(devices[id].remaining_packets, total)?;
            let rec = match outcome.find(id) {
                Some((slot, pos)) => TraceRecord {
                    frame: frames,
                    device_id: id,
                    slot: Some(slot.slot),
                    level: Some(slot.sic_order[pos].power_level),
                    interference_w: interference_sample(slot, id)?,
                    conv_factor: nu,
                    success: slot.success_flags[pos],
                },
                None => TraceRecord {
                    frame: frames,
                    device_id: id,
                    slot: None,
                    level: None,
                    interference_w: 0.0,
                    conv_factor: nu,
                    success: false,
                },
            };
            interference_trace[i].push(rec.interference_w);
            convergence_trace[i].push(rec.conv_factor);
            records.push(rec);
        }
    }

    let throughput = if frames == 0 {
        0.0
    } else {
        total_successes as f64 / (f64::from(frames) * f64::from(params.n_slots))
    };
    Ok(RunResult {
        total_successes,
        latency_frames: frames,
        converged: pending == 0,
        throughput,
        tracked_devices: tracked,
        interference_trace,
        convergence_trace,
        records,
    })
}

fn tracked_ids(devices: &[Device], tracking: &Tracking) -> Result<Vec<usize>> {
    match tracking {
        Tracking::Nothing => Ok(Vec::new()),
        Tracking::Devices(ids) => {
            if let Some(&bad) = ids.iter().find(|&&id| id >= devices.len()) {
                return Err(Error::DeviceNotInSlot(bad));
            }
            Ok(ids.clone())
        }
        Tracking::MedianDevice => {
            if devices.is_empty() {
                return Ok(Vec::new());
            }
            let mut by_distance: Vec<(f64, usize)> =
                devices.iter().map(|d| (d.distance_m, d.id)).collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let median = by_distance[(by_distance.len() - 1) / 2].0;
            let id = by_distance
                .iter()
                .filter(|(d, _)| *d == median)
                .map(|&(_, id)| id)
                .min()
                .unwrap();
            Ok(vec![id])
        }
    }
}

/// Mean SNR (linear) of a sole contender at full power, for diagnostics.
pub fn mean_snr_at_full_power(device: &Device, env: &Environment) -> f64 {
    let best = device
        .mean_rx_power_dbm_per_level
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    10f64.powf((best - watts_to_dbm(env.noise_w)) / 10.0)
}
