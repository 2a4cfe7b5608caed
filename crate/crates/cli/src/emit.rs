//! Result and trace writers.

use std::io::{self, Write};

use mplql::montecarlo::SweepResult;
use mplql::{RunResult, SystemParams};
use serde::Serialize;

use crate::config::Format;

pub const CSV_COLUMNS: [&str; 13] = [
    "protocol",
    "load_factor",
    "n_devices",
    "levels",
    "beta",
    "alpha",
    "throughput_mean",
    "throughput_ci95",
    "latency_mean",
    "latency_ci95",
    "not_converged_rate",
    "n_realizations",
    "master_seed",
];

/// Formats with six significant digits, switching to exponent notation for
/// very small or large magnitudes.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes a sweep summary: CSV with `#` comment lines carrying the resolved
/// parameters and seed, or JSON with every field including mean traces.
pub fn emit_results(result: &SweepResult, format: Format, w: &mut dyn Write) -> io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, result)?;
            writeln!(w)
        }
        Format::Csv => {
            writeln!(w, "# master_seed={}", result.master_seed)?;
            writeln!(w, "# n_realizations={}", result.n_realizations)?;
            writeln!(w, "# placement={}", result.placement)?;
            writeln!(
                w,
                "# params={}",
                serde_json::to_string(&result.base_params)?
            )?;
            writeln!(w, "# grid={}", serde_json::to_string(&result.grid)?)?;
            writeln!(w, "{}", CSV_COLUMNS.join(","))?;
            for p in &result.points {
                let row = [
                    p.protocol.as_str().to_string(),
                    sig6(p.load_factor),
                    p.n_devices.to_string(),
                    p.levels.to_string(),
                    sig6(p.beta),
                    sig6(p.alpha),
                    sig6(p.stats.throughput.mean),
                    sig6(p.stats.throughput.ci95),
                    sig6(p.stats.latency.mean),
                    sig6(p.stats.latency.ci95),
                    sig6(p.stats.not_converged_rate),
                    p.n_realizations.to_string(),
                    result.master_seed.to_string(),
                ];
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct TraceHeader<'a> {
    kind: &'static str,
    master_seed: u64,
    realization_seed: u64,
    params: &'a SystemParams,
    tracked_devices: &'a [usize],
    latency_frames: u32,
    converged: bool,
}

#[derive(Serialize)]
struct TraceLine {
    frame: u32,
    device_id: usize,
    /// 1-based; absent once the device has finished.
    slot: Option<usize>,
    level: Option<usize>,
    interference_w: f64,
    conv_factor: f64,
    success_flag: bool,
}

/// NDJSON: one header object, then one object per frame per tracked device.
pub fn emit_trace(
    params: &SystemParams,
    master_seed: u64,
    realization_seed: u64,
    run: &RunResult,
    w: &mut dyn Write,
) -> io::Result<()> {
    let header = TraceHeader {
        kind: "header",
        master_seed,
        realization_seed,
        params,
        tracked_devices: &run.tracked_devices,
        latency_frames: run.latency_frames,
        converged: run.converged,
    };
    serde_json::to_writer(&mut *w, &header)?;
    writeln!(w)?;
    for r in &run.records {
        let line = TraceLine {
            frame: r.frame,
            device_id: r.device_id,
            slot: r.slot.map(|s| s + 1),
            level: r.level.map(|l| l + 1),
            interference_w: r.interference_w,
            conv_factor: r.conv_factor,
            success_flag: r.success,
        };
        serde_json::to_writer(&mut *w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}
