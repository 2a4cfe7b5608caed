//! Seeded sweep orchestration over operating-point grids and the
//! statistical reduction of the per-realization results.
//!
//! Every realization draws from its own ChaCha stream seeded by
//! [`derive_seed`], and results are reduced in index order, so a sweep is
//! bit-identical regardless of thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{run_realization_with, RunOptions, Tracking};
use crate::error::{Error, Result};
use crate::model::{devices_for_load, Protocol, RunResult, SystemParams};

/// Desk-scale realization count.
pub const DEFAULT_REALIZATIONS: u32 = 100;
/// Realization count of the full-scale reference curves.
pub const FULL_REALIZATIONS: u32 = 10_000;
/// Fraction of non-converged runs above which a point is flagged.
pub const WARN_NOT_CONVERGED: f64 = 0.5;

const Z95: f64 = 1.959_963_984_540_054;

/// Values to sweep. An empty axis keeps the base parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub protocols: Vec<Protocol>,
    pub loading_factors: Vec<f64>,
    pub power_levels: Vec<u32>,
    pub sic_error_factors: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Parallelism {
    #[default]
    Auto,
    Threads(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base_params: SystemParams,
    pub grid: Grid,
    pub n_realizations: u32,
    pub master_seed: u64,
    pub parallelism: Parallelism,
    pub tracking: TrackingSpec,
}

/// Serializable form of [`Tracking`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackingSpec {
    #[default]
    MedianDevice,
    Devices(Vec<usize>),
    Nothing,
}

impl From<&TrackingSpec> for Tracking {
    fn from(t: &TrackingSpec) -> Self {
        match t {
            TrackingSpec::MedianDevice => Tracking::MedianDevice,
            TrackingSpec::Devices(ids) => Tracking::Devices(ids.clone()),
            TrackingSpec::Nothing => Tracking::Nothing,
        }
    }
}

impl SweepConfig {
    pub fn new(base_params: SystemParams) -> Self {
        SweepConfig {
            base_params,
            grid: Grid::default(),
            n_realizations: DEFAULT_REALIZATIONS,
            master_seed: 0,
            parallelism: Parallelism::Auto,
            tracking: TrackingSpec::MedianDevice,
        }
    }

    /// Expands the grid (protocol, load, levels, beta, alpha; last axis
    /// fastest) and validates every point.
    pub fn points(&self) -> Result<Vec<SystemParams>> {
        fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
            if values.is_empty() {
                vec![base]
            } else {
                values.to_vec()
            }
        }
        let b = &self.base_params;
        let g = &self.grid;
        let mut out = Vec::new();
        for &protocol in &axis(&g.protocols, b.protocol) {
            for &load in &axis(&g.loading_factors, b.loading_factor()) {
                for &levels in &axis(&g.power_levels, b.n_power_levels) {
                    for &beta in &axis(&g.sic_error_factors, b.sic_error_factor) {
                        for &alpha in &axis(&g.learning_rates, b.learning_rate) {
                            let p = SystemParams {
                                protocol,
                                n_devices: devices_for_load(load, b.n_slots),
                                n_power_levels: levels,
                                sic_error_factor: beta,
                                learning_rate: alpha,
                                ..b.clone()
                            };
                            out.push(p.validate()?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::NonPositiveParameter {
                name: "n_realizations",
                value: 0.0,
            });
        }
        if let Parallelism::Threads(0) = self.parallelism {
            return Err(Error::NonPositiveParameter {
                name: "parallelism",
                value: 0.0,
            });
        }
        self.points().map(|_| ())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one realization's random stream. Each stage is a bijection of
/// its input, so for a fixed (master, grid point) distinct realizations
/// always get distinct seeds.
pub fn derive_seed(master_seed: u64, grid_index: u64, realization_index: u64) -> u64 {
    let z = splitmix64(master_seed);
    let z = splitmix64(z ^ grid_index);
    splitmix64(z ^ realization_index)
}

/// Mean, sample standard deviation and normal-approximation 95% CI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
    pub n: usize,
    /// Fewer than two samples; `std` and `ci95` are 0 by convention.
    pub low_sample: bool,
}

impl Stats {
    pub fn from_samples(xs: &[f64]) -> Result<Stats> {
        if xs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Ok(Stats {
                mean,
                std: 0.0,
                ci95: 0.0,
                n,
                low_sample: true,
            });
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        Ok(Stats {
            mean,
            std,
            ci95: Z95 * std / (n as f64).sqrt(),
            n,
            low_sample: false,
        })
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }
}

/// Reduction of a set of realizations of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub throughput: Stats,
    pub latency: Stats,
    pub not_converged_rate: f64,
    /// Per tracked device, per frame; finished runs are padded with
    /// interference 0 and convergence factor 1.
    pub mean_interference_trace: Vec<Vec<f64>>,
    pub mean_convergence_trace: Vec<Vec<f64>>,
}

pub fn aggregate(runs: &[RunResult]) -> Result<Aggregate> {
    if runs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let tau: Vec<f64> = runs.iter().map(|r| r.throughput).collect();
    let lat: Vec<f64> = runs.iter().map(|r| f64::from(r.latency_frames)).collect();
    let failed = runs.iter().filter(|r| !r.converged).count();

    let tracked = runs
        .iter()
        .map(|r| r.interference_trace.len())
        .min()
        .unwrap_or(0);
    let frames = runs
        .iter()
        .map(|r| r.latency_frames as usize)
        .max()
        .unwrap_or(0);
    let m = runs.len() as f64;
    let mut interference = vec![vec![0.0; frames]; tracked];
    let mut convergence = vec![vec![0.0; frames]; tracked];
    for r in runs {
        for t in 0..tracked {
            let (it, ct) = (&r.interference_trace[t], &r.convergence_trace[t]);
            for f in 0..frames {
                interference[t][f] += it.get(f).copied().unwrap_or(0.0) / m;
                convergence[t][f] += ct.get(f).copied().unwrap_or(1.0) / m;
            }
        }
    }

    Ok(Aggregate {
        throughput: Stats::from_samples(&tau)?,
        latency: Stats::from_samples(&lat)?,
        not_converged_rate: failed as f64 / m,
        mean_interference_trace: interference,
        mean_convergence_trace: convergence,
    })
}

/// Result of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub params: SystemParams,
    pub protocol: Protocol,
    pub load_factor: f64,
    pub n_devices: u32,
    pub levels: u32,
    pub beta: f64,
    pub alpha: f64,
    pub n_realizations: u32,
    /// More than half the realizations hit the frame cap.
    pub convergence_warning: bool,
    #[serde(flatten)]
    pub stats: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub master_seed: u64,
    pub n_realizations: u32,
    pub base_params: SystemParams,
    pub grid: Grid,
    /// Device positions are redrawn for every realization.
    pub placement: String,
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn any_warning(&self) -> bool {
        self.points.iter().any(|p| p.convergence_warning)
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let points = config.points()?;
    let m = config.n_realizations as usize;
    let opts = RunOptions {
        tracking: Tracking::from(&config.tracking),
        distances: None,
    };
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..m).map(move |r| (g, r)))
        .collect();
    let run_job = |&(g, r): &(usize, usize)| -> Result<RunResult> {
        let seed = derive_seed(config.master_seed, g as u64, r as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut run = run_realization_with(&points[g], &opts, &mut rng)?;
        run.records = Vec::new();
        Ok(run)
    };
    let runs = execute(config.parallelism, &jobs, run_job)?;

    let results = points
        .iter()
        .enumerate()
        .map(|(g, params)| {
            let stats = aggregate(&runs[g * m..(g + 1) * m])?;
            Ok(PointResult {
                index: g,
                protocol: params.protocol,
                load_factor: params.loading_factor(),
                n_devices: params.n_devices,
                levels: params.effective_levels(),
                beta: params.sic_error_factor,
                alpha: params.learning_rate,
                n_realizations: config.n_realizations,
                convergence_warning: stats.not_converged_rate > WARN_NOT_CONVERGED,
                params: params.clone(),
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        master_seed: config.master_seed,
        n_realizations: config.n_realizations,
        base_params: config.base_params.clone(),
        grid: config.grid.clone(),
        placement: "resampled-per-realization".to_string(),
        points: results,
    })
}

/// Maps `f` over `jobs`, keeping input order in the output.
fn execute<J, T, F>(parallelism: Parallelism, jobs: &[J], f: F) -> Result<Vec<T>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync,
{
    match parallelism {
        Parallelism::Threads(1) => jobs.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Auto => {
            use rayon::prelude::*;
            jobs.par_iter().map(&f).collect()
        }
        #[cfg(feature = "parallel")]
        Parallelism::Threads(n) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("failed to build worker pool");
            pool.install(|| jobs.par_iter().map(&f).collect())
        }
        #[cfg(not(feature = "parallel"))]
        _ => jobs.iter().map(f).collect(),
    }
}
