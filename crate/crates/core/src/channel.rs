//! Geometry, path loss, Rayleigh fading and transmit level powers.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{ensure_positive, Error, Result};
use crate::model::{watts_to_dbm, LevelMode, SystemParams};

/// Speed of light used by the free-space reference power, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Transmit power of every selectable level, in watts, indexed by level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    pub powers_w: Vec<f64>,
}

impl LevelTable {
    pub fn len(&self) -> usize {
        self.powers_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers_w.is_empty()
    }

    pub fn powers_dbm(&self) -> Vec<f64> {
        self.powers_w.iter().map(|&w| watts_to_dbm(w)).collect()
    }
}

/// Distances of `n` devices dropped uniformly over the disc of radius `r`,
/// clipped below at `d0`.
pub fn place_devices<R: Rng + ?Sized>(n: usize, r: f64, d0: f64, rng: &mut R) -> Result<Vec<f64>> {
    ensure_positive("cell_radius_m", r)?;
    ensure_positive("ref_distance_m", d0)?;
    if d0 >= r {
        return Err(Error::GeometryError { d0, r });
    }
    Ok((0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (r * u.sqrt()).max(d0)
        })
        .collect())
}

/// Free-space gain at the reference distance, `20 log10(c / (4 pi d0 fc))` dB.
pub fn reference_power_db(fc: f64, d0: f64) -> Result<f64> {
    ensure_positive("carrier_hz", fc)?;
    ensure_positive("ref_distance_m", d0)?;
    Ok(20.0 * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * d0 * fc)).log10())
}

/// Log-distance mean received power (dBm) at distance `d` for transmit
/// power `pt_dbm`.
pub fn mean_rx_power_dbm(pt_dbm: f64, d: f64, params: &SystemParams) -> Result<f64> {
    let d0 = params.ref_distance_m;
    if d.partial_cmp(&d0).is_none_or(|o| o.is_lt()) {
        return Err(Error::GeometryError { d0, r: d });
    }
    let reference = reference_power_db(params.carrier_hz, d0)?;
    Ok(pt_dbm + reference - 10.0 * params.pathloss_exponent * (d / d0).log10())
}

pub fn level_table(p_levels: u32, p_max: f64, mode: LevelMode) -> Result<LevelTable> {
    ensure_positive("n_power_levels", f64::from(p_levels))?;
    ensure_positive("max_power_w", p_max)?;
    let p = f64::from(p_levels);
    let powers_w = match mode {
        LevelMode::PositiveEquidistant => (1..=p_levels)
            .map(|i| {
                let a = f64::from(i) / p;
                p_max * a * a
            })
            .collect(),
        // Amplitudes -1 + 2i/(P-1); a single level sits at full amplitude.
        LevelMode::SymmetricLiteral if p_levels == 1 => vec![p_max],
        LevelMode::SymmetricLiteral => (0..p_levels)
            .map(|i| {
                let a = -1.0 + 2.0 * f64::from(i) / (p - 1.0);
                p_max * a * a
            })
            .collect(),
    };
    Ok(LevelTable { powers_w })
}

/// Squared magnitude of a unit-variance complex Gaussian: Exp(1).
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let h2: f64 = Exp1.sample(rng);
        if h2 > 0.0 {
            return h2;
        }
    }
}

/// Noise power `N0 * B` in watts.
pub fn noise_power_w(n0_dbm_hz: f64, b: f64) -> Result<f64> {
    ensure_positive("bandwidth_hz", b)?;
    Ok(10f64.powf((n0_dbm_hz + 10.0 * b.log10()) / 10.0) / 1000.0)
}
