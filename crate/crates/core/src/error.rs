use thiserror::Error;

/// Errors raised by parameter validation and the simulation primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("parameter `{name}` = {value} is outside [{min}, {max}]")]
    RangeViolation {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("reference distance {d0} m must be below the evaluated distance/radius {r} m")]
    GeometryError { d0: f64, r: f64 },

    #[error("device {0} did not transmit in this slot")]
    DeviceNotInSlot(usize),

    #[error("cannot aggregate an empty set of realizations")]
    EmptyInput,

    #[error("{} invalid parameter(s): {}", .0.len(), join(.0))]
    Invalid(Vec<Error>),
}

fn join(errs: &[Error]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn range(name: &'static str, value: f64, min: f64, max: f64) -> Self {
        Error::RangeViolation {
            name,
            value,
            min,
            max,
        }
    }

    /// Flattens an `Invalid` bundle into its individual violations.
    pub fn violations(&self) -> Vec<&Error> {
        match self {
            Error::Invalid(errs) => errs.iter().collect(),
            other => vec![other],
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    // NaN fails this comparison too.
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveParameter { name, value })
    }
}

pub(crate) fn ensure_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::range(name, value, 0.0, 1.0))
    }
}
