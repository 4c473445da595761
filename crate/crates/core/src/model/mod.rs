//! Scheduling problem for a wind farm feeding a fleet of identical
//! electrolyzer modules, and its mixed-integer linear program.

mod milp;
mod schedule;

pub use milp::{build_milp, MilpInstance, Row, RowFamily, RowSense, VarKind, VarLayout, Variable};
pub use schedule::{extract_schedule, verify_schedule, ModuleHour, ResidualReport, Schedule};

use serde::{Deserialize, Serialize};

use crate::curve::PwlCurve;
use crate::market::MarketSeries;

/// Binary values further than this from 0 or 1 are rejected.
pub const BINARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("market horizon is empty")]
    EmptyHorizon,
    #[error("invalid electrolyzer specification: {0}")]
    InvalidSpec(String),
    #[error("invalid fleet: {0}")]
    InvalidFleet(String),
    #[error("piecewise-linear curve has no segments")]
    EmptyPwl,
    #[error("solution vector has {got} entries, expected {expected}")]
    SolutionLength { expected: usize, got: usize },
    #[error("fractional binary: variable {index} = {value}")]
    FractionalBinary { index: usize, value: f64 },
    #[error("schedule shape does not match the problem")]
    ShapeMismatch,
}

/// Parameters of one electrolyzer module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectrolyzerSpec {
    /// MW
    pub c_max: f64,
    #[serde(default = "defaults::min_fraction")]
    pub c_min_fraction: f64,
    /// Allowed hour-to-hour power change as a fraction of `c_max`.
    #[serde(default = "defaults::ramp_fraction")]
    pub ramp_fraction: f64,
    /// Startup energy as a fraction of `c_max` (MWh per MW).
    #[serde(default = "defaults::startup_fraction")]
    pub startup_energy_fraction: f64,
    /// USD/kg
    #[serde(default = "defaults::hydrogen_price")]
    pub hydrogen_price: f64,
}

mod defaults {
    pub fn min_fraction() -> f64 {
        0.10
    }
    pub fn ramp_fraction() -> f64 {
        0.15
    }
    pub fn startup_fraction() -> f64 {
        0.01
    }
    pub fn hydrogen_price() -> f64 {
        2.0
    }
}

impl ElectrolyzerSpec {
    pub fn new(c_max: f64) -> Self {
        Self {
            c_max,
            c_min_fraction: defaults::min_fraction(),
            ramp_fraction: defaults::ramp_fraction(),
            startup_energy_fraction: defaults::startup_fraction(),
            hydrogen_price: defaults::hydrogen_price(),
        }
    }

    pub fn c_min(&self) -> f64 {
        self.c_min_fraction * self.c_max
    }

    /// MW per hour
    pub fn ramp(&self) -> f64 {
        self.ramp_fraction * self.c_max
    }

    /// MWh consumed in the startup hour
    pub fn startup_energy(&self) -> f64 {
        self.startup_energy_fraction * self.c_max
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return bad(format!("c_max must be positive, got {}", self.c_max));
        }
        if !(self.c_min_fraction > 0.0 && self.c_min_fraction < 1.0) {
            return bad(format!("c_min_fraction must lie in (0, 1), got {}", self.c_min_fraction));
        }
        if !(self.ramp_fraction.is_finite() && self.ramp_fraction > 0.0) {
            return bad(format!("ramp_fraction must be positive, got {}", self.ramp_fraction));
        }
        if !(self.startup_energy_fraction.is_finite() && self.startup_energy_fraction >= 0.0) {
            return bad(format!("startup_energy_fraction must be >= 0, got {}", self.startup_energy_fraction));
        }
        if !self.hydrogen_price.is_finite() {
            return bad("hydrogen_price must be finite".into());
        }
        Ok(())
    }
}

/// A fleet of identical modules and their state before the first hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    pub n_modules: usize,
    pub spec: ElectrolyzerSpec,
    pub initial_on: Vec<bool>,
    /// MW consumed in the hour before the horizon
    pub initial_power: Vec<f64>,
}

impl FleetConfig {
    /// All modules off at zero power.
    pub fn cold(n_modules: usize, spec: ElectrolyzerSpec) -> Self {
        Self { n_modules, spec, initial_on: vec![false; n_modules], initial_power: vec![0.0; n_modules] }
    }

    pub fn total_capacity(&self) -> f64 {
        self.n_modules as f64 * self.spec.c_max
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.spec.validate()?;
        if self.n_modules == 0 {
            return Err(ModelError::InvalidFleet("at least one module is required".into()));
        }
        if self.initial_on.len() != self.n_modules || self.initial_power.len() != self.n_modules {
            return Err(ModelError::InvalidFleet("initial state must list every module".into()));
        }
        if let Some(p) = self.initial_power.iter().find(|p| !(**p >= 0.0 && **p <= self.spec.c_max)) {
            return Err(ModelError::InvalidFleet(format!("initial power {p} outside [0, {}]", self.spec.c_max)));
        }
        Ok(())
    }
}

/// Complete input of the scheduling MILP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleProblem {
    pub market: MarketSeries,
    pub fleet: FleetConfig,
    pub pwl: PwlCurve,
    /// MW, per hour
    pub export_limits: Vec<f64>,
    /// MW, per hour
    pub availability: Vec<f64>,
}

impl ScheduleProblem {
    pub fn horizon(&self) -> usize {
        self.export_limits.len()
    }

    pub fn n_modules(&self) -> usize {
        self.fleet.n_modules
    }

    pub fn spec(&self) -> &ElectrolyzerSpec {
        &self.fleet.spec
    }

    pub fn prices(&self) -> Vec<f64> {
        self.market.prices()
    }

    /// The same plant with each module split into `factor` identical
    /// modules of `1/factor` the capacity.
    pub fn split_modules(&self, factor: usize) -> Result<Self, ModelError> {
        if factor == 0 {
            return Err(ModelError::InvalidFleet("split factor must be positive".into()));
        }
        let spec = ElectrolyzerSpec { c_max: self.fleet.spec.c_max / factor as f64, ..self.fleet.spec };
        let mut fleet = FleetConfig::cold(self.fleet.n_modules * factor, spec);
        for m in 0..self.fleet.n_modules {
            for k in 0..factor {
                fleet.initial_on[m * factor + k] = self.fleet.initial_on[m];
                fleet.initial_power[m * factor + k] = self.fleet.initial_power[m] / factor as f64;
            }
        }
        build_problem(self.market.clone(), fleet, self.pwl.clone())
    }
}

/// Derives the hourly limits and validates the combination.
pub fn build_problem(market: MarketSeries, fleet: FleetConfig, pwl: PwlCurve) -> Result<ScheduleProblem, ModelError> {
    if market.horizon() == 0 {
        return Err(ModelError::EmptyHorizon);
    }
    if pwl.n_segments() == 0 {
        return Err(ModelError::EmptyPwl);
    }
    fleet.validate()?;
    let export_limits = market.export_limits();
    let availability = market.availabilities();
    debug_assert!(export_limits.iter().zip(&availability).all(|(e, a)| e <= a));
    Ok(ScheduleProblem { market, fleet, pwl, export_limits, availability })
}
