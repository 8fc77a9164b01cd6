//! Non-Markovianity from information backflow.
//!
//! Two orthogonal initial states evolve under the free dynamics; every
//! increase of their trace distance counts as information returning from the
//! environment. The measure is the sum of those increases on a uniform grid.

use std::fmt;

use crate::cavity::{assemble_density, integrate_cavity, CavityParams, CavityState};
use crate::error::{Error, Result};
use crate::quantum::{trace_distance, PureState};
use crate::spinstar::{CollectiveSpinStar, SpinStarParams};

/// Measures below this value are classified as Markovian.
pub const MARKOVIAN_THRESHOLD: f64 = 1e-6;
pub const MIN_GRID_POINTS: usize = 500;
pub const CAVITY_GRID_POINTS: usize = 2000;
pub const SPINSTAR_GRID_POINTS: usize = 501;

/// Which orthogonal pair is evolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatePair {
    /// `|10⟩` against `|01⟩`.
    #[default]
    Exchange,
    /// `|10⟩` against the ground state `|00⟩`. For a lone atom the exchange
    /// pair keeps unit distance, while this one tracks `|C₁(t)|²`.
    Excitation,
}

impl StatePair {
    fn second(self) -> usize {
        match self {
            Self::Exchange => 0b01,
            Self::Excitation => 0b00,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Markovian,
    NonMarkovian,
}

impl Regime {
    pub fn classify(value: f64) -> Self {
        if value < MARKOVIAN_THRESHOLD {
            Self::Markovian
        } else {
            Self::NonMarkovian
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Markovian => "Markovian",
            Self::NonMarkovian => "NonMarkovian",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub value: f64,
    pub trajectory: DistanceTrajectory,
    pub regime: Regime,
}

fn check_points(grid_points: usize) -> Result<()> {
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::InvalidGrid(format!(
            "{grid_points} grid points requested, at least {MIN_GRID_POINTS} required"
        )));
    }
    Ok(())
}

fn cavity_initial(index: usize) -> CavityState {
    let one = 1.0.into();
    let zero = 0.0.into();
    match index {
        0b10 => CavityState::initial(one, zero).expect("unit amplitude"),
        0b01 => CavityState::initial(zero, one).expect("unit amplitude"),
        _ => CavityState::ground(),
    }
}

/// Trace distance of the free cavity pair on `grid_points` uniform times in `[0, horizon]`.
pub fn cavity_distance_trajectory(
    params: &CavityParams,
    pair: StatePair,
    horizon: f64,
    grid_points: usize,
) -> Result<DistanceTrajectory> {
    params.validate()?;
    check_points(grid_points)?;
    let free = |_: f64| 0.0;
    let steps = grid_points - 1;
    let first = integrate_cavity(params, &cavity_initial(0b10), &free, &free, horizon, steps)?;
    let second = integrate_cavity(params, &cavity_initial(pair.second()), &free, &free, horizon, steps)?;
    let values = first
        .states
        .iter()
        .zip(&second.states)
        .map(|(a, b)| trace_distance(&assemble_density(a)?, &assemble_density(b)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceTrajectory {
        times: first.times,
        values,
    })
}

/// Trace distance of the free central-pair states, environment in `|0…0⟩`.
pub fn spinstar_distance_trajectory(
    params: &SpinStarParams,
    pair: StatePair,
    horizon: f64,
    grid_points: usize,
) -> Result<DistanceTrajectory> {
    check_points(grid_points)?;
    let model = CollectiveSpinStar::new(params)?;
    let free = |_: f64| 0.0;
    let slices = grid_points - 1;
    let first = model.propagate(&free, &free, horizon, &PureState::basis(2, 0b10)?, slices)?;
    let second = model.propagate(&free, &free, horizon, &PureState::basis(2, pair.second())?, slices)?;
    let values = first
        .states
        .iter()
        .zip(&second.states)
        .map(|(a, b)| trace_distance(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceTrajectory {
        times: first.times,
        values,
    })
}

/// Sum of the positive increments of the distance series.
pub fn blp_measure(trajectory: DistanceTrajectory) -> Result<NmResult> {
    let DistanceTrajectory { times, values } = &trajectory;
    if times.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::InvalidGrid("time grid is not strictly increasing".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distance series".into()));
    }
    let value: f64 = values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
    Ok(NmResult {
        value,
        regime: Regime::classify(value),
        trajectory,
    })
}

pub fn cavity_nm(params: &CavityParams, horizon: f64, grid_points: usize) -> Result<NmResult> {
    blp_measure(cavity_distance_trajectory(params, StatePair::Exchange, horizon, grid_points)?)
}

pub fn spinstar_nm(params: &SpinStarParams, horizon: f64, grid_points: usize) -> Result<NmResult> {
    blp_measure(spinstar_distance_trajectory(params, StatePair::Exchange, horizon, grid_points)?)
}
