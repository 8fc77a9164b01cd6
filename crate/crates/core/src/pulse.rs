//! Piecewise-constant control pulses and the three addressing topologies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default number of amplitudes for the cavity model.
pub const CAVITY_SEGMENTS: usize = 16;
/// Default number of equidistant intervals for the spin star.
pub const SPINSTAR_SEGMENTS: usize = 250;

/// A real control amplitude as a function of time.
pub trait ControlField {
    fn amplitude(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ControlField for F {
    fn amplitude(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Step function over `[0, horizon)` with equal-width segments. An empty
/// field is identically zero. Times past the horizon hold the last value.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseField {
    horizon: f64,
    values: Vec<f64>,
}

impl PiecewiseField {
    pub fn new(horizon: f64, values: Vec<f64>) -> Self {
        Self { horizon, values }
    }

    pub fn zero() -> Self {
        Self {
            horizon: 1.0,
            values: Vec::new(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

impl ControlField for PiecewiseField {
    #[inline]
    fn amplitude(&self, t: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        let k = ((t / self.horizon) * n as f64).floor();
        let k = if k <= 0.0 { 0 } else { (k as usize).min(n - 1) };
        self.values[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AddressingMode {
    /// One field on subsystem 1; subsystem 2 undriven.
    Single,
    /// Independent fields on each subsystem.
    Double,
    /// One field shared by both subsystems.
    Global,
}

impl AddressingMode {
    pub const ALL: [AddressingMode; 3] = [Self::Single, Self::Double, Self::Global];

    pub fn channels(self) -> usize {
        match self {
            Self::Single | Self::Global => 1,
            Self::Double => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Single => "SA",
            Self::Double => "DA",
            Self::Global => "GA",
        }
    }
}

impl fmt::Display for AddressingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AddressingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SA" | "SINGLE" => Ok(Self::Single),
            "DA" | "DOUBLE" => Ok(Self::Double),
            "GA" | "GLOBAL" => Ok(Self::Global),
            other => Err(Error::Config(format!("unknown addressing mode '{other}'"))),
        }
    }
}

/// Control amplitudes for `channels` fields over `n_segments` equal slices of `[0, horizon]`.
///
/// Stored channel-major: `amplitudes[c * n_segments + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    horizon: f64,
    n_segments: usize,
    channels: usize,
    amplitudes: Vec<f64>,
}

impl PulseSequence {
    pub fn new(horizon: f64, channels: usize, n_segments: usize, amplitudes: Vec<f64>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("pulse horizon {horizon}")));
        }
        if !(1..=2).contains(&channels) || n_segments == 0 {
            return Err(Error::InvalidParameter(format!(
                "pulse needs 1 or 2 channels and at least one segment, got {channels} x {n_segments}"
            )));
        }
        if amplitudes.len() != channels * n_segments {
            return Err(Error::DimensionMismatch {
                expected: channels * n_segments,
                found: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("pulse amplitudes".into()));
        }
        Ok(Self {
            horizon,
            n_segments,
            channels,
            amplitudes,
        })
    }

    pub fn zeros(horizon: f64, channels: usize, n_segments: usize) -> Result<Self> {
        Self::new(horizon, channels, n_segments, vec![0.0; channels * n_segments])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.amplitudes[c * self.n_segments..(c + 1) * self.n_segments]
    }

    pub fn field(&self, c: usize) -> PiecewiseField {
        PiecewiseField::new(self.horizon, self.channel(c).to_vec())
    }

    /// Every value lies in `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.amplitudes.iter().all(|a| (lo..=hi).contains(a))
    }
}

/// Maps the optimized channels onto the two physical drives `(ε₁, ε₂)`.
pub fn expand_addressing(
    pulse: &PulseSequence,
    mode: AddressingMode,
) -> Result<(PiecewiseField, PiecewiseField)> {
    if pulse.channels() != mode.channels() {
        return Err(Error::InvalidParameter(format!(
            "{mode} expects {} channel(s), pulse has {}",
            mode.channels(),
            pulse.channels()
        )));
    }
    Ok(match mode {
        AddressingMode::Single => (pulse.field(0), PiecewiseField::zero()),
        AddressingMode::Double => (pulse.field(0), pulse.field(1)),
        AddressingMode::Global => (pulse.field(0), pulse.field(0)),
    })
}
