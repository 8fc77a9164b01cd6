//! Two driven, non-interacting two-level atoms in a zero-temperature
//! Lorentzian cavity, restricted to the single-excitation sector.
//!
//! The bath is eliminated exactly. What remains are two coupled
//! second-order equations for the atomic amplitudes,
//!
//! ```text
//! C̈₁ + (λ − iε₁) Ċ₁ + α₁ p₀ (α₁ C₁ + α₂ e^{ iφ} C₂) = 0
//! C̈₂ + (λ − iε₂) Ċ₂ + α₂ p₀ (α₂ C₂ + α₁ e^{−iφ} C₁) = 0
//! ```
//!
//! with `p₀ = γ₀λ/2` and `φ(t) = ∫₀ᵗ (ε₁ − ε₂) ds`. They are integrated as a
//! first-order system in `(C₁, C₂, Ċ₁, Ċ₂, φ)` with fixed-step RK4. The bare
//! splitting `ω₀` cancels from these equations.
//!
//! Two-qubit basis (see [`crate::quantum`]): `|10⟩` is atom 1 excited,
//! `|01⟩` atom 2 excited, `|00⟩` both in the ground state.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::pulse::ControlField;
use crate::quantum::{DensityMatrix, ComplexMatrix};

/// Smallest accepted number of integration steps.
pub const MIN_STEPS: usize = 100;
/// Default integration steps for horizons up to 4.
pub const DEFAULT_STEPS: usize = 2000;
/// Slack on `|C₁|² + |C₂|² ≤ 1`.
pub const NORM_SLACK: f64 = 1e-8;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    /// System–bath coupling rate γ₀.
    pub gamma0: f64,
    /// Spectral width λ of the Lorentzian.
    pub lambda: f64,
    /// Bare atomic splitting ω₀ (drops out of the reduced dynamics).
    pub omega0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            gamma0: 50.0,
            lambda: 1.0,
            omega0: 1.0,
            alpha1: 0.5,
            alpha2: 0.1,
        }
    }
}

impl CavityParams {
    pub fn new(gamma0: f64, lambda: f64, omega0: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        let p = Self {
            gamma0,
            lambda,
            omega0,
            alpha1,
            alpha2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma0, self.lambda, self.omega0, self.alpha1, self.alpha2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cavity parameters".into()));
        }
        if self.gamma0 <= 0.0 {
            return Err(Error::InvalidParameter(format!("gamma0 must be > 0, got {}", self.gamma0)));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn with_alphas(self, alpha1: f64, alpha2: f64) -> Self {
        Self { alpha1, alpha2, ..self }
    }

    /// Amplitude `p₀ = γ₀λ/2` of the bath correlation function.
    pub fn p0(&self) -> f64 {
        0.5 * self.gamma0 * self.lambda
    }

    /// Exponent `q₀ = −(λ + iω₀)` of the bath correlation function.
    pub fn q0(&self) -> C64 {
        -C64::new(self.lambda, self.omega0)
    }
}

/// Amplitudes, their first derivatives, and the accumulated relative phase `φ = v₁ − v₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityState {
    pub c1: C64,
    pub c2: C64,
    pub d1: C64,
    pub d2: C64,
    pub phase: f64,
}

impl CavityState {
    /// Initial state `C₁₀|10⟩ + C₀₂|01⟩` with the bath in vacuum, so `Ċ(0) = 0`.
    pub fn initial(c1: C64, c2: C64) -> Result<Self> {
        let norm = c1.norm_sqr() + c2.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(norm.sqrt()));
        }
        Ok(Self {
            c1,
            c2,
            d1: C64::from(0.0),
            d2: C64::from(0.0),
            phase: 0.0,
        })
    }

    /// Both atoms in the ground state; stationary.
    pub fn ground() -> Self {
        let z = C64::from(0.0);
        Self {
            c1: z,
            c2: z,
            d1: z,
            d2: z,
            phase: 0.0,
        }
    }

    pub fn excited_population(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }

    fn axpy(&self, h: f64, k: &CavityState) -> CavityState {
        CavityState {
            c1: self.c1 + k.c1 * h,
            c2: self.c2 + k.c2 * h,
            d1: self.d1 + k.d1 * h,
            d2: self.d2 + k.d2 * h,
            phase: self.phase + k.phase * h,
        }
    }
}

/// Time derivative of `state` under constant drives `eps1`, `eps2`.
pub fn cavity_rhs(state: &CavityState, params: &CavityParams, eps1: f64, eps2: f64) -> CavityState {
    derivative(state, params, eps1, eps2, C64::from_polar(1.0, state.phase))
}

#[inline]
fn derivative(s: &CavityState, p: &CavityParams, eps1: f64, eps2: f64, factor: C64) -> CavityState {
    let p0 = p.p0();
    CavityState {
        c1: s.d1,
        c2: s.d2,
        d1: -(p.lambda - I * eps1) * s.d1 - p.alpha1 * p0 * (p.alpha1 * s.c1 + p.alpha2 * factor * s.c2),
        d2: -(p.lambda - I * eps2) * s.d2 - p.alpha2 * p0 * (p.alpha2 * s.c2 + p.alpha1 * factor.conj() * s.c1),
        phase: eps1 - eps2,
    }
}

/// Phase rotations `e^{iδh/2}` and `e^{iδh}` over one step at detuning `δ = ε₁ − ε₂`.
#[derive(Debug, Clone, Copy)]
struct StepRotation {
    delta: f64,
    half: C64,
    full: C64,
}

impl StepRotation {
    fn new(delta: f64, h: f64) -> Self {
        Self {
            delta,
            half: C64::from_polar(1.0, 0.5 * delta * h),
            full: C64::from_polar(1.0, delta * h),
        }
    }
}

/// One RK4 step with the drives frozen over the step.
///
/// The phase integrates exactly (its derivative is constant over the step),
/// so the coupling factors at the substage times are `f0 = e^{iφ}` rotated
/// by `δh/2` and `δh`.
#[inline]
fn rk4_step(y: &CavityState, p: &CavityParams, eps1: f64, eps2: f64, h: f64, f0: C64, rot: &StepRotation) -> CavityState {
    let f_half = f0 * rot.half;
    let f_full = f0 * rot.full;
    let k1 = derivative(y, p, eps1, eps2, f0);
    let k2 = derivative(&y.axpy(0.5 * h, &k1), p, eps1, eps2, f_half);
    let k3 = derivative(&y.axpy(0.5 * h, &k2), p, eps1, eps2, f_half);
    let k4 = derivative(&y.axpy(h, &k3), p, eps1, eps2, f_full);
    let w = h / 6.0;
    CavityState {
        c1: y.c1 + (k1.c1 + 2.0 * k2.c1 + 2.0 * k3.c1 + k4.c1) * w,
        c2: y.c2 + (k1.c2 + 2.0 * k2.c2 + 2.0 * k3.c2 + k4.c2) * w,
        d1: y.d1 + (k1.d1 + 2.0 * k2.d1 + 2.0 * k3.d1 + k4.d1) * w,
        d2: y.d2 + (k1.d2 + 2.0 * k2.d2 + 2.0 * k3.d2 + k4.d2) * w,
        phase: y.phase + rot.delta * h,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CavityState>,
}

impl CavityTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &CavityState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn concurrences(&self) -> Vec<f64> {
        self.states.iter().map(concurrence_cavity).collect()
    }
}

fn check_grid(horizon: f64, steps: usize) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
    }
    if steps < MIN_STEPS {
        return Err(Error::InvalidGrid(format!("{steps} steps requested, at least {MIN_STEPS} required")));
    }
    Ok(())
}

/// Advances `initial` over `[0, horizon]` in `steps` uniform RK4 steps,
/// calling `visit(k, t_k, state_k)` for `k = 1..=steps`.
///
/// Drives are sampled once per step at the step midpoint, which equals the
/// piecewise-constant value whenever no segment boundary falls inside the step.
fn run<E1, E2, V>(
    params: &CavityParams,
    initial: &CavityState,
    eps1: &E1,
    eps2: &E2,
    horizon: f64,
    steps: usize,
    mut visit: V,
) -> Result<CavityState>
where
    E1: ControlField + ?Sized,
    E2: ControlField + ?Sized,
    V: FnMut(usize, f64, &CavityState),
{
    check_grid(horizon, steps)?;
    let h = horizon / steps as f64;
    let mut y = *initial;
    let mut rot = StepRotation::new(0.0, h);
    // e^{iφ}, advanced by rotation and resynchronized whenever the detuning changes
    let mut factor = C64::from_polar(1.0, y.phase);
    for k in 0..steps {
        let mid = (k as f64 + 0.5) * h;
        let (e1, e2) = (eps1.amplitude(mid), eps2.amplitude(mid));
        if !(e1.is_finite() && e2.is_finite()) {
            return Err(Error::NonFinite(format!("drive at t = {mid}")));
        }
        if e1 - e2 != rot.delta {
            rot = StepRotation::new(e1 - e2, h);
            factor = C64::from_polar(1.0, y.phase);
        }
        y = rk4_step(&y, params, e1, e2, h, factor, &rot);
        factor *= rot.full;
        visit(k + 1, (k + 1) as f64 * h, &y);
    }
    Ok(y)
}

/// Full trajectory on the uniform grid `t_k = k·horizon/steps`, `k = 0..=steps`.
pub fn integrate_cavity<E1, E2>(
    params: &CavityParams,
    initial: &CavityState,
    eps1: &E1,
    eps2: &E2,
    horizon: f64,
    steps: usize,
) -> Result<CavityTrajectory>
where
    E1: ControlField + ?Sized,
    E2: ControlField + ?Sized,
{
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(*initial);
    run(params, initial, eps1, eps2, horizon, steps, |_, t, s| {
        times.push(t);
        states.push(*s);
    })?;
    Ok(CavityTrajectory { times, states })
}

/// State at `horizon` only.
pub fn evolve_cavity<E1, E2>(
    params: &CavityParams,
    initial: &CavityState,
    eps1: &E1,
    eps2: &E2,
    horizon: f64,
    steps: usize,
) -> Result<CavityState>
where
    E1: ControlField + ?Sized,
    E2: ControlField + ?Sized,
{
    run(params, initial, eps1, eps2, horizon, steps, |_, _, _| {})
}

/// Closed-form amplitude of a lone undriven atom (`α₂ = 0`) starting excited.
///
/// With roots `r±` of `r² + λr + α₁²γ₀λ/2 = 0`,
/// `C(t) = (r₊e^{r₋t} − r₋e^{r₊t}) / (r₊ − r₋)`; coincident roots use
/// `(1 − rt)e^{rt}`.
pub fn single_atom_analytic(params: &CavityParams, t: f64) -> Result<C64> {
    if params.alpha2 != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "single-atom solution needs alpha2 = 0, got {}",
            params.alpha2
        )));
    }
    params.validate()?;
    let lambda = params.lambda;
    let disc = C64::from(lambda * lambda - 2.0 * params.alpha1 * params.alpha1 * params.gamma0 * lambda);
    let root = disc.sqrt();
    let rp = 0.5 * (-lambda + root);
    let rm = 0.5 * (-lambda - root);
    let gap = (rp - rm).norm();
    if gap * t.max(1.0) < 1e-6 {
        let r = C64::from(-0.5 * lambda);
        return Ok((1.0 - r * t) * (r * t).exp());
    }
    Ok((rp * (rm * t).exp() - rm * (rp * t).exp()) / (rp - rm))
}

/// The X-shaped two-qubit density matrix of the single-excitation sector.
pub fn assemble_density(state: &CavityState) -> Result<DensityMatrix> {
    let pop = state.excited_population();
    if !pop.is_finite() || pop > 1.0 + NORM_SLACK {
        return Err(Error::NotNormalized(pop.sqrt()));
    }
    let (c1, c2) = (state.c1, state.c2);
    let mut m: ComplexMatrix = DMatrix::zeros(4, 4);
    m[(0b00, 0b00)] = C64::from((1.0 - pop).max(0.0));
    m[(0b10, 0b10)] = C64::from(c1.norm_sqr());
    m[(0b01, 0b01)] = C64::from(c2.norm_sqr());
    m[(0b10, 0b01)] = c1 * c2.conj();
    m[(0b01, 0b10)] = c1.conj() * c2;
    if pop > 1.0 {
        // renormalize the slack so the trace stays exactly one
        m /= C64::from(pop);
    }
    DensityMatrix::new(m)
}

/// `2|C₁C₂*|`, the concurrence of the single-excitation state.
pub fn concurrence_cavity(state: &CavityState) -> f64 {
    2.0 * (state.c1 * state.c2.conj()).norm()
}
