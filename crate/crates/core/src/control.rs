//! Pulse-optimization problems for both models.
//!
//! The cavity objective is the final concurrence itself. The spin-star
//! objective is the fidelity of the central pair with `|Φ⁺⟩`; the reported
//! figure of merit is the concurrence of the state that maximizes it.

use crate::cavity::{concurrence_cavity, evolve_cavity, CavityParams, CavityState, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::optimize::{optimize_multistart, OptimizationOutcome, OptimizerConfig};
use crate::pulse::{expand_addressing, AddressingMode, PulseSequence};
use crate::quantum::{concurrence, state_fidelity, DensityMatrix, PureState};
use crate::spinstar::{default_central_state, CollectiveSpinStar, SpinStarParams};

/// Smallest multiple of `n_segments` that is at least `min_steps`, so no
/// integration step straddles a segment boundary.
pub fn aligned_steps(n_segments: usize, min_steps: usize) -> usize {
    min_steps.div_ceil(n_segments).max(1) * n_segments
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityProblem {
    pub params: CavityParams,
    pub mode: AddressingMode,
    pub horizon: f64,
    pub n_segments: usize,
    pub steps: usize,
}

impl CavityProblem {
    pub fn new(params: CavityParams, mode: AddressingMode, horizon: f64, n_segments: usize) -> Result<Self> {
        params.validate()?;
        if n_segments == 0 {
            return Err(Error::InvalidParameter("pulse needs at least one segment".into()));
        }
        Ok(Self {
            params,
            mode,
            horizon,
            n_segments,
            steps: aligned_steps(n_segments, DEFAULT_STEPS),
        })
    }

    pub fn n_params(&self) -> usize {
        self.mode.channels() * self.n_segments
    }

    pub fn pulse(&self, amplitudes: &[f64]) -> Result<PulseSequence> {
        PulseSequence::new(self.horizon, self.mode.channels(), self.n_segments, amplitudes.to_vec())
    }

    /// Atom 1 starts excited, atom 2 and the bath in their ground states.
    pub fn initial_state(&self) -> CavityState {
        CavityState::initial(1.0.into(), 0.0.into()).expect("unit amplitude")
    }

    pub fn final_state(&self, amplitudes: &[f64]) -> Result<CavityState> {
        let (e1, e2) = expand_addressing(&self.pulse(amplitudes)?, self.mode)?;
        evolve_cavity(&self.params, &self.initial_state(), &e1, &e2, self.horizon, self.steps)
    }

    /// `C(T)` under the given amplitudes.
    pub fn objective(&self, amplitudes: &[f64]) -> Result<f64> {
        Ok(concurrence_cavity(&self.final_state(amplitudes)?))
    }

    pub fn free_concurrence(&self) -> Result<f64> {
        self.objective(&vec![0.0; self.n_params()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinStarProblem {
    pub model: CollectiveSpinStar,
    pub mode: AddressingMode,
    pub horizon: f64,
    pub n_segments: usize,
    pub initial: PureState,
}

impl SpinStarProblem {
    pub fn new(params: &SpinStarParams, mode: AddressingMode, horizon: f64, n_segments: usize) -> Result<Self> {
        if n_segments == 0 {
            return Err(Error::InvalidParameter("pulse needs at least one segment".into()));
        }
        Ok(Self {
            model: CollectiveSpinStar::new(params)?,
            mode,
            horizon,
            n_segments,
            initial: default_central_state(),
        })
    }

    pub fn n_params(&self) -> usize {
        self.mode.channels() * self.n_segments
    }

    pub fn pulse(&self, amplitudes: &[f64]) -> Result<PulseSequence> {
        PulseSequence::new(self.horizon, self.mode.channels(), self.n_segments, amplitudes.to_vec())
    }

    pub fn final_state(&self, amplitudes: &[f64]) -> Result<DensityMatrix> {
        let (e1, e2) = expand_addressing(&self.pulse(amplitudes)?, self.mode)?;
        self.model
            .final_state(&e1, &e2, self.horizon, &self.initial, self.n_segments)
    }

    /// `⟨Φ⁺|ρ(T)|Φ⁺⟩` of the central pair.
    pub fn objective(&self, amplitudes: &[f64]) -> Result<f64> {
        state_fidelity(&self.final_state(amplitudes)?, &PureState::bell_phi_plus())
    }

    pub fn concurrence(&self, amplitudes: &[f64]) -> Result<f64> {
        concurrence(&self.final_state(amplitudes)?)
    }

    pub fn free_concurrence(&self) -> Result<f64> {
        self.concurrence(&vec![0.0; self.n_params()])
    }
}

/// Best pulse found and the entanglement it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    pub pulse: PulseSequence,
    /// Optimized objective value.
    pub objective: f64,
    /// Concurrence of the final state under `pulse`.
    pub concurrence: f64,
    pub outcome: OptimizationOutcome,
}

pub fn optimize_cavity(problem: &CavityProblem, config: &OptimizerConfig, rng_seed: u64) -> Result<ControlResult> {
    let f = |x: &[f64]| problem.objective(x);
    let outcome = optimize_multistart(&f, problem.n_params(), config, rng_seed)?;
    Ok(ControlResult {
        pulse: problem.pulse(&outcome.best_point)?,
        objective: outcome.best_value,
        concurrence: outcome.best_value,
        outcome,
    })
}

pub fn optimize_spinstar(
    problem: &SpinStarProblem,
    config: &OptimizerConfig,
    rng_seed: u64,
) -> Result<ControlResult> {
    let f = |x: &[f64]| problem.objective(x);
    let outcome = optimize_multistart(&f, problem.n_params(), config, rng_seed)?;
    Ok(ControlResult {
        pulse: problem.pulse(&outcome.best_point)?,
        objective: outcome.best_value,
        concurrence: problem.concurrence(&outcome.best_point)?,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_amps(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()
    }

    #[test]
    fn steps_align_with_segments() {
        assert_eq!(aligned_steps(16, 2000), 2000);
        assert_eq!(aligned_steps(15, 2000), 2010);
        assert_eq!(aligned_steps(3000, 2000), 3000);
    }

    #[test]
    fn cavity_decoupled_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frozen = CavityParams {
            lambda: 0.0,
            ..CavityParams::default()
        };
        let lone = CavityParams::default().with_alphas(0.6, 0.0);
        for mode in AddressingMode::ALL {
            for params in [frozen, lone] {
                let p = CavityProblem::new(params, mode, 1.0, 16).unwrap();
                let x = random_amps(&mut rng, p.n_params());
                assert!(p.objective(&x).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_pulse_is_the_free_run() {
        let params = CavityParams::default().with_alphas(0.4, 0.15);
        let p = CavityProblem::new(params, AddressingMode::Double, 1.0, 16).unwrap();
        let free = |_: f64| 0.0;
        let direct = evolve_cavity(&params, &p.initial_state(), &free, &free, 1.0, p.steps).unwrap();
        assert_eq!(p.free_concurrence().unwrap(), concurrence_cavity(&direct));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let p = CavityProblem::new(CavityParams::default(), AddressingMode::Double, 1.0, 16).unwrap();
        assert!(p.objective(&[0.0; 16]).is_err());
        assert!(p.objective(&[f64::NAN; 32]).is_err());
    }

    #[test]
    fn global_addressing_symmetry() {
        // swapping the couplings and the excited atom mirrors the dynamics
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = CavityParams::default().with_alphas(0.45, 0.12);
        let swapped = params.with_alphas(0.12, 0.45);
        for _ in 0..5 {
            let x = random_amps(&mut rng, 16);
            let (e1, e2) = expand_addressing(&PulseSequence::new(1.0, 1, 16, x).unwrap(), AddressingMode::Global).unwrap();
            let a = evolve_cavity(&params, &CavityState::initial(1.0.into(), 0.0.into()).unwrap(), &e1, &e2, 1.0, 2000);
            let b = evolve_cavity(&swapped, &CavityState::initial(0.0.into(), 1.0.into()).unwrap(), &e1, &e2, 1.0, 2000);
            let (a, b) = (a.unwrap(), b.unwrap());
            assert_abs_diff_eq!(a.c1.norm(), b.c2.norm(), epsilon = 1e-12);
            assert_abs_diff_eq!(concurrence_cavity(&a), concurrence_cavity(&b), epsilon = 1e-12);
        }
    }

    #[test]
    fn spinstar_fidelity_limits() {
        let lone = SpinStarParams::new(4, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mode in AddressingMode::ALL {
            let p = SpinStarProblem::new(&lone, mode, 10.0, 25).unwrap();
            assert_abs_diff_eq!(p.objective(&vec![0.0; p.n_params()]).unwrap(), 0.5, epsilon = 1e-12);
            for _ in 0..5 {
                let x = random_amps(&mut rng, p.n_params());
                assert!(p.objective(&x).unwrap() <= 0.5 + 1e-12);
                assert!(p.concurrence(&x).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn optimized_values_dominate_baseline() {
        let cfg = OptimizerConfig {
            seeds: 3,
            max_evals: 400,
            ..OptimizerConfig::default()
        };
        let params = CavityParams::default().with_alphas(0.5, 0.15);
        let p = CavityProblem::new(params, AddressingMode::Single, 1.0, 8).unwrap();
        let r = optimize_cavity(&p, &cfg, 1).unwrap();
        assert!(r.concurrence >= p.free_concurrence().unwrap() - 1e-12);
        assert!(r.pulse.within(cfg.lower, cfg.upper));
        assert_eq!(r.outcome.per_seed_values.len(), 3);

        let s = SpinStarProblem::new(&SpinStarParams::new(3, 0.15, 1.0).unwrap(), AddressingMode::Double, 10.0, 10)
            .unwrap();
        let r = optimize_spinstar(&s, &cfg, 1).unwrap();
        assert!(r.objective >= 0.5 - 1e-12);
        assert_abs_diff_eq!(r.concurrence, s.concurrence(r.pulse.amplitudes()).unwrap());
    }
}
