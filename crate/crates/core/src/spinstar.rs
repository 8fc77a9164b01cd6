//! Spin star: two central spins Heisenberg-coupled with equal strength `A`
//! to `N − 2` environmental spins, driven by `σ_y` fields on the central pair.
//!
//! ```text
//! H(t) = (ω₀/2)(σ_z¹ + σ_z²) + A Σ_k (σ⃗¹ + σ⃗²)·σ⃗ᵏ + ε₁(t) σ_y¹ + ε₂(t) σ_y²
//! ```
//!
//! Sites 0 and 1 are the central spins; sites `2..N` the environment. The
//! central spins do not interact directly.
//!
//! Two propagators are provided. [`propagate_spinstar`] evolves the full
//! `2^N`-dimensional state. [`CollectiveSpinStar`] uses the fact that `H`
//! couples the environment only through its total spin `S⃗ = ½ Σ_k σ⃗ᵏ`: an
//! environment prepared in `|0…0⟩` stays in the symmetric multiplet
//! `j = (N − 2)/2`, so the dynamics is exact in a `4(N − 1)`-dimensional space.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::pulse::ControlField;
use crate::quantum::{
    hermitian_expm, pauli_on_site, reduce_pure, Axis, ComplexMatrix, ComplexVector, DensityMatrix, PureState,
};

pub const MIN_SPINS: usize = 2;
pub const MAX_SPINS: usize = 8;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinStarParams {
    /// Total spin count `N`, central pair included.
    pub n_total: usize,
    /// Uniform central–environment coupling `A`.
    pub coupling: f64,
    pub omega0: f64,
}

impl Default for SpinStarParams {
    fn default() -> Self {
        Self {
            n_total: 4,
            coupling: 0.1,
            omega0: 1.0,
        }
    }
}

impl SpinStarParams {
    pub fn new(n_total: usize, coupling: f64, omega0: f64) -> Result<Self> {
        let p = Self {
            n_total,
            coupling,
            omega0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_SPINS..=MAX_SPINS).contains(&self.n_total) {
            return Err(Error::InvalidParameter(format!(
                "spin count {} outside [{MIN_SPINS}, {MAX_SPINS}]",
                self.n_total
            )));
        }
        if !(self.coupling.is_finite() && self.omega0.is_finite()) {
            return Err(Error::NonFinite("spin star parameters".into()));
        }
        if self.coupling < 0.0 {
            return Err(Error::InvalidParameter(format!("coupling must be >= 0, got {}", self.coupling)));
        }
        Ok(())
    }

    pub fn n_env(&self) -> usize {
        self.n_total - 2
    }
}

/// Free Hamiltonian and the two control operators on the full space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinStarOperators {
    pub n_total: usize,
    pub h0: ComplexMatrix,
    pub hc1: ComplexMatrix,
    pub hc2: ComplexMatrix,
}

/// Adds `scale · σ⃗ᵃ·σ⃗ᵇ` to `m`: `+1` on aligned pairs, `−1` plus a `2`
/// flip-flop amplitude on anti-aligned ones.
fn add_heisenberg(m: &mut ComplexMatrix, n: usize, a: usize, b: usize, scale: f64) {
    let ma = 1usize << (n - 1 - a);
    let mb = 1usize << (n - 1 - b);
    for i in 0..(1usize << n) {
        let aligned = (i & ma == 0) == (i & mb == 0);
        if aligned {
            m[(i, i)] += scale;
        } else {
            m[(i, i)] -= scale;
            m[(i ^ ma ^ mb, i)] += 2.0 * scale;
        }
    }
}

pub fn build_operators(params: &SpinStarParams) -> Result<SpinStarOperators> {
    params.validate()?;
    let n = params.n_total;
    let dim = 1usize << n;
    let mut h0 = (pauli_on_site(Axis::Z, 0, n)? + pauli_on_site(Axis::Z, 1, n)?) * C64::from(0.5 * params.omega0);
    debug_assert_eq!(h0.nrows(), dim);
    for env in 2..n {
        add_heisenberg(&mut h0, n, 0, env, params.coupling);
        add_heisenberg(&mut h0, n, 1, env, params.coupling);
    }
    Ok(SpinStarOperators {
        n_total: n,
        h0,
        hc1: pauli_on_site(Axis::Y, 0, n)?,
        hc2: pauli_on_site(Axis::Y, 1, n)?,
    })
}

/// `Σ_q σ_zᵠ` over all sites.
pub fn total_sz(n_qubits: usize) -> ComplexMatrix {
    let dim = 1usize << n_qubits;
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::from(n_qubits as f64 - 2.0 * i.count_ones() as f64)
        } else {
            ZERO
        }
    })
}

/// Full-space initial state: central pair `central` ⊗ environment `|0…0⟩`.
pub fn embed_initial(central: &PureState, n_total: usize) -> Result<PureState> {
    if central.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: central.dim(),
        });
    }
    let env = PureState::basis(n_total - 2, 0)?;
    Ok(central.tensor(&env))
}

/// Reduced central-pair states at segment boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest `|‖ψ(t)‖ − 1|` seen along the way.
    pub norm_drift: f64,
}

impl ReducedTrajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }
}

fn check_slices(horizon: f64, slices: usize) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
    }
    if slices == 0 {
        return Err(Error::InvalidGrid("at least one slice is required".into()));
    }
    Ok(horizon / slices as f64)
}

/// Segment propagators `exp(−i(H₀ + ε₁H₁ + ε₂H₂)Δt)`, reused while the drives repeat.
struct SegmentPropagator<'a> {
    h0: &'a ComplexMatrix,
    hc1: &'a ComplexMatrix,
    hc2: &'a ComplexMatrix,
    dt: f64,
    cached: Option<((f64, f64), ComplexMatrix)>,
}

impl<'a> SegmentPropagator<'a> {
    fn new(h0: &'a ComplexMatrix, hc1: &'a ComplexMatrix, hc2: &'a ComplexMatrix, dt: f64) -> Self {
        Self {
            h0,
            hc1,
            hc2,
            dt,
            cached: None,
        }
    }

    fn get(&mut self, e1: f64, e2: f64) -> Result<&ComplexMatrix> {
        if !(e1.is_finite() && e2.is_finite()) {
            return Err(Error::NonFinite(format!("drive amplitudes ({e1}, {e2})")));
        }
        let hit = matches!(&self.cached, Some((key, _)) if *key == (e1, e2));
        if !hit {
            let h = self.h0 + self.hc1 * C64::from(e1) + self.hc2 * C64::from(e2);
            self.cached = Some(((e1, e2), hermitian_expm(&h, self.dt)?));
        }
        Ok(&self.cached.as_ref().expect("filled above").1)
    }
}

/// Full-space evolution from `initial`, recording the central pair after each slice.
///
/// Drives are sampled at slice midpoints, so any slice count that is a
/// multiple of the pulse segment count reproduces the step function exactly.
pub fn propagate_spinstar<E1, E2>(
    ops: &SpinStarOperators,
    eps1: &E1,
    eps2: &E2,
    horizon: f64,
    initial: &PureState,
    slices: usize,
) -> Result<ReducedTrajectory>
where
    E1: ControlField + ?Sized,
    E2: ControlField + ?Sized,
{
    let dt = check_slices(horizon, slices)?;
    if initial.dim() != ops.h0.nrows() {
        return Err(Error::DimensionMismatch {
            expected: ops.h0.nrows(),
            found: initial.dim(),
        });
    }
    let mut prop = SegmentPropagator::new(&ops.h0, &ops.hc1, &ops.hc2, dt);
    let mut psi = initial.amplitudes().clone();
    let mut times = vec![0.0];
    let mut states = vec![reduce_pure(initial, &[0, 1])?];
    let mut norm_drift: f64 = 0.0;
    for k in 0..slices {
        let mid = (k as f64 + 0.5) * dt;
        let u = prop.get(eps1.amplitude(mid), eps2.amplitude(mid))?;
        psi = u * psi;
        let norm = psi.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("state amplitudes".into()));
        }
        norm_drift = norm_drift.max((norm - 1.0).abs());
        // reduce the renormalized copy; the propagated vector itself is untouched
        let snapshot = PureState::new(&psi / C64::from(norm))?;
        times.push((k + 1) as f64 * dt);
        states.push(reduce_pure(&snapshot, &[0, 1])?);
    }
    Ok(ReducedTrajectory {
        times,
        states,
        norm_drift,
    })
}

pub fn concurrence_trajectory(trajectory: &ReducedTrajectory) -> Result<Vec<f64>> {
    trajectory.states.iter().map(crate::quantum::concurrence).collect()
}

/// Sparse matrix as unordered `(row, col, value)` entries.
#[derive(Debug, Clone, Default, PartialEq)]
struct Triplets {
    entries: Vec<(usize, usize, C64)>,
    one_norm: f64,
}

impl Triplets {
    fn from_dense(m: &ComplexMatrix) -> Self {
        let mut t = Self::default();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                if m[(r, c)] != ZERO {
                    t.entries.push((r, c, m[(r, c)]));
                }
            }
        }
        t.one_norm = (0..m.ncols()).map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max);
        t
    }

    /// Overwrites `self` with `Σ wᵢ partsᵢ`; the stored norm is the triangle bound.
    fn combine(&mut self, parts: &[Triplets], weights: [f64; 3]) {
        self.entries.clear();
        self.one_norm = 0.0;
        for (part, w) in parts.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            self.entries.extend(part.entries.iter().map(|&(r, c, v)| (r, c, v * w)));
            self.one_norm += w.abs() * part.one_norm;
        }
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.fill(ZERO);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }
}

/// Scratch space for `ψ ← exp(−iHΔt)ψ` by a Taylor series on substeps of
/// `‖H‖₁τ ≤ 1`, summed until the terms drop below double precision.
struct TaylorWork {
    term: Vec<C64>,
    next: Vec<C64>,
}

impl TaylorWork {
    const MAX_TERMS: usize = 40;

    fn new(dim: usize) -> Self {
        Self {
            term: vec![ZERO; dim],
            next: vec![ZERO; dim],
        }
    }

    fn apply_exp(&mut self, h: &Triplets, dt: f64, psi: &mut [C64]) {
        let substeps = (h.one_norm * dt.abs()).ceil().max(1.0) as usize;
        let tau = dt / substeps as f64;
        for _ in 0..substeps {
            self.term.copy_from_slice(psi);
            let scale = psi.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max).sqrt();
            for k in 1..=Self::MAX_TERMS {
                h.apply(&self.term, &mut self.next);
                let factor = C64::new(0.0, -tau / k as f64);
                let mut largest: f64 = 0.0;
                for (t, (n, p)) in self.term.iter_mut().zip(self.next.iter().zip(psi.iter_mut())) {
                    *t = *n * factor;
                    *p += *t;
                    largest = largest.max(t.norm_sqr());
                }
                if largest.sqrt() <= 1e-17 * scale {
                    break;
                }
            }
        }
    }
}

/// The spin star restricted to the symmetric environment multiplet.
///
/// Basis index `c·(N − 1) + k`, where `c` is the central-pair basis index
/// (qubit ordering of [`crate::quantum`]) and `k = j − m` labels the Dicke
/// state `|j, m⟩` of the environment; `k = 0` is `|0…0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveSpinStar {
    params: SpinStarParams,
    env_states: usize,
    h0: ComplexMatrix,
    hc1: ComplexMatrix,
    hc2: ComplexMatrix,
    sparse: [Triplets; 3],
}

impl CollectiveSpinStar {
    pub fn new(params: &SpinStarParams) -> Result<Self> {
        params.validate()?;
        let env_states = params.n_total - 1;
        let dim = 4 * env_states;
        let j = params.n_env() as f64 / 2.0;
        let a = params.coupling;
        let idx = |c: usize, k: usize| c * env_states + k;
        let mut h0 = ComplexMatrix::zeros(dim, dim);
        let mut hc1 = ComplexMatrix::zeros(dim, dim);
        let mut hc2 = ComplexMatrix::zeros(dim, dim);
        for c in 0..4 {
            // central bits: site 0 is the high bit
            for (site, mask) in [(0usize, 0b10usize), (1, 0b01)] {
                let up = c & mask == 0;
                let z = if up { 1.0 } else { -1.0 };
                for k in 0..env_states {
                    let m = j - k as f64;
                    h0[(idx(c, k), idx(c, k))] += 0.5 * params.omega0 * z + a * z * 2.0 * m;
                    if up {
                        // σ₋ S₊: central 0 → 1, m → m + 1
                        if k > 0 {
                            let amp = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
                            h0[(idx(c ^ mask, k - 1), idx(c, k))] += 2.0 * a * amp;
                        }
                    } else if k + 1 < env_states {
                        // σ₊ S₋: central 1 → 0, m → m − 1
                        let amp = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
                        h0[(idx(c ^ mask, k + 1), idx(c, k))] += 2.0 * a * amp;
                    }
                    let y = if up { I } else { -I };
                    let target = if site == 0 { &mut hc1 } else { &mut hc2 };
                    target[(idx(c ^ mask, k), idx(c, k))] = y;
                }
            }
        }
        let sparse = [Triplets::from_dense(&h0), Triplets::from_dense(&hc1), Triplets::from_dense(&hc2)];
        Ok(Self {
            params: *params,
            env_states,
            h0,
            hc1,
            hc2,
            sparse,
        })
    }

    pub fn params(&self) -> &SpinStarParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn h0(&self) -> &ComplexMatrix {
        &self.h0
    }

    pub fn controls(&self) -> (&ComplexMatrix, &ComplexMatrix) {
        (&self.hc1, &self.hc2)
    }

    /// `central ⊗ |j, j⟩`.
    pub fn embed(&self, central: &PureState) -> Result<ComplexVector> {
        if central.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: central.dim(),
            });
        }
        let mut psi = DVector::from_element(self.dim(), ZERO);
        for c in 0..4 {
            psi[c * self.env_states] = central.amplitudes()[c];
        }
        Ok(psi)
    }

    /// Central-pair state of a collective-basis vector (unit norm assumed).
    pub fn reduce(&self, psi: &ComplexVector) -> Result<DensityMatrix> {
        let n = self.env_states;
        let m = ComplexMatrix::from_fn(4, 4, |a, b| (0..n).map(|k| psi[a * n + k] * psi[b * n + k].conj()).sum());
        DensityMatrix::new(m)
    }

    fn evolve<E1, E2, V>(
        &self,
        eps1: &E1,
        eps2: &E2,
        horizon: f64,
        central: &PureState,
        slices: usize,
        mut visit: V,
    ) -> Result<ComplexVector>
    where
        E1: ControlField + ?Sized,
        E2: ControlField + ?Sized,
        V: FnMut(usize, &ComplexVector) -> Result<()>,
    {
        let dt = check_slices(horizon, slices)?;
        let mut psi = self.embed(central)?;
        let mut work = TaylorWork::new(self.dim());
        let mut h = Triplets::default();
        let mut current = None;
        for k in 0..slices {
            let mid = (k as f64 + 0.5) * dt;
            let (e1, e2) = (eps1.amplitude(mid), eps2.amplitude(mid));
            if !(e1.is_finite() && e2.is_finite()) {
                return Err(Error::NonFinite(format!("drive amplitudes ({e1}, {e2})")));
            }
            if current != Some((e1, e2)) {
                h.combine(&self.sparse, [1.0, e1, e2]);
                current = Some((e1, e2));
            }
            work.apply_exp(&h, dt, psi.as_mut_slice());
            visit(k + 1, &psi)?;
        }
        Ok(psi)
    }

    /// Same contract as [`propagate_spinstar`] with the environment in `|0…0⟩`.
    pub fn propagate<E1, E2>(
        &self,
        eps1: &E1,
        eps2: &E2,
        horizon: f64,
        central: &PureState,
        slices: usize,
    ) -> Result<ReducedTrajectory>
    where
        E1: ControlField + ?Sized,
        E2: ControlField + ?Sized,
    {
        let dt = check_slices(horizon, slices)?;
        let mut times = vec![0.0];
        let mut states = vec![self.reduce(&self.embed(central)?)?];
        let mut norm_drift: f64 = 0.0;
        self.evolve(eps1, eps2, horizon, central, slices, |k, psi| {
            let norm = psi.norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite("state amplitudes".into()));
            }
            norm_drift = norm_drift.max((norm - 1.0).abs());
            times.push(k as f64 * dt);
            states.push(self.reduce(&(psi / C64::from(norm)))?);
            Ok(())
        })?;
        Ok(ReducedTrajectory {
            times,
            states,
            norm_drift,
        })
    }

    /// Central-pair state at `horizon` only.
    pub fn final_state<E1, E2>(
        &self,
        eps1: &E1,
        eps2: &E2,
        horizon: f64,
        central: &PureState,
        slices: usize,
    ) -> Result<DensityMatrix>
    where
        E1: ControlField + ?Sized,
        E2: ControlField + ?Sized,
    {
        let psi = self.evolve(eps1, eps2, horizon, central, slices, |_, _| Ok(()))?;
        let norm = psi.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite("state amplitudes".into()));
        }
        self.reduce(&(psi / C64::from(norm)))
    }
}

/// `|00⟩` on the central pair.
pub fn default_central_state() -> PureState {
    PureState::basis(2, 0).expect("two-qubit basis state")
}
