//! Dense complex linear algebra for few-qubit states.
//!
//! Qubit ordering: qubit 0 is the leftmost tensor factor, i.e. the most
//! significant bit of a basis index. For two qubits the basis is
//! `|00⟩, |01⟩, |10⟩, |11⟩` at indices 0..4. [`partial_trace`] and
//! [`pauli_on_site`] both follow this convention.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Hermiticity, unit-trace and positivity tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-10;
/// Norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Largest entry of `|m - m†|`.
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn require_hermitian(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let dev = hermiticity_deviation(m);
    if dev > STATE_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotQubitDimension(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// A validated density matrix on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity (all within [`STATE_TOL`]).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let n_qubits = qubit_count(matrix.nrows())?;
        require_hermitian(&matrix)?;
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::TraceNotUnit(trace.re));
        }
        let min_eig = hermitian_eigenvalues(&matrix)[0];
        if min_eig < -STATE_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { n_qubits, matrix })
    }

    pub fn from_pure(state: &PureState) -> Self {
        let psi = &state.amplitudes;
        Self {
            n_qubits: state.n_qubits,
            matrix: psi * psi.adjoint(),
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            matrix: ComplexMatrix::identity(dim, dim) / C64::from(dim as f64),
        }
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Self {
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let n_qubits = qubit_count(amplitudes.len())?;
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sq.sqrt()));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized(norm));
        }
        Self::new(amplitudes / C64::from(norm))
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = ComplexVector::zeros(dim);
        amps[index] = ONE;
        Ok(Self { n_qubits, amplitudes: amps })
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn bell_phi_plus() -> Self {
        let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        Self {
            n_qubits: 2,
            amplitudes: ComplexVector::from_vec(vec![h, ZERO, ZERO, h]),
        }
    }

    pub fn tensor(&self, other: &PureState) -> Self {
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }
}

#[inline]
fn bit(index: usize, qubit: usize, n_qubits: usize) -> usize {
    (index >> (n_qubits - 1 - qubit)) & 1
}

/// Table `full[a * d_traced + t]` giving the full basis index for kept index
/// `a` (bits in `keep` order) and traced index `t` (remaining qubits, ascending).
fn index_table(n_qubits: usize, keep: &[usize]) -> Result<(Vec<usize>, usize, usize)> {
    let mut seen = vec![false; n_qubits];
    for &q in keep {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        if seen[q] {
            return Err(Error::DuplicateQubit(q));
        }
        seen[q] = true;
    }
    let traced: Vec<usize> = (0..n_qubits).filter(|q| !seen[*q]).collect();
    let d_keep = 1usize << keep.len();
    let d_traced = 1usize << traced.len();
    let mut table = vec![0usize; d_keep * d_traced];
    for a in 0..d_keep {
        for t in 0..d_traced {
            let mut full = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                full |= bit(a, j, keep.len()) << (n_qubits - 1 - q);
            }
            for (j, &q) in traced.iter().enumerate() {
                full |= bit(t, j, traced.len()) << (n_qubits - 1 - q);
            }
            table[a * d_traced + t] = full;
        }
    }
    Ok((table, d_keep, d_traced))
}

/// Reduced state on the qubits in `keep`, ordered as listed.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let (table, d_keep, d_traced) = index_table(rho.n_qubits, keep)?;
    let m = &rho.matrix;
    let reduced = ComplexMatrix::from_fn(d_keep, d_keep, |a, b| {
        (0..d_traced)
            .map(|t| m[(table[a * d_traced + t], table[b * d_traced + t])])
            .sum()
    });
    DensityMatrix::new(reduced)
}

/// Reduced state of a pure state, without forming the full projector.
pub fn reduce_pure(state: &PureState, keep: &[usize]) -> Result<DensityMatrix> {
    let (table, d_keep, d_traced) = index_table(state.n_qubits, keep)?;
    let psi = &state.amplitudes;
    let reduced = ComplexMatrix::from_fn(d_keep, d_keep, |a, b| {
        (0..d_traced)
            .map(|t| psi[table[a * d_traced + t]] * psi[table[b * d_traced + t]].conj())
            .sum()
    });
    DensityMatrix::new(reduced)
}

/// `½ tr|ρ₁ − ρ₂|`, from the eigenvalues of the Hermitian difference.
pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho1.dim(),
            found: rho2.dim(),
        });
    }
    let diff = &rho1.matrix - &rho2.matrix;
    let sum: f64 = SymmetricEigen::new(diff).eigenvalues.iter().map(|e| e.abs()).sum();
    Ok((0.5 * sum).clamp(0.0, 1.0))
}

/// `σ_y ⊗ σ_y`: real, ±1 on the anti-diagonal.
fn spin_flip_matrix() -> ComplexMatrix {
    const SIGN: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
    ComplexMatrix::from_fn(4, 4, |i, j| if i + j == 3 { C64::from(SIGN[i]) } else { ZERO })
}

/// Wootters concurrence of a two-qubit state.
///
/// The square roots of the eigenvalues of `R = ρ (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)` are
/// the singular values of `Ψᵀ (σ_y⊗σ_y) Ψ` for any factorization `ρ = ΨΨ†`;
/// taking them from an SVD avoids square roots of near-zero eigenvalues.
/// They are sorted in descending order before `√λ₁ − √λ₂ − √λ₃ − √λ₄`, and
/// the result is clamped to `[0, 1]`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let eig = SymmetricEigen::new(rho.matrix.clone());
    let mut psi = eig.eigenvectors;
    for (k, &p) in eig.eigenvalues.iter().enumerate() {
        // eigenvalues within -STATE_TOL are noise
        psi.column_mut(k).scale_mut(p.max(0.0).sqrt());
    }
    let tau = psi.transpose() * spin_flip_matrix() * &psi;
    let mut roots: Vec<f64> = tau.svd(false, false).singular_values.iter().copied().collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok((roots[0] - roots[1] - roots[2] - roots[3]).clamp(0.0, 1.0))
}

/// `⟨ψ|ρ|ψ⟩`, the overlap of a (possibly mixed) state with a pure target.
pub fn state_fidelity(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: target.dim(),
        });
    }
    let psi = &target.amplitudes;
    let value = (psi.adjoint() * &rho.matrix * psi)[(0, 0)].re;
    Ok(value.clamp(0.0, 1.0))
}

/// Propagator `exp(−i h dt)` of a Hermitian generator, via eigendecomposition.
pub fn hermitian_expm(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    require_hermitian(h)?;
    if !dt.is_finite() {
        return Err(Error::NonFinite("propagator time step".into()));
    }
    let eig = SymmetricEigen::new(h.clone());
    let phases = DVector::from_iterator(
        h.nrows(),
        eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * dt)),
    );
    let v = &eig.eigenvectors;
    Ok(v * ComplexMatrix::from_diagonal(&phases) * v.adjoint())
}

pub fn pauli(axis: Axis) -> ComplexMatrix {
    match axis {
        Axis::X => ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Axis::Y => ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        Axis::Z => ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

/// `I ⊗ … ⊗ σ_axis ⊗ … ⊗ I` with the Pauli matrix on `site`.
pub fn pauli_on_site(axis: Axis, site: usize, n_qubits: usize) -> Result<ComplexMatrix> {
    if site >= n_qubits {
        return Err(Error::QubitOutOfRange {
            index: site,
            n_qubits,
        });
    }
    let dim = 1usize << n_qubits;
    let mask = 1usize << (n_qubits - 1 - site);
    let mut m = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let up = col & mask == 0;
        match axis {
            Axis::X => m[(col ^ mask, col)] = ONE,
            Axis::Y => m[(col ^ mask, col)] = if up { I } else { -I },
            Axis::Z => m[(col, col)] = if up { ONE } else { -ONE },
        }
    }
    Ok(m)
}
