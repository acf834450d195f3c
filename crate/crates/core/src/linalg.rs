//! Small dense complex linear algebra for one- and two-qubit systems.
//!
//! Everything in this module is exact double-precision arithmetic on 2x2 and
//! 4x4 matrices: Pauli operators, axis-angle rotations and their two-qubit
//! Kronecker products, Bell states in arbitrary measurement frames, density
//! matrices and their depolarized mixtures, and the von Neumann entropy used
//! to confirm that entanglement survives a joint rotation.
//!
//! Basis conventions are fixed once here and relied on everywhere else:
//! two-qubit amplitudes are ordered |00>, |01>, |10>, |11>, and Bell-basis
//! quantities are ordered Phi+, Phi-, Psi+, Psi-.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Double-precision complex scalar used throughout the crate.
pub type C64 = Complex64;

const I1: C64 = C64::new(0.0, 1.0);

/// Errors from constructing or validating linear-algebra values.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("unsupported matrix dimension {0}; only 2 and 4 are allowed")]
    BadDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("rotation axis has norm {0}, expected a unit vector")]
    NonUnitAxis(f64),
    #[error("matrix is not unitary (max |U†U - I| = {0:.3e})")]
    NotUnitary(f64),
    #[error("matrix is not Hermitian (max |A - A†| = {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("negative eigenvalue {0:.3e} below tolerance")]
    NegativeEigenvalue(f64),
    #[error("state vector norm² is {0}, expected 1")]
    NotNormalized(f64),
    #[error("mixing fraction {0} outside [0, 1]")]
    BadMixingFraction(f64),
}

/// One of the three Cartesian axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// All three axes in x, y, z order.
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Index into 3-vectors: x -> 0, y -> 1, z -> 2.
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// The four Bell states, in the fixed Phi+, Phi-, Psi+, Psi- order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    /// All four kinds in canonical order.
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    /// Canonical index: Phi+ -> 0, Phi- -> 1, Psi+ -> 2, Psi- -> 3.
    pub fn index(self) -> usize {
        match self {
            BellKind::PhiPlus => 0,
            BellKind::PhiMinus => 1,
            BellKind::PsiPlus => 2,
            BellKind::PsiMinus => 3,
        }
    }

    /// Short human-readable label ("phi+", "psi-", ...).
    pub fn label(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi+",
            BellKind::PhiMinus => "phi-",
            BellKind::PsiPlus => "psi+",
            BellKind::PsiMinus => "psi-",
        }
    }
}

impl std::fmt::Display for BellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for BellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "phi+" | "phi_plus" | "phiplus" => Ok(BellKind::PhiPlus),
            "phi-" | "phi_minus" | "phiminus" => Ok(BellKind::PhiMinus),
            "psi+" | "psi_plus" | "psiplus" => Ok(BellKind::PsiPlus),
            "psi-" | "psi_minus" | "psiminus" => Ok(BellKind::PsiMinus),
            other => Err(format!(
                "unknown Bell state '{other}' (expected phi+, phi-, psi+ or psi-)"
            )),
        }
    }
}

/// Dense square complex matrix of dimension 2 or 4, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Zero matrix of the given dimension (2 or 4).
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "dimension must be 2 or 4, got {dim}");
        ComplexMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a row-major slice of `dim * dim` entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim²");
        let mut m = Self::zeros(dim);
        m.data.copy_from_slice(entries);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix product");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    /// Kronecker product `self ⊗ rhs` (2x2 ⊗ 2x2 -> 4x4).
    pub fn kron(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, 2, "kron is only provided for 2x2 factors");
        assert_eq!(rhs.dim, 2, "kron is only provided for 2x2 factors");
        let mut out = ComplexMatrix::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[(2 * i + k, 2 * j + l)] = self[(i, j)] * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Entrywise sum `self + rhs`.
    pub fn add(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim);
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(&rhs.data) {
            *o += r;
        }
        out
    }

    /// Entrywise scale `c · self`.
    pub fn scale(&self, c: C64) -> ComplexMatrix {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= c;
        }
        out
    }

    /// Apply to a state vector: `self · v`.
    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert_eq!(self.dim, v.dim(), "dimension mismatch in apply");
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                out[i] += self[(i, j)] * v.amplitudes()[j];
            }
        }
        StateVector::from_amplitudes(out)
    }

    /// Largest entrywise absolute difference to `rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Deviation from unitarity: max |U†U - I|.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint()
            .mul(self)
            .max_abs_diff(&ComplexMatrix::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// Deviation from Hermiticity: max |A - A†|.
    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    ///
    /// 2x2 matrices use the closed form; 4x4 matrices use cyclic Jacobi
    /// sweeps, which converge to machine precision in a handful of passes for
    /// these dimensions.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            2 => {
                let a = self[(0, 0)].re;
                let c = self[(1, 1)].re;
                let b = self[(0, 1)];
                let mid = 0.5 * (a + c);
                let rad = (0.25 * (a - c) * (a - c) + b.norm_sqr()).sqrt();
                vec![mid - rad, mid + rad]
            }
            _ => jacobi_eigenvalues(self),
        }
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.dim;
    let mut a = m.clone();
    for _sweep in 0..60 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() < 1e-300 {
                    continue;
                }
                // Unitary 2x2 rotation zeroing the (p, q) element.
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let abs = apq.norm();
                let phase = apq / abs;
                let tau = (aqq - app) / (2.0 * abs);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns, then rows: A <- J† A J with J the Givens rotation.
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * phase.conj() * akq;
                    a[(k, q)] = s * phase * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * phase * aqk;
                    a[(q, k)] = s * phase.conj() * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

/// Pure quantum state of one or two qubits; amplitudes in the fixed basis
/// order (|0>, |1> or |00>, |01>, |10>, |11>).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wrap raw amplitudes without normalizing.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        assert!(
            amplitudes.len() == 2 || amplitudes.len() == 4,
            "state dimension must be 2 or 4"
        );
        StateVector { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Checks Σ|amplitude|² = 1 within `tol`.
    pub fn check_normalized(&self, tol: f64) -> Result<(), LinalgError> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() <= tol {
            Ok(())
        } else {
            Err(LinalgError::NotNormalized(n))
        }
    }

    /// Inner product `<self|rhs>`.
    pub fn inner(&self, rhs: &StateVector) -> C64 {
        assert_eq!(self.dim(), rhs.dim());
        self.amplitudes
            .iter()
            .zip(&rhs.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Rank-one projector |self><self| as a matrix.
    pub fn outer(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        m
    }
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validate and wrap a matrix: Hermitian within 1e-12, trace 1 within
    /// 1e-12, eigenvalues ≥ -1e-10.
    pub fn try_new(matrix: ComplexMatrix) -> Result<Self, LinalgError> {
        let herm = matrix.hermiticity_defect();
        if herm > 1e-12 {
            return Err(LinalgError::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(LinalgError::BadTrace(tr.re));
        }
        let min_eig = matrix
            .hermitian_eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(LinalgError::NegativeEigenvalue(min_eig));
        }
        Ok(DensityMatrix { matrix })
    }

    /// Projector onto a normalized pure state.
    pub fn pure(state: &StateVector) -> Self {
        DensityMatrix {
            matrix: state.outer(),
        }
    }

    /// Maximally mixed state I/dim.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: ComplexMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Purity tr(ρ²); 1 for pure states, 1/dim for the maximally mixed state.
    pub fn purity(&self) -> f64 {
        self.matrix.mul(&self.matrix).trace().re
    }
}

/// Rotation given as a unit axis and an angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    axis: [f64; 3],
    angle: f64,
}

impl AxisAngle {
    /// Build from an axis and angle; the axis must be unit within 1e-9.
    pub fn new(axis: [f64; 3], angle: f64) -> Result<Self, LinalgError> {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(LinalgError::NonUnitAxis(norm));
        }
        Ok(AxisAngle { axis, angle })
    }

    /// Rotation about a Cartesian axis.
    pub fn about(axis: Axis, angle: f64) -> Self {
        let mut k = [0.0; 3];
        k[axis.index()] = 1.0;
        AxisAngle { axis: k, angle }
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

/// The estimand: Euler-angle errors (roll θx, pitch θy, heading θz) in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RotationVector {
    pub const ZERO: RotationVector = RotationVector {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        RotationVector { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        RotationVector::new(a[0], a[1], a[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn component(&self, axis: Axis) -> f64 {
        self.as_array()[axis.index()]
    }

    /// Euclidean norm of the three components.
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Interpret the vector as a single axis-angle rotation: angle = ‖θ‖,
    /// axis = θ/‖θ‖. Norms below 1e-12 map to the identity rotation.
    pub fn to_axis_angle(&self) -> AxisAngle {
        let n = self.norm();
        if n < 1e-12 {
            AxisAngle {
                axis: [0.0, 0.0, 1.0],
                angle: 0.0,
            }
        } else {
            AxisAngle {
                axis: [self.x / n, self.y / n, self.z / n],
                angle: n,
            }
        }
    }
}

/// The Pauli matrix for the given axis.
pub fn pauli(axis: Axis) -> ComplexMatrix {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let rows = match axis {
        Axis::X => [zero, one, one, zero],
        Axis::Y => [zero, -I1, I1, zero],
        Axis::Z => [one, zero, zero, -one],
    };
    ComplexMatrix::from_rows(2, &rows)
}

/// Single-qubit rotation about a Cartesian axis:
/// cos(θ/2)·I - i·sin(θ/2)·σ_axis.
pub fn rotation_single(axis: Axis, theta: f64) -> ComplexMatrix {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let mut m = pauli(axis).scale(-I1 * s);
    for i in 0..2 {
        m[(i, i)] += C64::new(c, 0.0);
    }
    m
}

/// Single-qubit rotation about an arbitrary unit axis:
/// cos(θ/2)·I - i·sin(θ/2)·(k·σ).
pub fn rotation_axis_angle(aa: &AxisAngle) -> ComplexMatrix {
    let c = (aa.angle / 2.0).cos();
    let s = (aa.angle / 2.0).sin();
    let [kx, ky, kz] = aa.axis;
    // Explicit entries of cos(θ/2) I - i sin(θ/2) (k·σ).
    ComplexMatrix::from_rows(
        2,
        &[
            C64::new(c, -s * kz),
            C64::new(-s * ky, -s * kx),
            C64::new(s * ky, -s * kx),
            C64::new(c, s * kz),
        ],
    )
}

/// Two-qubit rotation applying the same single-qubit rotation to both
/// subsystems: R(θ) ⊗ R(θ).
pub fn joint_rotation(aa: &AxisAngle) -> ComplexMatrix {
    let r = rotation_axis_angle(aa);
    r.kron(&r)
}

/// A Bell state constructed in the measurement frame given by the unitary
/// `frame`: (U ⊗ U)|kind>_z.
///
/// With `frame = I` this is the usual z-basis Bell state.
pub fn bell_state(kind: BellKind, frame: &ComplexMatrix) -> Result<StateVector, LinalgError> {
    if frame.dim() != 2 {
        return Err(LinalgError::BadDimension(frame.dim()));
    }
    let defect = frame.unitarity_defect();
    if defect > 1e-9 {
        return Err(LinalgError::NotUnitary(defect));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = C64::new(0.0, 0.0);
    let p = C64::new(h, 0.0);
    let m = C64::new(-h, 0.0);
    let amps = match kind {
        BellKind::PhiPlus => [p, zero, zero, p],
        BellKind::PhiMinus => [p, zero, zero, m],
        BellKind::PsiPlus => [zero, p, p, zero],
        BellKind::PsiMinus => [zero, p, m, zero],
    };
    let base = StateVector::from_amplitudes(amps.to_vec());
    Ok(frame.kron(frame).apply(&base))
}

/// Convex mixture with the maximally mixed state: (1-α)·ρ + α·I/dim.
pub fn mix_with_identity(rho: &DensityMatrix, alpha: f64) -> Result<DensityMatrix, LinalgError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LinalgError::BadMixingFraction(alpha));
    }
    let dim = rho.dim();
    let mixed = rho
        .matrix()
        .scale(C64::new(1.0 - alpha, 0.0))
        .add(&ComplexMatrix::identity(dim).scale(C64::new(alpha / dim as f64, 0.0)));
    Ok(DensityMatrix { matrix: mixed })
}

/// Von Neumann entropy (base-2) of the partial trace of a two-qubit pure
/// state over the second qubit; 1 for maximally entangled states, 0 for
/// product states.
///
/// Eigenvalues below 1e-14 are treated as exact zeros so 0·log(0) = 0.
pub fn entanglement_entropy(psi: &StateVector) -> f64 {
    assert_eq!(psi.dim(), 4, "entanglement entropy is for two-qubit states");
    let a = psi.amplitudes();
    // Reduced density matrix of the first qubit: ρ_A[i][j] = Σ_b a[2i+b] a*[2j+b].
    let mut rho = ComplexMatrix::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            for b in 0..2 {
                rho[(i, j)] += a[2 * i + b] * a[2 * j + b].conj();
            }
        }
    }
    rho.hermitian_eigenvalues()
        .into_iter()
        .map(|lambda| {
            if lambda < 1e-14 {
                0.0
            } else {
                -lambda * lambda.log2()
            }
        })
        .sum()
}

/// Overlap probability of two density matrices: tr(ρ_a ρ_b), clamped to
/// [0, 1]. For a projector ρ_a = |Z><Z| this is the Born-rule probability of
/// outcome Z on the state ρ_b.
pub fn trace_probability(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64, LinalgError> {
    if rho_a.dim() != rho_b.dim() {
        return Err(LinalgError::DimensionMismatch(rho_a.dim(), rho_b.dim()));
    }
    let p = rho_a.matrix().mul(rho_b.matrix()).trace().re;
    Ok(p.clamp(0.0, 1.0))
}
