//! Bell-measurement outcome probabilities as a function of the prepared
//! state, the applied rotation, the measurement axis, and depolarizing
//! mixing.
//!
//! A Bell pair prepared in the z-basis is rotated by `R(θ) ⊗ R(θ)` and then
//! measured in the Bell basis built along an arbitrary direction `(Θ, Λ)` on
//! the sphere. The resulting four-outcome distribution is what both the
//! sphere maps and the particle-filter likelihood consume.
//!
//! Two evaluation routes are provided. [`outcome_distribution`] works with
//! single-qubit 2x2 algebra: the frame change and the rotation collapse into
//! one SU(2) matrix `M = U†R`, and each Bell amplitude is a trace of
//! `M·V·Mᵀ` against a Bell-basis matrix. [`outcome_distribution_dense`]
//! builds the 4x4 density matrix explicitly and traces it against the
//! measurement projectors; it is the slower, definition-shaped route used to
//! cross-check the first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    bell_state, joint_rotation, mix_with_identity, rotation_single, Axis, AxisAngle, BellKind,
    ComplexMatrix, DensityMatrix, LinalgError, RotationVector, C64,
};
use crate::optim::nelder_mead;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Measurement axis (Θ, Λ) used for Φ⁺ preparations: one of the four axes
/// where the three reachable Bell outcomes are exactly equally likely.
///
/// Kept verbatim at the tabulated 8-digit coordinates (numerically
/// Θ = arctan √2, Λ = π/4) so file outputs and the schedule quote the same
/// literals everywhere.
#[allow(clippy::approx_constant)]
pub const PHI_PLUS_AXIS: (f64, f64) = (0.95531662, 0.78539816);

/// Measurement axis (Θ, Λ) used for Φ⁻ preparations; see [`PHI_PLUS_AXIS`].
#[allow(clippy::approx_constant)]
pub const PHI_MINUS_AXIS: (f64, f64) = (0.61547971, 0.78539816);

/// Errors from the measurement model.
#[derive(Debug, Error)]
pub enum BellError {
    #[error("theta {0} outside [0, π]")]
    ThetaOutOfRange(f64),
    #[error("lambda {0} outside [0, 2π)")]
    LambdaOutOfRange(f64),
    #[error("probability {0:.3e} below -1e-10; measurement model is inconsistent")]
    NegativeProbability(f64),
    #[error("outcome probabilities sum to {0}, expected 1 within 1e-10")]
    BadNormalization(f64),
    #[error("equal-probability search is defined for phi+ and phi- only, got {0}")]
    UnsupportedInitialState(BellKind),
    #[error("no axis reached probability variance below 1e-18")]
    NoEqualProbabilityAxes,
    #[error("grid must have at least 2 points per dimension, got {0}x{1}")]
    GridTooSmall(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The two sphere angles (Θ, Λ) selecting a Bell-measurement basis:
/// Θ in [0, π], Λ in [0, 2π).
///
/// The measurement frame is U = R_z(Θ)·R_y(Λ), so Θ turns the basis around
/// the z-axis while Λ opens it away from z; the measured spin direction is
/// n = (sinΛ cosΘ, sinΛ sinΘ, cosΛ). This angle-to-rotation assignment is
/// the one under which the tabulated equal-probability points
/// [`PHI_PLUS_AXIS`] and [`PHI_MINUS_AXIS`] come out exactly equal, and it
/// is what all (Θ, Λ)-labelled outputs of this crate mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAxis {
    theta: f64,
    lambda: f64,
}

impl MeasurementAxis {
    pub fn new(theta: f64, lambda: f64) -> Result<Self, BellError> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(BellError::ThetaOutOfRange(theta));
        }
        if !(0.0..2.0 * std::f64::consts::PI).contains(&lambda) {
            return Err(BellError::LambdaOutOfRange(lambda));
        }
        Ok(MeasurementAxis { theta, lambda })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Unit vector (sinΛ cosΘ, sinΛ sinΘ, cosΛ) whose ±1 spin eigenstates
    /// the frame diagonalizes.
    pub fn direction(&self) -> [f64; 3] {
        let (sl, cl) = (self.lambda.sin(), self.lambda.cos());
        let (st, ct) = (self.theta.sin(), self.theta.cos());
        [sl * ct, sl * st, cl]
    }
}

/// Probabilities of the four Bell outcomes, in Φ⁺, Φ⁻, Ψ⁺, Ψ⁻ order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    p: [f64; 4],
}

impl OutcomeDistribution {
    /// Validate probabilities: each in [0, 1], summing to 1 within 1e-10.
    pub fn new(p: [f64; 4]) -> Result<Self, BellError> {
        for &v in &p {
            if v < -1e-10 {
                return Err(BellError::NegativeProbability(v));
            }
            if !(0.0..=1.0 + 1e-10).contains(&v.max(0.0)) {
                return Err(BellError::BadNormalization(v));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(BellError::BadNormalization(sum));
        }
        Ok(OutcomeDistribution {
            p: p.map(|v| v.clamp(0.0, 1.0)),
        })
    }

    pub fn p_phi_plus(&self) -> f64 {
        self.p[0]
    }

    pub fn p_phi_minus(&self) -> f64 {
        self.p[1]
    }

    pub fn p_psi_plus(&self) -> f64 {
        self.p[2]
    }

    pub fn p_psi_minus(&self) -> f64 {
        self.p[3]
    }

    pub fn get(&self, kind: BellKind) -> f64 {
        self.p[kind.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.p
    }

    /// Map a uniform draw in [0, 1) to an outcome by inverting the cumulative
    /// distribution. Outcomes with probability exactly zero are never
    /// returned.
    pub fn sample(&self, u: f64) -> BellKind {
        let mut cum = 0.0;
        let mut last_positive = BellKind::PhiPlus;
        for kind in BellKind::ALL {
            let p = self.p[kind.index()];
            if p > 0.0 {
                last_positive = kind;
                cum += p;
                if u < cum {
                    return kind;
                }
            }
        }
        last_positive
    }
}

// --- fast 2x2 path ---------------------------------------------------------

type M2 = [[C64; 2]; 2];

const M2_ZERO: C64 = Complex64::new(0.0, 0.0);

fn m2_mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[M2_ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn m2_mul_transpose(a: &M2, b: &M2) -> M2 {
    // a · bᵀ
    let mut out = [[M2_ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[j][0] + a[i][1] * b[j][1];
        }
    }
    out
}

fn m2_det(a: &M2) -> C64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Closed-form single-qubit rotation cos(θ/2)I - i sin(θ/2)(k·σ) for the
/// axis-angle reading of a rotation vector, on the stack.
fn rotation_m2(rot: &RotationVector) -> M2 {
    let n = rot.norm();
    if n < 1e-12 {
        return [
            [Complex64::new(1.0, 0.0), M2_ZERO],
            [M2_ZERO, Complex64::new(1.0, 0.0)],
        ];
    }
    let (kx, ky, kz) = (rot.x / n, rot.y / n, rot.z / n);
    let c = (n / 2.0).cos();
    let s = (n / 2.0).sin();
    [
        [C64::new(c, -s * kz), C64::new(-s * ky, -s * kx)],
        [C64::new(s * ky, -s * kx), C64::new(c, s * kz)],
    ]
}

/// Measurement frame U = R_z(Θ)·R_y(Λ) as a stack matrix.
fn frame_m2(theta: f64, lambda: f64) -> M2 {
    let cl = (lambda / 2.0).cos();
    let sl = (lambda / 2.0).sin();
    let zl = C64::from_polar(1.0, -theta / 2.0);
    let zr = C64::from_polar(1.0, theta / 2.0);
    [[zl * cl, zl * -sl], [zr * sl, zr * cl]]
}

fn m2_adjoint(a: &M2) -> M2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

/// Bell state as a 2x2 amplitude matrix (|ij> amplitude at entry (i, j)),
/// including the 1/√2 normalization.
fn bell_m2(kind: BellKind) -> M2 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    match kind {
        BellKind::PhiPlus => [[h, M2_ZERO], [M2_ZERO, h]],
        BellKind::PhiMinus => [[h, M2_ZERO], [M2_ZERO, -h]],
        BellKind::PsiPlus => [[M2_ZERO, h], [h, M2_ZERO]],
        BellKind::PsiMinus => [[M2_ZERO, h], [-h, M2_ZERO]],
    }
}

/// A prepared Bell state together with a fixed measurement frame.
///
/// Precomputes the adjoint frame so per-rotation probability queries cost one
/// 2x2 rotation build and two 2x2 products; this is the object the particle
/// filter evaluates once per particle per measurement.
#[derive(Debug, Clone)]
pub struct MeasurementSetting {
    initial: BellKind,
    frame_adjoint: M2,
}

impl MeasurementSetting {
    pub fn new(initial: BellKind, axis: &MeasurementAxis) -> Self {
        MeasurementSetting {
            initial,
            frame_adjoint: m2_adjoint(&frame_m2(axis.theta, axis.lambda)),
        }
    }

    fn from_raw_angles(initial: BellKind, theta: f64, lambda: f64) -> Self {
        MeasurementSetting {
            initial,
            frame_adjoint: m2_adjoint(&frame_m2(theta, lambda)),
        }
    }

    /// Build from an explicit unitary frame matrix instead of sphere angles.
    pub fn with_frame(initial: BellKind, frame: &ComplexMatrix) -> Result<Self, BellError> {
        if frame.dim() != 2 {
            return Err(LinalgError::BadDimension(frame.dim()).into());
        }
        let defect = frame.unitarity_defect();
        if defect > 1e-9 {
            return Err(LinalgError::NotUnitary(defect).into());
        }
        let m = [
            [frame[(0, 0)], frame[(0, 1)]],
            [frame[(1, 0)], frame[(1, 1)]],
        ];
        Ok(MeasurementSetting {
            initial,
            frame_adjoint: m2_adjoint(&m),
        })
    }

    pub fn initial(&self) -> BellKind {
        self.initial
    }

    fn amplitudes_from(&self, r: &M2) -> [C64; 4] {
        let m = m2_mul(&self.frame_adjoint, r);
        if self.initial == BellKind::PsiMinus {
            return [M2_ZERO, M2_ZERO, M2_ZERO, m2_det(&m)];
        }
        let w = m2_mul_transpose(&m2_mul(&m, &bell_m2(self.initial)), &m);
        let h = FRAC_1_SQRT_2;
        [
            (w[0][0] + w[1][1]) * h,
            (w[0][0] - w[1][1]) * h,
            (w[0][1] + w[1][0]) * h,
            M2_ZERO,
        ]
    }

    /// Amplitudes of the rotated state in the measurement-frame Bell basis,
    /// ordered Φ⁺, Φ⁻, Ψ⁺, Ψ⁻.
    ///
    /// The Ψ⁻ component uses the exact singlet identity M·J·Mᵀ = det(M)·J
    /// (J the 2x2 symplectic form): a rotation never connects Ψ⁻ with the
    /// other Bell states, so its amplitude is det(M) for a Ψ⁻ preparation and
    /// exactly zero otherwise.
    pub fn amplitudes(&self, rot: &RotationVector) -> [C64; 4] {
        self.amplitudes_from(&rotation_m2(rot))
    }

    /// Distribution when both qubits undergo an arbitrary 2x2 unitary rather
    /// than an axis-angle rotation.
    pub fn distribution_for_unitary(
        &self,
        r: &ComplexMatrix,
        alpha: f64,
    ) -> Result<OutcomeDistribution, BellError> {
        if r.dim() != 2 {
            return Err(LinalgError::BadDimension(r.dim()).into());
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(LinalgError::BadMixingFraction(alpha).into());
        }
        let m = [[r[(0, 0)], r[(0, 1)]], [r[(1, 0)], r[(1, 1)]]];
        let amps = self.amplitudes_from(&m);
        OutcomeDistribution::new(amps.map(|a| (1.0 - alpha) * a.norm_sqr() + alpha / 4.0))
    }

    /// Full four-outcome distribution for a candidate rotation at mixing
    /// fraction `alpha`.
    pub fn distribution(
        &self,
        rot: &RotationVector,
        alpha: f64,
    ) -> Result<OutcomeDistribution, BellError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(LinalgError::BadMixingFraction(alpha).into());
        }
        let amps = self.amplitudes(rot);
        OutcomeDistribution::new(amps.map(|a| (1.0 - alpha) * a.norm_sqr() + alpha / 4.0))
    }

    /// Probability of a single observed outcome; the particle-filter
    /// likelihood. Exactly zero for a Ψ⁻ observation on a pure non-singlet
    /// preparation.
    pub fn probability(&self, rot: &RotationVector, observed: BellKind, alpha: f64) -> f64 {
        let amps = self.amplitudes(rot);
        let p = (1.0 - alpha) * amps[observed.index()].norm_sqr() + alpha / 4.0;
        p.clamp(0.0, 1.0)
    }
}

/// The Bell-measurement frame unitary U = R_z(Θ)·R_y(Λ).
///
/// `U|0>` is the +1 eigenstate of n·σ for n the axis [`direction`], and
/// `(U ⊗ U)|Z>_z` is the Bell basis the measurement projects onto. The
/// composition order fixes the transverse phase of the basis — the quantity
/// the Φ⁺/Φ⁻ discrimination pattern depends on — and is anchored to the
/// tabulated equal-probability points.
///
/// [`direction`]: MeasurementAxis::direction
pub fn measurement_frame(axis: &MeasurementAxis) -> ComplexMatrix {
    rotation_single(Axis::Z, axis.theta).mul(&rotation_single(Axis::Y, axis.lambda))
}

/// Outcome distribution of a Bell measurement along `axis` on a z-basis
/// `initial` preparation rotated by `rot` and mixed with weight `alpha`.
pub fn outcome_distribution(
    initial: BellKind,
    rot: &RotationVector,
    axis: &MeasurementAxis,
    alpha: f64,
) -> Result<OutcomeDistribution, BellError> {
    MeasurementSetting::new(initial, axis).distribution(rot, alpha)
}

/// Same distribution with the measurement frame given as an explicit unitary
/// rather than sphere angles.
pub fn outcome_distribution_in_frame(
    initial: BellKind,
    rot: &RotationVector,
    frame: &ComplexMatrix,
    alpha: f64,
) -> Result<OutcomeDistribution, BellError> {
    MeasurementSetting::with_frame(initial, frame)?.distribution(rot, alpha)
}

/// Reference evaluation through the full 4x4 density-matrix arithmetic:
/// ρ = (1-α)·R|Z'><Z'|R† + α·I/4 traced against each measurement projector.
///
/// Slower than [`outcome_distribution`] but shaped exactly like the defining
/// formula; the two are cross-checked against each other in the test suite.
pub fn outcome_distribution_dense(
    initial: BellKind,
    rot: &RotationVector,
    axis: &MeasurementAxis,
    alpha: f64,
) -> Result<OutcomeDistribution, BellError> {
    let rotation = joint_rotation(&rot.to_axis_angle());
    let prepared = bell_state(initial, &ComplexMatrix::identity(2))?;
    let rotated = rotation.apply(&prepared);
    let rho = mix_with_identity(&DensityMatrix::pure(&rotated), alpha)?;

    let frame = measurement_frame(axis);
    let mut p = [0.0; 4];
    for kind in BellKind::ALL {
        let projector = DensityMatrix::pure(&bell_state(kind, &frame)?);
        let raw = projector.matrix().mul(rho.matrix()).trace().re;
        if raw < -1e-10 {
            return Err(BellError::NegativeProbability(raw));
        }
        p[kind.index()] = raw.clamp(0.0, 1.0);
    }
    OutcomeDistribution::new(p)
}

/// Bell-basis amplitudes of R(θ)|initial> about the axis-angle rotation `aa`,
/// from the closed-form polynomial expressions in the axis components and
/// cos θ, sin θ. Ordered Φ⁺, Φ⁻, Ψ⁺, Ψ⁻ in the z-basis Bell frame.
///
/// This is an algebraically independent route from [`joint_rotation`]'s
/// Kronecker arithmetic; the two must agree to 1e-10 and are kept as a
/// mutual cross-check.
pub fn closed_form_coefficients(initial: BellKind, aa: &AxisAngle) -> [C64; 4] {
    let [kx, ky, kz] = aa.axis();
    let ct = aa.angle().cos();
    let st = aa.angle().sin();
    let vc = 1.0 - ct; // versine
    let zero = M2_ZERO;
    match initial {
        BellKind::PhiPlus => [
            C64::new(ct + ky * ky * vc, 0.0),
            C64::new(0.0, -(kz * st - kx * ky * vc)),
            C64::new(0.0, -(kx * st + ky * kz * vc)),
            zero,
        ],
        BellKind::PhiMinus => [
            C64::new(0.0, -(kz * st + kx * ky * vc)),
            C64::new(ct + kx * kx * vc, 0.0),
            C64::new(ky * st - kx * kz * vc, 0.0),
            zero,
        ],
        BellKind::PsiPlus => [
            C64::new(0.0, -(kx * st - ky * kz * vc)),
            C64::new(-(ky * st + kx * kz * vc), 0.0),
            C64::new(ct + kz * kz * vc, 0.0),
            zero,
        ],
        BellKind::PsiMinus => [zero, zero, zero, C64::new(1.0, 0.0)],
    }
}

/// One row of the cardinal-axis rotation table: the Bell-basis overlaps of
/// R_j(θ)⊗R_j(θ) applied to one Bell state, as closed trigonometric values.
#[derive(Debug, Clone)]
pub struct RotationTableCell {
    pub axis: Axis,
    pub initial: BellKind,
    /// (target state, symbolic form, value at θ) for each nonzero overlap.
    pub overlaps: Vec<(BellKind, &'static str, C64)>,
}

impl RotationTableCell {
    /// The full overlap vector in Φ⁺, Φ⁻, Ψ⁺, Ψ⁻ order, zeros included.
    pub fn overlap_vector(&self) -> [C64; 4] {
        let mut v = [M2_ZERO; 4];
        for (kind, _, value) in &self.overlaps {
            v[kind.index()] = *value;
        }
        v
    }
}

/// The twelve-cell table of Bell states under equal rotations about the
/// three Cartesian axes, evaluated at angle `theta`.
///
/// Every cell is hand-written trigonometry (cos θ, -i sin θ, ...), so the
/// table is an independent target for the matrix and closed-form rotation
/// routes to reproduce.
pub fn rotation_table(theta: f64) -> Vec<RotationTableCell> {
    let ct = C64::new(theta.cos(), 0.0);
    let mist = C64::new(0.0, -theta.sin()); // -i sin θ
    let st = C64::new(theta.sin(), 0.0);
    let one = C64::new(1.0, 0.0);
    use BellKind::*;
    let cell = |axis, initial, overlaps| RotationTableCell {
        axis,
        initial,
        overlaps,
    };
    vec![
        cell(Axis::X, PsiMinus, vec![(PsiMinus, "1", one)]),
        cell(
            Axis::X,
            PsiPlus,
            vec![(PsiPlus, "cos θ", ct), (PhiPlus, "-i sin θ", mist)],
        ),
        cell(
            Axis::X,
            PhiPlus,
            vec![(PhiPlus, "cos θ", ct), (PsiPlus, "-i sin θ", mist)],
        ),
        cell(Axis::X, PhiMinus, vec![(PhiMinus, "1", one)]),
        cell(Axis::Y, PsiMinus, vec![(PsiMinus, "1", one)]),
        cell(
            Axis::Y,
            PsiPlus,
            vec![(PsiPlus, "cos θ", ct), (PhiMinus, "-sin θ", -st)],
        ),
        cell(Axis::Y, PhiPlus, vec![(PhiPlus, "1", one)]),
        cell(
            Axis::Y,
            PhiMinus,
            vec![(PhiMinus, "cos θ", ct), (PsiPlus, "sin θ", st)],
        ),
        cell(Axis::Z, PsiMinus, vec![(PsiMinus, "1", one)]),
        cell(Axis::Z, PsiPlus, vec![(PsiPlus, "1", one)]),
        cell(
            Axis::Z,
            PhiPlus,
            vec![(PhiPlus, "cos θ", ct), (PhiMinus, "-i sin θ", mist)],
        ),
        cell(
            Axis::Z,
            PhiMinus,
            vec![(PhiMinus, "cos θ", ct), (PhiPlus, "-i sin θ", mist)],
        ),
    ]
}

/// Outcome probabilities tabulated over a sphere grid of measurement axes.
///
/// Θ is endpoint-inclusive (Θ_i = π·i/(nΘ-1)); Λ is periodic
/// and endpoint-exclusive (Λ_j = 2π·j/nΛ). Cells are stored row-major in Θ
/// then Λ.
#[derive(Debug, Clone)]
pub struct SphereMap {
    n_theta: usize,
    n_lambda: usize,
    initial: BellKind,
    rotation: RotationVector,
    alpha: f64,
    cells: Vec<OutcomeDistribution>,
}

impl SphereMap {
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_lambda(&self) -> usize {
        self.n_lambda
    }

    pub fn initial(&self) -> BellKind {
        self.initial
    }

    pub fn rotation(&self) -> RotationVector {
        self.rotation
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self, i: usize) -> f64 {
        std::f64::consts::PI * i as f64 / (self.n_theta - 1) as f64
    }

    pub fn lambda(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n_lambda as f64
    }

    pub fn cell(&self, i: usize, j: usize) -> &OutcomeDistribution {
        &self.cells[i * self.n_lambda + j]
    }

    /// Write the map as CSV: one row per cell, row-major in Θ then Λ, values
    /// with 9 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "theta_rad,lambda_rad,p_phi_plus,p_phi_minus,p_psi_plus,p_psi_minus"
        )?;
        for i in 0..self.n_theta {
            for j in 0..self.n_lambda {
                let p = self.cell(i, j).as_array();
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    crate::fmt_sig9(self.theta(i)),
                    crate::fmt_sig9(self.lambda(j)),
                    crate::fmt_sig9(p[0]),
                    crate::fmt_sig9(p[1]),
                    crate::fmt_sig9(p[2]),
                    crate::fmt_sig9(p[3]),
                )?;
            }
        }
        Ok(())
    }
}

/// Tabulate [`outcome_distribution`] over an nΘ x nΛ grid of axes.
pub fn sphere_map(
    initial: BellKind,
    rot: &RotationVector,
    alpha: f64,
    n_theta: usize,
    n_lambda: usize,
) -> Result<SphereMap, BellError> {
    if n_theta < 2 || n_lambda < 2 {
        return Err(BellError::GridTooSmall(n_theta, n_lambda));
    }
    let mut cells = Vec::with_capacity(n_theta * n_lambda);
    for i in 0..n_theta {
        let theta = std::f64::consts::PI * i as f64 / (n_theta - 1) as f64;
        for j in 0..n_lambda {
            let lambda = 2.0 * std::f64::consts::PI * j as f64 / n_lambda as f64;
            let setting = MeasurementSetting::from_raw_angles(initial, theta, lambda);
            cells.push(setting.distribution(rot, alpha)?);
        }
    }
    Ok(SphereMap {
        n_theta,
        n_lambda,
        initial,
        rotation: *rot,
        alpha,
        cells,
    })
}

/// An axis where the three reachable outcomes of an unrotated Φ⁺/Φ⁻
/// preparation are equally likely, with the residual probability spread
/// (max - min over the three) achieved there.
#[derive(Debug, Clone, Copy)]
pub struct EqualProbabilityAxis {
    pub axis: MeasurementAxis,
    pub spread: f64,
}

/// Variance of the three reachable outcome probabilities at raw sphere
/// angles; the refinement objective for the equal-probability search.
fn probability_variance(initial: BellKind, theta: f64, lambda: f64) -> f64 {
    let setting = MeasurementSetting::from_raw_angles(initial, theta, lambda);
    let amps = setting.amplitudes(&RotationVector::ZERO);
    let p = [amps[0].norm_sqr(), amps[1].norm_sqr(), amps[2].norm_sqr()];
    let mean = (p[0] + p[1] + p[2]) / 3.0;
    p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0
}

/// Find every measurement axis where the three nonzero outcome probabilities
/// of an unrotated, pure `initial` state (Φ⁺ or Φ⁻) are mutually equal.
///
/// A 1-degree grid scan seeds Nelder-Mead refinements; converged minima with
/// probability variance below 1e-18 are deduplicated (antipodal directions
/// give identical distributions and are folded onto Θ < π) and returned
/// sorted by Θ then Λ.
pub fn equal_probability_axes(initial: BellKind) -> Result<Vec<EqualProbabilityAxis>, BellError> {
    use std::f64::consts::PI;

    if initial != BellKind::PhiPlus && initial != BellKind::PhiMinus {
        return Err(BellError::UnsupportedInitialState(initial));
    }

    let n_theta = 181;
    let n_lambda = 360;
    let mut grid = vec![0.0f64; n_theta * n_lambda];
    for i in 0..n_theta {
        let theta = PI * i as f64 / (n_theta - 1) as f64;
        for j in 0..n_lambda {
            let lambda = 2.0 * PI * j as f64 / n_lambda as f64;
            grid[i * n_lambda + j] = probability_variance(initial, theta, lambda);
        }
    }

    // Strict local minima on the grid, with azimuthal wraparound.
    let mut seeds = Vec::new();
    for i in 0..n_theta {
        for j in 0..n_lambda {
            let v = grid[i * n_lambda + j];
            if v > 1e-3 {
                continue;
            }
            let mut is_min = true;
            'neighbors: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = i as i64 + di;
                    if ni < 0 || ni >= n_theta as i64 {
                        continue;
                    }
                    let nj = (j as i64 + dj).rem_euclid(n_lambda as i64);
                    if grid[ni as usize * n_lambda + nj as usize] < v {
                        is_min = false;
                        break 'neighbors;
                    }
                }
            }
            if is_min {
                seeds.push((
                    PI * i as f64 / (n_theta - 1) as f64,
                    2.0 * PI * j as f64 / n_lambda as f64,
                ));
            }
        }
    }

    let mut found: Vec<EqualProbabilityAxis> = Vec::new();
    for (theta0, lambda0) in seeds {
        let min = nelder_mead(
            |x| probability_variance(initial, x[0], x[1]),
            &[theta0, lambda0],
            0.01,
            1e-32,
            400,
        );
        if min.value >= 1e-18 {
            continue;
        }

        // Canonical representative: fold onto Θ in [0, π). The antipodal
        // axis is (Θ, Λ+π), which maps every Bell state of the frame onto
        // itself up to sign, so the fold preserves the distribution exactly.
        let d = {
            let (sl, cl) = (min.x[1].sin(), min.x[1].cos());
            let (st, ct) = (min.x[0].sin(), min.x[0].cos());
            [sl * ct, sl * st, cl]
        };
        let mut theta = d[1].atan2(d[0]).rem_euclid(2.0 * PI);
        let mut lambda = d[2].clamp(-1.0, 1.0).acos();
        if theta >= PI {
            theta -= PI;
            lambda = PI - lambda;
        }

        let axis = MeasurementAxis::new(theta, lambda)?;
        let near_duplicate = found.iter().any(|f| {
            let a = f.axis.direction();
            let b = axis.direction();
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            dot.abs() > 1.0 - 1e-8
        });
        if near_duplicate {
            continue;
        }

        let dist = outcome_distribution(initial, &RotationVector::ZERO, &axis, 0.0)?;
        let three = [dist.p_phi_plus(), dist.p_phi_minus(), dist.p_psi_plus()];
        let spread = three.iter().fold(f64::MIN, |a, &b| a.max(b))
            - three.iter().fold(f64::MAX, |a, &b| a.min(b));
        found.push(EqualProbabilityAxis { axis, spread });
    }

    if found.is_empty() {
        return Err(BellError::NoEqualProbabilityAxes);
    }
    found.sort_by(|a, b| {
        (a.axis.theta(), a.axis.lambda())
            .partial_cmp(&(b.axis.theta(), b.axis.lambda()))
            .unwrap()
    });
    Ok(found)
}
