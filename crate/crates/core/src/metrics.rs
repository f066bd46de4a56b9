//! Gate extraction in the dressed computational basis and the CZ error
//! functional.
//!
//! The computational states are the idle eigenstates labeled 000, 100, 001
//! and 101. The error functional
//!
//! ```text
//! Error(U) = sum_{k=1..3} (1 - |a_k|^2) + |1 + a1 a2 conj(a3) / |a1 a2 conj(a3)||
//! ```
//!
//! with `a1, a2, a3` the diagonal amplitudes on 100, 001, 101 vanishes for
//! every `diag(1, e^{-i phi1}, e^{-i phi2}, -e^{-i(phi1 + phi2)})`, so single
//! qubit phases never need to be removed before scoring.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{to_ghz, BareLabel, DeviceParams, L000, L001, L100, L101};
use crate::propagator::EvolutionResult;
use crate::spectra::dressed_states;

pub const COMPUTATIONAL_LABELS: [BareLabel; 4] = [L000, L100, L001, L101];

/// Amplitudes below this are treated as lost for the phase term.
pub const DEGENERATE_AMPLITUDE: f64 = 1e-6;

pub type GateMatrix = Matrix4<C64>;

#[derive(Debug, Clone)]
pub struct ComputationalBasis {
    /// Dressed idle eigenvectors for [`COMPUTATIONAL_LABELS`], gauge fixed.
    pub vectors: [DVector<C64>; 4],
    /// Their eigenfrequencies, cyclic GHz.
    pub energies_ghz: [f64; 4],
}

impl ComputationalBasis {
    /// `dim x 4` matrix with the basis vectors as columns.
    pub fn as_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_columns(&self.vectors)
    }
}

pub fn computational_basis(params: &DeviceParams) -> Result<ComputationalBasis> {
    let (vectors, energies, flagged) =
        dressed_states(params, params.omega_q1_idle, params.omega_q2_idle, &COMPUTATIONAL_LABELS)?;
    if !flagged.is_empty() {
        return Err(Error::AmbiguousLabel(flagged));
    }
    let vectors: [DVector<C64>; 4] = vectors.try_into().expect("four labels requested");
    let energies_ghz = [0, 1, 2, 3].map(|k| to_ghz(energies[k]));
    Ok(ComputationalBasis { vectors, energies_ghz })
}

/// `M[j, k] = <e_j| U |e_k>` over the computational basis.
pub fn project_gate(evolution: &EvolutionResult, basis: &ComputationalBasis) -> GateMatrix {
    project_unitary(&evolution.unitary, basis)
}

pub fn project_unitary(u: &DMatrix<C64>, basis: &ComputationalBasis) -> GateMatrix {
    let b = basis.as_matrix();
    let m = b.adjoint() * u * &b;
    GateMatrix::from_fn(|r, c| m[(r, c)])
}

/// Target CZ with single-qubit phases `phi1`, `phi2`.
pub fn cz_target(phi1: f64, phi2: f64) -> GateMatrix {
    let mut m = GateMatrix::zeros();
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = C64::from_polar(1.0, -phi1);
    m[(2, 2)] = C64::from_polar(1.0, -phi2);
    m[(3, 3)] = -C64::from_polar(1.0, -(phi1 + phi2));
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBreakdown {
    pub a1: C64,
    pub a2: C64,
    pub a3: C64,
    pub error_1: f64,
    pub error_2: f64,
    pub error_3: f64,
    pub error_4: f64,
    pub total: f64,
    pub phi_1: f64,
    pub phi_2: f64,
    pub process_fidelity: f64,
    pub leakage: f64,
    /// Set when some `|a_k|` fell below [`DEGENERATE_AMPLITUDE`].
    pub degenerate: bool,
}

impl ErrorBreakdown {
    /// `error_1 + error_2 + error_3`.
    pub fn population_error(&self) -> f64 {
        self.error_1 + self.error_2 + self.error_3
    }
}

pub fn paper_error(m: &GateMatrix) -> ErrorBreakdown {
    let (a1, a2, a3) = (m[(1, 1)], m[(2, 2)], m[(3, 3)]);
    let error_1 = 1.0 - a1.norm_sqr();
    let error_2 = 1.0 - a2.norm_sqr();
    let error_3 = 1.0 - a3.norm_sqr();
    let degenerate = [a1, a2, a3].iter().any(|a| a.norm() < DEGENERATE_AMPLITUDE);
    let error_4 = if degenerate {
        2.0
    } else {
        let z = a1 * a2 * a3.conj();
        (C64::new(1.0, 0.0) + z / z.norm()).norm()
    };
    let phi_1 = -a1.arg();
    let phi_2 = -a2.arg();
    let overlap = (cz_target(phi_1, phi_2).adjoint() * m).trace();
    let process_fidelity = overlap.norm_sqr() / 16.0;
    let leakage = 1.0 - m.iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0;
    ErrorBreakdown {
        a1,
        a2,
        a3,
        error_1,
        error_2,
        error_3,
        error_4,
        total: error_1 + error_2 + error_3 + error_4,
        phi_1,
        phi_2,
        process_fidelity,
        leakage,
        degenerate,
    }
}
