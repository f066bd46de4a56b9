//! Device description, truncated Hilbert space and the RWA Hamiltonian of the
//! qubit/bus/qubit system.
//!
//! Frequencies are stored as angular frequencies in rad/ns. Anything crossing
//! the I/O boundary is cyclic GHz (`nu = omega / 2pi`), see [`ghz`] and
//! [`to_ghz`].

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Converts a cyclic frequency in GHz to rad/ns.
pub fn ghz(nu: f64) -> f64 {
    2.0 * PI * nu
}

/// Converts rad/ns to cyclic GHz.
pub fn to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Converts a cyclic frequency in MHz to rad/ns.
pub fn mhz(nu: f64) -> f64 {
    ghz(nu * 1e-3)
}

/// Levels kept per qubit. The qubit operators are 3x3 by construction.
pub const QUBIT_LEVELS: usize = 3;

/// Static parameters of the three-component device, angular units (rad/ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    pub omega_q1_idle: f64,
    pub omega_q2_idle: f64,
    pub omega_b: f64,
    /// Anharmonicities, positive; subtracted from `2 omega` on the |2> level.
    pub eta_1: f64,
    pub eta_2: f64,
    pub g_b1: f64,
    pub g_b2: f64,
    pub qubit_levels: usize,
    pub bus_levels: usize,
}

impl DeviceParams {
    /// Builds a parameter set from cyclic values: frequencies and
    /// anharmonicities in GHz, couplings in MHz.
    #[allow(clippy::too_many_arguments)]
    pub fn from_cyclic(
        nu_q1_ghz: f64,
        nu_q2_ghz: f64,
        nu_b_ghz: f64,
        eta_1_ghz: f64,
        eta_2_ghz: f64,
        g_b1_mhz: f64,
        g_b2_mhz: f64,
        bus_levels: usize,
    ) -> Result<Self> {
        let params = Self {
            omega_q1_idle: ghz(nu_q1_ghz),
            omega_q2_idle: ghz(nu_q2_ghz),
            omega_b: ghz(nu_b_ghz),
            eta_1: ghz(eta_1_ghz),
            eta_2: ghz(eta_2_ghz),
            g_b1: mhz(g_b1_mhz),
            g_b2: mhz(g_b2_mhz),
            qubit_levels: QUBIT_LEVELS,
            bus_levels,
        };
        params.validate()?;
        Ok(params)
    }

    /// The default configuration: qubits at 6.6 and 6.5 GHz, bus at 6.0 GHz,
    /// 200 MHz anharmonicity and 75 MHz bus coupling.
    pub fn table1() -> Self {
        Self::from_cyclic(6.6, 6.5, 6.0, 0.2, 0.2, 75.0, 75.0, 3).expect("canonical device is valid")
    }

    /// Same device with both couplings set to `g_mhz`.
    pub fn with_coupling_mhz(mut self, g_mhz: f64) -> Self {
        self.g_b1 = mhz(g_mhz);
        self.g_b2 = mhz(g_mhz);
        self
    }

    pub fn with_bus_levels(mut self, bus_levels: usize) -> Self {
        self.bus_levels = bus_levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDevice(msg));
        let freqs =
            [("omega_q1_idle", self.omega_q1_idle), ("omega_q2_idle", self.omega_q2_idle), ("omega_b", self.omega_b)];
        for (name, w) in freqs {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("{name} must be positive, got {w}"));
            }
        }
        for (name, eta, w) in [("eta_1", self.eta_1, self.omega_q1_idle), ("eta_2", self.eta_2, self.omega_q2_idle)] {
            if !(eta.is_finite() && eta >= 0.0 && eta < w) {
                return bad(format!("{name} must satisfy 0 <= eta < omega, got {eta}"));
            }
        }
        for (name, g, w) in [("g_b1", self.g_b1, self.omega_q1_idle), ("g_b2", self.g_b2, self.omega_q2_idle)] {
            if !(g.is_finite() && g >= 0.0) {
                return bad(format!("{name} must be non-negative, got {g}"));
            }
            if g >= (w - self.omega_b).abs() {
                return bad(format!("{name} is not dispersive at the idle point"));
            }
        }
        if self.qubit_levels != QUBIT_LEVELS {
            return bad(format!("qubit_levels must be 3, got {}", self.qubit_levels));
        }
        if self.bus_levels < 3 {
            return bad(format!("bus_levels must be at least 3, got {}", self.bus_levels));
        }
        Ok(())
    }

    /// Multiplies every frequency, anharmonicity and coupling by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            omega_q1_idle: s * self.omega_q1_idle,
            omega_q2_idle: s * self.omega_q2_idle,
            omega_b: s * self.omega_b,
            eta_1: s * self.eta_1,
            eta_2: s * self.eta_2,
            g_b1: s * self.g_b1,
            g_b2: s * self.g_b2,
            ..*self
        }
    }

    /// Swaps the roles of qubit 1 and qubit 2.
    pub fn mirrored(&self) -> Self {
        Self {
            omega_q1_idle: self.omega_q2_idle,
            omega_q2_idle: self.omega_q1_idle,
            eta_1: self.eta_2,
            eta_2: self.eta_1,
            g_b1: self.g_b2,
            g_b2: self.g_b1,
            ..*self
        }
    }
}

/// Bare product state |n1 nb n2> (qubit 1, bus, qubit 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BareLabel {
    pub n1: usize,
    pub nb: usize,
    pub n2: usize,
}

impl BareLabel {
    pub const fn new(n1: usize, nb: usize, n2: usize) -> Self {
        Self { n1, nb, n2 }
    }

    pub fn excitations(&self) -> usize {
        self.n1 + self.nb + self.n2
    }
}

impl fmt::Display for BareLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.n1, self.nb, self.n2)
    }
}

impl std::str::FromStr for BareLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<usize> = s
            .trim()
            .chars()
            .map(|c| c.to_digit(10).map(|d| d as usize))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Config(format!("bad state label {s:?}")))?;
        match digits.as_slice() {
            [n1, nb, n2] => Ok(Self::new(*n1, *nb, *n2)),
            _ => Err(Error::Config(format!("state label {s:?} must have three digits"))),
        }
    }
}

pub const L000: BareLabel = BareLabel::new(0, 0, 0);
pub const L100: BareLabel = BareLabel::new(1, 0, 0);
pub const L001: BareLabel = BareLabel::new(0, 0, 1);
pub const L101: BareLabel = BareLabel::new(1, 0, 1);
pub const L200: BareLabel = BareLabel::new(2, 0, 0);
pub const L010: BareLabel = BareLabel::new(0, 1, 0);

/// Truncated product space, indexed lexicographically in (n1, nb, n2).
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    bus_levels: usize,
    labels: Vec<BareLabel>,
}

impl HilbertSpace {
    pub fn new(bus_levels: usize) -> Result<Self> {
        if bus_levels < 3 {
            return Err(Error::InvalidDevice(format!("bus_levels must be at least 3, got {bus_levels}")));
        }
        let mut labels = Vec::with_capacity(QUBIT_LEVELS * bus_levels * QUBIT_LEVELS);
        for n1 in 0..QUBIT_LEVELS {
            for nb in 0..bus_levels {
                for n2 in 0..QUBIT_LEVELS {
                    labels.push(BareLabel::new(n1, nb, n2));
                }
            }
        }
        Ok(Self { bus_levels, labels })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn bus_levels(&self) -> usize {
        self.bus_levels
    }

    pub fn labels(&self) -> &[BareLabel] {
        &self.labels
    }

    pub fn contains(&self, label: BareLabel) -> bool {
        label.n1 < QUBIT_LEVELS && label.n2 < QUBIT_LEVELS && label.nb < self.bus_levels
    }

    pub fn index(&self, label: BareLabel) -> Result<usize> {
        if !self.contains(label) {
            return Err(Error::LabelOutOfRange(label));
        }
        Ok((label.n1 * self.bus_levels + label.nb) * QUBIT_LEVELS + label.n2)
    }

    pub fn label(&self, index: usize) -> BareLabel {
        self.labels[index]
    }

    pub fn excitations(&self, index: usize) -> usize {
        self.labels[index].excitations()
    }

    /// Flat indices grouped by total excitation number, in increasing N.
    pub fn sectors(&self) -> Vec<Vec<usize>> {
        let max_n = self.labels.iter().map(BareLabel::excitations).max().unwrap_or(0);
        let mut sectors = vec![Vec::new(); max_n + 1];
        for (i, l) in self.labels.iter().enumerate() {
            sectors[l.excitations()].push(i);
        }
        sectors
    }

    /// Basis vector of a bare state.
    pub fn basis_vector(&self, label: BareLabel) -> Result<DVector<C64>> {
        let mut v = DVector::zeros(self.dim());
        v[self.index(label)?] = C64::new(1.0, 0.0);
        Ok(v)
    }
}

pub fn build_space(params: &DeviceParams) -> Result<HilbertSpace> {
    params.validate()?;
    HilbertSpace::new(params.bus_levels)
}

/// Qubit lowering operator: 1 and sqrt(2) on the superdiagonal.
pub fn lowering_qubit() -> DMatrix<C64> {
    lowering(QUBIT_LEVELS)
}

/// Qubit raising operator, the adjoint of [`lowering_qubit`].
pub fn raising_qubit() -> DMatrix<C64> {
    lowering_qubit().adjoint()
}

/// Truncated harmonic-oscillator annihilation operator.
pub fn lowering(levels: usize) -> DMatrix<C64> {
    DMatrix::from_fn(
        levels,
        levels,
        |r, c| {
            if c == r + 1 {
                C64::new((c as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        },
    )
}

fn kron3(a: &DMatrix<C64>, b: &DMatrix<C64>, c: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b).kronecker(c)
}

fn qubit_hamiltonian(omega: f64, eta: f64) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![
        C64::new(0.0, 0.0),
        C64::new(omega, 0.0),
        C64::new(2.0 * omega - eta, 0.0),
    ]))
}

/// Energy of `n` excitations in a qubit with frequency `omega`.
fn qubit_level(n: usize, omega: f64, eta: f64) -> f64 {
    let n = n as f64;
    n * omega - eta * n * (n - 1.0) / 2.0
}

/// Dense Hermitian snapshot of H(t), rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    matrix: DMatrix<C64>,
}

impl Hamiltonian {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// max |H - H^dagger| relative to max |H|.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let dev = (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        dev / scale
    }
}

/// Assembles H for instantaneous qubit frequencies `omega1`, `omega2` by
/// summing Kronecker products of the single-component operators.
pub fn assemble_hamiltonian(params: &DeviceParams, omega1: f64, omega2: f64) -> Hamiltonian {
    let nb = params.bus_levels;
    let iq = DMatrix::<C64>::identity(QUBIT_LEVELS, QUBIT_LEVELS);
    let ib = DMatrix::<C64>::identity(nb, nb);
    let a = lowering(nb);
    let ad = a.adjoint();
    let sm = lowering_qubit();
    let sp = raising_qubit();
    let number_b = &ad * &a;

    let mut h = kron3(&qubit_hamiltonian(omega1, params.eta_1), &ib, &iq);
    h += kron3(&iq, &(number_b * C64::from(params.omega_b)), &iq);
    h += kron3(&iq, &ib, &qubit_hamiltonian(omega2, params.eta_2));
    h += (kron3(&sm, &ad, &iq) + kron3(&sp, &a, &iq)) * C64::from(params.g_b1);
    h += (kron3(&iq, &ad, &sm) + kron3(&iq, &a, &sp)) * C64::from(params.g_b2);
    Hamiltonian { matrix: h }
}

/// Bare frequency of `label` in cyclic GHz: its diagonal element of H over 2pi.
pub fn bare_frequency(label: BareLabel, omega1: f64, omega2: f64, params: &DeviceParams) -> Result<f64> {
    let space = HilbertSpace::new(params.bus_levels)?;
    space.index(label)?;
    Ok(to_ghz(bare_energy(label, omega1, omega2, params)))
}

fn bare_energy(label: BareLabel, omega1: f64, omega2: f64, params: &DeviceParams) -> f64 {
    qubit_level(label.n1, omega1, params.eta_1)
        + params.omega_b * label.nb as f64
        + qubit_level(label.n2, omega2, params.eta_2)
}

/// Cached decomposition `H = H_static + omega1 N1 + omega2 N2` for repeated
/// assembly along a trajectory.
#[derive(Debug, Clone)]
pub struct HamiltonianBuilder {
    params: DeviceParams,
    space: HilbertSpace,
    fixed: DMatrix<C64>,
    n1: Vec<f64>,
    n2: Vec<f64>,
}

impl HamiltonianBuilder {
    pub fn new(params: &DeviceParams) -> Result<Self> {
        let space = HilbertSpace::new(params.bus_levels)?;
        let fixed = assemble_hamiltonian(params, 0.0, 0.0).into_matrix();
        let n1 = space.labels().iter().map(|l| l.n1 as f64).collect();
        let n2 = space.labels().iter().map(|l| l.n2 as f64).collect();
        Ok(Self { params: *params, space, fixed, n1, n2 })
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn at(&self, omega1: f64, omega2: f64) -> Hamiltonian {
        let mut m = self.fixed.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += C64::from(omega1 * self.n1[i] + omega2 * self.n2[i]);
        }
        Hamiltonian { matrix: m }
    }

    /// Hamiltonian at the idle point.
    pub fn idle(&self) -> Hamiltonian {
        self.at(self.params.omega_q1_idle, self.params.omega_q2_idle)
    }

    /// Principal submatrix on the given flat indices.
    pub fn block(&self, h: &Hamiltonian, indices: &[usize]) -> DMatrix<C64> {
        let m = h.matrix();
        DMatrix::from_fn(indices.len(), indices.len(), |r, c| m[(indices[r], indices[c])])
    }
}
