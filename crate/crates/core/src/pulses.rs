//! Qubit frequency trajectories built from error-function ramps.
//!
//! A ramp moves a frequency from `value_before` to `value_after` following the
//! standard normal CDF centered at `t_center` with standard deviation `sigma`.
//! A channel is a baseline plus a sum of such steps, which lets several ramps
//! overlap without discontinuities. Ramp tails are never clipped, so the
//! trajectory at `t = 0` and `t = t_gate` differs from the idle value by the
//! residual Gaussian tail.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::model::{ghz, to_ghz, DeviceParams};

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// One error-function-shaped transition, times in ns, values in GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErfRamp {
    pub t_center: f64,
    pub sigma: f64,
    pub value_before: f64,
    pub value_after: f64,
}

impl ErfRamp {
    pub fn new(t_center: f64, sigma: f64, value_before: f64, value_after: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Pulse(format!("ramp sigma must be positive, got {sigma}")));
        }
        Ok(Self { t_center, sigma, value_before, value_after })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_before + self.step() * normal_cdf((t - self.t_center) / self.sigma)
    }

    fn step(&self) -> f64 {
        self.value_after - self.value_before
    }
}

pub fn erf_ramp_value(ramp: &ErfRamp, t: f64) -> f64 {
    ramp.value(t)
}

/// Frequency of one qubit over time: `baseline + sum_k step_k * Phi_k(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RampSequence {
    pub baseline: f64,
    pub ramps: Vec<ErfRamp>,
}

impl RampSequence {
    pub fn constant(baseline: f64) -> Self {
        Self { baseline, ramps: Vec::new() }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.baseline + self.ramps.iter().map(|r| r.step() * normal_cdf((t - r.t_center) / r.sigma)).sum::<f64>()
    }
}

/// The pair of qubit frequency channels over `[0, t_gate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrajectory {
    pub q1: RampSequence,
    pub q2: RampSequence,
    pub t_gate: f64,
}

/// One sample of a trajectory, cyclic GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub nu_q1: f64,
    pub nu_q2: f64,
}

impl FrequencyTrajectory {
    /// Both qubits parked at their idle frequencies for `t_gate`.
    pub fn idle(device: &DeviceParams, t_gate: f64) -> Self {
        Self::constant(to_ghz(device.omega_q1_idle), to_ghz(device.omega_q2_idle), t_gate)
    }

    pub fn constant(nu_q1: f64, nu_q2: f64, t_gate: f64) -> Self {
        Self { q1: RampSequence::constant(nu_q1), q2: RampSequence::constant(nu_q2), t_gate }
    }

    pub fn nu_q1(&self, t: f64) -> f64 {
        self.q1.value(t)
    }

    pub fn nu_q2(&self, t: f64) -> f64 {
        self.q2.value(t)
    }

    /// Angular frequencies (rad/ns) of both qubits at time `t`.
    pub fn omegas(&self, t: f64) -> (f64, f64) {
        (ghz(self.nu_q1(t)), ghz(self.nu_q2(t)))
    }

    /// Sample times `0, dt, 2dt, ...` up to and including `t_gate`.
    pub fn sample_times(&self, dt: f64) -> Vec<f64> {
        sample_grid(0.0, self.t_gate, dt)
    }

    pub fn sample(&self, dt: f64) -> Vec<TrajectorySample> {
        self.sample_times(dt)
            .into_iter()
            .map(|t| TrajectorySample { t, nu_q1: self.nu_q1(t), nu_q2: self.nu_q2(t) })
            .collect()
    }

    /// Largest deviation from the channel baselines at the window edges, GHz.
    pub fn boundary_mismatch(&self) -> f64 {
        [0.0, self.t_gate]
            .iter()
            .flat_map(|&t| [(self.nu_q1(t) - self.q1.baseline).abs(), (self.nu_q2(t) - self.q2.baseline).abs()])
            .fold(0.0, f64::max)
    }
}

/// Uniform grid from `t0` to `t1` with spacing `dt`, always ending at `t1`.
pub fn sample_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let step = (t1 - t0) / n as f64;
    (0..=n).map(|k| t0 + k as f64 * step).collect()
}

/// Minimum distance, in units of the ramp sigma, between a ramp center and the
/// edge of the gate window.
pub const EDGE_MARGIN_SIGMAS: f64 = 2.0;

/// Single-step CZ pulse: qubit 2 is tuned down to a plateau just above the
/// 200/101 resonance and brought back, qubit 1 stays idle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzPulseSpec {
    /// `(omega_101 - omega_200) / 2pi` on the plateau, MHz.
    pub undershoot_mhz: f64,
    /// Time between the two ramp centers, ns.
    pub t_undershoot: f64,
    pub sigma_in: f64,
    pub sigma_fin: f64,
    pub t_gate: f64,
    pub device: DeviceParams,
}

impl CzPulseSpec {
    /// Pulse with the timing used throughout: 45 ns gate, 3 ns ramps.
    pub fn standard(device: DeviceParams, undershoot_mhz: f64, t_undershoot: f64) -> Self {
        Self { undershoot_mhz, t_undershoot, sigma_in: 3.0, sigma_fin: 3.0, t_gate: 45.0, device }
    }

    /// Plateau frequency of qubit 2 (GHz) such that nu_101 - nu_200 equals
    /// the undershoot.
    pub fn plateau_nu_q2(&self) -> f64 {
        let nu1 = to_ghz(self.device.omega_q1_idle);
        let eta1 = to_ghz(self.device.eta_1);
        2.0 * nu1 - eta1 - nu1 + self.undershoot_mhz * 1e-3
    }

    /// Ramp centers, symmetric about the middle of the gate window.
    pub fn ramp_centers(&self) -> (f64, f64) {
        let mid = 0.5 * self.t_gate;
        (mid - 0.5 * self.t_undershoot, mid + 0.5 * self.t_undershoot)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Pulse(m));
        for (name, v) in
            [("undershoot_mhz", self.undershoot_mhz), ("t_undershoot", self.t_undershoot), ("t_gate", self.t_gate)]
        {
            if !v.is_finite() {
                return err(format!("{name} is not finite"));
            }
        }
        if self.t_gate <= 0.0 {
            return err(format!("t_gate must be positive, got {}", self.t_gate));
        }
        if self.t_undershoot < 0.0 || self.t_undershoot >= self.t_gate {
            return err(format!(
                "t_undershoot must lie in [0, t_gate), got {} with t_gate {}",
                self.t_undershoot, self.t_gate
            ));
        }
        for s in [self.sigma_in, self.sigma_fin] {
            if !(s.is_finite() && s > 0.0) {
                return err(format!("ramp sigma must be positive, got {s}"));
            }
        }
        let (c1, c2) = self.ramp_centers();
        if c1 < EDGE_MARGIN_SIGMAS * self.sigma_in || self.t_gate - c2 < EDGE_MARGIN_SIGMAS * self.sigma_fin {
            return err(format!(
                "plateau does not fit: ramp centers at {c1:.3} and {c2:.3} ns are closer than \
                 {EDGE_MARGIN_SIGMAS} sigma to the edges of the {} ns window",
                self.t_gate
            ));
        }
        if self.plateau_nu_q2() <= 0.0 {
            return err("plateau frequency is not positive".into());
        }
        Ok(())
    }
}

pub fn cz_trajectory(spec: &CzPulseSpec) -> Result<FrequencyTrajectory> {
    spec.validate()?;
    let nu1 = to_ghz(spec.device.omega_q1_idle);
    let nu2 = to_ghz(spec.device.omega_q2_idle);
    let plateau = spec.plateau_nu_q2();
    let (c1, c2) = spec.ramp_centers();
    let q2 = if plateau == nu2 {
        RampSequence::constant(nu2)
    } else {
        RampSequence {
            baseline: nu2,
            ramps: vec![
                ErfRamp::new(c1, spec.sigma_in, nu2, plateau)?,
                ErfRamp::new(c2, spec.sigma_fin, plateau, nu2)?,
            ],
        }
    };
    Ok(FrequencyTrajectory { q1: RampSequence::constant(nu1), q2, t_gate: spec.t_gate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qubit {
    One,
    Two,
}

/// A dwell segment: the channel ramps to `target_ghz` centered at `start` and
/// back centered at `start + duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dwell {
    pub start: f64,
    pub duration: f64,
    pub target_ghz: f64,
}

impl Dwell {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Three-step SWAP-based CZ: MOVE a qubit excitation into the bus, dwell the
/// other qubit near the bus, MOVE the excitation back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapCzPulseSpec {
    /// Qubit whose excitation is loaded into the bus.
    pub moved: Qubit,
    pub move_in: Dwell,
    pub phase_dwell: Dwell,
    pub move_out: Dwell,
    pub sigma: f64,
    pub t_gate: f64,
    pub device: DeviceParams,
}

impl SwapCzPulseSpec {
    /// Lays out the four free parameters on a fixed time grid: a lead-in of
    /// `3 sigma`, gaps of `2 sigma` between steps and a tail of `3 sigma`.
    pub fn from_parameters(
        device: DeviceParams,
        sigma: f64,
        t_move_in: f64,
        nu_dwell_ghz: f64,
        t_dwell: f64,
        t_move_out: f64,
    ) -> Self {
        let lead = 3.0 * sigma;
        let gap = 2.0 * sigma;
        let nu_b = to_ghz(device.omega_b);
        let move_in = Dwell { start: lead, duration: t_move_in, target_ghz: nu_b };
        let phase_dwell = Dwell { start: move_in.end() + gap, duration: t_dwell, target_ghz: nu_dwell_ghz };
        let move_out = Dwell { start: phase_dwell.end() + gap, duration: t_move_out, target_ghz: nu_b };
        Self { moved: Qubit::One, move_in, phase_dwell, move_out, sigma, t_gate: move_out.end() + lead, device }
    }

    /// Starting point: resonant MOVE dwells of pi / (2 g) and a dwell of the
    /// other qubit at `nu_b + eta` for one full 011 <-> 002 cycle.
    pub fn initial_guess(device: DeviceParams, sigma: f64) -> Self {
        let t_move = std::f64::consts::PI / (2.0 * device.g_b1);
        let t_dwell = std::f64::consts::PI / (2f64.sqrt() * device.g_b2);
        let nu_dwell = to_ghz(device.omega_b + device.eta_2);
        Self::from_parameters(device, sigma, t_move, nu_dwell, t_dwell, t_move)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Pulse(m));
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return err(format!("ramp sigma must be positive, got {}", self.sigma));
        }
        for (name, d) in [("move_in", self.move_in), ("phase_dwell", self.phase_dwell), ("move_out", self.move_out)] {
            if !(d.start.is_finite() && d.duration.is_finite() && d.target_ghz.is_finite()) {
                return err(format!("{name} has non-finite fields"));
            }
            if d.duration < 0.0 {
                return err(format!("{name} has negative duration"));
            }
            if d.target_ghz <= 0.0 {
                return err(format!("{name} target frequency must be positive"));
            }
        }
        if self.move_in.end() > self.phase_dwell.start || self.phase_dwell.end() > self.move_out.start {
            return err("steps overlap or are out of order".into());
        }
        if self.move_in.start < 0.0 || self.move_out.end() > self.t_gate {
            return err("steps extend outside the gate window".into());
        }
        Ok(())
    }
}

fn dwell_ramps(d: &Dwell, idle: f64, sigma: f64) -> Result<Vec<ErfRamp>> {
    if d.duration == 0.0 || d.target_ghz == idle {
        return Ok(Vec::new());
    }
    Ok(vec![ErfRamp::new(d.start, sigma, idle, d.target_ghz)?, ErfRamp::new(d.end(), sigma, d.target_ghz, idle)?])
}

pub fn swap_cz_trajectory(spec: &SwapCzPulseSpec) -> Result<FrequencyTrajectory> {
    spec.validate()?;
    let nu1 = to_ghz(spec.device.omega_q1_idle);
    let nu2 = to_ghz(spec.device.omega_q2_idle);
    let (moved_idle, other_idle) = match spec.moved {
        Qubit::One => (nu1, nu2),
        Qubit::Two => (nu2, nu1),
    };
    let mut moved = RampSequence::constant(moved_idle);
    moved.ramps.extend(dwell_ramps(&spec.move_in, moved_idle, spec.sigma)?);
    moved.ramps.extend(dwell_ramps(&spec.move_out, moved_idle, spec.sigma)?);
    let mut other = RampSequence::constant(other_idle);
    other.ramps.extend(dwell_ramps(&spec.phase_dwell, other_idle, spec.sigma)?);
    let (q1, q2) = match spec.moved {
        Qubit::One => (moved, other),
        Qubit::Two => (other, moved),
    };
    Ok(FrequencyTrajectory { q1, q2, t_gate: spec.t_gate })
}
