//! Closed-form perturbative estimates: bus-mediated effective couplings, the
//! resulting phase-accumulation time and the fourth-order ZZ rate.
//!
//! Every formula here is evaluated in cyclic units (GHz in, MHz out). The
//! expressions are homogeneous of degree one in frequency, so this is the
//! same as working in angular units and dividing by 2pi at the end.

use crate::error::{Error, Result};
use crate::model::{to_ghz, DeviceParams};

/// Denominator factors smaller than this (MHz) are treated as singular.
pub const SINGULAR_GUARD_MHZ: f64 = 1.0;

fn guard(factor: &'static str, value_ghz: f64) -> Result<f64> {
    if value_ghz.abs() * 1e3 < SINGULAR_GUARD_MHZ {
        return Err(Error::Singular { factor, value_mhz: value_ghz * 1e3 });
    }
    Ok(value_ghz)
}

/// Effective 100 <-> 001 coupling through the bus, cyclic MHz, with qubit 1
/// at angular frequency `omega_q1`:
/// `2 g_b1 g_b2 nu_b / (nu_q1^2 - nu_b^2)`.
pub fn g_eff_100_001(params: &DeviceParams, omega_q1: f64) -> Result<f64> {
    let nu_q1 = to_ghz(omega_q1);
    let nu_b = to_ghz(params.omega_b);
    guard("nu_q1 - nu_b", nu_q1 - nu_b)?;
    let g1 = to_ghz(params.g_b1);
    let g2 = to_ghz(params.g_b2);
    Ok(2.0 * g1 * g2 * nu_b / (nu_q1 * nu_q1 - nu_b * nu_b) * 1e3)
}

/// Effective 200 <-> 101 coupling: sqrt(2) times the 100 <-> 001 value.
pub fn g_eff_200_101(params: &DeviceParams, omega_q1: f64) -> Result<f64> {
    Ok(std::f64::consts::SQRT_2 * g_eff_100_001(params, omega_q1)?)
}

/// `pi / g_eff^{200<->101}` in ns, with the coupling taken in angular units.
pub fn t_2pi(params: &DeviceParams, omega_q1: f64) -> Result<f64> {
    Ok(time_for_pi(g_eff_200_101(params, omega_q1)?))
}

/// `pi / (2 pi f)` for a cyclic rate `f` in MHz, in ns; infinite for zero.
fn time_for_pi(rate_mhz: f64) -> f64 {
    if rate_mhz == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * rate_mhz.abs() * 1e-3)
    }
}

/// Fourth-order ZZ rate in cyclic MHz for qubit frequencies `omega1`,
/// `omega2` (rad/ns).
pub fn omega_zz_4th(params: &DeviceParams, omega1: f64, omega2: f64) -> Result<f64> {
    let w1 = to_ghz(omega1);
    let w2 = to_ghz(omega2);
    let wb = to_ghz(params.omega_b);
    let e1 = to_ghz(params.eta_1);
    let e2 = to_ghz(params.eta_2);
    let g1 = to_ghz(params.g_b1);
    let g2 = to_ghz(params.g_b2);

    let d1 = guard("omega1 - omega_b", w1 - wb)?;
    let d2 = guard("omega2 - omega_b", w2 - wb)?;
    let d3 = guard("omega1 - (omega2 - eta2)", w1 - (w2 - e2))?;
    let d4 = guard("(omega1 - eta1) - omega2", (w1 - e1) - w2)?;

    let braces =
        w1 * e1 * (2.0 * wb - w1 - e2) + w2 * e2 * (2.0 * wb - w2 - e1) - wb * (wb * (e1 + e2) - 2.0 * e1 * e2);
    let numerator = 2.0 * g1 * g1 * g2 * g2 * braces;
    let denominator = d1 * d1 * d2 * d2 * d3 * d4;
    Ok(numerator / denominator * 1e3)
}

/// Conditional-phase time `pi / Omega_ZZ` in ns from the fourth-order rate.
pub fn t_cp(params: &DeviceParams, omega1: f64, omega2: f64) -> Result<f64> {
    Ok(time_for_pi(omega_zz_4th(params, omega1, omega2)?))
}

/// All closed-form figures for one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeEstimates {
    /// Qubit-1 frequency at which the effective couplings are evaluated, GHz.
    pub nu_q1_eval_ghz: f64,
    pub g_eff_100_001_mhz: f64,
    pub g_eff_200_101_mhz: f64,
    pub t_2pi_ns: f64,
    pub omega_zz_4th_mhz: f64,
    pub t_cp_ns: f64,
}

/// Evaluates every estimate: couplings at `omega_q1_eval`, the ZZ rate at
/// the device's idle point.
pub fn estimates(params: &DeviceParams, omega_q1_eval: f64) -> Result<PerturbativeEstimates> {
    let g100 = g_eff_100_001(params, omega_q1_eval)?;
    let zz = omega_zz_4th(params, params.omega_q1_idle, params.omega_q2_idle)?;
    Ok(PerturbativeEstimates {
        nu_q1_eval_ghz: to_ghz(omega_q1_eval),
        g_eff_100_001_mhz: g100,
        g_eff_200_101_mhz: std::f64::consts::SQRT_2 * g100,
        t_2pi_ns: time_for_pi(std::f64::consts::SQRT_2 * g100),
        omega_zz_4th_mhz: zz,
        t_cp_ns: time_for_pi(zz),
    })
}

/// Default evaluation point for the couplings: the qubit frequency
/// `omega_q1_idle - eta_1` at which qubit 2 meets the 200/101 resonance.
pub fn default_coupling_eval_point(params: &DeviceParams) -> f64 {
    params.omega_q1_idle - params.eta_1
}
