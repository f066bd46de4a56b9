//! End-to-end acceptance checks behind `czgate verify`.
//!
//! Criteria run against the configured device. Those defined at a specific
//! coupling (3 and 5) replace the configured coupling with their own. A
//! configuration may list criteria it is expected to fail; those report as
//! `XFAIL`, and an expected failure that passes is an error.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use czgate::metrics::{computational_basis, cz_target, paper_error, project_gate, GateMatrix, COMPUTATIONAL_LABELS};
use czgate::model::{assemble_hamiltonian, build_space, ghz, DeviceParams};
use czgate::optimizer::{minimize, OptResult, OptimizationProblem};
use czgate::perturbation::{estimates, omega_zz_4th, t_cp};
use czgate::propagator::{convergence_check, evolve};
use czgate::pulses::{cz_trajectory, CzPulseSpec};
use czgate::spectra::{comoving_overlaps, omega_zz_numeric};
use czgate::Result;

use crate::config::RunConfig;

pub const CRITERIA: [u32; 7] = [1, 2, 3, 4, 5, 6, 7];

/// Reference optimum and tolerances for the single-step search.
pub const OPTIMUM_UNDERSHOOT_MHZ: f64 = 9.59;
pub const OPTIMUM_DURATION_NS: f64 = 29.1;
pub const UNDERSHOOT_TOL_MHZ: f64 = 1.0;
pub const DURATION_TOL_NS: f64 = 1.5;
pub const OPTIMIZE_BUDGET: usize = 500;
/// Coupling and ramp width for the three-step comparison. The MOVE steps need
/// ramps short against 1 / g to transfer the excitation at all.
pub const SWAP_COUPLING_MHZ: f64 = 25.0;
pub const SWAP_SIGMA_NS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    ExpectedFail,
    UnexpectedPass,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::ExpectedFail => "XFAIL",
            Verdict::UnexpectedPass => "XPASS",
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Pass | Verdict::ExpectedFail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub criterion: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub verdict: Verdict,
}

impl Outcome {
    /// One machine-readable line: `criterion=<n> name=<name> result=<verdict> <detail>`.
    pub fn line(&self) -> String {
        format!("criterion={} name={} result={} {}", self.criterion, self.name, self.verdict.as_str(), self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub outcomes: Vec<Outcome>,
}

impl VerifyReport {
    pub fn success(&self) -> bool {
        self.outcomes.iter().all(|o| o.verdict.is_ok())
    }
}

struct Check {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: String) -> Check {
    Check { passed, detail }
}

pub fn criterion_name(n: u32) -> &'static str {
    match n {
        1 => "effective-coupling",
        2 => "idle-cz-time",
        3 => "zz-analytic-vs-numeric",
        4 => "single-step-optimum",
        5 => "swap-comparison",
        6 => "property-suites",
        7 => "truncation-robustness",
        _ => "unknown",
    }
}

/// Runs the selected criteria (all when `only` is empty).
pub fn run(cfg: &RunConfig, only: &[u32]) -> Result<VerifyReport> {
    let device = cfg.device()?;
    let selected: Vec<u32> = CRITERIA.iter().copied().filter(|c| only.is_empty() || only.contains(c)).collect();
    let mut report = VerifyReport::default();
    let mut optimum: Option<OptResult> = None;
    for &n in &selected {
        let c = match n {
            1 => effective_coupling(cfg)?,
            2 => idle_cz_time(&device)?,
            3 => zz_agreement(&device)?,
            4 => {
                let (c, r) = single_step_optimum(cfg, &device)?;
                optimum = Some(r);
                c
            }
            5 => swap_comparison(cfg, &device)?,
            6 => property_suites(&device)?,
            7 => {
                let base = match optimum.take() {
                    Some(r) => r,
                    None => single_step_optimum(cfg, &device)?.1,
                };
                truncation(cfg, &device, &base)?
            }
            _ => unreachable!("criteria are 1..=7"),
        };
        let expected_fail = cfg.verify.expected_failures.contains(&n);
        let verdict = match (c.passed, expected_fail) {
            (true, false) => Verdict::Pass,
            (false, false) => Verdict::Fail,
            (false, true) => Verdict::ExpectedFail,
            (true, true) => Verdict::UnexpectedPass,
        };
        report.outcomes.push(Outcome {
            criterion: n,
            name: criterion_name(n),
            passed: c.passed,
            detail: c.detail,
            verdict,
        });
    }
    Ok(report)
}

fn effective_coupling(cfg: &RunConfig) -> Result<Check> {
    let e = estimates(&cfg.device()?, cfg.coupling_eval_point()?)?;
    let ok = (e.g_eff_200_101_mhz - 19.2).abs() <= 0.1 && (e.t_2pi_ns - 26.0).abs() <= 0.5;
    Ok(check(ok, format!("g_eff_200_101_MHz={:.4} t_2pi_ns={:.3}", e.g_eff_200_101_mhz, e.t_2pi_ns)))
}

fn idle_cz_time(device: &DeviceParams) -> Result<Check> {
    let t = t_cp(device, device.omega_q1_idle, device.omega_q2_idle)?;
    Ok(check((123.0..=137.0).contains(&t), format!("t_cp_ns={t:.3}")))
}

fn zz_discrepancy(device: &DeviceParams) -> Result<f64> {
    let numeric = omega_zz_numeric(device, device.omega_q1_idle, device.omega_q2_idle)?;
    let fourth = omega_zz_4th(device, device.omega_q1_idle, device.omega_q2_idle)?;
    Ok((numeric - fourth).abs() / fourth.abs())
}

fn zz_agreement(device: &DeviceParams) -> Result<Check> {
    let at25 = zz_discrepancy(&device.with_coupling_mhz(25.0))?;
    let at12 = zz_discrepancy(&device.with_coupling_mhz(12.5))?;
    let ratio = at25 / at12;
    let ok = at25 < 0.05 && (2.5..=6.0).contains(&ratio);
    Ok(check(ok, format!("rel_25MHz={at25:.3e} rel_12.5MHz={at12:.3e} ratio={ratio:.3}")))
}

fn optimizer_settings(cfg: &RunConfig, problem: &mut OptimizationProblem) {
    problem.dt = cfg.numerics.dt_ns;
    problem.settings.seed = cfg.optimize.seed;
}

fn single_step_optimum(cfg: &RunConfig, device: &DeviceParams) -> Result<(Check, OptResult)> {
    let mut problem = OptimizationProblem::single_step(*device)?;
    optimizer_settings(cfg, &mut problem);
    let r = minimize(&problem)?;
    let (us, tu) = (r.best_params[0], r.best_params[1]);
    let ok = r.feasible
        && (us - OPTIMUM_UNDERSHOOT_MHZ).abs() <= UNDERSHOOT_TOL_MHZ
        && (tu - OPTIMUM_DURATION_NS).abs() <= DURATION_TOL_NS
        && r.evaluations <= OPTIMIZE_BUDGET;
    let detail = format!(
        "undershoot_MHz={us:.4} t_undershoot_ns={tu:.4} e123={:.3e} e4={:.3e} total={:.4e} evals={} feasible={}",
        r.best.population_error(),
        r.best.error_4,
        r.best.total,
        r.evaluations,
        r.feasible
    );
    Ok((check(ok, detail), r))
}

fn swap_comparison(cfg: &RunConfig, device: &DeviceParams) -> Result<Check> {
    let mut problem = OptimizationProblem::swap(device.with_coupling_mhz(SWAP_COUPLING_MHZ), SWAP_SIGMA_NS);
    optimizer_settings(cfg, &mut problem);
    let r = minimize(&problem)?;
    let params: Vec<String> = r.best_params.iter().map(|x| format!("{x:.4}")).collect();
    Ok(check(
        r.best.total >= 1e-3,
        format!("best_total={:.4e} params=[{}] evals={}", r.best.total, params.join(","), r.evaluations),
    ))
}

fn truncation(cfg: &RunConfig, device: &DeviceParams, base: &OptResult) -> Result<Check> {
    let (_, wide) = single_step_optimum(cfg, &device.with_bus_levels(5))?;
    let diff = (wide.best.total - base.best.total).abs();
    Ok(check(diff < 1e-6, format!("total_3={:.6e} total_5={:.6e} diff={diff:.3e}", base.best.total, wide.best.total)))
}

/// Random device and operating point inside the physically sensible range.
fn random_device(rng: &mut ChaCha8Rng) -> (DeviceParams, f64, f64) {
    let bus_levels = rng.random_range(3..=5);
    let nu_b: f64 = rng.random_range(4.0..8.0);
    let detuned = |rng: &mut ChaCha8Rng| {
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        nu_b + side * rng.random_range(0.3..2.0)
    };
    let (nu_1, nu_2) = (detuned(rng), detuned(rng));
    let p = DeviceParams::from_cyclic(
        nu_1,
        nu_2,
        nu_b,
        rng.random_range(0.0..0.4),
        rng.random_range(0.0..0.4),
        rng.random_range(0.0..150.0),
        rng.random_range(0.0..150.0),
        bus_levels,
    )
    .expect("qubits sit at least 300 MHz from the bus");
    (p, ghz(rng.random_range(4.0..8.0)), ghz(rng.random_range(4.0..8.0)))
}

fn hamiltonian_structure(draws: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let mut herm: f64 = 0.0;
    let mut cross: f64 = 0.0;
    for _ in 0..draws {
        let (p, w1, w2) = random_device(rng);
        let h = assemble_hamiltonian(&p, w1, w2);
        let space = build_space(&p)?;
        herm = herm.max(h.hermiticity_defect());
        let m = h.matrix();
        for i in 0..space.dim() {
            for j in 0..space.dim() {
                if space.excitations(i) != space.excitations(j) {
                    cross = cross.max(m[(i, j)].norm());
                }
            }
        }
    }
    Ok((herm, cross))
}

fn random_phases(rng: &mut ChaCha8Rng) -> GateMatrix {
    Matrix4::from_diagonal(&Vector4::from_fn(|_, _| C64::from_polar(1.0, rng.random_range(-10.0..10.0))))
}

fn property_suites(device: &DeviceParams) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();

    let (herm, cross) = hamiltonian_structure(10_000, &mut rng)?;
    if herm != 0.0 || cross != 0.0 {
        failures.push(format!("hamiltonian herm={herm:.1e} cross_sector={cross:.1e}"));
    }

    let spec = CzPulseSpec::standard(*device, OPTIMUM_UNDERSHOOT_MHZ, OPTIMUM_DURATION_NS);
    let traj = cz_trajectory(&spec)?;
    let res = evolve(&traj, device, 0.0, traj.t_gate, 0.01, &[])?;
    if res.unitarity_defect >= 1e-9 {
        failures.push(format!("unitarity defect {:.1e}", res.unitarity_defect));
    }
    let coarse = convergence_check(&traj, device, 0.0, traj.t_gate, 0.04)?;
    let fine = convergence_check(&traj, device, 0.0, traj.t_gate, 0.02)?;
    let order = (coarse / fine).log2();
    if !(1.8..=2.2).contains(&order) {
        failures.push(format!("step-halving order {order:.3}"));
    }

    let mut cz_worst: f64 = 0.0;
    for _ in 0..100 {
        let e = paper_error(&cz_target(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)));
        cz_worst = cz_worst.max(e.total.abs());
    }
    let identity = paper_error(&GateMatrix::identity()).total;
    if cz_worst >= 1e-12 || identity != 2.0 {
        failures.push(format!("cz error {cz_worst:.1e} identity {identity}"));
    }

    let gate = project_gate(&res, &computational_basis(device)?);
    let reference = paper_error(&gate).total;
    let mut gauge_worst: f64 = 0.0;
    for _ in 0..100 {
        let d = random_phases(&mut rng);
        let rephased = d.adjoint() * gate * d;
        let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        // single-qubit Z rotations: diag(1, e^{-ia}, e^{-ib}, e^{-i(a+b)})
        let mut z = cz_target(a, b);
        z[(3, 3)] = -z[(3, 3)];
        let local = z * gate;
        for m in [rephased, local] {
            gauge_worst = gauge_worst.max((paper_error(&m).total - reference).abs());
        }
    }
    if gauge_worst >= 1e-12 {
        failures.push(format!("gauge variation {gauge_worst:.1e}"));
    }

    let trace = comoving_overlaps(&traj, device, &COMPUTATIONAL_LABELS, 0.25, 0.01)?;
    let completeness = trace.completeness_defect();
    if completeness >= 1e-9 {
        failures.push(format!("overlap completeness {completeness:.1e}"));
    }

    let detail = format!(
        "herm={herm:.1e} unitarity={:.1e} order={order:.3} cz={cz_worst:.1e} gauge={gauge_worst:.1e} completeness={completeness:.1e}{}",
        res.unitarity_defect,
        if failures.is_empty() { String::new() } else { format!(" failures=[{}]", failures.join("; ")) }
    );
    Ok(check(failures.is_empty(), detail))
}
