//! Derivative-free minimization of the CZ error functional over pulse
//! parameters.
//!
//! The search is a bounded Nelder-Mead simplex on a penalized objective
//! `total + w * (max(0, e123 - c123) + max(0, e4 - c4))`, restarted from
//! perturbed copies of the best point while restarts keep improving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{computational_basis, paper_error, project_gate, ComputationalBasis, ErrorBreakdown};
use crate::model::{to_ghz, DeviceParams};
use crate::par;
use crate::perturbation::{default_coupling_eval_point, t_2pi};
use crate::propagator::{evolve, DEFAULT_DT};
use crate::pulses::{
    cz_trajectory, swap_cz_trajectory, CzPulseSpec, FrequencyTrajectory, SwapCzPulseSpec, EDGE_MARGIN_SIGMAS,
};

/// Objective value reported for parameter vectors that do not describe a
/// valid pulse.
pub const INVALID_TOTAL: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Bound on `error_1 + error_2 + error_3`.
    pub population: f64,
    /// Bound on `error_4`.
    pub phase: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { population: 1e-4, phase: 1e-10 }
    }
}

impl Thresholds {
    pub fn satisfied_by(&self, e: &ErrorBreakdown) -> bool {
        e.population_error() < self.population && e.error_4 < self.phase
    }

    pub fn violation(&self, e: &ErrorBreakdown) -> f64 {
        (e.population_error() - self.population).max(0.0) + (e.error_4 - self.phase).max(0.0)
    }
}

/// Fixed part of the pulse that the free parameters are plugged into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaffold {
    /// Parameters: undershoot (MHz), undershoot duration (ns).
    SingleStep { device: DeviceParams, t_gate: f64, sigma_in: f64, sigma_fin: f64 },
    /// Parameters: MOVE-in dwell (ns), phase-dwell frequency of qubit 2
    /// (GHz), phase-dwell duration (ns), MOVE-out dwell (ns).
    Swap { device: DeviceParams, sigma: f64 },
}

impl Scaffold {
    pub fn device(&self) -> &DeviceParams {
        match self {
            Scaffold::SingleStep { device, .. } | Scaffold::Swap { device, .. } => device,
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            Scaffold::SingleStep { .. } => &["undershoot_mhz", "t_undershoot_ns"],
            Scaffold::Swap { .. } => &["t_move_in_ns", "nu_q2_dwell_ghz", "t_dwell_ns", "t_move_out_ns"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Builds the trajectory for a parameter vector.
    pub fn trajectory(&self, x: &[f64]) -> Result<FrequencyTrajectory> {
        match *self {
            Scaffold::SingleStep { device, t_gate, sigma_in, sigma_fin } => {
                let [undershoot_mhz, t_undershoot] = expect_len::<2>(x)?;
                cz_trajectory(&CzPulseSpec { undershoot_mhz, t_undershoot, sigma_in, sigma_fin, t_gate, device })
            }
            Scaffold::Swap { device, sigma } => {
                let [t_in, nu, t_dwell, t_out] = expect_len::<4>(x)?;
                swap_cz_trajectory(&SwapCzPulseSpec::from_parameters(device, sigma, t_in, nu, t_dwell, t_out))
            }
        }
    }
}

fn expect_len<const N: usize>(x: &[f64]) -> Result<[f64; N]> {
    x.try_into().map_err(|_| Error::Problem(format!("expected {N} parameters, got {}", x.len())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadSettings {
    /// Initial simplex edge along each parameter.
    pub simplex_scale: Vec<f64>,
    pub max_evals_per_restart: usize,
    pub max_restarts: usize,
    /// Simplex extent (parameter units) below which a run has converged.
    pub x_tol: f64,
    /// Spread of penalized values below which a run has converged.
    pub f_tol: f64,
    pub penalty_weight: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub names: Vec<String>,
    pub initial: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub scaffold: Scaffold,
    pub dt: f64,
    pub thresholds: Thresholds,
    pub settings: NelderMeadSettings,
}

impl OptimizationProblem {
    /// Two-parameter single-step problem at `t_gate = 45 ns` with 3 ns ramps,
    /// started from the perturbative guess: 10 MHz undershoot held for the
    /// 200/101 full-cycle time.
    pub fn single_step(device: DeviceParams) -> Result<Self> {
        let t_guess = t_2pi(&device, default_coupling_eval_point(&device))?;
        let scaffold = Scaffold::SingleStep { device, t_gate: 45.0, sigma_in: 3.0, sigma_fin: 3.0 };
        Ok(Self::single_step_from(scaffold, [10.0, t_guess]))
    }

    pub fn single_step_from(scaffold: Scaffold, initial: [f64; 2]) -> Self {
        let (t_gate, sigma) = match scaffold {
            Scaffold::SingleStep { t_gate, sigma_in, sigma_fin, .. } => (t_gate, sigma_in.max(sigma_fin)),
            Scaffold::Swap { .. } => unreachable!("single-step scaffold required"),
        };
        let t_max = t_gate - 2.0 * EDGE_MARGIN_SIGMAS * sigma;
        let initial = vec![initial[0], initial[1].clamp(0.0, t_max)];
        Self {
            names: scaffold.parameter_names(),
            initial,
            lower: vec![0.0, 0.0],
            upper: vec![100.0, t_max],
            scaffold,
            dt: DEFAULT_DT,
            thresholds: Thresholds::default(),
            settings: NelderMeadSettings {
                simplex_scale: vec![2.0, 2.0],
                max_evals_per_restart: 500,
                max_restarts: 3,
                x_tol: 1e-9,
                f_tol: 1e-13,
                penalty_weight: 1e3,
                seed: 0,
            },
        }
    }

    /// Four-parameter three-step problem started from resonant MOVEs and a
    /// full 011 <-> 002 cycle.
    pub fn swap(device: DeviceParams, sigma: f64) -> Self {
        let guess = SwapCzPulseSpec::initial_guess(device, sigma);
        let scaffold = Scaffold::Swap { device, sigma };
        let nu_b = to_ghz(device.omega_b);
        Self {
            names: scaffold.parameter_names(),
            initial: vec![
                guess.move_in.duration,
                guess.phase_dwell.target_ghz,
                guess.phase_dwell.duration,
                guess.move_out.duration,
            ],
            lower: vec![0.0, nu_b + 0.05, 0.0, 0.0],
            upper: vec![40.0, to_ghz(device.omega_q2_idle), 60.0, 40.0],
            scaffold,
            dt: DEFAULT_DT,
            thresholds: Thresholds::default(),
            settings: NelderMeadSettings {
                simplex_scale: vec![2.0, 0.02, 2.0, 2.0],
                max_evals_per_restart: 500,
                max_restarts: 3,
                x_tol: 1e-9,
                f_tol: 1e-13,
                penalty_weight: 1e3,
                seed: 0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::Problem("no parameters".into()));
        }
        for (what, len) in [
            ("names", self.names.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
            ("simplex_scale", self.settings.simplex_scale.len()),
        ] {
            if len != n {
                return Err(Error::Problem(format!("{what} has {len} entries, expected {n}")));
            }
        }
        for i in 0..n {
            let (lo, hi, x) = (self.lower[i], self.upper[i], self.initial[i]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Problem(format!("bounds for {} are not finite and ordered", self.names[i])));
            }
            if !(x >= lo && x <= hi) {
                return Err(Error::Problem(format!("initial {} = {x} outside [{lo}, {hi}]", self.names[i])));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Problem(format!("dt must be positive, got {}", self.dt)));
        }
        self.scaffold.device().validate()
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub params: Vec<f64>,
    /// `None` when the parameters did not produce a valid pulse.
    pub breakdown: Option<ErrorBreakdown>,
    pub total: f64,
    pub message: Option<String>,
}

impl Evaluation {
    pub fn is_valid(&self) -> bool {
        self.breakdown.is_some()
    }
}

/// Reusable evaluation context: the computational basis only depends on the
/// device and is computed once.
#[derive(Debug, Clone)]
pub struct Objective {
    scaffold: Scaffold,
    dt: f64,
    basis: ComputationalBasis,
}

impl Objective {
    pub fn new(scaffold: Scaffold, dt: f64) -> Result<Self> {
        let basis = computational_basis(scaffold.device())?;
        Ok(Self { scaffold, dt, basis })
    }

    pub fn evaluate(&self, x: &[f64]) -> Evaluation {
        let run = || -> Result<ErrorBreakdown> {
            let traj = self.scaffold.trajectory(x)?;
            let res = evolve(&traj, self.scaffold.device(), 0.0, traj.t_gate, self.dt, &[])?;
            Ok(paper_error(&project_gate(&res, &self.basis)))
        };
        match run() {
            Ok(b) => Evaluation { params: x.to_vec(), total: b.total, breakdown: Some(b), message: None },
            Err(e) => {
                Evaluation { params: x.to_vec(), breakdown: None, total: INVALID_TOTAL, message: Some(e.to_string()) }
            }
        }
    }
}

/// Builds the pulse for `x`, evolves and scores it.
pub fn objective(problem: &OptimizationProblem, x: &[f64]) -> Result<Evaluation> {
    Ok(Objective::new(problem.scaffold, problem.dt)?.evaluate(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub index: usize,
    pub restart: usize,
    pub evaluation: Evaluation,
    pub penalized: f64,
    /// Penalized value of the best point so far.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    BudgetExhausted,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::BudgetExhausted => "budget-exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub names: Vec<String>,
    pub best_params: Vec<f64>,
    pub best: ErrorBreakdown,
    pub best_penalized: f64,
    pub evaluations: usize,
    pub restarts: usize,
    pub status: Status,
    pub feasible: bool,
    pub log: Vec<LogEntry>,
}

struct Tracker<'a> {
    problem: &'a OptimizationProblem,
    objective: Objective,
    log: Vec<LogEntry>,
    best: Option<(f64, Evaluation)>,
    restart: usize,
}

impl Tracker<'_> {
    fn penalized(&self, e: &Evaluation) -> f64 {
        match &e.breakdown {
            Some(b) => b.total + self.problem.settings.penalty_weight * self.problem.thresholds.violation(b),
            None => INVALID_TOTAL * (1.0 + self.problem.settings.penalty_weight),
        }
    }

    fn satisfies(&self, e: &Evaluation) -> bool {
        e.breakdown.as_ref().is_some_and(|b| self.problem.thresholds.satisfied_by(b))
    }

    /// The reported best is the lowest penalized value, except that a
    /// feasible point always beats an infeasible one: the penalty is too
    /// gentle near the phase threshold to guarantee that on its own.
    fn eval(&mut self, x: &[f64]) -> f64 {
        let e = self.objective.evaluate(x);
        let f = self.penalized(&e);
        let better = match &self.best {
            None => true,
            Some((bf, be)) => match (self.satisfies(&e), self.satisfies(be)) {
                (true, false) => true,
                (false, true) => false,
                _ => f < *bf,
            },
        };
        if better {
            self.best = Some((f, e.clone()));
        }
        let best_so_far = self.best.as_ref().map_or(f, |b| b.0);
        self.log.push(LogEntry {
            index: self.log.len(),
            restart: self.restart,
            evaluation: e,
            penalized: f,
            best_so_far,
        });
        f
    }

    fn feasible(&self) -> bool {
        self.best.as_ref().is_some_and(|b| self.satisfies(&b.1))
    }
}

/// Box constraints and stopping rules for [`simplex_minimize`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexLimits<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_evals: usize,
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for (i, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lower[i], upper[i]);
    }
}

/// Bounded Nelder-Mead: trial points are clamped into the box. Returns the
/// best vertex, its value and whether the simplex contracted below both
/// tolerances within `max_evals` evaluations.
pub fn simplex_minimize(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    scale: &[f64],
    limits: SimplexLimits,
) -> (Vec<f64>, f64, bool) {
    let SimplexLimits { lower, upper, x_tol, f_tol, max_evals } = limits;
    let n = x0.len();
    let mut used = 0usize;
    let mut eval = |x: &[f64], used: &mut usize| {
        *used += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x = x0.to_vec();
    clamp_into(&mut x, lower, upper);
    let fx = eval(&x, &mut used);
    simplex.push((x.clone(), fx));
    for i in 0..n {
        let mut v = x.clone();
        v[i] += scale[i];
        if v[i] > upper[i] {
            v[i] = x[i] - scale[i];
        }
        clamp_into(&mut v, lower, upper);
        let fv = eval(&v, &mut used);
        simplex.push((v, fv));
    }

    let converged = loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_spread = simplex[n].1 - simplex[0].1;
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (f_spread <= f_tol && x_spread <= x_tol) || x_spread == 0.0 {
            break true;
        }
        if used + 2 > max_evals {
            break false;
        }

        let centroid: Vec<f64> =
            (0..n).map(|i| simplex[..n].iter().map(|(v, _)| v[i]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].0.clone();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n).map(|i| centroid[i] + t * (worst[i] - centroid[i])).collect();
            clamp_into(&mut v, lower, upper);
            v
        };

        let xr = along(-1.0);
        let fr = eval(&xr, &mut used);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut used);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let xc = if fr < simplex[n].1 { along(-0.5) } else { along(0.5) };
        let fc = eval(&xc, &mut used);
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        let mut exhausted = false;
        for vertex in simplex.iter_mut().skip(1) {
            let mut v: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            clamp_into(&mut v, lower, upper);
            let fv = eval(&v, &mut used);
            *vertex = (v, fv);
            if used >= max_evals {
                exhausted = true;
                break;
            }
        }
        if exhausted {
            break false;
        }
    };
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, converged)
}

pub fn minimize(problem: &OptimizationProblem) -> Result<OptResult> {
    problem.validate()?;
    let objective = Objective::new(problem.scaffold, problem.dt)?;
    let mut tracker = Tracker { problem, objective, log: Vec::new(), best: None, restart: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(problem.settings.seed);

    let limits = SimplexLimits {
        lower: &problem.lower,
        upper: &problem.upper,
        x_tol: problem.settings.x_tol,
        f_tol: problem.settings.f_tol,
        max_evals: problem.settings.max_evals_per_restart,
    };
    let run = |tracker: &mut Tracker, x0: &[f64], scale: &[f64]| {
        simplex_minimize(&mut |x| tracker.eval(x), x0, scale, limits).2
    };

    let mut converged = run(&mut tracker, &problem.initial, &problem.settings.simplex_scale);
    let mut restarts = 0;
    // Restarts only chase feasibility; once the constraints hold the
    // remaining budget is not spent on polishing.
    while restarts < problem.settings.max_restarts && !tracker.feasible() {
        restarts += 1;
        tracker.restart = restarts;
        let center = tracker.best.as_ref().map(|b| b.1.params.clone()).unwrap_or_else(|| problem.initial.clone());
        let shrink = 0.25f64.powi(restarts as i32);
        let scale: Vec<f64> = problem.settings.simplex_scale.iter().map(|s| s * shrink).collect();
        let start: Vec<f64> =
            center.iter().zip(&scale).map(|(c, s)| c + 0.1 * s * rng.random_range(-1.0..1.0)).collect();
        converged = run(&mut tracker, &start, &scale);
    }

    let (best_penalized, best_eval) = tracker.best.clone().ok_or_else(|| Error::Problem("no evaluations".into()))?;
    let best = best_eval
        .breakdown
        .ok_or_else(|| Error::Problem(format!("no valid pulse found: {}", best_eval.message.unwrap_or_default())))?;
    Ok(OptResult {
        names: problem.names.clone(),
        best_params: best_eval.params,
        feasible: problem.thresholds.satisfied_by(&best),
        best,
        best_penalized,
        evaluations: tracker.log.len(),
        restarts,
        status: if converged { Status::Converged } else { Status::BudgetExhausted },
        log: tracker.log,
    })
}

/// One grid point of a landscape scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub params: Vec<f64>,
    pub evaluation: Evaluation,
}

/// Evaluates the objective on a rectangular grid spanning the problem bounds,
/// `resolutions[i]` points along parameter `i` (a single point sits at the
/// initial value). Points are evaluated in parallel; the output is in
/// row-major order with the last parameter varying fastest.
pub fn grid_scan(problem: &OptimizationProblem, resolutions: &[usize]) -> Result<Vec<ScanPoint>> {
    grid_scan_in(problem, &problem.lower, &problem.upper, resolutions)
}

/// [`grid_scan`] over an explicit box.
pub fn grid_scan_in(
    problem: &OptimizationProblem,
    lower: &[f64],
    upper: &[f64],
    resolutions: &[usize],
) -> Result<Vec<ScanPoint>> {
    let n = problem.dim();
    if resolutions.len() != n || lower.len() != n || upper.len() != n {
        return Err(Error::Problem(format!("grid needs {n} axes")));
    }
    if resolutions.contains(&0) {
        return Err(Error::Problem("grid resolution must be at least 1".into()));
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| match resolutions[i] {
            1 => vec![problem.initial[i]],
            m => (0..m).map(|k| lower[i] + (upper[i] - lower[i]) * k as f64 / (m - 1) as f64).collect(),
        })
        .collect();
    let total: usize = resolutions.iter().product();
    let objective = Objective::new(problem.scaffold, problem.dt)?;
    Ok(par::map_range(total, |flat| {
        let mut rem = flat;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = axes[i][rem % resolutions[i]];
            rem /= resolutions[i];
        }
        let evaluation = objective.evaluate(&x);
        ScanPoint { params: x, evaluation }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl_problem() -> OptimizationProblem {
        let mut p = OptimizationProblem::single_step(DeviceParams::table1()).unwrap();
        p.initial = vec![3.0, 4.0];
        p
    }

    fn minimize_fn(f: impl Fn(&[f64]) -> f64, x0: &[f64], problem: &OptimizationProblem) -> (Vec<f64>, f64, usize) {
        let mut evals = 0;
        let limits =
            SimplexLimits { lower: &problem.lower, upper: &problem.upper, x_tol: 1e-10, f_tol: 1e-16, max_evals: 400 };
        let (x, fx, converged) = simplex_minimize(
            &mut |x| {
                evals += 1;
                f(x)
            },
            x0,
            &problem.settings.simplex_scale,
            limits,
        );
        assert!(converged);
        (x, fx, evals)
    }

    #[test]
    fn quadratic_bowl_converges() {
        let p = bowl_problem();
        let (x, fx, evals) = minimize_fn(|x| (x[0] - 7.0).powi(2) + 3.0 * (x[1] - 11.0).powi(2), &p.initial, &p);
        assert!((x[0] - 7.0).abs() < 1e-8 && (x[1] - 11.0).abs() < 1e-8, "{x:?}");
        assert!(fx < 1e-15);
        assert!(evals < 200, "{evals} evaluations");
    }

    #[test]
    fn bounds_are_respected() {
        let p = bowl_problem();
        let (x, _, _) = minimize_fn(|x| (x[0] + 5.0).powi(2) + (x[1] - 100.0).powi(2), &p.initial, &p);
        assert!(x[0].abs() < 1e-9 && (x[1] - p.upper[1]).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn invalid_problem_rejected() {
        let mut p = bowl_problem();
        p.initial = vec![-1.0, 10.0];
        assert!(matches!(p.validate(), Err(Error::Problem(_))));
        let mut p = bowl_problem();
        p.lower.pop();
        assert!(p.validate().is_err());
        let mut p = bowl_problem();
        p.upper[0] = f64::INFINITY;
        assert!(p.validate().is_err());
    }

    #[test]
    fn invalid_pulse_scores_worst_case() {
        let p = bowl_problem();
        let e = objective(&p, &[10.0, 44.0]).unwrap();
        assert!(!e.is_valid());
        assert_eq!(e.total, INVALID_TOTAL);
        assert!(e.message.unwrap().contains("does not fit"));
        assert!(!objective(&p, &[10.0]).unwrap().is_valid());
    }

    #[test]
    fn degenerate_grid_is_single_evaluation() {
        let p = bowl_problem();
        let scan = grid_scan(&p, &[1, 1]).unwrap();
        assert_eq!(scan.len(), 1);
        assert_eq!(scan[0].params, p.initial);
        assert!(grid_scan(&p, &[0, 1]).is_err());
    }

    #[test]
    fn infeasible_box_yields_invalid_points() {
        let p = bowl_problem();
        let scan = grid_scan_in(&p, &[5.0, 40.0], &[6.0, 44.0], &[2, 2]).unwrap();
        assert_eq!(scan.len(), 4);
        assert!(scan.iter().all(|s| !s.evaluation.is_valid()));
        // last parameter varies fastest
        assert_eq!(scan[1].params, vec![5.0, 44.0]);
    }
}
