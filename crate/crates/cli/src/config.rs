//! Run configuration: a small TOML document with the unit of every quantity
//! in its key name. Unknown keys are rejected everywhere.
//!
//! ```toml
//! [device]
//! nu_q1_ghz = 6.6
//! nu_q2_ghz = 6.5
//! nu_b_ghz = 6.0
//! eta_1_ghz = 0.2
//! eta_2_ghz = 0.2
//! g_b1_mhz = 75.0
//! g_b2_mhz = 75.0
//!
//! [pulse]
//! type = "single-step"
//! undershoot_mhz = 9.59
//! t_undershoot_ns = 29.1
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use czgate::model::{ghz, DeviceParams};
use czgate::optimizer::{OptimizationProblem, Scaffold, Thresholds};
use czgate::perturbation::default_coupling_eval_point;
use czgate::propagator::{DEFAULT_CHECKPOINT_DT, DEFAULT_DT};
use czgate::pulses::{cz_trajectory, swap_cz_trajectory, CzPulseSpec, FrequencyTrajectory, SwapCzPulseSpec};
use czgate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub analytics: AnalyticsSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub nu_q1_ghz: f64,
    pub nu_q2_ghz: f64,
    pub nu_b_ghz: f64,
    pub eta_1_ghz: f64,
    pub eta_2_ghz: f64,
    pub g_b1_mhz: f64,
    pub g_b2_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseSection {
    /// Both qubits parked at their idle frequencies.
    Idle {
        #[serde(default = "default_t_gate")]
        t_gate_ns: f64,
    },
    SingleStep {
        /// Defaults to the perturbative starting point when absent.
        undershoot_mhz: Option<f64>,
        t_undershoot_ns: Option<f64>,
        #[serde(default = "default_sigma")]
        sigma_in_ns: f64,
        #[serde(default = "default_sigma")]
        sigma_fin_ns: f64,
        #[serde(default = "default_t_gate")]
        t_gate_ns: f64,
    },
    Swap3 {
        #[serde(default = "default_swap_sigma")]
        sigma_ns: f64,
        t_move_in_ns: Option<f64>,
        nu_q2_dwell_ghz: Option<f64>,
        t_dwell_ns: Option<f64>,
        t_move_out_ns: Option<f64>,
    },
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection::Idle { t_gate_ns: default_t_gate() }
    }
}

fn default_t_gate() -> f64 {
    45.0
}

fn default_sigma() -> f64 {
    3.0
}

fn default_swap_sigma() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub dt_ns: f64,
    /// Sampling interval for spectra, trajectories and overlaps.
    pub sample_dt_ns: f64,
    pub bus_levels: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self { dt_ns: DEFAULT_DT, sample_dt_ns: DEFAULT_CHECKPOINT_DT, bus_levels: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub seed: u64,
    pub max_evals_per_restart: usize,
    pub max_restarts: usize,
    pub population_threshold: f64,
    pub phase_threshold: f64,
    pub penalty_weight: f64,
    /// Starting point; defaults to the perturbative estimate (single-step)
    /// or resonant MOVEs with a full 011 <-> 002 cycle (swap3).
    pub initial: Option<Vec<f64>>,
    /// Grid points per parameter for an optional landscape scan.
    pub scan_resolution: Option<Vec<usize>>,
    pub scan_lower: Option<Vec<f64>>,
    pub scan_upper: Option<Vec<f64>>,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let t = Thresholds::default();
        Self {
            seed: 0,
            max_evals_per_restart: 500,
            max_restarts: 3,
            population_threshold: t.population,
            phase_threshold: t.phase,
            penalty_weight: 1e3,
            initial: None,
            scan_resolution: None,
            scan_lower: None,
            scan_upper: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticsSection {
    /// Qubit-1 frequency for the effective couplings; defaults to
    /// `nu_q1 - eta_1`.
    pub nu_q1_eval_ghz: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Criterion numbers this configuration is known to fail.
    pub expected_failures: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Also write comoving-eigenstate overlaps from `evolve`.
    pub overlaps: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.device()?;
        let n = &self.numerics;
        if !(n.dt_ns.is_finite() && n.dt_ns > 0.0) {
            return Err(Error::Config(format!("numerics.dt_ns must be positive, got {}", n.dt_ns)));
        }
        if !(n.sample_dt_ns.is_finite() && n.sample_dt_ns > 0.0) {
            return Err(Error::Config(format!("numerics.sample_dt_ns must be positive, got {}", n.sample_dt_ns)));
        }
        let o = &self.optimize;
        if o.max_evals_per_restart < 3 {
            return Err(Error::Config("optimize.max_evals_per_restart must be at least 3".into()));
        }
        for (k, v) in [
            ("population_threshold", o.population_threshold),
            ("phase_threshold", o.phase_threshold),
            ("penalty_weight", o.penalty_weight),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("optimize.{k} must be positive, got {v}")));
            }
        }
        if let Some(nu) = self.analytics.nu_q1_eval_ghz {
            if !(nu.is_finite() && nu > 0.0) {
                return Err(Error::Config(format!("analytics.nu_q1_eval_ghz must be positive, got {nu}")));
            }
        }
        if let Some(bad) = self.verify.expected_failures.iter().find(|c| !(1..=7).contains(*c)) {
            return Err(Error::Config(format!("verify.expected_failures: no criterion {bad}")));
        }
        Ok(())
    }

    pub fn device(&self) -> Result<DeviceParams> {
        let d = &self.device;
        DeviceParams::from_cyclic(
            d.nu_q1_ghz,
            d.nu_q2_ghz,
            d.nu_b_ghz,
            d.eta_1_ghz,
            d.eta_2_ghz,
            d.g_b1_mhz,
            d.g_b2_mhz,
            self.numerics.bus_levels,
        )
        .map_err(|e| Error::Config(format!("device: {e}")))
    }

    /// Qubit-1 frequency (rad/ns) for the effective-coupling estimates.
    pub fn coupling_eval_point(&self) -> Result<f64> {
        Ok(match self.analytics.nu_q1_eval_ghz {
            Some(nu) => ghz(nu),
            None => default_coupling_eval_point(&self.device()?),
        })
    }

    /// The optimization problem for the configured pulse family, started
    /// from `optimize.initial` or the family's default guess.
    pub fn problem(&self) -> Result<OptimizationProblem> {
        let device = self.device()?;
        let mut problem = match self.pulse {
            PulseSection::Idle { .. } => {
                return Err(Error::Config("pulse.type = \"idle\" has no parameters to optimize".into()))
            }
            PulseSection::SingleStep { sigma_in_ns, sigma_fin_ns, t_gate_ns, .. } => {
                let seeded = OptimizationProblem::single_step(device)?;
                let scaffold =
                    Scaffold::SingleStep { device, t_gate: t_gate_ns, sigma_in: sigma_in_ns, sigma_fin: sigma_fin_ns };
                OptimizationProblem::single_step_from(scaffold, [seeded.initial[0], seeded.initial[1]])
            }
            PulseSection::Swap3 { sigma_ns, .. } => OptimizationProblem::swap(device, sigma_ns),
        };
        let o = &self.optimize;
        if let Some(x) = &o.initial {
            if x.len() != problem.dim() {
                return Err(Error::Config(format!(
                    "optimize.initial has {} entries, expected {} ({})",
                    x.len(),
                    problem.dim(),
                    problem.names.join(", ")
                )));
            }
            problem.initial = x.clone();
        }
        problem.dt = self.numerics.dt_ns;
        problem.thresholds = Thresholds { population: o.population_threshold, phase: o.phase_threshold };
        problem.settings.seed = o.seed;
        problem.settings.max_evals_per_restart = o.max_evals_per_restart;
        problem.settings.max_restarts = o.max_restarts;
        problem.settings.penalty_weight = o.penalty_weight;
        problem.validate().map_err(|e| Error::Config(format!("optimize: {e}")))?;
        Ok(problem)
    }

    /// Pulse parameters from the pulse section; missing entries fall back to
    /// the optimizer's default starting point.
    fn pulse_parameters(&self) -> Result<Vec<f64>> {
        let given: Vec<Option<f64>> = match self.pulse {
            PulseSection::Idle { .. } => return Ok(Vec::new()),
            PulseSection::SingleStep { undershoot_mhz, t_undershoot_ns, .. } => vec![undershoot_mhz, t_undershoot_ns],
            PulseSection::Swap3 { t_move_in_ns, nu_q2_dwell_ghz, t_dwell_ns, t_move_out_ns, .. } => {
                vec![t_move_in_ns, nu_q2_dwell_ghz, t_dwell_ns, t_move_out_ns]
            }
        };
        if given.iter().all(Option::is_some) {
            return Ok(given.into_iter().flatten().collect());
        }
        let mut defaults = self.clone();
        defaults.optimize.initial = None;
        let fallback = defaults.problem()?.initial;
        Ok(given.iter().zip(fallback).map(|(g, f)| g.unwrap_or(f)).collect())
    }

    /// The configured pulse.
    pub fn trajectory(&self) -> Result<FrequencyTrajectory> {
        let device = self.device()?;
        let traj = match self.pulse {
            PulseSection::Idle { t_gate_ns } => {
                if !(t_gate_ns.is_finite() && t_gate_ns > 0.0) {
                    return Err(Error::Config(format!("pulse.t_gate_ns must be positive, got {t_gate_ns}")));
                }
                Ok(FrequencyTrajectory::idle(&device, t_gate_ns))
            }
            PulseSection::SingleStep { sigma_in_ns, sigma_fin_ns, t_gate_ns, .. } => {
                let x = self.pulse_parameters()?;
                cz_trajectory(&CzPulseSpec {
                    undershoot_mhz: x[0],
                    t_undershoot: x[1],
                    sigma_in: sigma_in_ns,
                    sigma_fin: sigma_fin_ns,
                    t_gate: t_gate_ns,
                    device,
                })
            }
            PulseSection::Swap3 { sigma_ns, .. } => {
                let x = self.pulse_parameters()?;
                swap_cz_trajectory(&SwapCzPulseSpec::from_parameters(device, sigma_ns, x[0], x[1], x[2], x[3]))
            }
        };
        traj.map_err(|e| Error::Config(format!("pulse: {e}")))
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, dt_ns: Option<f64>, seed: Option<u64>) -> Result<Self> {
        if let Some(dt) = dt_ns {
            self.numerics.dt_ns = dt;
        }
        if let Some(seed) = seed {
            self.optimize.seed = seed;
        }
        self.validate()?;
        Ok(self)
    }
}
