//! One function per subcommand. Each returns its results as data and writes
//! its files into the output directory.

use std::path::{Path, PathBuf};

use czgate::metrics::{
    computational_basis, paper_error, project_gate, ErrorBreakdown, GateMatrix, COMPUTATIONAL_LABELS,
};
use czgate::optimizer::{grid_scan, grid_scan_in, minimize, OptResult, ScanPoint};
use czgate::perturbation::{estimates, PerturbativeEstimates};
use czgate::propagator::evolve;
use czgate::spectra::{comoving_overlaps, spectrum_sweep, LabeledSpectrum, OverlapTrace};
use czgate::{Error, Result};

use crate::config::RunConfig;
use crate::io::{self, fmt_sig};

/// Overlap columns below this peak weight are left out of overlaps.csv.
pub const OVERLAP_COLUMN_CUTOFF: f64 = 1e-4;

pub type Report = Vec<(String, String)>;

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

pub fn format_report(report: &Report) -> String {
    report.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))
}

pub struct SpectrumOutput {
    pub spectrum: LabeledSpectrum,
    pub files: Vec<PathBuf>,
}

/// Labeled dressed levels along the configured pulse: `levels.csv` and
/// `trajectory.csv`.
pub fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Result<SpectrumOutput> {
    let device = cfg.device()?;
    let traj = cfg.trajectory()?;
    let spectrum = spectrum_sweep(&traj, &device, cfg.numerics.sample_dt_ns)?;
    prepare(out)?;
    let levels = out.join("levels.csv");
    let trajectory = out.join("trajectory.csv");
    io::write_levels(&levels, &spectrum)?;
    io::write_trajectory(&trajectory, &traj.sample(cfg.numerics.sample_dt_ns))?;
    Ok(SpectrumOutput { spectrum, files: vec![levels, trajectory] })
}

pub struct EvolveOutput {
    pub gate: GateMatrix,
    pub breakdown: ErrorBreakdown,
    pub unitarity_defect: f64,
    pub boundary_mismatch_ghz: f64,
    pub overlaps: Option<OverlapTrace>,
    pub report: Report,
    pub files: Vec<PathBuf>,
}

/// Propagates the configured pulse, scores the gate and writes `gate.csv`,
/// `report.txt`, `trajectory.csv` and optionally `overlaps.csv`.
pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> Result<EvolveOutput> {
    let device = cfg.device()?;
    let traj = cfg.trajectory()?;
    let basis = computational_basis(&device)?;
    let result = evolve(&traj, &device, 0.0, traj.t_gate, cfg.numerics.dt_ns, &[])?;
    let gate = project_gate(&result, &basis);
    let b = paper_error(&gate);

    let mut report: Report = vec![
        kv("t_gate_ns", fmt_sig(traj.t_gate)),
        kv("dt_ns", fmt_sig(cfg.numerics.dt_ns)),
        kv("error_1", fmt_sig(b.error_1)),
        kv("error_2", fmt_sig(b.error_2)),
        kv("error_3", fmt_sig(b.error_3)),
        kv("error_4", fmt_sig(b.error_4)),
        kv("total", fmt_sig(b.total)),
        kv("phi_1_rad", fmt_sig(b.phi_1)),
        kv("phi_2_rad", fmt_sig(b.phi_2)),
        kv("process_fidelity", fmt_sig(b.process_fidelity)),
        kv("leakage", fmt_sig(b.leakage)),
        kv("degenerate", b.degenerate),
        kv("unitarity_defect", fmt_sig(result.unitarity_defect)),
        kv("boundary_mismatch_GHz", fmt_sig(traj.boundary_mismatch())),
    ];
    for (k, l) in COMPUTATIONAL_LABELS.iter().enumerate() {
        report.push(kv(&format!("nu_{l}_idle_GHz"), fmt_sig(basis.energies_ghz[k])));
    }

    prepare(out)?;
    let mut files = vec![out.join("gate.csv"), out.join("report.txt"), out.join("trajectory.csv")];
    io::write_gate(&files[0], &gate)?;
    io::write_trajectory(&files[2], &traj.sample(cfg.numerics.sample_dt_ns))?;
    let overlaps = if cfg.output.overlaps {
        let trace =
            comoving_overlaps(&traj, &device, &COMPUTATIONAL_LABELS, cfg.numerics.sample_dt_ns, cfg.numerics.dt_ns)?;
        report.push(kv("overlap_completeness_defect", fmt_sig(trace.completeness_defect())));
        let path = out.join("overlaps.csv");
        io::write_overlaps(&path, &trace, OVERLAP_COLUMN_CUTOFF)?;
        files.push(path);
        Some(trace)
    } else {
        None
    };
    io::write_report(&files[1], &report)?;
    Ok(EvolveOutput {
        gate,
        breakdown: b,
        unitarity_defect: result.unitarity_defect,
        boundary_mismatch_ghz: traj.boundary_mismatch(),
        overlaps,
        report,
        files,
    })
}

pub struct OptimizeOutput {
    pub result: OptResult,
    pub scan: Option<Vec<ScanPoint>>,
    pub report: Report,
    pub files: Vec<PathBuf>,
}

pub fn optimize_report(r: &OptResult) -> Report {
    let mut report = Vec::new();
    for (name, x) in r.names.iter().zip(&r.best_params) {
        report.push(kv(name, fmt_sig(*x)));
    }
    let b = &r.best;
    report.extend([
        kv("error_1", fmt_sig(b.error_1)),
        kv("error_2", fmt_sig(b.error_2)),
        kv("error_3", fmt_sig(b.error_3)),
        kv("error_4", fmt_sig(b.error_4)),
        kv("total", fmt_sig(b.total)),
        kv("process_fidelity", fmt_sig(b.process_fidelity)),
        kv("evaluations", r.evaluations),
        kv("restarts", r.restarts),
        kv("status", r.status.as_str()),
        kv("feasible", r.feasible),
    ]);
    report
}

/// Runs the optimizer on the configured pulse family; writes
/// `optimization_log.csv`, `result.txt` and, when a scan is configured,
/// `scan.csv`.
pub fn cmd_optimize(cfg: &RunConfig, out: &Path) -> Result<OptimizeOutput> {
    let problem = cfg.problem()?;
    let o = &cfg.optimize;
    let scan = match &o.scan_resolution {
        None => None,
        Some(res) => Some(match (&o.scan_lower, &o.scan_upper) {
            (Some(lo), Some(hi)) => grid_scan_in(&problem, lo, hi, res),
            (None, None) => grid_scan(&problem, res),
            _ => Err(Error::Config("optimize.scan_lower and scan_upper must be given together".into())),
        }?),
    };
    let result = minimize(&problem)?;
    let report = optimize_report(&result);

    prepare(out)?;
    let mut files = vec![out.join("optimization_log.csv"), out.join("result.txt")];
    io::write_optimization_log(&files[0], &result.names, &result.log)?;
    io::write_report(&files[1], &report)?;
    if let Some(points) = &scan {
        let path = out.join("scan.csv");
        io::write_scan(&path, &result.names, points)?;
        files.push(path);
    }
    Ok(OptimizeOutput { result, scan, report, files })
}

pub fn analytics_report(e: &PerturbativeEstimates) -> Report {
    vec![
        kv("nu_q1_eval_GHz", fmt_sig(e.nu_q1_eval_ghz)),
        kv("g_eff_100_001_MHz", fmt_sig(e.g_eff_100_001_mhz)),
        kv("g_eff_200_101_MHz", fmt_sig(e.g_eff_200_101_mhz)),
        kv("t_2pi_ns", fmt_sig(e.t_2pi_ns)),
        kv("omega_zz_4th_MHz", fmt_sig(e.omega_zz_4th_mhz)),
        kv("t_cp_ns", fmt_sig(e.t_cp_ns)),
    ]
}

pub fn cmd_analytics(cfg: &RunConfig) -> Result<(PerturbativeEstimates, Report)> {
    let e = estimates(&cfg.device()?, cfg.coupling_eval_point()?)?;
    Ok((e, analytics_report(&e)))
}
