//! CSV output. Every file starts with a header naming each column and its
//! unit; numbers carry 12 significant digits so identical runs produce
//! identical bytes.

use std::fs::File;
use std::path::Path;

use csv::Writer;

use czgate::metrics::{GateMatrix, COMPUTATIONAL_LABELS};
use czgate::optimizer::{LogEntry, ScanPoint};
use czgate::pulses::TrajectorySample;
use czgate::spectra::{LabeledSpectrum, OverlapTrace};
use czgate::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `%.12g`: fixed notation for decimal exponents in [-5, 12), scientific
/// otherwise, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let p = SIGNIFICANT_DIGITS - 1;
    let sci = format!("{:.*e}", p, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIGNIFICANT_DIGITS as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn writer(path: &Path) -> Result<Writer<File>> {
    Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

fn finish(mut w: Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(fmt_sig).collect()
}

pub fn write_trajectory(path: &Path, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = writer(path)?;
    let e = io_err(path);
    w.write_record(["t_ns", "nu_q1_GHz", "nu_q2_GHz"]).map_err(&e)?;
    for s in samples {
        w.write_record(row([s.t, s.nu_q1, s.nu_q2])).map_err(&e)?;
    }
    finish(w, path)
}

/// Dressed and bare levels per sample. Weakly assigned samples list the
/// competing labels in the `ambiguous` column as `assigned|alternative:weight`.
pub fn write_levels(path: &Path, spectrum: &LabeledSpectrum) -> Result<()> {
    let mut w = writer(path)?;
    let e = io_err(path);
    let mut header = vec!["t_ns".to_string(), "nu_q1_GHz".into(), "nu_q2_GHz".into()];
    header.extend(spectrum.labels.iter().map(|l| format!("nu_{l}_GHz")));
    header.extend(spectrum.labels.iter().map(|l| format!("bare_nu_{l}_GHz")));
    header.push("labeling".into());
    header.push("ambiguous".into());
    w.write_record(&header).map_err(&e)?;
    for k in 0..spectrum.times.len() {
        let mut r = row([spectrum.times[k], spectrum.nu_q1[k], spectrum.nu_q2[k]]);
        r.extend(row(spectrum.dressed[k].iter().copied()));
        r.extend(row(spectrum.bare[k].iter().copied()));
        r.push(spectrum.methods[k].as_str().into());
        let flags: Vec<String> = spectrum
            .ambiguous
            .iter()
            .filter(|(i, _)| *i == k)
            .map(|(_, a)| format!("{}|{}:{}", a.assigned, a.alternative, fmt_sig(a.weight)))
            .collect();
        r.push(flags.join(";"));
        w.write_record(&r).map_err(&e)?;
    }
    finish(w, path)
}

/// One column per (comoving eigenstate, logic state) pair, named
/// `P_<eigen>_from_<logic>`; only pairs that ever exceed `min_weight` are
/// kept, except that a logic state's own eigenstate is always written.
pub fn write_overlaps(path: &Path, trace: &OverlapTrace, min_weight: f64) -> Result<()> {
    let mut columns = Vec::new();
    for (j, logic) in trace.logic.iter().enumerate() {
        for (k, eigen) in trace.eigen_labels.iter().enumerate() {
            let peak = trace.values.iter().map(|r| r[j][k]).fold(0.0, f64::max);
            if eigen == logic || peak > min_weight {
                columns.push((j, k, format!("P_{eigen}_from_{logic}")));
            }
        }
    }
    let mut w = writer(path)?;
    let e = io_err(path);
    let mut header = vec!["t_ns".to_string()];
    header.extend(columns.iter().map(|c| c.2.clone()));
    w.write_record(&header).map_err(&e)?;
    for (t, values) in trace.times.iter().zip(&trace.values) {
        let mut r = vec![fmt_sig(*t)];
        r.extend(columns.iter().map(|&(j, k, _)| fmt_sig(values[j][k])));
        w.write_record(&r).map_err(&e)?;
    }
    finish(w, path)
}

/// Rows and columns in the order 000, 100, 001, 101; phases in radians.
pub fn write_gate(path: &Path, m: &GateMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let e = io_err(path);
    w.write_record(["row", "col", "magnitude", "phase_rad"]).map_err(&e)?;
    for (r, lr) in COMPUTATIONAL_LABELS.iter().enumerate() {
        for (c, lc) in COMPUTATIONAL_LABELS.iter().enumerate() {
            let z = m[(r, c)];
            w.write_record([lr.to_string(), lc.to_string(), fmt_sig(z.norm()), fmt_sig(z.arg())]).map_err(&e)?;
        }
    }
    finish(w, path)
}

pub fn write_optimization_log(path: &Path, names: &[String], log: &[LogEntry]) -> Result<()> {
    let mut w = writer(path)?;
    let e = io_err(path);
    let mut header = vec!["eval".to_string(), "restart".into()];
    header.extend(names.iter().cloned());
    header.extend(
        ["error_1", "error_2", "error_3", "error_4", "total", "penalized", "best_so_far", "valid"].map(String::from),
    );
    w.write_record(&header).map_err(&e)?;
    for entry in log {
        let ev = &entry.evaluation;
        let mut r = vec![entry.index.to_string(), entry.restart.to_string()];
        r.extend(row(ev.params.iter().copied()));
        match &ev.breakdown {
            Some(b) => r.extend(row([b.error_1, b.error_2, b.error_3, b.error_4])),
            None => r.extend(["", "", "", ""].map(String::from)),
        }
        r.extend(row([ev.total, entry.penalized, entry.best_so_far]));
        r.push(ev.is_valid().to_string());
        w.write_record(&r).map_err(&e)?;
    }
    finish(w, path)
}

pub fn write_scan(path: &Path, names: &[String], points: &[ScanPoint]) -> Result<()> {
    let mut w = writer(path)?;
    let e = io_err(path);
    let mut header: Vec<String> = names.to_vec();
    header.extend(["error_1", "error_2", "error_3", "error_4", "total", "valid"].map(String::from));
    w.write_record(&header).map_err(&e)?;
    for p in points {
        let mut r = row(p.params.iter().copied());
        match &p.evaluation.breakdown {
            Some(b) => r.extend(row([b.error_1, b.error_2, b.error_3, b.error_4])),
            None => r.extend(["", "", "", ""].map(String::from)),
        }
        r.push(fmt_sig(p.evaluation.total));
        r.push(p.evaluation.is_valid().to_string());
        w.write_record(&r).map_err(&e)?;
    }
    finish(w, path)
}

/// Writes `key = value` lines.
pub fn write_report(path: &Path, lines: &[(String, String)]) -> Result<()> {
    let body: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(6.40959), "6.40959");
        assert_eq!(fmt_sig(13.0), "13");
        assert_eq!(fmt_sig(-0.25), "-0.25");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0 * 1e3), "666.666666667");
        assert_eq!(fmt_sig(1.23456789012345e-7), "1.23456789012e-07");
        assert_eq!(fmt_sig(4.2e15), "4.2e+15");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(123456789012.4), "123456789012");
        assert_eq!(fmt_sig(999999999999.9), "1e+12");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
    }

    #[test]
    fn round_trip_keeps_twelve_digits() {
        for x in [std::f64::consts::PI, 6.123456789012345, 1e-9 / 7.0, 12345.678901234] {
            let y: f64 = fmt_sig(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 5e-12, "{x} -> {}", fmt_sig(x));
        }
    }

    #[test]
    fn trajectory_csv_has_units() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        let samples = [TrajectorySample { t: 0.0, nu_q1: 6.6, nu_q2: 6.5 }];
        write_trajectory(&path, &samples).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t_ns,nu_q1_GHz,nu_q2_GHz\n0,6.6,6.5\n");
    }
}
