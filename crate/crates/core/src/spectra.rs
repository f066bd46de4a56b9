//! Instantaneous eigenanalysis along a trajectory: labeled dressed levels,
//! the numeric ZZ rate and overlaps of evolved states with the comoving
//! eigenbasis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{block_partition, eigh, submatrix};
use crate::model::{
    to_ghz, BareLabel, DeviceParams, Hamiltonian, HamiltonianBuilder, HilbertSpace, L000, L001, L100, L101,
};
use crate::par;
use crate::propagator::evolve;
use crate::pulses::FrequencyTrajectory;

/// Below this squared overlap a label assignment is flagged.
pub const AMBIGUITY_THRESHOLD: f64 = 0.5;

const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues (rad/ns, ascending) with eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigenpairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Diagonalizes a Hermitian snapshot. Disconnected blocks (excitation
/// sectors) are diagonalized separately so eigenvectors have exact zeros
/// outside their block.
pub fn eigensolve(h: &Hamiltonian) -> Result<Eigenpairs> {
    let deviation = h.hermiticity_defect();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let m = h.matrix();
    let n = m.nrows();
    let mut pairs: Vec<(f64, DVector<C64>)> = Vec::with_capacity(n);
    for block in block_partition(m) {
        let (vals, vecs) = eigh(&submatrix(m, &block));
        for (c, &e) in vals.iter().enumerate() {
            let mut v = DVector::zeros(n);
            for (r, &i) in block.iter().enumerate() {
                v[i] = vecs[(r, c)];
            }
            pairs.push((e, v));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = DMatrix::from_columns(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>());
    Ok(Eigenpairs { values, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMethod {
    MaxOverlap,
    Continuation,
}

impl LabelMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelMethod::MaxOverlap => "max-overlap",
            LabelMethod::Continuation => "continuation",
        }
    }
}

/// A weakly determined label: the assigned label carries only `weight` of
/// the squared overlap, `alternative` is the runner-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ambiguity {
    pub column: usize,
    pub assigned: BareLabel,
    pub alternative: BareLabel,
    pub weight: f64,
}

/// Bare label attached to each eigenvector column.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub labels: Vec<BareLabel>,
    pub method: LabelMethod,
    pub ambiguous: Vec<Ambiguity>,
}

impl Assignment {
    pub fn column_of(&self, label: BareLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn is_ambiguous(&self, label: BareLabel) -> bool {
        self.ambiguous.iter().any(|a| a.assigned == label)
    }
}

fn dominant_sector(v: &DVector<C64>, space: &HilbertSpace) -> usize {
    let mut best = (0, -1.0);
    for (i, z) in v.iter().enumerate() {
        let w = z.norm_sqr();
        if w > best.1 {
            best = (i, w);
        }
    }
    space.excitations(best.0)
}

/// `(row, col, weight, runner-up (row, weight))`
type Match = (usize, usize, f64, Option<(usize, f64)>);

/// Greedy bijection maximizing `weight(row, col)` within matching sectors.
/// Returns, for every column, the matched row and its weight plus the best
/// weight among the other rows of the same sector.
fn greedy_match(rows: &[usize], cols: &[usize], weight: impl Fn(usize, usize) -> f64) -> Vec<Match> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            cand.push((weight(r, c), r, c));
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; rows.iter().max().map_or(0, |m| m + 1)];
    let mut col_used = vec![false; cols.iter().max().map_or(0, |m| m + 1)];
    let mut out = Vec::with_capacity(cols.len());
    for &(w, r, c) in &cand {
        if row_used[r] || col_used[c] {
            continue;
        }
        row_used[r] = true;
        col_used[c] = true;
        let runner_up = rows.iter().filter(|&&o| o != r).map(|&o| (o, weight(o, c))).max_by(|a, b| a.1.total_cmp(&b.1));
        out.push((c, r, w, runner_up));
    }
    out
}

/// Assigns bare labels to eigenvectors.
///
/// Without `previous`, each eigenvector takes the bare label of its largest
/// component, resolved greedily into a bijection per excitation sector. With
/// `previous`, labels are carried over from the best-overlapping eigenvector
/// of the earlier point, which keeps them smooth through anticrossings.
pub fn label_eigenstates(
    eig: &Eigenpairs,
    space: &HilbertSpace,
    previous: Option<(&Eigenpairs, &Assignment)>,
) -> Assignment {
    let n = eig.len();
    let v = &eig.vectors;
    let col_sector: Vec<usize> = (0..n).map(|c| dominant_sector(&v.column(c).into_owned(), space)).collect();
    let max_sector = space.labels().iter().map(BareLabel::excitations).max().unwrap_or(0);
    let mut labels = vec![BareLabel::new(0, 0, 0); n];
    let mut ambiguous = Vec::new();
    let method = if previous.is_some() { LabelMethod::Continuation } else { LabelMethod::MaxOverlap };

    for sector in 0..=max_sector {
        let cols: Vec<usize> = (0..n).filter(|&c| col_sector[c] == sector).collect();
        match previous {
            None => {
                let rows: Vec<usize> = (0..n).filter(|&i| space.excitations(i) == sector).collect();
                for (c, r, w, alt) in greedy_match(&rows, &cols, |r, c| v[(r, c)].norm_sqr()) {
                    labels[c] = space.label(r);
                    if w < AMBIGUITY_THRESHOLD {
                        ambiguous.push(Ambiguity {
                            column: c,
                            assigned: space.label(r),
                            alternative: alt.map_or(space.label(r), |a| space.label(a.0)),
                            weight: w,
                        });
                    }
                }
            }
            Some((old, old_labels)) => {
                let old_sector: Vec<usize> =
                    (0..old.len()).map(|k| dominant_sector(&old.vectors.column(k).into_owned(), space)).collect();
                let rows: Vec<usize> = (0..old.len()).filter(|&k| old_sector[k] == sector).collect();
                let overlap = |k: usize, c: usize| old.vectors.column(k).dotc(&v.column(c)).norm_sqr();
                for (c, k, w, alt) in greedy_match(&rows, &cols, overlap) {
                    labels[c] = old_labels.labels[k];
                    if w < AMBIGUITY_THRESHOLD {
                        ambiguous.push(Ambiguity {
                            column: c,
                            assigned: old_labels.labels[k],
                            alternative: alt.map_or(old_labels.labels[k], |a| old_labels.labels[a.0]),
                            weight: w,
                        });
                    }
                }
            }
        }
    }
    Assignment { labels, method, ambiguous }
}

/// Dressed levels along a trajectory, one row per sample time. Columns follow
/// `labels` (the space's index order).
#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    pub times: Vec<f64>,
    pub nu_q1: Vec<f64>,
    pub nu_q2: Vec<f64>,
    pub labels: Vec<BareLabel>,
    /// Dressed eigenfrequencies, cyclic GHz, `[time][label]`.
    pub dressed: Vec<Vec<f64>>,
    /// Bare combination frequencies, cyclic GHz, `[time][label]`.
    pub bare: Vec<Vec<f64>>,
    pub methods: Vec<LabelMethod>,
    /// `(sample index, flag)` for every weak assignment.
    pub ambiguous: Vec<(usize, Ambiguity)>,
}

impl LabeledSpectrum {
    pub fn column(&self, label: BareLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn dressed_series(&self, label: BareLabel) -> Option<Vec<f64>> {
        let c = self.column(label)?;
        Some(self.dressed.iter().map(|row| row[c]).collect())
    }

    pub fn bare_series(&self, label: BareLabel) -> Option<Vec<f64>> {
        let c = self.column(label)?;
        Some(self.bare.iter().map(|row| row[c]).collect())
    }
}

/// Eigensolves every sample time (in parallel), then labels them
/// sequentially by continuation from a max-overlap start.
fn labeled_eigenpairs(
    builder: &HamiltonianBuilder,
    traj: &FrequencyTrajectory,
    times: &[f64],
) -> Result<Vec<(Eigenpairs, Assignment)>> {
    let eigs: Vec<Result<Eigenpairs>> = par::map(times, |&t| {
        let (w1, w2) = traj.omegas(t);
        eigensolve(&builder.at(w1, w2))
    });
    let mut out: Vec<(Eigenpairs, Assignment)> = Vec::with_capacity(times.len());
    for eig in eigs {
        let eig = eig?;
        let assignment = match out.last() {
            None => label_eigenstates(&eig, builder.space(), None),
            Some((pe, pa)) => label_eigenstates(&eig, builder.space(), Some((pe, pa))),
        };
        out.push((eig, assignment));
    }
    Ok(out)
}

pub fn spectrum_sweep(traj: &FrequencyTrajectory, params: &DeviceParams, sample_dt: f64) -> Result<LabeledSpectrum> {
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::Integration(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let builder = HamiltonianBuilder::new(params)?;
    let space = builder.space();
    let times = traj.sample_times(sample_dt);
    let labeled = labeled_eigenpairs(&builder, traj, &times)?;

    let labels = space.labels().to_vec();
    let mut spectrum = LabeledSpectrum {
        times: times.clone(),
        nu_q1: times.iter().map(|&t| traj.nu_q1(t)).collect(),
        nu_q2: times.iter().map(|&t| traj.nu_q2(t)).collect(),
        labels: labels.clone(),
        dressed: Vec::with_capacity(times.len()),
        bare: Vec::with_capacity(times.len()),
        methods: Vec::with_capacity(times.len()),
        ambiguous: Vec::new(),
    };
    for (k, (eig, assignment)) in labeled.iter().enumerate() {
        let h = builder.at(traj.omegas(times[k]).0, traj.omegas(times[k]).1);
        let mut dressed = vec![0.0; labels.len()];
        for (c, l) in assignment.labels.iter().enumerate() {
            dressed[space.index(*l)?] = to_ghz(eig.values[c]);
        }
        spectrum.dressed.push(dressed);
        spectrum.bare.push((0..labels.len()).map(|i| to_ghz(h.matrix()[(i, i)].re)).collect());
        spectrum.methods.push(assignment.method);
        spectrum.ambiguous.extend(assignment.ambiguous.iter().map(|a| (k, *a)));
    }
    Ok(spectrum)
}

/// Eigenvectors of H at `(omega1, omega2)` for the requested labels, assigned
/// by maximum overlap. Each vector is gauge fixed so its component on its own
/// bare label is real and positive. Returns the vectors, their
/// eigenfrequencies (rad/ns) and whether any assignment was ambiguous.
/// Dressed vectors, their energies and the labels whose assignment was
/// ambiguous.
pub type DressedStates = (Vec<DVector<C64>>, Vec<f64>, Vec<BareLabel>);

pub fn dressed_states(params: &DeviceParams, omega1: f64, omega2: f64, wanted: &[BareLabel]) -> Result<DressedStates> {
    let builder = HamiltonianBuilder::new(params)?;
    let space = builder.space();
    let eig = eigensolve(&builder.at(omega1, omega2))?;
    let assignment = label_eigenstates(&eig, space, None);
    let mut vectors = Vec::with_capacity(wanted.len());
    let mut energies = Vec::with_capacity(wanted.len());
    let mut flagged = Vec::new();
    for &label in wanted {
        let c = assignment.column_of(label).ok_or(Error::LabelOutOfRange(label))?;
        if assignment.is_ambiguous(label) {
            flagged.push(label);
        }
        let mut v = eig.vectors.column(c).into_owned();
        let own = v[space.index(label)?];
        if own.norm() > 0.0 {
            let gauge = own.conj() / own.norm();
            v.iter_mut().for_each(|z| *z *= gauge);
        }
        vectors.push(v);
        energies.push(eig.values[c]);
    }
    Ok((vectors, energies, flagged))
}

/// `eps_101 - eps_100 - eps_001 + eps_000` in cyclic MHz.
pub fn omega_zz_numeric(params: &DeviceParams, omega1: f64, omega2: f64) -> Result<f64> {
    let (_, e, flagged) = dressed_states(params, omega1, omega2, &[L000, L100, L001, L101])?;
    if !flagged.is_empty() {
        return Err(Error::AmbiguousLabel(flagged));
    }
    Ok(to_ghz(e[3] - e[1] - e[2] + e[0]) * 1e3)
}

/// `|<eig_k(t)| U(t) |logic_j>|^2` on a time grid.
#[derive(Debug, Clone)]
pub struct OverlapTrace {
    pub times: Vec<f64>,
    pub logic: Vec<BareLabel>,
    /// Comoving eigenstate labels, in the space's index order.
    pub eigen_labels: Vec<BareLabel>,
    /// `[time][logic j][eigen k]`
    pub values: Vec<Vec<Vec<f64>>>,
}

impl OverlapTrace {
    pub fn series(&self, eigen: BareLabel, logic: BareLabel) -> Option<Vec<f64>> {
        let k = self.eigen_labels.iter().position(|&l| l == eigen)?;
        let j = self.logic.iter().position(|&l| l == logic)?;
        Some(self.values.iter().map(|row| row[j][k]).collect())
    }

    /// Largest |sum_k P_kj - 1| over all times and logic states.
    pub fn completeness_defect(&self) -> f64 {
        self.values.iter().flat_map(|row| row.iter().map(|p| (p.iter().sum::<f64>() - 1.0).abs())).fold(0.0, f64::max)
    }
}

/// Evolves the dressed idle states `logic_states` along `traj` and projects
/// them on the comoving eigenstates every `sample_dt`.
pub fn comoving_overlaps(
    traj: &FrequencyTrajectory,
    params: &DeviceParams,
    logic_states: &[BareLabel],
    sample_dt: f64,
    dt: f64,
) -> Result<OverlapTrace> {
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::Integration(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let builder = HamiltonianBuilder::new(params)?;
    let space = builder.space();
    let (logic, _, _) = dressed_states(params, params.omega_q1_idle, params.omega_q2_idle, logic_states)?;
    let times = traj.sample_times(sample_dt);
    let evolution = evolve(traj, params, 0.0, traj.t_gate, dt.min(sample_dt), &times)?;
    let labeled = labeled_eigenpairs(&builder, traj, &times)?;

    let values = par::map_range(times.len(), |k| {
        let u = &evolution.checkpoints[k].1;
        let (eig, assignment) = &labeled[k];
        logic
            .iter()
            .map(|psi| {
                let evolved = u * psi;
                let mut row = vec![0.0; space.dim()];
                for (c, l) in assignment.labels.iter().enumerate() {
                    let i = space.index(*l).expect("label from this space");
                    row[i] = eig.vectors.column(c).dotc(&evolved).norm_sqr();
                }
                row
            })
            .collect()
    });
    Ok(OverlapTrace { times, logic: logic_states.to_vec(), eigen_labels: space.labels().to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_hamiltonian, ghz, mhz, L200};
    use crate::pulses::{cz_trajectory, CzPulseSpec};

    #[test]
    fn decoupled_eigenvalues_and_labels_are_bare() {
        let p = DeviceParams::table1().with_coupling_mhz(0.0);
        let space = HilbertSpace::new(3).unwrap();
        let h = assemble_hamiltonian(&p, p.omega_q1_idle, p.omega_q2_idle);
        let eig = eigensolve(&h).unwrap();
        let a = label_eigenstates(&eig, &space, None);
        assert!(a.ambiguous.is_empty());
        for (c, l) in a.labels.iter().enumerate() {
            let bare = crate::model::bare_frequency(*l, p.omega_q1_idle, p.omega_q2_idle, &p).unwrap();
            assert!((to_ghz(eig.values[c]) - bare).abs() < 1e-12);
            assert!((eig.vectors[(space.index(*l).unwrap(), c)].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let p = DeviceParams::table1();
        let eig = eigensolve(&assemble_hamiltonian(&p, ghz(6.6), ghz(6.41))).unwrap();
        let gram = eig.vectors.adjoint() * &eig.vectors;
        assert!(crate::linalg::max_abs_diff(&gram, &DMatrix::identity(27, 27)) < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut m = assemble_hamiltonian(&DeviceParams::table1(), 40.0, 40.0).into_matrix();
        m[(0, 1)] = C64::new(0.0, 1.0);
        assert!(matches!(eigensolve(&Hamiltonian::from_matrix(m)), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn resonant_two_level_gap_is_twice_the_coupling() {
        // qubit 1 on resonance with the bus: 100 and 010 split by 2 g
        let p = DeviceParams::table1();
        let eig = eigensolve(&assemble_hamiltonian(&p, p.omega_b, ghz(7.5))).unwrap();
        let space = HilbertSpace::new(3).unwrap();
        let a = label_eigenstates(&eig, &space, None);
        let one: Vec<f64> = (0..27).filter(|&c| a.labels[c].excitations() == 1).map(|c| eig.values[c]).collect();
        // 100/010 pair sits near omega_b, qubit 2 far away at 7.5 GHz
        let gap = one[1] - one[0];
        assert!((gap - 2.0 * p.g_b1).abs() / (2.0 * p.g_b1) < 0.01, "gap {gap}");
    }

    #[test]
    fn idle_101_state_is_dominant() {
        let p = DeviceParams::table1();
        let (v, _, flagged) = dressed_states(&p, p.omega_q1_idle, p.omega_q2_idle, &[L101]).unwrap();
        assert!(flagged.is_empty());
        let i = HilbertSpace::new(3).unwrap().index(L101).unwrap();
        assert!(v[0][i].norm_sqr() > 0.9);
        assert!(v[0][i].im == 0.0 && v[0][i].re > 0.0);
    }

    #[test]
    fn idle_two_excitation_levels_near_bare_values() {
        let p = DeviceParams::table1();
        let s = spectrum_sweep(&FrequencyTrajectory::idle(&p, 1.0), &p, 1.0).unwrap();
        for (label, nu) in [("101", 13.1), ("110", 12.6), ("011", 12.5), ("200", 13.0), ("020", 12.0), ("002", 12.8)] {
            let l: BareLabel = label.parse().unwrap();
            let d = s.dressed_series(l).unwrap()[0];
            // dispersive shifts are at most a few g^2 / Delta ~ 30 MHz here
            assert!((d - nu).abs() < 0.05, "{label}: {d}");
            assert!(s.dressed_series(l).unwrap().windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
        }
    }

    #[test]
    fn continuation_keeps_labels_through_the_plateau() {
        let p = DeviceParams::table1();
        let traj = cz_trajectory(&CzPulseSpec::standard(p, 9.59, 29.1)).unwrap();
        let s = spectrum_sweep(&traj, &p, 0.25).unwrap();
        let bare101 = s.bare_series(L101).unwrap();
        let bare200 = s.bare_series(L200).unwrap();
        let mid = s.times.len() / 2;
        assert!((bare101[mid] - 13.00959).abs() < 1e-4);
        assert!(bare200.iter().all(|&v| (v - 13.0).abs() < 1e-12));
        // dressed 101 stays the upper member of the pair throughout
        let d101 = s.dressed_series(L101).unwrap();
        let d200 = s.dressed_series(L200).unwrap();
        assert!(d101.iter().zip(&d200).all(|(a, b)| a > b));
        assert_eq!(s.methods[0], LabelMethod::MaxOverlap);
        assert!(s.methods[1..].iter().all(|m| *m == LabelMethod::Continuation));
    }

    #[test]
    fn plateau_states_are_strongly_mixed() {
        let p = DeviceParams::table1();
        let plateau = ghz(6.40959);
        let (v, _, _) = dressed_states(&p, p.omega_q1_idle, plateau, &[L101, L200]).unwrap();
        let space = HilbertSpace::new(3).unwrap();
        let w = v[0][space.index(L101).unwrap()].norm_sqr();
        assert!(w > 0.5 && w < 0.75, "weight {w}");
        let w = v[1][space.index(L200).unwrap()].norm_sqr();
        assert!(w > 0.5 && w < 0.75, "weight {w}");
    }

    #[test]
    fn three_way_mixture_is_flagged() {
        // rotate 101, 200 and 110 by a 3x3 Fourier matrix: every weight is 1/3
        let space = HilbertSpace::new(3).unwrap();
        let idx: Vec<usize> = [L101, L200, BareLabel::new(1, 1, 0)].iter().map(|&l| space.index(l).unwrap()).collect();
        let mut vectors = DMatrix::<C64>::identity(27, 27);
        let w = std::f64::consts::TAU / 3.0;
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                vectors[(i, j)] = C64::from_polar(1.0 / 3f64.sqrt(), w * (r * c) as f64);
            }
        }
        let eig = Eigenpairs { values: (0..27).map(|i| i as f64).collect(), vectors };
        let a = label_eigenstates(&eig, &space, None);
        assert_eq!(a.ambiguous.len(), 3);
        assert!(a.ambiguous.iter().all(|x| (x.weight - 1.0 / 3.0).abs() < 1e-12 && x.alternative != x.assigned));
        let mut got: Vec<BareLabel> = idx.iter().map(|&c| a.labels[c]).collect();
        got.sort();
        let mut want = vec![L101, L200, BareLabel::new(1, 1, 0)];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn omega_zz_vanishes_without_coupling_and_is_mirror_symmetric() {
        let p = DeviceParams::table1();
        let g0 = p.with_coupling_mhz(0.0);
        assert!(omega_zz_numeric(&g0, g0.omega_q1_idle, g0.omega_q2_idle).unwrap().abs() < 1e-9);
        let q = DeviceParams { g_b2: mhz(60.0), eta_2: ghz(0.25), ..p };
        let a = omega_zz_numeric(&q, q.omega_q1_idle, q.omega_q2_idle).unwrap();
        let m = q.mirrored();
        let b = omega_zz_numeric(&m, m.omega_q1_idle, m.omega_q2_idle).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn overlaps_start_at_identity_and_are_complete() {
        let p = DeviceParams::table1();
        let traj = FrequencyTrajectory::idle(&p, 5.0);
        let tr = comoving_overlaps(&traj, &p, &[L100, L001, L101], 1.0, 0.05).unwrap();
        assert!(tr.completeness_defect() < 1e-9);
        for l in [L100, L001, L101] {
            let own = tr.series(l, l).unwrap();
            assert!(own.iter().all(|&x| (x - 1.0).abs() < 1e-10));
        }
    }
}
