//! Dense Hermitian helpers shared by the propagator and the spectral analysis.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// Hermitian matrix.
pub fn eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], DMatrix::identity(1, 1));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Partition of `0..n` into connected components of the non-zero pattern of
/// `m`. Each component is sorted; components are ordered by smallest index.
pub fn block_partition(m: &DMatrix<C64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for r in 0..n {
        for c in (r + 1)..n {
            if m[(r, c)] != C64::new(0.0, 0.0) || m[(c, r)] != C64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

pub fn submatrix(m: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// `exp(-i H dt)` from an eigendecomposition of `H`.
pub fn unitary_step(values: &[f64], vectors: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let mut scaled = vectors.clone();
    for (c, &e) in values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -e * dt);
        scaled.column_mut(c).iter_mut().for_each(|z| *z *= phase);
    }
    scaled * vectors.adjoint()
}

/// max_ij |(A - B)_ij|
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// max_ij |(U^dagger U - I)_ij|
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &DMatrix::identity(n, n))
}
