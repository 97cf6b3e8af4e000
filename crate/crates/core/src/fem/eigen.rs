//! Smallest eigenpairs of the generalized symmetric problem `A w = λ M w`.
//!
//! Small problems are reduced to a dense standard eigenproblem through the
//! Cholesky factor of `M`. Larger ones use shift-invert subspace iteration:
//! `A − σM` (σ < 0, hence SPD) is factored once with an envelope Cholesky on a
//! reverse Cuthill–McKee ordering, and a block of vectors is repeatedly
//! multiplied by `(A − σM)⁻¹ M` followed by a Rayleigh–Ritz projection. The
//! block iteration finds every member of a degenerate cluster, which the
//! sphere spectrum (multiplicities 2l+1) requires.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::FemError;
use crate::sparse::{dot, SparseMatrix};

/// Problems up to this size go through the dense path.
pub const DENSE_LIMIT: usize = 800;

/// Eigenpairs sorted by ascending eigenvalue; vectors are M-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The `k` smallest eigenpairs of `A w = λ M w` for the P1 Laplace–Beltrami pair.
pub fn laplace_beltrami_eigs(
    mass: &SparseMatrix,
    stiffness: &SparseMatrix,
    k: usize,
) -> Result<EigenPairs, FemError> {
    let n = mass.nrows();
    if stiffness.nrows() != n || mass.ncols() != n || stiffness.ncols() != n {
        return Err(FemError::DimensionMismatch {
            expected: n,
            found: stiffness.nrows(),
        });
    }
    if k == 0 || k >= n {
        return Err(FemError::InvalidArgument(format!(
            "need 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    if n <= DENSE_LIMIT || 2 * k + 10 >= n {
        dense_eigs(mass, stiffness, k)
    } else {
        subspace_eigs(mass, stiffness, k, 1e-11, 1000)
    }
}

fn dense_eigs(mass: &SparseMatrix, stiffness: &SparseMatrix, k: usize) -> Result<EigenPairs, FemError> {
    let n = mass.nrows();
    let to_dense = |s: &SparseMatrix| {
        let mut d = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for (c, v) in s.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    };
    let m = to_dense(mass);
    let a = to_dense(stiffness);
    let chol = m
        .cholesky()
        .ok_or(FemError::NotPositiveDefinite { pivot: 0 })?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let linv_a = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| FemError::EigenNotConverged("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| FemError::EigenNotConverged("singular Cholesky factor".into()))?;
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let y = eig.eigenvectors.column(i).into_owned();
        let w = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| FemError::EigenNotConverged("singular Cholesky factor".into()))?;
        values.push(eig.eigenvalues[i]);
        vectors.push(w.iter().copied().collect());
    }
    Ok(EigenPairs { values, vectors })
}

/// Shift-invert subspace iteration. `tol` bounds
/// `||A x − λ M x|| / ((|λ| + s)·||M x||)` for every returned pair, where `s`
/// is the magnitude of the shift.
pub fn subspace_eigs(
    mass: &SparseMatrix,
    stiffness: &SparseMatrix,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPairs, FemError> {
    let n = mass.nrows();
    let block = (2 * k + 10).min(n);
    // shift scaled like the first eigenvalue of a sphere with the same area
    let shift = 4.0 * PI / mass.total();
    let shifted = stiffness.add_scaled(1.0, mass, shift)?;
    let factor = EnvelopeCholesky::new(&shifted)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1e55);
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|j| {
            if j == 0 {
                vec![1.0; n]
            } else {
                (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
            }
        })
        .collect();
    let mut mx = vec![0.0; n];

    for _ in 0..max_iter {
        // Y = (A + sM)⁻¹ M X
        for x in basis.iter_mut() {
            mass.mul_vec_into(x, &mut mx);
            *x = factor.solve(&mx);
        }
        m_orthonormalize(mass, &mut basis)?;

        // Rayleigh–Ritz on the M-orthonormal block
        let mut projected = DMatrix::<f64>::zeros(block, block);
        let mut ax = vec![0.0; n];
        let a_basis: Vec<Vec<f64>> = basis
            .iter()
            .map(|x| {
                stiffness.mul_vec_into(x, &mut ax);
                ax.clone()
            })
            .collect();
        for i in 0..block {
            for j in 0..=i {
                let v = dot(&basis[i], &a_basis[j]);
                projected[(i, j)] = v;
                projected[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(projected);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let rotate = |vs: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (j, v) in vs.iter().enumerate() {
                let c = eig.eigenvectors[(j, col)];
                if c != 0.0 {
                    out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
                }
            }
            out
        };
        let ritz: Vec<Vec<f64>> = order.iter().map(|&c| rotate(&basis, c)).collect();
        let values: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();

        let mut worst: f64 = 0.0;
        for i in 0..k {
            let ax = rotate(&a_basis, order[i]);
            mass.mul_vec_into(&ritz[i], &mut mx);
            let res: f64 = ax
                .iter()
                .zip(&mx)
                .map(|(a, m)| (a - values[i] * m).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = (values[i].abs() + shift) * dot(&mx, &mx).sqrt();
            worst = worst.max(res / scale);
        }
        basis = ritz;
        if worst < tol {
            basis.truncate(k);
            return Ok(EigenPairs {
                values: values[..k].to_vec(),
                vectors: basis,
            });
        }
    }
    Err(FemError::EigenNotConverged(format!(
        "{k} eigenpairs not resolved to {tol:e} in {max_iter} iterations"
    )))
}

/// Modified Gram–Schmidt in the M-inner product, applied twice.
fn m_orthonormalize(mass: &SparseMatrix, basis: &mut [Vec<f64>]) -> Result<(), FemError> {
    let n = mass.nrows();
    let mut m_basis: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    let mut mx = vec![0.0; n];
    for j in 0..basis.len() {
        for _ in 0..2 {
            for (i, m_prev) in m_basis.iter().enumerate() {
                let c = dot(m_prev, &basis[j]);
                let (prev, cur) = basis.split_at_mut(j);
                cur[0].iter_mut().zip(&prev[i]).for_each(|(x, p)| *x -= c * p);
            }
        }
        mass.mul_vec_into(&basis[j], &mut mx);
        let norm = dot(&basis[j], &mx).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(FemError::EigenNotConverged("block lost rank".into()));
        }
        basis[j].iter_mut().for_each(|x| *x /= norm);
        mx.iter_mut().for_each(|x| *x /= norm);
        m_basis.push(mx.clone());
    }
    Ok(())
}

/// Reverse Cuthill–McKee ordering of a structurally symmetric matrix.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_last = |start: usize| -> usize {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(u) = queue.pop_front() {
            last = u;
            for (c, _) in a.row(u) {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        last
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited vertex");
        // two sweeps approximate a peripheral start vertex
        let start = bfs_last(bfs_last(seed));
        let start = if visited[start] { seed } else { start };
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = a
                .row(u)
                .map(|(c, _)| c)
                .filter(|&c| !visited[c])
                .collect();
            next.sort_by_key(|&c| (degree[c], c));
            for c in next {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor stored by rows over each row's envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn new(a: &SparseMatrix) -> Result<Self, FemError> {
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (c, _) in a.row(old) {
                first[new] = first[new].min(inv[c]);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offsets[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (c, v) in a.row(old) {
                let j = inv[c];
                if j <= new {
                    data[offsets[new] + (j - first[new])] = v;
                }
            }
        }

        for i in 0..n {
            let (row_start, fi) = (offsets[i], first[i]);
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (head, tail) = data.split_at_mut(row_start);
                let row_j = &head[offsets[j]..offsets[j + 1]];
                let row_i = &mut tail[..i - fi + 1];
                let mut s = row_i[j - fi];
                for k in lo..j {
                    s -= row_i[k - fi] * row_j[k - fj];
                }
                row_i[j - fi] = s / row_j[j - fj];
            }
            let row_i = &mut data[row_start..offsets[i + 1]];
            let mut d = row_i[i - fi];
            for k in fi..i {
                d -= row_i[k - fi] * row_i[k - fi];
            }
            if !(d > 0.0) {
                return Err(FemError::NotPositiveDefinite { pivot: i });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            offsets,
            data,
        })
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offsets[i]..self.offsets[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::FemOperators;
    use crate::mesh::icosphere;

    #[test]
    fn envelope_cholesky_solves_spd_system() {
        let mesh = icosphere(3).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        let k = ops.stiffness().add_scaled(1.0, ops.mass(), 0.5).unwrap();
        let chol = EnvelopeCholesky::new(&k).unwrap();
        let x_true: Vec<f64> = (0..k.nrows()).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = k.mul_vec(&x_true).unwrap();
        let x = chol.solve(&b);
        for (a, e) in x.iter().zip(&x_true) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)])
            .unwrap();
        assert!(matches!(
            EnvelopeCholesky::new(&a),
            Err(FemError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let mesh = icosphere(2).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        let mut p = reverse_cuthill_mckee(ops.mass());
        p.sort_unstable();
        assert_eq!(p, (0..mesh.vertex_count()).collect::<Vec<_>>());
    }

    #[test]
    fn dense_and_subspace_paths_agree() {
        let mesh = icosphere(2).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        let dense = dense_eigs(ops.mass(), ops.stiffness(), 12).unwrap();
        let iter = subspace_eigs(ops.mass(), ops.stiffness(), 12, 1e-11, 1000).unwrap();
        for (a, b) in dense.values.iter().zip(&iter.values) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn invalid_k_rejected() {
        let mesh = icosphere(0).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        assert!(laplace_beltrami_eigs(ops.mass(), ops.stiffness(), 0).is_err());
        assert!(laplace_beltrami_eigs(ops.mass(), ops.stiffness(), 12).is_err());
    }
}
