//! P1 element kernels and global assembly on the vertex-adjacency pattern.

use crate::error::FemError;
use crate::mesh::{dot, sub, SurfaceMesh};
use crate::sparse::SparseMatrix;

/// Sparsity pattern of P1 operators on a mesh (vertex plus one-ring per row),
/// with a precomputed slot map from each triangle's local 3×3 block into the
/// global value array.
#[derive(Debug, Clone)]
pub struct Pattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    slots: Vec<[usize; 9]>,
}

impl Pattern {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let n = mesh.vertex_count();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let ring = mesh.neighbors(i);
            let at = ring.partition_point(|&j| j < i);
            col_idx.extend_from_slice(&ring[..at]);
            col_idx.push(i);
            col_idx.extend_from_slice(&ring[at..]);
            row_ptr.push(col_idx.len());
        }
        let slots = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    let row = &col_idx[row_ptr[t[a]]..row_ptr[t[a] + 1]];
                    for b in 0..3 {
                        let k = row
                            .binary_search(&t[b])
                            .expect("triangle edge missing from one-ring");
                        s[3 * a + b] = row_ptr[t[a]] + k;
                    }
                }
                s
            })
            .collect();
        Self {
            n,
            row_ptr,
            col_idx,
            slots,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Scatters one 3×3 element matrix per triangle into `values`.
    pub fn scatter(&self, values: &mut [f64], mut element: impl FnMut(usize) -> [f64; 9]) {
        values.iter_mut().for_each(|v| *v = 0.0);
        for (t, slot) in self.slots.iter().enumerate() {
            let local = element(t);
            for k in 0..9 {
                values[slot[k]] += local[k];
            }
        }
    }

    pub fn to_matrix(&self, values: Vec<f64>) -> SparseMatrix {
        SparseMatrix::from_csr(
            self.n,
            self.n,
            self.row_ptr.clone(),
            self.col_idx.clone(),
            values,
        )
        .expect("pattern is a valid CSR layout")
    }
}

/// |T|/12 · [[2,1,1],[1,2,1],[1,1,2]]
pub fn element_mass(area: f64) -> [f64; 9] {
    let d = area / 6.0;
    let o = area / 12.0;
    [d, o, o, o, d, o, o, o, d]
}

/// Exact ∫_T w ψ_a ψ_b for w linear with nodal values `w`.
pub fn element_weighted_mass(area: f64, w: [f64; 3]) -> [f64; 9] {
    let mut m = [0.0; 9];
    let total = w[0] + w[1] + w[2];
    for a in 0..3 {
        for b in 0..3 {
            m[3 * a + b] = if a == b {
                // ∫ψ_a³ = |T|/10, ∫ψ_a²ψ_c = |T|/30
                area * (w[a] / 10.0 + (total - w[a]) / 30.0)
            } else {
                let c = 3 - a - b;
                area * ((w[a] + w[b]) / 30.0 + w[c] / 60.0)
            };
        }
    }
    m
}

/// ∫_T ∇ψ_a · ∇ψ_b using edge vectors opposite each vertex:
/// K_ab = (e_a · e_b) / (4|T|).
pub fn element_stiffness(p: [&[f64; 3]; 3], area: f64) -> [f64; 9] {
    let e = [sub(p[2], p[1]), sub(p[0], p[2]), sub(p[1], p[0])];
    let mut k = [0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            k[3 * a + b] = dot(&e[a], &e[b]) / (4.0 * area);
        }
    }
    k
}

/// Consistent P1 mass matrix M_ij = (ψ_i, ψ_j).
pub fn assemble_mass(mesh: &SurfaceMesh) -> SparseMatrix {
    let pattern = Pattern::new(mesh);
    mass_on(&pattern, mesh)
}

/// P1 stiffness matrix A_ij = (∇ψ_i, ∇ψ_j) with tangential gradients.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> Result<SparseMatrix, FemError> {
    let pattern = Pattern::new(mesh);
    stiffness_on(&pattern, mesh)
}

/// Coefficient-weighted mass (w ψ_i, ψ_j) with w interpolated linearly and
/// integrated exactly per triangle.
pub fn assemble_weighted_mass(mesh: &SurfaceMesh, w: &[f64]) -> Result<SparseMatrix, FemError> {
    let pattern = Pattern::new(mesh);
    let mut values = vec![0.0; pattern.nnz()];
    weighted_mass_values(&pattern, mesh, w, &mut values)?;
    Ok(pattern.to_matrix(values))
}

/// ∫_Γh field, evaluated as 1ᵀ M field.
pub fn integrate(mass: &SparseMatrix, field: &[f64]) -> Result<f64, FemError> {
    if field.len() != mass.ncols() {
        return Err(FemError::DimensionMismatch {
            expected: mass.ncols(),
            found: field.len(),
        });
    }
    Ok(mass.mul_vec(field)?.iter().sum())
}

pub(crate) fn mass_on(pattern: &Pattern, mesh: &SurfaceMesh) -> SparseMatrix {
    let areas = mesh.triangle_areas();
    let mut values = vec![0.0; pattern.nnz()];
    pattern.scatter(&mut values, |t| element_mass(areas[t]));
    pattern.to_matrix(values)
}

pub(crate) fn stiffness_on(pattern: &Pattern, mesh: &SurfaceMesh) -> Result<SparseMatrix, FemError> {
    let areas = mesh.triangle_areas();
    if let Some((index, &area)) = areas
        .iter()
        .enumerate()
        .find(|(_, &a)| !(a > crate::mesh::MIN_TRIANGLE_AREA))
    {
        return Err(FemError::DegenerateTriangle { index, area });
    }
    let v = mesh.vertices();
    let tris = mesh.triangles();
    let mut values = vec![0.0; pattern.nnz()];
    pattern.scatter(&mut values, |t| {
        let [a, b, c] = tris[t];
        element_stiffness([&v[a], &v[b], &v[c]], areas[t])
    });
    Ok(pattern.to_matrix(values))
}

pub(crate) fn weighted_mass_values(
    pattern: &Pattern,
    mesh: &SurfaceMesh,
    w: &[f64],
    values: &mut [f64],
) -> Result<(), FemError> {
    if w.len() != mesh.vertex_count() {
        return Err(FemError::DimensionMismatch {
            expected: mesh.vertex_count(),
            found: w.len(),
        });
    }
    let areas = mesh.triangle_areas();
    let tris = mesh.triangles();
    pattern.scatter(values, |t| {
        let [a, b, c] = tris[t];
        element_weighted_mass(areas[t], [w[a], w[b], w[c]])
    });
    Ok(())
}

/// Mass and stiffness matrices of a mesh, sharing one sparsity pattern.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pattern: Pattern,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    lumped: Vec<f64>,
}

impl FemOperators {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self, FemError> {
        let pattern = Pattern::new(mesh);
        let mass = mass_on(&pattern, mesh);
        let stiffness = stiffness_on(&pattern, mesh)?;
        let lumped = mass.mul_vec(&vec![1.0; mesh.vertex_count()])?;
        Ok(Self {
            pattern,
            mass,
            stiffness,
            lumped,
        })
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// Row sums of the mass matrix (vertex areas of the lumped mass).
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn integrate(&self, field: &[f64]) -> Result<f64, FemError> {
        if field.len() != self.dim() {
            return Err(FemError::DimensionMismatch {
                expected: self.dim(),
                found: field.len(),
            });
        }
        // 1ᵀ M f = Σ_i (M1)_i f_i since M is symmetric
        Ok(self.lumped.iter().zip(field).map(|(m, f)| m * f).sum())
    }

    /// Values of (w ψ_i, ψ_j) laid out on [`Self::pattern`].
    pub fn weighted_mass_into(
        &self,
        mesh: &SurfaceMesh,
        w: &[f64],
        values: &mut [f64],
    ) -> Result<(), FemError> {
        weighted_mass_values(&self.pattern, mesh, w, values)
    }

    pub fn weighted_mass(&self, mesh: &SurfaceMesh, w: &[f64]) -> Result<SparseMatrix, FemError> {
        let mut values = vec![0.0; self.pattern.nnz()];
        self.weighted_mass_into(mesh, w, &mut values)?;
        Ok(self.pattern.to_matrix(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    // Exact barycentric moments ∫λ1^a λ2^b λ3^c = 2|T| a! b! c! / (a+b+c+2)!
    fn moment(powers: [u32; 3], area: f64) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        2.0 * area * fact(powers[0]) * fact(powers[1]) * fact(powers[2])
            / fact(powers.iter().sum::<u32>() + 2)
    }

    #[test]
    fn element_mass_matches_barycentric_moments() {
        let area = 0.37;
        let m = element_mass(area);
        for a in 0..3 {
            for b in 0..3 {
                let mut p = [0; 3];
                p[a] += 1;
                p[b] += 1;
                assert!((m[3 * a + b] - moment(p, area)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn element_weighted_mass_matches_moments() {
        let area = 1.7;
        let w = [0.3, -1.1, 2.4];
        let m = element_weighted_mass(area, w);
        for a in 0..3 {
            for b in 0..3 {
                let exact: f64 = (0..3)
                    .map(|c| {
                        let mut p = [0; 3];
                        p[a] += 1;
                        p[b] += 1;
                        p[c] += 1;
                        w[c] * moment(p, area)
                    })
                    .sum();
                assert!((m[3 * a + b] - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn element_stiffness_right_triangle() {
        // legs along x and y: gradients (-1,-1), (1,0), (0,1), area 1/2
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let k = element_stiffness([&p[0], &p[1], &p[2]], 0.5);
        let expected = [1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5];
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_total_is_surface_area() {
        let mesh = icosphere(3).unwrap();
        let m = assemble_mass(&mesh);
        let area = mesh.surface_area();
        assert!((m.total() - area).abs() / area < 1e-10);
        assert!(m.asymmetry() < 1e-16);
        assert!(m.diagonal().iter().all(|&d| d > 0.0));
        let lumped = m.mul_vec(&vec![1.0; mesh.vertex_count()]).unwrap();
        assert!(lumped.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = icosphere(3).unwrap();
        let a = assemble_stiffness(&mesh).unwrap();
        let r = a.mul_vec(&vec![1.0; mesh.vertex_count()]).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-10));
        assert!(a.asymmetry() < 1e-13);
    }

    #[test]
    fn weighted_mass_constant_weights() {
        let mesh = icosphere(2).unwrap();
        let n = mesh.vertex_count();
        let m = assemble_mass(&mesh);
        let w1 = assemble_weighted_mass(&mesh, &vec![1.0; n]).unwrap();
        let w0 = assemble_weighted_mass(&mesh, &vec![0.0; n]).unwrap();
        let wk = assemble_weighted_mass(&mesh, &vec![-2.75; n]).unwrap();
        for k in 0..m.nnz() {
            assert!((w1.values()[k] - m.values()[k]).abs() < 1e-12);
            assert_eq!(w0.values()[k], 0.0);
            assert!((wk.values()[k] + 2.75 * m.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_mass_length_mismatch() {
        let mesh = icosphere(1).unwrap();
        assert!(matches!(
            assemble_weighted_mass(&mesh, &[1.0, 2.0]),
            Err(FemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn integrate_constant_and_mismatch() {
        let mesh = icosphere(4).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        let area = mesh.surface_area();
        let k = 3.25;
        let v = integrate(ops.mass(), &vec![k; mesh.vertex_count()]).unwrap();
        assert!((v - k * area).abs() / (k * area) < 1e-10);
        assert!((ops.integrate(&vec![k; mesh.vertex_count()]).unwrap() - v).abs() < 1e-10);
        assert!(integrate(ops.mass(), &[1.0]).is_err());
    }

    #[test]
    fn integrate_antisymmetric_field_vanishes() {
        // z ↦ -z maps the icosphere onto itself and preserves lumped areas,
        // so sign(z) integrates to zero.
        let mesh = icosphere(3).unwrap();
        let ops = FemOperators::new(&mesh).unwrap();
        let field: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|p| if p[2] > 1e-12 { 1.0 } else if p[2] < -1e-12 { -1.0 } else { 0.0 })
            .collect();
        assert!(ops.integrate(&field).unwrap().abs() < 1e-12);
    }
}
