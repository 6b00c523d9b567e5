//! Discrete `H^1_0` inner product used to turn Galerkin residuals into
//! descent directions.
//!
//! The stiffness matrix `K_ij = Σ_e w_e |e| ∇φ_i·∇φ_j` on the free vertices
//! is banded for the structured meshes built here, so a banded Cholesky
//! factorization is enough.

use crate::error::{invalid, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone)]
pub struct SobolevMetric {
    /// Free-vertex index of every vertex, `usize::MAX` on the boundary.
    dof: Vec<usize>,
    free: Vec<usize>,
    band: usize,
    /// Row `i` holds `L[i][i-k]` at `i * (band + 1) + k`.
    factor: Vec<f64>,
}

impl SobolevMetric {
    /// Unweighted Dirichlet Laplacian.
    pub fn laplacian(mesh: &Mesh) -> Result<SobolevMetric> {
        SobolevMetric::weighted(mesh, &vec![1.0; mesh.element_count()])
    }

    /// Stiffness matrix with a positive weight per element.
    pub fn weighted(mesh: &Mesh, weights: &[f64]) -> Result<SobolevMetric> {
        if weights.len() != mesh.element_count() {
            return invalid("metric needs one weight per element");
        }
        let mut dof = vec![usize::MAX; mesh.vertex_count()];
        let mut free = Vec::new();
        for v in 0..mesh.vertex_count() {
            if !mesh.is_boundary(v) {
                dof[v] = free.len();
                free.push(v);
            }
        }
        let n = free.len();
        if n == 0 {
            return invalid("mesh has no interior vertices");
        }
        let mut band = 0;
        for e in 0..mesh.element_count() {
            let ids: Vec<usize> = mesh.element(e).iter().map(|&v| dof[v]).filter(|&d| d != usize::MAX).collect();
            for &a in &ids {
                for &b in &ids {
                    band = band.max(a.abs_diff(b));
                }
            }
        }
        let w = band + 1;
        let mut mat = vec![0.0; n * w];
        for e in 0..mesh.element_count() {
            let m = mesh.element_measures()[e] * weights[e];
            let el = mesh.element(e);
            let grads = mesh.basis_gradients(e);
            for (a, &va) in el.iter().enumerate() {
                let i = dof[va];
                if i == usize::MAX {
                    continue;
                }
                for (b, &vb) in el.iter().enumerate() {
                    let j = dof[vb];
                    if j == usize::MAX || j > i {
                        continue;
                    }
                    let k = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                    mat[i * w + (i - j)] += m * k;
                }
            }
        }
        // in-place banded Cholesky
        for i in 0..n {
            let j0 = i.saturating_sub(band);
            for j in j0..=i {
                let mut sum = mat[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(band));
                for k in k0..j {
                    sum -= mat[i * w + (i - k)] * mat[j * w + (j - k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return invalid("metric matrix is not positive definite");
                    }
                    mat[i * w] = sum.sqrt();
                } else {
                    mat[i * w + (i - j)] = sum / mat[j * w];
                }
            }
        }
        Ok(SobolevMetric { dof, free, band, factor: mat })
    }

    /// Solves `K x = r` restricted to free vertices; boundary entries of the
    /// result are zero.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.free.len();
        let w = self.band + 1;
        let mut y: Vec<f64> = self.free.iter().map(|&v| rhs[v]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(self.band)..i {
                s -= self.factor[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.factor[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n.min(i + w) {
                s -= self.factor[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.factor[i * w];
        }
        let mut out = vec![0.0; self.dof.len()];
        for (i, &v) in self.free.iter().enumerate() {
            out[v] = y[i];
        }
        out
    }
}
