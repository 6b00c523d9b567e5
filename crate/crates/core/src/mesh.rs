//! Structured simplicial meshes, piecewise-linear nodal fields and the
//! quadrature shared by every integral in the crate.
//!
//! Intervals are split into segments, rectangles into right triangles. All
//! fields vanish on the boundary vertices, so the free vertices are exactly
//! the degrees of freedom of the homogeneous Dirichlet problem.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// A point in the plane; 1D meshes leave the second coordinate at zero.
pub type Point = [f64; 2];

/// 3-point Gauss-Legendre rule on a segment, as (barycentric, weight fraction).
const SEGMENT_RULE: [([f64; 3], f64); 3] = {
    // 0.5 * sqrt(3/5)
    const D: f64 = 0.387_298_334_620_741_7;
    [
        ([0.5 + D, 0.5 - D, 0.0], 5.0 / 18.0),
        ([0.5, 0.5, 0.0], 8.0 / 18.0),
        ([0.5 - D, 0.5 + D, 0.0], 5.0 / 18.0),
    ]
};

/// Mid-edge rule on a triangle, exact for quadratics.
const TRIANGLE_RULE: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    /// Vertex indices; segments use the first two slots.
    elements: Vec<[usize; 3]>,
    on_boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
    measures: Vec<f64>,
    centroids: Vec<Point>,
    /// Constant gradients of the local hat functions.
    basis_grads: Vec<[Point; 3]>,
    quad_points: Vec<Point>,
}

/// Uniform partition of `(0, length)` into `n_cells` segments.
pub fn build_interval_mesh(length: f64, n_cells: usize) -> Result<Mesh> {
    if !(length.is_finite() && length > 0.0) {
        return invalid(format!("interval length must be positive, got {length}"));
    }
    if n_cells < 2 {
        return invalid(format!("interval mesh needs at least 2 cells, got {n_cells}"));
    }
    let h = length / n_cells as f64;
    let mut nodes: Vec<f64> = (0..=n_cells).map(|i| i as f64 * h).collect();
    nodes[n_cells] = length;
    build_interval_mesh_from_nodes(nodes)
}

/// 1D mesh over arbitrary strictly increasing nodes; the domain is
/// `(nodes[0], nodes[last])`.
pub fn build_interval_mesh_from_nodes(nodes: Vec<f64>) -> Result<Mesh> {
    if nodes.len() < 3 {
        return invalid("interval mesh needs at least 3 nodes");
    }
    if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("interval nodes must be finite and strictly increasing");
    }
    let n = nodes.len();
    let vertices: Vec<Point> = nodes.iter().map(|&x| [x, 0.0]).collect();
    let elements: Vec<[usize; 3]> = (0..n - 1).map(|i| [i, i + 1, usize::MAX]).collect();
    let mut on_boundary = vec![false; n];
    on_boundary[0] = true;
    on_boundary[n - 1] = true;
    Mesh::assemble(1, vertices, elements, on_boundary)
}

/// Structured `nx` by `ny` grid on `(0, lx) x (0, ly)`, each cell cut along
/// its diagonal into two triangles.
pub fn build_rectangle_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
        return invalid(format!("rectangle sides must be positive, got {lx} x {ly}"));
    }
    if nx < 2 || ny < 2 {
        return invalid(format!("rectangle mesh needs at least 2x2 cells, got {nx}x{ny}"));
    }
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut on_boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { lx } else { i as f64 * hx };
            let y = if j == ny { ly } else { j as f64 * hy };
            vertices.push([x, y]);
            on_boundary.push(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            elements.push([v00, v10, v11]);
            elements.push([v00, v11, v01]);
        }
    }
    Mesh::assemble(2, vertices, elements, on_boundary)
}

impl Mesh {
    fn assemble(
        dim: usize,
        vertices: Vec<Point>,
        elements: Vec<[usize; 3]>,
        on_boundary: Vec<bool>,
    ) -> Result<Mesh> {
        let nodes_per = dim + 1;
        let rule = if dim == 1 { &SEGMENT_RULE } else { &TRIANGLE_RULE };
        let mut measures = Vec::with_capacity(elements.len());
        let mut centroids = Vec::with_capacity(elements.len());
        let mut basis_grads = Vec::with_capacity(elements.len());
        let mut quad_points = Vec::with_capacity(elements.len() * rule.len());
        for (e, el) in elements.iter().enumerate() {
            let pts: Vec<Point> = el[..nodes_per].iter().map(|&v| vertices[v]).collect();
            let (measure, grads) = if dim == 1 {
                let h = pts[1][0] - pts[0][0];
                (h, [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]])
            } else {
                let (e1, e2) = (
                    [pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]],
                    [pts[2][0] - pts[0][0], pts[2][1] - pts[0][1]],
                );
                let det = e1[0] * e2[1] - e1[1] * e2[0];
                // rows of the inverse Jacobian give the gradients of lambda_1, lambda_2
                let g1 = [e2[1] / det, -e2[0] / det];
                let g2 = [-e1[1] / det, e1[0] / det];
                (0.5 * det.abs(), [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2])
            };
            if !(measure > 0.0) {
                return invalid(format!("element {e} has non-positive measure {measure}"));
            }
            let mut c = [0.0; 2];
            for p in &pts {
                c[0] += p[0] / nodes_per as f64;
                c[1] += p[1] / nodes_per as f64;
            }
            for (bary, _) in rule.iter() {
                let mut q = [0.0; 2];
                for (k, p) in pts.iter().enumerate() {
                    q[0] += bary[k] * p[0];
                    q[1] += bary[k] * p[1];
                }
                quad_points.push(q);
            }
            measures.push(measure);
            centroids.push(c);
            basis_grads.push(grads);
        }
        let boundary_nodes = (0..vertices.len()).filter(|&i| on_boundary[i]).collect();
        Ok(Mesh {
            dim,
            vertices,
            elements,
            on_boundary,
            boundary_nodes,
            measures,
            centroids,
            basis_grads,
            quad_points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Vertex indices of element `e` (2 for segments, 3 for triangles).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn element_measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }

    /// Lebesgue measure of the domain.
    pub fn domain_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Gradients of the local hat functions on element `e`.
    pub(crate) fn basis_gradients(&self, e: usize) -> &[Point] {
        &self.basis_grads[e][..self.dim + 1]
    }

    /// Quadrature rule as (barycentric coordinates, fraction of the element measure).
    pub(crate) fn rule(&self) -> &'static [([f64; 3], f64)] {
        if self.dim == 1 {
            &SEGMENT_RULE
        } else {
            &TRIANGLE_RULE
        }
    }

    /// Physical coordinates of the quadrature points of element `e`.
    pub(crate) fn quad_points(&self, e: usize) -> &[Point] {
        let nq = self.rule().len();
        &self.quad_points[e * nq..(e + 1) * nq]
    }

    /// Values of a nodal vector at every quadrature point, element by element.
    pub(crate) fn quad_values(&self, values: &[f64]) -> Vec<f64> {
        let rule = self.rule();
        let mut out = Vec::with_capacity(self.elements.len() * rule.len());
        for e in 0..self.elements.len() {
            let el = self.element(e);
            for (bary, _) in rule {
                out.push(el.iter().enumerate().map(|(k, &v)| bary[k] * values[v]).sum());
            }
        }
        out
    }

    /// Quadrature weights (absolute) in the same order as [`Mesh::quad_values`].
    pub(crate) fn quad_weights(&self) -> Vec<f64> {
        let rule = self.rule();
        self.measures
            .iter()
            .flat_map(|&m| rule.iter().map(move |(_, w)| w * m))
            .collect()
    }

    fn element_gradient(&self, e: usize, values: &[f64]) -> Point {
        let mut g = [0.0; 2];
        for (k, &v) in self.element(e).iter().enumerate() {
            let b = self.basis_grads[e][k];
            g[0] += values[v] * b[0];
            g[1] += values[v] * b[1];
        }
        g
    }
}

/// Piecewise-linear field given by its vertex values; zero on the boundary.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

/// Per-element gradient of a piecewise-linear field.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGradient(pub Vec<Point>);

impl ElementGradient {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Euclidean norms per element.
    pub fn norms(&self) -> Vec<f64> {
        self.0.iter().map(|g| g[0].hypot(g[1])).collect()
    }
}

impl Field {
    /// Wraps nodal values; boundary values must already be exactly zero.
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Field> {
        if values.len() != mesh.vertex_count() {
            return invalid(format!(
                "field has {} values but mesh has {} vertices",
                values.len(),
                mesh.vertex_count()
            ));
        }
        if let Some(&b) = mesh.boundary_nodes.iter().find(|&&b| values[b] != 0.0) {
            return invalid(format!("field is nonzero on boundary vertex {b}"));
        }
        Ok(Field { mesh, values })
    }

    /// Interpolates `f` at the vertices and clears the boundary values.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Field {
        let values = mesh
            .vertices
            .iter()
            .enumerate()
            .map(|(i, &x)| if mesh.on_boundary[i] { 0.0 } else { f(x) })
            .collect();
        Field { mesh, values }
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Field {
        let values = vec![0.0; mesh.vertex_count()];
        Field { mesh, values }
    }

    /// Takes arbitrary vertex values and overwrites the boundary entries with zero.
    pub(crate) fn from_values_clearing_boundary(mesh: Arc<Mesh>, mut values: Vec<f64>) -> Field {
        for &b in &mesh.boundary_nodes {
            values[b] = 0.0;
        }
        Field { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, t: f64) -> Field {
        Field {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Field) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Field { mesh: self.mesh.clone(), values }
    }

    pub fn inf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Exact gradient of the interpolant, one constant vector per element.
    pub fn gradient(&self) -> ElementGradient {
        ElementGradient(
            (0..self.mesh.element_count())
                .map(|e| self.mesh.element_gradient(e, &self.values))
                .collect(),
        )
    }

    /// `∫ |u|^s` by the mesh quadrature.
    pub fn integrate_power(&self, s: f64) -> Result<f64> {
        if !(s >= 1.0) {
            return invalid(format!("integrate_power needs s >= 1, got {s}"));
        }
        Ok(integrate_power_raw(&self.mesh, &self.values, s))
    }

    /// Nodal positive part `max(u, 0)`.
    pub fn positive_part(&self) -> Field {
        Field {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        }
    }

    /// Nodal negative part `max(-u, 0)`.
    pub fn negative_part(&self) -> Field {
        Field {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| if v < 0.0 { -v } else { 0.0 }).collect(),
        }
    }

    /// Writes `x[,y],u` rows with 17 significant digits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, out: &mut impl Write) -> Result<()> {
        let two_d = self.mesh.dim == 2;
        writeln!(out, "{}", if two_d { "x,y,u" } else { "x,u" })?;
        for (x, v) in self.mesh.vertices.iter().zip(&self.values) {
            if two_d {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", x[0], x[1], v)?;
            } else {
                writeln!(out, "{:.16e},{:.16e}", x[0], v)?;
            }
        }
        Ok(())
    }

    pub(crate) fn check_mesh(&self, mesh: &Arc<Mesh>) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, mesh) || *self.mesh == **mesh {
            Ok(())
        } else {
            Err(Error::InvalidArgument("field does not live on the problem mesh".into()))
        }
    }
}

pub(crate) fn integrate_power_raw(mesh: &Mesh, values: &[f64], s: f64) -> f64 {
    mesh.quad_values(values)
        .iter()
        .zip(mesh.quad_weights())
        .map(|(u, w)| w * u.abs().powf(s))
        .sum()
}
