//! Reference-domain discretization on the unit square.
//!
//! The square (0,1)^2 carries an n-by-n nodal grid, each cell split into two
//! triangles by its bottom-left-to-top-right diagonal. Displacement u and
//! magnetization angle phi are P1 nodal fields, so every element sees a
//! constant deformation gradient, a constant magnetization gradient, and an
//! exact per-element determinant. The magnetization vector is derived as
//! M = (cos phi, sin phi), which keeps |M| = 1 without any constraint
//! handling.
//!
//! Node index = j*n + i for coordinate (i*h, j*h), h = 1/(n-1): x runs
//! fastest. Cell (i, j) produces elements 2*(j*(n-1)+i) (lower triangle) and
//! +1 (upper), both counterclockwise.

use crate::tensor::{norm, Mat2, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3 nodes per side, got {n}")]
    InvalidGrid { n: usize },
    #[error("element {elem} degenerates: det F = {det:e} <= 0")]
    DegenerateElement { elem: usize, det: f64 },
}

/// Which part of the boundary carries the displacement datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaSelector {
    LeftEdge,
    FullBoundary,
    BottomEdge,
}

/// Catalog of smooth boundary displacements, each polynomial on the closed
/// square. The datum prescribes u = w(x) on the selected boundary nodes; the
/// physical deformation there is id + eps*w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryDatum {
    Zero,
    /// (alpha*x1, 0)
    UniaxialStretch { alpha: f64 },
    /// (alpha*x2, 0)
    Shear { alpha: f64 },
    /// alpha*(x1*x2, -x1^2/2)
    Bending { alpha: f64 },
}

impl BoundaryDatum {
    pub fn eval(&self, x: Vec2) -> Vec2 {
        match *self {
            BoundaryDatum::Zero => [0.0, 0.0],
            BoundaryDatum::UniaxialStretch { alpha } => [alpha * x[0], 0.0],
            BoundaryDatum::Shear { alpha } => [alpha * x[1], 0.0],
            BoundaryDatum::Bending { alpha } => {
                [alpha * x[0] * x[1], -0.5 * alpha * x[0] * x[0]]
            }
        }
    }
}

/// One triangle: vertex node indices (counterclockwise) and the constant
/// gradients of its three nodal hat functions.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub v: [usize; 3],
    pub grads: [Vec2; 3],
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub n: usize,
    pub h: f64,
    pub area: f64,
    pub gamma: GammaSelector,
    pub elements: Vec<Element>,
    gamma_nodes: Vec<bool>,
}

impl GridSpec {
    pub fn build(n: usize, gamma: GammaSelector) -> Result<GridSpec, GridError> {
        if n < 3 {
            return Err(GridError::InvalidGrid { n });
        }
        let h = 1.0 / (n - 1) as f64;
        let mut elements = Vec::with_capacity(2 * (n - 1) * (n - 1));
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let a = j * n + i;
                let b = a + 1;
                let c = a + n;
                let d = c + 1;
                // lower triangle (a, b, d)
                elements.push(Element {
                    v: [a, b, d],
                    grads: [[-1.0 / h, 0.0], [1.0 / h, -1.0 / h], [0.0, 1.0 / h]],
                });
                // upper triangle (a, d, c)
                elements.push(Element {
                    v: [a, d, c],
                    grads: [[0.0, -1.0 / h], [1.0 / h, 0.0], [-1.0 / h, 1.0 / h]],
                });
            }
        }
        let mut gamma_nodes = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let on_gamma = match gamma {
                    GammaSelector::LeftEdge => i == 0,
                    GammaSelector::BottomEdge => j == 0,
                    GammaSelector::FullBoundary => i == 0 || j == 0 || i == n - 1 || j == n - 1,
                };
                gamma_nodes[j * n + i] = on_gamma;
            }
        }
        Ok(GridSpec {
            n,
            h,
            area: 0.5 * h * h,
            gamma,
            elements,
            gamma_nodes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n
    }

    pub fn node_coord(&self, node: usize) -> Vec2 {
        [(node % self.n) as f64 * self.h, (node / self.n) as f64 * self.h]
    }

    pub fn is_gamma_node(&self, node: usize) -> bool {
        self.gamma_nodes[node]
    }

    pub fn gamma_node_count(&self) -> usize {
        self.gamma_nodes.iter().filter(|&&b| b).count()
    }

    /// Reference centroid of an element.
    pub fn centroid(&self, elem: usize) -> Vec2 {
        let e = &self.elements[elem];
        let mut c = [0.0, 0.0];
        for &v in &e.v {
            let x = self.node_coord(v);
            c[0] += x[0] / 3.0;
            c[1] += x[1] / 3.0;
        }
        c
    }

    /// Exact gradient of the P1 interpolant of a scalar nodal field on one
    /// element.
    pub fn element_gradient(&self, field: &[f64], elem: usize) -> Vec2 {
        let e = &self.elements[elem];
        let mut g = [0.0, 0.0];
        for k in 0..3 {
            let w = field[e.v[k]];
            g[0] += w * e.grads[k][0];
            g[1] += w * e.grads[k][1];
        }
        g
    }

    /// Gradient of a P1 vector field: rows are components, columns are
    /// reference directions (the usual Jacobian layout).
    pub fn element_jacobian(&self, field: &[[f64; 2]], elem: usize) -> Mat2 {
        let e = &self.elements[elem];
        let mut m = Mat2::zero();
        for k in 0..3 {
            let w = field[e.v[k]];
            for r in 0..2 {
                for c in 0..2 {
                    m.m[r][c] += w[r] * e.grads[k][c];
                }
            }
        }
        m
    }
}

/// Nodal unknowns: displacement and magnetization angle.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFields {
    pub u: Vec<[f64; 2]>,
    pub phi: Vec<f64>,
}

impl StateFields {
    pub fn zero(grid: &GridSpec) -> StateFields {
        StateFields {
            u: vec![[0.0, 0.0]; grid.num_nodes()],
            phi: vec![0.0; grid.num_nodes()],
        }
    }

    pub fn magnetization(&self, node: usize) -> Vec2 {
        [self.phi[node].cos(), self.phi[node].sin()]
    }
}

/// Per-element magnetization data shared by every energy term: the raw P1
/// vertex average (exact integral of the interpolant) and its normalization.
#[derive(Debug, Clone, Copy)]
pub struct ElementMagnetization {
    /// Unit vectors at the three vertices.
    pub vertex: [Vec2; 3],
    /// (M0 + M1 + M2)/3, the exact element average of the interpolant.
    pub average: Vec2,
    /// |average|.
    pub average_len: f64,
    /// average normalized to unit length (fallback: first vertex direction
    /// when the average nearly cancels; that choice is a measure-zero
    /// subgradient selection).
    pub unit: Vec2,
    /// Whether the fallback fired; gradients through `unit` are zero then.
    pub degenerate: bool,
}

/// Threshold below which the vertex average is considered cancelled.
pub const MAGNETIZATION_DEGENERACY_TOL: f64 = 1e-12;

pub fn element_magnetization(state: &StateFields, grid: &GridSpec, elem: usize) -> ElementMagnetization {
    let e = &grid.elements[elem];
    let vertex = [
        state.magnetization(e.v[0]),
        state.magnetization(e.v[1]),
        state.magnetization(e.v[2]),
    ];
    let average = [
        (vertex[0][0] + vertex[1][0] + vertex[2][0]) / 3.0,
        (vertex[0][1] + vertex[1][1] + vertex[2][1]) / 3.0,
    ];
    let len = norm(average);
    if len < MAGNETIZATION_DEGENERACY_TOL {
        ElementMagnetization {
            vertex,
            average,
            average_len: len,
            unit: vertex[0],
            degenerate: true,
        }
    } else {
        ElementMagnetization {
            vertex,
            average,
            average_len: len,
            unit: [average[0] / len, average[1] / len],
            degenerate: false,
        }
    }
}

/// Deformation gradient F = I + eps * grad(u) on one element.
pub fn deformation_gradient(state: &StateFields, grid: &GridSpec, eps: f64, elem: usize) -> Mat2 {
    Mat2::identity() + grid.element_jacobian(&state.u, elem) * eps
}

/// Spatial magnetization on the deformed element: the unit element
/// magnetization divided by det F, so that |m| det F = 1 exactly.
pub fn eulerian_magnetization(
    state: &StateFields,
    grid: &GridSpec,
    eps: f64,
    elem: usize,
) -> Result<Vec2, GridError> {
    let det = deformation_gradient(state, grid, eps, elem).det();
    if det <= 0.0 {
        return Err(GridError::DegenerateElement { elem, det });
    }
    let m = element_magnetization(state, grid, elem).unit;
    Ok([m[0] / det, m[1] / det])
}

/// Exchange energy of the spatial magnetization, integrated over the
/// deformed configuration but evaluated in reference coordinates:
/// per element, |grad(M) F^-1|^2 / det F * area / 2. At eps = 0 this is the
/// plain Dirichlet energy of the interpolated M.
pub fn exchange_energy_pullback(
    state: &StateFields,
    grid: &GridSpec,
    eps: f64,
) -> Result<f64, GridError> {
    let mut total = 0.0;
    for elem in 0..grid.elements.len() {
        let e = &grid.elements[elem];
        let mut x = Mat2::zero();
        for k in 0..3 {
            let mk = state.magnetization(e.v[k]);
            for r in 0..2 {
                for c in 0..2 {
                    x.m[r][c] += mk[r] * e.grads[k][c];
                }
            }
        }
        if eps == 0.0 {
            total += 0.5 * x.norm_sq() * grid.area;
            continue;
        }
        let f = deformation_gradient(state, grid, eps, elem);
        let det = f.det();
        if det <= 0.0 {
            return Err(GridError::DegenerateElement { elem, det });
        }
        let finv = f.inverse().expect("det > 0 implies invertible");
        let y = x * finv;
        total += 0.5 * y.norm_sq() / det * grid.area;
    }
    Ok(total)
}

/// Clamps u at the selected boundary nodes to the datum; interior nodes are
/// untouched. Idempotent.
pub fn apply_dirichlet(state: &mut StateFields, w: &BoundaryDatum, grid: &GridSpec) {
    for node in 0..grid.num_nodes() {
        if grid.is_gamma_node(node) {
            state.u[node] = w.eval(grid.node_coord(node));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_counts() {
        let g = GridSpec::build(3, GammaSelector::LeftEdge).unwrap();
        assert_eq!(g.num_nodes(), 9);
        assert_eq!(g.elements.len(), 8);
        assert_eq!(g.gamma_node_count(), 3);
        let g = GridSpec::build(3, GammaSelector::FullBoundary).unwrap();
        assert_eq!(g.gamma_node_count(), 8);
        let g = GridSpec::build(3, GammaSelector::BottomEdge).unwrap();
        assert_eq!(g.gamma_node_count(), 3);
        assert!(matches!(
            GridSpec::build(2, GammaSelector::LeftEdge),
            Err(GridError::InvalidGrid { n: 2 })
        ));
    }

    #[test]
    fn triangulation_covers_and_is_positively_oriented() {
        let g = GridSpec::build(5, GammaSelector::LeftEdge).unwrap();
        let mut total = 0.0;
        for e in &g.elements {
            let p: Vec<_> = e.v.iter().map(|&v| g.node_coord(v)).collect();
            let cross = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
            assert!(cross > 0.0, "clockwise element");
            assert_relative_eq!(0.5 * cross, g.area, max_relative = 1e-12);
            total += 0.5 * cross;
        }
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn element_gradient_reproduces_linears() {
        let g = GridSpec::build(7, GammaSelector::LeftEdge).unwrap();
        let f1: Vec<f64> = (0..g.num_nodes()).map(|v| g.node_coord(v)[0]).collect();
        let f2: Vec<f64> = (0..g.num_nodes())
            .map(|v| {
                let x = g.node_coord(v);
                3.0 * x[0] + 2.0 * x[1]
            })
            .collect();
        let constant: Vec<f64> = vec![4.2; g.num_nodes()];
        for elem in 0..g.elements.len() {
            let ga = g.element_gradient(&f1, elem);
            assert!((ga[0] - 1.0).abs() < 1e-12 && ga[1].abs() < 1e-12);
            let gb = g.element_gradient(&f2, elem);
            assert!((gb[0] - 3.0).abs() < 1e-11 && (gb[1] - 2.0).abs() < 1e-11);
            let gc = g.element_gradient(&constant, elem);
            assert!(gc[0].abs() < 1e-12 && gc[1].abs() < 1e-12);
        }
    }

    #[test]
    fn element_gradient_is_linear_in_nodal_values() {
        let g = GridSpec::build(6, GammaSelector::LeftEdge).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..50 {
            let fa: Vec<f64> = (0..g.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fb: Vec<f64> = (0..g.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (al, be) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combo: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| al * a + be * b).collect();
            let elem = rng.gen_range(0..g.elements.len());
            let gc = g.element_gradient(&combo, elem);
            let ga = g.element_gradient(&fa, elem);
            let gb = g.element_gradient(&fb, elem);
            for d in 0..2 {
                assert_relative_eq!(
                    gc[d],
                    al * ga[d] + be * gb[d],
                    max_relative = 1e-11,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn deformation_gradient_examples() {
        let g = GridSpec::build(4, GammaSelector::LeftEdge).unwrap();
        let mut s = StateFields::zero(&g);
        for e in 0..g.elements.len() {
            assert_eq!(deformation_gradient(&s, &g, 0.3, e), Mat2::identity());
        }
        for v in 0..g.num_nodes() {
            s.u[v] = g.node_coord(v);
        }
        for e in 0..g.elements.len() {
            let f = deformation_gradient(&s, &g, 0.1, e);
            assert!((f - Mat2::identity() * 1.1).frob() < 1e-12);
        }
        for v in 0..g.num_nodes() {
            s.u[v] = [g.node_coord(v)[1], 0.0];
        }
        for e in 0..g.elements.len() {
            let f = deformation_gradient(&s, &g, 0.2, e);
            assert!((f - Mat2::new(1.0, 0.2, 0.0, 1.0)).frob() < 1e-12);
        }
    }

    #[test]
    fn eulerian_magnetization_satisfies_volume_constraint() {
        let g = GridSpec::build(5, GammaSelector::LeftEdge).unwrap();
        let mut s = StateFields::zero(&g);
        for e in 0..g.elements.len() {
            let m = eulerian_magnetization(&s, &g, 0.1, e).unwrap();
            assert!((m[0] - 1.0).abs() < 1e-14 && m[1].abs() < 1e-14);
        }
        // uniform dilation: det F = (1 + eps)^2
        for v in 0..g.num_nodes() {
            s.u[v] = g.node_coord(v);
            s.phi[v] = std::f64::consts::FRAC_PI_2;
        }
        let eps = 0.25;
        for e in 0..g.elements.len() {
            let m = eulerian_magnetization(&s, &g, eps, e).unwrap();
            let det = deformation_gradient(&s, &g, eps, e).det();
            assert_relative_eq!(det, 1.5625, max_relative = 1e-12);
            assert!((norm(m) * det - 1.0).abs() < 1e-10);
            assert!(m[0].abs() < 1e-12 && (m[1] - 1.0 / det).abs() < 1e-12);
        }
        // random states keep the constraint wherever det > 0
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..20 {
            let mut s = StateFields::zero(&g);
            for v in 0..g.num_nodes() {
                s.u[v] = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
                s.phi[v] = rng.gen_range(-6.0..6.0);
            }
            for e in 0..g.elements.len() {
                let det = deformation_gradient(&s, &g, 0.2, e).det();
                match eulerian_magnetization(&s, &g, 0.2, e) {
                    Ok(m) => assert!((norm(m) * det - 1.0).abs() < 1e-10),
                    Err(GridError::DegenerateElement { .. }) => assert!(det <= 0.0),
                    Err(e) => panic!("unexpected {e:?}"),
                }
            }
        }
    }

    #[test]
    fn eulerian_magnetization_rejects_folds() {
        let g = GridSpec::build(3, GammaSelector::LeftEdge).unwrap();
        let mut s = StateFields::zero(&g);
        for v in 0..g.num_nodes() {
            s.u[v] = [-2.0 * g.node_coord(v)[0], 0.0];
        }
        // eps = 1: F = diag(-1, 1), det < 0
        assert!(matches!(
            eulerian_magnetization(&s, &g, 1.0, 0),
            Err(GridError::DegenerateElement { .. })
        ));
    }

    #[test]
    fn exchange_zero_for_constant_magnetization() {
        let g = GridSpec::build(6, GammaSelector::LeftEdge).unwrap();
        let mut s = StateFields::zero(&g);
        for v in 0..g.num_nodes() {
            s.phi[v] = 1.234;
        }
        assert_eq!(exchange_energy_pullback(&s, &g, 0.0).unwrap(), 0.0);
        // a deformation does not create exchange energy out of a constant M
        for v in 0..g.num_nodes() {
            s.u[v] = g.node_coord(v);
        }
        assert!(exchange_energy_pullback(&s, &g, 0.3).unwrap().abs() < 1e-14);
    }

    #[test]
    fn exchange_matches_analytic_dirichlet_energy() {
        // M = (cos(pi x1), sin(pi x1)) has |grad M|^2 = pi^2, energy pi^2/2.
        let g = GridSpec::build(33, GammaSelector::LeftEdge).unwrap();
        let mut s = StateFields::zero(&g);
        for v in 0..g.num_nodes() {
            s.phi[v] = std::f64::consts::PI * g.node_coord(v)[0];
        }
        let e = exchange_energy_pullback(&s, &g, 0.0).unwrap();
        let exact = 0.5 * std::f64::consts::PI * std::f64::consts::PI;
        assert!((e - exact).abs() / exact < 0.02, "{e} vs {exact}");
    }

    #[test]
    fn exchange_pullback_reduces_at_zero_eps() {
        // the eps = 0 shortcut equals the generic path evaluated at u = 0
        let g = GridSpec::build(9, GammaSelector::LeftEdge).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let mut s = StateFields::zero(&g);
        for v in 0..g.num_nodes() {
            s.phi[v] = rng.gen_range(-3.0..3.0);
            s.u[v] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        }
        let with_u = exchange_energy_pullback(&s, &g, 0.0).unwrap();
        let mut s0 = s.clone();
        s0.u.iter_mut().for_each(|u| *u = [0.0, 0.0]);
        let tiny = exchange_energy_pullback(&s0, &g, 1e-300).unwrap();
        assert_relative_eq!(with_u, tiny, max_relative = 1e-12);
    }

    #[test]
    fn volume_transport_identity() {
        // integral of M over the reference domain equals the integral of the
        // spatial magnetization over the deformed elements, when the deformed
        // areas come from the shoelace formula (independent of det F code).
        let g = GridSpec::build(8, GammaSelector::LeftEdge).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for round in 0..10 {
            let eps = if round == 0 { 0.0 } else { 0.05 };
            let mut s = StateFields::zero(&g);
            for v in 0..g.num_nodes() {
                s.u[v] = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
                s.phi[v] = rng.gen_range(-3.0..3.0);
            }
            let mut lagrangian = [0.0, 0.0];
            let mut eulerian = [0.0, 0.0];
            for elem in 0..g.elements.len() {
                let e = &g.elements[elem];
                let em = element_magnetization(&s, &g, elem);
                lagrangian[0] += em.average[0] * g.area;
                lagrangian[1] += em.average[1] * g.area;

                let det = deformation_gradient(&s, &g, eps, elem).det();
                assert!(det > 0.0);
                // deformed vertex positions and shoelace area
                let p: Vec<Vec2> = e
                    .v
                    .iter()
                    .map(|&v| {
                        let x = g.node_coord(v);
                        [x[0] + eps * s.u[v][0], x[1] + eps * s.u[v][1]]
                    })
                    .collect();
                let area = 0.5
                    * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                        - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
                // spatial magnetization values at the deformed vertices:
                // vertex M over the element determinant
                let mavg = [
                    (em.vertex[0][0] + em.vertex[1][0] + em.vertex[2][0]) / 3.0 / det,
                    (em.vertex[0][1] + em.vertex[1][1] + em.vertex[2][1]) / 3.0 / det,
                ];
                eulerian[0] += mavg[0] * area;
                eulerian[1] += mavg[1] * area;
            }
            assert!(
                (lagrangian[0] - eulerian[0]).abs() < 1e-8
                    && (lagrangian[1] - eulerian[1]).abs() < 1e-8,
                "transport mismatch {lagrangian:?} vs {eulerian:?}"
            );
        }
    }

    #[test]
    fn dirichlet_application() {
        let g = GridSpec::build(5, GammaSelector::LeftEdge).unwrap();
        let mut s = StateFields::zero(&g);
        for v in 0..g.num_nodes() {
            s.u[v] = [9.0, 9.0];
        }
        let w = BoundaryDatum::UniaxialStretch { alpha: 0.1 };
        apply_dirichlet(&mut s, &w, &g);
        for v in 0..g.num_nodes() {
            if g.is_gamma_node(v) {
                // left edge has x1 = 0, so the stretch datum is zero there
                assert_eq!(s.u[v], [0.0, 0.0]);
            } else {
                assert_eq!(s.u[v], [9.0, 9.0]);
            }
        }
        let snapshot = s.clone();
        apply_dirichlet(&mut s, &w, &g);
        assert_eq!(s, snapshot);

        let g = GridSpec::build(5, GammaSelector::BottomEdge).unwrap();
        let mut s = StateFields::zero(&g);
        let w = BoundaryDatum::Bending { alpha: 0.2 };
        apply_dirichlet(&mut s, &w, &g);
        for v in 0..g.num_nodes() {
            let x = g.node_coord(v);
            if g.is_gamma_node(v) {
                assert_eq!(s.u[v], [0.2 * x[0] * x[1], -0.1 * x[0] * x[0]]);
            }
        }
    }

    #[test]
    fn element_magnetization_degeneracy_fallback() {
        let g = GridSpec::build(3, GammaSelector::LeftEdge).unwrap();
        let mut s = StateFields::zero(&g);
        // vertices of element 0 are nodes 0, 1, 4; make their unit vectors
        // sum to zero (angles 0, 2pi/3, 4pi/3)
        let third = 2.0 * std::f64::consts::PI / 3.0;
        s.phi[0] = 0.0;
        s.phi[1] = third;
        s.phi[4] = 2.0 * third;
        let em = element_magnetization(&s, &g, 0);
        assert!(em.degenerate);
        assert_eq!(em.unit, [1.0, 0.0]);
        assert!(norm(em.average) < 1e-12);
    }
}
