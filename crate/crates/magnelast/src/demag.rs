//! Stray-field magnetostatics on a padded box around the unit square.
//!
//! The magnetization is pushed forward to the deformed configuration and
//! rasterized onto a uniform cell grid over `(-pad, 1+pad)^2`; a piecewise
//! linear potential with zero boundary values solves the weak problem
//! `mu0 (grad v, grad w) = (f, grad w)` for all test functions `w`. On this
//! uniform criss-cross triangulation the stiffness action reduces to the
//! five-point stencil, so the solve is matrix-free conjugate gradients.
//!
//! The energy reported to the optimizer uses the stationarity-protected
//! value `b.v - (mu0/2) v.K.v`, whose error is quadratic in the CG residual
//! rather than linear.

use crate::fields::{element_magnetization, GridError, GridSpec, StateFields};
use crate::tensor::{CompensatedSum, Vec2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemagError {
    #[error("conjugate gradients stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Uniform cell grid over the padded box `(-pad, 1+pad)^2` with `n_cells`
/// cells per side and `(n_cells+1)^2` potential nodes.
#[derive(Debug, Clone)]
pub struct BoxGrid {
    pub pad: f64,
    pub n_cells: usize,
}

impl BoxGrid {
    pub fn new(pad: f64, n_cells: usize) -> BoxGrid {
        assert!(pad > 0.0 && pad.is_finite(), "box padding must be positive");
        assert!(n_cells >= 2, "box needs at least 2 cells per side");
        BoxGrid { pad, n_cells }
    }

    pub fn origin(&self) -> f64 {
        -self.pad
    }

    pub fn side(&self) -> f64 {
        1.0 + 2.0 * self.pad
    }

    pub fn cell_h(&self) -> f64 {
        self.side() / self.n_cells as f64
    }

    pub fn num_cells(&self) -> usize {
        self.n_cells * self.n_cells
    }

    pub fn num_nodes(&self) -> usize {
        (self.n_cells + 1) * (self.n_cells + 1)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.n_cells + 1) + i
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.n_cells + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        let h = self.cell_h();
        [
            self.origin() + (i as f64 + 0.5) * h,
            self.origin() + (j as f64 + 0.5) * h,
        ]
    }

    pub fn node_coord(&self, i: usize, j: usize) -> Vec2 {
        let h = self.cell_h();
        [self.origin() + i as f64 * h, self.origin() + j as f64 * h]
    }
}

/// A vector field sampled per box cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub values: Vec<Vec2>,
}

impl CellField {
    pub fn zero(bg: &BoxGrid) -> CellField {
        CellField {
            values: vec![[0.0, 0.0]; bg.num_cells()],
        }
    }
}

/// L2 norm of a cell field, cells weighted by their area.
pub fn field_l2_norm(f: &CellField, bg: &BoxGrid) -> f64 {
    let h2 = bg.cell_h() * bg.cell_h();
    let s: f64 = f.values.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
    (s * h2).sqrt()
}

/// L2 distance between two cell fields on the same box.
pub fn field_l2_distance(a: &CellField, b: &CellField, bg: &BoxGrid) -> f64 {
    assert_eq!(a.values.len(), b.values.len());
    let h2 = bg.cell_h() * bg.cell_h();
    let s: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let dx = x[0] - y[0];
            let dy = x[1] - y[1];
            dx * dx + dy * dy
        })
        .sum();
    (s * h2).sqrt()
}

/// Pushed-forward magnetization rasterized onto the box cells, plus the
/// element that claimed each cell (for adjoint accumulation) and the number
/// of cells strictly inside more than one deformed triangle.
#[derive(Debug, Clone)]
pub struct RasterizedSource {
    pub field: CellField,
    pub owner: Vec<Option<u32>>,
    pub overlap_cells: usize,
}

/// Transport the unit magnetization to the deformed placement and sample it
/// on the box cells: a cell center inside the image of element T receives
/// the value `m / det F_T`, preserving the net moment. Elements are visited
/// in ascending order and the first containing triangle wins, so ties on
/// shared edges resolve deterministically to the lowest index.
pub fn rasterize_pushforward(
    state: &StateFields,
    grid: &GridSpec,
    eps: f64,
    bg: &BoxGrid,
) -> Result<RasterizedSource, GridError> {
    let n = bg.n_cells;
    let h = bg.cell_h();
    let origin = bg.origin();
    let mut field = CellField::zero(bg);
    let mut owner: Vec<Option<u32>> = vec![None; bg.num_cells()];
    let mut strict: Vec<bool> = vec![false; bg.num_cells()];
    let mut counted: Vec<bool> = vec![false; bg.num_cells()];
    let mut overlap_cells = 0;

    for elem in 0..grid.elements.len() {
        let e = &grid.elements[elem];
        let f = crate::fields::deformation_gradient(state, grid, eps, elem);
        let det = f.det();
        if det <= 0.0 {
            return Err(GridError::DegenerateElement { elem, det });
        }
        let em = element_magnetization(state, grid, elem);
        let value = [em.unit[0] / det, em.unit[1] / det];

        let mut y = [[0.0f64; 2]; 3];
        for k in 0..3 {
            let x = grid.node_coord(e.v[k]);
            y[k] = [
                x[0] + eps * state.u[e.v[k]][0],
                x[1] + eps * state.u[e.v[k]][1],
            ];
        }
        // det > 0 keeps the reference orientation, so the image is CCW
        let (xmin, xmax) = (
            y[0][0].min(y[1][0]).min(y[2][0]),
            y[0][0].max(y[1][0]).max(y[2][0]),
        );
        let (ymin, ymax) = (
            y[0][1].min(y[1][1]).min(y[2][1]),
            y[0][1].max(y[1][1]).max(y[2][1]),
        );
        let to_lo = |v: f64| (((v - origin) / h - 0.5).ceil().max(0.0)) as usize;
        let to_hi = |v: f64| ((v - origin) / h - 0.5).floor().min((n - 1) as f64);
        let i_lo = to_lo(xmin);
        let j_lo = to_lo(ymin);
        let i_hi = to_hi(xmax);
        let j_hi = to_hi(ymax);
        if i_hi < 0.0 || j_hi < 0.0 {
            continue;
        }
        for j in j_lo..=(j_hi as usize) {
            for i in i_lo..=(i_hi as usize) {
                let c = bg.cell_center(i, j);
                let mut inside = true;
                let mut strictly = true;
                for k in 0..3 {
                    let a = y[k];
                    let b = y[(k + 1) % 3];
                    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                    if cross < 0.0 {
                        inside = false;
                        break;
                    }
                    if cross == 0.0 {
                        strictly = false;
                    }
                }
                if !inside {
                    continue;
                }
                let cell = bg.cell_index(i, j);
                match owner[cell] {
                    None => {
                        owner[cell] = Some(elem as u32);
                        field.values[cell] = value;
                        strict[cell] = strictly;
                    }
                    Some(_) => {
                        if strictly && strict[cell] && !counted[cell] {
                            overlap_cells += 1;
                            counted[cell] = true;
                        }
                    }
                }
            }
        }
    }
    Ok(RasterizedSource {
        field,
        owner,
        overlap_cells,
    })
}

#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub v: Vec<f64>,
    pub iterations: usize,
    /// Final residual relative to the right-hand side norm.
    pub residual: f64,
}

/// Matrix-free solver for the truncated magnetostatic problem.
#[derive(Debug, Clone)]
pub struct DemagSolver {
    pub box_grid: BoxGrid,
    pub mu0: f64,
    pub cg_tol: f64,
    pub cg_max: usize,
}

impl DemagSolver {
    /// Stiffness action `out = K v` (unit coefficient). Interior rows carry
    /// the five-point stencil; boundary rows are identity-eliminated to 0.
    pub fn apply_stiffness(&self, v: &[f64], out: &mut [f64]) {
        let n = self.box_grid.n_cells;
        let w = n + 1;
        debug_assert_eq!(v.len(), w * w);
        out[..w].fill(0.0);
        out[w * n..].fill(0.0);
        for j in 1..n {
            let row = j * w;
            out[row] = 0.0;
            out[row + n] = 0.0;
            for i in 1..n {
                let k = row + i;
                out[k] = 4.0 * v[k] - v[k - 1] - v[k + 1] - v[k - w] - v[k + w];
            }
        }
    }

    /// Load vector of the weak form: `b_i = (f, grad phi_i)` assembled per
    /// cell from the two triangles of the criss-cross split, boundary rows
    /// zeroed.
    pub fn assemble_rhs(&self, f: &CellField) -> Vec<f64> {
        let bg = &self.box_grid;
        let n = bg.n_cells;
        let w = n + 1;
        let h = bg.cell_h();
        let mut b = vec![0.0; w * w];
        for j in 0..n {
            for i in 0..n {
                let [fx, fy] = f.values[bg.cell_index(i, j)];
                if fx == 0.0 && fy == 0.0 {
                    continue;
                }
                let n00 = bg.node_index(i, j);
                let n10 = n00 + 1;
                let n01 = n00 + w;
                let n11 = n01 + 1;
                b[n00] -= 0.5 * h * (fx + fy);
                b[n10] += 0.5 * h * (fx - fy);
                b[n11] += 0.5 * h * (fx + fy);
                b[n01] -= 0.5 * h * (fx - fy);
            }
        }
        for i in 0..w {
            b[i] = 0.0;
            b[w * n + i] = 0.0;
            b[i * w] = 0.0;
            b[i * w + n] = 0.0;
        }
        b
    }

    pub fn solve_potential(
        &self,
        f: &CellField,
        warm: Option<&[f64]>,
    ) -> Result<PotentialSolution, DemagError> {
        let b = self.assemble_rhs(f);
        self.solve_potential_rhs(&b, warm)
    }

    /// Conjugate gradients on `K v = b / mu0`, warm-started when a previous
    /// potential is supplied. Converges when the residual drops below
    /// `cg_tol` relative to the scaled right-hand side.
    pub fn solve_potential_rhs(
        &self,
        b: &[f64],
        warm: Option<&[f64]>,
    ) -> Result<PotentialSolution, DemagError> {
        assert!(self.mu0 > 0.0, "magnetostatic solve needs mu0 > 0");
        let nn = self.box_grid.num_nodes();
        assert_eq!(b.len(), nn);
        let rhs: Vec<f64> = b.iter().map(|x| x / self.mu0).collect();
        let bnorm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(PotentialSolution {
                v: vec![0.0; nn],
                iterations: 0,
                residual: 0.0,
            });
        }
        let mut x = match warm {
            Some(wv) => {
                assert_eq!(wv.len(), nn);
                let mut x = wv.to_vec();
                self.zero_boundary(&mut x);
                x
            }
            None => vec![0.0; nn],
        };
        let mut ax = vec![0.0; nn];
        self.apply_stiffness(&x, &mut ax);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut p = r.clone();
        let mut rs: f64 = r.iter().map(|x| x * x).sum();
        let target = self.cg_tol * bnorm;
        let mut iterations = 0;
        while rs.sqrt() > target {
            if iterations >= self.cg_max {
                return Err(DemagError::NoConvergence {
                    iterations,
                    residual: rs.sqrt() / bnorm,
                });
            }
            self.apply_stiffness(&p, &mut ax);
            let pap: f64 = p.iter().zip(&ax).map(|(a, b)| a * b).sum();
            let alpha = rs / pap;
            for k in 0..nn {
                x[k] += alpha * p[k];
                r[k] -= alpha * ax[k];
            }
            let rs_new: f64 = r.iter().map(|x| x * x).sum();
            let beta = rs_new / rs;
            for k in 0..nn {
                p[k] = r[k] + beta * p[k];
            }
            rs = rs_new;
            iterations += 1;
        }
        Ok(PotentialSolution {
            v: x,
            iterations,
            residual: rs.sqrt() / bnorm,
        })
    }

    fn zero_boundary(&self, v: &mut [f64]) {
        let n = self.box_grid.n_cells;
        let w = n + 1;
        for i in 0..w {
            v[i] = 0.0;
            v[w * n + i] = 0.0;
            v[i * w] = 0.0;
            v[i * w + n] = 0.0;
        }
    }

    /// Dirichlet energy of the potential, `integral of |grad v|^2`, summed
    /// triangle-wise. Algebraically equal to `v.K.v`.
    pub fn grad_l2_sq(&self, v: &[f64]) -> f64 {
        let bg = &self.box_grid;
        let n = bg.n_cells;
        let w = n + 1;
        let h = bg.cell_h();
        // compensated: tens of thousands of cells feed the objective value,
        // and a plain sum's round-off stalls the outer line search
        let mut acc = CompensatedSum::new();
        for j in 0..n {
            for i in 0..n {
                let n00 = bg.node_index(i, j);
                let (v00, v10, v01, v11) = (v[n00], v[n00 + 1], v[n00 + w], v[n00 + w + 1]);
                let g1 = [(v10 - v00) / h, (v11 - v10) / h];
                let g2 = [(v11 - v01) / h, (v01 - v00) / h];
                acc.add(
                    0.5 * h * h * (g1[0] * g1[0] + g1[1] * g1[1] + g2[0] * g2[0] + g2[1] * g2[1]),
                );
            }
        }
        acc.total()
    }

    /// Magnetostatic energy `(mu0/2) integral |grad v|^2` of a potential.
    pub fn demag_energy(&self, v: &[f64]) -> f64 {
        0.5 * self.mu0 * self.grad_l2_sq(v)
    }

    /// Energy through the stationarity of the weak form: at the exact
    /// solution `b.v - (mu0/2) v.K.v = (mu0/2) v.K.v`, and for an inexact
    /// potential the error is quadratic in the residual.
    pub fn energy_from_rhs(&self, v: &[f64], b: &[f64]) -> f64 {
        let mut bv = CompensatedSum::new();
        for (a, b) in b.iter().zip(v) {
            bv.add(a * b);
        }
        bv.total() - 0.5 * self.mu0 * self.grad_l2_sq(v)
    }

    /// Per-cell integrals of the potential gradient, `integral_cell grad v`:
    /// the sensitivity of `b.v` to that cell's source value.
    pub fn cell_gradient_integrals(&self, v: &[f64]) -> Vec<Vec2> {
        let bg = &self.box_grid;
        let n = bg.n_cells;
        let w = n + 1;
        let h = bg.cell_h();
        let mut out = vec![[0.0, 0.0]; bg.num_cells()];
        for j in 0..n {
            for i in 0..n {
                let n00 = bg.node_index(i, j);
                let (v00, v10, v01, v11) = (v[n00], v[n00 + 1], v[n00 + w], v[n00 + w + 1]);
                // (h^2/2) (g_lower + g_upper)
                out[bg.cell_index(i, j)] = [
                    0.5 * h * (v10 - v00 + v11 - v01),
                    0.5 * h * (v11 - v10 + v01 - v00),
                ];
            }
        }
        out
    }
}
