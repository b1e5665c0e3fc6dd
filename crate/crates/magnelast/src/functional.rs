//! Assembly of the coupled magnetoelastic functionals and their exact
//! gradients over the free degrees of freedom.
//!
//! Two objectives share one code path:
//!
//! * the finite-strain functional at loading scale `eps`: the stored energy
//!   of `exp(eps*E(m)) * (I + eps*grad u)` scaled by `eps^-2`, plus the
//!   exchange energy pulled back from the deformed configuration, plus the
//!   magnetostatic energy of the pushed-forward magnetization, minus body
//!   and field work;
//! * its small-strain limit: the quadratic elastic form in
//!   `sym(grad u) + E(m)`, the reference-domain exchange energy, and the
//!   magnetostatic energy of the undeformed magnetization.
//!
//! Degrees of freedom are the displacements of the nodes off the Dirichlet
//! boundary (two each, node-ascending) followed by the magnetization angle
//! at every node. All element loops run in ascending index order, so
//! assembly is bitwise deterministic.

use crate::demag::{rasterize_pushforward, DemagError, DemagSolver, RasterizedSource};
use crate::energy::StoredEnergyModel;
use crate::fields::{
    apply_dirichlet, deformation_gradient, element_magnetization, BoundaryDatum, GridSpec,
    StateFields,
};
use crate::loads::FieldSpec;
use crate::tensor::{dot, perp, CompensatedSum, Mat2, Vec2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("state is inadmissible: det F <= 0 on {} element(s), first {:?}", elements.len(), elements.first())]
    Inadmissible { elements: Vec<usize> },
    #[error("magnetostatic solve failed")]
    Demag(#[from] DemagError),
}

/// Body force and applied magnetic field.
#[derive(Debug, Clone)]
pub struct LoadSpec {
    pub f: FieldSpec,
    pub h: FieldSpec,
}

impl LoadSpec {
    pub fn none() -> Self {
        LoadSpec {
            f: FieldSpec::Zero,
            h: FieldSpec::Zero,
        }
    }
}

/// Energy breakdown at one state. `total` is the loaded functional
/// elastic + exchange + magnetostatic - load_work - zeeman, and `gradient`
/// is its exact derivative with respect to the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub elastic: f64,
    pub exchange: f64,
    pub magnetostatic: f64,
    pub load_work: f64,
    pub zeeman: f64,
    pub total: f64,
    pub cg_iterations: usize,
    pub gradient: Vec<f64>,
}

impl EnergyReport {
    /// The unloaded part elastic + exchange + magnetostatic.
    pub fn internal(&self) -> f64 {
        self.elastic + self.exchange + self.magnetostatic
    }
}

/// Load values and their gradients, reported separately from the energy.
#[derive(Debug, Clone)]
pub struct LoadsReport {
    pub work: f64,
    pub zeeman: f64,
    pub grad_work: Vec<f64>,
    pub grad_zeeman: Vec<f64>,
}

/// Orientation diagnostics of a state at scale `eps`.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub min_det: f64,
    pub max_opnorm_eps_grad_u: f64,
    pub all_positive: bool,
    /// `eps |grad u|_op < 1` on every element; implies `all_positive`.
    pub ciarlet_pointwise: bool,
    /// `eps |grad u|_op < c` everywhere for the caller's constant `c`,
    /// a proxy for the non-constructive global injectivity threshold.
    pub ciarlet_global_hint: bool,
    /// Elements with `eps |grad u|_op < 1` but `det F <= 0`. Provably empty;
    /// counted as a numerical cross-check.
    pub implication_violations: usize,
}

/// Mapping between nodal fields and the flat DOF vector:
/// `[u at free nodes (2 each, node-ascending), phi at all nodes]`.
#[derive(Debug, Clone)]
pub struct DofMap {
    u_slot: Vec<Option<usize>>,
    boundary_u: Vec<[f64; 2]>,
    n_free: usize,
    n_nodes: usize,
}

impl DofMap {
    pub fn build(grid: &GridSpec, w: &BoundaryDatum) -> DofMap {
        let n_nodes = grid.num_nodes();
        let mut u_slot = vec![None; n_nodes];
        let mut boundary_u = vec![[0.0, 0.0]; n_nodes];
        let mut n_free = 0;
        for node in 0..n_nodes {
            if grid.is_gamma_node(node) {
                boundary_u[node] = w.eval(grid.node_coord(node));
            } else {
                u_slot[node] = Some(n_free);
                n_free += 1;
            }
        }
        DofMap {
            u_slot,
            boundary_u,
            n_free,
            n_nodes,
        }
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_free + self.n_nodes
    }

    pub fn u_dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.u_slot[node].map(|s| 2 * s + comp)
    }

    pub fn phi_dof(&self, node: usize) -> usize {
        2 * self.n_free + node
    }

    pub fn pack(&self, state: &StateFields) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs()];
        for node in 0..self.n_nodes {
            if let Some(s) = self.u_slot[node] {
                x[2 * s] = state.u[node][0];
                x[2 * s + 1] = state.u[node][1];
            }
            x[self.phi_dof(node)] = state.phi[node];
        }
        x
    }

    /// Inverse of `pack`; boundary nodes always receive the datum, so every
    /// unpacked state satisfies the Dirichlet condition exactly.
    pub fn unpack(&self, x: &[f64], state: &mut StateFields) {
        debug_assert_eq!(x.len(), self.n_dofs());
        for node in 0..self.n_nodes {
            state.u[node] = match self.u_slot[node] {
                Some(s) => [x[2 * s], x[2 * s + 1]],
                None => self.boundary_u[node],
            };
            state.phi[node] = x[self.phi_dof(node)];
        }
    }
}

/// Reusable scratch between energy evaluations; carries the warm-start
/// potential for the magnetostatic solve.
#[derive(Debug, Default, Clone)]
pub struct EvalCache {
    pub demag_warm: Option<Vec<f64>>,
}

pub struct EnergySystem {
    pub grid: GridSpec,
    pub model: StoredEnergyModel,
    pub loads: LoadSpec,
    pub boundary: BoundaryDatum,
    pub demag: DemagSolver,
    pub dofs: DofMap,
    /// L2 norm of the body force over the reference domain (element
    /// midpoint rule), used by the coercivity diagnostic.
    pub f_l2: f64,
    /// Sup of |h| sampled at the box cell centers.
    pub h_inf: f64,
}

impl EnergySystem {
    pub fn new(
        grid: GridSpec,
        model: StoredEnergyModel,
        loads: LoadSpec,
        boundary: BoundaryDatum,
        demag: DemagSolver,
    ) -> EnergySystem {
        let dofs = DofMap::build(&grid, &boundary);
        let mut f_sq = 0.0;
        for elem in 0..grid.elements.len() {
            let fx = loads.f.value(grid.centroid(elem));
            f_sq += grid.area * dot(fx, fx);
        }
        let mut h_inf: f64 = 0.0;
        let bg = &demag.box_grid;
        for j in 0..bg.n_cells {
            for i in 0..bg.n_cells {
                let h = loads.h.value(bg.cell_center(i, j));
                h_inf = h_inf.max(dot(h, h).sqrt());
            }
        }
        EnergySystem {
            grid,
            model,
            loads,
            boundary,
            demag,
            dofs,
            f_l2: f_sq.sqrt(),
            h_inf,
        }
    }

    /// Whether the magnetostatic term participates (vacuum permeability
    /// positive).
    pub fn has_demag(&self) -> bool {
        self.demag.mu0 > 0.0
    }

    /// Default initial state: zero displacement lifted to the boundary datum
    /// by one Jacobi smoothing sweep, magnetization along +x.
    pub fn initial_state(&self) -> StateFields {
        let mut s = StateFields::zero(&self.grid);
        apply_dirichlet(&mut s, &self.boundary, &self.grid);
        let n = self.grid.n;
        let prev = s.u.clone();
        for j in 0..n {
            for i in 0..n {
                let node = j * n + i;
                if self.grid.is_gamma_node(node) {
                    continue;
                }
                let mut acc = [0.0, 0.0];
                let mut cnt = 0.0;
                let mut push = |ni: usize| {
                    acc[0] += prev[ni][0];
                    acc[1] += prev[ni][1];
                    cnt += 1.0;
                };
                if i > 0 {
                    push(node - 1);
                }
                if i + 1 < n {
                    push(node + 1);
                }
                if j > 0 {
                    push(node - n);
                }
                if j + 1 < n {
                    push(node + n);
                }
                s.u[node] = [acc[0] / cnt, acc[1] / cnt];
            }
        }
        s
    }

    fn gradients_and_dets(
        &self,
        state: &StateFields,
        eps: f64,
    ) -> Result<(Vec<Mat2>, Vec<f64>), EvalError> {
        let ne = self.grid.elements.len();
        let mut fs = Vec::with_capacity(ne);
        let mut dets = Vec::with_capacity(ne);
        let mut bad = Vec::new();
        for elem in 0..ne {
            let f = deformation_gradient(state, &self.grid, eps, elem);
            let d = f.det();
            if d <= 0.0 {
                bad.push(elem);
            }
            fs.push(f);
            dets.push(d);
        }
        if !bad.is_empty() {
            return Err(EvalError::Inadmissible { elements: bad });
        }
        Ok((fs, dets))
    }

    /// The finite-strain loaded functional at scale `eps` with its gradient.
    pub fn finite_energy(
        &self,
        state: &StateFields,
        eps: f64,
        cache: &mut EvalCache,
    ) -> Result<EnergyReport, EvalError> {
        assert!(eps > 0.0, "finite_energy needs eps > 0");
        let (fs, dets) = self.gradients_and_dets(state, eps)?;
        let area = self.grid.area;
        let mut grad = vec![0.0; self.dofs.n_dofs()];
        // compensated accumulation: the eps^-2 amplification makes the plain
        // running sum's round-off visible to the line search at small eps
        let mut elastic = CompensatedSum::new();
        let mut exchange = CompensatedSum::new();
        let mut load_work = CompensatedSum::new();
        let mut zeeman = CompensatedSum::new();

        let ch = (0.5 * eps).cosh();
        let sh = (0.5 * eps).sinh();

        for elem in 0..self.grid.elements.len() {
            let e = &self.grid.elements[elem];
            let f = fs[elem];
            let det = dets[elem];
            let em = element_magnetization(state, &self.grid, elem);
            let (c2, s2) = (
                em.unit[0] * em.unit[0] - em.unit[1] * em.unit[1],
                2.0 * em.unit[0] * em.unit[1],
            );
            // d psi / d phi_k for the angle of the normalized element average
            let dpsi = |k: usize| {
                if em.degenerate {
                    0.0
                } else {
                    dot(em.unit, em.vertex[k]) / (3.0 * em.average_len)
                }
            };

            // elastic: eps^-2 * stored_energy(exp(eps E) F); det(exp(eps E)) = 1,
            // and exp(eps E) = cosh(eps/2) I - sinh(eps/2) (2 m x m - I)
            let q = Mat2::new(ch - sh * c2, -sh * s2, -sh * s2, ch + sh * c2);
            let b = q * f;
            elastic.add(area / (eps * eps) * self.model.stored_energy(&b));
            let p = self
                .model
                .stored_energy_grad(&b)
                .expect("det B = det F > 0 on admissible states");
            let qtp = q.transpose() * p;
            for k in 0..3 {
                for i in 0..2 {
                    if let Some(dof) = self.dofs.u_dof(e.v[k], i) {
                        grad[dof] += area / eps * dot([qtp.m[i][0], qtp.m[i][1]], e.grads[k]);
                    }
                }
            }
            let pft = p * f.transpose();
            let dq = Mat2::new(s2, -c2, -c2, -s2) * (2.0 * sh);
            let delastic_dpsi = area / (eps * eps) * pft.ddot(&dq);
            for k in 0..3 {
                grad[self.dofs.phi_dof(e.v[k])] += delastic_dpsi * dpsi(k);
            }

            // exchange pulled back: |grad(M) F^-1|^2 / det * area / 2
            let mut x = Mat2::zero();
            for k in 0..3 {
                for r in 0..2 {
                    for c in 0..2 {
                        x.m[r][c] += em.vertex[k][r] * e.grads[k][c];
                    }
                }
            }
            let finv = f.inverse().expect("det > 0");
            let y = x * finv;
            let ysq = y.norm_sq();
            exchange.add(0.5 * area * ysq / det);
            let yft = y * finv.transpose();
            for k in 0..3 {
                let mperp = perp(em.vertex[k]);
                grad[self.dofs.phi_dof(e.v[k])] +=
                    area / det * dot(mperp, yft.apply(e.grads[k]));
            }
            let cof = f.cof();
            let wmat = y.transpose() * yft * (-area / det) + cof * (-0.5 * area * ysq / (det * det));
            for k in 0..3 {
                for i in 0..2 {
                    if let Some(dof) = self.dofs.u_dof(e.v[k], i) {
                        grad[dof] += eps * dot([wmat.m[i][0], wmat.m[i][1]], e.grads[k]);
                    }
                }
            }

            // loads: body work over the reference domain, field work pulled
            // back through the volume-preserving magnetization transport
            let xc = self.grid.centroid(elem);
            let ubar = [
                (state.u[e.v[0]][0] + state.u[e.v[1]][0] + state.u[e.v[2]][0]) / 3.0,
                (state.u[e.v[0]][1] + state.u[e.v[1]][1] + state.u[e.v[2]][1]) / 3.0,
            ];
            let fval = self.loads.f.value(xc);
            load_work.add(area * dot(fval, ubar));
            let yc = [xc[0] + eps * ubar[0], xc[1] + eps * ubar[1]];
            let hval = self.loads.h.value(yc);
            zeeman.add(area * dot(hval, em.average));
            let jh = self.loads.h.jacobian(yc);
            let jht_a = jh.apply_transposed(em.average);
            for k in 0..3 {
                let mperp = perp(em.vertex[k]);
                grad[self.dofs.phi_dof(e.v[k])] -= area / 3.0 * dot(hval, mperp);
                for i in 0..2 {
                    if let Some(dof) = self.dofs.u_dof(e.v[k], i) {
                        grad[dof] -= area * (fval[i] + eps * jht_a[i]) / 3.0;
                    }
                }
            }
        }

        // magnetostatics of the pushed-forward magnetization
        let mut magnetostatic = 0.0;
        let mut cg_iterations = 0;
        if self.has_demag() {
            let src = rasterize_pushforward(state, &self.grid, eps, &self.demag.box_grid)
                .map_err(|ge| match ge {
                    crate::fields::GridError::DegenerateElement { elem, .. } => {
                        EvalError::Inadmissible {
                            elements: vec![elem],
                        }
                    }
                    other => panic!("unexpected grid error during rasterization: {other}"),
                })?;
            let rhs = self.demag.assemble_rhs(&src.field);
            let sol = self
                .demag
                .solve_potential_rhs(&rhs, cache.demag_warm.as_deref())?;
            cg_iterations = sol.iterations;
            // stationarity-protected value: error is quadratic in the CG residual
            magnetostatic = self.demag.energy_from_rhs(&sol.v, &rhs);
            let vt = self.element_flux_sums(&src, &sol.v);
            for elem in 0..self.grid.elements.len() {
                let e = &self.grid.elements[elem];
                let em = element_magnetization(state, &self.grid, elem);
                let det = dets[elem];
                let dpsi = |k: usize| {
                    if em.degenerate {
                        0.0
                    } else {
                        dot(em.unit, em.vertex[k]) / (3.0 * em.average_len)
                    }
                };
                let de_dpsi = dot(vt[elem], perp(em.unit)) / det;
                let de_ddet = -dot(vt[elem], em.unit) / (det * det);
                let cof = fs[elem].cof();
                for k in 0..3 {
                    grad[self.dofs.phi_dof(e.v[k])] += de_dpsi * dpsi(k);
                    for i in 0..2 {
                        if let Some(dof) = self.dofs.u_dof(e.v[k], i) {
                            grad[dof] += de_ddet * eps * dot([cof.m[i][0], cof.m[i][1]], e.grads[k]);
                        }
                    }
                }
            }
            cache.demag_warm = Some(sol.v);
        }

        let (elastic, exchange) = (elastic.total(), exchange.total());
        let (load_work, zeeman) = (load_work.total(), zeeman.total());
        let total = elastic + exchange + magnetostatic - load_work - zeeman;
        Ok(EnergyReport {
            elastic,
            exchange,
            magnetostatic,
            load_work,
            zeeman,
            total,
            cg_iterations,
            gradient: grad,
        })
    }

    /// The small-strain loaded functional (quadratic in u for frozen
    /// magnetization) with its gradient.
    pub fn linearized_energy(
        &self,
        state: &StateFields,
        cache: &mut EvalCache,
    ) -> Result<EnergyReport, EvalError> {
        let area = self.grid.area;
        let moduli = self.model.moduli();
        let mut grad = vec![0.0; self.dofs.n_dofs()];
        let mut elastic = CompensatedSum::new();
        let mut exchange = CompensatedSum::new();
        let mut load_work = CompensatedSum::new();
        let mut zeeman = CompensatedSum::new();

        for elem in 0..self.grid.elements.len() {
            let e = &self.grid.elements[elem];
            let em = element_magnetization(state, &self.grid, elem);
            let (c2, s2) = (
                em.unit[0] * em.unit[0] - em.unit[1] * em.unit[1],
                2.0 * em.unit[0] * em.unit[1],
            );
            let dpsi = |k: usize| {
                if em.degenerate {
                    0.0
                } else {
                    dot(em.unit, em.vertex[k]) / (3.0 * em.average_len)
                }
            };

            // elastic quadratic form in sym(grad u) + E(m)
            let gu = self.grid.element_jacobian(&state.u, elem);
            let espont = Mat2::new(-0.5 * c2, -0.5 * s2, -0.5 * s2, 0.5 * c2);
            let s = gu.sym() + espont;
            elastic.add(0.5 * area * moduli.quadratic(&s));
            let cs = moduli.apply(&s);
            for k in 0..3 {
                for i in 0..2 {
                    if let Some(dof) = self.dofs.u_dof(e.v[k], i) {
                        grad[dof] += area * dot([cs.m[i][0], cs.m[i][1]], e.grads[k]);
                    }
                }
            }
            let dedpsi = Mat2::new(s2, -c2, -c2, -s2);
            let delastic_dpsi = area * cs.ddot(&dedpsi);
            for k in 0..3 {
                grad[self.dofs.phi_dof(e.v[k])] += delastic_dpsi * dpsi(k);
            }

            // exchange in the reference domain
            let mut x = Mat2::zero();
            for k in 0..3 {
                for r in 0..2 {
                    for c in 0..2 {
                        x.m[r][c] += em.vertex[k][r] * e.grads[k][c];
                    }
                }
            }
            exchange.add(0.5 * area * x.norm_sq());
            for k in 0..3 {
                let mperp = perp(em.vertex[k]);
                grad[self.dofs.phi_dof(e.v[k])] += area * dot(mperp, x.apply(e.grads[k]));
            }

            // loads at eps = 0: h is evaluated on the reference placement
            let xc = self.grid.centroid(elem);
            let ubar = [
                (state.u[e.v[0]][0] + state.u[e.v[1]][0] + state.u[e.v[2]][0]) / 3.0,
                (state.u[e.v[0]][1] + state.u[e.v[1]][1] + state.u[e.v[2]][1]) / 3.0,
            ];
            let fval = self.loads.f.value(xc);
            load_work.add(area * dot(fval, ubar));
            let hval = self.loads.h.value(xc);
            zeeman.add(area * dot(hval, em.average));
            for k in 0..3 {
                let mperp = perp(em.vertex[k]);
                grad[self.dofs.phi_dof(e.v[k])] -= area / 3.0 * dot(hval, mperp);
                for i in 0..2 {
                    if let Some(dof) = self.dofs.u_dof(e.v[k], i) {
                        grad[dof] -= area * fval[i] / 3.0;
                    }
                }
            }
        }

        let mut magnetostatic = 0.0;
        let mut cg_iterations = 0;
        if self.has_demag() {
            let src = rasterize_pushforward(state, &self.grid, 0.0, &self.demag.box_grid)
                .expect("identity placement cannot degenerate");
            let rhs = self.demag.assemble_rhs(&src.field);
            let sol = self
                .demag
                .solve_potential_rhs(&rhs, cache.demag_warm.as_deref())?;
            cg_iterations = sol.iterations;
            magnetostatic = self.demag.energy_from_rhs(&sol.v, &rhs);
            let vt = self.element_flux_sums(&src, &sol.v);
            for elem in 0..self.grid.elements.len() {
                let e = &self.grid.elements[elem];
                let em = element_magnetization(state, &self.grid, elem);
                let dpsi = |k: usize| {
                    if em.degenerate {
                        0.0
                    } else {
                        dot(em.unit, em.vertex[k]) / (3.0 * em.average_len)
                    }
                };
                let de_dpsi = dot(vt[elem], perp(em.unit));
                for k in 0..3 {
                    grad[self.dofs.phi_dof(e.v[k])] += de_dpsi * dpsi(k);
                }
            }
            cache.demag_warm = Some(sol.v);
        }

        let (elastic, exchange) = (elastic.total(), exchange.total());
        let (load_work, zeeman) = (load_work.total(), zeeman.total());
        let total = elastic + exchange + magnetostatic - load_work - zeeman;
        Ok(EnergyReport {
            elastic,
            exchange,
            magnetostatic,
            load_work,
            zeeman,
            total,
            cg_iterations,
            gradient: grad,
        })
    }

    /// Per-element sums of the potential-gradient integrals over the cells
    /// each element owns: the adjoint sensitivity of the magnetostatic
    /// energy to that element's source value.
    fn element_flux_sums(&self, src: &RasterizedSource, v: &[f64]) -> Vec<Vec2> {
        let integrals = self.demag.cell_gradient_integrals(v);
        let mut vt = vec![[0.0, 0.0]; self.grid.elements.len()];
        for (cell, owner) in src.owner.iter().enumerate() {
            if let Some(elem) = owner {
                vt[*elem as usize][0] += integrals[cell][0];
                vt[*elem as usize][1] += integrals[cell][1];
            }
        }
        vt
    }

    /// Load work and field work with their DOF gradients (values, not the
    /// subtracted contributions).
    pub fn loads_eval(&self, state: &StateFields, eps: f64) -> LoadsReport {
        let area = self.grid.area;
        let mut work = 0.0;
        let mut zee = 0.0;
        let mut grad_work = vec![0.0; self.dofs.n_dofs()];
        let mut grad_zeeman = vec![0.0; self.dofs.n_dofs()];
        for elem in 0..self.grid.elements.len() {
            let e = &self.grid.elements[elem];
            let em = element_magnetization(state, &self.grid, elem);
            let xc = self.grid.centroid(elem);
            let ubar = [
                (state.u[e.v[0]][0] + state.u[e.v[1]][0] + state.u[e.v[2]][0]) / 3.0,
                (state.u[e.v[0]][1] + state.u[e.v[1]][1] + state.u[e.v[2]][1]) / 3.0,
            ];
            let fval = self.loads.f.value(xc);
            work += area * dot(fval, ubar);
            let yc = [xc[0] + eps * ubar[0], xc[1] + eps * ubar[1]];
            let hval = self.loads.h.value(yc);
            zee += area * dot(hval, em.average);
            let jh = self.loads.h.jacobian(yc);
            let jht_a = jh.apply_transposed(em.average);
            for k in 0..3 {
                let mperp = perp(em.vertex[k]);
                grad_zeeman[self.dofs.phi_dof(e.v[k])] += area / 3.0 * dot(hval, mperp);
                for i in 0..2 {
                    if let Some(dof) = self.dofs.u_dof(e.v[k], i) {
                        grad_work[dof] += area * fval[i] / 3.0;
                        grad_zeeman[dof] += area * eps * jht_a[i] / 3.0;
                    }
                }
            }
        }
        LoadsReport {
            work,
            zeeman: zee,
            grad_work,
            grad_zeeman,
        }
    }

    /// Orientation and injectivity diagnostics; `ciarlet_c` is the global
    /// hint threshold (1 recovers the pointwise criterion).
    pub fn admissibility(&self, state: &StateFields, eps: f64, ciarlet_c: f64) -> AdmissibilityReport {
        let mut min_det = f64::INFINITY;
        let mut max_op: f64 = 0.0;
        let mut violations = 0;
        for elem in 0..self.grid.elements.len() {
            let gu = self.grid.element_jacobian(&state.u, elem);
            let f = Mat2::identity() + gu * eps;
            let det = f.det();
            let op = eps * gu.operator_norm();
            if op < 1.0 && det <= 0.0 {
                violations += 1;
            }
            min_det = min_det.min(det);
            max_op = max_op.max(op);
        }
        AdmissibilityReport {
            min_det,
            max_opnorm_eps_grad_u: max_op,
            all_positive: min_det > 0.0,
            ciarlet_pointwise: max_op < 1.0,
            ciarlet_global_hint: max_op < ciarlet_c,
            implication_violations: violations,
        }
    }
}
