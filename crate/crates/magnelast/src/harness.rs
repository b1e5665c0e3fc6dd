//! Experiment drivers: the loading-scale sweep against the small-strain
//! limit, recovery-sequence diagnostics, the geometric rigidity probe, and
//! the model hypothesis checks.

use crate::config::{Config, ConfigError};
use crate::demag::{field_l2_distance, rasterize_pushforward, DemagError};
use crate::energy::StoredEnergyModel;
use crate::fields::{GammaSelector, GridError, GridSpec, StateFields};
use crate::functional::{EnergyReport, EnergySystem, EvalCache, EvalError};
use crate::solver::{minimize, Objective, SolverError, SolverOptions, SolverStats};
use crate::tensor::Mat2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("starting state is inadmissible at eps = {eps}")]
    InadmissibleStart { eps: f64 },
    #[error(transparent)]
    Demag(#[from] DemagError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Scale factor of the coercivity diagnostic: a desk-scale stand-in for the
/// constant tying the load functionals to the internal energy through
/// Poincare and rigidity inequalities. The field work is bounded by
/// `sup |h|` outright (unit magnetization on a unit-area domain), the load
/// work by `||f||_L2` times a trace-controlled displacement norm.
const COERCIVITY_SCALE: f64 = 20.0;

/// How far a finite-scale minimum may legitimately undershoot the limit
/// minimum on the shipped grids before the sweep flags it. Both minima share
/// grid and quadrature, but the finite-strain energy is genuinely softer at
/// the top of the ladder; calibrated on the default setup (n = 17, scale
/// 0.4), where the deepest measured undershoot is 3.8e-2.
pub const TOL_MODEL: f64 = 0.05;

/// Objective adapter: packs the energy system behind the solver interface
/// and tracks the worst coercivity margin seen along the trace.
pub struct SweepObjective<'a> {
    sys: &'a EnergySystem,
    eps: Option<f64>,
    state: StateFields,
    cache: EvalCache,
    coercivity_c: f64,
    pub min_coercivity_margin: f64,
}

impl<'a> SweepObjective<'a> {
    pub fn new(sys: &'a EnergySystem, eps: Option<f64>) -> SweepObjective<'a> {
        SweepObjective {
            sys,
            eps,
            state: StateFields::zero(&sys.grid),
            cache: EvalCache::default(),
            coercivity_c: COERCIVITY_SCALE * (sys.f_l2 + sys.h_inf),
            min_coercivity_margin: f64::INFINITY,
        }
    }
}

impl Objective for SweepObjective<'_> {
    type Error = EvalError;

    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64, EvalError> {
        self.sys.dofs.unpack(x, &mut self.state);
        let rep = match self.eps {
            Some(e) => match self.sys.finite_energy(&self.state, e, &mut self.cache) {
                // orientation loss is a barrier for the line search, not an error
                Err(EvalError::Inadmissible { .. }) => return Ok(f64::INFINITY),
                other => other?,
            },
            None => self.sys.linearized_energy(&self.state, &mut self.cache)?,
        };
        grad.copy_from_slice(&rep.gradient);
        // internal energy must stay controlled by the loaded functional:
        // G <= F + C (1 + sqrt(G)) along every trace the optimizer visits
        let g = rep.internal();
        let margin = rep.total + self.coercivity_c * (1.0 + g.max(0.0).sqrt()) - g;
        self.min_coercivity_margin = self.min_coercivity_margin.min(margin);
        Ok(rep.total)
    }
}

#[derive(Debug)]
pub struct MinimizeOutcome {
    pub state: StateFields,
    pub report: EnergyReport,
    pub stats: SolverStats,
    pub min_coercivity_margin: f64,
}

/// Minimize the loaded functional at scale `eps` (finite) or its limit
/// (`None`) starting from `init`.
pub fn minimize_at(
    sys: &EnergySystem,
    eps: Option<f64>,
    init: &StateFields,
    opts: &SolverOptions,
) -> Result<MinimizeOutcome, HarnessError> {
    let x0 = sys.dofs.pack(init);
    let mut obj = SweepObjective::new(sys, eps);
    let (x, stats) = minimize(&mut obj, &x0, opts).map_err(|e| match e {
        SolverError::InadmissibleStart => HarnessError::InadmissibleStart {
            eps: eps.unwrap_or(0.0),
        },
        SolverError::Objective(EvalError::Demag(d)) => HarnessError::Demag(d),
        SolverError::Objective(EvalError::Inadmissible { .. }) => HarnessError::InadmissibleStart {
            eps: eps.unwrap_or(0.0),
        },
    })?;
    let mut state = StateFields::zero(&sys.grid);
    sys.dofs.unpack(&x, &mut state);
    let mut cache = obj.cache;
    let report = match eps {
        Some(e) => sys.finite_energy(&state, e, &mut cache),
        None => sys.linearized_energy(&state, &mut cache),
    }
    .map_err(|e| match e {
        EvalError::Demag(d) => HarnessError::Demag(d),
        EvalError::Inadmissible { .. } => HarnessError::InadmissibleStart {
            eps: eps.unwrap_or(0.0),
        },
    })?;
    Ok(MinimizeOutcome {
        state,
        report,
        stats,
        min_coercivity_margin: obj.min_coercivity_margin,
    })
}

/// Reuse a minimizer as the starting guess at loading scale `eps`: the nodal
/// fields carry over unchanged, provided they remain orientation-preserving
/// at the new scale.
pub fn recovery_initializer(
    state: &StateFields,
    grid: &GridSpec,
    eps: f64,
) -> Result<StateFields, EvalError> {
    let mut bad = Vec::new();
    for elem in 0..grid.elements.len() {
        let f = crate::fields::deformation_gradient(state, grid, eps, elem);
        if f.det() <= 0.0 {
            bad.push(elem);
        }
    }
    if bad.is_empty() {
        Ok(state.clone())
    } else {
        Err(EvalError::Inadmissible { elements: bad })
    }
}

/// Internal energies of the same nodal state under the finite-strain
/// functional at `eps` and under its limit, and their absolute gap.
pub fn recovery_gap(
    sys: &EnergySystem,
    state: &StateFields,
    eps: f64,
) -> Result<(f64, f64, f64), EvalError> {
    let mut cache = EvalCache::default();
    let fin = sys.finite_energy(state, eps, &mut cache)?.internal();
    let mut cache0 = EvalCache::default();
    let lin = sys.linearized_energy(state, &mut cache0)?.internal();
    Ok((fin, lin, (fin - lin).abs()))
}

/// Discrete H1 distance between displacement fields: element-areas weighting
/// centroid differences plus gradient differences.
pub fn displacement_h1_distance(grid: &GridSpec, a: &StateFields, b: &StateFields) -> f64 {
    let mut acc = 0.0;
    for elem in 0..grid.elements.len() {
        let e = &grid.elements[elem];
        let mut dc = [0.0, 0.0];
        for k in 0..3 {
            dc[0] += (a.u[e.v[k]][0] - b.u[e.v[k]][0]) / 3.0;
            dc[1] += (a.u[e.v[k]][1] - b.u[e.v[k]][1]) / 3.0;
        }
        let ga = grid.element_jacobian(&a.u, elem);
        let gb = grid.element_jacobian(&b.u, elem);
        let dg = ga - gb;
        acc += grid.area * (dc[0] * dc[0] + dc[1] * dc[1] + dg.norm_sq());
    }
    acc.sqrt()
}

/// One row of the sweep: the minimum at scale `eps` against the limit
/// minimum, with the energy split and distances between minimizers.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub s_eps: f64,
    pub s0: f64,
    pub gap: f64,
    pub elastic: f64,
    pub exchange: f64,
    pub magnetostatic: f64,
    pub load_work: f64,
    pub zeeman: f64,
    pub u_h1_dist: f64,
    pub m_l2_dist: f64,
    pub min_det: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub s0: f64,
    pub zero_state: StateFields,
    pub zero_report: EnergyReport,
    pub records: Vec<SweepRecord>,
    pub states: Vec<StateFields>,
    pub min_coercivity_margin: f64,
    pub max_overlap_cells: usize,
}

/// Exact column set of the sweep CSV, one row per loading scale, floats in
/// shortest round-trip form.
pub fn render_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(
        "eps,s_eps,s0,gap,elastic,exchange,magnetostatic,load_work,zeeman,u_h1_dist,m_l2_dist,min_det,iterations,converged\n",
    );
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.eps,
            r.s_eps,
            r.s0,
            r.gap,
            r.elastic,
            r.exchange,
            r.magnetostatic,
            r.load_work,
            r.zeeman,
            r.u_h1_dist,
            r.m_l2_dist,
            r.min_det,
            r.iterations,
            r.converged
        )
        .expect("string write cannot fail");
    }
    out
}

/// Minimize the limit functional once, then walk the loading-scale ladder
/// downward, warm-starting each scale from the previous minimizer when
/// enabled. `parallel` trades the warm-start chain for concurrent
/// cold-started scales.
pub fn run_sweep(cfg: &Config, quiet: bool, parallel: bool) -> Result<SweepOutcome, HarnessError> {
    let sys = cfg.build_system()?;
    let opts = cfg.solver_options();
    let init = sys.initial_state();
    let zero = minimize_at(&sys, None, &init, &opts)?;
    let s0 = zero.report.total;
    if !quiet {
        eprintln!(
            "limit: s0 = {s0:.9} after {} iterations (converged: {})",
            zero.stats.iterations, zero.stats.converged
        );
    }
    let f0 = rasterize_pushforward(&zero.state, &sys.grid, 0.0, &sys.demag.box_grid)?;
    let ladder = cfg.eps_ladder();
    let mut min_margin = zero.min_coercivity_margin;
    let mut max_overlap = 0;

    let point = |eps: f64, start: &StateFields| -> Result<(SweepRecord, StateFields, f64), HarnessError> {
        let init_eps = match recovery_initializer(start, &sys.grid, eps) {
            Ok(s) => s,
            // fall back to the cold start if the carried state folds at eps
            Err(_) => sys.initial_state(),
        };
        let out = minimize_at(&sys, Some(eps), &init_eps, &opts)?;
        let adm = sys.admissibility(&out.state, eps, 1.0);
        let src = rasterize_pushforward(&out.state, &sys.grid, eps, &sys.demag.box_grid)?;
        let m_l2 = field_l2_distance(&src.field, &f0.field, &sys.demag.box_grid);
        let u_h1 = displacement_h1_distance(&sys.grid, &out.state, &zero.state);
        let rec = SweepRecord {
            eps,
            s_eps: out.report.total,
            s0,
            gap: out.report.total - s0,
            elastic: out.report.elastic,
            exchange: out.report.exchange,
            magnetostatic: out.report.magnetostatic,
            load_work: out.report.load_work,
            zeeman: out.report.zeeman,
            u_h1_dist: u_h1,
            m_l2_dist: m_l2,
            min_det: adm.min_det,
            iterations: out.stats.iterations,
            converged: out.stats.converged,
        };
        if !quiet {
            eprintln!(
                "eps = {eps}: s_eps = {:.9}, gap = {:.3e}, iterations = {}, converged = {}, overlap cells = {}",
                rec.s_eps, rec.gap, rec.iterations, rec.converged, src.overlap_cells
            );
        }
        Ok((rec, out.state, out.min_coercivity_margin))
    };

    let mut records = Vec::with_capacity(ladder.len());
    let mut states = Vec::with_capacity(ladder.len());
    if parallel && ladder.len() > 1 {
        let results: Vec<Result<(SweepRecord, StateFields, f64), HarnessError>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = ladder
                    .iter()
                    .map(|&eps| {
                        let point = &point;
                        let sys = &sys;
                        // same cold start as the sequential warm_start=false
                        // path, so the two modes agree bitwise
                        scope.spawn(move || point(eps, &sys.initial_state()))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
        for res in results {
            let (rec, state, margin) = res?;
            min_margin = min_margin.min(margin);
            records.push(rec);
            states.push(state);
        }
    } else {
        let mut carry = zero.state.clone();
        for &eps in &ladder {
            let start = if cfg.sweep.warm_start {
                carry.clone()
            } else {
                sys.initial_state()
            };
            let (rec, state, margin) = point(eps, &start)?;
            min_margin = min_margin.min(margin);
            carry = state.clone();
            records.push(rec);
            states.push(state);
        }
    }
    for (rec, state) in records.iter().zip(&states) {
        let src = rasterize_pushforward(state, &sys.grid, rec.eps, &sys.demag.box_grid)?;
        max_overlap = max_overlap.max(src.overlap_cells);
    }
    if !quiet {
        for rec in &records {
            if rec.s_eps < rec.s0 - TOL_MODEL {
                eprintln!(
                    "warning: s_eps at eps = {} undershoots s0 by {:.3e}, beyond the calibrated tolerance {TOL_MODEL}",
                    rec.eps,
                    rec.s0 - rec.s_eps
                );
            }
        }
    }
    Ok(SweepOutcome {
        s0,
        zero_state: zero.state,
        zero_report: zero.report,
        records,
        states,
        min_coercivity_margin: min_margin,
        max_overlap_cells: max_overlap,
    })
}

/// Serializable nodal state, row-major over the grid lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDump {
    pub n: usize,
    pub gamma: GammaSelector,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub u: Vec<[f64; 2]>,
    pub phi: Vec<f64>,
}

impl StateDump {
    pub fn new(grid: &GridSpec, state: &StateFields, eps: Option<f64>) -> StateDump {
        StateDump {
            n: grid.n,
            gamma: grid.gamma,
            eps,
            u: state.u.clone(),
            phi: state.phi.clone(),
        }
    }
}

/// Perturbation amplitude used by the rigidity probe's trial fields.
pub const DEFAULT_PROBE_AMPLITUDE: f64 = 0.08;

#[derive(Debug, Clone, Serialize)]
pub struct RigiditySample {
    pub ratio: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Frobenius defect of the projected mean rotation, `|R^T R - I|`.
    pub projection_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityOutcome {
    pub samples: Vec<RigiditySample>,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub skipped: usize,
}

/// Empirical support for the nonlinear rigidity inequality: for trial
/// deformations near rotations, the p-distance of the gradient to the best
/// single rotation is controlled by the integrated penalty of the pointwise
/// distance to the rotation group. Reports the ratio distribution; ratios
/// are diagnostics, not proofs.
pub fn rigidity_probe(
    n: usize,
    p: f64,
    num_samples: usize,
    seed: u64,
    amplitude: f64,
) -> RigidityOutcome {
    let grid = GridSpec::build(n, GammaSelector::LeftEdge).expect("probe grid");
    let model = StoredEnergyModel::new(p, 2.0).expect("probe model");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(num_samples);
    let mut skipped = 0;
    let mut max_ratio: f64 = 0.0;
    let mut sum_ratio = 0.0;

    for _ in 0..num_samples {
        let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let rot = crate::tensor::Rotation2::from_angle(theta);
        // two low-frequency trigonometric modes per component
        let mut modes = [[(0.0, 0.0, 0.0, 0.0); 2]; 2];
        for comp in &mut modes {
            for m in comp.iter_mut() {
                let (k1, k2) = loop {
                    let k1 = rng.gen_range(0..3) as f64;
                    let k2 = rng.gen_range(0..3) as f64;
                    if k1 != 0.0 || k2 != 0.0 {
                        break (k1, k2);
                    }
                };
                *m = (
                    rng.gen_range(-amplitude..amplitude),
                    k1,
                    k2,
                    rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                );
            }
        }
        let mut v = vec![[0.0, 0.0]; grid.num_nodes()];
        for (node, val) in v.iter_mut().enumerate() {
            let x = grid.node_coord(node);
            let base = rot.apply(x);
            let mut y = [base[0], base[1]];
            for c in 0..2 {
                for (amp, k1, k2, phase) in modes[c] {
                    y[c] += amp * (std::f64::consts::PI * (k1 * x[0] + k2 * x[1]) + phase).sin();
                }
            }
            *val = y;
        }
        let mut mean = Mat2::zero();
        let mut grads = Vec::with_capacity(grid.elements.len());
        for elem in 0..grid.elements.len() {
            let g = grid.element_jacobian(&v, elem);
            mean = mean + g * grid.area;
            grads.push(g);
        }
        let rbar = match mean.project_so() {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let rmat = rbar.mat();
        let defect = (rmat.transpose() * rmat - Mat2::identity()).frob();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for g in &grads {
            let dev = *g - rmat;
            lhs += grid.area * dev.frob().powf(p);
            rhs += grid.area * model.stretch_penalty(g.dist_so());
        }
        if rhs < 1e-14 {
            skipped += 1;
            continue;
        }
        let ratio = lhs / rhs;
        max_ratio = max_ratio.max(ratio);
        sum_ratio += ratio;
        samples.push(RigiditySample {
            ratio,
            lhs,
            rhs,
            projection_defect: defect,
        });
    }
    let mean_ratio = if samples.is_empty() {
        0.0
    } else {
        sum_ratio / samples.len() as f64
    };
    RigidityOutcome {
        samples,
        max_ratio,
        mean_ratio,
        skipped,
    }
}

/// The rigidity ratio of the pure dilation `(1 + delta) x`, which has the
/// closed form `2 (sqrt(2) delta)^(p-2)` for `delta` in the quadratic branch.
pub fn dilation_ratio(n: usize, p: f64, delta: f64) -> f64 {
    let grid = GridSpec::build(n, GammaSelector::LeftEdge).expect("probe grid");
    let model = StoredEnergyModel::new(p, 2.0).expect("probe model");
    let mut v = vec![[0.0, 0.0]; grid.num_nodes()];
    for (node, val) in v.iter_mut().enumerate() {
        let x = grid.node_coord(node);
        *val = [(1.0 + delta) * x[0], (1.0 + delta) * x[1]];
    }
    let mut mean = Mat2::zero();
    for elem in 0..grid.elements.len() {
        mean = mean + grid.element_jacobian(&v, elem) * grid.area;
    }
    let rmat = mean.project_so().expect("dilation mean").mat();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for elem in 0..grid.elements.len() {
        let g = grid.element_jacobian(&v, elem);
        lhs += grid.area * (g - rmat).frob().powf(p);
        rhs += grid.area * model.stretch_penalty(g.dist_so());
    }
    lhs / rhs
}

pub fn render_rigidity_csv(out: &RigidityOutcome) -> String {
    let mut s = String::from("sample,ratio,lhs,rhs,projection_defect\n");
    for (k, r) in out.samples.iter().enumerate() {
        writeln!(s, "{},{},{},{},{}", k, r.ratio, r.lhs, r.rhs, r.projection_defect)
            .expect("string write cannot fail");
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The stated property is violated by the model as defined; recorded
    /// with counterexamples instead of being patched over.
    KnownDiscrepancy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
    pub counterexamples: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
    pub passed: usize,
    pub failed: usize,
    pub known_discrepancies: usize,
}

impl CheckReport {
    pub fn has_failures(&self) -> bool {
        self.failed > 0
    }
}

fn logspace(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (count - 1) as f64))
        .collect()
}

fn random_rotation(rng: &mut impl Rng) -> Mat2 {
    crate::tensor::Rotation2::from_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .mat()
}

fn random_orientation_preserving(rng: &mut impl Rng) -> Mat2 {
    loop {
        let f = Mat2::new(
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
        );
        if f.det() > 0.05 {
            return f;
        }
    }
}

fn random_unit(rng: &mut impl Rng) -> [f64; 2] {
    let t = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    [t.cos(), t.sin()]
}

/// Numerical audit of the structural properties the stored energy and its
/// ingredients are supposed to satisfy. Failures are data: each entry
/// records its verdict and counterexamples, and the report never panics.
pub fn hypothesis_check(model: &StoredEnergyModel, samples: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let default_model = model.p() == 4.0 && model.a() == 2.0;
    let p = model.p();

    // convexity of the stretch penalty
    {
        let mut bad = Vec::new();
        for _ in 0..samples {
            let t1 = rng.gen_range(0.0..8.0);
            let t2 = rng.gen_range(0.0..8.0);
            let lam = rng.gen_range(0.0..1.0);
            let mid = lam * t1 + (1.0 - lam) * t2;
            let lhs = model.stretch_penalty(mid);
            let rhs = lam * model.stretch_penalty(t1) + (1.0 - lam) * model.stretch_penalty(t2);
            if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
                bad.push(format!("t1 = {t1}, t2 = {t2}, lambda = {lam}: {lhs} > {rhs}"));
            }
        }
        entries.push(entry("gp-convexity", bad, format!("{samples} random chords")));
    }

    // two-sided power-sum envelope
    {
        let mut bad = Vec::new();
        for &t in &logspace(-6.0, 3.0, 400) {
            let g = model.stretch_penalty(t);
            let pair = t.powf(p) + t * t;
            if g < pair / (2.0 * p) - 1e-12 * pair || g > 0.5 * pair + 1e-12 * pair {
                bad.push(format!("t = {t}: g = {g}, envelope = [{}, {}]", pair / (2.0 * p), 0.5 * pair));
            }
        }
        entries.push(entry(
            "gp-sandwich",
            bad,
            "log grid in [1e-6, 1e3], envelope (t^p + t^2) scaled by 1/(2p) and 1/2".into(),
        ));
    }

    // subadditive-type growth: g(s + t) <= C (g(s) + t^2)
    {
        let mut measured: f64 = 0.0;
        let mut arg = (0.0, 0.0);
        let mut s_grid = vec![0.0];
        s_grid.extend(logspace(-6.0, 1.0, 400));
        for &s in &s_grid {
            for &t in &logspace(-6.0, 1.0, 400) {
                let c = model.stretch_penalty(s + t) / (model.stretch_penalty(s) + t * t);
                if c > measured {
                    measured = c;
                    arg = (s, t);
                }
            }
        }
        let frozen = 61.0;
        let ok = !default_model || measured <= frozen;
        entries.push(CheckEntry {
            name: "gp-subadditive".into(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: format!(
                "measured C = {measured} at (s, t) = {arg:?}{}",
                if default_model {
                    format!(", frozen bound {frozen}")
                } else {
                    String::new()
                }
            ),
            counterexamples: Vec::new(),
        });
    }

    // multiplicative scaling: g(c t) <= C2(c) g(t)
    {
        let frozen = [(0.5, 0.26), (2.0, 16.0), (10.0, 10000.0)];
        let mut details = Vec::new();
        let mut ok = true;
        for (c1, cap) in frozen {
            let mut measured: f64 = 0.0;
            for &t in &logspace(-6.0, 1.0, 400) {
                measured = measured.max(model.stretch_penalty(c1 * t) / model.stretch_penalty(t));
            }
            if default_model && measured > cap {
                ok = false;
            }
            details.push(format!("C1 = {c1}: measured C2 = {measured}"));
        }
        entries.push(CheckEntry {
            name: "gp-scaling".into(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: details.join("; "),
            counterexamples: Vec::new(),
        });
    }

    // the min-form lower constant 1/p does not hold near t = 1; the
    // two-sided envelope above is the corrected statement
    {
        let mut bad = Vec::new();
        for &t in &logspace(-3.0, 1.0, 200) {
            let g = model.stretch_penalty(t);
            let claim = (t * t).min(t.powf(p)) / p;
            if g > claim + 1e-12 {
                bad.push(format!("t = {t}: g = {g} > {claim}"));
            }
        }
        let status = if bad.is_empty() {
            CheckStatus::Pass
        } else {
            CheckStatus::KnownDiscrepancy
        };
        entries.push(CheckEntry {
            name: "gp-min-form".into(),
            status,
            detail: format!(
                "claimed g <= min(t^2, t^p)/p fails on {} of 200 grid points (g(1) = {} > {}); superseded by gp-sandwich",
                bad.len(),
                model.stretch_penalty(1.0),
                1.0 / p
            ),
            counterexamples: bad.into_iter().take(5).collect(),
        });
    }

    // frame indifference of the stored energy
    {
        let mut bad = Vec::new();
        for _ in 0..samples {
            let f = random_orientation_preserving(&mut rng);
            let r = random_rotation(&mut rng);
            let a = model.stored_energy(&f);
            let b = model.stored_energy(&(r * f));
            if (a - b).abs() > 1e-11 * a.abs().max(1.0) {
                bad.push(format!("|phi(RF) - phi(F)| = {} at phi = {a}", (a - b).abs()));
            }
        }
        entries.push(entry(
            "frame-indifference",
            bad,
            format!("{samples} random rotations of orientation-preserving F"),
        ));
    }

    // frame indifference of the coupled energy
    {
        let mut bad = Vec::new();
        for _ in 0..samples {
            let f = random_orientation_preserving(&mut rng);
            let m = random_unit(&mut rng);
            let det = f.det();
            let me = [m[0] / det, m[1] / det];
            let r = random_rotation(&mut rng);
            let rme = r.apply(me);
            let a = model.coupled_energy(&f, me);
            let b = model.coupled_energy(&(r * f), rme);
            if (a - b).abs() > 1e-10 * a.abs().max(1.0) {
                bad.push(format!("|W(RF, Rm) - W(F, m)| = {}", (a - b).abs()));
            }
        }
        entries.push(entry("w-frame-indifference", bad, format!("{samples} random frames")));
    }

    // evenness in the magnetization
    {
        let mut bad = Vec::new();
        for _ in 0..samples {
            let f = random_orientation_preserving(&mut rng);
            let det = f.det();
            let m = random_unit(&mut rng);
            let me = [m[0] / det, m[1] / det];
            let a = model.coupled_energy(&f, me);
            let b = model.coupled_energy(&f, [-me[0], -me[1]]);
            if (a - b) != 0.0 {
                bad.push(format!("W(F, m) - W(F, -m) = {}", a - b));
            }
        }
        entries.push(entry(
            "w-evenness",
            bad,
            "exact: the magnetization enters through its outer square".into(),
        ));
    }

    // rotations cost nothing
    {
        let mut bad = Vec::new();
        for _ in 0..samples {
            let r = random_rotation(&mut rng);
            let v = model.stored_energy(&r);
            if v.abs() > 1e-15 {
                bad.push(format!("phi(R) = {v}"));
            }
        }
        entries.push(entry("phi-zero-on-rotations", bad, format!("{samples} rotations")));
    }

    // the stored energy dominates the stretch penalty of the distance
    {
        let mut bad = Vec::new();
        for _ in 0..samples {
            let f = random_orientation_preserving(&mut rng);
            let phi = model.stored_energy(&f);
            let floor = model.stretch_penalty(f.dist_so());
            if phi < floor - 1e-12 * floor.max(1.0) {
                bad.push(format!("phi = {phi} < g(dist) = {floor}"));
            }
        }
        entries.push(entry(
            "phi-ge-gp-dist",
            bad,
            "volumetric penalty is nonnegative, so the bound is structural".into(),
        ));
    }

    // claimed volumetric blow-up floor: phi >= (det^-a - 1)/2. The barrier
    // term alone satisfies it only away from det = 1; compressed
    // near-rotations violate the claim, so it is recorded as failing.
    {
        let mut bad = Vec::new();
        let mut tested = 0;
        while tested < samples {
            let f = Mat2::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let det = f.det();
            if det <= 1e-3 || det >= 10.0 {
                continue;
            }
            tested += 1;
            let phi = model.stored_energy(&f);
            let floor = 0.5 * (det.powf(-model.a()) - 1.0);
            if phi < floor - 1e-12 {
                bad.push(format!(
                    "F = [[{}, {}], [{}, {}]]: det = {det}, phi = {phi} < floor = {floor}",
                    f.m[0][0], f.m[0][1], f.m[1][0], f.m[1][1]
                ));
            }
        }
        // deterministic witness: a slightly compressed rotation
        let witness = Mat2::identity() * 0.95;
        let phi = model.stored_energy(&witness);
        let floor = 0.5 * (witness.det().powf(-model.a()) - 1.0);
        if phi < floor {
            bad.push(format!(
                "F = 0.95 I: det = {}, phi = {phi} < floor = {floor}",
                witness.det()
            ));
        }
        let status = if bad.is_empty() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        entries.push(CheckEntry {
            name: "det-blowup-bound".into(),
            status,
            detail: format!(
                "{} violations out of {tested} samples with det in (1e-3, 10); the claim fails on a positive-measure set of compressed near-rotations where the stretch and volumetric penalties are both quadratically small but the floor is order one",
                bad.len()
            ),
            counterexamples: bad.into_iter().take(5).collect(),
        });
    }

    // positivity of the elasticity form on nonzero symmetric strains
    {
        let mut bad = Vec::new();
        let moduli = model.moduli();
        for _ in 0..samples {
            let h = Mat2::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let s = h.sym();
            if s.frob() < 1e-6 {
                continue;
            }
            let q = moduli.quadratic(&s);
            if q < s.norm_sq() {
                bad.push(format!("C S : S = {q} < |S|^2 = {}", s.norm_sq()));
            }
        }
        entries.push(entry(
            "elasticity-positive",
            bad,
            "quadratic form dominates the squared symmetric strain".into(),
        ));
    }

    // antisymmetric strains carry no elastic energy
    {
        let mut bad = Vec::new();
        let moduli = model.moduli();
        for _ in 0..samples {
            let w = rng.gen_range(-2.0..2.0);
            let h = Mat2::new(0.0, w, -w, 0.0);
            let q = moduli.quadratic(&h);
            if q != 0.0 {
                bad.push(format!("C W : W = {q} for spin {w}"));
            }
        }
        entries.push(entry("elasticity-antisym-null", bad, "exact".into()));
    }

    // the closed-form moduli agree with second differences of the stored energy
    {
        let fd = model.moduli_fd_oracle();
        let moduli = model.moduli();
        let mut worst: f64 = 0.0;
        let mut bad = Vec::new();
        for _ in 0..samples.min(500) {
            let h = Mat2::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let exact = moduli.quadratic(&h);
            let approx = fd.quadratic(&h);
            let err = (exact - approx).abs() / exact.abs().max(1.0);
            worst = worst.max(err);
            if err > 1e-5 {
                bad.push(format!("relative moduli mismatch {err}"));
            }
        }
        entries.push(entry(
            "elasticity-fd-match",
            bad,
            format!("worst relative mismatch {worst} (tolerance 1e-5)"),
        ));
    }

    // cubic control of the Taylor remainder at the identity
    {
        let mut measured: f64 = 0.0;
        let mut bad = Vec::new();
        let moduli = model.moduli();
        for _ in 0..samples {
            let mut h = Mat2::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = rng.gen_range(1e-3..0.1);
            h = h * (r / h.frob());
            let remainder = (model.stored_energy(&(Mat2::identity() + h))
                - 0.5 * moduli.quadratic(&h))
            .abs();
            let kappa = remainder / (r * r * r);
            measured = measured.max(kappa);
            if default_model && kappa > 8.5 {
                bad.push(format!("kappa = {kappa} at radius {r}"));
            }
        }
        entries.push(entry(
            "taylor-cubic-bound",
            bad,
            format!(
                "measured kappa = {measured}{}",
                if default_model { ", frozen bound 8.5" } else { "" }
            ),
        ));
    }

    // the relaxed pair (F, m) with exp(e(F, m)) F a rotation costs nothing
    {
        let mut bad = Vec::new();
        for _ in 0..samples {
            let m = random_unit(&mut rng);
            let e = crate::energy::spontaneous_strain(m).expect("unit m");
            let r = random_rotation(&mut rng);
            let f = (e * -1.0).exp() * r;
            let w = model.coupled_energy(&f, m);
            if w.abs() > 1e-12 {
                bad.push(format!("W = {w} at relaxed state (m = {m:?})"));
            }
        }
        entries.push(entry(
            "w-coupling-zero",
            bad,
            "relaxed states built from the inverse spontaneous stretch".into(),
        ));
    }

    let passed = entries
        .iter()
        .filter(|e| e.status == CheckStatus::Pass)
        .count();
    let failed = entries
        .iter()
        .filter(|e| e.status == CheckStatus::Fail)
        .count();
    let known = entries
        .iter()
        .filter(|e| e.status == CheckStatus::KnownDiscrepancy)
        .count();
    CheckReport {
        entries,
        passed,
        failed,
        known_discrepancies: known,
    }
}

fn entry(name: &str, bad: Vec<String>, detail: String) -> CheckEntry {
    CheckEntry {
        name: name.into(),
        status: if bad.is_empty() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail,
        counterexamples: bad.into_iter().take(5).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> Config {
        let mut cfg = Config::default();
        cfg.grid.n = 5;
        cfg.magnetostatics.n_cells = 24;
        cfg.magnetostatics.mu0 = 0.0;
        cfg.sweep.num_eps = 3;
        cfg.solver.max_iter = 600;
        cfg
    }

    #[test]
    fn sweep_produces_the_pinned_csv_schema() {
        let cfg = tiny_config();
        let out = run_sweep(&cfg, true, false).unwrap();
        assert_eq!(out.records.len(), 3);
        let csv = render_csv(&out.records);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "eps,s_eps,s0,gap,elastic,exchange,magnetostatic,load_work,zeeman,u_h1_dist,m_l2_dist,min_det,iterations,converged"
        );
        assert_eq!(csv.lines().count(), 4);
        for (rec, line) in out.records.iter().zip(csv.lines().skip(1)) {
            assert_eq!(line.split(',').count(), 14);
            assert!(line.starts_with(&format!("{},", rec.eps)));
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = tiny_config();
        let a = run_sweep(&cfg, true, false).unwrap();
        let b = run_sweep(&cfg, true, false).unwrap();
        assert_eq!(render_csv(&a.records), render_csv(&b.records));
    }

    #[test]
    fn sweep_gap_shrinks_on_a_small_problem() {
        let mut cfg = tiny_config();
        cfg.sweep.num_eps = 4;
        let out = run_sweep(&cfg, true, false).unwrap();
        let first = out.records.first().unwrap();
        let last = out.records.last().unwrap();
        assert!(last.gap.abs() < first.gap.abs());
        assert!(out.min_coercivity_margin >= 0.0);
        for r in &out.records {
            assert!(r.converged, "eps = {} did not converge", r.eps);
            assert!(r.min_det > 0.0);
        }
    }

    #[test]
    fn parallel_sweep_matches_cold_sequential() {
        let mut cfg = tiny_config();
        cfg.sweep.warm_start = false;
        let seq = run_sweep(&cfg, true, false).unwrap();
        let par = run_sweep(&cfg, true, true).unwrap();
        assert_eq!(render_csv(&seq.records), render_csv(&par.records));
    }

    #[test]
    fn recovery_gap_shrinks_linearly_for_smooth_states() {
        let mut cfg = tiny_config();
        cfg.grid.n = 9;
        cfg.boundary.w = crate::config::BoundaryKind::Bending;
        cfg.boundary.alpha = 0.2;
        cfg.loads.h = crate::loads::FieldSpec::Zero;
        let sys = cfg.build_system().unwrap();
        let mut state = StateFields::zero(&sys.grid);
        for node in 0..sys.grid.num_nodes() {
            state.u[node] = sys.boundary.eval(sys.grid.node_coord(node));
        }
        let mut gaps = Vec::new();
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let rec = recovery_initializer(&state, &sys.grid, eps).unwrap();
            let (_, _, gap) = recovery_gap(&sys, &rec, eps).unwrap();
            gaps.push((eps, gap));
        }
        for w in gaps.windows(2) {
            assert!(w[1].1 < w[0].1, "gap must shrink: {gaps:?}");
        }
    }

    #[test]
    fn rigidity_probe_reports_bounded_ratios() {
        let out = rigidity_probe(9, 4.0, 50, 99, 0.05);
        assert!(!out.samples.is_empty());
        assert!(out.max_ratio.is_finite());
        for s in &out.samples {
            assert!(s.projection_defect < 1e-10);
            assert!(s.ratio >= 0.0);
        }
        let csv = render_rigidity_csv(&out);
        assert!(csv.starts_with("sample,ratio,lhs,rhs,projection_defect\n"));
        assert_eq!(csv.lines().count(), out.samples.len() + 1);
    }

    #[test]
    fn dilation_ratio_matches_closed_form() {
        let delta = 0.1;
        let expected = 2.0 * (std::f64::consts::SQRT_2 * delta).powi(2);
        assert!((dilation_ratio(9, 4.0, delta) - expected).abs() < 1e-8);
    }

    #[test]
    fn hypothesis_check_flags_only_the_volumetric_floor() {
        let report = hypothesis_check(&StoredEnergyModel::default(), 2000, 7);
        assert_eq!(report.entries.len(), 16);
        for e in &report.entries {
            match e.name.as_str() {
                "det-blowup-bound" => {
                    assert_eq!(e.status, CheckStatus::Fail);
                    assert!(!e.counterexamples.is_empty());
                }
                "gp-min-form" => assert_eq!(e.status, CheckStatus::KnownDiscrepancy),
                _ => assert_eq!(e.status, CheckStatus::Pass, "{} failed: {}", e.name, e.detail),
            }
        }
        assert!(report.has_failures());
        assert_eq!(report.failed, 1);
        assert_eq!(report.known_discrepancies, 1);
        assert_eq!(report.passed, 14);
    }

    #[test]
    fn check_report_serializes_with_kebab_status() {
        let report = hypothesis_check(&StoredEnergyModel::default(), 200, 3);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"known-discrepancy\""));
        assert!(json.contains("\"det-blowup-bound\""));
        let back: CheckReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries.len(), report.entries.len());
    }

    #[test]
    fn state_dump_roundtrips() {
        let cfg = tiny_config();
        let sys = cfg.build_system().unwrap();
        let state = sys.initial_state();
        let dump = StateDump::new(&sys.grid, &state, Some(0.2));
        let json = serde_json::to_string(&dump).unwrap();
        let back: StateDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n, 5);
        assert_eq!(back.eps, Some(0.2));
        assert_eq!(back.u, state.u);
        assert_eq!(back.phi, state.phi);
    }
}
