//! Grid-based reference solver.
//!
//! Discretizes the strip with bilinear quadrilaterals on a structured
//! `nx × ny` mesh (2×2 Gauss quadrature per element) and computes
//! stationary points of the discrete total energy by **staggered
//! minimization**: at every load increment the energy is minimized over
//! the free displacement dofs with the director frozen, then over the free
//! director-angle dofs with the displacement frozen, alternating until the
//! combined update and the joint free-dof gradient both fall under a
//! relative tolerance. Loading is displacement-controlled through Dirichlet
//! conditions and ramped in uniform increments.
//!
//! The director dof is the angle φ, so `|d| = 1` holds structurally at
//! nodes and at every Gauss point. Element contributions are assembled in
//! fixed chunk order (see [`crate::chunks`]), making energies and
//! gradients bitwise reproducible, serial or parallel.

use crate::chunks;
use crate::field::{self, FieldGrid, FieldPoint};
use crate::graddiff::{GradError, ParamLoss};
use crate::material::{self, KinematicState, MaterialError, MaterialParams};
use crate::network::CaseSetup;
use crate::opt::{self, LbfgsConfig, OptError};
use crate::tensor2::{Mat2, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default element counts of the reference mesh (5:1, matching the strip).
pub const DEFAULT_ELEMENTS_X: usize = 25;
pub const DEFAULT_ELEMENTS_Y: usize = 5;

/// Longitudinal-to-transverse element ratio used by `for_case` and the
/// mesh-independence study.
pub const MESH_ASPECT: usize = 5;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("non-positive jacobian det F = {det:.6e} in element {element} (gauss point {gauss})")]
    NonPositiveJacobian {
        element: usize,
        gauss: usize,
        det: f64,
    },
    #[error("material evaluation failed in element {element}: {msg}")]
    Material { element: usize, msg: String },
    #[error("staggered stage '{stage}' failed at increment {increment}: {msg}")]
    StageDiverged {
        increment: usize,
        stage: &'static str,
        msg: String,
    },
    #[error("invalid solver setup: {0}")]
    Config(String),
}

/// Gauss abscissa 1/√3 of the two-point rule on [-1, 1].
const GAUSS_2: f64 = 0.577_350_269_189_625_7;

/// Bilinear shape functions on the reference square, nodes ordered CCW:
/// `(−,−), (+,−), (+,+), (−,+)`.
fn bilinear_shapes(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

/// Physical shape-function gradients on a `hx × hy` rectangle.
fn bilinear_gradients(xi: f64, eta: f64, hx: f64, hy: f64) -> [Vec2; 4] {
    let sx = 2.0 / hx;
    let sy = 2.0 / hy;
    [
        Vec2::new(-0.25 * (1.0 - eta) * sx, -0.25 * (1.0 - xi) * sy),
        Vec2::new(0.25 * (1.0 - eta) * sx, -0.25 * (1.0 + xi) * sy),
        Vec2::new(0.25 * (1.0 + eta) * sx, 0.25 * (1.0 + xi) * sy),
        Vec2::new(-0.25 * (1.0 + eta) * sx, 0.25 * (1.0 - xi) * sy),
    ]
}

/// Fixed order of the 2×2 Gauss points in the reference square.
const GAUSS_POINTS: [(f64, f64); 4] = [
    (-GAUSS_2, -GAUSS_2),
    (GAUSS_2, -GAUSS_2),
    (-GAUSS_2, GAUSS_2),
    (GAUSS_2, GAUSS_2),
];

#[derive(Clone, Debug)]
struct GaussData {
    /// Shape values at this Gauss point.
    n: [f64; 4],
    /// Physical shape gradients (same for every element of a uniform
    /// rectangle mesh).
    dn: [Vec2; 4],
    /// Reference-square coordinates.
    xi: f64,
    eta: f64,
}

/// Uniform rectangle mesh over `[0, length] × [0, width]`.
///
/// Node index = `iy·(nx+1) + ix`; element `(ix, iy)` connects its four
/// corner nodes counter-clockwise starting at the lower-left.
#[derive(Clone, Debug)]
pub struct StructuredMesh {
    /// Element counts.
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub width: f64,
    pub nodes: Vec<Vec2>,
    pub elements: Vec<[usize; 4]>,
    gauss: [GaussData; 4],
    /// Quadrature weight per Gauss point: `hx·hy/4`.
    weight: f64,
    hx: f64,
    hy: f64,
}

impl StructuredMesh {
    pub fn rectangle(length: f64, width: f64, nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "mesh needs at least one element");
        assert!(length > 0.0 && width > 0.0, "mesh needs positive extent");
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for iy in 0..=ny {
            for ix in 0..=nx {
                nodes.push(Vec2::new(
                    length * ix as f64 / nx as f64,
                    width * iy as f64 / ny as f64,
                ));
            }
        }
        let mut elements = Vec::with_capacity(nx * ny);
        let node = |ix: usize, iy: usize| iy * (nx + 1) + ix;
        for iy in 0..ny {
            for ix in 0..nx {
                elements.push([
                    node(ix, iy),
                    node(ix + 1, iy),
                    node(ix + 1, iy + 1),
                    node(ix, iy + 1),
                ]);
            }
        }
        let hx = length / nx as f64;
        let hy = width / ny as f64;
        let gauss = GAUSS_POINTS.map(|(xi, eta)| GaussData {
            n: bilinear_shapes(xi, eta),
            dn: bilinear_gradients(xi, eta, hx, hy),
            xi,
            eta,
        });
        StructuredMesh {
            nx,
            ny,
            length,
            width,
            nodes,
            elements,
            gauss,
            weight: 0.25 * hx * hy,
            hx,
            hy,
        }
    }

    /// Mesh for a case at transverse resolution `ny`, keeping the standard
    /// 5:1 element aspect (`nx = 5·ny`).
    pub fn for_case(case: &CaseSetup, ny: usize) -> Self {
        StructuredMesh::rectangle(case.length, case.width, MESH_ASPECT * ny, ny)
    }

    /// The default 25×5 reference mesh.
    pub fn default_for_case(case: &CaseSetup) -> Self {
        StructuredMesh::for_case(case, DEFAULT_ELEMENTS_Y)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn node_ix(&self, node: usize) -> usize {
        node % (self.nx + 1)
    }

    /// Nodes on the left edge (fully constrained: u = 0, φ = φ₀).
    pub fn left_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.node_ix(n) == 0)
            .collect()
    }

    /// Nodes on the right edge (u prescribed by the load program).
    pub fn right_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.node_ix(n) == self.nx)
            .collect()
    }

    /// Nodes whose displacement is free.
    pub fn free_u_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| {
                let ix = self.node_ix(n);
                ix != 0 && ix != self.nx
            })
            .collect()
    }

    /// Nodes whose director angle is free.
    pub fn free_phi_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.node_ix(n) != 0)
            .collect()
    }
}

/// Uniform displacement-controlled load ramp: `Δu(t) = delta_u_max · t/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadProgram {
    pub n_increments: usize,
    pub delta_u_max: f64,
}

impl LoadProgram {
    /// The standard 300-increment ramp to the case's full end displacement.
    pub fn standard(case: &CaseSetup) -> Self {
        LoadProgram {
            n_increments: 300,
            delta_u_max: case.delta_l,
        }
    }

    pub fn delta_u(&self, t: usize) -> f64 {
        self.delta_u_max * t as f64 / self.n_increments as f64
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_increments == 0 {
            return Err("load program needs at least one increment".into());
        }
        if !(self.delta_u_max >= 0.0 && self.delta_u_max.is_finite()) {
            return Err(format!(
                "end displacement must be finite and >= 0, got {}",
                self.delta_u_max
            ));
        }
        Ok(())
    }
}

/// Nodal solution values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub u: Vec<Vec2>,
    pub phi: Vec<f64>,
}

impl DiscreteState {
    /// Reference state: zero displacement, uniform director angle.
    pub fn reference(mesh: &StructuredMesh, phi0: f64) -> Self {
        DiscreteState {
            u: vec![Vec2::ZERO; mesh.n_nodes()],
            phi: vec![phi0; mesh.n_nodes()],
        }
    }
}

/// Interpolated kinematic quantities at one Gauss point.
struct GaussState {
    state: KinematicState,
    phi: f64,
    gradphi: Vec2,
}

fn gauss_state(state: &DiscreteState, conn: &[usize; 4], g: &GaussData) -> GaussState {
    let mut gradu = Mat2::ZERO;
    let mut phi = 0.0;
    let mut gradphi = Vec2::ZERO;
    for a in 0..4 {
        let node = conn[a];
        gradu += state.u[node].outer(g.dn[a]);
        phi += g.n[a] * state.phi[node];
        gradphi += g.dn[a] * state.phi[node];
    }
    let d = Vec2::from_angle(phi);
    GaussState {
        state: KinematicState {
            f: Mat2::IDENTITY + gradu,
            d,
            gradd: d.perp().outer(gradphi),
        },
        phi,
        gradphi,
    }
}

fn material_error_in(element: usize, gauss: usize, e: MaterialError) -> SolveError {
    match e {
        MaterialError::NonPositiveJacobian { det } => SolveError::NonPositiveJacobian {
            element,
            gauss,
            det,
        },
        other => SolveError::Material {
            element,
            msg: other.to_string(),
        },
    }
}

/// Energy of one element, optionally accumulating the nodal gradient:
/// `∂E/∂u_a = Σ_g w·P∇N_a` and
/// `∂E/∂φ_a = Σ_g w·[N_a·(N·d⊥ − d·(M∇φ)) + d⊥·(M∇N_a)]`.
fn element_term(
    mesh: &StructuredMesh,
    state: &DiscreteState,
    p: &MaterialParams,
    element: usize,
    mut grads: Option<(&mut [Vec2], &mut [f64])>,
) -> Result<f64, SolveError> {
    let conn = &mesh.elements[element];
    let mut acc = 0.0;
    for (gi, g) in mesh.gauss.iter().enumerate() {
        let gs = gauss_state(state, conn, g);
        let density = material::energy_density(&gs.state, p)
            .map_err(|e| material_error_in(element, gi, e))?;
        acc += mesh.weight * density;

        if let Some((grad_u, grad_phi)) = grads.as_mut() {
            let stress = material::stresses(&gs.state, p)
                .map_err(|e| material_error_in(element, gi, e))?;
            let d = gs.state.d;
            let dperp = d.perp();
            let angle_sensitivity = stress.n.dot(dperp) - d.dot(stress.m.mul_vec(gs.gradphi));
            for a in 0..4 {
                let node = conn[a];
                grad_u[node] += stress.p.mul_vec(g.dn[a]) * mesh.weight;
                grad_phi[node] += mesh.weight
                    * (g.n[a] * angle_sensitivity + dperp.dot(stress.m.mul_vec(g.dn[a])));
            }
        }
    }
    Ok(acc)
}

/// Total discrete energy.
pub fn discrete_energy(
    state: &DiscreteState,
    mesh: &StructuredMesh,
    p: &MaterialParams,
    parallel: bool,
) -> Result<f64, SolveError> {
    check_state_shape(state, mesh)?;
    let parts = chunks::map_chunks(mesh.elements.len(), parallel, |range| {
        let mut acc = 0.0;
        for e in range {
            acc += element_term(mesh, state, p, e, None)?;
        }
        Ok::<f64, SolveError>(acc)
    });
    let mut total = 0.0;
    for part in parts {
        total += part?;
    }
    Ok(total)
}

/// Total discrete energy plus the full nodal gradient (all dofs, including
/// constrained ones — callers mask Dirichlet rows).
pub fn energy_and_nodal_gradient(
    state: &DiscreteState,
    mesh: &StructuredMesh,
    p: &MaterialParams,
    parallel: bool,
) -> Result<(f64, Vec<Vec2>, Vec<f64>), SolveError> {
    check_state_shape(state, mesh)?;
    let n = mesh.n_nodes();
    let parts = chunks::map_chunks(mesh.elements.len(), parallel, |range| {
        let mut grad_u = vec![Vec2::ZERO; n];
        let mut grad_phi = vec![0.0; n];
        let mut acc = 0.0;
        for e in range {
            acc += element_term(mesh, state, p, e, Some((&mut grad_u, &mut grad_phi)))?;
        }
        Ok::<(f64, Vec<Vec2>, Vec<f64>), SolveError>((acc, grad_u, grad_phi))
    });
    let mut total = 0.0;
    let mut grad_u = vec![Vec2::ZERO; n];
    let mut grad_phi = vec![0.0; n];
    for part in parts {
        let (f, gu, gp) = part?;
        total += f;
        for i in 0..n {
            grad_u[i] += gu[i];
            grad_phi[i] += gp[i];
        }
    }
    Ok((total, grad_u, grad_phi))
}

fn check_state_shape(state: &DiscreteState, mesh: &StructuredMesh) -> Result<(), SolveError> {
    if state.u.len() != mesh.n_nodes() || state.phi.len() != mesh.n_nodes() {
        return Err(SolveError::Config(format!(
            "state has {} u / {} phi values for a {}-node mesh",
            state.u.len(),
            state.phi.len(),
            mesh.n_nodes()
        )));
    }
    Ok(())
}

fn solve_to_grad(e: SolveError) -> GradError {
    match e {
        SolveError::NonPositiveJacobian { det, .. } => GradError::NonFiniteLoss { value: det },
        other => GradError::ShapeMismatch(other.to_string()),
    }
}

fn pack_u(state: &DiscreteState, free: &[usize]) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * free.len());
    for &n in free {
        x.push(state.u[n].x);
        x.push(state.u[n].y);
    }
    x
}

fn unpack_u(state: &mut DiscreteState, free: &[usize], x: &[f64]) {
    debug_assert_eq!(x.len(), 2 * free.len());
    for (k, &n) in free.iter().enumerate() {
        state.u[n] = Vec2::new(x[2 * k], x[2 * k + 1]);
    }
}

fn pack_phi(state: &DiscreteState, free: &[usize]) -> Vec<f64> {
    free.iter().map(|&n| state.phi[n]).collect()
}

fn unpack_phi(state: &mut DiscreteState, free: &[usize], x: &[f64]) {
    debug_assert_eq!(x.len(), free.len());
    for (k, &n) in free.iter().enumerate() {
        state.phi[n] = x[k];
    }
}

/// Stage objective: energy over free displacement dofs, director frozen.
struct DeformationStage<'a> {
    mesh: &'a StructuredMesh,
    p: MaterialParams,
    state: DiscreteState,
    free: &'a [usize],
    parallel: bool,
}

impl ParamLoss for DeformationStage<'_> {
    fn dim(&self) -> usize {
        2 * self.free.len()
    }
    fn value(&mut self, params: &[f64]) -> Result<f64, GradError> {
        unpack_u(&mut self.state, self.free, params);
        discrete_energy(&self.state, self.mesh, &self.p, self.parallel).map_err(solve_to_grad)
    }
    fn value_and_grad(&mut self, params: &[f64]) -> Result<(f64, Vec<f64>), GradError> {
        unpack_u(&mut self.state, self.free, params);
        let (f, gu, _) = energy_and_nodal_gradient(&self.state, self.mesh, &self.p, self.parallel)
            .map_err(solve_to_grad)?;
        let mut g = Vec::with_capacity(2 * self.free.len());
        for &n in self.free {
            g.push(gu[n].x);
            g.push(gu[n].y);
        }
        Ok((f, g))
    }
}

/// Stage objective: energy over free director-angle dofs, displacement
/// frozen.
struct DirectorStage<'a> {
    mesh: &'a StructuredMesh,
    p: MaterialParams,
    state: DiscreteState,
    free: &'a [usize],
    parallel: bool,
}

impl ParamLoss for DirectorStage<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }
    fn value(&mut self, params: &[f64]) -> Result<f64, GradError> {
        unpack_phi(&mut self.state, self.free, params);
        discrete_energy(&self.state, self.mesh, &self.p, self.parallel).map_err(solve_to_grad)
    }
    fn value_and_grad(&mut self, params: &[f64]) -> Result<(f64, Vec<f64>), GradError> {
        unpack_phi(&mut self.state, self.free, params);
        let (f, _, gphi) =
            energy_and_nodal_gradient(&self.state, self.mesh, &self.p, self.parallel)
                .map_err(solve_to_grad)?;
        Ok((f, self.free.iter().map(|&n| gphi[n]).collect()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative tolerance on both the combined staggered update and the
    /// joint free-dof gradient.
    pub stagger_tol: f64,
    /// Alternation budget per increment; exhausting it is `StageDiverged`.
    pub max_alternations: usize,
    /// Iteration cap of each stage minimization.
    pub stage_max_iters: usize,
    /// Record a solution snapshot every this many increments (0 = none;
    /// the final state is always returned).
    pub snapshot_every: usize,
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            stagger_tol: 1e-6,
            max_alternations: 50,
            stage_max_iters: 400,
            snapshot_every: 0,
            parallel: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.stagger_tol > 0.0) {
            return Err(format!(
                "stagger tolerance must be positive, got {}",
                self.stagger_tol
            ));
        }
        if self.max_alternations == 0 || self.stage_max_iters == 0 {
            return Err("alternation and stage-iteration budgets must be positive".into());
        }
        Ok(())
    }
}

/// Energy record of one converged load increment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementRecord {
    pub increment: usize,
    /// Prescribed end displacement at this increment.
    pub delta_u: f64,
    /// Discrete energy after convergence.
    pub energy: f64,
    /// Alternations needed.
    pub alternations: usize,
    /// Energy after each stage minimization, in execution order
    /// (deformation stage, director stage, repeated) — non-increasing
    /// within the increment.
    pub stage_energies: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub final_state: DiscreteState,
    pub history: Vec<IncrementRecord>,
    /// `(increment, state)` snapshots per `snapshot_every`.
    pub snapshots: Vec<(usize, DiscreteState)>,
}

fn stage_error(increment: usize, stage: &'static str, e: OptError) -> SolveError {
    SolveError::StageDiverged {
        increment,
        stage,
        msg: e.to_string(),
    }
}

fn inf_norm_vec2(values: &[Vec2], over: &[usize]) -> f64 {
    over.iter().fold(0.0, |m, &n| {
        m.max(values[n].x.abs()).max(values[n].y.abs())
    })
}

fn inf_norm_scalar(values: &[f64], over: &[usize]) -> f64 {
    over.iter().fold(0.0, |m, &n| m.max(values[n].abs()))
}

/// Run the full incremental staggered solve.
pub fn staggered_solve(
    case: &CaseSetup,
    program: &LoadProgram,
    mesh: &StructuredMesh,
    p: &MaterialParams,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    case.validate().map_err(SolveError::Config)?;
    program.validate().map_err(SolveError::Config)?;
    opts.validate().map_err(SolveError::Config)?;
    p.validate().map_err(|e| SolveError::Config(e.to_string()))?;
    if (mesh.length - case.length).abs() > 1e-12 || (mesh.width - case.width).abs() > 1e-12 {
        return Err(SolveError::Config(format!(
            "mesh spans {} x {} but the case domain is {} x {}",
            mesh.length, mesh.width, case.length, case.width
        )));
    }
    if (p.d_ref - Vec2::from_angle(case.phi0)).norm() > 1e-12 {
        return Err(SolveError::Config(
            "material reference director does not match the case angle φ₀".into(),
        ));
    }
    if !case.loads.is_zero() {
        return Err(SolveError::Config(
            "the lattice solver models displacement control only (external loads must be zero)"
                .into(),
        ));
    }

    let mut state = DiscreteState::reference(mesh, case.phi0);
    let free_u = mesh.free_u_nodes();
    let free_phi = mesh.free_phi_nodes();
    let right = mesh.right_nodes();

    // Nodal gradients are integrals over element-sized supports, so they
    // shrink with the element area even when the field residual does not.
    // A fixed stationarity bound therefore gets physically *looser* under
    // refinement — fine meshes would stop early and could even report
    // higher energy than coarser ones. Scale the gradient tolerance by the
    // element area relative to the standard mesh, capped at 1 so the
    // standard and coarser meshes keep their plain semantics.
    let reference_area = (mesh.length / (MESH_ASPECT * DEFAULT_ELEMENTS_Y) as f64)
        * (mesh.width / DEFAULT_ELEMENTS_Y as f64);
    let grad_scale = ((mesh.hx * mesh.hy) / reference_area).min(1.0);
    let grad_tol = opts.stagger_tol * grad_scale;

    let stage_cfg = LbfgsConfig {
        max_iters: opts.stage_max_iters,
        gtol: grad_tol,
        // Finer meshes condition the stage problems worse; a deeper
        // curvature history costs little and cuts their iteration counts.
        memory: 20,
        ..LbfgsConfig::default()
    };

    let mut history = Vec::with_capacity(program.n_increments);
    let mut snapshots = Vec::new();

    for t in 1..=program.n_increments {
        let du = program.delta_u(t);
        for &n in &right {
            state.u[n] = Vec2::new(du, 0.0);
        }

        let mut stage_energies = Vec::new();
        let mut converged = false;
        let mut alternations = 0;
        let mut energy = f64::NAN;

        while alternations < opts.max_alternations {
            alternations += 1;
            let u_before = state.u.clone();
            let phi_before = state.phi.clone();

            let mut x = pack_u(&state, &free_u);
            let mut stage = DeformationStage {
                mesh,
                p: *p,
                state: state.clone(),
                free: &free_u,
                parallel: opts.parallel,
            };
            let rep_u = opt::lbfgs(&mut stage, &mut x, &stage_cfg, |_, _| {})
                .map_err(|e| stage_error(t, "deformation", e))?;
            unpack_u(&mut state, &free_u, &x);
            stage_energies.push(rep_u.value);

            let mut y = pack_phi(&state, &free_phi);
            let mut stage = DirectorStage {
                mesh,
                p: *p,
                state: state.clone(),
                free: &free_phi,
                parallel: opts.parallel,
            };
            let rep_phi = opt::lbfgs(&mut stage, &mut y, &stage_cfg, |_, _| {})
                .map_err(|e| stage_error(t, "director", e))?;
            unpack_phi(&mut state, &free_phi, &y);
            stage_energies.push(rep_phi.value);

            // Combined relative update over the alternation.
            let mut du_norm = 0.0f64;
            for &n in &free_u {
                du_norm = du_norm
                    .max((state.u[n].x - u_before[n].x).abs())
                    .max((state.u[n].y - u_before[n].y).abs());
            }
            let mut dphi_norm = 0.0f64;
            for &n in &free_phi {
                dphi_norm = dphi_norm.max((state.phi[n] - phi_before[n]).abs());
            }
            let u_scale = 1.0 + inf_norm_vec2(&state.u, &free_u);
            let phi_scale = 1.0 + inf_norm_scalar(&state.phi, &free_phi);
            let update_ok =
                du_norm <= opts.stagger_tol * u_scale && dphi_norm <= opts.stagger_tol * phi_scale;

            // Joint stationarity over all free dofs at once.
            let (e_now, gu, gphi) =
                energy_and_nodal_gradient(&state, mesh, p, opts.parallel)?;
            energy = e_now;
            let gmax = inf_norm_vec2(&gu, &free_u).max(inf_norm_scalar(&gphi, &free_phi));
            let grad_ok = gmax <= grad_tol * (1.0 + e_now.abs());

            if update_ok && grad_ok {
                converged = true;
                break;
            }
        }

        if !converged {
            return Err(SolveError::StageDiverged {
                increment: t,
                stage: "alternation-cap",
                msg: format!(
                    "no staggered convergence within {} alternations",
                    opts.max_alternations
                ),
            });
        }

        history.push(IncrementRecord {
            increment: t,
            delta_u: du,
            energy,
            alternations,
            stage_energies,
        });
        if opts.snapshot_every > 0 && t % opts.snapshot_every == 0 {
            snapshots.push((t, state.clone()));
        }
    }

    Ok(SolveResult {
        final_state: state,
        history,
        snapshots,
    })
}

/// One row of the mesh-independence study: director-angle statistics over
/// all nodes at the final increment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshStudyRow {
    pub ny: usize,
    pub nx: usize,
    pub phi_min: f64,
    pub phi_mean: f64,
    pub phi_max: f64,
}

#[derive(Clone, Debug)]
pub struct MeshStudy {
    pub rows: Vec<MeshStudyRow>,
    /// Full solve result per row (same order).
    pub results: Vec<SolveResult>,
    pub meshes: Vec<StructuredMesh>,
}

/// Solve the same case at several transverse resolutions (`nx = 5·ny`) and
/// tabulate the final director-angle statistics.
pub fn mesh_independence_study(
    case: &CaseSetup,
    program: &LoadProgram,
    p: &MaterialParams,
    ny_list: &[usize],
    opts: &SolverOptions,
) -> Result<MeshStudy, SolveError> {
    if ny_list.is_empty() {
        return Err(SolveError::Config("mesh study needs at least one row".into()));
    }
    let mut rows = Vec::with_capacity(ny_list.len());
    let mut results = Vec::with_capacity(ny_list.len());
    let mut meshes = Vec::with_capacity(ny_list.len());
    for &ny in ny_list {
        if ny == 0 {
            return Err(SolveError::Config("mesh study ny must be positive".into()));
        }
        let mesh = StructuredMesh::for_case(case, ny);
        let result = staggered_solve(case, program, &mesh, p, opts)?;
        let phis = &result.final_state.phi;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in phis {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        rows.push(MeshStudyRow {
            ny,
            nx: mesh.nx,
            phi_min: min,
            phi_mean: sum / phis.len() as f64,
            phi_max: max,
        });
        results.push(result);
        meshes.push(mesh);
    }
    Ok(MeshStudy {
        rows,
        results,
        meshes,
    })
}

/// Interpolate a nodal state onto a dense uniform grid (shared field
/// schema with the network solver). Gradients are element-local bilinear
/// gradients; on element edges the cell to the right/top wins.
pub fn sample_to_grid(
    state: &DiscreteState,
    mesh: &StructuredMesh,
    nx_pts: usize,
    ny_pts: usize,
) -> Result<FieldGrid, SolveError> {
    check_state_shape(state, mesh)?;
    let coords = field::uniform_coords(mesh.length, mesh.width, nx_pts, ny_pts);
    let mut points = Vec::with_capacity(coords.len());
    for c in coords {
        points.push(interpolate_at(state, mesh, c));
    }
    Ok(FieldGrid {
        nx: nx_pts,
        ny: ny_pts,
        points,
    })
}

fn interpolate_at(state: &DiscreteState, mesh: &StructuredMesh, c: Vec2) -> FieldPoint {
    let ex = ((c.x / mesh.hx).floor() as isize).clamp(0, mesh.nx as isize - 1) as usize;
    let ey = ((c.y / mesh.hy).floor() as isize).clamp(0, mesh.ny as isize - 1) as usize;
    let xi = 2.0 * (c.x - ex as f64 * mesh.hx) / mesh.hx - 1.0;
    let eta = 2.0 * (c.y - ey as f64 * mesh.hy) / mesh.hy - 1.0;
    let n = bilinear_shapes(xi, eta);
    let dn = bilinear_gradients(xi, eta, mesh.hx, mesh.hy);
    let conn = mesh.elements[ey * mesh.nx + ex];

    let mut u = Vec2::ZERO;
    let mut gradu = Mat2::ZERO;
    let mut phi = 0.0;
    let mut gradphi = Vec2::ZERO;
    for a in 0..4 {
        let node = conn[a];
        u += state.u[node] * n[a];
        gradu += state.u[node].outer(dn[a]);
        phi += n[a] * state.phi[node];
        gradphi += dn[a] * state.phi[node];
    }
    let d = Vec2::from_angle(phi);
    FieldPoint {
        x: c,
        u,
        phi,
        f: Mat2::IDENTITY + gradu,
        d,
        gradd: d.perp().outer(gradphi),
    }
}

/// Kinematic states at every Gauss point of the mesh, packaged as a
/// (n × 1) field for certification.
pub fn gauss_point_field(
    state: &DiscreteState,
    mesh: &StructuredMesh,
) -> Result<FieldGrid, SolveError> {
    check_state_shape(state, mesh)?;
    let mut points = Vec::with_capacity(mesh.elements.len() * 4);
    for conn in &mesh.elements {
        let origin = mesh.nodes[conn[0]];
        for g in &mesh.gauss {
            let gs = gauss_state(state, conn, g);
            let x = Vec2::new(
                origin.x + 0.5 * (g.xi + 1.0) * mesh.hx,
                origin.y + 0.5 * (g.eta + 1.0) * mesh.hy,
            );
            let mut u = Vec2::ZERO;
            for a in 0..4 {
                u += state.u[conn[a]] * g.n[a];
            }
            points.push(FieldPoint {
                x,
                u,
                phi: gs.phi,
                f: gs.state.f,
                d: gs.state.d,
                gradd: gs.state.gradd,
            });
        }
    }
    Ok(FieldGrid {
        nx: points.len(),
        ny: 1,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    fn ramp_state(mesh: &StructuredMesh, slope: f64, phi0: f64) -> DiscreteState {
        let mut state = DiscreteState::reference(mesh, phi0);
        for (i, node) in mesh.nodes.iter().enumerate() {
            state.u[i] = Vec2::new(slope * node.x, 0.0);
        }
        state
    }

    fn wiggled_state(mesh: &StructuredMesh, phi0: f64, seed: u64) -> DiscreteState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = ramp_state(mesh, 0.05, phi0);
        for i in 0..mesh.n_nodes() {
            state.u[i] += Vec2::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
            state.phi[i] += rng.random_range(-0.2..0.2);
        }
        state
    }

    #[test]
    fn mesh_geometry_is_exact() {
        let case = CaseSetup::stretched_strip(FRAC_PI_3);
        let mesh = StructuredMesh::default_for_case(&case);
        assert_eq!((mesh.nx, mesh.ny), (25, 5));
        assert_eq!(mesh.n_nodes(), 26 * 6);
        assert_eq!(mesh.elements.len(), 125);
        // Corner nodes land exactly on the domain corners.
        assert_eq!(mesh.nodes[0], Vec2::ZERO);
        assert_eq!(mesh.nodes[25], Vec2::new(1.0, 0.0));
        assert_eq!(*mesh.nodes.last().unwrap(), Vec2::new(1.0, 0.2));
        // Shape functions form a partition of unity with vanishing
        // gradient sum at every Gauss point.
        for g in &mesh.gauss {
            let sum: f64 = g.n.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-15);
            let gsum = g.dn.iter().fold(Vec2::ZERO, |acc, &v| acc + v);
            assert!(gsum.norm() <= 1e-13);
        }
        assert_eq!(mesh.left_nodes().len(), 6);
        assert_eq!(mesh.right_nodes().len(), 6);
        assert_eq!(mesh.free_u_nodes().len(), 26 * 6 - 12);
        assert_eq!(mesh.free_phi_nodes().len(), 26 * 6 - 6);
    }

    #[test]
    fn reference_state_has_zero_energy() {
        let case = CaseSetup::stretched_strip(FRAC_PI_3);
        let mesh = StructuredMesh::default_for_case(&case);
        let p = MaterialParams::standard(FRAC_PI_3);
        let state = DiscreteState::reference(&mesh, FRAC_PI_3);
        let e = discrete_energy(&state, &mesh, &p, false).unwrap();
        assert!(e.abs() <= 1e-12, "reference energy {e}");
    }

    #[test]
    fn homogeneous_ramp_matches_the_closed_form_density() {
        let case = CaseSetup::stretched_strip(FRAC_PI_4);
        let mesh = StructuredMesh::default_for_case(&case);
        let p = MaterialParams::standard(FRAC_PI_4);
        let state = ramp_state(&mesh, 0.1, FRAC_PI_4);
        let e = discrete_energy(&state, &mesh, &p, false).unwrap();
        let density = material::energy_density(
            &KinematicState {
                f: Mat2::new(1.1, 0.0, 0.0, 1.0),
                d: Vec2::from_angle(FRAC_PI_4),
                gradd: Mat2::ZERO,
            },
            &p,
        )
        .unwrap();
        let expected = 0.2 * density;
        assert!(
            (e - expected).abs() <= 1e-12 * expected.max(1.0),
            "discrete {e} vs closed form {expected}"
        );
    }

    #[test]
    fn one_element_energy_matches_hand_assembly() {
        let mesh = StructuredMesh::rectangle(0.4, 0.3, 1, 1);
        let p = MaterialParams::standard(0.5);
        // Nodal values in *node index* order (row-major): (0,0), (0.4,0),
        // (0,0.3), (0.4,0.3).
        let nodal_u = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.01, -0.02),
            Vec2::new(0.03, 0.01),
            Vec2::new(-0.005, 0.015),
        ];
        let nodal_phi = [0.5, 0.7, 0.4, 0.6];
        let state = DiscreteState {
            u: nodal_u.to_vec(),
            phi: nodal_phi.to_vec(),
        };
        let e = discrete_energy(&state, &mesh, &p, false).unwrap();
        // The hand assembly needs the same values in CCW corner order:
        // lower-left, lower-right, upper-right, upper-left.
        let u = [nodal_u[0], nodal_u[1], nodal_u[3], nodal_u[2]];
        let phi = [nodal_phi[0], nodal_phi[1], nodal_phi[3], nodal_phi[2]];

        // Independent hand assembly with literal shape formulas.
        let (hx, hy) = (0.4, 0.3);
        let g = 1.0 / 3f64.sqrt();
        let mut hand = 0.0;
        for &eta in &[-g, g] {
            for &xi in &[-g, g] {
                let n = [
                    0.25 * (1.0 - xi) * (1.0 - eta),
                    0.25 * (1.0 + xi) * (1.0 - eta),
                    0.25 * (1.0 + xi) * (1.0 + eta),
                    0.25 * (1.0 - xi) * (1.0 + eta),
                ];
                let dn = [
                    Vec2::new(-0.25 * (1.0 - eta) * 2.0 / hx, -0.25 * (1.0 - xi) * 2.0 / hy),
                    Vec2::new(0.25 * (1.0 - eta) * 2.0 / hx, -0.25 * (1.0 + xi) * 2.0 / hy),
                    Vec2::new(0.25 * (1.0 + eta) * 2.0 / hx, 0.25 * (1.0 + xi) * 2.0 / hy),
                    Vec2::new(-0.25 * (1.0 + eta) * 2.0 / hx, 0.25 * (1.0 - xi) * 2.0 / hy),
                ];
                let mut gradu = Mat2::ZERO;
                let mut ph = 0.0;
                let mut gph = Vec2::ZERO;
                for a in 0..4 {
                    gradu += u[a].outer(dn[a]);
                    ph += n[a] * phi[a];
                    gph += dn[a] * phi[a];
                }
                let d = Vec2::from_angle(ph);
                let density = material::energy_density(
                    &KinematicState {
                        f: Mat2::IDENTITY + gradu,
                        d,
                        gradd: d.perp().outer(gph),
                    },
                    &p,
                )
                .unwrap();
                hand += 0.25 * hx * hy * density;
            }
        }
        assert!(
            (e - hand).abs() <= 1e-14 * hand.abs().max(1.0),
            "assembled {e} vs hand {hand}"
        );
    }

    #[test]
    fn nodal_gradient_matches_finite_differences() {
        let case = CaseSetup::stretched_strip(FRAC_PI_3);
        let mesh = StructuredMesh::rectangle(case.length, case.width, 4, 2);
        let p = MaterialParams::standard(FRAC_PI_3);
        let state = wiggled_state(&mesh, FRAC_PI_3, 7);
        let (_, gu, gphi) = energy_and_nodal_gradient(&state, &mesh, &p, false).unwrap();

        let h = 1e-6;
        let energy_of = |s: &DiscreteState| discrete_energy(s, &mesh, &p, false).unwrap();
        for n in (0..mesh.n_nodes()).step_by(3) {
            for comp in 0..2 {
                let mut plus = state.clone();
                let mut minus = state.clone();
                if comp == 0 {
                    plus.u[n].x += h;
                    minus.u[n].x -= h;
                } else {
                    plus.u[n].y += h;
                    minus.u[n].y -= h;
                }
                let fd = (energy_of(&plus) - energy_of(&minus)) / (2.0 * h);
                let g = if comp == 0 { gu[n].x } else { gu[n].y };
                assert!(
                    (fd - g).abs() <= 1e-6 * (1.0 + g.abs()),
                    "u dof ({n},{comp}): fd {fd} vs assembled {g}"
                );
            }
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.phi[n] += h;
            minus.phi[n] -= h;
            let fd = (energy_of(&plus) - energy_of(&minus)) / (2.0 * h);
            assert!(
                (fd - gphi[n]).abs() <= 1e-6 * (1.0 + gphi[n].abs()),
                "phi dof {n}: fd {fd} vs assembled {}",
                gphi[n]
            );
        }
    }

    #[test]
    fn assembly_is_bitwise_identical_serial_and_parallel() {
        let case = CaseSetup::stretched_strip(FRAC_PI_4);
        let mesh = StructuredMesh::for_case(&case, 3);
        let p = MaterialParams::standard(FRAC_PI_4);
        let state = wiggled_state(&mesh, FRAC_PI_4, 21);
        let (es, gus, gps) = energy_and_nodal_gradient(&state, &mesh, &p, false).unwrap();
        let (ep, gup, gpp) = energy_and_nodal_gradient(&state, &mesh, &p, true).unwrap();
        assert_eq!(es.to_bits(), ep.to_bits());
        for (a, b) in gus.iter().zip(&gup) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        for (a, b) in gps.iter().zip(&gpp) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn inverted_element_names_the_culprit() {
        let case = CaseSetup::stretched_strip(FRAC_PI_4);
        let mesh = StructuredMesh::rectangle(case.length, case.width, 4, 2);
        let p = MaterialParams::standard(FRAC_PI_4);
        let mut state = DiscreteState::reference(&mesh, FRAC_PI_4);
        // Collapse one node of element 5 (= (ix=1, iy=1)) far enough to
        // invert it: push node (2,1) strongly in −x.
        state.u[1 * 5 + 2] = Vec2::new(-0.4, 0.0);
        let err = discrete_energy(&state, &mesh, &p, false).unwrap_err();
        match err {
            SolveError::NonPositiveJacobian { element, .. } => {
                // The node belongs to elements 1, 2, 5, 6; the first one
                // scanned must be reported.
                assert_eq!(element, 1, "unexpected element: {err}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unloaded_program_converges_to_zero_energy() {
        let case = CaseSetup::unloaded_strip(FRAC_PI_3);
        let mesh = StructuredMesh::default_for_case(&case);
        let p = MaterialParams::standard(FRAC_PI_3);
        let program = LoadProgram {
            n_increments: 3,
            delta_u_max: 0.0,
        };
        let result =
            staggered_solve(&case, &program, &mesh, &p, &SolverOptions::default()).unwrap();
        assert_eq!(result.history.len(), 3);
        for rec in &result.history {
            assert!(rec.energy.abs() <= 1e-12, "increment energy {}", rec.energy);
            assert_eq!(rec.alternations, 1);
        }
        // Dirichlet values are held bitwise.
        for &n in &mesh.left_nodes() {
            assert_eq!(result.final_state.u[n], Vec2::ZERO);
            assert_eq!(result.final_state.phi[n].to_bits(), FRAC_PI_3.to_bits());
        }
    }

    #[test]
    fn short_ramp_produces_monotone_energies_and_stationarity() {
        let case = CaseSetup::stretched_strip(FRAC_PI_3);
        let mesh = StructuredMesh::for_case(&case, 2);
        let p = MaterialParams::standard(FRAC_PI_3);
        let program = LoadProgram {
            n_increments: 10,
            delta_u_max: case.delta_l,
        };
        let opts = SolverOptions {
            parallel: false,
            ..SolverOptions::default()
        };
        let result = staggered_solve(&case, &program, &mesh, &p, &opts).unwrap();

        // More stretch stores more energy.
        for pair in result.history.windows(2) {
            assert!(
                pair[1].energy >= pair[0].energy - 1e-12,
                "history not monotone: {pair:?}"
            );
        }
        // Stage energies never increase within an increment.
        for rec in &result.history {
            for pair in rec.stage_energies.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-12,
                    "stage sequence increased at increment {}: {pair:?}",
                    rec.increment
                );
            }
        }
        // Stationarity at the final state.
        let (e, gu, gphi) = energy_and_nodal_gradient(&result.final_state, &mesh, &p, false).unwrap();
        let gmax = inf_norm_vec2(&gu, &mesh.free_u_nodes())
            .max(inf_norm_scalar(&gphi, &mesh.free_phi_nodes()));
        assert!(
            gmax <= 1e-6 * (1.0 + e.abs()),
            "converged gradient {gmax} too large for energy {e}"
        );
        // Dirichlet rows never drift.
        for &n in &mesh.left_nodes() {
            assert_eq!(result.final_state.u[n], Vec2::ZERO);
        }
        for &n in &mesh.right_nodes() {
            assert_eq!(result.final_state.u[n], Vec2::new(case.delta_l, 0.0));
        }
    }

    #[test]
    fn director_relaxes_toward_the_stretch_axis() {
        // Under uniaxial stretch the energy favors rotating the director
        // toward the X axis, so the mean angle must drop below φ₀.
        let case = CaseSetup::stretched_strip(FRAC_PI_3);
        let mesh = StructuredMesh::for_case(&case, 2);
        let p = MaterialParams::standard(FRAC_PI_3);
        let program = LoadProgram {
            n_increments: 10,
            delta_u_max: case.delta_l,
        };
        let opts = SolverOptions {
            parallel: false,
            ..SolverOptions::default()
        };
        let result = staggered_solve(&case, &program, &mesh, &p, &opts).unwrap();
        let mean: f64 = result.final_state.phi.iter().sum::<f64>()
            / result.final_state.phi.len() as f64;
        assert!(
            mean < FRAC_PI_3 - 0.01,
            "director did not reorient: mean φ = {mean}, φ₀ = {FRAC_PI_3}"
        );
    }

    #[test]
    fn alternation_cap_is_reported_as_divergence() {
        let case = CaseSetup::stretched_strip(FRAC_PI_4);
        let mesh = StructuredMesh::for_case(&case, 1);
        let p = MaterialParams::standard(FRAC_PI_4);
        let program = LoadProgram {
            n_increments: 1,
            delta_u_max: case.delta_l,
        };
        let opts = SolverOptions {
            stagger_tol: 1e-12,
            max_alternations: 1,
            stage_max_iters: 1,
            snapshot_every: 0,
            parallel: false,
        };
        let err = staggered_solve(&case, &program, &mesh, &p, &opts).unwrap_err();
        assert!(matches!(err, SolveError::StageDiverged { increment: 1, .. }));
    }

    #[test]
    fn setup_mismatches_are_rejected() {
        let case = CaseSetup::stretched_strip(FRAC_PI_4);
        let p = MaterialParams::standard(FRAC_PI_4);
        let wrong_mesh = StructuredMesh::rectangle(2.0, 0.2, 10, 2);
        let program = LoadProgram::standard(&case);
        assert!(matches!(
            staggered_solve(&case, &program, &wrong_mesh, &p, &SolverOptions::default()),
            Err(SolveError::Config(_))
        ));
        // Material reference director inconsistent with the case angle.
        let mesh = StructuredMesh::for_case(&case, 1);
        let wrong_p = MaterialParams::standard(FRAC_PI_3);
        assert!(matches!(
            staggered_solve(&case, &program, &mesh, &wrong_p, &SolverOptions::default()),
            Err(SolveError::Config(_))
        ));
    }

    #[test]
    fn sampling_reproduces_nodal_and_linear_fields_exactly() {
        let case = CaseSetup::stretched_strip(FRAC_PI_4);
        let mesh = StructuredMesh::for_case(&case, 2);
        let state = ramp_state(&mesh, 0.1, FRAC_PI_4);
        let grid = sample_to_grid(&state, &mesh, 21, 7).unwrap();
        assert_eq!((grid.nx, grid.ny), (21, 7));
        for pt in &grid.points {
            // The ramp is bilinear-exact: u = (0.1·X, 0), F = diag(1.1, 1).
            assert!((pt.u.x - 0.1 * pt.x.x).abs() <= 1e-15);
            assert_eq!(pt.u.y, 0.0);
            assert!((pt.f - Mat2::new(1.1, 0.0, 0.0, 1.0)).frobenius_norm() <= 1e-13);
            assert!((pt.phi - FRAC_PI_4).abs() <= 1e-15);
            assert!((pt.d.norm() - 1.0).abs() <= 1e-15);
        }
        // Corners exactly on the boundary.
        assert_eq!(grid.points[0].x, Vec2::ZERO);
        assert_eq!(grid.points.last().unwrap().x, Vec2::new(1.0, 0.2));
    }

    #[test]
    fn gauss_field_covers_all_points_and_validates() {
        let case = CaseSetup::stretched_strip(FRAC_PI_3);
        let mesh = StructuredMesh::for_case(&case, 1);
        let state = wiggled_state(&mesh, FRAC_PI_3, 3);
        let grid = gauss_point_field(&state, &mesh).unwrap();
        assert_eq!(grid.n_points(), mesh.elements.len() * 4);
        assert!(grid.validate().is_ok());
        // Gauss positions are strictly interior.
        for pt in &grid.points {
            assert!(pt.x.x > 0.0 && pt.x.x < 1.0);
            assert!(pt.x.y > 0.0 && pt.x.y < 0.2);
        }
    }

    #[test]
    fn mesh_study_rows_follow_the_aspect_convention() {
        let case = CaseSetup::stretched_strip(FRAC_PI_3);
        let p = MaterialParams::standard(FRAC_PI_3);
        let program = LoadProgram {
            n_increments: 4,
            delta_u_max: 0.02,
        };
        let opts = SolverOptions {
            parallel: false,
            ..SolverOptions::default()
        };
        let study = mesh_independence_study(&case, &program, &p, &[1, 2], &opts).unwrap();
        assert_eq!(study.rows.len(), 2);
        assert_eq!((study.rows[0].ny, study.rows[0].nx), (1, 5));
        assert_eq!((study.rows[1].ny, study.rows[1].nx), (2, 10));
        for row in &study.rows {
            assert!(row.phi_min <= row.phi_mean && row.phi_mean <= row.phi_max);
            assert!(row.phi_min.is_finite() && row.phi_max.is_finite());
        }
    }
}
