//! Asymptotic flow and the weak free-surface operators.
//!
//! On the free surface the dynamic condition is projected with SUPG-weighted
//! test functions `ψ_i + d·∇_s ψ_i` and the Neumann data of every
//! non-penetration boundary with plain `ψ_i`. Integrands are evaluated at cell
//! quadrature points only, where normals and gradients are single valued.

mod flow;

pub use flow::{
    airy_dispersion, damping_mu, grid_velocity, AiryWave, AsymptoticFlow, BeachParams, FlowSample,
};

use crate::linalg::CsrMatrix;
use crate::meshkit::{bilinear_point, surface_gradients, CellPoint, DofLayout, Region, SurfaceMesh};
use crate::quadrature::{shape, QuadratureRule};
use crate::{Vec3, GRAVITY};

/// Free-surface discretization and beach settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FsParams {
    /// SUPG length as a multiple of the cell diagonal.
    pub c_tau: f64,
    /// Water density, kg/m³.
    pub rho: f64,
    pub beach: BeachParams,
    /// Beach damping velocity scale `κ/ρ`, m/s; the pressure is
    /// `P = ρ μ κ/ρ (δη/δt − δη∞/δt)`.
    pub damping_rate: f64,
    /// Gauss order per direction on free-surface and Neumann cells.
    pub quad_order: usize,
}

impl Default for FsParams {
    fn default() -> Self {
        FsParams {
            c_tau: 0.5,
            rho: 1000.0,
            beach: BeachParams {
                onset: 50.0,
                length: 100.0,
            },
            damping_rate: (GRAVITY * 10.0f64).sqrt(),
            quad_order: 3,
        }
    }
}

/// Nodal data of one cell in corner order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellNodal {
    pub phi: [f64; 4],
    pub gamma: [f64; 4],
    pub zdot: [f64; 4],
}

/// Local matrices and right-hand sides of one free-surface cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FsCellTerms {
    /// `∫ ψ_j ψ_i`, indexed `[i][j]`.
    pub mass: [[f64; 4]; 4],
    /// `∫ ψ_j (ψ_i + d·∇_s ψ_i)`.
    pub supg_mass: [[f64; 4]; 4],
    /// `∫ b^{φ̇} (ψ_i + d·∇_s ψ_i)`.
    pub b_dyn: [f64; 4],
    /// `∫ (v − ∇φ∞)·n ψ_i`.
    pub b_neu: [f64; 4],
    pub tau: f64,
}

/// Total perturbation gradient `∇_s φ_h + γ_h n` at a cell point.
#[inline]
pub fn gradient_at(cp: &CellPoint, grads: &[Vec3; 4], s: &[f64; 4], phi: &[f64; 4], gamma: &[f64; 4]) -> Vec3 {
    let mut g = Vec3::zeros();
    let mut gn = 0.0;
    for a in 0..4 {
        g += grads[a] * phi[a];
        gn += gamma[a] * s[a];
    }
    g + cp.normal * gn
}

/// SUPG direction `τ w/|w|` for the transport velocity `w` of the dynamic
/// condition, zero where the transport vanishes.
#[inline]
pub fn supg_vector(tau: f64, transport: Vec3) -> Vec3 {
    let m = transport.norm();
    if m < 1e-12 {
        Vec3::zeros()
    } else {
        transport * (tau / m)
    }
}

/// Right-hand side `b^{φ̇}` of the dynamic condition at one point.
#[inline]
pub fn dynamic_rhs(grad_phi: Vec3, v: Vec3, flow: &FlowSample, eta: f64, pressure_over_rho: f64) -> f64 {
    0.5 * grad_phi.norm_squared() - GRAVITY * (eta - flow.eta) + (v - flow.grad - grad_phi).dot(&grad_phi)
        - pressure_over_rho
}

/// Integrate the local free-surface terms of one cell.
pub fn fs_cell_terms(
    corners: &[Vec3; 4],
    nodal: &CellNodal,
    flow: &AsymptoticFlow,
    t: f64,
    params: &FsParams,
    unsteady: bool,
    rule: &QuadratureRule,
) -> FsCellTerms {
    let mut out = FsCellTerms {
        tau: params.c_tau * crate::meshkit::diagonal(corners),
        ..FsCellTerms::default()
    };
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (u, v) = (p[0], p[1]);
        let cp = bilinear_point(corners, u, v);
        let grads = surface_gradients(&cp, u, v);
        let s = shape(u, v);
        let jw = cp.jacobian * w;
        let grad_phi = gradient_at(&cp, &grads, &s, &nodal.phi, &nodal.gamma);
        let zdot: f64 = (0..4).map(|a| nodal.zdot[a] * s[a]).sum();
        let vel = Vec3::new(0.0, 0.0, zdot);
        let fs = flow.eval(cp.point, t);
        let p_rho = if unsteady {
            damping_mu(cp.point, &params.beach) * params.damping_rate * (zdot - fs.deta_dt)
        } else {
            0.0
        };
        let b = dynamic_rhs(grad_phi, vel, &fs, cp.point.z, p_rho);
        let d = supg_vector(out.tau, fs.grad + grad_phi - vel);
        let bn = (vel - fs.grad).dot(&cp.normal);
        for i in 0..4 {
            let wi = s[i] + d.dot(&grads[i]);
            for j in 0..4 {
                out.mass[i][j] += s[j] * s[i] * jw;
                out.supg_mass[i][j] += s[j] * wi * jw;
            }
            out.b_dyn[i] += b * wi * jw;
            out.b_neu[i] += bn * s[i] * jw;
        }
    }
    out
}

/// Mass matrix and Neumann right-hand side `∫ (−∇φ∞·n) ψ_i` of a fixed
/// boundary cell; zero data on the far field.
pub fn neumann_cell_terms(
    corners: &[Vec3; 4],
    region: Region,
    flow: &AsymptoticFlow,
    t: f64,
    rule: &QuadratureRule,
) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut mass = [[0.0; 4]; 4];
    let mut b = [0.0; 4];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let cp = bilinear_point(corners, p[0], p[1]);
        let s = shape(p[0], p[1]);
        let jw = cp.jacobian * w;
        let bn = match region {
            Region::FarField | Region::Inflow => 0.0,
            _ => -flow.eval(cp.point, t).grad.dot(&cp.normal),
        };
        for i in 0..4 {
            for j in 0..4 {
                mass[i][j] += s[i] * s[j] * jw;
            }
            b[i] += bn * s[i] * jw;
        }
    }
    (mass, b)
}

/// DOF-indexed fields needed by the projections.
#[derive(Clone, Copy, Debug)]
pub struct FsState<'a> {
    pub phi: &'a [f64],
    pub gamma: &'a [f64],
    /// Vertical velocity of free-surface DOFs (ignored elsewhere).
    pub zdot: &'a [f64],
}

impl FsState<'_> {
    pub fn cell_nodal(&self, cd: &[usize; 4]) -> CellNodal {
        let mut n = CellNodal::default();
        for a in 0..4 {
            n.phi[a] = self.phi[cd[a]];
            n.gamma[a] = self.gamma[cd[a]];
            n.zdot[a] = self.zdot[cd[a]];
        }
        n
    }
}

/// Assembled free-surface operators, rows and columns indexed by DOF.
#[derive(Clone, Debug)]
pub struct FsOperators {
    pub mass: CsrMatrix,
    pub supg_mass: CsrMatrix,
    pub b_dyn: Vec<f64>,
    /// SUPG length of each mesh cell (zero off the free surface).
    pub tau: Vec<f64>,
}

/// Assemble `M`, `M̃` and `b^{φ̇}` over the free surface of `mesh` (whose
/// node positions must be the current ones).
pub fn assemble_dynamic_projection(
    mesh: &SurfaceMesh,
    dofs: &DofLayout,
    state: &FsState,
    flow: &AsymptoticFlow,
    t: f64,
    params: &FsParams,
    unsteady: bool,
) -> FsOperators {
    let rule = QuadratureRule::gauss(params.quad_order);
    let n = dofs.len();
    let mut tm = Vec::new();
    let mut ts = Vec::new();
    let mut b = vec![0.0; n];
    let mut tau = vec![0.0; mesh.cells.len()];
    for k in mesh.cells_in_region(Region::FreeSurface) {
        let cd = &dofs.cell_dofs[k];
        let terms = fs_cell_terms(&mesh.corners(k), &state.cell_nodal(cd), flow, t, params, unsteady, &rule);
        tau[k] = terms.tau;
        for i in 0..4 {
            for j in 0..4 {
                tm.push((cd[i], cd[j], terms.mass[i][j]));
                ts.push((cd[i], cd[j], terms.supg_mass[i][j]));
            }
            b[cd[i]] += terms.b_dyn[i];
        }
    }
    FsOperators {
        mass: CsrMatrix::from_triplets(n, n, tm),
        supg_mass: CsrMatrix::from_triplets(n, n, ts),
        b_dyn: b,
        tau,
    }
}

/// Assemble the mass matrix and `b^{φn}` on every Neumann boundary.
pub fn assemble_neumann_projection(
    mesh: &SurfaceMesh,
    dofs: &DofLayout,
    state: &FsState,
    flow: &AsymptoticFlow,
    t: f64,
    params: &FsParams,
) -> (CsrMatrix, Vec<f64>) {
    let rule = QuadratureRule::gauss(params.quad_order);
    let n = dofs.len();
    let mut tm = Vec::new();
    let mut b = vec![0.0; n];
    for k in 0..mesh.cells.len() {
        let region = mesh.region(k);
        if region == Region::Inflow {
            continue;
        }
        let cd = &dofs.cell_dofs[k];
        let corners = mesh.corners(k);
        let (mass, bk) = if region == Region::FreeSurface {
            let terms = fs_cell_terms(&corners, &state.cell_nodal(cd), flow, t, params, false, &rule);
            (terms.mass, terms.b_neu)
        } else {
            neumann_cell_terms(&corners, region, flow, t, &rule)
        };
        for i in 0..4 {
            for j in 0..4 {
                tm.push((cd[i], cd[j], mass[i][j]));
            }
            b[cd[i]] += bk[i];
        }
    }
    (CsrMatrix::from_triplets(n, n, tm), b)
}

/// `∇φ` at reference point `(u, v)` of a cell from nodal `φ̂` and `γ̂`.
pub fn reconstruct_gradient(
    mesh: &SurfaceMesh,
    dofs: &DofLayout,
    phi: &[f64],
    gamma: &[f64],
    cell: usize,
    u: f64,
    v: f64,
) -> Vec3 {
    let cp = mesh.cell_geometry(cell, u, v);
    let grads = surface_gradients(&cp, u, v);
    let s = shape(u, v);
    let cd = &dofs.cell_dofs[cell];
    let p = [phi[cd[0]], phi[cd[1]], phi[cd[2]], phi[cd[3]]];
    let g = [gamma[cd[0]], gamma[cd[1]], gamma[cd[2]], gamma[cd[3]]];
    gradient_at(&cp, &grads, &s, &p, &g)
}

/// Horizontal gradient of the elevation of a free-surface cell, from the
/// tangents of the bilinear map.
pub fn elevation_gradient(cp: &CellPoint) -> (f64, f64) {
    // z_u = η_x x_u + η_y y_u, z_v = η_x x_v + η_y y_v
    let (a, b, c, d) = (cp.tu.x, cp.tu.y, cp.tv.x, cp.tv.y);
    let det = a * d - b * c;
    let ex = (cp.tu.z * d - cp.tv.z * b) / det;
    let ey = (a * cp.tv.z - c * cp.tu.z) / det;
    (ex, ey)
}

/// Residual of the semi-Lagrangian kinematic condition
/// `δη/δt − ∂(φ∞+φ)/∂z − (v − ∇φ∞ − ∇φ)·∇η`.
pub fn kinematic_residual(deta_dt: f64, grad_eta: (f64, f64), v: Vec3, grad_phi_inf: Vec3, grad_phi: Vec3) -> f64 {
    let w = v - grad_phi_inf - grad_phi;
    deta_dt - grad_phi_inf.z - grad_phi.z - (w.x * grad_eta.0 + w.y * grad_eta.1)
}

/// Residual of the non-penetration condition `∂φ/∂n − (v − ∇φ∞)·n`.
pub fn non_penetration_residual(normal: Vec3, v: Vec3, grad_phi_inf: Vec3, grad_phi: Vec3) -> f64 {
    grad_phi.dot(&normal) - (v - grad_phi_inf).dot(&normal)
}
