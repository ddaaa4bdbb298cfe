//! Hull pressure, hydrodynamic forces and result files.

mod output;

pub use output::{
    format_cycle_table, CycleRecord,
    format_vtk, node_field, write_cycle_table, write_force_history, write_vtk, ForceHistoryWriter,
    PointField,
};

use crate::dae::TankProblem;
use crate::freesurface::{gradient_at, AsymptoticFlow};
use crate::meshkit::{bilinear_point, surface_gradients, Region};
use crate::quadrature::{shape, QuadratureRule};
use crate::{Vec3, GRAVITY};
use std::f64::consts::PI;

/// Forces on the hull at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceRecord {
    pub t: f64,
    /// Wave resistance `−F_x`, N.
    pub r: f64,
    /// Vertical force `F_z`, N.
    pub l: f64,
    /// `(L − L0)/L0`.
    pub l_star: f64,
    /// `R/L0`.
    pub r_star: f64,
}

impl ForceRecord {
    pub fn new(t: f64, force: Vec3, l0: f64) -> Self {
        ForceRecord {
            t,
            r: -force.x,
            l: force.z,
            l_star: (force.z - l0) / l0,
            r_star: -force.x / l0,
        }
    }
}

/// Hydrostatic lift `ρ g (4/3) π a b c` of a spheroid with the given semi-axes.
pub fn hydrostatic_lift(rho: f64, semi_axes: Vec3) -> f64 {
    rho * GRAVITY * 4.0 / 3.0 * PI * semi_axes.x * semi_axes.y * semi_axes.z
}

/// Bernoulli pressure `ρ (C − ∂φ/∂t − ∂φ∞/∂t − ½|∇φ∞ + ∇φ|² − g z)`, where
/// `dphi_dt` is the Eulerian rate of the perturbation potential.
pub fn bernoulli_pressure(rho: f64, flow: &AsymptoticFlow, t: f64, x: Vec3, grad_phi: Vec3, dphi_dt: f64) -> f64 {
    let s = flow.eval(x, t);
    rho * (flow.bernoulli_constant(t) - dphi_dt - s.dphi_dt - 0.5 * (s.grad + grad_phi).norm_squared() - GRAVITY * x.z)
}

/// Eulerian rate `∂φ/∂t = δφ/δt − v·∇φ` from the rate seen by a moving node.
pub fn eulerian_rate(ale_rate: f64, v: Vec3, grad_phi: Vec3) -> f64 {
    ale_rate - v.dot(&grad_phi)
}

/// `∮ p n dS` over the cells with the given corners, `p` evaluated at each
/// quadrature point as `pressure(cell, point, local gradients, shape values)`.
pub fn integrate_pressure<'a>(
    cells: impl IntoIterator<Item = (usize, &'a [Vec3; 4])>,
    rule: &QuadratureRule,
    mut pressure: impl FnMut(usize, &crate::meshkit::CellPoint, &[Vec3; 4], &[f64; 4]) -> f64,
) -> Vec3 {
    let mut f = Vec3::zeros();
    for (k, c) in cells {
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let cp = bilinear_point(c, q[0], q[1]);
            let grads = surface_gradients(&cp, q[0], q[1]);
            let s = shape(q[0], q[1]);
            f += cp.normal * (pressure(k, &cp, &grads, &s) * cp.jacobian * w);
        }
    }
    f
}

/// Total pressure force on the hull for a state `(y, ẏ)` of `problem`.
pub fn hull_force(problem: &TankProblem, y: &[f64], ydot: &[f64], t: f64) -> Vec3 {
    let n = problem.n();
    let nodes = problem.node_positions(&y[2 * n..]);
    let mesh = problem.mesh();
    let dofs = problem.dofs();
    let corners: Vec<(usize, [Vec3; 4])> = mesh
        .cells_in_region(Region::Hull)
        .into_iter()
        .map(|k| {
            let c = mesh.cells[k].nodes;
            (k, [nodes[c[0]], nodes[c[1]], nodes[c[2]], nodes[c[3]]])
        })
        .collect();
    let rho = problem.params().rho;
    let flow = problem.flow();
    integrate_pressure(
        corners.iter().map(|(k, c)| (*k, c)),
        &QuadratureRule::gauss(2),
        |k, cp, grads, s| {
            let cd = &dofs.cell_dofs[k];
            let phi = cd.map(|d| y[d]);
            let gamma = cd.map(|d| y[n + d]);
            let g = gradient_at(cp, grads, s, &phi, &gamma);
            let rate: f64 = (0..4).map(|a| s[a] * ydot[cd[a]]).sum();
            bernoulli_pressure(rho, flow, t, cp.point, g, rate)
        },
    )
}

/// Force record for a state, normalized by the analytic hydrostatic lift.
pub fn force_record(problem: &TankProblem, y: &[f64], ydot: &[f64], t: f64, l0: f64) -> ForceRecord {
    ForceRecord::new(t, hull_force(problem, y, ydot, t), l0)
}

/// Nodal pressure: Bernoulli pressure at each node averaged over the cells of
/// the patch of the node's first DOF.
pub fn nodal_pressure(problem: &TankProblem, y: &[f64], ydot: &[f64], t: f64) -> Vec<f64> {
    let n = problem.n();
    let nodes = problem.node_positions(&y[2 * n..]);
    let mesh = problem.mesh();
    let dofs = problem.dofs();
    let rho = problem.params().rho;
    let uv = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let mut sum = vec![0.0; mesh.nodes.len()];
    let mut count = vec![0usize; mesh.nodes.len()];
    for (k, cell) in mesh.cells.iter().enumerate() {
        let c = cell.nodes.map(|i| nodes[i]);
        let cd = &dofs.cell_dofs[k];
        let phi = cd.map(|d| y[d]);
        let gamma = cd.map(|d| y[n + d]);
        for a in 0..4 {
            let node = cell.nodes[a];
            if dofs.dofs[dofs.node_dofs[node][0]].patch != cell.patch {
                continue;
            }
            let (u, v) = uv[a];
            let cp = bilinear_point(&c, u, v);
            let grads = surface_gradients(&cp, u, v);
            let s = shape(u, v);
            let g = gradient_at(&cp, &grads, &s, &phi, &gamma);
            let vel = if problem.is_fs(cd[a]) {
                Vec3::new(0.0, 0.0, ydot[2 * n + cd[a]])
            } else {
                Vec3::zeros()
            };
            let rate = eulerian_rate(ydot[cd[a]], vel, g);
            sum[node] += bernoulli_pressure(rho, problem.flow(), t, cp.point, g, rate);
            count[node] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 }).collect()
}
