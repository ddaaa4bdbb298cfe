//! Refinement cycles driven by a jump indicator on the free-surface elevation.

mod transfer;

pub use crate::postproc::CycleRecord;
pub use transfer::{transfer_dof_field, transfer_solution};

use crate::dae::{steady_solve, NewtonConfig, TankProblem};
use crate::meshkit::{Region, SurfaceMesh};
use crate::postproc::force_record;
use crate::quadrature::{gauss_legendre, shape_grad};
use crate::{Error, Result, Vec3};
use std::collections::HashMap;
use std::time::Instant;

/// Elevation `z − z_ref` of every mesh node that carries a free-surface DOF,
/// zero elsewhere.
pub fn node_elevation(problem: &TankProblem, y: &[f64]) -> Vec<f64> {
    let n = problem.n();
    let mut eta = vec![0.0; problem.mesh().nodes.len()];
    for i in 0..n {
        if problem.is_fs(i) {
            eta[problem.dofs().dofs[i].node] = y[2 * n + i] - problem.z_ref()[i];
        }
    }
    eta
}

/// Reference coordinates of the horizontal projection `p` in a cell.
fn local_coords(c: &[Vec3; 4], p: (f64, f64)) -> (f64, f64) {
    let (mut u, mut v) = (0.5, 0.5);
    for _ in 0..20 {
        let s = crate::quadrature::shape(u, v);
        let g = shape_grad(u, v);
        let (mut x, mut y, mut xu, mut xv, mut yu, mut yv) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for a in 0..4 {
            x += s[a] * c[a].x;
            y += s[a] * c[a].y;
            xu += g[a][0] * c[a].x;
            xv += g[a][1] * c[a].x;
            yu += g[a][0] * c[a].y;
            yv += g[a][1] * c[a].y;
        }
        let det = xu * yv - xv * yu;
        let (rx, ry) = (p.0 - x, p.1 - y);
        let du = (yv * rx - xv * ry) / det;
        let dv = (-yu * rx + xu * ry) / det;
        u += du;
        v += dv;
        if du.abs() + dv.abs() < 1e-14 {
            break;
        }
    }
    (u, v)
}

/// Horizontal gradient of the bilinear interpolant of `vals` at `p`.
fn horizontal_gradient(c: &[Vec3; 4], vals: &[f64; 4], p: (f64, f64)) -> (f64, f64) {
    let (u, v) = local_coords(c, p);
    let g = shape_grad(u, v);
    let (mut xu, mut xv, mut yu, mut yv, mut eu, mut ev) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for a in 0..4 {
        xu += g[a][0] * c[a].x;
        xv += g[a][1] * c[a].x;
        yu += g[a][0] * c[a].y;
        yv += g[a][1] * c[a].y;
        eu += g[a][0] * vals[a];
        ev += g[a][1] * vals[a];
    }
    let det = xu * yv - xv * yu;
    ((yv * eu - yu * ev) / det, (-xv * eu + xu * ev) / det)
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Kelly indicator `η_K² = h_K/24 ∮ [∂η/∂n]² ds` on every free-surface cell,
/// from the jumps of the elevation gradient across interior edges. Other
/// cells get zero. `eta` holds one value per mesh node.
pub fn kelly_indicator(mesh: &SurfaceMesh, eta: &[f64]) -> Vec<f64> {
    let fs: Vec<usize> = mesh.cells_in_region(Region::FreeSurface);
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &k in &fs {
        let c = mesh.cells[k].nodes;
        for e in 0..4 {
            edges.entry(key(c[e], c[(e + 1) % 4])).or_default().push(k);
        }
    }
    let parents: HashMap<usize, [usize; 2]> = mesh
        .hanging
        .iter()
        .filter(|h| mesh.patches[h.patch].region == Region::FreeSurface)
        .map(|h| (h.node, h.parents))
        .collect();
    let others = |a: usize, b: usize, k: usize| -> Vec<usize> {
        edges.get(&key(a, b)).map(|v| v.iter().copied().filter(|&o| o != k).collect()).unwrap_or_default()
    };
    let (gx, gw) = gauss_legendre(2);
    let mut out = vec![0.0; mesh.cells.len()];
    for &k in &fs {
        let c = mesh.corners(k);
        let nodes = mesh.cells[k].nodes;
        let vals = nodes.map(|i| eta[i]);
        let mut sum = 0.0;
        for e in 0..4 {
            let (a, b) = (nodes[e], nodes[(e + 1) % 4]);
            // pieces of the edge with the neighbor across each
            let mut pieces: Vec<(usize, usize, usize)> = Vec::new();
            if let Some(&o) = others(a, b, k).first() {
                pieces.push((a, b, o));
            } else if let Some(m) = mesh.edge_midpoint(a, b) {
                for (p, q) in [(a, m), (m, b)] {
                    if let Some(&o) = others(p, q, k).first() {
                        pieces.push((p, q, o));
                    }
                }
            } else {
                for (h, other) in [(a, b), (b, a)] {
                    if let Some(par) = parents.get(&h) {
                        if par.contains(&other) {
                            if let Some(&o) = others(par[0], par[1], k).first() {
                                pieces.push((a, b, o));
                            }
                        }
                    }
                }
            }
            for (p, q, o) in pieces {
                let (pa, pb) = (mesh.nodes[p], mesh.nodes[q]);
                let d = pb - pa;
                let len = (d.x * d.x + d.y * d.y).sqrt();
                let nrm = (d.y / len, -d.x / len);
                let co = mesh.corners(o);
                let vo = mesh.cells[o].nodes.map(|i| eta[i]);
                for (x, w) in gx.iter().zip(&gw) {
                    let pt = (pa.x + x * d.x, pa.y + x * d.y);
                    let g1 = horizontal_gradient(&c, &vals, pt);
                    let g2 = horizontal_gradient(&co, &vo, pt);
                    let j = (g1.0 - g2.0) * nrm.0 + (g1.1 - g2.1) * nrm.1;
                    sum += w * len * j * j;
                }
            }
        }
        out[k] = mesh.cell_diagonal(k) / 24.0 * sum;
    }
    out
}

/// Flag the `⌈fraction·N⌉` free-surface cells with the largest indicators,
/// preferring lower cell ids among equal values.
pub fn mark_top_fraction(mesh: &SurfaceMesh, errors: &[f64], fraction: f64) -> Result<Vec<bool>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("refinement fraction must lie in (0, 1], got {fraction}")));
    }
    let mut fs = mesh.cells_in_region(Region::FreeSurface);
    let count = ((fraction * fs.len() as f64) - 1e-9).ceil() as usize;
    fs.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
    let mut flags = vec![false; mesh.cells.len()];
    for &k in fs.iter().take(count) {
        flags[k] = true;
    }
    Ok(flags)
}

/// Refine the free surface where the elevation indicator is largest and move
/// the state to the new mesh.
pub fn refine_step(
    problem: &TankProblem,
    y: &[f64],
    ydot: &[f64],
    fraction: f64,
) -> Result<(TankProblem, Vec<f64>, Vec<f64>)> {
    let eta = node_elevation(problem, y);
    let errors = kelly_indicator(problem.mesh(), &eta);
    let flags = mark_top_fraction(problem.mesh(), &errors, fraction)?;
    let mesh = problem.mesh().refine_cells(&flags)?;
    let next = problem.with_mesh(mesh)?;
    let (y2, yd2) = transfer_solution(problem, &next, y, ydot)?;
    Ok((next, y2, yd2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleSettings {
    /// Refinements after the first solve; `0` solves once.
    pub cycles: usize,
    pub fraction: f64,
}

impl Default for CycleSettings {
    fn default() -> Self {
        CycleSettings {
            cycles: 6,
            fraction: 0.04,
        }
    }
}

pub struct SteadyRun {
    pub problem: TankProblem,
    pub y: Vec<f64>,
    pub records: Vec<CycleRecord>,
}

/// Steady solves on a sequence of adaptively refined meshes. Each solve
/// starts from the solution of the previous cycle transferred to the new
/// mesh. `observe` sees every converged cycle.
pub fn run_steady_cycles(
    problem: TankProblem,
    y0: Vec<f64>,
    settings: &CycleSettings,
    newton: &NewtonConfig,
    l0: f64,
    mut observe: impl FnMut(&TankProblem, &[f64], &CycleRecord) -> Result<()>,
) -> Result<SteadyRun> {
    let mut problem = problem;
    let mut y = y0;
    let mut records = Vec::new();
    for cycle in 0..=settings.cycles {
        let start = Instant::now();
        if cycle > 0 {
            let zero = vec![0.0; y.len()];
            let (p, y2, _) = refine_step(&problem, &y, &zero, settings.fraction)?;
            problem = p;
            y = y2;
        }
        let (ys, report) = steady_solve(&problem, &y, newton)?;
        y = ys;
        let zero = vec![0.0; y.len()];
        let f = force_record(&problem, &y, &zero, f64::INFINITY, l0);
        let rec = CycleRecord {
            cycle,
            nodes: problem.mesh().nodes.len(),
            newton_iters: report.iterations,
            jacobians: report.jacobians,
            drag: f.r,
            lift: f.l,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "cycle {cycle}: {} nodes, {} DOFs, {} Newton iterations, {} Jacobians, R = {:.6e} N, L = {:.6e} N",
            rec.nodes,
            problem.n(),
            rec.newton_iters,
            rec.jacobians,
            rec.drag,
            rec.lift
        );
        observe(&problem, &y, &rec)?;
        records.push(rec);
    }
    Ok(SteadyRun { problem, y, records })
}
