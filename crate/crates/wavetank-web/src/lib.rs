//! WebAssembly bindings for a small interactive towing tank.

use wasm_bindgen::prelude::*;
use wavetank::bem::QuadSettings;
use wavetank::dae::{steady_solve, NewtonConfig, TankProblem};
use wavetank::freesurface::{airy_dispersion, AsymptoticFlow, FsParams};
use wavetank::meshkit::{assign_double_nodes, build_domain, DomainSpec, Region};
use wavetank::postproc::{force_record, hydrostatic_lift, integrate_pressure};
use wavetank::quadrature::QuadratureRule;
use wavetank::{Vec3, GRAVITY};

/// Tank small enough to solve in the browser within a second or two.
pub fn demo_spec(d_over_f: f64, curvature_cycles: usize) -> DomainSpec {
    DomainSpec {
        submergence: 2.0 / d_over_f,
        x_min: -30.0,
        x_max: 35.0,
        half_width: 15.0,
        depth: 12.0,
        fs_near_x: (-10.0, 15.0),
        fs_near_y: 5.0,
        fs_cell: 2.5,
        fs_growth: 1.3,
        fs_max_cell: 7.5,
        wall_cell: 10.0,
        curvature_cycles,
        hull_max_diagonal: 3.0,
        ..DomainSpec::default()
    }
}

/// Angular frequency and period of a linear wave.
pub fn wave_frequency(k: f64, h: f64) -> (f64, f64) {
    let w = airy_dispersion(k, h);
    (w, 2.0 * std::f64::consts::PI / w)
}

#[derive(Clone, Debug)]
pub struct SteadyWaves {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub resistance: f64,
    pub lift: f64,
    pub lift_star: f64,
    pub resistance_star: f64,
    pub iterations: usize,
    pub dofs: usize,
}

/// Steady free surface behind the default spheroid, with the elevation along
/// the row of free-surface nodes closest to the centerline.
pub fn solve_steady(froude: f64, d_over_f: f64) -> wavetank::Result<SteadyWaves> {
    if !(froude >= 0.0 && froude <= 1.5) {
        return Err(wavetank::Error::Config(format!("Froude number {froude} outside [0, 1.5]")));
    }
    let spec = demo_spec(d_over_f, 1);
    spec.validate()?;
    let mesh = build_domain(&spec)?;
    let dofs = assign_double_nodes(&mesh);
    let u = froude * (GRAVITY * spec.hull_length).sqrt();
    let p = TankProblem::new(mesh, dofs, AsymptoticFlow::uniform(u), FsParams::default(), QuadSettings::default())?;
    let (y, rep) = steady_solve(&p, &p.rest_state(), &NewtonConfig::default())?;
    let l0 = hydrostatic_lift(1000.0, Vec3::new(0.5 * spec.hull_length, spec.hull_radius, spec.hull_radius));
    let f = force_record(&p, &y, &vec![0.0; y.len()], f64::INFINITY, l0);
    let n = p.n();
    let mut row: Vec<(f64, f64)> = Vec::new();
    let ymin = (0..n)
        .filter(|&i| p.is_fs(i))
        .map(|i| p.mesh().nodes[p.dofs().dofs[i].node].y.abs())
        .fold(f64::MAX, f64::min);
    for i in (0..n).filter(|&i| p.is_fs(i)) {
        let x = p.mesh().nodes[p.dofs().dofs[i].node];
        if (x.y.abs() - ymin).abs() < 1e-9 && x.y >= 0.0 {
            row.push((x.x, y[2 * n + i]));
        }
    }
    row.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SteadyWaves {
        x: row.iter().map(|r| r.0).collect(),
        eta: row.iter().map(|r| r.1).collect(),
        resistance: f.r,
        lift: f.l,
        lift_star: f.l_star,
        resistance_star: f.r_star,
        iterations: rep.iterations,
        dofs: n,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct HullStats {
    pub hull_cells: usize,
    pub nodes: usize,
    pub dofs: usize,
    /// Buoyancy of the discrete hull relative to the exact spheroid, minus one.
    pub buoyancy_error: f64,
}

pub fn hull_stats(curvature_cycles: usize) -> wavetank::Result<HullStats> {
    let spec = demo_spec(0.8, curvature_cycles.min(5));
    let mesh = build_domain(&spec)?;
    let dofs = assign_double_nodes(&mesh);
    let cells: Vec<[Vec3; 4]> = mesh.cells_in_region(Region::Hull).into_iter().map(|k| mesh.corners(k)).collect();
    let f = integrate_pressure(cells.iter().enumerate(), &QuadratureRule::gauss(2), |_, cp, _, _| {
        -1000.0 * GRAVITY * cp.point.z
    });
    let l0 = hydrostatic_lift(1000.0, Vec3::new(5.0, 1.0, 1.0));
    Ok(HullStats {
        hull_cells: cells.len(),
        nodes: mesh.nodes.len(),
        dofs: dofs.len(),
        buoyancy_error: f.z / l0 - 1.0,
    })
}

fn js_err(e: wavetank::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[ω, T]` of a linear wave of wavenumber `k` in depth `h`.
#[wasm_bindgen]
pub fn dispersion(k: f64, h: f64) -> Vec<f64> {
    let (w, t) = wave_frequency(k, h);
    vec![w, t]
}

#[wasm_bindgen]
pub struct SteadyResult {
    inner: SteadyWaves,
}

#[wasm_bindgen]
impl SteadyResult {
    pub fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }
    pub fn eta(&self) -> Vec<f64> {
        self.inner.eta.clone()
    }
    pub fn resistance(&self) -> f64 {
        self.inner.resistance
    }
    pub fn lift(&self) -> f64 {
        self.inner.lift
    }
    pub fn lift_star(&self) -> f64 {
        self.inner.lift_star
    }
    pub fn resistance_star(&self) -> f64 {
        self.inner.resistance_star
    }
    pub fn iterations(&self) -> usize {
        self.inner.iterations
    }
    pub fn dofs(&self) -> usize {
        self.inner.dofs
    }
}

#[wasm_bindgen]
pub fn steady(froude: f64, d_over_f: f64) -> Result<SteadyResult, JsError> {
    solve_steady(froude, d_over_f).map(|inner| SteadyResult { inner }).map_err(js_err)
}

/// `[hull cells, nodes, DOFs, relative buoyancy error]` of the demo mesh.
#[wasm_bindgen]
pub fn hull_mesh(curvature_cycles: usize) -> Result<Vec<f64>, JsError> {
    let s = hull_stats(curvature_cycles).map_err(js_err)?;
    Ok(vec![s.hull_cells as f64, s.nodes as f64, s.dofs as f64, s.buoyancy_error])
}
