use super::geometry::GeometryDescriptor;
use super::mesh::{Cell, Patch, Region, SurfaceMesh};
use crate::{Error, Result, Vec3};
use std::collections::HashMap;

/// Geometric description of the tank and of the initial mesh resolution.
/// All lengths in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub hull_length: f64,
    pub hull_radius: f64,
    /// Depth of the hull axis below the undisturbed free surface.
    pub submergence: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub half_width: f64,
    pub depth: f64,
    /// Streamwise extent of the uniformly fine free-surface block.
    pub fs_near_x: (f64, f64),
    /// Lateral half-extent of the uniformly fine free-surface block.
    pub fs_near_y: f64,
    pub fs_cell: f64,
    pub fs_growth: f64,
    pub fs_max_cell: f64,
    pub wall_cell: f64,
    /// Side cells of the coarse hull along its axis.
    pub hull_stations: usize,
    pub curvature_cycles: usize,
    pub curvature_angle_deg: f64,
    pub hull_max_diagonal: f64,
    pub max_aspect_ratio: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        let l = 10.0;
        DomainSpec {
            hull_length: l,
            hull_radius: 1.0,
            submergence: 2.5,
            x_min: -15.0 * l,
            x_max: 15.0 * l,
            half_width: 5.0 * l,
            depth: 50.0,
            fs_near_x: (-0.75 * l, 1.5 * l),
            fs_near_y: 0.75 * l,
            fs_cell: 0.25 * l,
            fs_growth: 1.2,
            fs_max_cell: 0.85 * l,
            wall_cell: 2.5 * l,
            hull_stations: 2,
            curvature_cycles: 7,
            curvature_angle_deg: 20.0,
            hull_max_diagonal: 0.2 * l,
            max_aspect_ratio: 3.5,
        }
    }
}

impl DomainSpec {
    /// A small tank around the default hull for quick runs and tests.
    pub fn compact() -> Self {
        DomainSpec {
            x_min: -40.0,
            x_max: 40.0,
            half_width: 20.0,
            depth: 15.0,
            fs_near_x: (-10.0, 15.0),
            fs_near_y: 6.0,
            fs_cell: 2.5,
            fs_growth: 1.3,
            fs_max_cell: 7.5,
            wall_cell: 10.0,
            curvature_cycles: 2,
            hull_max_diagonal: 3.0,
            ..DomainSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("hull length", self.hull_length),
            ("hull radius", self.hull_radius),
            ("depth", self.depth),
            ("half width", self.half_width),
            ("free-surface cell size", self.fs_cell),
            ("wall cell size", self.wall_cell),
            ("curvature angle", self.curvature_angle_deg),
            ("hull diagonal threshold", self.hull_max_diagonal),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.submergence <= self.hull_radius {
            return Err(Error::Config(format!(
                "submergence {} m does not exceed the hull radius {} m: the hull would pierce the free surface",
                self.submergence, self.hull_radius
            )));
        }
        if self.submergence + self.hull_radius >= self.depth {
            return Err(Error::Config("hull touches the tank bottom".into()));
        }
        if self.x_min >= -0.5 * self.hull_length || self.x_max <= 0.5 * self.hull_length {
            return Err(Error::Config("tank is shorter than the hull".into()));
        }
        if self.half_width <= self.hull_radius {
            return Err(Error::Config("tank is narrower than the hull".into()));
        }
        if !(self.fs_growth >= 1.0) || self.fs_max_cell < self.fs_cell {
            return Err(Error::Config(
                "free-surface grading needs growth ≥ 1 and max cell ≥ near cell".into(),
            ));
        }
        Ok(())
    }

    pub fn hull_geometry(&self) -> GeometryDescriptor {
        GeometryDescriptor::Spheroid {
            center: Vec3::new(0.0, 0.0, -self.submergence),
            semi_axes: Vec3::new(0.5 * self.hull_length, self.hull_radius, self.hull_radius),
        }
    }
}

/// Incremental mesh construction with coordinate-based node deduplication.
pub struct MeshBuilder {
    nodes: Vec<Vec3>,
    keys: HashMap<[i64; 3], usize>,
    cells: Vec<Cell>,
    patches: Vec<Patch>,
    tol: f64,
}

impl MeshBuilder {
    pub fn new(tol: f64) -> Self {
        MeshBuilder {
            nodes: Vec::new(),
            keys: HashMap::new(),
            cells: Vec::new(),
            patches: Vec::new(),
            tol,
        }
    }

    pub fn node(&mut self, p: Vec3) -> usize {
        let key = [
            (p.x / self.tol).round() as i64,
            (p.y / self.tol).round() as i64,
            (p.z / self.tol).round() as i64,
        ];
        if let Some(&i) = self.keys.get(&key) {
            return i;
        }
        self.nodes.push(p);
        self.keys.insert(key, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn patch(&mut self, region: Region, geometry: GeometryDescriptor) -> usize {
        self.patches.push(Patch { region, geometry });
        self.patches.len() - 1
    }

    pub fn cell(&mut self, nodes: [usize; 4], patch: usize) {
        self.cells.push(Cell {
            nodes,
            patch,
            level: 0,
        });
    }

    /// Structured face on the plane `x[axis] = value`, spanned by coordinate
    /// arrays along `u_axis` and `v_axis`, oriented with normal `outward`.
    pub fn planar_face(
        &mut self,
        patch: usize,
        axis: usize,
        value: f64,
        (u_axis, us): (usize, &[f64]),
        (v_axis, vs): (usize, &[f64]),
        outward: Vec3,
    ) {
        let mut ids = vec![vec![0usize; vs.len()]; us.len()];
        for (i, &u) in us.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let mut p = Vec3::zeros();
                p[axis] = value;
                p[u_axis] = u;
                p[v_axis] = v;
                ids[i][j] = self.node(p);
            }
        }
        let mut eu = Vec3::zeros();
        eu[u_axis] = 1.0;
        let mut ev = Vec3::zeros();
        ev[v_axis] = 1.0;
        let flip = eu.cross(&ev).dot(&outward) < 0.0;
        for i in 0..us.len() - 1 {
            for j in 0..vs.len() - 1 {
                let q = [ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]];
                let q = if flip { [q[0], q[3], q[2], q[1]] } else { q };
                self.cell(q, patch);
            }
        }
    }

    pub fn finish(self, length_scale: f64) -> Result<SurfaceMesh> {
        SurfaceMesh::new(self.nodes, self.cells, self.patches, length_scale)
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
        .collect()
}

/// Spacings growing geometrically from `h0` up to `hmax`, rescaled to cover
/// exactly `dist`.
fn growing_spacings(dist: f64, h0: f64, growth: f64, hmax: f64) -> Vec<f64> {
    if dist <= 0.0 {
        return Vec::new();
    }
    let mut s = Vec::new();
    let mut total = 0.0;
    let mut h = h0;
    while total < dist {
        h = (h * growth).min(hmax);
        s.push(h);
        total += h;
    }
    // drop the last spacing if that gets closer to the target
    if s.len() > 1 && (total - dist) > 0.5 * s[s.len() - 1] {
        total -= s.pop().unwrap();
    }
    let scale = dist / total;
    s.iter().map(|h| h * scale).collect()
}

/// Coordinates on `[lo, hi]`, uniform with spacing ≈ `h0` on the near block and
/// graded outward from it.
pub fn graded_axis(lo: f64, hi: f64, near: (f64, f64), h0: f64, growth: f64, hmax: f64) -> Vec<f64> {
    let a = near.0.max(lo);
    let b = near.1.min(hi);
    let n = (((b - a) / h0).round() as usize).max(1);
    let h = (b - a) / n as f64;
    let mut xs: Vec<f64> = Vec::new();
    let left = growing_spacings(a - lo, h, growth, hmax);
    let mut x = a;
    let mut rev = vec![a];
    for s in &left {
        x -= s;
        rev.push(x);
    }
    if let Some(last) = rev.last_mut() {
        if !left.is_empty() {
            *last = lo;
        }
    }
    rev.reverse();
    xs.extend_from_slice(&rev[..rev.len() - 1]);
    xs.extend(uniform(a, b, n));
    let right = growing_spacings(hi - b, h, growth, hmax);
    let mut x = b;
    for (k, s) in right.iter().enumerate() {
        x += s;
        xs.push(if k + 1 == right.len() { hi } else { x });
    }
    xs
}

/// Axis-aligned box `[lo, hi]` meshed with `n` cells per edge, one patch per
/// face, outward normals. Every face is a `FarField` patch.
pub fn box_mesh(lo: Vec3, hi: Vec3, n: usize) -> Result<SurfaceMesh> {
    let mut b = MeshBuilder::new(1e-9 * (hi - lo).norm());
    let axes: Vec<Vec<f64>> = (0..3).map(|k| uniform(lo[k], hi[k], n)).collect();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for (value, sign) in [(lo[axis], -1.0), (hi[axis], 1.0)] {
            let mut normal = Vec3::zeros();
            normal[axis] = sign;
            let mut point = Vec3::zeros();
            point[axis] = value;
            let p = b.patch(Region::FarField, GeometryDescriptor::Plane { point, normal });
            b.planar_face(p, axis, value, (u, &axes[u]), (v, &axes[v]), normal);
        }
    }
    b.finish((hi - lo).norm())
}

/// Coarse closed hull: the surface of the chart cube `[-1,1]³`, split into
/// `stations` cells along x on its four side faces and one cell per end
/// face, mapped radially onto the spheroid. Normals point into the body.
fn add_coarse_hull(b: &mut MeshBuilder, patch: usize, geometry: &GeometryDescriptor, stations: usize) {
    let mut chart = MeshBuilder::new(1e-9);
    let xs = uniform(-1.0, 1.0, stations);
    let ys = uniform(-1.0, 1.0, 1);
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for (value, sign) in [(-1.0, -1.0), (1.0, 1.0)] {
            let mut normal = Vec3::zeros();
            normal[axis] = sign;
            let pick = |k: usize| if k == 0 { &xs } else { &ys };
            chart.planar_face(0, axis, value, (u, pick(u)), (v, pick(v)), normal);
        }
    }
    let (center, axes) = match *geometry {
        GeometryDescriptor::Spheroid { center, semi_axes } => (center, semi_axes),
        _ => unreachable!("hull geometry is a spheroid"),
    };
    let ids: Vec<usize> = chart
        .nodes
        .iter()
        .map(|q| b.node(center + (q / q.norm()).component_mul(&axes)))
        .collect();
    for c in &chart.cells {
        let q = [ids[c.nodes[0]], ids[c.nodes[3]], ids[c.nodes[2]], ids[c.nodes[1]]];
        b.cell(q, patch);
    }
}

/// Flag hull cells whose corner normals spread more than `angle` or whose
/// diagonal exceeds `max_diag`.
pub fn curvature_flags(mesh: &SurfaceMesh, angle_deg: f64, max_diag: f64) -> Vec<bool> {
    let cos_lim = angle_deg.to_radians().cos();
    (0..mesh.cells.len())
        .map(|k| {
            let patch = &mesh.patches[mesh.cells[k].patch];
            if patch.region != Region::Hull {
                return false;
            }
            let c = mesh.corners(k);
            let n: Vec<Vec3> = c.iter().map(|p| patch.geometry.normal_at(*p)).collect();
            let mut spread = false;
            for i in 0..4 {
                for j in i + 1..4 {
                    if n[i].dot(&n[j]) < cos_lim {
                        spread = true;
                    }
                }
            }
            spread || mesh.cell_diagonal(k) > max_diag
        })
        .collect()
}

/// Build the towing-tank boundary: graded free surface, coarse walls and a
/// curvature-refined spheroidal hull.
pub fn build_domain(spec: &DomainSpec) -> Result<SurfaceMesh> {
    spec.validate()?;
    let l = spec.hull_length;
    let mut b = MeshBuilder::new(1e-9 * l);
    let (x0, x1) = (spec.x_min, spec.x_max);
    let (y0, y1) = (-spec.half_width, spec.half_width);
    let z0 = -spec.depth;
    let plane = |point: Vec3, normal: Vec3| GeometryDescriptor::Plane { point, normal };

    let xs = graded_axis(x0, x1, spec.fs_near_x, spec.fs_cell, spec.fs_growth, spec.fs_max_cell);
    let ys = graded_axis(
        y0,
        y1,
        (-spec.fs_near_y, spec.fs_near_y),
        spec.fs_cell,
        spec.fs_growth,
        spec.fs_max_cell,
    );
    let ez = Vec3::new(0.0, 0.0, 1.0);
    let fs = b.patch(Region::FreeSurface, plane(Vec3::zeros(), ez));
    b.planar_face(fs, 2, 0.0, (0, &xs), (1, &ys), ez);

    let count = |len: f64| ((len / spec.wall_cell).ceil() as usize).max(1);
    let wx = uniform(x0, x1, count(x1 - x0));
    let wy = uniform(y0, y1, count(y1 - y0));
    let wz = uniform(z0, 0.0, count(-z0));

    let bottom = b.patch(Region::Bottom, plane(Vec3::new(0.0, 0.0, z0), -ez));
    b.planar_face(bottom, 2, z0, (0, &wx), (1, &wy), -ez);
    let ex = Vec3::new(1.0, 0.0, 0.0);
    let inflow = b.patch(Region::Inflow, plane(Vec3::new(x0, 0.0, 0.0), -ex));
    b.planar_face(inflow, 0, x0, (1, &wy), (2, &wz), -ex);
    let outflow = b.patch(Region::FarField, plane(Vec3::new(x1, 0.0, 0.0), ex));
    b.planar_face(outflow, 0, x1, (1, &wy), (2, &wz), ex);
    let ey = Vec3::new(0.0, 1.0, 0.0);
    for (y, sign) in [(y0, -1.0), (y1, 1.0)] {
        let side = b.patch(Region::FarField, plane(Vec3::new(0.0, y, 0.0), ey * sign));
        b.planar_face(side, 1, y, (0, &wx), (2, &wz), ey * sign);
    }

    let hull_geom = spec.hull_geometry();
    let hull = b.patch(Region::Hull, hull_geom);
    add_coarse_hull(&mut b, hull, &hull_geom, spec.hull_stations.max(1));

    let mut mesh = b.finish(l)?;
    for _ in 0..spec.curvature_cycles {
        let flags = curvature_flags(&mesh, spec.curvature_angle_deg, spec.hull_max_diagonal);
        if !flags.iter().any(|f| *f) {
            break;
        }
        mesh = mesh.refine_cells(&flags)?;
    }
    let worst = (0..mesh.cells.len())
        .map(|k| mesh.cell_aspect_ratio(k))
        .fold(0.0, f64::max);
    if worst > spec.max_aspect_ratio {
        log::warn!(
            "largest cell aspect ratio {worst:.2} exceeds the target {}",
            spec.max_aspect_ratio
        );
    }
    Ok(mesh)
}
