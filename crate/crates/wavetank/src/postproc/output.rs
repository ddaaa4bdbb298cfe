use super::ForceRecord;
use crate::meshkit::{DofLayout, Region, SurfaceMesh};
use crate::{Error, Result, Vec3};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// A nodal field written to a snapshot.
#[derive(Clone, Copy, Debug)]
pub enum PointField<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [Vec3]),
}

fn resolved(dofs: &DofLayout, values: &[f64], i: usize) -> f64 {
    match &dofs.constraints[i] {
        None => values[i],
        Some(c) => c.parents.iter().zip(&c.weights).map(|(p, w)| w * resolved(dofs, values, *p)).sum(),
    }
}

/// Map a per-DOF array to the nodes. A node with several DOFs takes the one of
/// the lowest patch; hanging DOFs take their constrained value.
pub fn node_field(mesh: &SurfaceMesh, dofs: &DofLayout, values: &[f64]) -> Vec<f64> {
    (0..mesh.nodes.len())
        .map(|node| {
            dofs.node_dofs[node]
                .iter()
                .min_by_key(|&&d| dofs.dofs[d].patch)
                .map_or(0.0, |&d| resolved(dofs, values, d))
        })
        .collect()
}

fn region_id(r: Region) -> u8 {
    match r {
        Region::FreeSurface => 0,
        Region::Hull => 1,
        Region::Bottom => 2,
        Region::Inflow => 3,
        Region::FarField => 4,
    }
}

/// Legacy ASCII VTK unstructured grid of the boundary mesh with the given
/// point fields and the region id of every cell.
pub fn format_vtk(mesh: &SurfaceMesh, nodes: &[Vec3], fields: &[PointField]) -> Result<String> {
    let np = nodes.len();
    for f in fields {
        let (name, len) = match f {
            PointField::Scalar(n, v) => (n, v.len()),
            PointField::Vector(n, v) => (n, v.len()),
        };
        if len != np {
            return Err(Error::Invalid(format!("field {name} has {len} values for {np} points")));
        }
    }
    let mut s = String::new();
    let nc = mesh.cells.len();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nwavetank boundary\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {np} double");
    for p in nodes {
        let _ = writeln!(s, "{:.8e} {:.8e} {:.8e}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {nc} {}", 5 * nc);
    for c in &mesh.cells {
        let [a, b, cc, d] = c.nodes;
        let _ = writeln!(s, "4 {a} {b} {cc} {d}");
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("9\n");
    }
    let _ = writeln!(s, "CELL_DATA {nc}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for k in 0..nc {
        let _ = writeln!(s, "{}", region_id(mesh.region(k)));
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {np}");
    }
    for f in fields {
        match f {
            PointField::Scalar(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v.iter() {
                    let _ = writeln!(s, "{x:.8e}");
                }
            }
            PointField::Vector(name, v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v.iter() {
                    let _ = writeln!(s, "{:.8e} {:.8e} {:.8e}", x.x, x.y, x.z);
                }
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &SurfaceMesh, nodes: &[Vec3], fields: &[PointField]) -> Result<()> {
    let s = format_vtk(mesh, nodes, fields)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

const FORCE_HEADER: &str = "t,R,L,Lstar,Rstar";

fn force_line(r: &ForceRecord) -> String {
    format!("{},{},{},{},{}", r.t, r.r, r.l, r.l_star, r.r_star)
}

/// Force history CSV that is flushed after every record, so a crashed run
/// still leaves the forces computed so far.
pub struct ForceHistoryWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl ForceHistoryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = ForceHistoryWriter {
            out: BufWriter::new(f),
            path: path.to_path_buf(),
        };
        w.line(FORCE_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn append(&mut self, r: &ForceRecord) -> Result<()> {
        self.line(&force_line(r))
    }
}

pub fn write_force_history(path: &Path, records: &[ForceRecord]) -> Result<()> {
    let mut w = ForceHistoryWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

/// One refinement cycle of a steady run.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub nodes: usize,
    pub newton_iters: usize,
    pub jacobians: usize,
    pub drag: f64,
    pub lift: f64,
    pub wall_seconds: f64,
}

pub fn format_cycle_table(records: &[CycleRecord]) -> String {
    let mut s = String::from("cycle,nodes,newton_iters,jacobians,drag_N,lift_N,wall_seconds\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.3}",
            r.cycle, r.nodes, r.newton_iters, r.jacobians, r.drag, r.lift, r.wall_seconds
        );
    }
    s
}

pub fn write_cycle_table(path: &Path, records: &[CycleRecord]) -> Result<()> {
    std::fs::write(path, format_cycle_table(records)).map_err(|e| Error::io(path, e))
}
