use crate::dae::TankProblem;
use crate::meshkit::{DofLayout, NodeOrigin, SurfaceMesh};
use crate::{Error, Result};

fn value_at(
    old_mesh: &SurfaceMesh,
    old: &DofLayout,
    new_mesh: &SurfaceMesh,
    values: &[f64],
    node: usize,
    patch: usize,
) -> Result<f64> {
    if node < old_mesh.nodes.len() {
        if let Some(d) = old.dof_of(node, patch) {
            return Ok(values[d]);
        }
    }
    let parents: Vec<usize> = match new_mesh.origins[node] {
        NodeOrigin::Edge(e) => e.to_vec(),
        NodeOrigin::Center(c) => c.to_vec(),
        NodeOrigin::Initial => {
            return Err(Error::Invalid(format!("node {node} has no value on the old mesh")));
        }
    };
    let w = 1.0 / parents.len() as f64;
    let mut s = 0.0;
    for p in parents {
        s += w * value_at(old_mesh, old, new_mesh, values, p, patch)?;
    }
    Ok(s)
}

/// Interpolate a per-DOF field onto a refinement of its mesh. Surviving DOFs
/// keep their values, new DOFs take the bilinear interpolant of their parent
/// cell and hanging DOFs their constraint combination.
pub fn transfer_dof_field(
    old_mesh: &SurfaceMesh,
    old: &DofLayout,
    new_mesh: &SurfaceMesh,
    new: &DofLayout,
    values: &[f64],
) -> Result<Vec<f64>> {
    if new_mesh.generation() != old_mesh.generation() && new_mesh.parent_generation() != Some(old_mesh.generation()) {
        return Err(Error::Invalid("the new mesh is not a refinement of the old one".into()));
    }
    if old.mesh_generation() != old_mesh.generation() || new.mesh_generation() != new_mesh.generation() {
        return Err(Error::Invalid("DOF layout does not belong to its mesh".into()));
    }
    if values.len() != old.len() {
        return Err(Error::Invalid(format!("field has {} values for {} DOFs", values.len(), old.len())));
    }
    let mut out: Vec<f64> = Vec::with_capacity(new.len());
    for d in &new.dofs {
        out.push(value_at(old_mesh, old, new_mesh, values, d.node, d.patch)?);
    }
    fn resolved(dofs: &DofLayout, v: &[f64], i: usize) -> f64 {
        match &dofs.constraints[i] {
            None => v[i],
            Some(c) => c.parents.iter().zip(&c.weights).map(|(p, w)| w * resolved(dofs, v, *p)).sum(),
        }
    }
    Ok((0..new.len()).map(|i| resolved(new, &out, i)).collect())
}

/// Move `(y, ẏ)` from `old` to `new`, whose mesh refines the old one.
/// Pinned elevations take the reference values of the new layout.
pub fn transfer_solution(old: &TankProblem, new: &TankProblem, y: &[f64], ydot: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n0, n1) = (old.n(), new.n());
    let mut y2 = vec![0.0; 3 * n1];
    let mut yd2 = vec![0.0; 3 * n1];
    for b in 0..3 {
        let r0 = b * n0..(b + 1) * n0;
        let r1 = b * n1..(b + 1) * n1;
        y2[r1.clone()].copy_from_slice(&transfer_dof_field(old.mesh(), old.dofs(), new.mesh(), new.dofs(), &y[r0.clone()])?);
        yd2[r1].copy_from_slice(&transfer_dof_field(old.mesh(), old.dofs(), new.mesh(), new.dofs(), &ydot[r0])?);
    }
    for i in 0..n1 {
        if !new.is_fs(i) {
            y2[2 * n1 + i] = new.z_ref()[i];
            yd2[2 * n1 + i] = 0.0;
        }
    }
    Ok((y2, yd2))
}
