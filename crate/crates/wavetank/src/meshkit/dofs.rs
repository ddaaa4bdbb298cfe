use super::mesh::{Patch, Region, SurfaceMesh};
use crate::Vec3;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Whether the vertical coordinate of a DOF is an unknown (free surface) or
/// pinned to its reference value (basin).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ZClass {
    FreeSurface,
    Basin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dof {
    pub node: usize,
    pub patch: usize,
    pub region: Region,
    pub bc: BoundaryCondition,
    pub zclass: ZClass,
}

/// Hanging DOF value as a weighted sum of parent DOFs of the same patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DofConstraint {
    pub parents: [usize; 2],
    pub weights: [f64; 2],
}

/// One collocation DOF per (node, patch) pair, so nodes on patch boundaries
/// are doubled (or tripled at box corners).
#[derive(Clone, Debug)]
pub struct DofLayout {
    pub dofs: Vec<Dof>,
    pub cell_dofs: Vec<[usize; 4]>,
    pub node_dofs: Vec<Vec<usize>>,
    pub constraints: Vec<Option<DofConstraint>>,
    mesh_generation: u64,
}

impl DofLayout {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn mesh_generation(&self) -> u64 {
        self.mesh_generation
    }

    /// Collocation point of DOF `i`: its geometric node.
    pub fn collocation_point(&self, mesh: &SurfaceMesh, i: usize) -> Vec3 {
        mesh.nodes[self.dofs[i].node]
    }

    pub fn is_hanging(&self, i: usize) -> bool {
        self.constraints[i].is_some()
    }

    pub fn dof_of(&self, node: usize, patch: usize) -> Option<usize> {
        self.node_dofs[node]
            .iter()
            .copied()
            .find(|&d| self.dofs[d].patch == patch)
    }

    pub fn count_where(&self, f: impl Fn(&Dof) -> bool) -> usize {
        self.dofs.iter().filter(|d| f(d)).count()
    }

    /// Cells incident to each DOF.
    pub fn dof_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for (k, cd) in self.cell_dofs.iter().enumerate() {
            for &d in cd {
                out[d].push(k);
            }
        }
        out
    }
}

/// Layout with Dirichlet conditions on the inflow face and Neumann elsewhere.
pub fn assign_double_nodes(mesh: &SurfaceMesh) -> DofLayout {
    assign_dofs_with(mesh, |patch, _| {
        if patch.region == Region::Inflow {
            BoundaryCondition::Dirichlet
        } else {
            BoundaryCondition::Neumann
        }
    })
}

/// Layout with a caller-chosen boundary condition per patch.
pub fn assign_dofs_with(
    mesh: &SurfaceMesh,
    bc_of: impl Fn(&Patch, usize) -> BoundaryCondition,
) -> DofLayout {
    let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for c in &mesh.cells {
        for &n in &c.nodes {
            pairs.insert((n, c.patch), 0);
        }
    }
    let mut dofs = Vec::with_capacity(pairs.len());
    let mut node_dofs = vec![Vec::new(); mesh.nodes.len()];
    for (i, ((node, patch), slot)) in pairs.iter_mut().enumerate() {
        *slot = i;
        let p = &mesh.patches[*patch];
        dofs.push(Dof {
            node: *node,
            patch: *patch,
            region: p.region,
            bc: bc_of(p, *patch),
            zclass: if p.region == Region::FreeSurface {
                ZClass::FreeSurface
            } else {
                ZClass::Basin
            },
        });
        node_dofs[*node].push(i);
    }
    let cell_dofs = mesh
        .cells
        .iter()
        .map(|c| {
            let mut d = [0usize; 4];
            for a in 0..4 {
                d[a] = pairs[&(c.nodes[a], c.patch)];
            }
            d
        })
        .collect();
    let mut constraints = vec![None; dofs.len()];
    for h in &mesh.hanging {
        let i = pairs[&(h.node, h.patch)];
        constraints[i] = Some(DofConstraint {
            parents: [pairs[&(h.parents[0], h.patch)], pairs[&(h.parents[1], h.patch)]],
            weights: h.weights,
        });
    }
    DofLayout {
        dofs,
        cell_dofs,
        node_dofs,
        constraints,
        mesh_generation: mesh.generation(),
    }
}
