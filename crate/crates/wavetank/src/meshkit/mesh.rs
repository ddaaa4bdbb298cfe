use super::geometry::{
    aspect_ratio, bilinear_point, diagonal, min_jacobian, CellPoint, GeometryDescriptor,
};
use crate::{Error, Result, Vec3};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Boundary region of the towing tank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    FreeSurface,
    Hull,
    Bottom,
    Inflow,
    FarField,
}

/// A smooth piece of boundary. Each face of the tank box is its own patch so
/// that every sharp edge carries duplicated degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Patch {
    pub region: Region,
    pub geometry: GeometryDescriptor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    /// Corner nodes, counter-clockwise seen from outside the fluid.
    pub nodes: [usize; 4],
    pub patch: usize,
    pub level: u8,
}

/// How a node came into existence; used to interpolate fields after refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOrigin {
    Initial,
    Edge([usize; 2]),
    Center([usize; 4]),
}

/// A node that lies on the interior of an unrefined neighbor's edge.
#[derive(Clone, Debug, PartialEq)]
pub struct HangingConstraint {
    pub node: usize,
    pub patch: usize,
    pub parents: [usize; 2],
    pub weights: [f64; 2],
}

/// Quadrilateral decomposition of the tank boundary.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub nodes: Vec<Vec3>,
    pub cells: Vec<Cell>,
    pub patches: Vec<Patch>,
    pub hanging: Vec<HangingConstraint>,
    pub origins: Vec<NodeOrigin>,
    /// Characteristic length used for geometric tolerances, meters.
    pub length_scale: f64,
    midpoints: BTreeMap<(usize, usize), usize>,
    generation: u64,
    parent_generation: Option<u64>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SurfaceMesh {
    /// Assemble a conforming mesh; fails if a cell is degenerate.
    pub fn new(
        nodes: Vec<Vec3>,
        cells: Vec<Cell>,
        patches: Vec<Patch>,
        length_scale: f64,
    ) -> Result<Self> {
        let n = nodes.len();
        for (k, c) in cells.iter().enumerate() {
            if c.nodes.iter().any(|&i| i >= n) || c.patch >= patches.len() {
                return Err(Error::Mesh(format!("cell {k} references a missing node or patch")));
            }
        }
        let mesh = SurfaceMesh {
            origins: vec![NodeOrigin::Initial; n],
            nodes,
            cells,
            patches,
            hanging: Vec::new(),
            length_scale,
            midpoints: BTreeMap::new(),
            generation: next_generation(),
            parent_generation: None,
        };
        for k in 0..mesh.cells.len() {
            let c = mesh.corners(k);
            let cp = bilinear_point(&c, 0.5, 0.5);
            let j = min_jacobian(&c, cp.normal);
            if !(j > 0.0) || !(cp.jacobian > 0.0) {
                return Err(Error::InvertedCell {
                    cell: k,
                    jacobian: j,
                });
            }
        }
        Ok(mesh)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn parent_generation(&self) -> Option<u64> {
        self.parent_generation
    }

    pub fn region(&self, cell: usize) -> Region {
        self.patches[self.cells[cell].patch].region
    }

    pub fn corners(&self, cell: usize) -> [Vec3; 4] {
        let c = &self.cells[cell].nodes;
        [
            self.nodes[c[0]],
            self.nodes[c[1]],
            self.nodes[c[2]],
            self.nodes[c[3]],
        ]
    }

    /// Point, Jacobian and outward normal at reference coordinates `(u, v)`.
    pub fn cell_geometry(&self, cell: usize, u: f64, v: f64) -> CellPoint {
        bilinear_point(&self.corners(cell), u, v)
    }

    pub fn cell_diagonal(&self, cell: usize) -> f64 {
        diagonal(&self.corners(cell))
    }

    pub fn cell_aspect_ratio(&self, cell: usize) -> f64 {
        aspect_ratio(&self.corners(cell))
    }

    pub fn cells_in_region(&self, region: Region) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&k| self.region(k) == region)
            .collect()
    }

    /// Hanging constraint of `node` within `patch`, if any.
    pub fn hanging_in_patch(&self, node: usize, patch: usize) -> Option<&HangingConstraint> {
        self.hanging
            .iter()
            .find(|h| h.node == node && h.patch == patch)
    }

    /// Midpoint node created on edge `(a, b)`, if that edge was ever split.
    pub fn edge_midpoint(&self, a: usize, b: usize) -> Option<usize> {
        self.midpoints.get(&edge_key(a, b)).copied()
    }

    /// Copy of the mesh with node positions replaced.
    pub fn with_positions(&self, nodes: Vec<Vec3>) -> SurfaceMesh {
        assert_eq!(nodes.len(), self.nodes.len());
        SurfaceMesh {
            nodes,
            ..self.clone()
        }
    }

    /// Split every flagged cell into four children.
    ///
    /// Coarser neighbors of flagged cells are refined too until every edge
    /// carries at most one hanging node. New nodes are projected onto the
    /// patch geometry, except hanging nodes on curved patches, which stay on
    /// the straight parent edge so the surface remains closed.
    pub fn refine_cells(&self, flags: &[bool]) -> Result<SurfaceMesh> {
        if flags.len() != self.cells.len() {
            return Err(Error::Invalid(format!(
                "refinement flags have length {} but the mesh has {} cells",
                flags.len(),
                self.cells.len()
            )));
        }
        let mut flags = flags.to_vec();
        self.close_one_irregular(&mut flags);

        let mut nodes = self.nodes.clone();
        let mut origins = self.origins.clone();
        let mut midpoints = self.midpoints.clone();
        let mut cells = Vec::with_capacity(self.cells.len() + 3 * flags.iter().filter(|f| **f).count());
        let mut parent_of_new: Vec<Option<usize>> = Vec::new();

        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<Vec3>, origins: &mut Vec<NodeOrigin>| {
            *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                nodes.push((nodes[a] + nodes[b]) * 0.5);
                origins.push(NodeOrigin::Edge([a.min(b), a.max(b)]));
                nodes.len() - 1
            })
        };

        for (k, cell) in self.cells.iter().enumerate() {
            if !flags[k] {
                cells.push(*cell);
                parent_of_new.push(None);
                continue;
            }
            let [n0, n1, n2, n3] = cell.nodes;
            let m01 = midpoint(n0, n1, &mut nodes, &mut origins);
            let m12 = midpoint(n1, n2, &mut nodes, &mut origins);
            let m23 = midpoint(n2, n3, &mut nodes, &mut origins);
            let m30 = midpoint(n3, n0, &mut nodes, &mut origins);
            nodes.push((nodes[n0] + nodes[n1] + nodes[n2] + nodes[n3]) * 0.25);
            origins.push(NodeOrigin::Center(cell.nodes));
            let c = nodes.len() - 1;
            let level = cell.level + 1;
            for quad in [[n0, m01, c, m30], [m01, n1, m12, c], [c, m12, n2, m23], [m30, c, m23, n3]] {
                cells.push(Cell {
                    nodes: quad,
                    patch: cell.patch,
                    level,
                });
                parent_of_new.push(Some(k));
            }
        }

        let mut mesh = SurfaceMesh {
            nodes,
            cells,
            patches: self.patches.clone(),
            hanging: Vec::new(),
            origins,
            length_scale: self.length_scale,
            midpoints,
            generation: next_generation(),
            parent_generation: Some(self.generation),
        };
        mesh.rebuild_hanging();
        mesh.place_nodes();

        for (k, parent) in parent_of_new.iter().enumerate() {
            let reference = match parent {
                Some(p) => self.cell_geometry(*p, 0.5, 0.5).normal,
                None => mesh.cell_geometry(k, 0.5, 0.5).normal,
            };
            let j = min_jacobian(&mesh.corners(k), reference);
            if !(j > 0.0) {
                return Err(Error::InvertedCell { cell: k, jacobian: j });
            }
        }
        Ok(mesh)
    }

    /// Extend `flags` so that refining never creates a second hanging node on
    /// an edge: a flagged cell with a hanging vertex forces its coarse
    /// neighbor to be refined as well.
    fn close_one_irregular(&self, flags: &mut [bool]) {
        let mut owner: HashMap<(usize, usize, usize), usize> = HashMap::new();
        for (k, c) in self.cells.iter().enumerate() {
            for e in 0..4 {
                let (a, b) = edge_key(c.nodes[e], c.nodes[(e + 1) % 4]);
                owner.insert((c.patch, a, b), k);
            }
        }
        let hang: HashMap<(usize, usize), [usize; 2]> = self
            .hanging
            .iter()
            .map(|h| ((h.node, h.patch), h.parents))
            .collect();
        let mut stack: Vec<usize> = (0..flags.len()).filter(|&k| flags[k]).collect();
        while let Some(k) = stack.pop() {
            let c = self.cells[k];
            for &v in &c.nodes {
                if let Some(p) = hang.get(&(v, c.patch)) {
                    let (a, b) = edge_key(p[0], p[1]);
                    if let Some(&o) = owner.get(&(c.patch, a, b)) {
                        if !flags[o] {
                            flags[o] = true;
                            stack.push(o);
                        }
                    }
                }
            }
        }
    }

    fn rebuild_hanging(&mut self) {
        let mut active_edges: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
        let mut node_patches: BTreeSet<(usize, usize)> = BTreeSet::new();
        for c in &self.cells {
            for e in 0..4 {
                let (a, b) = edge_key(c.nodes[e], c.nodes[(e + 1) % 4]);
                active_edges.insert((c.patch, a, b));
                node_patches.insert((c.nodes[e], c.patch));
            }
        }
        let mut hanging = Vec::new();
        for (&(a, b), &m) in &self.midpoints {
            for p in 0..self.patches.len() {
                if node_patches.contains(&(m, p)) && active_edges.contains(&(p, a, b)) {
                    hanging.push(HangingConstraint {
                        node: m,
                        patch: p,
                        parents: [a, b],
                        weights: [0.5, 0.5],
                    });
                }
            }
        }
        hanging.sort_by_key(|h| (h.node, h.patch));
        self.hanging = hanging;
    }

    /// Recompute positions of refinement-created nodes in creation order.
    fn place_nodes(&mut self) {
        let mut patch_of = vec![usize::MAX; self.nodes.len()];
        for c in &self.cells {
            for &v in &c.nodes {
                patch_of[v] = patch_of[v].min(c.patch);
            }
        }
        let curved_hanging: BTreeSet<usize> = self
            .hanging
            .iter()
            .filter(|h| self.patches[h.patch].geometry.is_curved())
            .map(|h| h.node)
            .collect();
        for i in 0..self.nodes.len() {
            let straight = match self.origins[i] {
                NodeOrigin::Initial => continue,
                NodeOrigin::Edge([a, b]) => (self.nodes[a] + self.nodes[b]) * 0.5,
                NodeOrigin::Center(c) => {
                    (self.nodes[c[0]] + self.nodes[c[1]] + self.nodes[c[2]] + self.nodes[c[3]]) * 0.25
                }
            };
            self.nodes[i] = if curved_hanging.contains(&i) || patch_of[i] == usize::MAX {
                straight
            } else {
                self.patches[patch_of[i]].geometry.project(straight)
            };
        }
    }

    /// Largest deviation of non-hanging nodes from their patch geometry.
    pub fn max_geometry_deviation(&self, region: Region) -> f64 {
        let hanging: BTreeSet<(usize, usize)> =
            self.hanging.iter().map(|h| (h.node, h.patch)).collect();
        let mut worst: f64 = 0.0;
        for c in &self.cells {
            let patch = &self.patches[c.patch];
            if patch.region != region {
                continue;
            }
            for &v in &c.nodes {
                if hanging.contains(&(v, c.patch)) {
                    continue;
                }
                let p = self.nodes[v];
                worst = worst.max((patch.geometry.project(p) - p).norm());
            }
        }
        worst
    }
}
