//! Collocation boundary elements for the Laplace equation.
//!
//! The discrete boundary integral equation at collocation point `x_i` reads
//! `α_i φ_i + Σ_j N_ij φ_j − Σ_j D_ij γ_j = 0` with
//! `N_ij = ∫ ∂G/∂n_y ψ_j` and `D_ij = ∫ G ψ_j`, `G = 1/(4π|y − x|)`.

mod solve;

pub use solve::solve_laplace;

use crate::linalg::DenseMatrix;
use crate::meshkit::{bilinear_point, DofLayout, SurfaceMesh};
use crate::par::map_indexed;
use crate::quadrature::{shape, QuadratureRule};
use crate::{Error, Result, Vec3};
use std::collections::HashMap;
use std::f64::consts::PI;

pub const INV_4PI: f64 = 0.25 / PI;

/// Free-space Green's function and its normal derivative at `y`.
pub fn green_kernel(x: Vec3, y: Vec3, n_y: Vec3, length_scale: f64) -> Result<(f64, f64)> {
    let r = y - x;
    let d = r.norm();
    if d < 1e-14 * length_scale {
        return Err(Error::CoincidentPoints { distance: d });
    }
    let g = INV_4PI / d;
    let dg = -r.dot(&n_y) * INV_4PI / (d * d * d);
    Ok((g, dg))
}

/// Quadrature orders and the near-field threshold (in cell diagonals).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadSettings {
    pub regular_order: usize,
    pub near_order: usize,
    pub singular_order: usize,
    pub near_factor: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            regular_order: 4,
            near_order: 8,
            singular_order: 4,
            near_factor: 2.0,
        }
    }
}

/// Rule used for a (row, cell) pair when the regular rule is not enough.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowRule {
    Regular,
    Near,
    /// Index into [`QuadTable::singular_rules`].
    Singular(usize),
}

/// Per-row exceptions to the regular rule, fixed from the reference geometry
/// so that the discrete operator depends smoothly on node motion.
#[derive(Clone, Debug)]
pub struct QuadTable {
    pub settings: QuadSettings,
    pub regular: QuadratureRule,
    pub near: QuadratureRule,
    pub singular_rules: Vec<QuadratureRule>,
    /// Sorted by cell; empty for hanging DOFs (no collocation).
    pub rows: Vec<Vec<(usize, RowRule)>>,
}

fn edge_param(e: usize, t: f64) -> (f64, f64) {
    match e {
        0 => (t, 0.0),
        1 => (1.0, t),
        2 => (1.0 - t, 1.0),
        _ => (0.0, 1.0 - t),
    }
}

impl QuadTable {
    pub fn new(mesh: &SurfaceMesh, dofs: &DofLayout, settings: QuadSettings) -> Self {
        let tol = 1e-9 * mesh.length_scale;
        let ncell = mesh.cells.len();
        let corners: Vec<[Vec3; 4]> = (0..ncell).map(|k| mesh.corners(k)).collect();
        let centers: Vec<Vec3> = corners
            .iter()
            .map(|c| (c[0] + c[1] + c[2] + c[3]) * 0.25)
            .collect();
        let diags: Vec<f64> = corners.iter().map(crate::meshkit::diagonal).collect();

        // nodes lying on the interior of some cell edge
        let mut on_edge: HashMap<usize, Vec<(usize, (f64, f64))>> = HashMap::new();
        for (k, c) in corners.iter().enumerate() {
            let lo = c.iter().fold(Vec3::repeat(f64::INFINITY), |m, p| m.inf(p)) - Vec3::repeat(tol);
            let hi = c.iter().fold(Vec3::repeat(f64::NEG_INFINITY), |m, p| m.sup(p)) + Vec3::repeat(tol);
            for (n, p) in mesh.nodes.iter().enumerate() {
                if p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y || p.z > hi.z {
                    continue;
                }
                if mesh.cells[k].nodes.contains(&n) {
                    continue;
                }
                for e in 0..4 {
                    let a = c[e];
                    let b = c[(e + 1) % 4];
                    let ab = b - a;
                    let t = (p - a).dot(&ab) / ab.norm_squared();
                    if t > 1e-9 && t < 1.0 - 1e-9 && (a + ab * t - p).norm() < tol {
                        on_edge.entry(n).or_default().push((k, edge_param(e, t)));
                    }
                }
            }
        }

        let node_cells = {
            let mut v = vec![Vec::new(); mesh.nodes.len()];
            for (k, c) in mesh.cells.iter().enumerate() {
                for (a, &n) in c.nodes.iter().enumerate() {
                    v[n].push((k, a));
                }
            }
            v
        };

        let mut singular_rules: Vec<QuadratureRule> = Vec::new();
        let mut rule_index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut rule_for = |uv: (f64, f64)| -> usize {
            let key = (uv.0.to_bits(), uv.1.to_bits());
            *rule_index.entry(key).or_insert_with(|| {
                singular_rules.push(QuadratureRule::lachat_watson(settings.singular_order, uv));
                singular_rules.len() - 1
            })
        };
        let corner_uv = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

        let mut rows = Vec::with_capacity(dofs.len());
        for i in 0..dofs.len() {
            if dofs.is_hanging(i) {
                rows.push(Vec::new());
                continue;
            }
            let node = dofs.dofs[i].node;
            let x = mesh.nodes[node];
            let mut map: HashMap<usize, RowRule> = HashMap::new();
            for &(k, a) in &node_cells[node] {
                map.insert(k, RowRule::Singular(rule_for(corner_uv[a])));
            }
            if let Some(list) = on_edge.get(&node) {
                for &(k, uv) in list {
                    map.insert(k, RowRule::Singular(rule_for(uv)));
                }
            }
            for k in 0..ncell {
                if map.contains_key(&k) {
                    continue;
                }
                if (x - centers[k]).norm() < settings.near_factor * diags[k] {
                    map.insert(k, RowRule::Near);
                }
            }
            let mut v: Vec<(usize, RowRule)> = map.into_iter().collect();
            v.sort_by_key(|e| e.0);
            rows.push(v);
        }
        QuadTable {
            settings,
            regular: QuadratureRule::gauss(settings.regular_order),
            near: QuadratureRule::gauss(settings.near_order),
            singular_rules,
            rows,
        }
    }

    pub fn rule(&self, r: RowRule) -> &QuadratureRule {
        match r {
            RowRule::Regular => &self.regular,
            RowRule::Near => &self.near,
            RowRule::Singular(s) => &self.singular_rules[s],
        }
    }

    /// Rule for the pair (row `i`, cell `k`).
    pub fn lookup(&self, i: usize, k: usize) -> RowRule {
        match self.rows[i].binary_search_by_key(&k, |e| e.0) {
            Ok(p) => self.rows[i][p].1,
            Err(_) => RowRule::Regular,
        }
    }
}

/// Quadrature data of one rule on every cell, structure-of-arrays.
pub(crate) struct RuleData {
    nq: usize,
    px: Vec<f64>,
    py: Vec<f64>,
    pz: Vec<f64>,
    /// Normal scaled by Jacobian times weight.
    nx: Vec<f64>,
    ny: Vec<f64>,
    nz: Vec<f64>,
    jw: Vec<f64>,
    shape: Vec<[f64; 4]>,
}

impl RuleData {
    pub(crate) fn new(rule: &QuadratureRule, corners: &[[Vec3; 4]]) -> Self {
        let nq = rule.len();
        let n = corners.len() * nq;
        let mut d = RuleData {
            nq,
            px: Vec::with_capacity(n),
            py: Vec::with_capacity(n),
            pz: Vec::with_capacity(n),
            nx: Vec::with_capacity(n),
            ny: Vec::with_capacity(n),
            nz: Vec::with_capacity(n),
            jw: Vec::with_capacity(n),
            shape: rule.points.iter().map(|p| shape(p[0], p[1])).collect(),
        };
        for c in corners {
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let cp = bilinear_point(c, p[0], p[1]);
                let jw = cp.jacobian * w;
                d.px.push(cp.point.x);
                d.py.push(cp.point.y);
                d.pz.push(cp.point.z);
                d.nx.push(cp.normal.x * jw);
                d.ny.push(cp.normal.y * jw);
                d.nz.push(cp.normal.z * jw);
                d.jw.push(jw);
            }
        }
        d
    }

    /// Accumulate `∫ ∂G/∂n ψ_a` and `∫ G ψ_a` over cell `k` (without 1/4π).
    #[inline]
    pub(crate) fn cell_sums(&self, k: usize, x: &Vec3, n_acc: &mut [f64; 4], d_acc: &mut [f64; 4]) {
        let base = k * self.nq;
        for q in 0..self.nq {
            let j = base + q;
            let dx = self.px[j] - x.x;
            let dy = self.py[j] - x.y;
            let dz = self.pz[j] - x.z;
            let inv = 1.0 / (dx * dx + dy * dy + dz * dz).sqrt();
            let g = inv * self.jw[j];
            let h = -(dx * self.nx[j] + dy * self.ny[j] + dz * self.nz[j]) * inv * inv * inv;
            let s = &self.shape[q];
            for a in 0..4 {
                n_acc[a] += h * s[a];
                d_acc[a] += g * s[a];
            }
        }
    }
}

/// Integrate `∂G/∂n ψ_a` and `G ψ_a` over one cell with an explicit rule.
pub fn cell_integrals(x: Vec3, corners: &[Vec3; 4], rule: &QuadratureRule) -> ([f64; 4], [f64; 4]) {
    let mut n_acc = [0.0; 4];
    let mut d_acc = [0.0; 4];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let cp = bilinear_point(corners, p[0], p[1]);
        let r = cp.point - x;
        let inv = 1.0 / r.norm();
        let jw = cp.jacobian * w;
        let g = inv * jw * INV_4PI;
        let h = -r.dot(&cp.normal) * inv * inv * inv * jw * INV_4PI;
        let s = shape(p[0], p[1]);
        for a in 0..4 {
            n_acc[a] += h * s[a];
            d_acc[a] += g * s[a];
        }
    }
    (n_acc, d_acc)
}

/// Dense BIE matrices. Rows of hanging DOFs are zero.
#[derive(Clone, Debug)]
pub struct BemMatrices {
    pub n: DenseMatrix,
    pub d: DenseMatrix,
    pub alpha: Vec<f64>,
}

/// Check that every cell keeps the orientation of its reference normal.
pub fn check_orientation(corners: &[[Vec3; 4]], reference_normals: &[Vec3]) -> Result<()> {
    for (k, (c, n)) in corners.iter().zip(reference_normals).enumerate() {
        let j = crate::meshkit::min_jacobian(c, *n);
        if !(j > 0.0) {
            return Err(Error::InvertedCell { cell: k, jacobian: j });
        }
    }
    Ok(())
}

/// Per-cell BIE integrals for a fixed set of cell corners, choosing the rule
/// of each (row, cell) pair from a [`QuadTable`].
pub(crate) struct CellIntegrator<'a> {
    table: &'a QuadTable,
    corners: &'a [[Vec3; 4]],
    reg: RuleData,
    near: RuleData,
}

impl<'a> CellIntegrator<'a> {
    pub(crate) fn new(table: &'a QuadTable, corners: &'a [[Vec3; 4]]) -> Self {
        CellIntegrator {
            table,
            corners,
            reg: RuleData::new(&table.regular, corners),
            near: RuleData::new(&table.near, corners),
        }
    }

    /// `(∫ ∂G/∂n ψ_a, ∫ G ψ_a)` over local cell `local` with rule `rule`.
    #[inline]
    pub(crate) fn integrals(&self, rule: RowRule, local: usize, x: &Vec3) -> ([f64; 4], [f64; 4]) {
        let mut na = [0.0; 4];
        let mut da = [0.0; 4];
        match rule {
            RowRule::Regular => self.reg.cell_sums(local, x, &mut na, &mut da),
            RowRule::Near => self.near.cell_sums(local, x, &mut na, &mut da),
            RowRule::Singular(_) => {
                return cell_integrals(*x, &self.corners[local], self.table.rule(rule));
            }
        }
        for a in 0..4 {
            na[a] *= INV_4PI;
            da[a] *= INV_4PI;
        }
        (na, da)
    }
}

/// Assemble `N`, `D` and `α` for cells with the given corner positions and
/// collocation points (both may differ from the reference mesh).
pub fn assemble_with_geometry(
    table: &QuadTable,
    dofs: &DofLayout,
    corners: &[[Vec3; 4]],
    colloc: &[Vec3],
) -> BemMatrices {
    let ndof = dofs.len();
    let ci = CellIntegrator::new(table, corners);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = map_indexed(ndof, |i| {
        let mut nrow = vec![0.0; ndof];
        let mut drow = vec![0.0; ndof];
        if dofs.is_hanging(i) {
            return (nrow, drow);
        }
        let x = colloc[i];
        let exceptions = &table.rows[i];
        let mut next = 0;
        for k in 0..corners.len() {
            let rule = if next < exceptions.len() && exceptions[next].0 == k {
                next += 1;
                exceptions[next - 1].1
            } else {
                RowRule::Regular
            };
            let (na, da) = ci.integrals(rule, k, &x);
            let cd = &dofs.cell_dofs[k];
            for a in 0..4 {
                nrow[cd[a]] += na[a];
                drow[cd[a]] += da[a];
            }
        }
        (nrow, drow)
    });
    let mut alpha = vec![0.0; ndof];
    let mut nr = Vec::with_capacity(ndof);
    let mut dr = Vec::with_capacity(ndof);
    for (i, (n, d)) in rows.into_iter().enumerate() {
        if !dofs.is_hanging(i) {
            alpha[i] = -n.iter().sum::<f64>();
        }
        nr.push(n);
        dr.push(d);
    }
    BemMatrices {
        n: DenseMatrix::from_rows(ndof, nr),
        d: DenseMatrix::from_rows(ndof, dr),
        alpha,
    }
}

/// Assemble the BIE matrices on the reference geometry of `mesh`.
pub fn assemble_bem(mesh: &SurfaceMesh, dofs: &DofLayout) -> Result<BemMatrices> {
    assemble_bem_with(mesh, dofs, QuadSettings::default())
}

pub fn assemble_bem_with(
    mesh: &SurfaceMesh,
    dofs: &DofLayout,
    settings: QuadSettings,
) -> Result<BemMatrices> {
    if dofs.mesh_generation() != mesh.generation() {
        return Err(Error::Invalid("DOF layout was built for a different mesh".into()));
    }
    let corners: Vec<[Vec3; 4]> = (0..mesh.cells.len()).map(|k| mesh.corners(k)).collect();
    for (k, c) in corners.iter().enumerate() {
        let cp = bilinear_point(c, 0.5, 0.5);
        if !(cp.jacobian > 0.0) {
            return Err(Error::InvertedCell {
                cell: k,
                jacobian: cp.jacobian,
            });
        }
    }
    let table = QuadTable::new(mesh, dofs, settings);
    let colloc: Vec<Vec3> = (0..dofs.len()).map(|i| dofs.collocation_point(mesh, i)).collect();
    Ok(assemble_with_geometry(&table, dofs, &corners, &colloc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshkit::{assign_double_nodes, box_mesh};

    #[test]
    fn kernel_values() {
        let n = Vec3::new(1.0, 0.0, 0.0);
        let (g, dg) = green_kernel(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), n, 1.0).unwrap();
        assert!((g - 0.0795775).abs() < 1e-7);
        assert!((dg + INV_4PI).abs() < 1e-15);
        let (g, _) = green_kernel(Vec3::zeros(), Vec3::new(0.0, 0.5, 0.0), n, 1.0).unwrap();
        assert!((g - 0.5 / PI).abs() < 1e-15);
        assert!(green_kernel(Vec3::zeros(), Vec3::zeros(), n, 1.0).is_err());
    }

    #[test]
    fn cube_solid_angles() {
        let mesh = box_mesh(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), 4).unwrap();
        let dofs = assign_double_nodes(&mesh);
        let bem = assemble_bem(&mesh, &dofs).unwrap();
        for i in 0..dofs.len() {
            let p = dofs.collocation_point(&mesh, i);
            let on_bound = |v: f64| v.abs() < 1e-12 || (v - 1.0).abs() < 1e-12;
            let nb = (0..3).filter(|&k| on_bound(p[k])).count();
            let expected = match nb {
                1 => 0.5,
                2 => 0.25,
                _ => 0.125,
            };
            assert!(
                (bem.alpha[i] - expected).abs() < 5e-3,
                "dof {i} at {p:?}: alpha {} expected {expected}",
                bem.alpha[i]
            );
            let s: f64 = bem.alpha[i] + bem.n.row(i).iter().sum::<f64>();
            assert!(s.abs() < 1e-12);
        }
    }
}
