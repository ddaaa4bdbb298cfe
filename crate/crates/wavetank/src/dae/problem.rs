use super::{DaeSystem, JacobianStrategy};
use crate::bem::{assemble_with_geometry, check_orientation, BemMatrices, CellIntegrator, QuadSettings, QuadTable};
use crate::freesurface::{fs_cell_terms, neumann_cell_terms, AsymptoticFlow, CellNodal, FsParams};
use crate::linalg::DenseMatrix;
use crate::meshkit::{assign_dofs_with, bilinear_point, BoundaryCondition, DofLayout, Region, SurfaceMesh, ZClass};
use crate::par::map_indexed;
use crate::quadrature::QuadratureRule;
use crate::{Error, Result, Vec3};
use std::sync::{Arc, Mutex};

/// Role of the three residual rows of a DOF.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Hanging,
    Dirichlet,
    Neumann,
}

/// Current geometry: node positions, cell corners and BIE matrices.
pub struct Geometry {
    pub nodes: Vec<Vec3>,
    pub corners: Vec<[Vec3; 4]>,
    pub bem: Arc<BemMatrices>,
}

/// The towing-tank DAE `F(ẏ, y, t) = 0` on a fixed mesh topology.
///
/// `y = [φ; γ; z]` with one entry of each per DOF. Free-surface DOFs carry
/// their elevation in `z`; every other DOF pins `z` to its reference value.
pub struct TankProblem {
    mesh: SurfaceMesh,
    dofs: DofLayout,
    flow: AsymptoticFlow,
    params: FsParams,
    beach: bool,
    strategy: JacobianStrategy,
    quad: QuadSettings,
    table: QuadTable,
    fs_rule: QuadratureRule,
    roles: Vec<Role>,
    z_ref: Vec<f64>,
    node_zdof: Vec<Option<usize>>,
    ref_normals: Vec<Vec3>,
    /// Non-hanging DOFs receiving each DOF's test function, with weights.
    tests: Vec<Vec<(usize, f64)>>,
    node_cells: Vec<Vec<(usize, usize)>>,
    active: Vec<usize>,
    col_of: Vec<Option<usize>>,
    cache: Mutex<Option<(Vec<u64>, Arc<BemMatrices>)>>,
}

fn resolve_tests(dofs: &DofLayout, i: usize, w: f64, out: &mut Vec<(usize, f64)>) {
    match &dofs.constraints[i] {
        None => out.push((i, w)),
        Some(c) => {
            for (p, wp) in c.parents.iter().zip(&c.weights) {
                resolve_tests(dofs, *p, w * wp, out);
            }
        }
    }
}

impl TankProblem {
    pub fn new(
        mesh: SurfaceMesh,
        dofs: DofLayout,
        flow: AsymptoticFlow,
        params: FsParams,
        quad: QuadSettings,
    ) -> Result<Self> {
        if dofs.mesh_generation() != mesh.generation() {
            return Err(Error::Invalid("DOF layout was built for a different mesh".into()));
        }
        let n = dofs.len();
        let roles: Vec<Role> = (0..n)
            .map(|i| {
                if dofs.is_hanging(i) {
                    Role::Hanging
                } else if dofs.dofs[i].bc == BoundaryCondition::Dirichlet {
                    Role::Dirichlet
                } else {
                    Role::Neumann
                }
            })
            .collect();
        let mut node_zdof = vec![None; mesh.nodes.len()];
        for (i, d) in dofs.dofs.iter().enumerate() {
            if d.zclass == ZClass::FreeSurface {
                if node_zdof[d.node].is_some() {
                    return Err(Error::Mesh(format!(
                        "node {} belongs to more than one free-surface patch",
                        d.node
                    )));
                }
                if d.bc == BoundaryCondition::Dirichlet {
                    return Err(Error::Invalid("free-surface DOFs must be of Neumann type".into()));
                }
                node_zdof[d.node] = Some(i);
            }
        }
        let z_ref = dofs.dofs.iter().map(|d| mesh.nodes[d.node].z).collect();
        let ref_normals = (0..mesh.cells.len())
            .map(|k| bilinear_point(&mesh.corners(k), 0.5, 0.5).normal)
            .collect();
        let tests = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                resolve_tests(&dofs, i, 1.0, &mut v);
                v
            })
            .collect();
        let mut node_cells = vec![Vec::new(); mesh.nodes.len()];
        for (k, c) in mesh.cells.iter().enumerate() {
            for (a, &nd) in c.nodes.iter().enumerate() {
                node_cells[nd].push((k, a));
            }
        }
        let mut active: Vec<usize> = (0..2 * n).collect();
        active.extend((0..n).filter(|&i| dofs.dofs[i].zclass == ZClass::FreeSurface).map(|i| 2 * n + i));
        let mut col_of = vec![None; 3 * n];
        for (c, &a) in active.iter().enumerate() {
            col_of[a] = Some(c);
        }
        let table = QuadTable::new(&mesh, &dofs, quad);
        Ok(TankProblem {
            fs_rule: QuadratureRule::gauss(params.quad_order),
            mesh,
            dofs,
            flow,
            params,
            beach: false,
            strategy: JacobianStrategy::FiniteDifference,
            quad,
            table,
            roles,
            z_ref,
            node_zdof,
            ref_normals,
            tests,
            node_cells,
            active,
            col_of,
            cache: Mutex::new(None),
        })
    }

    /// The same problem on another mesh of the same patches, keeping the
    /// boundary condition of every patch and all settings.
    pub fn with_mesh(&self, mesh: SurfaceMesh) -> Result<TankProblem> {
        if mesh.patches.len() != self.mesh.patches.len() {
            return Err(Error::Invalid("meshes have different patches".into()));
        }
        let mut bc = vec![BoundaryCondition::Neumann; mesh.patches.len()];
        for d in &self.dofs.dofs {
            bc[d.patch] = d.bc;
        }
        let dofs = assign_dofs_with(&mesh, |_, p| bc[p]);
        let mut p = TankProblem::new(mesh, dofs, self.flow, self.params, self.quad)?;
        p.beach = self.beach;
        p.strategy = self.strategy;
        Ok(p)
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn dofs(&self) -> &DofLayout {
        &self.dofs
    }

    pub fn flow(&self) -> &AsymptoticFlow {
        &self.flow
    }

    pub fn set_flow(&mut self, flow: AsymptoticFlow) {
        self.flow = flow;
    }

    pub fn params(&self) -> &FsParams {
        &self.params
    }

    /// Enable the beach pressure (time-accurate runs only).
    pub fn set_beach(&mut self, on: bool) {
        self.beach = on;
    }

    pub fn beach(&self) -> bool {
        self.beach
    }

    pub fn set_strategy(&mut self, s: JacobianStrategy) {
        self.strategy = s;
    }

    /// Number of DOFs; `y` has three times as many entries.
    pub fn n(&self) -> usize {
        self.dofs.len()
    }

    pub fn z_ref(&self) -> &[f64] {
        &self.z_ref
    }

    /// State at rest on the reference geometry.
    pub fn rest_state(&self) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; 3 * n];
        y[2 * n..].copy_from_slice(&self.z_ref);
        y
    }

    /// Whether DOF `i` carries a free-surface elevation unknown.
    pub fn is_fs(&self, i: usize) -> bool {
        self.dofs.dofs[i].zclass == ZClass::FreeSurface
    }

    /// Whether DOF `i` shares its node with a Dirichlet DOF.
    pub fn touches_dirichlet(&self, i: usize) -> bool {
        self.dofs.node_dofs[self.dofs.dofs[i].node]
            .iter()
            .any(|&d| self.roles[d] == Role::Dirichlet)
    }

    fn fd_step_z(&self) -> f64 {
        1e-6 * self.mesh.length_scale
    }

    /// Node positions for the elevations in `z` (DOF indexed).
    pub fn node_positions(&self, z: &[f64]) -> Vec<Vec3> {
        self.mesh
            .nodes
            .iter()
            .zip(&self.node_zdof)
            .map(|(p, d)| match d {
                Some(i) => Vec3::new(p.x, p.y, z[*i]),
                None => *p,
            })
            .collect()
    }

    /// Mesh moved to the elevations held in `y`.
    pub fn current_mesh(&self, y: &[f64]) -> SurfaceMesh {
        let n = self.n();
        self.mesh.with_positions(self.node_positions(&y[2 * n..]))
    }

    fn cell_corners(&self, nodes: &[Vec3]) -> Vec<[Vec3; 4]> {
        self.mesh
            .cells
            .iter()
            .map(|c| [nodes[c.nodes[0]], nodes[c.nodes[1]], nodes[c.nodes[2]], nodes[c.nodes[3]]])
            .collect()
    }

    /// Geometry for state `y`, reusing the BIE matrices when the elevations
    /// have not changed since the last call.
    pub fn geometry(&self, y: &[f64]) -> Result<Geometry> {
        let n = self.n();
        let z = &y[2 * n..];
        let nodes = self.node_positions(z);
        let corners = self.cell_corners(&nodes);
        check_orientation(&corners, &self.ref_normals)?;
        let key: Vec<u64> = self.node_zdof.iter().flatten().map(|&i| z[i].to_bits()).collect();
        let mut cache = self.cache.lock().expect("cache lock");
        let bem = match cache.as_ref() {
            Some((k, b)) if *k == key => b.clone(),
            _ => {
                let colloc: Vec<Vec3> = self.dofs.dofs.iter().map(|d| nodes[d.node]).collect();
                let b = Arc::new(assemble_with_geometry(&self.table, &self.dofs, &corners, &colloc));
                *cache = Some((key, b.clone()));
                b
            }
        };
        Ok(Geometry { nodes, corners, bem })
    }

    fn cell_nodal(&self, k: usize, ydot: &[f64], y: &[f64]) -> (CellNodal, [f64; 4]) {
        let n = self.n();
        let cd = &self.dofs.cell_dofs[k];
        let mut nodal = CellNodal::default();
        let mut phidot = [0.0; 4];
        for a in 0..4 {
            nodal.phi[a] = y[cd[a]];
            nodal.gamma[a] = y[n + cd[a]];
            if self.is_fs(cd[a]) {
                nodal.zdot[a] = ydot[2 * n + cd[a]];
                phidot[a] = ydot[cd[a]];
            }
        }
        (nodal, phidot)
    }

    /// Local projection rows `(neumann, dynamic)` of one cell.
    fn cell_rows(&self, k: usize, corners: &[Vec3; 4], nodal: &CellNodal, phidot: &[f64; 4], t: f64) -> ([f64; 4], [f64; 4]) {
        let region = self.mesh.region(k);
        let mut neu = [0.0; 4];
        let mut dy = [0.0; 4];
        match region {
            Region::Inflow => {}
            Region::FreeSurface => {
                let terms = fs_cell_terms(corners, nodal, &self.flow, t, &self.params, self.beach, &self.fs_rule);
                for i in 0..4 {
                    neu[i] = -terms.b_neu[i];
                    dy[i] = -terms.b_dyn[i];
                    for j in 0..4 {
                        neu[i] += terms.mass[i][j] * nodal.gamma[j];
                        dy[i] += terms.supg_mass[i][j] * phidot[j];
                    }
                }
            }
            _ => {
                let (mass, b) = neumann_cell_terms(corners, region, &self.flow, t, &self.fs_rule);
                for i in 0..4 {
                    neu[i] = -b[i];
                    for j in 0..4 {
                        neu[i] += mass[i][j] * nodal.gamma[j];
                    }
                }
            }
        }
        (neu, dy)
    }

    fn check_len(&self, ydot: &[f64], y: &[f64]) -> Result<()> {
        let m = 3 * self.n();
        if y.len() != m || ydot.len() != m {
            return Err(Error::Invalid(format!(
                "state vectors must have length {m}, got {} and {}",
                y.len(),
                ydot.len()
            )));
        }
        Ok(())
    }

    /// Full residual, `3n` entries in the layout of `y`.
    pub fn residual(&self, ydot: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_len(ydot, y)?;
        let n = self.n();
        let geom = self.geometry(y)?;
        let (phi, gamma, z) = (&y[..n], &y[n..2 * n], &y[2 * n..]);
        let bem = &geom.bem;
        let mut f = vec![0.0; 3 * n];
        let bie: Vec<f64> = map_indexed(n, |i| {
            if self.roles[i] == Role::Hanging {
                return 0.0;
            }
            let nr = bem.n.row(i);
            let dr = bem.d.row(i);
            let mut s = bem.alpha[i] * phi[i];
            for j in 0..n {
                s += nr[j] * phi[j] - dr[j] * gamma[j];
            }
            s
        });
        let locals: Vec<([f64; 4], [f64; 4])> = map_indexed(self.mesh.cells.len(), |k| {
            let (nodal, phidot) = self.cell_nodal(k, ydot, y);
            self.cell_rows(k, &geom.corners[k], &nodal, &phidot, t)
        });
        let mut neu = vec![0.0; n];
        let mut dy = vec![0.0; n];
        for (k, (ln, ld)) in locals.iter().enumerate() {
            let cd = &self.dofs.cell_dofs[k];
            for a in 0..4 {
                for &(p, w) in &self.tests[cd[a]] {
                    neu[p] += w * ln[a];
                    dy[p] += w * ld[a];
                }
            }
        }
        for i in 0..n {
            match self.roles[i] {
                Role::Hanging => {
                    let c = self.dofs.constraints[i].as_ref().expect("hanging DOF");
                    let mut fp = phi[i];
                    let mut fg = gamma[i];
                    let mut fz = z[i];
                    for (p, w) in c.parents.iter().zip(&c.weights) {
                        fp -= w * phi[*p];
                        fg -= w * gamma[*p];
                        fz -= w * z[*p];
                    }
                    f[i] = fp;
                    f[n + i] = fg;
                    f[2 * n + i] = if self.is_fs(i) { fz } else { z[i] - self.z_ref[i] };
                }
                Role::Dirichlet => {
                    f[i] = phi[i];
                    f[n + i] = bie[i];
                    f[2 * n + i] = z[i] - self.z_ref[i];
                }
                Role::Neumann => {
                    f[i] = bie[i];
                    f[n + i] = neu[i];
                    f[2 * n + i] = if self.is_fs(i) { dy[i] } else { z[i] - self.z_ref[i] };
                }
            }
        }
        Ok(f)
    }

    /// Residual row holding the BIE of non-hanging DOF `i`.
    fn bie_row(&self, i: usize) -> usize {
        match self.roles[i] {
            Role::Dirichlet => self.n() + i,
            _ => i,
        }
    }

    /// `∂F/∂y + c ∂F/∂ẏ` restricted to the active unknowns and rows.
    pub fn jacobian(&self, ydot: &[f64], y: &[f64], t: f64, c: f64) -> Result<DenseMatrix> {
        self.check_len(ydot, y)?;
        match self.strategy {
            JacobianStrategy::FiniteDifference => self.jacobian_structured(ydot, y, t, c),
            JacobianStrategy::Directional => self.jacobian_directional(ydot, y, t, c),
        }
    }

    /// Jacobian over all `3n` entries; pinned elevations get identity rows.
    pub fn jacobian_full(&self, ydot: &[f64], y: &[f64], t: f64, c: f64) -> Result<DenseMatrix> {
        let n = self.n();
        let red = self.jacobian(ydot, y, t, c)?;
        let mut j = DenseMatrix::zeros(3 * n, 3 * n);
        for (r, &a) in self.active.iter().enumerate() {
            for (s, &b) in self.active.iter().enumerate() {
                j[(a, b)] = red[(r, s)];
            }
        }
        for i in 0..n {
            if self.col_of[2 * n + i].is_none() {
                j[(2 * n + i, 2 * n + i)] = 1.0;
            }
        }
        Ok(j)
    }

    fn jacobian_directional(&self, ydot: &[f64], y: &[f64], t: f64, c: f64) -> Result<DenseMatrix> {
        let m = self.active.len();
        let mut j = DenseMatrix::zeros(m, m);
        let hz = self.fd_step_z();
        let n = self.n();
        for (col, &a) in self.active.iter().enumerate() {
            let h = if a >= 2 * n { hz } else { 1e-6 * (1.0 + y[a].abs()) };
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[a] += h;
            ym[a] -= h;
            let fp = self.residual(ydot, &yp, t)?;
            let fm = self.residual(ydot, &ym, t)?;
            for (r, &b) in self.active.iter().enumerate() {
                j[(r, col)] = (fp[b] - fm[b]) / (2.0 * h);
            }
            if c != 0.0 {
                let hd = 1e-6 * (1.0 + ydot[a].abs());
                let mut dp = ydot.to_vec();
                let mut dm = ydot.to_vec();
                dp[a] += hd;
                dm[a] -= hd;
                let fp = self.residual(&dp, y, t)?;
                let fm = self.residual(&dm, y, t)?;
                for (r, &b) in self.active.iter().enumerate() {
                    j[(r, col)] += c * (fp[b] - fm[b]) / (2.0 * hd);
                }
            }
        }
        Ok(j)
    }

    fn jacobian_structured(&self, ydot: &[f64], y: &[f64], t: f64, c: f64) -> Result<DenseMatrix> {
        let n = self.n();
        let geom = self.geometry(y)?;
        let bem = &geom.bem;
        let m = self.active.len();
        let mut j = DenseMatrix::zeros(m, m);
        let col = |a: usize| self.col_of[a];

        for i in 0..n {
            match self.roles[i] {
                Role::Hanging => {
                    let cst = self.dofs.constraints[i].as_ref().expect("hanging DOF");
                    let mut slots = vec![0, n];
                    if self.is_fs(i) {
                        slots.push(2 * n);
                    }
                    for off in slots {
                        let r = col(off + i).expect("active row");
                        j[(r, r)] = 1.0;
                        for (p, w) in cst.parents.iter().zip(&cst.weights) {
                            let cp = col(off + p).expect("active parent");
                            j[(r, cp)] -= w;
                        }
                    }
                }
                Role::Dirichlet => {
                    j[(i, i)] = 1.0;
                }
                Role::Neumann => {}
            }
            if self.roles[i] != Role::Hanging {
                let r = self.bie_row(i);
                let nr = bem.n.row(i);
                let dr = bem.d.row(i);
                let row = j.row_mut(r);
                for jj in 0..n {
                    row[jj] = nr[jj];
                    row[n + jj] = -dr[jj];
                }
                row[i] += bem.alpha[i];
            }
        }

        // geometric sensitivity of the BIE rows
        let zcols: Vec<usize> = (0..n).filter(|&k| self.is_fs(k)).collect();
        let ci = CellIntegrator::new(&self.table, &geom.corners);
        let dcols: Vec<Vec<f64>> = map_indexed(zcols.len(), |q| {
            self.bie_geometric_column(zcols[q], &geom, &ci, &y[..n], &y[n..2 * n])
        });
        for (q, &k) in zcols.iter().enumerate() {
            let cz = col(2 * n + k).expect("active elevation");
            for i in 0..n {
                if self.roles[i] != Role::Hanging {
                    j[(self.bie_row(i), cz)] = dcols[q][i];
                }
            }
        }

        // cell projections by local central differences
        let locals: Vec<Vec<(usize, usize, f64)>> = map_indexed(self.mesh.cells.len(), |k| {
            self.cell_jacobian(k, &geom.corners[k], ydot, y, t, c)
        });
        for list in locals {
            for (r, s, v) in list {
                j[(r, s)] += v;
            }
        }
        Ok(j)
    }

    /// `∂/∂z_k` of every BIE row for free-surface DOF `k`.
    fn bie_geometric_column(&self, k: usize, geom: &Geometry, base: &CellIntegrator, phi: &[f64], gamma: &[f64]) -> Vec<f64> {
        let n = self.n();
        let node = self.dofs.dofs[k].node;
        let h = self.fd_step_z();
        let cells = &self.node_cells[node];
        let mut out = vec![0.0; n];
        let own: Vec<usize> = self.dofs.node_dofs[node]
            .iter()
            .copied()
            .filter(|&i| self.roles[i] != Role::Hanging)
            .collect();
        let cell_value = |i: usize, na: &[f64; 4], da: &[f64; 4], kk: usize| -> f64 {
            let cd = &self.dofs.cell_dofs[kk];
            let mut s = 0.0;
            for a in 0..4 {
                s += na[a] * (phi[cd[a]] - phi[i]) - da[a] * gamma[cd[a]];
            }
            s
        };
        for sign in [1.0, -1.0] {
            let moved: Vec<[Vec3; 4]> = cells
                .iter()
                .map(|&(kk, a)| {
                    let mut cc = geom.corners[kk];
                    cc[a].z += sign * h;
                    cc
                })
                .collect();
            let ci = CellIntegrator::new(&self.table, &moved);
            for i in 0..n {
                if self.roles[i] == Role::Hanging || own.contains(&i) {
                    continue;
                }
                let x = geom.nodes[self.dofs.dofs[i].node];
                let mut s = 0.0;
                for (l, &(kk, _)) in cells.iter().enumerate() {
                    let (na, da) = ci.integrals(self.table.lookup(i, kk), l, &x);
                    s += cell_value(i, &na, &da, kk);
                }
                out[i] += sign * s;
            }
            for &i in &own {
                let mut x = geom.nodes[node];
                x.z += sign * h;
                let mut s = 0.0;
                let mut next = 0;
                let exc = &self.table.rows[i];
                for kk in 0..geom.corners.len() {
                    let rule = if next < exc.len() && exc[next].0 == kk {
                        next += 1;
                        exc[next - 1].1
                    } else {
                        crate::bem::RowRule::Regular
                    };
                    let (na, da) = match cells.iter().position(|e| e.0 == kk) {
                        Some(l) => ci.integrals(rule, l, &x),
                        None => base.integrals(rule, kk, &x),
                    };
                    s += cell_value(i, &na, &da, kk);
                }
                out[i] += sign * s;
            }
        }
        for v in &mut out {
            *v /= 2.0 * h;
        }
        out
    }

    /// Local Jacobian entries `(row, column, value)` of the projection rows of
    /// cell `k`.
    fn cell_jacobian(&self, k: usize, corners: &[Vec3; 4], ydot: &[f64], y: &[f64], t: f64, c: f64) -> Vec<(usize, usize, f64)> {
        let region = self.mesh.region(k);
        if region == Region::Inflow {
            return Vec::new();
        }
        let n = self.n();
        let fs = region == Region::FreeSurface;
        let cd = self.dofs.cell_dofs[k];
        let (nodal, phidot) = self.cell_nodal(k, ydot, y);
        let zdof: Vec<Option<usize>> = self.mesh.cells[k].nodes.iter().map(|&nd| self.node_zdof[nd]).collect();
        let mut out = Vec::new();
        let scatter = |b_col: usize, dneu: &[f64; 4], ddyn: &[f64; 4], out: &mut Vec<(usize, usize, f64)>| {
            for a in 0..4 {
                for &(p, w) in &self.tests[cd[a]] {
                    if self.roles[p] == Role::Neumann && dneu[a] != 0.0 {
                        out.push((self.col_of[n + p].expect("active"), b_col, w * dneu[a]));
                    }
                    if fs && ddyn[a] != 0.0 {
                        if let Some(r) = self.col_of[2 * n + p] {
                            out.push((r, b_col, w * ddyn[a]));
                        }
                    }
                }
            }
        };
        let diff = |nodal_p: &CellNodal, corners_p: &[Vec3; 4], nodal_m: &CellNodal, corners_m: &[Vec3; 4], h: f64| {
            let (np, dp) = self.cell_rows(k, corners_p, nodal_p, &phidot, t);
            let (nm, dm) = self.cell_rows(k, corners_m, nodal_m, &phidot, t);
            let mut dn = [0.0; 4];
            let mut dd = [0.0; 4];
            for a in 0..4 {
                dn[a] = (np[a] - nm[a]) / (2.0 * h);
                dd[a] = (dp[a] - dm[a]) / (2.0 * h);
            }
            (dn, dd)
        };
        for b in 0..4 {
            // γ
            let h = 1e-6 * (1.0 + nodal.gamma[b].abs());
            let (mut p, mut m) = (nodal, nodal);
            p.gamma[b] += h;
            m.gamma[b] -= h;
            let (dn, dd) = diff(&p, corners, &m, corners, h);
            scatter(self.col_of[n + cd[b]].expect("active"), &dn, &dd, &mut out);
            // elevation
            if let Some(zd) = zdof[b] {
                let hz = self.fd_step_z();
                let (mut cp, mut cm) = (*corners, *corners);
                cp[b].z += hz;
                cm[b].z -= hz;
                let (dn, dd) = diff(&nodal, &cp, &nodal, &cm, hz);
                let cz = self.col_of[2 * n + zd].expect("active elevation");
                scatter(cz, &dn, &dd, &mut out);
                if fs && c != 0.0 {
                    let h = 1e-6 * (1.0 + nodal.zdot[b].abs());
                    let (mut p, mut m) = (nodal, nodal);
                    p.zdot[b] += h;
                    m.zdot[b] -= h;
                    let (dn, dd) = diff(&p, corners, &m, corners, h);
                    let dn = dn.map(|v| c * v);
                    let dd = dd.map(|v| c * v);
                    scatter(cz, &dn, &dd, &mut out);
                }
            }
            if fs {
                let h = 1e-6 * (1.0 + nodal.phi[b].abs());
                let (mut p, mut m) = (nodal, nodal);
                p.phi[b] += h;
                m.phi[b] -= h;
                let (dn, dd) = diff(&p, corners, &m, corners, h);
                scatter(self.col_of[cd[b]].expect("active"), &dn, &dd, &mut out);
            }
        }
        if fs && c != 0.0 {
            let terms = fs_cell_terms(corners, &nodal, &self.flow, t, &self.params, self.beach, &self.fs_rule);
            for b in 0..4 {
                let mut dd = [0.0; 4];
                for a in 0..4 {
                    dd[a] = c * terms.supg_mass[a][b];
                }
                scatter(self.col_of[cd[b]].expect("active"), &[0.0; 4], &dd, &mut out);
            }
        }
        out
    }
}

impl DaeSystem for TankProblem {
    fn dim(&self) -> usize {
        3 * self.n()
    }

    fn active(&self) -> &[usize] {
        &self.active
    }

    fn residual(&self, ydot: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
        TankProblem::residual(self, ydot, y, t)
    }

    fn jacobian(&self, ydot: &[f64], y: &[f64], t: f64, c: f64) -> Result<DenseMatrix> {
        TankProblem::jacobian(self, ydot, y, t, c)
    }
}
