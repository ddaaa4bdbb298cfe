use super::BemMatrices;
use crate::linalg::{DenseMatrix, LuFactors};
use crate::meshkit::{bilinear_point, BoundaryCondition, DofLayout, SurfaceMesh};
use crate::{Error, Result, Vec3};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;

/// Solve the mixed boundary value problem `(α + N) φ − D γ = 0`.
///
/// `dirichlet` holds φ on the Dirichlet DOFs and `neumann` holds γ on the
/// Neumann DOFs, both in DOF order. Returns the complete `(φ, γ)`.
///
/// Where two Dirichlet DOFs share a node their BIE rows coincide, so the
/// extra rows are replaced by the compatibility relation
/// `γ_B − (n_A·n_B) γ_A = ∇_sA φ · n_B` between the normal derivatives of the
/// two patches, with `∇_sA φ` from a quadratic fit of the data on patch A.
pub fn solve_laplace(
    mesh: &SurfaceMesh,
    dofs: &DofLayout,
    bem: &BemMatrices,
    dirichlet: &[f64],
    neumann: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = dofs.len();
    let is_d: Vec<bool> = dofs
        .dofs
        .iter()
        .map(|d| d.bc == BoundaryCondition::Dirichlet)
        .collect();
    let nd = is_d.iter().filter(|b| **b).count();
    if dirichlet.len() != nd || neumann.len() != n - nd {
        return Err(Error::Invalid(format!(
            "expected {nd} Dirichlet and {} Neumann values, got {} and {}",
            n - nd,
            dirichlet.len(),
            neumann.len()
        )));
    }
    if nd == 0 {
        return Err(Error::SingularMatrix { column: 0 });
    }
    let mut phi = vec![0.0; n];
    let mut gamma = vec![0.0; n];
    let (mut id, mut in_) = (0, 0);
    for i in 0..n {
        if is_d[i] {
            phi[i] = dirichlet[id];
            id += 1;
        } else {
            gamma[i] = neumann[in_];
            in_ += 1;
        }
    }

    // Dirichlet DOFs whose BIE row duplicates that of an earlier twin
    let mut twin_of = vec![None; n];
    for list in &dofs.node_dofs {
        let ds: Vec<usize> = list
            .iter()
            .copied()
            .filter(|&i| is_d[i] && !dofs.is_hanging(i))
            .collect();
        for &b in ds.iter().skip(1) {
            twin_of[b] = Some(ds[0]);
        }
    }

    // unknown i is γ_i for Dirichlet DOFs and φ_i otherwise
    let mut a = DenseMatrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        if let Some(c) = &dofs.constraints[i] {
            a[(i, i)] = 1.0;
            for (p, w) in c.parents.iter().zip(&c.weights) {
                a[(i, *p)] -= w;
            }
            continue;
        }
        if let Some(src) = twin_of[i] {
            let na = patch_normal(mesh, dofs, src);
            let nb = patch_normal(mesh, dofs, i);
            let grad = fitted_surface_gradient(mesh, dofs, src, &phi)?;
            a[(i, i)] = 1.0;
            a[(i, src)] -= na.dot(&nb);
            rhs[i] = grad.dot(&nb);
            continue;
        }
        let nrow = bem.n.row(i);
        let drow = bem.d.row(i);
        let mut r = 0.0;
        for j in 0..n {
            let nij = nrow[j] + if i == j { bem.alpha[i] } else { 0.0 };
            if is_d[j] {
                a[(i, j)] = -drow[j];
                r -= nij * phi[j];
            } else {
                a[(i, j)] = nij;
                r += drow[j] * gamma[j];
            }
        }
        rhs[i] = r;
    }
    let lu = LuFactors::new(a)?;
    let x = lu.solve(&rhs);
    for i in 0..n {
        if is_d[i] {
            gamma[i] = x[i];
        } else {
            phi[i] = x[i];
        }
    }
    Ok((phi, gamma))
}

/// Average unit normal of the cells of a DOF's patch at its node.
pub(crate) fn patch_normal(mesh: &SurfaceMesh, dofs: &DofLayout, i: usize) -> Vec3 {
    let uv = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let mut n = Vec3::zeros();
    for (k, cd) in dofs.cell_dofs.iter().enumerate() {
        for a in 0..4 {
            if cd[a] == i {
                let cp = bilinear_point(&mesh.corners(k), uv[a].0, uv[a].1);
                n += cp.normal;
            }
        }
    }
    n.normalize()
}

/// Tangential gradient of nodal data at DOF `i` from a least-squares fit over
/// the two-ring of same-patch DOFs: quadratic when enough points exist,
/// linear otherwise.
pub(crate) fn fitted_surface_gradient(
    mesh: &SurfaceMesh,
    dofs: &DofLayout,
    i: usize,
    values: &[f64],
) -> Result<Vec3> {
    let patch = dofs.dofs[i].patch;
    let mut ring: BTreeSet<usize> = BTreeSet::from([i]);
    for _ in 0..2 {
        let current: Vec<usize> = ring.iter().copied().collect();
        for cd in &dofs.cell_dofs {
            if dofs.dofs[cd[0]].patch != patch {
                continue;
            }
            if cd.iter().any(|d| current.contains(d)) {
                ring.extend(cd.iter().copied());
            }
        }
    }
    let n = patch_normal(mesh, dofs, i);
    let helper = if n.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let e1 = (helper - n * helper.dot(&n)).normalize();
    let e2 = n.cross(&e1);
    let x0 = dofs.collocation_point(mesh, i);
    let pts: Vec<(f64, f64, f64)> = ring
        .iter()
        .map(|&d| {
            let r = dofs.collocation_point(mesh, d) - x0;
            (r.dot(&e1), r.dot(&e2), values[d])
        })
        .collect();
    let ncoef = if pts.len() >= 8 { 6 } else { 3 };
    if pts.len() < ncoef {
        return Err(Error::Mesh(format!("too few neighbors to fit a gradient at DOF {i}")));
    }
    let h = pts
        .iter()
        .map(|p| (p.0 * p.0 + p.1 * p.1).sqrt())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(pts.len(), ncoef, |r, c| {
        let (s, t) = (pts[r].0 / h, pts[r].1 / h);
        [1.0, s, t, s * s, s * t, t * t][c]
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.2));
    let svd = a.svd(true, true);
    let c = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Mesh(format!("gradient fit failed at DOF {i}: {e}")))?;
    Ok((e1 * c[1] + e2 * c[2]) / h)
}
