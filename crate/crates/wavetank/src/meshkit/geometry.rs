use crate::quadrature::{shape, shape_grad};
use crate::Vec3;

/// Analytic surface a boundary patch is bound to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeometryDescriptor {
    Plane { point: Vec3, normal: Vec3 },
    Spheroid { center: Vec3, semi_axes: Vec3 },
}

impl GeometryDescriptor {
    /// Map a point onto the surface.
    ///
    /// Planes use the orthogonal projection. Spheroids use the radial map of
    /// the scaled unit sphere, `c + A q/|q|` with `q = A⁻¹(p − c)`, which is
    /// exact on the surface and smooth everywhere except at the center.
    pub fn project(&self, p: Vec3) -> Vec3 {
        match *self {
            GeometryDescriptor::Plane { point, normal } => {
                let n = normal.normalize();
                p - n * (p - point).dot(&n)
            }
            GeometryDescriptor::Spheroid { center, semi_axes } => {
                let q = (p - center).component_div(&semi_axes);
                let r = q.norm();
                if r == 0.0 {
                    return center + Vec3::new(semi_axes.x, 0.0, 0.0);
                }
                center + (q / r).component_mul(&semi_axes)
            }
        }
    }

    /// Implicit function, zero on the surface: signed distance for planes and
    /// `Σ (qᵢ/aᵢ)² − 1` for spheroids.
    pub fn implicit(&self, p: Vec3) -> f64 {
        match *self {
            GeometryDescriptor::Plane { point, normal } => (p - point).dot(&normal.normalize()),
            GeometryDescriptor::Spheroid { center, semi_axes } => {
                (p - center).component_div(&semi_axes).norm_squared() - 1.0
            }
        }
    }

    /// Unit normal of the surface pointing away from the spheroid center, or
    /// along the stored plane normal.
    pub fn normal_at(&self, p: Vec3) -> Vec3 {
        match *self {
            GeometryDescriptor::Plane { normal, .. } => normal.normalize(),
            GeometryDescriptor::Spheroid { center, semi_axes } => {
                let a2 = semi_axes.component_mul(&semi_axes);
                (p - center).component_div(&a2).normalize()
            }
        }
    }

    pub fn is_curved(&self) -> bool {
        matches!(self, GeometryDescriptor::Spheroid { .. })
    }
}

/// Point, tangents, area element and unit normal of a bilinear cell.
#[derive(Clone, Copy, Debug)]
pub struct CellPoint {
    pub point: Vec3,
    pub tu: Vec3,
    pub tv: Vec3,
    /// Surface Jacobian `|t_u × t_v|`.
    pub jacobian: f64,
    pub normal: Vec3,
}

/// Evaluate the bilinear map through four counter-clockwise corners.
#[inline]
pub fn bilinear_point(c: &[Vec3; 4], u: f64, v: f64) -> CellPoint {
    let s = shape(u, v);
    let g = shape_grad(u, v);
    let mut point = Vec3::zeros();
    let mut tu = Vec3::zeros();
    let mut tv = Vec3::zeros();
    for a in 0..4 {
        point += c[a] * s[a];
        tu += c[a] * g[a][0];
        tv += c[a] * g[a][1];
    }
    let cross = tu.cross(&tv);
    let jacobian = cross.norm();
    let normal = if jacobian > 0.0 {
        cross / jacobian
    } else {
        Vec3::zeros()
    };
    CellPoint {
        point,
        tu,
        tv,
        jacobian,
        normal,
    }
}

/// Surface gradients `∇_s ψ_a = g^{αβ} ∂_α ψ_a t_β` of the four shape functions.
#[inline]
pub fn surface_gradients(cp: &CellPoint, u: f64, v: f64) -> [Vec3; 4] {
    let g = shape_grad(u, v);
    let guu = cp.tu.dot(&cp.tu);
    let guv = cp.tu.dot(&cp.tv);
    let gvv = cp.tv.dot(&cp.tv);
    let det = guu * gvv - guv * guv;
    let (iuu, iuv, ivv) = (gvv / det, -guv / det, guu / det);
    let mut out = [Vec3::zeros(); 4];
    for a in 0..4 {
        let du = iuu * g[a][0] + iuv * g[a][1];
        let dv = iuv * g[a][0] + ivv * g[a][1];
        out[a] = cp.tu * du + cp.tv * dv;
    }
    out
}

/// Longest diagonal of a quadrilateral.
pub fn diagonal(c: &[Vec3; 4]) -> f64 {
    (c[2] - c[0]).norm().max((c[3] - c[1]).norm())
}

/// Longest over shortest edge length.
pub fn aspect_ratio(c: &[Vec3; 4]) -> f64 {
    let e: Vec<f64> = (0..4).map(|k| (c[(k + 1) % 4] - c[k]).norm()).collect();
    let hi = e.iter().cloned().fold(0.0, f64::max);
    let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Smallest Jacobian over the corners and center; for a bilinear map the
/// extreme values of the orientation sign are attained at the corners.
pub fn min_jacobian(c: &[Vec3; 4], reference_normal: Vec3) -> f64 {
    let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)];
    pts.iter()
        .map(|&(u, v)| {
            let cp = bilinear_point(c, u, v);
            cp.tu.cross(&cp.tv).dot(&reference_normal)
        })
        .fold(f64::INFINITY, f64::min)
}
