//! Quadrilateral surface meshes of the tank boundary, refinement with hanging
//! nodes, analytic geometry bindings and collocation DOF layouts.

mod build;
mod dofs;
mod geometry;
mod mesh;

pub use build::{box_mesh, build_domain, curvature_flags, graded_axis, DomainSpec, MeshBuilder};
pub use dofs::{
    assign_double_nodes, assign_dofs_with, BoundaryCondition, Dof, DofConstraint, DofLayout,
    ZClass,
};
pub use geometry::{
    aspect_ratio, bilinear_point, diagonal, min_jacobian, surface_gradients, CellPoint,
    GeometryDescriptor,
};
pub use mesh::{Cell, HangingConstraint, NodeOrigin, Patch, Region, SurfaceMesh};

/// Build the tank boundary described by a scenario.
pub fn build_domain_mesh(scenario: &crate::scenario::Scenario) -> crate::Result<SurfaceMesh> {
    build_domain(&scenario.domain_spec())
}
