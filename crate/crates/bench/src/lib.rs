//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rtrec::experiment::smooth_problem;
use rtrec::mesh::unit_square_delaunay;
use rtrec::{assemble_mixed, solve_mixed, Mesh, MixedSystem, RtField};

/// The 86-triangle Delaunay mesh of the unit square after `levels` regular refinements.
pub fn square_mesh(levels: usize) -> Arc<Mesh> {
    let mut m = unit_square_delaunay(86, 0).expect("initial mesh");
    for _ in 0..levels {
        m = m.refine_regular();
    }
    Arc::new(m)
}

/// The assembled smooth test problem.
pub fn smooth_system(mesh: &Arc<Mesh>, r: usize) -> MixedSystem {
    assemble_mixed(mesh, r, &smooth_problem()).expect("assembly")
}

/// Discrete flux of the smooth test problem.
pub fn smooth_flux(mesh: &Arc<Mesh>, r: usize) -> RtField {
    solve_mixed(&smooth_system(mesh, r)).expect("solve").p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let mesh = square_mesh(1);
        assert_eq!(mesh.num_triangles(), 344);
        assert_eq!(smooth_flux(&mesh, 0).coefficients().len(), mesh.num_edges());
    }
}
