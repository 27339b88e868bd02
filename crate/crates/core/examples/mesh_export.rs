//! OBJ and PLY of a perturbed body; the mesh volume approximates the body's.

use cmflow::calculus::{embed, TriangleMesh};
use cmflow::grid::{build_grid, legendre, GridVariant, Resolution, SupportField};

fn main() -> cmflow::Result<()> {
    let g = build_grid(GridVariant::FullS2, 2, Resolution::full(24, 48))?;
    let u = SupportField::from_fn(g, |x| 1.0 + 0.1 * legendre(2, x[2]) + 0.02 * legendre(4, x[0]))?;
    let mesh = TriangleMesh::from_body(&embed(&u)?)?;
    println!(
        "{} vertices, {} faces, enclosed volume {:.6}",
        mesh.vertices.len(),
        mesh.faces.len(),
        mesh.signed_volume()
    );

    let dir = std::env::temp_dir();
    let (obj, ply) = (dir.join("cmflow-body.obj"), dir.join("cmflow-body.ply"));
    mesh.write_obj(&obj)?;
    mesh.write_ply(&ply)?;
    println!("wrote {} and {}", obj.display(), ply.display());
    Ok(())
}
