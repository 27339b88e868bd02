//! Quadrature and covariant derivatives on the two grid variants.

use cmflow::grid::{build_grid, legendre, sphere_area, GridVariant, Resolution, SupportField};

fn main() -> cmflow::Result<()> {
    let full = build_grid(GridVariant::FullS2, 2, Resolution::full(16, 32))?;
    println!(
        "S^2 {}x{}: {} nodes, area {:.15} (4 pi = {:.15})",
        full.n_lat(),
        full.n_lon(),
        full.len(),
        full.area(),
        sphere_area(2)
    );

    // int x^2 y^2 z^2 = 4 pi / 105
    let f = SupportField::from_fn(full.clone(), |x| (x[0] * x[1] * x[2]).powi(2))?;
    println!(
        "int x^2 y^2 z^2 = {:.3e} off",
        (f.quadrature()? - 4.0 * std::f64::consts::PI / 105.0).abs()
    );

    // W = hess u + u g for u = 1 + 0.05 P2 against its closed form at the first node
    let u = SupportField::zonal(full.clone(), |t| 1.0 + 0.05 * legendre(2, t.cos()))?;
    let jet = u.jet()?;
    let c = full.cos_polar(0);
    let w11 = jet.hess[0][0] + u.values()[0];
    let exact = 1.0 + 0.05 * (5.0 - 9.0 * c * c) / 2.0;
    println!("W_11 at theta = {:.4}: {w11:.12} (exact {exact:.12})", full.theta(0));

    for n in [3, 4, 6] {
        let g = build_grid(GridVariant::Axisym, n, Resolution::axisym(24))?;
        let ones = vec![1.0; g.len()];
        println!(
            "axisymmetric S^{n}: quadrature of 1 = {:.15}, |S^{n}| = {:.15}",
            g.quadrature(&ones)?,
            sphere_area(n)
        );
    }

    let odd = SupportField::from_fn(full, |x| 1.0 + 0.1 * x[2])?;
    println!(
        "antipodal defect of 1 + 0.1 z: {:.3e}, after symmetrizing: {:.3e}",
        odd.antipodal_defect(),
        odd.symmetrize_even().antipodal_defect()
    );
    Ok(())
}
