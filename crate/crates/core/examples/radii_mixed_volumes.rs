//! Principal radii, sigma_k, mixed volumes and the Aleksandrov-Fenchel gap.

use cmflow::calculus::{
    embed, min_radius, minkowski_formula_check, mixed_volume_k1, polarized_mixed_volume, radii_spectrum,
};
use cmflow::grid::{build_grid, legendre, GridVariant, Resolution, SupportField};

fn main() -> cmflow::Result<()> {
    let g = build_grid(GridVariant::FullS2, 2, Resolution::full(32, 64))?;
    let u = SupportField::zonal(g.clone(), |t| 1.0 + 0.05 * legendre(2, t.cos()))?;

    let spec = radii_spectrum(&u)?;
    let s1 = spec.sigma_k(1)?;
    println!("radii at node 0: {:?}, sigma_1 = {:.6}", spec.eigenvalues(0), s1[0]);
    println!("min radius {:.6}", min_radius(&u)?);
    println!("V_2(u) = int u sigma_1 = {:.12}", mixed_volume_k1(&u, 1)?);
    println!("Minkowski formula defect {:.3e}", minkowski_formula_check(&u, 1)?);

    // translating the body adds a linear function to u and leaves volumes alone
    let shifted = SupportField::from_fn(g.clone(), |x| 1.0 + 0.05 * legendre(2, x[2]) + 0.2 * x[0] - 0.1 * x[1])?;
    println!("translated V_2 = {:.12}", mixed_volume_k1(&shifted, 1)?);

    let v = SupportField::from_fn(g.clone(), |x| 1.2 + 0.1 * legendre(4, x[0]) + 0.05 * x[1])?;
    let pv = polarized_mixed_volume(&v, &u, 1)?;
    println!("AF gap, generic pair: {:.6e}", pv.af_gap());
    let pv = polarized_mixed_volume(&shifted, &u, 1)?;
    println!("AF gap, u + linear:   {:.3e}", pv.af_gap());

    let body = embed(&u)?;
    println!(
        "embedded: |X| at the north ring {:.6}, rho identity defect {:.3e}",
        body.rho[0],
        body.rho_identity_defect(&u, &u.jet()?)
    );

    let a = build_grid(GridVariant::Axisym, 3, Resolution::axisym(32))?;
    let r = 0.8;
    let v3 = mixed_volume_k1(&SupportField::constant(a.clone(), r), 2)?;
    println!(
        "axisymmetric S^3, u = {r}: V_3 = {v3:.12} vs 3 r^3 |S^3| = {:.12}",
        3.0 * r * r * r * a.area()
    );
    Ok(())
}
