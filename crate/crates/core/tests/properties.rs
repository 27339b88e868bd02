use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use cmflow::calculus::{
    binomial, mixed_volume_k1, polarized_mixed_volume, radii_spectrum, sigma_k_gradient_of, sigma_k_of,
};
use cmflow::flow::renormalize;
use cmflow::grid::{build_grid, legendre, GridVariant, Resolution, SphereGrid, SupportField};
use cmflow::oracles::{gradient_fd_check, SphereOde};
use cmflow::psi::PsiSpec;
use cmflow::residual::{cross_check_pc_relation, stationarity_residual};

fn s2() -> &'static Arc<SphereGrid> {
    static G: OnceLock<Arc<SphereGrid>> = OnceLock::new();
    G.get_or_init(|| build_grid(GridVariant::FullS2, 2, Resolution::full(32, 64)).unwrap())
}

fn s3() -> &'static Arc<SphereGrid> {
    static G: OnceLock<Arc<SphereGrid>> = OnceLock::new();
    G.get_or_init(|| build_grid(GridVariant::Axisym, 3, Resolution::axisym(32)).unwrap())
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

/// A convex body `c + a2 P2(d.x) + a3 P3(e.x)` with small tilted modes.
fn body(g: &Arc<SphereGrid>, c: f64, a2: f64, a3: f64, d: [f64; 3]) -> SupportField {
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-3);
    let d = [d[0] / n, d[1] / n, d[2] / n];
    SupportField::from_fn(g.clone(), |x| {
        let t = d[0] * x[0] + d[1] * x[1] + d[2] * x[2];
        c + a2 * legendre(2, t) + a3 * legendre(3, x[2])
    })
    .unwrap()
}

fn axis() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, 0.2..1.0f64]
}

fn add_linear(u: &SupportField, b: [f64; 3]) -> SupportField {
    let g = u.grid().clone();
    let vals = (0..g.len())
        .map(|i| {
            let x = g.direction(i);
            u.values()[i] + b[0] * x[0] + b[1] * x[1] + b[2] * x[2]
        })
        .collect();
    SupportField::new(g, vals).unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn scaling_homogeneity(c in 0.5..2.0f64, a2 in -0.08..0.08f64, d in axis()) {
        let u = body(s2(), 1.0, a2, 0.02, d);
        let r = radii_spectrum(&u).unwrap();
        let rs = radii_spectrum(&u.scaled(c)).unwrap();
        // the jet is linear in the samples; polar rings amplify roundoff
        for (p, q) in r.pairs().iter().zip(rs.pairs()) {
            prop_assert!((q.0 - c * p.0).abs() <= 1e-10 * c, "{:?} {:?}", p, q);
            prop_assert!((q.1 - c * p.1).abs() <= 1e-10 * c, "{:?} {:?}", p, q);
        }
        let v = mixed_volume_k1(&u, 1).unwrap();
        let vs = mixed_volume_k1(&u.scaled(c), 1).unwrap();
        prop_assert!((vs / (c * c * v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_volume_translation_invariant(a2 in -0.08..0.08f64, d in axis(), b in [-0.3..0.3f64, -0.3..0.3f64, -0.3..0.3f64]) {
        let u = body(s2(), 1.0, a2, 0.02, d);
        let v0 = mixed_volume_k1(&u, 1).unwrap();
        let v1 = mixed_volume_k1(&add_linear(&u, b), 1).unwrap();
        prop_assert!((v1 / v0 - 1.0).abs() < 1e-9, "{v0} vs {v1}");
    }

    #[test]
    fn af_gap_nonnegative(a in -0.08..0.08f64, d in axis(), b in -0.3..0.3f64, e in axis(), c in 0.5..2.0f64) {
        let u = body(s2(), 1.0, a, 0.01, d);
        let v = body(s2(), c, b, -0.05, e);
        let gap = polarized_mixed_volume(&v, &u, 1).unwrap().af_gap();
        prop_assert!(gap >= -1e-9, "gap {gap}");
    }

    #[test]
    fn af_equality_for_translates(a in -0.08..0.08f64, d in axis(), c in 0.5..2.0f64, b in [-0.3..0.3f64, -0.3..0.3f64, -0.3..0.3f64]) {
        let u = body(s2(), 1.0, a, 0.01, d);
        let v = add_linear(&u.scaled(c), b);
        let gap = polarized_mixed_volume(&v, &u, 1).unwrap().af_gap();
        prop_assert!(gap.abs() < 1e-9, "gap {gap}");
    }

    #[test]
    fn symmetrize_is_even_and_idempotent(a2 in -0.1..0.1f64, a3 in -0.1..0.1f64, d in axis()) {
        let u = body(s2(), 1.0, a2, a3, d);
        let s = u.symmetrize_even();
        prop_assert!(s.antipodal_defect() == 0.0);
        prop_assert!(s.symmetrize_even().sup_distance(&s) <= 1e-15);
    }

    #[test]
    fn sigma_k_gradient_matches_fd(lambda in prop::collection::vec(0.1..3.0f64, 2..=6), kk in 0usize..6) {
        let k = 1 + kk % lambda.len();
        let c = gradient_fd_check(|l| sigma_k_of(l, k), |l| sigma_k_gradient_of(l, k), &lambda, &[1e-3, 1e-4, 1e-5]).unwrap();
        prop_assert!(c.max_rel_err < 1e-6, "{}", c.max_rel_err);
    }

    #[test]
    fn sigma_k_of_multiple_of_identity(n in 1usize..=7, kk in 0usize..7, r in 0.1..4.0f64) {
        let k = 1 + kk % n;
        let s = sigma_k_of(&vec![r; n], k);
        let want = binomial(n, k) * r.powi(k as i32);
        prop_assert!((s / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn c_lp_scales_with_body(lambda in 0.5..2.0f64, a2 in -0.05..0.05f64, k in 1usize..=2, alpha in 0.8..2.5f64) {
        let g = s3();
        let u = SupportField::zonal(g.clone(), |t| 1.0 + a2 * legendre(2, t.cos())).unwrap();
        let psi = SupportField::zonal(g.clone(), |t| 1.0 + 0.1 * legendre(2, t.cos())).unwrap();
        let r0 = stationarity_residual(&u, &psi, k, alpha).unwrap();
        let r1 = stationarity_residual(&u.scaled(lambda), &psi, k, alpha).unwrap();
        let want = lambda.powf(k as f64 + 1.0 - r0.p);
        prop_assert!((r1.c_lp / r0.c_lp / want - 1.0).abs() < 1e-12);
        prop_assert!((r1.sup_residual - r0.sup_residual).abs() < 1e-10);
    }

    #[test]
    fn p_window_above_threshold(k in 1usize..=6, x in 1.0001..20.0f64) {
        let alpha = x / k as f64;
        let rel = cross_check_pc_relation(alpha, k).unwrap();
        prop_assert!(rel.in_p_window);
        prop_assert!(rel.p > 1.0 && rel.p < k as f64 + 1.0);
    }

    #[test]
    fn sphere_radius_composes(k in 1usize..=2, alpha in 0.5..2.5f64, r0 in 0.5..2.0f64, t in 0.0..0.05f64, s in 0.0..0.05f64) {
        let a = SphereOde::new(3, k, alpha, r0).unwrap();
        let Ok(rts) = a.radius(t + s) else { return Ok(()) };
        let rt = a.radius(t).unwrap();
        let b = SphereOde::new(3, k, alpha, rt).unwrap();
        let via = b.radius(s).unwrap();
        prop_assert!((via / rts - 1.0).abs() < 1e-12, "{via} vs {rts}");
    }

    #[test]
    fn renormalize_fixes_volume(c in 0.3..3.0f64, a2 in -0.08..0.08f64, d in axis(), k in 1usize..=2) {
        let g = if k == 1 { s2() } else { s3() };
        let u = if k == 1 {
            body(g, c, a2, 0.01, d)
        } else {
            SupportField::zonal(g.clone(), |t| c * (1.0 + a2 * legendre(2, t.cos()))).unwrap()
        };
        let v = renormalize(&u, k).unwrap();
        let vol = mixed_volume_k1(&v, k).unwrap();
        prop_assert!((vol / g.area() - 1.0).abs() < 1e-13);
        let w = renormalize(&v, k).unwrap();
        prop_assert!(w.sup_distance(&v) < 1e-13);
    }

    #[test]
    fn psi_kv_round_trip(c0 in 0.5..2.0f64, eps in -0.3..0.3f64, deg in 1usize..=3, ex in 0.5..4.0f64, pick in 0usize..4) {
        let spec = match pick {
            0 => PsiSpec::constant(c0).unwrap(),
            1 => PsiSpec::even_harmonic(c0, eps, 2 * deg).unwrap(),
            2 => PsiSpec::power_of_base(c0, eps, 2 * deg, ex).unwrap(),
            _ => PsiSpec::p2_power_family(eps, deg.min(2), ex).unwrap(),
        };
        let back = PsiSpec::from_kv_block(&spec.to_kv_block()).unwrap();
        prop_assert_eq!(back, spec);
    }
}
