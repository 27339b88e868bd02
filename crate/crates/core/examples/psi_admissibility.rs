//! psi families, the kv block, and the admissibility threshold of
//! (1 + eps P2)^(1 + k alpha) located by bisection.

use cmflow::grid::{build_grid, GridVariant, Resolution};
use cmflow::psi::{check_admissible, check_even, eval_psi, PsiSpec};
use cmflow::residual::cross_check_pc_relation;

fn main() -> cmflow::Result<()> {
    let g = build_grid(GridVariant::Axisym, 3, Resolution::axisym(64))?;
    let (k, alpha) = (2, 1.0);

    let spec = PsiSpec::p2_power_family(0.1, k, alpha)?;
    print!("{}", spec.to_kv_block());
    let psi = eval_psi(&spec, &g)?;
    let rep = check_admissible(&psi, k, alpha)?;
    println!(
        "evenness defect {:.1e}, min eigenvalue {:.6}, admissible {}",
        check_even(&psi),
        rep.min_eigenvalue,
        rep.admissible
    );

    let admissible = |eps: f64| -> cmflow::Result<bool> {
        let psi = eval_psi(&PsiSpec::p2_power_family(eps, k, alpha)?, &g)?;
        Ok(check_admissible(&psi, k, alpha)?.admissible)
    };
    let (mut lo, mut hi) = (0.0, 0.9);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if admissible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    println!("largest admissible eps on this grid: {lo:.6}");

    for alpha in [0.75, 1.0, 2.0] {
        let pc = cross_check_pc_relation(alpha, k)?;
        println!(
            "alpha {alpha}: p = {:.4}, exponent on psi {:.4}, in (1, k+1): {}",
            pc.p, pc.psi_exponent, pc.in_p_window
        );
    }
    Ok(())
}
