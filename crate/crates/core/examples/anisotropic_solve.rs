//! Axisymmetric S^3, k = 2, alpha = 1 (p = 2) with psi = (1 + 0.1 P2)^3: the
//! limit solves u^{1-p} sigma_2 = c psi^{-1}.

use cmflow::flow::{evolve, FlowConfig, InitialSpec};
use cmflow::grid::{GridVariant, Resolution};
use cmflow::psi::PsiSpec;
use cmflow::residual::stationarity_residual;

fn main() -> cmflow::Result<()> {
    let (k, alpha) = (2, 1.0);
    let psi = PsiSpec::p2_power_family(0.1, k, alpha)?;
    let mut cfg = FlowConfig::new(3, k, alpha, psi, GridVariant::Axisym, Resolution::axisym(128));
    cfg.initial = InitialSpec::p2(0.05);
    let run = evolve(&cfg)?;
    println!(
        "{:?}, {} steps, t = {:.4}",
        run.status,
        run.steps_accepted,
        run.trace.last().unwrap().t
    );

    let rep = stationarity_residual(&run.u, &run.psi, k, alpha)?;
    println!(
        "p = {}, c = {:.12}, sup residual {:.3e}, relspread {:.3e}",
        rep.p, rep.c_lp, rep.sup_residual, rep.rho_hat_relspread
    );
    println!(
        "J decreased monotonically: max relative increase {:.1e}",
        run.monitors.max_j_increase_rel
    );

    let g = run.u.grid();
    for i in (0..g.len()).step_by(g.len() / 8) {
        println!("theta {:.4}  u {:.10}", g.theta(i), run.u.values()[i]);
    }
    Ok(())
}
