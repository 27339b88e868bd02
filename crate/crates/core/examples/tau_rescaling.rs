//! The raw flow, rescaled to unit volume and reparametrized by tau, tracks
//! the directly normalized flow.

use cmflow::flow::{
    evolve, evolve_unnormalized, rescale_raw_to_normalized, sup_distance_over_tau, FlowConfig, InitialSpec, RawOptions,
};
use cmflow::grid::{GridVariant, Resolution};
use cmflow::psi::PsiSpec;

fn main() -> cmflow::Result<()> {
    let (k, alpha) = (1, 2.0);
    let mut cfg = FlowConfig::new(
        2,
        k,
        alpha,
        PsiSpec::constant(1.0)?,
        GridVariant::FullS2,
        Resolution::full(24, 48),
    );
    cfg.initial = InitialSpec::p2(0.1);
    cfg.t_max = 0.05;
    let raw = evolve_unnormalized(
        &cfg,
        &RawOptions {
            record_every: 1,
            ..RawOptions::default()
        },
    )?;
    let rescaled = rescale_raw_to_normalized(&raw.samples, k, alpha)?;
    let tau_end = rescaled.last().unwrap().tau;
    println!(
        "raw: t = {:.3} maps to tau = {tau_end:.4} over {} samples",
        cfg.t_max,
        rescaled.len()
    );

    let mut ncfg = cfg.clone();
    ncfg.t_max = tau_end;
    ncfg.snapshot_every = 1;
    let direct = evolve(&ncfg)?;
    let (d, n) = sup_distance_over_tau(&rescaled, &direct.snapshots)?;
    println!(
        "normalized: {} snapshots; sup distance over {n} matched samples {d:.3e}",
        direct.snapshots.len()
    );
    Ok(())
}
