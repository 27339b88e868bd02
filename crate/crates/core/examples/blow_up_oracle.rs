//! Unnormalized flow of the unit sphere against the closed-form radius:
//! k alpha = 2 blows up at T* = 1/4, k alpha = 1 grows like e^{2t}.

use cmflow::flow::{evolve_unnormalized, FlowConfig, RawOptions};
use cmflow::grid::{GridVariant, Resolution};
use cmflow::oracles::SphereOde;
use cmflow::psi::PsiSpec;

fn main() -> cmflow::Result<()> {
    for (alpha, t_max) in [(2.0, 0.225), (1.0, 0.5)] {
        let mut cfg = FlowConfig::new(
            2,
            1,
            alpha,
            PsiSpec::constant(1.0)?,
            GridVariant::FullS2,
            Resolution::full(16, 32),
        );
        cfg.t_max = t_max;
        cfg.stepper.rtol = 1e-9;
        let times: Vec<f64> = (1..=4).map(|i| t_max * i as f64 / 5.0).collect();
        let run = evolve_unnormalized(
            &cfg,
            &RawOptions {
                sample_times: times,
                ..RawOptions::default()
            },
        )?;
        let ode = SphereOde::new(2, 1, alpha, 1.0)?;
        println!("alpha = {alpha}, T* = {:?}, {:?}", ode.blow_up_time(), run.status);
        for s in &run.samples {
            let r = ode.radius(s.t).expect("before T*");
            let err = s.u.values().iter().map(|v| (v - r).abs() / r).fold(0.0, f64::max);
            println!("  t {:.4}  r {:.10}  rel err {err:.2e}", s.t, r);
        }
    }
    Ok(())
}
