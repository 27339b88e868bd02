//! Acceptance criteria 1-11, one line each. Runs without the libtest
//! harness so the lines always print; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmflow::calculus::{minkowski_formula_check, polarized_mixed_volume, sigma_k_gradient_of, sigma_k_of};
use cmflow::flow::{
    evolve, evolve_unnormalized, rescale_raw_to_normalized, sup_distance_over_tau, FlowConfig, FlowRun, InitialSpec,
    Mode, RawOptions, RawStatus,
};
use cmflow::grid::{build_grid, legendre, GridVariant, Resolution, SupportField};
use cmflow::oracles::{gradient_fd_check, hessian_refinement, stationary_radius, HessianProbe, SphereOde};
use cmflow::psi::{check_admissible, eval_psi, PsiSpec};

struct Line {
    id: usize,
    passed: bool,
    text: String,
}

/// Runs gathered for the suite-wide monitors of criteria 4 and 5.
#[derive(Default)]
struct Runs {
    all: Vec<(String, FlowRun)>,
}

impl Runs {
    fn add(&mut self, label: impl Into<String>, run: &FlowRun) {
        self.all.push((label.into(), run.clone()));
    }
}

fn full(n: usize) -> Resolution {
    Resolution::full(n, 2 * n)
}

fn sup_dist_const(u: &SupportField, r: f64) -> f64 {
    u.values().iter().map(|v| (v - r).abs()).fold(0.0, f64::max)
}

fn c1(runs: &mut Runs) -> Line {
    let mut cfg = FlowConfig::new(
        2,
        1,
        1.0,
        PsiSpec::constant(1.0).unwrap(),
        GridVariant::FullS2,
        full(64),
    );
    cfg.initial = InitialSpec::p2(0.1);
    cfg.monitor_every = 100;
    let start = Instant::now();
    let run = evolve(&cfg).unwrap();
    let elapsed = start.elapsed();
    let r = stationary_radius(2, 1).unwrap();
    let d = sup_dist_const(&run.u, r);
    let spread = run.residual.rho_hat_relspread;
    let passed = run.status.converged() && d < 1e-3 && spread < 1e-6 && elapsed < Duration::from_secs(60);
    runs.add("baseline 64x128", &run);
    Line {
        id: 1,
        passed,
        text: format!(
            "round limit, 64x128: {:?}, sup|u - r*| = {d:.2e} (< 1e-3), relspread = {spread:.2e} (< 1e-6), {:.1} s (< 60 s)",
            run.status,
            elapsed.as_secs_f64()
        ),
    }
}

fn c2(runs: &mut Runs) -> Line {
    let psi = PsiSpec::p2_power_family(0.1, 2, 1.0).unwrap();
    let mut cfg = FlowConfig::new(3, 2, 1.0, psi, GridVariant::Axisym, Resolution::axisym(128));
    cfg.initial = InitialSpec::p2(0.05);
    cfg.monitor_every = 100;
    let start = Instant::now();
    let run = evolve(&cfg).unwrap();
    let elapsed = start.elapsed();
    let res = run.residual.sup_residual;
    let passed = run.status.converged() && res < 2e-3 && elapsed < Duration::from_secs(120);
    runs.add("anisotropic n=3 k=2", &run);
    Line {
        id: 2,
        passed,
        text: format!(
            "axisym n=3, k=2, alpha=1, psi=(1+0.1P2)^3: {:?}, sup_residual = {res:.2e} (< 2e-3), p = {}, {:.1} s (< 120 s)",
            run.status,
            run.residual.p,
            elapsed.as_secs_f64()
        ),
    }
}

/// Randomized admissible runs: axisymmetric S^3 with k = 1, 2 and a few
/// full S^2 runs with tilted initial modes.
fn c3(runs: &mut Runs) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_inc = f64::NEG_INFINITY;
    let mut worst_rate = 0.0f64;
    let mut failures = Vec::new();
    let total = 24;
    for i in 0..total {
        let axisym = i % 6 != 5;
        let (n, k) = if axisym { (3, 1 + i % 2) } else { (2, 1) };
        let kf = k as f64;
        let alpha = rng.gen_range(1.0 / kf + 0.25..=2.0);
        let eps = rng.gen_range(-0.2..=0.3);
        let psi = PsiSpec::p2_power_family(eps, k, alpha).unwrap();
        let (variant, res) = if axisym {
            (GridVariant::Axisym, Resolution::axisym(32))
        } else {
            (GridVariant::FullS2, full(16))
        };
        let mut cfg = FlowConfig::new(n, k, alpha, psi, variant, res);
        cfg.initial = InitialSpec {
            random_modes: 2,
            random_amplitude: 0.4,
            seed: 100 + i as u64,
            ..InitialSpec::default()
        };
        cfg.monitor_every = 100;
        let run = match evolve(&cfg) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("run {i}: {e}"));
                continue;
            }
        };
        worst_inc = worst_inc.max(run.monitors.max_j_increase_rel);
        if run.status.converged() {
            worst_rate = worst_rate.max(run.monitors.final_dj_dt_rel);
        } else {
            failures.push(format!("run {i}: {:?}", run.status));
        }
        runs.add(format!("random run {i}"), &run);
    }
    let passed = failures.is_empty() && worst_inc <= 1e-9 && worst_rate < 1e-6;
    let mut text = format!(
        "{total} random admissible runs: max relative J increase {worst_inc:.2e} (<= 1e-9), final |dJ/dt|/|J| {worst_rate:.2e} (< 1e-6)"
    );
    if !failures.is_empty() {
        text.push_str(&format!("; failures: {}", failures.join(", ")));
    }
    Line { id: 3, passed, text }
}

fn c4(runs: &Runs) -> Line {
    let (label, worst) = runs
        .all
        .iter()
        .map(|(l, r)| (l.as_str(), r.monitors.max_volume_defect))
        .fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    Line {
        id: 4,
        passed: worst < 1e-10 && !runs.all.is_empty(),
        text: format!(
            "volume defect over {} runs, every accepted step: max {worst:.2e} ({label}) (< 1e-10)",
            runs.all.len()
        ),
    }
}

fn c5(runs: &Runs) -> Line {
    let min_eta = runs
        .all
        .iter()
        .map(|(_, r)| r.monitors.min_eta)
        .fold(f64::INFINITY, f64::min);
    let max_ratio = runs
        .all
        .iter()
        .map(|(_, r)| r.monitors.max_eta_ratio)
        .fold(0.0, f64::max);
    Line {
        id: 5,
        passed: min_eta > 0.0 && max_ratio <= 1.0 + 1e-8 && !runs.all.is_empty(),
        text: format!(
            "eta over {} runs, every accepted step: min {min_eta:.4} (> 0), max eta/eta(0) - 1 = {:.2e} (<= 1e-8)",
            runs.all.len(),
            max_ratio - 1.0
        ),
    }
}

fn round_raw(alpha: f64, t_max: f64, times: Vec<f64>) -> (f64, RawStatus) {
    let mut cfg = FlowConfig::new(
        2,
        1,
        alpha,
        PsiSpec::constant(1.0).unwrap(),
        GridVariant::FullS2,
        full(16),
    );
    cfg.t_max = t_max;
    cfg.stepper.rtol = 1e-9;
    let run = evolve_unnormalized(
        &cfg,
        &RawOptions {
            sample_times: times,
            ..RawOptions::default()
        },
    )
    .unwrap();
    let ode = SphereOde::new(2, 1, alpha, 1.0).unwrap();
    let mut worst = 0.0f64;
    for s in &run.samples {
        let r = ode.radius(s.t).unwrap();
        worst = worst.max(s.u.values().iter().map(|v| (v - r).abs() / r).fold(0.0, f64::max));
    }
    if run.samples.last().unwrap().t != t_max {
        worst = f64::INFINITY;
    }
    (worst, run.status)
}

fn c6() -> Line {
    let times: Vec<f64> = (1..=9).map(|i| 0.025 * i as f64).collect();
    let (e2, s2) = round_raw(2.0, 0.225, times);
    let (e1, s1) = round_raw(1.0, 0.5, vec![0.25]);
    Line {
        id: 6,
        passed: e2 < 1e-4 && e1 < 1e-4 && s2 == RawStatus::ReachedTMax && s1 == RawStatus::ReachedTMax,
        text: format!(
            "round raw flow: 1/(1-4t) to t = 0.225 rel err {e2:.2e}, e^(2t) at t = 0.5 rel err {e1:.2e} (< 1e-4)"
        ),
    }
}

fn anisotropic_full(n: usize) -> FlowConfig {
    let psi = PsiSpec::p2_power_family(0.1, 1, 2.0).unwrap();
    FlowConfig::new(2, 1, 2.0, psi, GridVariant::FullS2, full(n))
}

fn c7(runs: &mut Runs) -> Line {
    let mut cfg = anisotropic_full(32);
    cfg.initial = InitialSpec::p2(0.1);
    cfg.t_max = 0.1;
    let raw = evolve_unnormalized(
        &cfg,
        &RawOptions {
            record_every: 1,
            ..RawOptions::default()
        },
    )
    .unwrap();
    let rescaled = rescale_raw_to_normalized(&raw.samples, 1, 2.0).unwrap();
    let tau_end = rescaled.last().unwrap().tau;
    let mut ncfg = cfg.clone();
    ncfg.t_max = tau_end;
    ncfg.snapshot_every = 1;
    let direct = evolve(&ncfg).unwrap();
    runs.add("normalized for tau comparison", &direct);
    let (d, n) = sup_distance_over_tau(&rescaled, &direct.snapshots).unwrap();
    Line {
        id: 7,
        passed: d < 5e-3 && n == rescaled.len(),
        text: format!(
            "raw 32x64 to t = 0.1 (tau = {tau_end:.4}) vs normalized: sup distance {d:.2e} over {n} samples (< 5e-3)"
        ),
    }
}

fn c8(runs: &mut Runs) -> Line {
    let starts = [
        InitialSpec::p2(0.1),
        InitialSpec {
            modes: vec![
                Mode {
                    degree: 2,
                    amplitude: -0.08,
                    axis: None,
                },
                Mode {
                    degree: 4,
                    amplitude: 0.02,
                    axis: None,
                },
            ],
            ..InitialSpec::default()
        },
        InitialSpec {
            base: 1.0,
            modes: vec![Mode {
                degree: 2,
                amplitude: 0.12,
                axis: Some([1.0, 0.5, 0.3]),
            }],
            random_modes: 2,
            random_amplitude: 0.3,
            seed: 77,
            ..InitialSpec::default()
        },
    ];
    let mut finals = Vec::new();
    let mut ok = true;
    for (i, s) in starts.iter().enumerate() {
        let mut cfg = anisotropic_full(32);
        cfg.initial = s.clone();
        cfg.monitor_every = 100;
        let run = evolve(&cfg).unwrap();
        ok &= run.status.converged();
        runs.add(format!("uniqueness start {i}"), &run);
        finals.push(run.u);
    }
    let mut worst = 0.0f64;
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            worst = worst.max(finals[i].sup_distance(&finals[j]));
        }
    }
    Line {
        id: 8,
        passed: ok && worst < 1e-3,
        text: format!("three starts, psi=(1+0.1P2)^3, k=1, alpha=2, 32x64: all converged {ok}, pairwise sup distance {worst:.2e} (< 1e-3)"),
    }
}

fn random_body(g: &std::sync::Arc<cmflow::grid::SphereGrid>, rng: &mut ChaCha8Rng, amp: f64) -> SupportField {
    let modes: Vec<(usize, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let l: usize = rng.gen_range(1..=4);
            let a = amp * rng.gen_range(-1.0..1.0) / (l * (l + 1)) as f64;
            let mut d: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.1..1.0),
            ];
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            d.iter_mut().for_each(|c| *c /= n);
            (l, a, d)
        })
        .collect();
    let c = rng.gen_range(0.7..1.3);
    SupportField::from_fn(g.clone(), |x| {
        c + modes
            .iter()
            .map(|(l, a, d)| a * legendre(*l, d[0] * x[0] + d[1] * x[1] + d[2] * x[2]))
            .sum::<f64>()
    })
    .unwrap()
}

fn c9() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fd = 0.0f64;
    for n in 2..=6 {
        for k in 1..=n {
            let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
            let c = gradient_fd_check(
                |l| sigma_k_of(l, k),
                |l| sigma_k_gradient_of(l, k),
                &lambda,
                &[1e-3, 1e-4, 1e-5],
            )
            .unwrap();
            fd = fd.max(c.max_rel_err);
        }
    }
    let lin = hessian_refinement(HessianProbe::Linear, &[8, 16]).unwrap();
    let order = lin.observed_order.unwrap_or(f64::INFINITY);

    let g = build_grid(GridVariant::FullS2, 2, full(32)).unwrap();
    let a = build_grid(GridVariant::Axisym, 3, Resolution::axisym(64)).unwrap();
    let mut mink = minkowski_formula_check(
        &SupportField::zonal(g.clone(), |t| 1.0 + 0.05 * legendre(2, t.cos())).unwrap(),
        1,
    )
    .unwrap();
    for _ in 0..5 {
        mink = mink.max(minkowski_formula_check(&random_body(&g, &mut rng, 0.5), 1).unwrap());
    }
    let body3 = SupportField::zonal(a.clone(), |t| {
        1.0 + 0.05 * legendre(2, t.cos()) + 0.01 * legendre(4, t.cos())
    })
    .unwrap();
    for k in 1..=2 {
        mink = mink.max(minkowski_formula_check(&body3, k).unwrap());
    }

    let mut gap_min = f64::INFINITY;
    for _ in 0..100 {
        let u = random_body(&g, &mut rng, 0.6);
        let v = random_body(&g, &mut rng, 3.0);
        gap_min = gap_min.min(polarized_mixed_volume(&v, &u, 1).unwrap().af_gap());
    }
    let mut eq = 0.0f64;
    for _ in 0..10 {
        let u = random_body(&g, &mut rng, 0.6);
        let b: [f64; 3] = [
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
        ];
        let v = SupportField::new(
            g.clone(),
            (0..g.len())
                .map(|i| {
                    let x = g.direction(i);
                    u.values()[i] + b[0] * x[0] + b[1] * x[1] + b[2] * x[2]
                })
                .collect(),
        )
        .unwrap();
        eq = eq.max(polarized_mixed_volume(&v, &u, 1).unwrap().af_gap().abs());
    }
    let passed = fd < 1e-6 && order >= 4.0 && lin.monotone && mink < 1e-8 && gap_min >= -1e-9 && eq < 1e-9;
    Line {
        id: 9,
        passed,
        text: format!(
            "calculus: fd gradient {fd:.1e} (< 1e-6), W(linear) order {order:.2} (>= 4), Minkowski {mink:.1e} (< 1e-8), AF gap min {gap_min:.1e} (>= -1e-9), u+linear |gap| {eq:.1e} (< 1e-9)"
        ),
    }
}

fn c10() -> Line {
    let g = build_grid(GridVariant::FullS2, 2, full(32)).unwrap();
    let a = build_grid(GridVariant::Axisym, 3, Resolution::axisym(64)).unwrap();
    let adm = |spec: PsiSpec, k: usize, alpha: f64| {
        let psi = eval_psi(&spec, &g).unwrap();
        check_admissible(&psi, k, alpha).unwrap()
    };
    let mut ok = adm(PsiSpec::constant(1.0).unwrap(), 1, 1.0).admissible;
    // 1 + eps P2 is uniformly convex on S^2 exactly for -0.4 < eps < 0.5
    for (eps, expect) in [(-0.35, true), (0.1, true), (0.45, true), (-0.5, false), (0.6, false)] {
        for (k, alpha) in [(1, 1.0), (1, 2.0)] {
            ok &= adm(PsiSpec::p2_power_family(eps, k, alpha).unwrap(), k, alpha).admissible == expect;
        }
    }
    let rejected = adm(PsiSpec::power_of_base(1.0, 0.9, 2, 2.0).unwrap(), 1, 1.0);
    ok &= !rejected.admissible && rejected.min_eigenvalue < 0.0;

    let mut agree = true;
    let mut cases = 0;
    for k in 1..=2 {
        for alpha in [0.3, 0.5, 1.0, 2.0, 3.0] {
            for eps in [-0.6, -0.2, 0.1, 0.4, 0.8] {
                let psi = eval_psi(&PsiSpec::power_of_base(1.0, eps, 2, 2.0).unwrap(), &a).unwrap();
                let r = check_admissible(&psi, k, alpha).unwrap();
                agree &= (r.min_eigenvalue > 0.0) == (r.min_eigenvalue_tilde_form > 0.0);
                cases += 1;
            }
        }
    }
    Line {
        id: 10,
        passed: ok && agree,
        text: format!(
            "admissibility: psi=1 and eps < eps* accepted, beyond rejected, (1+0.9P2)^2 rejected (min eig {:.3}): {ok}; exponent forms agree in sign on {cases} cases: {agree}",
            rejected.min_eigenvalue
        ),
    }
}

fn c11() -> Line {
    let mut cfg = anisotropic_full(16);
    cfg.initial = InitialSpec {
        random_modes: 3,
        seed: 5,
        ..InitialSpec::default()
    };
    cfg.monitor_every = 3;
    let a = evolve(&cfg).unwrap().trace.to_csv();
    let b = evolve(&cfg).unwrap().trace.to_csv();
    Line {
        id: 11,
        passed: a == b && a.lines().count() > 2,
        text: format!(
            "two identical seeded runs: trace CSVs ({} rows) bit-identical: {}",
            a.lines().count() - 1,
            a == b
        ),
    }
}

fn report(line: &Line) {
    println!(
        "criterion {:>2} {}  {}",
        line.id,
        if line.passed { "PASS" } else { "FAIL" },
        line.text
    );
}

fn main() {
    // with `cargo test -- <filter>`, only run if the filter matches
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut runs = Runs::default();
    let mut lines = Vec::new();
    let mut step = |l: Line| {
        report(&l);
        lines.push(l.passed);
    };
    step(c1(&mut runs));
    step(c2(&mut runs));
    step(c3(&mut runs));
    step(c6());
    step(c7(&mut runs));
    step(c8(&mut runs));
    step(c9());
    step(c10());
    step(c11());
    // suite-wide monitors over every normalized run above
    step(c4(&runs));
    step(c5(&runs));
    let failed = lines.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria pass", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
