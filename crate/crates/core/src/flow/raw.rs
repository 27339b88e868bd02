//! The unnormalized flow `du/dt = psi sigma_k^alpha` and its conversion to
//! normalized time `tau`.

use serde::{Deserialize, Serialize};

use crate::calculus::mixed_volume_k1;
use crate::error::{Error, Result};
use crate::grid::SupportField;

use super::config::FlowConfig;
use super::engine::{growth, normalization_factor, prepare, FlowKind, Prepared, RejectReason, StepOutcome};
use super::trace::FlowTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RawOptions {
    /// Stop once `max u` exceeds this multiple of `max u0`.
    pub blow_up_factor: f64,
    /// Times at which a sample is taken; steps are shortened to land on them.
    pub sample_times: Vec<f64>,
    /// Also sample every this many accepted steps (0: only at
    /// `sample_times`, the start and the end).
    pub record_every: usize,
}

impl Default for RawOptions {
    fn default() -> Self {
        Self {
            blow_up_factor: 100.0,
            sample_times: Vec::new(),
            record_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RawSample {
    pub t: f64,
    pub u: SupportField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RawStatus {
    ReachedTMax,
    BlowUpGuard { t: f64, u_max: f64 },
    StepUnderrun { t: f64, dt: f64, reason: RejectReason },
}

#[derive(Debug, Clone)]
pub struct RawRun {
    pub status: RawStatus,
    pub samples: Vec<RawSample>,
    /// Monitor records at every sample.
    pub trace: FlowTrace,
    pub flags: Vec<String>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

/// Integrates the raw flow from the initial body as sampled; its
/// normalization is the starting point of [`super::evolve`].
pub fn evolve_unnormalized(config: &FlowConfig, opts: &RawOptions) -> Result<RawRun> {
    if !(opts.blow_up_factor > 1.0) {
        return Err(Error::InvalidConfig("blow_up_factor must exceed 1".into()));
    }
    if opts.sample_times.iter().any(|t| !(*t >= 0.0)) || opts.sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "sample_times must be nonnegative and increasing".into(),
        ));
    }
    let Prepared {
        problem,
        u0_raw: u0,
        flags,
        ..
    } = prepare(config, FlowKind::Raw)?;
    let gamma = config.gamma();
    let cfg = config.stepper;
    let guard = opts.blow_up_factor * u0.max();

    let mut state = problem.state(0.0, u0)?;
    let mut trace = FlowTrace::new(gamma);
    let mut samples = vec![RawSample {
        t: 0.0,
        u: state.u.clone(),
    }];
    trace.push(problem.record(&state, 0.0, gamma, true));

    let mut targets: Vec<f64> = opts
        .sample_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < config.t_max)
        .collect();
    targets.push(config.t_max);
    let mut next_target = 0usize;

    let mut dt = cfg.dt_init;
    let mut dt_stable = f64::INFINITY;
    let mut next_stability = 0usize;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut pending: Option<f64> = None;

    let status = loop {
        if state.u.max() > guard {
            break RawStatus::BlowUpGuard {
                t: state.t,
                u_max: state.u.max(),
            };
        }
        if state.t >= config.t_max {
            break RawStatus::ReachedTMax;
        }
        if accepted >= next_stability {
            dt_stable = problem.stable_step(&state)?;
            next_stability = accepted + cfg.stability_every;
        }
        let target = targets[next_target];
        let h = dt.min(cfg.dt_max).min(dt_stable);
        let (h, lands) = if h >= target - state.t {
            (target - state.t, true)
        } else {
            (h, false)
        };
        match problem.step(&state, h)? {
            StepOutcome::Accepted { state: mut next, error } => {
                accepted += 1;
                if lands {
                    next.t = target;
                    next_target += 1;
                }
                state = next;
                if lands || (opts.record_every > 0 && accepted % opts.record_every == 0) {
                    samples.push(RawSample {
                        t: state.t,
                        u: state.u.clone(),
                    });
                    trace.push(problem.record(&state, h, gamma, true));
                    pending = None;
                } else {
                    pending = Some(h);
                }
                if !lands {
                    dt = h * growth(error, cfg.safety);
                }
            }
            StepOutcome::Rejected { reason, .. } => {
                rejected += 1;
                dt = h * 0.5;
                if dt < cfg.dt_min {
                    break RawStatus::StepUnderrun { t: state.t, dt, reason };
                }
                dt_stable = dt_stable.min(dt);
            }
        }
    };
    if let Some(h) = pending {
        samples.push(RawSample {
            t: state.t,
            u: state.u.clone(),
        });
        trace.push(problem.record(&state, h, gamma, true));
    }
    Ok(RawRun {
        status,
        samples,
        trace,
        flags,
        steps_accepted: accepted,
        steps_rejected: rejected,
    })
}

#[derive(Debug, Clone)]
pub struct RescaledSample {
    pub t: f64,
    pub tau: f64,
    /// Spatial factor `(|S^n| / int u sigma_k)^{1/(k+1)}`.
    pub lambda: f64,
    pub u: SupportField,
}

/// Rescales each raw sample to unit normalized volume and accumulates
/// `tau = int lambda^{1 - k alpha} dt` by the trapezoid rule.
pub fn rescale_raw_to_normalized(samples: &[RawSample], k: usize, alpha: f64) -> Result<Vec<RescaledSample>> {
    let exponent = 1.0 - k as f64 * alpha;
    let mut out: Vec<RescaledSample> = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let v = mixed_volume_k1(&s.u, k)?;
        let lambda = normalization_factor(v, s.u.grid().area(), k)?;
        let tau = match out.last() {
            None => s.t,
            Some(p) => {
                if !(s.t > p.t) {
                    return Err(Error::NonMonotoneTime(i));
                }
                if exponent == 0.0 {
                    s.t
                } else {
                    let g0 = p.lambda.powf(exponent);
                    let g1 = lambda.powf(exponent);
                    p.tau + 0.5 * (s.t - p.t) * (g0 + g1)
                }
            }
        };
        if let Some(p) = out.last() {
            if !(tau > p.tau) || !tau.is_finite() {
                return Err(Error::NonMonotoneTime(i));
            }
        }
        out.push(RescaledSample {
            t: s.t,
            tau,
            lambda,
            u: s.u.scaled(lambda),
        });
    }
    Ok(out)
}

/// Largest sup-distance between rescaled samples and a reference
/// trajectory `(t, u)` linearly interpolated in time, over the samples whose
/// `tau` lies inside the reference span. Returns the distance and the number
/// of samples compared.
pub fn sup_distance_over_tau(rescaled: &[RescaledSample], reference: &[(f64, SupportField)]) -> Result<(f64, usize)> {
    if reference.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::NonMonotoneTime(0));
    }
    let (Some(first), Some(last)) = (reference.first(), reference.last()) else {
        return Err(Error::Oracle("empty reference trajectory".into()));
    };
    let mut worst = 0.0f64;
    let mut count = 0;
    for s in rescaled {
        if s.tau < first.0 || s.tau > last.0 {
            continue;
        }
        let j = reference
            .partition_point(|r| r.0 <= s.tau)
            .clamp(1, reference.len() - 1);
        let (a, b) = (&reference[j - 1], &reference[j]);
        let w = if b.0 > a.0 { (s.tau - a.0) / (b.0 - a.0) } else { 0.0 };
        let d =
            s.u.values()
                .iter()
                .zip(a.1.values().iter().zip(b.1.values()))
                .map(|(x, (p, q))| (x - ((1.0 - w) * p + w * q)).abs())
                .fold(0.0, f64::max);
        worst = worst.max(d);
        count += 1;
    }
    if count == 0 {
        return Err(Error::Oracle("no overlap in tau between the two trajectories".into()));
    }
    Ok((worst, count))
}
