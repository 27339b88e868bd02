use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{spectrum_from_jet, RadiiSpectrum};
use crate::error::{Error, Result};
use crate::grid::{Jet, SphereGrid, SupportField};
use crate::psi::{check_admissible, check_even, ensure_positive, AdmissibilityReport};
use crate::residual::{residual_from_spectrum, ResidualReport};

use super::config::{FlowConfig, StepperConfig};
use super::trace::{FlowTrace, TraceRecord};

/// Largest antipodal defect of `psi` still treated as even.
pub const EVENNESS_TOL: f64 = 1e-12;
/// Allowed relative drift of `int u sigma_k` after renormalization.
pub const VOLUME_TOL: f64 = 1e-10;
/// Relative slack on `eta(t) <= eta(0)`.
pub const ETA_SLACK: f64 = 1e-8;
/// Relative slack on `J(u') <= J(u)`.
pub const MONOTONE_SLACK: f64 = 1e-9;

const POWER_ITERATIONS: usize = 30;

/// Everything derived from one state that the stepper and monitors reuse.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub jet: Jet,
    pub spectrum: RadiiSpectrum,
    pub sigma: Vec<f64>,
    /// `psi sigma_k^alpha`
    pub speed: Vec<f64>,
    pub min_radius: f64,
    /// `int u sigma_k`
    pub volume: f64,
    /// `int psi sigma_k^{1+alpha}`
    pub eta_integral: f64,
}

/// `x^e` with exact shortcuts for the exponents that occur most.
#[inline]
pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.5 {
        x.sqrt()
    } else if e == 1.5 {
        x * x.sqrt()
    } else if e == 3.0 {
        x * x * x
    } else {
        x.powf(e)
    }
}

impl Evaluation {
    /// The evaluation of `lambda u`, from the homogeneity of every entry.
    /// Integrals are re-summed rather than scaled.
    fn scaled(mut self, u: &SupportField, lambda: f64, k: usize, alpha: f64) -> Result<Self> {
        let grid = u.grid();
        for g in &mut self.jet.grad {
            g.iter_mut().for_each(|v| *v *= lambda);
        }
        for h in &mut self.jet.hess {
            h.iter_mut().for_each(|v| *v *= lambda);
        }
        let pairs = self
            .spectrum
            .pairs()
            .iter()
            .map(|&(a, b)| (a * lambda, b * lambda))
            .collect();
        self.spectrum = RadiiSpectrum::from_pairs(self.spectrum.n_dim(), pairs);
        let ls = lambda.powi(k as i32);
        let lf = pow(ls, alpha);
        self.sigma.iter_mut().for_each(|v| *v *= ls);
        self.speed.iter_mut().for_each(|v| *v *= lf);
        self.min_radius *= lambda;
        let us: Vec<f64> = self.sigma.iter().zip(u.values()).map(|(s, v)| s * v).collect();
        self.volume = grid.quadrature(&us)?;
        let flux: Vec<f64> = self.speed.iter().zip(&self.sigma).map(|(f, s)| f * s).collect();
        self.eta_integral = grid.quadrature(&flux)?;
        Ok(self)
    }
}

/// Derivatives, radii and integrals of `u`; refuses states that are not
/// uniformly convex.
pub fn evaluate(u: &SupportField, psi: &SupportField, k: usize, alpha: f64) -> Result<Evaluation> {
    let grid = u.grid();
    grid.check_len(psi.len())?;
    let jet = u.jet()?;
    let spectrum = spectrum_from_jet(grid, u.values(), &jet);
    let (min_radius, node) = spectrum.min_eigenvalue();
    if !(min_radius > 0.0) {
        return Err(Error::NotConvex { min_radius, node });
    }
    let sigma = spectrum.sigma_k(k)?;
    let speed: Vec<f64> = sigma
        .iter()
        .zip(psi.values())
        .map(|(s, p)| p * pow(*s, alpha))
        .collect();
    let us: Vec<f64> = sigma.iter().zip(u.values()).map(|(s, v)| s * v).collect();
    let volume = grid.quadrature(&us)?;
    let flux: Vec<f64> = speed.iter().zip(&sigma).map(|(f, s)| f * s).collect();
    let eta_integral = grid.quadrature(&flux)?;
    Ok(Evaluation {
        jet,
        spectrum,
        sigma,
        speed,
        min_radius,
        volume,
        eta_integral,
    })
}

/// `eta = (1/|S^n|) int psi sigma_k^{1+alpha}`.
pub fn eta(u: &SupportField, psi: &SupportField, k: usize, alpha: f64) -> Result<f64> {
    Ok(evaluate(u, psi, k, alpha)?.eta_integral / u.grid().area())
}

/// `J(u) = int psi^{-1/alpha} u^{1+1/alpha}`.
pub fn j_functional(u: &SupportField, psi: &SupportField, alpha: f64) -> Result<f64> {
    u.grid().check_len(psi.len())?;
    ensure_positive(u, "support function")?;
    ensure_positive(psi, "psi")?;
    let e = 1.0 / alpha;
    let f: Vec<f64> = u
        .values()
        .iter()
        .zip(psi.values())
        .map(|(v, p)| p.powf(-e) * v.powf(1.0 + e))
        .collect();
    u.grid().quadrature(&f)
}

/// `psi sigma_k^alpha - eta u` with `eta` from [`eta`].
pub fn normalized_rhs(u: &SupportField, psi: &SupportField, k: usize, alpha: f64) -> Result<SupportField> {
    let ev = evaluate(u, psi, k, alpha)?;
    let eta = ev.eta_integral / u.grid().area();
    let values = ev.speed.iter().zip(u.values()).map(|(f, v)| f - eta * v).collect();
    SupportField::new(u.grid().clone(), values)
}

/// Rescaling factor `(|S^n| / int u sigma_k)^{1/(k+1)}`.
pub fn normalization_factor(volume: f64, area: f64, k: usize) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::NonPositive {
            node: 0,
            value: volume,
            context: "mixed volume",
        });
    }
    Ok((area / volume).powf(1.0 / (k as f64 + 1.0)))
}

/// `lambda u` with `int (lambda u) sigma_k(W_{lambda u}) = |S^n|`.
pub fn renormalize(u: &SupportField, k: usize) -> Result<SupportField> {
    let v = crate::calculus::mixed_volume_k1(u, k)?;
    Ok(u.scaled(normalization_factor(v, u.grid().area(), k)?))
}

/// Whether `eta` is held at its volume-preserving value and states are
/// renormalized after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    Normalized,
    Raw,
}

/// A state together with its evaluation.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub u: SupportField,
    pub eval: Evaluation,
    /// `J(u)`
    pub j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ErrorEstimate,
    NotConvex,
    FunctionalIncrease,
}

impl RejectReason {
    pub fn describe(self) -> &'static str {
        match self {
            RejectReason::ErrorEstimate => "embedded error estimate above tolerance",
            RejectReason::NotConvex => "trial state not uniformly convex",
            RejectReason::FunctionalIncrease => "J would increase",
        }
    }
}

#[derive(Debug, Clone)]
pub enum StepOutcome {
    Accepted { state: FlowState, error: f64 },
    Rejected { reason: RejectReason, error: f64 },
}

/// Grid, `psi` and parameters of one flow, shared by all its steps.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub grid: Arc<SphereGrid>,
    pub psi: SupportField,
    /// `psi^{-1/alpha}`, the weight in `J`.
    psi_weight: Vec<f64>,
    pub k: usize,
    pub alpha: f64,
    pub kind: FlowKind,
    /// Antipodally average every new state.
    pub symmetrize: bool,
    pub stepper: StepperConfig,
}

impl FlowProblem {
    pub fn new(psi: SupportField, k: usize, alpha: f64, kind: FlowKind, stepper: StepperConfig) -> Self {
        let symmetrize = check_even(&psi) <= EVENNESS_TOL;
        let psi_weight = psi.values().iter().map(|p| pow(*p, -1.0 / alpha)).collect();
        Self {
            grid: psi.grid().clone(),
            psi,
            psi_weight,
            k,
            alpha,
            kind,
            symmetrize,
            stepper,
        }
    }

    pub fn evaluate(&self, u: &SupportField) -> Result<Evaluation> {
        evaluate(u, &self.psi, self.k, self.alpha)
    }

    pub fn state(&self, t: f64, u: SupportField) -> Result<FlowState> {
        let eval = self.evaluate(&u)?;
        let j = self.j_of(&u)?;
        Ok(FlowState { t, u, eval, j })
    }

    /// Right-hand side with the polar filter applied. The normalized flow
    /// uses `eta = int psi sigma^{1+alpha} / int u sigma`, which equals the
    /// spherical average on normalized states and conserves the volume at
    /// the intermediate stage as well.
    fn rhs(&self, u: &[f64], ev: &Evaluation) -> Vec<f64> {
        let mut f = match self.kind {
            FlowKind::Raw => ev.speed.clone(),
            FlowKind::Normalized => {
                let eta = ev.eta_integral / ev.volume;
                ev.speed.iter().zip(u).map(|(s, v)| s - eta * v).collect()
            }
        };
        self.grid.polar_filter(&mut f);
        f
    }

    pub fn j_of(&self, u: &SupportField) -> Result<f64> {
        self.grid.check_len(u.len())?;
        ensure_positive(u, "support function")?;
        let e = 1.0 + 1.0 / self.alpha;
        let f: Vec<f64> = u
            .values()
            .iter()
            .zip(&self.psi_weight)
            .map(|(v, w)| w * pow(*v, e))
            .collect();
        self.grid.quadrature(&f)
    }

    fn trial(&self, values: Vec<f64>) -> Result<Option<(SupportField, Evaluation)>> {
        let u = match SupportField::new(self.grid.clone(), values) {
            Ok(u) => u,
            Err(Error::NonFinite { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        match self.evaluate(&u) {
            Ok(ev) => Ok(Some((u, ev))),
            Err(Error::NotConvex { .. }) | Err(Error::NonFinite { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// One Heun step with an embedded Euler error estimate, followed by
    /// symmetrization and (normalized flow) renormalization.
    pub fn step(&self, state: &FlowState, dt: f64) -> Result<StepOutcome> {
        let u = state.u.values();
        let k1 = self.rhs(u, &state.eval);
        let stage: Vec<f64> = u.iter().zip(&k1).map(|(v, f)| v + dt * f).collect();
        let Some((u1, ev1)) = self.trial(stage)? else {
            return Ok(StepOutcome::Rejected {
                reason: RejectReason::NotConvex,
                error: f64::INFINITY,
            });
        };
        let k2 = self.rhs(u1.values(), &ev1);
        let cfg = &self.stepper;
        let mut next = Vec::with_capacity(u.len());
        let mut error = 0.0f64;
        for i in 0..u.len() {
            let v = u[i] + 0.5 * dt * (k1[i] + k2[i]);
            let scale = cfg.atol + cfg.rtol * u[i].abs().max(v.abs());
            error = error.max((0.5 * dt * (k2[i] - k1[i])).abs() / scale);
            next.push(v);
        }
        if !(error <= 1.0) {
            return Ok(StepOutcome::Rejected {
                reason: RejectReason::ErrorEstimate,
                error,
            });
        }
        let mut next = SupportField::new(self.grid.clone(), next)?;
        if self.symmetrize {
            next = next.symmetrize_even();
        }
        let Some((mut next, mut ev)) = self.trial(next.into_values())? else {
            return Ok(StepOutcome::Rejected {
                reason: RejectReason::NotConvex,
                error,
            });
        };
        if self.kind == FlowKind::Normalized {
            let lambda = normalization_factor(ev.volume, self.grid.area(), self.k)?;
            next = next.scaled(lambda);
            ev = ev.scaled(&next, lambda, self.k, self.alpha)?;
        }
        let j = self.j_of(&next)?;
        if self.kind == FlowKind::Normalized && j > state.j + MONOTONE_SLACK * state.j.abs() {
            return Ok(StepOutcome::Rejected {
                reason: RejectReason::FunctionalIncrease,
                error,
            });
        }
        Ok(StepOutcome::Accepted {
            state: FlowState {
                t: state.t + dt,
                u: next,
                eval: ev,
                j,
            },
            error,
        })
    }

    /// Power-iteration estimate of the spectral radius of the linearized,
    /// filtered right-hand side at `state`.
    pub fn spectral_radius(&self, state: &FlowState) -> Result<f64> {
        let u = state.u.values();
        let base = self.rhs(u, &state.eval);
        let n = u.len();
        let scale = state.u.max().abs().max(f64::MIN_POSITIVE);
        // deterministic, non-smooth start vector
        let mut v: Vec<f64> = (0..n)
            .map(|i| ((i as f64 + 0.5) * 0.618_033_988_749_895).fract() - 0.5)
            .collect();
        if self.symmetrize {
            let a = self.grid.antipode();
            v = (0..n).map(|i| 0.5 * (v[i] + v[a[i]])).collect();
        }
        let mut eps = 1e-7 * scale;
        let mut best = 0.0f64;
        let mut it = 0;
        while it < POWER_ITERATIONS {
            let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if norm == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let probe: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let Some((pu, pev)) = self.trial(probe)? else {
                eps *= 0.1;
                if eps < 1e-14 * scale {
                    return Err(Error::Oracle("spectral radius probe left the convex cone".into()));
                }
                continue;
            };
            let f = self.rhs(pu.values(), &pev);
            let w: Vec<f64> = f.iter().zip(&base).map(|(a, b)| (a - b) / eps).collect();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if it + 10 >= POWER_ITERATIONS {
                best = best.max(nw / nv);
            }
            v = w;
            it += 1;
        }
        Ok(best)
    }

    /// `fraction * 2 / rho`, the step the explicit scheme tolerates.
    pub fn stable_step(&self, state: &FlowState) -> Result<f64> {
        let rho = self.spectral_radius(state)?;
        Ok(if rho > 0.0 {
            self.stepper.stability_fraction * 2.0 / rho
        } else {
            f64::INFINITY
        })
    }

    /// Monitor record of a state. `grad_q` costs a power per node and is
    /// only computed when `full` (NaN otherwise).
    pub fn record(&self, state: &FlowState, dt: f64, gamma: f64, full: bool) -> TraceRecord {
        let ev = &state.eval;
        let uv = state.u.values();
        // the d sigma-weighted mean of rho_hat = speed / u is eta_integral / volume
        let mean = ev.eta_integral / ev.volume;
        let residual = ev
            .speed
            .iter()
            .zip(uv)
            .map(|(f, v)| (f / (v * mean) - 1.0).abs())
            .fold(0.0, f64::max);
        let grad_q = if full {
            (0..uv.len())
                .map(|i| ev.jet.grad_norm_sq(i) / uv[i].powf(gamma))
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        TraceRecord {
            t: state.t,
            eta: ev.eta_integral / self.grid.area(),
            j: state.j,
            volume: ev.volume,
            min_radius: ev.min_radius,
            u_min: state.u.min(),
            u_max: state.u.max(),
            grad_q,
            residual,
            dt,
        }
    }

    pub fn residual(&self, state: &FlowState) -> Result<ResidualReport> {
        residual_from_spectrum(&state.u, &self.psi, &state.eval.spectrum, self.k, self.alpha)
    }
}

/// Growth factor for the next step after an accepted one.
pub(crate) fn growth(error: f64, safety: f64) -> f64 {
    if error <= 0.0 {
        2.0
    } else {
        (safety / error.sqrt()).clamp(0.2, 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxTime,
    StepUnderrun { t: f64, dt: f64, reason: RejectReason },
    InvariantViolation { t: f64, what: String },
}

impl RunStatus {
    pub fn converged(&self) -> bool {
        matches!(self, RunStatus::Converged)
    }
}

/// Extremes of the monitored quantities over every accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub eta0: f64,
    pub min_eta: f64,
    /// `max eta(t) / eta(0)`
    pub max_eta_ratio: f64,
    /// `max |int u sigma_k - |S^n|| / |S^n|`
    pub max_volume_defect: f64,
    /// `max (J(t_{i+1}) - J(t_i)) / |J(t_i)|`, negative when J decreases
    /// strictly on every step.
    pub max_j_increase_rel: f64,
    pub min_min_radius: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub max_u_initial: f64,
    pub max_grad_q: f64,
    pub max_antipodal_defect: f64,
    /// `|J_last - J_prev| / (dt |J_last|)` over the final accepted step.
    pub final_dj_dt_rel: f64,
}

impl MonitorSummary {
    fn start(rec: &TraceRecord, defect: f64) -> Self {
        Self {
            eta0: rec.eta,
            min_eta: rec.eta,
            max_eta_ratio: 1.0,
            max_volume_defect: 0.0,
            max_j_increase_rel: f64::NEG_INFINITY,
            min_min_radius: rec.min_radius,
            min_u: rec.u_min,
            max_u: rec.u_max,
            max_u_initial: rec.u_max,
            max_grad_q: rec.grad_q,
            max_antipodal_defect: defect,
            final_dj_dt_rel: f64::NAN,
        }
    }

    fn update(&mut self, prev: &TraceRecord, rec: &TraceRecord, area: f64, defect: f64) {
        self.min_eta = self.min_eta.min(rec.eta);
        self.max_eta_ratio = self.max_eta_ratio.max(rec.eta / self.eta0);
        self.max_volume_defect = self.max_volume_defect.max((rec.volume - area).abs() / area);
        self.max_j_increase_rel = self.max_j_increase_rel.max((rec.j - prev.j) / prev.j.abs());
        self.min_min_radius = self.min_min_radius.min(rec.min_radius);
        self.min_u = self.min_u.min(rec.u_min);
        self.max_u = self.max_u.max(rec.u_max);
        self.max_grad_q = self.max_grad_q.max(rec.grad_q);
        self.max_antipodal_defect = self.max_antipodal_defect.max(defect);
        self.final_dj_dt_rel = (rec.j - prev.j).abs() / (rec.dt * rec.j.abs());
    }
}

/// Result of [`evolve`]; failures after the first step still carry the
/// trace up to the failure.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub status: RunStatus,
    pub u: SupportField,
    pub u0: SupportField,
    pub psi: SupportField,
    pub trace: FlowTrace,
    pub residual: ResidualReport,
    pub monitors: MonitorSummary,
    pub admissibility: AdmissibilityReport,
    pub flags: Vec<String>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// `(t, u)` every `snapshot_every` accepted steps, first and last included.
    pub snapshots: Vec<(f64, SupportField)>,
}

/// Checked setup shared by the normalized and raw runs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: FlowProblem,
    /// Normalized initial body.
    pub u0: SupportField,
    /// The initial body as sampled, before normalization.
    pub u0_raw: SupportField,
    pub admissibility: AdmissibilityReport,
    pub flags: Vec<String>,
}

pub const FLAG_OUTSIDE_THEOREM: &str = "outside theorem hypotheses";

/// Validates the config, certifies `psi` and builds the normalized initial
/// body.
pub fn prepare(config: &FlowConfig, kind: FlowKind) -> Result<Prepared> {
    config.validate()?;
    let grid = config.build_grid()?;
    let psi = config.psi.field(&grid)?;
    let mut flags = Vec::new();
    let defect = check_even(&psi);
    if defect > EVENNESS_TOL {
        if !config.allow_uneven {
            return Err(Error::Uneven { defect });
        }
        flags.push(format!("uneven psi (defect {defect:.3e}): no convergence claim"));
    }
    let admissibility = check_admissible(&psi, config.k, config.alpha)?;
    if !admissibility.admissible {
        if !config.force {
            return Err(Error::Inadmissible {
                min_eigenvalue: admissibility.min_eigenvalue,
            });
        }
        flags.push(format!(
            "{FLAG_OUTSIDE_THEOREM}: psi inadmissible (min eigenvalue {:.6e})",
            admissibility.min_eigenvalue
        ));
    }
    if !config.within_theorem_range() {
        flags.push(format!("{FLAG_OUTSIDE_THEOREM}: alpha = {} <= 1/k", config.alpha));
    }
    let problem = FlowProblem::new(psi, config.k, config.alpha, kind, config.stepper);
    let mut u0 = config.initial.sample(&grid)?;
    // the filtered right-hand side never touches wavenumbers a polar ring
    // cannot resolve, so they are removed from the start instead of frozen
    let mut values = u0.values().to_vec();
    grid.polar_filter(&mut values);
    u0 = SupportField::new(grid.clone(), values)?;
    if problem.symmetrize {
        u0 = u0.symmetrize_even();
    }
    crate::psi::ensure_positive(&u0, "initial support function")?;
    let u0_raw = u0.clone();
    let u0 = match renormalize(&u0, config.k) {
        Ok(u) => u,
        Err(Error::NonPositive { value, .. }) => {
            return Err(Error::InvalidConfig(format!(
                "initial body has mixed volume {value:.3e}"
            )))
        }
        Err(e) => return Err(e),
    };
    if let Err(Error::NotConvex { min_radius, node }) = problem.evaluate(&u0) {
        return Err(Error::InvalidConfig(format!(
            "initial body is not uniformly convex: min radius {min_radius:.3e} at node {node}"
        )));
    }
    Ok(Prepared {
        problem,
        u0,
        u0_raw,
        admissibility,
        flags,
    })
}

/// Runs the normalized flow until `rho_hat_relspread < residual_tol` or
/// `t >= t_max`.
pub fn evolve(config: &FlowConfig) -> Result<FlowRun> {
    let prep = prepare(config, FlowKind::Normalized)?;
    run_normalized(config, prep)
}

pub(crate) fn run_normalized(config: &FlowConfig, prep: Prepared) -> Result<FlowRun> {
    let Prepared {
        problem,
        u0,
        admissibility,
        flags,
        ..
    } = prep;
    let gamma = config.gamma();
    let area = problem.grid.area();
    let cfg = config.stepper;

    let mut state = problem.state(0.0, u0.clone())?;
    let rec0 = problem.record(&state, 0.0, gamma, true);
    let mut trace = FlowTrace::new(gamma);
    trace.push(rec0);
    let mut monitors = MonitorSummary::start(&rec0, state.u.antipodal_defect());
    monitors.max_volume_defect = (rec0.volume - area).abs() / area;
    let mut prev = rec0;
    let mut snapshots = Vec::new();
    if config.snapshot_every > 0 {
        snapshots.push((0.0, state.u.clone()));
    }

    let mut dt = cfg.dt_init;
    let mut dt_stable = f64::INFINITY;
    let mut next_stability = 0usize;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut last_recorded = true;

    let status = loop {
        if prev.residual < config.residual_tol {
            break RunStatus::Converged;
        }
        if state.t >= config.t_max {
            break RunStatus::MaxTime;
        }
        if accepted >= next_stability {
            dt_stable = problem.stable_step(&state)?;
            next_stability = accepted + cfg.stability_every;
        }
        let remaining = config.t_max - state.t;
        let h = dt.min(cfg.dt_max).min(dt_stable);
        let (h, lands) = if h >= remaining { (remaining, true) } else { (h, false) };
        match problem.step(&state, h)? {
            StepOutcome::Accepted { state: mut next, error } => {
                if lands {
                    next.t = config.t_max;
                }
                accepted += 1;
                let recorded = accepted % config.monitor_every == 0;
                let rec = problem.record(&next, h, gamma, recorded);
                monitors.update(&prev, &rec, area, next.u.antipodal_defect());
                state = next;
                if let Some(what) = invariant_failure(&rec, &monitors, area, problem.symmetrize) {
                    trace.push(problem.record(&state, h, gamma, true));
                    last_recorded = true;
                    break RunStatus::InvariantViolation { t: rec.t, what };
                }
                last_recorded = recorded;
                if recorded {
                    trace.push(rec);
                }
                if config.snapshot_every > 0 && accepted % config.snapshot_every == 0 {
                    snapshots.push((state.t, state.u.clone()));
                }
                prev = rec;
                if !lands {
                    dt = h * growth(error, cfg.safety);
                }
            }
            StepOutcome::Rejected { reason, .. } => {
                rejected += 1;
                dt = h * 0.5;
                if dt < cfg.dt_min {
                    break match reason {
                        RejectReason::ErrorEstimate => RunStatus::StepUnderrun { t: state.t, dt, reason },
                        _ => RunStatus::InvariantViolation {
                            t: state.t,
                            what: format!("{} down to dt_min", reason.describe()),
                        },
                    };
                }
                // a rejection for stability means the estimate is stale
                if reason != RejectReason::FunctionalIncrease {
                    dt_stable = dt_stable.min(dt.max(cfg.dt_min));
                }
            }
        }
    };

    if !last_recorded && trace.last().map(|r| r.t) != Some(state.t) {
        trace.push(problem.record(&state, prev.dt, gamma, true));
    }
    let residual = problem.residual(&state)?;
    if config.snapshot_every > 0 && snapshots.last().map(|s| s.0) != Some(state.t) {
        snapshots.push((state.t, state.u.clone()));
    }
    Ok(FlowRun {
        status,
        u: state.u,
        u0,
        psi: problem.psi,
        trace,
        residual,
        monitors,
        admissibility,
        flags,
        steps_accepted: accepted,
        steps_rejected: rejected,
        snapshots,
    })
}

fn invariant_failure(rec: &TraceRecord, m: &MonitorSummary, area: f64, even: bool) -> Option<String> {
    let defect = (rec.volume - area).abs() / area;
    if !(defect < VOLUME_TOL) {
        return Some(format!("normalized volume drift {defect:.3e}"));
    }
    if !(rec.eta > 0.0) {
        return Some(format!("eta = {:.6e} is not positive", rec.eta));
    }
    if rec.eta > m.eta0 * (1.0 + ETA_SLACK) {
        return Some(format!("eta = {:.17e} exceeds eta(0) = {:.17e}", rec.eta, m.eta0));
    }
    if !(rec.min_radius > 0.0) {
        return Some(format!("min radius {:.3e}", rec.min_radius));
    }
    if even && m.max_antipodal_defect != 0.0 {
        return Some(format!("state lost evenness ({:.3e})", m.max_antipodal_defect));
    }
    None
}
