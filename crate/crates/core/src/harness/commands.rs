use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{embed, TriangleMesh};
use crate::error::{Error, Result};
use crate::flow::{
    self, evolve_unnormalized, fmt17, rescale_raw_to_normalized, FlowConfig, FlowRun, PsiSource, RawStatus, RunStatus,
    EVENNESS_TOL,
};
use crate::grid::{GridVariant, SupportField};
use crate::oracles::stationary_radius;
use crate::psi::{check_admissible, check_even};

use super::config::{MeshFormat, RunConfig, SweepPoint};
use super::{exit_code, EXIT_INVARIANT, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_REJECTED};

/// Caps the sweep thread pool.
pub const THREADS_ENV: &str = "CMFLOW_THREADS";

pub const SWEEP_HEADER: &str = "alpha,eps,resolution,status,converged,steps,t_final,sup_residual,relspread,c_lp";

/// What a command printed, its exit status and the files it wrote.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub report: String,
    pub artifacts: Vec<PathBuf>,
}

fn psi_label(src: &PsiSource) -> String {
    match src {
        PsiSource::Closed(spec) => spec.to_kv_block().trim_end().replace('\n', ", "),
        PsiSource::Sampled { label, .. } => format!("sampled from {label}"),
    }
}

pub fn check_psi(cfg: &RunConfig) -> Result<Outcome> {
    let fc = cfg.flow_config()?;
    let grid = fc.build_grid()?;
    let psi = fc.psi.field(&grid)?;
    let defect = check_even(&psi);
    let rep = check_admissible(&psi, fc.k, fc.alpha)?;
    let even = defect <= EVENNESS_TOL;
    let mut s = String::new();
    let _ = writeln!(s, "psi: {}", psi_label(&fc.psi));
    let _ = writeln!(
        s,
        "grid: {} {}x{}, n = {}, k = {}, alpha = {}",
        fc.variant,
        grid.n_lat(),
        grid.n_lon(),
        fc.n_dim,
        fc.k,
        fc.alpha
    );
    let _ = writeln!(s, "evenness defect: {defect:.3e} (tolerance {EVENNESS_TOL:.0e})");
    let _ = writeln!(s, "exponent 1/(1 + k alpha): {}", fmt17(rep.exponent));
    let _ = writeln!(s, "min eigenvalue: {}", fmt17(rep.min_eigenvalue));
    let _ = writeln!(
        s,
        "min eigenvalue (psi_tilde form): {}",
        fmt17(rep.min_eigenvalue_tilde_form)
    );
    let _ = writeln!(
        s,
        "alpha > 1/k: {}",
        if rep.within_theorem_range { "yes" } else { "no" }
    );
    let verdict = match (even, rep.admissible) {
        (true, true) => "admissible",
        (false, _) => "rejected: psi is not even",
        (true, false) => "rejected: psi is inadmissible",
    };
    let _ = writeln!(s, "verdict: {verdict}");
    Ok(Outcome {
        code: if even && rep.admissible { EXIT_OK } else { EXIT_REJECTED },
        report: s,
        artifacts: Vec::new(),
    })
}

/// One value per line, latitude-major; the format `psi.file` reads.
pub fn write_field(path: &Path, u: &SupportField) -> Result<()> {
    let mut s = String::with_capacity(24 * u.len());
    for v in u.values() {
        s.push_str(&fmt17(*v));
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn read_field(path: &Path, cfg: &FlowConfig) -> Result<SupportField> {
    let text = std::fs::read_to_string(path)?;
    let values = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("{}: line {} is not a number: `{l}`", path.display(), i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    SupportField::new(cfg.build_grid()?, values)
}

fn status_code(status: &RunStatus) -> i32 {
    match status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxTime | RunStatus::StepUnderrun { .. } => EXIT_NO_CONVERGENCE,
        RunStatus::InvariantViolation { .. } => EXIT_INVARIANT,
    }
}

#[derive(Serialize)]
struct FieldStats {
    min: f64,
    max: f64,
    /// `sup |u - r*|` when `psi` is constant.
    sup_distance_to_round: Option<f64>,
}

#[derive(Serialize)]
struct EvolveSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    status: &'a RunStatus,
    converged: bool,
    t_final: f64,
    steps_accepted: usize,
    steps_rejected: usize,
    residual: &'a crate::residual::ResidualReport,
    monitors: &'a crate::flow::MonitorSummary,
    admissibility: &'a crate::psi::AdmissibilityReport,
    flags: &'a [String],
    final_u: FieldStats,
}

fn final_stats(fc: &FlowConfig, u: &SupportField) -> FieldStats {
    let round = if fc.psi.is_constant() {
        stationary_radius(fc.n_dim, fc.k)
            .ok()
            .map(|r| u.values().iter().map(|v| (v - r).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    FieldStats {
        min: u.min(),
        max: u.max(),
        sup_distance_to_round: round,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn write_mesh(dir: &Path, name: &str, u: &SupportField, format: MeshFormat) -> Result<Option<PathBuf>> {
    let mesh = TriangleMesh::from_body(&embed(u)?)?;
    let path = match format {
        MeshFormat::None => return Ok(None),
        MeshFormat::Obj => dir.join(format!("{name}.obj")),
        MeshFormat::Ply => dir.join(format!("{name}.ply")),
    };
    match format {
        MeshFormat::Ply => mesh.write_ply(&path)?,
        _ => mesh.write_obj(&path)?,
    }
    Ok(Some(path))
}

/// Writes the artifacts of one normalized run into `dir`.
fn write_run(cfg: &RunConfig, fc: &FlowConfig, run: &FlowRun, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    if cfg.output.trace_csv {
        let p = dir.join("trace.csv");
        run.trace.write_csv(&p)?;
        out.push(p);
    }
    if cfg.output.summary_json {
        let p = dir.join("summary.json");
        write_json(
            &p,
            &EvolveSummary {
                command: "evolve",
                config: cfg,
                status: &run.status,
                converged: run.status.converged(),
                t_final: run.trace.last().map(|r| r.t).unwrap_or(0.0),
                steps_accepted: run.steps_accepted,
                steps_rejected: run.steps_rejected,
                residual: &run.residual,
                monitors: &run.monitors,
                admissibility: &run.admissibility,
                flags: &run.flags,
                final_u: final_stats(fc, &run.u),
            },
        )?;
        out.push(p);
    }
    let p = dir.join("u_final.txt");
    write_field(&p, &run.u)?;
    out.push(p);
    if cfg.output.snapshots {
        let snap = dir.join("snapshots");
        std::fs::create_dir_all(&snap)?;
        let mut index = String::from("index,t\n");
        for (i, (t, u)) in run.snapshots.iter().enumerate() {
            write_field(&snap.join(format!("u_{i:05}.txt")), u)?;
            let _ = writeln!(index, "{i},{}", fmt17(*t));
        }
        let p = snap.join("index.csv");
        std::fs::write(&p, index)?;
        out.push(p);
    }
    if cfg.output.mesh != MeshFormat::None && fc.variant == GridVariant::FullS2 {
        out.extend(write_mesh(dir, "body", &run.u, cfg.output.mesh)?);
    }
    Ok(out)
}

pub fn evolve(cfg: &RunConfig) -> Result<Outcome> {
    let fc = cfg.flow_config()?;
    let run = flow::evolve(&fc)?;
    let artifacts = write_run(cfg, &fc, &run, &cfg.output.dir)?;
    let mut s = String::new();
    let _ = writeln!(s, "psi: {}", psi_label(&fc.psi));
    let _ = writeln!(s, "status: {:?}", run.status);
    let _ = writeln!(
        s,
        "steps: {} accepted, {} rejected, t = {}",
        run.steps_accepted,
        run.steps_rejected,
        run.trace.last().map(|r| r.t).unwrap_or(0.0)
    );
    let r = &run.residual;
    let _ = writeln!(
        s,
        "relspread: {:.3e}  sup_residual: {:.3e}  c_lp: {}  p: {}",
        r.rho_hat_relspread,
        r.sup_residual,
        fmt17(r.c_lp),
        r.p
    );
    if let Some(d) = final_stats(&fc, &run.u).sup_distance_to_round {
        let _ = writeln!(s, "sup |u - r*|: {d:.3e}");
    }
    if cfg.output.mesh != MeshFormat::None && fc.variant != GridVariant::FullS2 {
        let _ = writeln!(s, "mesh skipped: export needs a full S^2 grid");
    }
    for f in &run.flags {
        let _ = writeln!(s, "flag: {f}");
    }
    Ok(Outcome {
        code: status_code(&run.status),
        report: s,
        artifacts,
    })
}

#[derive(Serialize)]
struct RawSummaryRow {
    t: f64,
    tau: f64,
    lambda: f64,
    u_min: f64,
    u_max: f64,
}

#[derive(Serialize)]
struct RawSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    status: &'a RawStatus,
    steps_accepted: usize,
    steps_rejected: usize,
    flags: &'a [String],
    samples: Vec<RawSummaryRow>,
}

pub fn evolve_raw(cfg: &RunConfig) -> Result<Outcome> {
    let (fc, opts) = cfg.raw_config()?;
    let run = evolve_unnormalized(&fc, &opts)?;
    let rescaled = rescale_raw_to_normalized(&run.samples, fc.k, fc.alpha)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut artifacts = Vec::new();
    if cfg.output.trace_csv {
        let p = dir.join("trace_raw.csv");
        run.trace.write_csv(&p)?;
        artifacts.push(p);
        let mut csv = String::from("t,tau,lambda,u_min,u_max,rescaled_min,rescaled_max\n");
        for (raw, r) in run.samples.iter().zip(&rescaled) {
            let row = [r.t, r.tau, r.lambda, raw.u.min(), raw.u.max(), r.u.min(), r.u.max()].map(fmt17);
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        let p = dir.join("rescaled.csv");
        std::fs::write(&p, csv)?;
        artifacts.push(p);
    }
    if cfg.output.summary_json {
        let p = dir.join("summary_raw.json");
        write_json(
            &p,
            &RawSummary {
                command: "evolve-raw",
                config: cfg,
                status: &run.status,
                steps_accepted: run.steps_accepted,
                steps_rejected: run.steps_rejected,
                flags: &run.flags,
                samples: run
                    .samples
                    .iter()
                    .zip(&rescaled)
                    .map(|(s, r)| RawSummaryRow {
                        t: s.t,
                        tau: r.tau,
                        lambda: r.lambda,
                        u_min: s.u.min(),
                        u_max: s.u.max(),
                    })
                    .collect(),
            },
        )?;
        artifacts.push(p);
    }
    let mut s = String::new();
    let _ = writeln!(s, "status: {:?}", run.status);
    let _ = writeln!(
        s,
        "steps: {} accepted, {} rejected, {} samples",
        run.steps_accepted,
        run.steps_rejected,
        run.samples.len()
    );
    if let Some(last) = rescaled.last() {
        let _ = writeln!(
            s,
            "last sample: t = {}, tau = {}, max u = {}",
            last.t,
            last.tau,
            run.samples.last().map(|x| x.u.max()).unwrap_or(f64::NAN)
        );
    }
    for f in &run.flags {
        let _ = writeln!(s, "flag: {f}");
    }
    let code = match run.status {
        RawStatus::ReachedTMax | RawStatus::BlowUpGuard { .. } => EXIT_OK,
        RawStatus::StepUnderrun { .. } => EXIT_NO_CONVERGENCE,
    };
    Ok(Outcome {
        code,
        report: s,
        artifacts,
    })
}

/// Thread count for sweeps: `CMFLOW_THREADS` if it is a positive integer,
/// otherwise the available parallelism.
pub fn sweep_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// One line of the aggregate sweep CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    /// `None` when `psi` has no `eps` parameter.
    pub eps: Option<f64>,
    pub resolution: usize,
    pub status: String,
    pub converged: bool,
    pub steps: usize,
    pub t_final: f64,
    pub sup_residual: f64,
    pub relspread: f64,
    pub c_lp: f64,
    pub code: i32,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let eps = self.eps.map(fmt17).unwrap_or_default();
        format!(
            "{},{eps},{},{},{},{},{},{},{},{}",
            fmt17(self.alpha),
            self.resolution,
            self.status,
            self.converged,
            self.steps,
            fmt17(self.t_final),
            fmt17(self.sup_residual),
            fmt17(self.relspread),
            fmt17(self.c_lp)
        )
    }
}

fn status_name(status: &RunStatus) -> &'static str {
    match status {
        RunStatus::Converged => "converged",
        RunStatus::MaxTime => "max_time",
        RunStatus::StepUnderrun { .. } => "step_underrun",
        RunStatus::InvariantViolation { .. } => "invariant_violation",
    }
}

fn sweep_one(cfg: &RunConfig, index: usize, point: SweepPoint) -> SweepRow {
    let alpha = point.alpha.unwrap_or(cfg.alpha);
    let resolution = point.resolution.unwrap_or(cfg.grid.resolution.n_lat());
    let base_eps = cfg.psi.params.get("eps").copied();
    let mut row = SweepRow {
        alpha,
        eps: point.eps.or(base_eps),
        resolution,
        status: String::new(),
        converged: false,
        steps: 0,
        t_final: f64::NAN,
        sup_residual: f64::NAN,
        relspread: f64::NAN,
        c_lp: f64::NAN,
        code: EXIT_OK,
    };
    let result = (|| -> Result<()> {
        let fc = cfg.flow_config_at(point)?;
        if let PsiSource::Closed(spec) = &fc.psi {
            row.eps = spec.params().get("eps").copied();
        }
        let run = flow::evolve(&fc)?;
        write_run(cfg, &fc, &run, &cfg.output.dir.join(format!("run_{index:03}")))?;
        row.status = status_name(&run.status).into();
        row.converged = run.status.converged();
        row.steps = run.steps_accepted;
        row.t_final = run.trace.last().map(|r| r.t).unwrap_or(0.0);
        row.sup_residual = run.residual.sup_residual;
        row.relspread = run.residual.rho_hat_relspread;
        row.c_lp = run.residual.c_lp;
        row.code = status_code(&run.status);
        Ok(())
    })();
    if let Err(e) = result {
        row.status = format!("error: {}", e.to_string().replace(',', ";"));
        row.code = exit_code(&e);
    }
    row
}

/// Runs every point of the sweep, in parallel on a pool capped by
/// [`THREADS_ENV`], and writes `sweep.csv` in input order.
pub fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let points = cfg.sweep_points()?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let threads = sweep_threads();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| sweep_one(cfg, i, *p))
            .collect()
    });
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.to_csv());
        csv.push('\n');
    }
    let p = cfg.output.dir.join("sweep.csv");
    std::fs::write(&p, &csv)?;
    let mut s = format!("{} runs on {threads} threads\n{csv}", rows.len());
    let converged = rows.iter().filter(|r| r.converged).count();
    let _ = writeln!(s, "{converged}/{} converged", rows.len());
    let code = rows.iter().map(|r| r.code).max().unwrap_or(EXIT_OK);
    Ok(Outcome {
        code,
        report: s,
        artifacts: vec![p],
    })
}

/// Exports the body of `field` (one value per node) or, without one, of
/// the final state of a normalized run.
pub fn export_mesh(cfg: &RunConfig, field: Option<&Path>) -> Result<Outcome> {
    let fc = cfg.flow_config()?;
    if fc.variant != GridVariant::FullS2 {
        return Err(Error::InvalidGrid("mesh export needs a full S^2 grid".into()));
    }
    let (u, code, what) = match field {
        Some(path) => (read_field(path, &fc)?, EXIT_OK, format!("field {}", path.display())),
        None => {
            let run = flow::evolve(&fc)?;
            (
                run.u,
                status_code(&run.status),
                format!("final state ({:?})", run.status),
            )
        }
    };
    std::fs::create_dir_all(&cfg.output.dir)?;
    let format = match cfg.output.mesh {
        MeshFormat::None => MeshFormat::Obj,
        f => f,
    };
    let path = write_mesh(&cfg.output.dir, "body", &u, format)?.expect("format is not none");
    let report = format!("mesh of the {what}\n");
    Ok(Outcome {
        code,
        report,
        artifacts: vec![path],
    })
}
