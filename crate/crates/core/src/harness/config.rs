use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, InitialSpec, PsiSource, RawOptions, StepperConfig};
use crate::grid::{build_grid, GridVariant, Resolution};
use crate::psi::{read_sampled_psi, PsiSpec};

pub const DEFAULT_SWEEP_CAP: usize = 256;

/// `[psi]`: exactly one of `family` (+ `params`), `kv` or `file`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiSection {
    pub family: Option<String>,
    pub params: BTreeMap<String, f64>,
    /// Flat `key = value` block as produced by [`PsiSpec::to_kv_block`].
    pub kv: Option<String>,
    /// Sampled values, one per grid node, latitude-major. Relative paths are
    /// taken from the config file's directory.
    pub file: Option<PathBuf>,
}

/// `n_lat`, or `[n_lat, n_lon]`. A bare `n_lat` on a full grid means
/// `n_lon = 2 n_lat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridResolution {
    Lat(usize),
    Pair([usize; 2]),
}

impl GridResolution {
    pub fn resolve(self, variant: GridVariant) -> Resolution {
        match (self, variant) {
            (GridResolution::Lat(n), GridVariant::FullS2) => Resolution::full(n, 2 * n),
            (GridResolution::Lat(n), GridVariant::Axisym) => Resolution::axisym(n),
            (GridResolution::Pair([a, b]), GridVariant::FullS2) => Resolution::full(a, b),
            (GridResolution::Pair([a, _]), GridVariant::Axisym) => Resolution::axisym(a),
        }
    }

    pub fn n_lat(self) -> usize {
        match self {
            GridResolution::Lat(n) | GridResolution::Pair([n, _]) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub variant: GridVariant,
    pub resolution: GridResolution,
}

/// `[flow]`: run control plus the step controller settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub residual_tol: f64,
    pub t_max: f64,
    pub monitor_every: usize,
    pub gamma: Option<f64>,
    pub snapshot_every: usize,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
    pub rtol: f64,
    pub atol: f64,
    pub stability_fraction: f64,
    pub stability_every: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        let s = StepperConfig::default();
        Self {
            residual_tol: 1e-6,
            t_max: 20.0,
            monitor_every: 10,
            gamma: None,
            snapshot_every: 0,
            dt_init: s.dt_init,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            safety: s.safety,
            rtol: s.rtol,
            atol: s.atol,
            stability_fraction: s.stability_fraction,
            stability_every: s.stability_every,
        }
    }
}

impl FlowSection {
    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            safety: self.safety,
            rtol: self.rtol,
            atol: self.atol,
            stability_fraction: self.stability_fraction,
            stability_every: self.stability_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawSection {
    pub t_max: f64,
    pub blow_up_factor: f64,
    pub sample_times: Vec<f64>,
    pub record_every: usize,
}

impl Default for RawSection {
    fn default() -> Self {
        let o = RawOptions::default();
        Self {
            t_max: 1.0,
            blow_up_factor: o.blow_up_factor,
            sample_times: o.sample_times,
            record_every: o.record_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    None,
    Obj,
    Ply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub trace_csv: bool,
    pub summary_json: bool,
    pub mesh: MeshFormat,
    /// Write every snapshot field (needs `flow.snapshot_every`, which
    /// defaults to `flow.monitor_every` when this is on).
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("cmflow-out"),
            trace_csv: true,
            summary_json: true,
            mesh: MeshFormat::None,
            snapshots: false,
        }
    }
}

/// Sweep axes. An empty axis keeps the base config's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alpha: Vec<f64>,
    /// Replaces the `eps` parameter of a closed-form `psi`.
    pub eps: Vec<f64>,
    pub resolution: Vec<usize>,
    pub max_runs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alpha: Vec::new(),
            eps: Vec::new(),
            resolution: Vec::new(),
            max_runs: DEFAULT_SWEEP_CAP,
        }
    }
}

/// One point of a sweep; `None` keeps the base value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SweepPoint {
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub resolution: Option<usize>,
}

/// The TOML run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_dim: usize,
    pub k: usize,
    pub alpha: f64,
    /// Seed for random initial modes; replaces `initial.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub allow_uneven: bool,
    pub psi: PsiSection,
    pub grid: GridSection,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub raw: RawSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
    /// Directory of the config file, for relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
    pub allow_uneven: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        self.force |= o.force;
        self.allow_uneven |= o.allow_uneven;
    }

    fn closed_psi(&self, alpha: f64, eps: Option<f64>) -> Result<PsiSpec> {
        let s = &self.psi;
        let (family, mut params) = match (&s.family, &s.kv) {
            (Some(f), None) => (f.clone(), s.params.clone()),
            (None, Some(kv)) => {
                let spec = PsiSpec::from_kv_block(kv)?;
                (spec.family_name().to_string(), spec.params())
            }
            _ => unreachable!("checked by psi_source"),
        };
        if let Some(e) = eps {
            if family == "constant" {
                return Err(Error::InvalidConfig(
                    "sweep.eps needs a psi family with an `eps` parameter".into(),
                ));
            }
            params.insert("eps".into(), e);
        }
        if family == "power_of_base" && !params.contains_key("exponent") {
            params.insert("exponent".into(), 1.0 + self.k as f64 * alpha);
        }
        PsiSpec::from_params(&family, &params)
    }

    fn psi_source(&self, alpha: f64, eps: Option<f64>, variant: GridVariant, res: Resolution) -> Result<PsiSource> {
        let s = &self.psi;
        let given = usize::from(s.family.is_some()) + usize::from(s.kv.is_some()) + usize::from(s.file.is_some());
        if given != 1 {
            return Err(Error::InvalidConfig(
                "[psi] needs exactly one of `family`, `kv`, `file`".into(),
            ));
        }
        if s.family.is_none() && !s.params.is_empty() {
            return Err(Error::InvalidConfig("psi.params only go with psi.family".into()));
        }
        match &s.file {
            None => Ok(PsiSource::Closed(self.closed_psi(alpha, eps)?)),
            Some(file) => {
                if eps.is_some() {
                    return Err(Error::InvalidConfig("sweep.eps does not apply to a sampled psi".into()));
                }
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path)?;
                let grid = build_grid(variant, self.n_dim, res)?;
                let field = read_sampled_psi(&text, &grid)?;
                Ok(PsiSource::Sampled {
                    label: path.display().to_string(),
                    values: field.into_values(),
                })
            }
        }
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        self.flow_config_at(SweepPoint::default())
    }

    pub fn flow_config_at(&self, point: SweepPoint) -> Result<FlowConfig> {
        let alpha = point.alpha.unwrap_or(self.alpha);
        let variant = self.grid.variant;
        let resolution = match point.resolution {
            Some(n) => GridResolution::Lat(n).resolve(variant),
            None => self.grid.resolution.resolve(variant),
        };
        let psi = self.psi_source(alpha, point.eps, variant, resolution)?;
        let mut initial = self.initial.clone();
        if let Some(seed) = self.seed {
            initial.seed = seed;
        }
        let f = &self.flow;
        let snapshot_every = if self.output.snapshots && f.snapshot_every == 0 {
            f.monitor_every
        } else {
            f.snapshot_every
        };
        let cfg = FlowConfig {
            n_dim: self.n_dim,
            k: self.k,
            alpha,
            psi,
            initial,
            variant,
            resolution,
            stepper: f.stepper(),
            residual_tol: f.residual_tol,
            t_max: f.t_max,
            monitor_every: f.monitor_every,
            gamma: f.gamma,
            snapshot_every,
            force: self.force,
            allow_uneven: self.allow_uneven,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The flow config for the raw flow: `raw.t_max` replaces `flow.t_max`.
    pub fn raw_config(&self) -> Result<(FlowConfig, RawOptions)> {
        let mut cfg = self.flow_config()?;
        cfg.t_max = self.raw.t_max;
        cfg.validate()?;
        Ok((
            cfg,
            RawOptions {
                blow_up_factor: self.raw.blow_up_factor,
                sample_times: self.raw.sample_times.clone(),
                record_every: self.raw.record_every,
            },
        ))
    }

    /// Cartesian product of the sweep axes, alpha outermost.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let s = &self.sweep;
        let axis = |v: &[f64]| -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        };
        let res: Vec<Option<usize>> = if s.resolution.is_empty() {
            vec![None]
        } else {
            s.resolution.iter().copied().map(Some).collect()
        };
        let (alphas, epss) = (axis(&s.alpha), axis(&s.eps));
        let size = alphas.len() * epss.len() * res.len();
        if size > s.max_runs {
            return Err(Error::InvalidConfig(format!(
                "sweep has {size} runs, above the cap of {}; raise sweep.max_runs to allow it",
                s.max_runs
            )));
        }
        let mut points = Vec::with_capacity(size);
        for &alpha in &alphas {
            for &eps in &epss {
                for &resolution in &res {
                    points.push(SweepPoint { alpha, eps, resolution });
                }
            }
        }
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
n_dim = 3
k = 2
alpha = 1.0

[psi]
family = "power_of_base"
params = { eps = 0.1 }

[grid]
variant = "axisym"
resolution = 32
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        let fc = cfg.flow_config().unwrap();
        assert_eq!(fc.resolution, Resolution::axisym(32));
        assert_eq!(
            fc.psi,
            PsiSource::Closed(PsiSpec::power_of_base(1.0, 0.1, 2, 3.0).unwrap())
        );
        assert_eq!(fc.t_max, 20.0);
        assert_eq!(cfg.output.mesh, MeshFormat::None);
    }

    #[test]
    fn stepper_keys_live_in_flow() {
        let text = format!("{BASE}\n[flow]\nt_max = 3.0\nrtol = 1e-7\nstability_every = 5\n");
        let fc = RunConfig::from_toml(&text).unwrap().flow_config().unwrap();
        assert_eq!((fc.t_max, fc.stepper.rtol, fc.stepper.stability_every), (3.0, 1e-7, 5));
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(RunConfig::from_toml(&format!("{BASE}\n[flow]\nbogus = 1\n")).is_err());
        assert!(RunConfig::from_toml("n_dim = 2").is_err());
    }

    #[test]
    fn full_resolution_forms() {
        let r = GridResolution::Lat(16).resolve(GridVariant::FullS2);
        assert_eq!((r.n_lat, r.n_lon), (16, 32));
        let text = "n_dim = 2\nk = 1\nalpha = 1.0\n[psi]\nfamily = \"constant\"\nparams = { value = 1.0 }\n[grid]\nvariant = \"full_s2\"\nresolution = [16, 48]\n";
        let fc = RunConfig::from_toml(text).unwrap().flow_config().unwrap();
        assert_eq!(fc.resolution, Resolution::full(16, 48));
    }

    #[test]
    fn kv_psi_block() {
        let spec = PsiSpec::even_harmonic(1.0, 0.2, 2).unwrap();
        let text = format!(
            "n_dim = 3\nk = 1\nalpha = 2.0\n[psi]\nkv = '''\n{}'''\n[grid]\nvariant = \"axisym\"\nresolution = 16\n",
            spec.to_kv_block()
        );
        let fc = RunConfig::from_toml(&text).unwrap().flow_config().unwrap();
        assert_eq!(fc.psi, PsiSource::Closed(spec));
    }

    #[test]
    fn psi_needs_exactly_one_source() {
        let text = BASE.replace(
            "params = { eps = 0.1 }",
            "params = { eps = 0.1 }\nkv = \"family = constant\\nvalue = 1\"",
        );
        assert!(RunConfig::from_toml(&text).unwrap().flow_config().is_err());
    }

    #[test]
    fn sweep_product_and_cap() {
        let text = format!("{BASE}\n[sweep]\nalpha = [0.75, 1.0, 1.5]\neps = [0.0, 0.1]\n");
        let cfg = RunConfig::from_toml(&text).unwrap();
        let pts = cfg.sweep_points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1].alpha, Some(0.75));
        assert_eq!(pts[1].eps, Some(0.1));
        let fc = cfg.flow_config_at(pts[5]).unwrap();
        assert_eq!(
            fc.psi,
            PsiSource::Closed(PsiSpec::power_of_base(1.0, 0.1, 2, 4.0).unwrap())
        );
        let big: Vec<String> = (0..20).map(|i| format!("{}", 1.0 + i as f64 * 0.1)).collect();
        let text = format!(
            "{BASE}\n[sweep]\nalpha = [{}]\neps = [{}]\n",
            big.join(","),
            big.join(",")
        );
        let mut cfg = RunConfig::from_toml(&text).unwrap();
        assert!(matches!(cfg.sweep_points(), Err(Error::InvalidConfig(_))));
        cfg.sweep.max_runs = 400;
        assert_eq!(cfg.sweep_points().unwrap().len(), 400);
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::from_toml(BASE).unwrap();
        cfg.apply(&Overrides {
            out: Some("x".into()),
            seed: Some(9),
            force: true,
            allow_uneven: false,
        });
        let fc = cfg.flow_config().unwrap();
        assert_eq!((fc.initial.seed, fc.force, fc.allow_uneven), (9, true, false));
        assert_eq!(cfg.output.dir, PathBuf::from("x"));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
