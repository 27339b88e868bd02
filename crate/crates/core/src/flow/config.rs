use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, legendre, GridVariant, Resolution, SphereGrid, SupportField};
use crate::psi::{eval_psi, read_sampled_psi, PsiSpec};

/// Where `psi` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiSource {
    Closed(PsiSpec),
    /// Node samples in latitude-major order, as read by
    /// [`crate::psi::read_sampled_psi`].
    Sampled {
        label: String,
        values: Vec<f64>,
    },
}

impl PsiSource {
    pub fn field(&self, grid: &Arc<SphereGrid>) -> Result<SupportField> {
        match self {
            PsiSource::Closed(spec) => eval_psi(spec, grid),
            PsiSource::Sampled { values, .. } => {
                let text: String = values.iter().map(|v| format!("{v:e}\n")).collect();
                read_sampled_psi(&text, grid)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, PsiSource::Closed(PsiSpec::Constant { .. }))
    }
}

/// One zonal harmonic `amplitude * P_degree(<axis, x>)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub degree: usize,
    pub amplitude: f64,
    /// Symmetry axis in `R^3`; full `S^2` grids only. Defaults to the pole.
    #[serde(default)]
    pub axis: Option<[f64; 3]>,
}

/// Initial body: `u0 = renormalize(base + sum of even zonal harmonics)`.
///
/// Random modes draw an even degree in `2..=random_max_degree`, a uniform
/// axis (full grids) and an amplitude `random_amplitude * U(-1, 1) / (l (l+1))`,
/// so `random_amplitude` bounds the curvature perturbation per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub base: f64,
    pub modes: Vec<Mode>,
    pub random_modes: usize,
    pub random_amplitude: f64,
    pub random_max_degree: usize,
    pub seed: u64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            base: 1.0,
            modes: Vec::new(),
            random_modes: 0,
            random_amplitude: 0.3,
            random_max_degree: 4,
            seed: 0,
        }
    }
}

impl InitialSpec {
    pub fn p2(eps: f64) -> Self {
        Self {
            modes: vec![Mode {
                degree: 2,
                amplitude: eps,
                axis: None,
            }],
            ..Self::default()
        }
    }

    /// The explicit modes followed by the seeded random ones.
    pub fn all_modes(&self, variant: GridVariant) -> Result<Vec<Mode>> {
        let mut modes = self.modes.clone();
        if self.random_modes > 0 {
            if self.random_max_degree < 2 {
                return Err(Error::InvalidConfig("random_max_degree must be at least 2".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for _ in 0..self.random_modes {
                let degree = 2 * rng.gen_range(1..=self.random_max_degree / 2);
                let l = degree as f64;
                let amplitude = self.random_amplitude * rng.gen_range(-1.0..1.0) / (l * (l + 1.0));
                let axis = match variant {
                    GridVariant::Axisym => None,
                    GridVariant::FullS2 => loop {
                        let v: [f64; 3] = [
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        ];
                        let r2: f64 = v.iter().map(|c| c * c).sum();
                        if r2 > 1e-4 && r2 <= 1.0 {
                            break Some(v);
                        }
                    },
                };
                modes.push(Mode {
                    degree,
                    amplitude,
                    axis,
                });
            }
        }
        for m in &modes {
            if m.degree % 2 != 0 {
                return Err(Error::InvalidConfig(format!(
                    "initial modes must be even, got degree {}",
                    m.degree
                )));
            }
            if variant == GridVariant::Axisym && m.axis.is_some() {
                return Err(Error::InvalidConfig("axisymmetric grids only take polar modes".into()));
            }
        }
        Ok(modes)
    }

    /// Samples `base + sum a P_l(<d, x>)` (not yet normalized).
    pub fn sample(&self, grid: &Arc<SphereGrid>) -> Result<SupportField> {
        if !(self.base > 0.0 && self.base.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial base must be positive, got {}",
                self.base
            )));
        }
        let modes = self.all_modes(grid.variant())?;
        let axes: Vec<Option<[f64; 3]>> = modes
            .iter()
            .map(|m| {
                m.axis.map(|a| {
                    let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                    [a[0] / r, a[1] / r, a[2] / r]
                })
            })
            .collect();
        SupportField::from_fn(grid.clone(), |x| {
            let polar = *x.last().expect("nonempty direction");
            let mut v = self.base;
            for (m, axis) in modes.iter().zip(&axes) {
                let c = match axis {
                    Some(d) => d[0] * x[0] + d[1] * x[1] + d[2] * x[2],
                    None => polar,
                };
                v += m.amplitude * legendre(m.degree, c);
            }
            v
        })
    }
}

/// Adaptive step-size controller settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Controller safety factor in `(0, 1)`.
    pub safety: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Fraction of the explicit stability limit `2 / rho(L)` allowed per
    /// step, with `rho(L)` estimated by power iteration.
    pub stability_fraction: f64,
    /// Accepted steps between spectral-radius estimates.
    pub stability_every: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 0.05,
            safety: 0.9,
            rtol: 1e-6,
            atol: 1e-10,
            stability_fraction: 0.8,
            stability_every: 100,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_init >= self.dt_min
            && self.dt_max >= self.dt_init
            && self.safety > 0.0
            && self.safety < 1.0
            && self.rtol >= 0.0
            && self.atol >= 0.0
            && self.rtol + self.atol > 0.0
            && self.stability_fraction > 0.0
            && self.stability_fraction <= 1.0
            && self.stability_every > 0;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "inconsistent step controller settings: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Everything a single run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub n_dim: usize,
    pub k: usize,
    pub alpha: f64,
    pub psi: PsiSource,
    pub initial: InitialSpec,
    pub variant: GridVariant,
    pub resolution: Resolution,
    pub stepper: StepperConfig,
    /// Stop once `rho_hat_relspread` drops below this.
    pub residual_tol: f64,
    pub t_max: f64,
    pub monitor_every: usize,
    /// Exponent in the gradient monitor `|grad u|^2 / u^gamma`;
    /// `None` means `1 / (2n + 1)`.
    pub gamma: Option<f64>,
    /// Keep a copy of `u` every this many accepted steps (0: never).
    pub snapshot_every: usize,
    /// Run even if `psi` fails the admissibility certificate.
    pub force: bool,
    /// Accept a non-even `psi`; `u` is then not symmetrized.
    pub allow_uneven: bool,
}

impl FlowConfig {
    /// Defaults around a given problem.
    pub fn new(n_dim: usize, k: usize, alpha: f64, psi: PsiSpec, variant: GridVariant, resolution: Resolution) -> Self {
        Self {
            n_dim,
            k,
            alpha,
            psi: PsiSource::Closed(psi),
            initial: InitialSpec::default(),
            variant,
            resolution,
            stepper: StepperConfig::default(),
            residual_tol: 1e-6,
            t_max: 20.0,
            monitor_every: 10,
            gamma: None,
            snapshot_every: 0,
            force: false,
            allow_uneven: false,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(1.0 / (2.0 * self.n_dim as f64 + 1.0))
    }

    /// `alpha > 1/k`
    pub fn within_theorem_range(&self) -> bool {
        self.alpha > 1.0 / self.k as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n_dim {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k <= n - 1, got k = {}, n = {}",
                self.k, self.n_dim
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.residual_tol > 0.0) || !(self.t_max > 0.0) || self.monitor_every == 0 {
            return Err(Error::InvalidConfig(
                "residual_tol and t_max must be positive and monitor_every nonzero".into(),
            ));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1), got {g}")));
            }
        }
        self.stepper.validate()
    }

    pub fn build_grid(&self) -> Result<Arc<SphereGrid>> {
        build_grid(self.variant, self.n_dim, self.resolution)
    }
}
