//! The anisotropy `psi`: closed-form families, evaluation on grids, evenness,
//! and the admissibility certificate
//! `hess(f) + f g > 0` for `f = psi^{1/(1 + k alpha)}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::radii_spectrum;
use crate::error::{Error, Result};
use crate::grid::{legendre, SphereGrid, SupportField};

/// Smallest admissible eigenvalue of `W_f`; strict positivity with margin.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-8;

/// Zonal families, all functions of `cos(theta)` about the polar axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiSpec {
    /// `psi = value`
    Constant { value: f64 },
    /// `psi = c0 + eps * P_degree(cos theta)`, `degree` even.
    EvenHarmonic { c0: f64, eps: f64, degree: usize },
    /// `psi = (c0 + eps * P_degree(cos theta))^exponent`, `degree` even.
    PowerOfBase {
        c0: f64,
        eps: f64,
        degree: usize,
        exponent: f64,
    },
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Constant { value } => write!(f, "constant({value})"),
            PsiSpec::EvenHarmonic { c0, eps, degree } => {
                write!(f, "{c0} + {eps} P_{degree}")
            }
            PsiSpec::PowerOfBase {
                c0,
                eps,
                degree,
                exponent,
            } => write!(f, "({c0} + {eps} P_{degree})^{exponent}"),
        }
    }
}

impl PsiSpec {
    pub fn constant(value: f64) -> Result<Self> {
        let s = PsiSpec::Constant { value };
        s.validate()?;
        Ok(s)
    }

    pub fn even_harmonic(c0: f64, eps: f64, degree: usize) -> Result<Self> {
        let s = PsiSpec::EvenHarmonic { c0, eps, degree };
        s.validate()?;
        Ok(s)
    }

    pub fn power_of_base(c0: f64, eps: f64, degree: usize, exponent: f64) -> Result<Self> {
        let s = PsiSpec::PowerOfBase {
            c0,
            eps,
            degree,
            exponent,
        };
        s.validate()?;
        Ok(s)
    }

    /// `(1 + eps P_2)^{1 + k alpha}`: the family whose admissibility root is
    /// exactly the base `1 + eps P_2`.
    pub fn p2_power_family(eps: f64, k: usize, alpha: f64) -> Result<Self> {
        Self::power_of_base(1.0, eps, 2, 1.0 + k as f64 * alpha)
    }

    /// Checks parameter ranges and positivity on the whole sphere.
    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPsi(format!("{name} must be finite")))
            }
        };
        match *self {
            PsiSpec::Constant { value } => {
                finite(value, "value")?;
                if value <= 0.0 {
                    return Err(Error::InvalidPsi(format!("constant must be positive, got {value}")));
                }
            }
            PsiSpec::EvenHarmonic { c0, eps, degree } | PsiSpec::PowerOfBase { c0, eps, degree, .. } => {
                finite(c0, "c0")?;
                finite(eps, "eps")?;
                if degree % 2 != 0 {
                    return Err(Error::InvalidPsi(format!("harmonic degree must be even, got {degree}")));
                }
                if let PsiSpec::PowerOfBase { exponent, .. } = *self {
                    finite(exponent, "exponent")?;
                }
                // |P_l| <= 1 on [-1, 1], attained at the poles
                let min_base = (0..=2000)
                    .map(|i| c0 + eps * legendre(degree, -1.0 + i as f64 / 1000.0))
                    .fold(f64::INFINITY, f64::min);
                if min_base <= 0.0 {
                    return Err(Error::InvalidPsi(format!(
                        "base c0 + eps P_{degree} reaches {min_base:.3e} <= 0"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `psi` at a polar-angle cosine.
    pub fn eval_cos(&self, c: f64) -> f64 {
        match *self {
            PsiSpec::Constant { value } => value,
            PsiSpec::EvenHarmonic { c0, eps, degree } => c0 + eps * legendre(degree, c),
            PsiSpec::PowerOfBase {
                c0,
                eps,
                degree,
                exponent,
            } => (c0 + eps * legendre(degree, c)).powf(exponent),
        }
    }

    /// `psi` at a unit direction; the polar axis is the last coordinate.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_cos(*x.last().expect("nonempty direction"))
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            PsiSpec::Constant { .. } => "constant",
            PsiSpec::EvenHarmonic { .. } => "even_harmonic",
            PsiSpec::PowerOfBase { .. } => "power_of_base",
        }
    }

    /// Numeric parameters by name.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            PsiSpec::Constant { value } => {
                m.insert("value".into(), value);
            }
            PsiSpec::EvenHarmonic { c0, eps, degree } => {
                m.insert("c0".into(), c0);
                m.insert("eps".into(), eps);
                m.insert("degree".into(), degree as f64);
            }
            PsiSpec::PowerOfBase {
                c0,
                eps,
                degree,
                exponent,
            } => {
                m.insert("c0".into(), c0);
                m.insert("eps".into(), eps);
                m.insert("degree".into(), degree as f64);
                m.insert("exponent".into(), exponent);
            }
        }
        m
    }

    /// Inverse of [`PsiSpec::family_name`] + [`PsiSpec::params`]. Missing
    /// `c0` defaults to 1 and missing `degree` to 2.
    pub fn from_params(family: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::InvalidPsi(format!("family {family} needs parameter `{k}`")))
        };
        let degree = || -> Result<usize> {
            let d = params.get("degree").copied().unwrap_or(2.0);
            if d < 0.0 || d.fract() != 0.0 {
                return Err(Error::InvalidPsi(format!(
                    "degree must be a nonnegative integer, got {d}"
                )));
            }
            Ok(d as usize)
        };
        let c0 = params.get("c0").copied().unwrap_or(1.0);
        match family {
            "constant" => Self::constant(get("value")?),
            "even_harmonic" => Self::even_harmonic(c0, get("eps")?, degree()?),
            "power_of_base" => Self::power_of_base(c0, get("eps")?, degree()?, get("exponent")?),
            other => Err(Error::InvalidPsi(format!("unknown family `{other}`"))),
        }
    }

    /// Flat `key = value` text block, `family` first.
    pub fn to_kv_block(&self) -> String {
        let mut s = format!("family = {}\n", self.family_name());
        for (k, v) in self.params() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn from_kv_block(text: &str) -> Result<Self> {
        let mut family = None;
        let mut params = BTreeMap::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidPsi(format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "family" {
                family = Some(v.to_string());
            } else {
                let x: f64 = v
                    .parse()
                    .map_err(|_| Error::InvalidPsi(format!("parameter `{k}` is not a number: `{v}`")))?;
                params.insert(k.to_string(), x);
            }
        }
        let family = family.ok_or_else(|| Error::InvalidPsi("missing `family`".into()))?;
        Self::from_params(&family, &params)
    }
}

/// Samples `psi` on a grid; every sample must be strictly positive.
pub fn eval_psi(spec: &PsiSpec, grid: &Arc<SphereGrid>) -> Result<SupportField> {
    let field = SupportField::from_fn(grid.clone(), |x| spec.eval(x))?;
    ensure_positive(&field, "psi")?;
    Ok(field)
}

pub(crate) fn ensure_positive(field: &SupportField, context: &'static str) -> Result<()> {
    if let Some((node, &value)) = field.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositive { node, value, context });
    }
    Ok(())
}

/// Reads a sampled `psi`: one value per node in latitude-major order, one
/// number per line. Blank lines and `#` comments are skipped.
pub fn read_sampled_psi(text: &str, grid: &Arc<SphereGrid>) -> Result<SupportField> {
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::InvalidPsi(format!("line {}: not a number: `{line}`", lineno + 1)))?;
        values.push(v);
    }
    let field = SupportField::new(grid.clone(), values)?;
    ensure_positive(&field, "sampled psi")?;
    Ok(field)
}

/// Largest antipodal defect `max |psi(x) - psi(-x)|`.
pub fn check_even(psi: &SupportField) -> f64 {
    psi.antipodal_defect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdmissibilityReport {
    pub k: usize,
    pub alpha: f64,
    /// `1 / (1 + k alpha)`
    pub exponent: f64,
    /// Minimum eigenvalue of `W_f`, `f = psi^{1/(1+k alpha)}`.
    pub min_eigenvalue: f64,
    /// The same certificate computed as `f = psi_tilde^{-1/(k+p-1)}` with
    /// `psi_tilde = psi^{-1/alpha}`, `p = 1 + 1/alpha`.
    pub min_eigenvalue_tilde_form: f64,
    /// `alpha > 1/k`
    pub within_theorem_range: bool,
    pub admissible: bool,
}

/// Admissibility certificate for `psi` with parameters `(k, alpha)`.
pub fn check_admissible(psi: &SupportField, k: usize, alpha: f64) -> Result<AdmissibilityReport> {
    ensure_positive(psi, "psi")?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    let n = psi.grid().n_dim();
    if k == 0 || k > n {
        return Err(Error::DegreeOutOfRange { k, n });
    }
    let kf = k as f64;
    let exponent = 1.0 / (1.0 + kf * alpha);
    let f = psi.map(|v| v.powf(exponent))?;
    let min_eigenvalue = radii_spectrum(&f)?.min_eigenvalue().0;

    let p = 1.0 + 1.0 / alpha;
    let tilde = psi.map(|v| v.powf(-1.0 / alpha))?;
    let g = tilde.map(|v| v.powf(-1.0 / (kf + p - 1.0)))?;
    let min_eigenvalue_tilde_form = radii_spectrum(&g)?.min_eigenvalue().0;

    let admissible = min_eigenvalue > ADMISSIBILITY_MARGIN && min_eigenvalue_tilde_form > ADMISSIBILITY_MARGIN;
    Ok(AdmissibilityReport {
        k,
        alpha,
        exponent,
        min_eigenvalue,
        min_eigenvalue_tilde_form,
        within_theorem_range: alpha > 1.0 / kf,
        admissible,
    })
}
