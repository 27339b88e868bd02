//! Stationarity certificate for `u^{1-p} sigma_k(W_u) = c psi_tilde`.
//!
//! With `rho_hat = psi sigma_k^alpha / u`, stationary points of the normalized
//! flow are exactly the states where `rho_hat` is constant, and then
//! `u^{1-p} sigma_k / psi_tilde = rho_hat^{1/alpha}`.

use serde::Serialize;

use crate::calculus::{radii_spectrum, RadiiSpectrum};
use crate::error::{Error, Result};
use crate::grid::SupportField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Mean of `rho_hat` under `d sigma = u sigma_k d mu`.
    pub rho_hat_mean: f64,
    /// `sup |rho_hat / mean - 1|`
    pub rho_hat_relspread: f64,
    /// `p = 1 + 1/alpha`
    pub p: f64,
    /// The constant `c` of the limit equation, as a `d sigma`-weighted mean.
    pub c_lp: f64,
    /// `sup |u^{1-p} sigma_k - c psi_tilde| / (c psi_tilde)`
    pub sup_residual: f64,
}

pub fn stationarity_residual(u: &SupportField, psi: &SupportField, k: usize, alpha: f64) -> Result<ResidualReport> {
    let spectrum = radii_spectrum(u)?;
    residual_from_spectrum(u, psi, &spectrum, k, alpha)
}

pub(crate) fn residual_from_spectrum(
    u: &SupportField,
    psi: &SupportField,
    spectrum: &RadiiSpectrum,
    k: usize,
    alpha: f64,
) -> Result<ResidualReport> {
    let grid = u.grid();
    grid.check_len(psi.len())?;
    let sk = spectrum.sigma_k(k)?;
    if let Some((node, &value)) = sk.iter().enumerate().find(|(_, s)| **s <= 0.0) {
        return Err(Error::NonPositive {
            node,
            value,
            context: "sigma_k",
        });
    }
    if let Some((node, &value)) = u.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositive {
            node,
            value,
            context: "support function",
        });
    }
    let p = 1.0 + 1.0 / alpha;
    let (uv, pv) = (u.values(), psi.values());

    let rho: Vec<f64> = (0..grid.len()).map(|i| pv[i] * sk[i].powf(alpha) / uv[i]).collect();
    let dsigma: Vec<f64> = (0..grid.len()).map(|i| uv[i] * sk[i]).collect();
    let mass = grid.quadrature(&dsigma)?;
    let weighted: Vec<f64> = rho.iter().zip(&dsigma).map(|(r, s)| r * s).collect();
    let rho_hat_mean = grid.quadrature(&weighted)? / mass;
    let rho_hat_relspread = rho.iter().map(|r| (r / rho_hat_mean - 1.0).abs()).fold(0.0, f64::max);

    // ratio = u^{1-p} sigma_k / psi_tilde, psi_tilde = psi^{-1/alpha}
    let ratio: Vec<f64> = (0..grid.len())
        .map(|i| uv[i].powf(1.0 - p) * sk[i] * pv[i].powf(1.0 / alpha))
        .collect();
    let weighted: Vec<f64> = ratio.iter().zip(&dsigma).map(|(r, s)| r * s).collect();
    let c_lp = grid.quadrature(&weighted)? / mass;
    let sup_residual = ratio.iter().map(|r| (r / c_lp - 1.0).abs()).fold(0.0, f64::max);

    Ok(ResidualReport {
        rho_hat_mean,
        rho_hat_relspread,
        p,
        c_lp,
        sup_residual,
    })
}

/// Exponent bookkeeping between the `psi` and `psi_tilde` forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PcRelation {
    /// `p = 1 + 1/alpha`
    pub p: f64,
    /// `1 / (1 + k alpha)`, applied to `psi`.
    pub psi_exponent: f64,
    /// `-1 / (k + p - 1)`, applied to `psi_tilde = psi^{-1/alpha}`.
    pub tilde_exponent: f64,
    /// `(-1/alpha) * tilde_exponent`, the exponent on `psi` that the tilde
    /// form amounts to.
    pub tilde_exponent_on_psi: f64,
    /// `1 < p < k + 1`
    pub in_p_window: bool,
}

/// Returns `p` and both exponent paths; fails if they disagree beyond
/// roundoff.
pub fn cross_check_pc_relation(alpha: f64, k: usize) -> Result<PcRelation> {
    if !(alpha > 0.0 && alpha.is_finite()) || k == 0 {
        return Err(Error::InvalidConfig(format!(
            "need alpha > 0 and k >= 1, got alpha = {alpha}, k = {k}"
        )));
    }
    let kf = k as f64;
    let p = 1.0 + 1.0 / alpha;
    let psi_exponent = 1.0 / (1.0 + kf * alpha);
    let tilde_exponent = -1.0 / (kf + p - 1.0);
    let tilde_exponent_on_psi = -tilde_exponent / alpha;
    if (tilde_exponent_on_psi - psi_exponent).abs() > 1e-14 * psi_exponent {
        return Err(Error::Oracle(format!(
            "exponent paths disagree: {psi_exponent} vs {tilde_exponent_on_psi}"
        )));
    }
    Ok(PcRelation {
        p,
        psi_exponent,
        tilde_exponent,
        tilde_exponent_on_psi,
        in_p_window: p > 1.0 && p < kf + 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridVariant, Resolution};

    #[test]
    fn round_state_report() {
        let g = build_grid(GridVariant::FullS2, 2, Resolution::full(16, 32)).unwrap();
        let u = SupportField::constant(g.clone(), 0.5f64.sqrt());
        let psi = SupportField::constant(g, 1.0);
        let r = stationarity_residual(&u, &psi, 1, 1.0).unwrap();
        assert!((r.rho_hat_mean - 2.0).abs() < 1e-12);
        assert!(r.rho_hat_relspread < 1e-12);
        assert_eq!(r.p, 2.0);
        assert!((r.c_lp - 2.0).abs() < 1e-12);
        assert!(r.sup_residual < 1e-12);
    }

    #[test]
    fn round_state_with_anisotropy_is_not_a_solution() {
        let g = build_grid(GridVariant::Axisym, 3, Resolution::axisym(32)).unwrap();
        let u = SupportField::constant(g.clone(), 0.7);
        let psi = SupportField::zonal(g, |t| 1.0 + 0.2 * t.cos().powi(2)).unwrap();
        let r = stationarity_residual(&u, &psi, 2, 1.0).unwrap();
        assert!(r.rho_hat_relspread > 0.05);
        assert!(r.sup_residual > 0.05);
    }

    #[test]
    fn pc_examples() {
        let r = cross_check_pc_relation(1.0, 1).unwrap();
        assert_eq!(r.p, 2.0);
        assert!((r.psi_exponent - 0.5).abs() < 1e-15);
        let r = cross_check_pc_relation(1.0, 2).unwrap();
        assert!((r.psi_exponent - 1.0 / 3.0).abs() < 1e-15);
        let r = cross_check_pc_relation(2.0, 2).unwrap();
        assert_eq!(r.p, 1.5);
        assert!((r.psi_exponent - 0.2).abs() < 1e-15);
        assert!(r.in_p_window);
        assert!(cross_check_pc_relation(0.0, 1).is_err());
    }

    #[test]
    fn clp_follows_scaling() {
        let g = build_grid(GridVariant::Axisym, 3, Resolution::axisym(32)).unwrap();
        let u = SupportField::zonal(g.clone(), |t| 1.0 + 0.05 * t.cos().powi(2)).unwrap();
        let psi = SupportField::zonal(g, |t| 1.0 + 0.1 * t.cos().powi(2)).unwrap();
        let (k, alpha) = (2, 1.5);
        let a = stationarity_residual(&u, &psi, k, alpha).unwrap();
        let lam = 1.7;
        let b = stationarity_residual(&u.scaled(lam), &psi, k, alpha).unwrap();
        let expect = a.c_lp * lam.powf(k as f64 + 1.0 - a.p);
        assert!((b.c_lp - expect).abs() < 1e-12 * expect);
        assert!((b.sup_residual - a.sup_residual).abs() < 1e-12);
    }
}
