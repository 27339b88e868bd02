//! Closed-form and brute-force references.
//!
//! Round spheres stay round under the flow with `psi = 1`, so their radius
//! obeys the scalar ODE `dr/dt = C(n,k)^alpha r^{k alpha}`; everything else in
//! here is finite differences and grid-refinement bookkeeping.

use std::fmt;

use serde::Serialize;

use crate::calculus::binomial;
use crate::error::{Error, Result};
use crate::grid::{build_grid, legendre, GridVariant, Resolution, SupportField};

/// Round-sphere reduction of the raw flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereOde {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
    pub r0: f64,
}

/// The radius is undefined at or beyond the blow-up time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    pub t_star: f64,
}

impl fmt::Display for BlowUp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sphere blows up at T* = {}", self.t_star)
    }
}

impl std::error::Error for BlowUp {}

impl SphereOde {
    pub fn new(n: usize, k: usize, alpha: f64, r0: f64) -> Result<Self> {
        if !(r0 > 0.0) || !(alpha > 0.0) || k == 0 || k > n {
            return Err(Error::InvalidConfig(format!(
                "sphere ODE needs r0 > 0, alpha > 0, 1 <= k <= n; got r0 = {r0}, alpha = {alpha}, k = {k}, n = {n}"
            )));
        }
        Ok(Self { n, k, alpha, r0 })
    }

    /// `C(n,k)^alpha`, the speed of the unit sphere.
    pub fn rate(&self) -> f64 {
        binomial(self.n, self.k).powf(self.alpha)
    }

    /// `k alpha`, the homogeneity of the speed.
    pub fn homogeneity(&self) -> f64 {
        self.k as f64 * self.alpha
    }

    /// Finite blow-up time when `k alpha > 1`.
    pub fn blow_up_time(&self) -> Option<f64> {
        let q = self.homogeneity();
        (q > 1.0).then(|| self.r0.powf(1.0 - q) / ((q - 1.0) * self.rate()))
    }

    /// Radius at time `t >= 0`.
    pub fn radius(&self, t: f64) -> std::result::Result<f64, BlowUp> {
        if let Some(t_star) = self.blow_up_time() {
            if t >= t_star {
                return Err(BlowUp { t_star });
            }
        }
        if t == 0.0 {
            return Ok(self.r0);
        }
        let q = self.homogeneity();
        let c = self.rate();
        if q == 1.0 {
            return Ok(self.r0 * (c * t).exp());
        }
        Ok((self.r0.powf(1.0 - q) + (1.0 - q) * c * t).powf(1.0 / (1.0 - q)))
    }
}

/// Free-function form of [`SphereOde::radius`].
pub fn sphere_radius(t: f64, ode: &SphereOde) -> std::result::Result<f64, BlowUp> {
    ode.radius(t)
}

/// Radius of the round sphere with `int u sigma_k = |S^n|`:
/// `r* = C(n,k)^{-1/(k+1)}`.
pub fn stationary_radius(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::DegreeOutOfRange { k, n });
    }
    Ok(binomial(n, k).powf(-1.0 / (k as f64 + 1.0)))
}

/// Outcome of a finite-difference comparison over a step sequence.
#[derive(Debug, Clone, Serialize)]
pub struct FdCheck {
    /// `(h, error)` per step.
    pub errors: Vec<(f64, f64)>,
    /// Smallest error over the sequence.
    pub max_rel_err: f64,
    /// Least-squares slope of `log error` against `log h` over the points
    /// above the roundoff floor; `None` when fewer than two remain.
    pub observed_order: Option<f64>,
}

/// Errors below this are treated as roundoff and excluded from order fits.
const ROUNDOFF_FLOOR: f64 = 1e-13;

fn lsq_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > ROUNDOFF_FLOOR)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Compares an analytic gradient with central differences of `f` at `point`
/// for each step in `hs`. Errors are relative to `max |grad|`.
pub fn gradient_fd_check(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    point: &[f64],
    hs: &[f64],
) -> Result<FdCheck> {
    let g = grad(point);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut errors = Vec::with_capacity(hs.len());
    for &h in hs {
        let mut worst = 0.0f64;
        for i in 0..point.len() {
            let mut xp = point.to_vec();
            let mut xm = point.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
        if !worst.is_finite() {
            return Err(Error::Oracle(format!("non-finite difference quotient at h = {h}")));
        }
        errors.push((h, worst));
    }
    let max_rel_err = errors.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    Ok(FdCheck {
        observed_order: lsq_slope(&errors),
        errors,
        max_rel_err,
    })
}

/// Grid-refinement study of a discretization error.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    /// `(h, sup error)` per level, coarsest first.
    pub levels: Vec<(f64, f64)>,
    /// Least-squares convergence order over levels above the roundoff floor.
    pub observed_order: Option<f64>,
    /// Errors decrease monotonically (or sit at the roundoff floor).
    pub monotone: bool,
}

impl RefinementReport {
    pub fn from_levels(levels: Vec<(f64, f64)>) -> Self {
        let monotone = levels
            .windows(2)
            .all(|w| w[1].1 < w[0].1 || w[1].1 <= ROUNDOFF_FLOOR * 10.0);
        Self {
            observed_order: lsq_slope(&levels),
            monotone,
            levels,
        }
    }

    pub fn finest_error(&self) -> f64 {
        self.levels.last().map(|l| l.1).unwrap_or(f64::NAN)
    }
}

/// Test functions for Hessian refinement studies on full `S^2` grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianProbe {
    /// `<a, x>` with a generic `a`; `W` must vanish.
    Linear,
    /// `1 + 0.05 P_2(cos theta)`; compared with the closed-form radii.
    ZonalP2,
}

/// Sup error of `W_u` on a full grid with `n_lat x 2 n_lat` nodes.
pub fn hessian_error(probe: HessianProbe, n_lat: usize) -> Result<f64> {
    let grid = build_grid(GridVariant::FullS2, 2, Resolution::full(n_lat, 2 * n_lat))?;
    let a = [0.3, -0.7, 0.5];
    let eps = 0.05;
    let u = match probe {
        HessianProbe::Linear => SupportField::from_fn(grid.clone(), |x| a[0] * x[0] + a[1] * x[1] + a[2] * x[2])?,
        HessianProbe::ZonalP2 => SupportField::zonal(grid.clone(), |t| 1.0 + eps * legendre(2, t.cos()))?,
    };
    let jet = u.jet()?;
    let mut err = 0.0f64;
    for (i, h) in jet.hess.iter().enumerate() {
        let v = u.values()[i];
        let w = [h[0] + v, h[1], h[2] + v];
        let exact = match probe {
            HessianProbe::Linear => [0.0, 0.0, 0.0],
            HessianProbe::ZonalP2 => {
                let c = grid.cos_polar(i);
                [
                    1.0 + eps * (5.0 - 9.0 * c * c) / 2.0,
                    0.0,
                    1.0 - eps * (3.0 * c * c + 1.0) / 2.0,
                ]
            }
        };
        for d in 0..3 {
            err = err.max((w[d] - exact[d]).abs());
        }
    }
    Ok(err)
}

/// Refinement study of [`hessian_error`] over latitude counts `n_lats`.
pub fn hessian_refinement(probe: HessianProbe, n_lats: &[usize]) -> Result<RefinementReport> {
    let levels = n_lats
        .iter()
        .map(|&n| Ok((std::f64::consts::PI / n as f64, hessian_error(probe, n)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinementReport::from_levels(levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_radius_examples() {
        let ode = SphereOde::new(2, 1, 1.0, 1.0).unwrap();
        assert!((ode.radius(0.5).unwrap() - std::f64::consts::E).abs() < 1e-14);
        let ode = SphereOde::new(2, 1, 2.0, 1.0).unwrap();
        assert_eq!(ode.blow_up_time(), Some(0.25));
        assert_eq!(ode.radius(0.25), Err(BlowUp { t_star: 0.25 }));
        assert!((ode.radius(0.2).unwrap() - 5.0).abs() < 1e-12);
        let ode = SphereOde::new(3, 2, 0.25, 1.0).unwrap();
        assert!(ode.blow_up_time().is_none());
        let expect = (1.0 + 0.5 * 3f64.powf(0.25)).powi(2);
        assert!((ode.radius(1.0).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn sphere_radius_is_a_flow() {
        for (alpha, r0) in [(0.3, 0.7), (1.0, 1.2), (2.0, 0.9)] {
            let ode = SphereOde::new(2, 1, alpha, r0).unwrap();
            assert_eq!(ode.radius(0.0).unwrap(), r0);
            let (t1, t2) = (0.01, 0.02);
            let mid = ode.radius(t1).unwrap();
            let direct = ode.radius(t1 + t2).unwrap();
            let composed = SphereOde { r0: mid, ..ode }.radius(t2).unwrap();
            assert!((direct - composed).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn stationary_radius_examples() {
        assert!((stationary_radius(2, 1).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((stationary_radius(3, 2).unwrap() - 3f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((stationary_radius(3, 1).unwrap() - 3f64.powf(-0.5)).abs() < 1e-15);
        assert!(stationary_radius(2, 2).is_err());
    }

    #[test]
    fn gradient_check_on_cubic() {
        let f = |x: &[f64]| x[0].powi(3) + x[0] * x[1];
        let g = |x: &[f64]| vec![3.0 * x[0] * x[0] + x[1], x[0]];
        let r = gradient_fd_check(f, g, &[0.7, -0.2], &[1e-2, 5e-3, 2.5e-3]).unwrap();
        let p = r.observed_order.unwrap();
        assert!((p - 2.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn refinement_flags_non_convergence() {
        let r = RefinementReport::from_levels(vec![(0.1, 1e-3), (0.05, 2e-3)]);
        assert!(!r.monotone);
        let r = RefinementReport::from_levels(vec![(0.1, 1e-3), (0.05, 6.25e-5)]);
        assert!(r.monotone);
        assert!((r.observed_order.unwrap() - 4.0).abs() < 1e-9);
    }
}
