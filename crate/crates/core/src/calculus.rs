//! Convex-body calculus on support functions: principal radii, elementary
//! symmetric polynomials, embeddings, and mixed volumes.
//!
//! Radii are carried as eigenvalue pairs `(a, b)` where `a` is simple and `b`
//! has multiplicity `n - 1`. On `S^2` this is just the two eigenvalues of the
//! 2x2 matrix `W_u`; on axisymmetric grids `a` is the meridian radius and `b`
//! the tangential one.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridVariant, Jet, SphereGrid, SupportField};

pub mod mesh;

pub use mesh::TriangleMesh;

/// Binomial coefficient as a float; zero outside `0 <= k <= n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Elementary symmetric polynomial `sigma_k` of an arbitrary eigenvalue list.
/// `sigma_0 = 1`, and `sigma_k = 0` for `k > len`.
pub fn sigma_k_of(lambda: &[f64], k: usize) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &l in lambda {
        for j in (1..=k).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e[k]
}

/// `d sigma_k / d lambda_i = sigma_{k-1}(lambda | i)` for every `i`.
pub fn sigma_k_gradient_of(lambda: &[f64], k: usize) -> Vec<f64> {
    if k == 0 {
        return vec![0.0; lambda.len()];
    }
    (0..lambda.len())
        .map(|i| {
            let rest: Vec<f64> = lambda
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &l)| l)
                .collect();
            sigma_k_of(&rest, k - 1)
        })
        .collect()
}

/// `sigma_k` of `(a, b, ..., b)` with `b` repeated `n - 1` times.
pub fn sigma_k_pair(n: usize, k: usize, a: f64, b: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let m = n - 1;
    binomial(m, k) * b.powi(k as i32) + binomial(m, k - 1) * a * b.powi(k as i32 - 1)
}

/// Partial derivatives `(d/da, d/db_j)` of [`sigma_k_pair`], the second with
/// respect to a single copy of `b`.
pub fn sigma_k_pair_gradient(n: usize, k: usize, a: f64, b: f64) -> (f64, f64) {
    if k == 0 {
        return (0.0, 0.0);
    }
    let m = n - 1;
    let da = binomial(m, k - 1) * b.powi(k as i32 - 1);
    // sigma_{k-1}(a, b x (n - 2))
    let db = if k == 1 {
        1.0
    } else {
        binomial(m - 1, k - 1) * b.powi(k as i32 - 1) + binomial(m - 1, k - 2) * a * b.powi(k as i32 - 2)
    };
    (da, db)
}

/// Per-node radii of curvature.
#[derive(Debug, Clone)]
pub struct RadiiSpectrum {
    n_dim: usize,
    pairs: Vec<(f64, f64)>,
}

impl RadiiSpectrum {
    pub fn from_pairs(n_dim: usize, pairs: Vec<(f64, f64)>) -> Self {
        Self { n_dim, pairs }
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(simple, repeated)` eigenvalue pair at each node.
    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Full eigenvalue list at a node (length `n`).
    pub fn eigenvalues(&self, node: usize) -> Vec<f64> {
        let (a, b) = self.pairs[node];
        let mut v = vec![b; self.n_dim];
        v[0] = a;
        v
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n_dim {
            return Err(Error::DegreeOutOfRange { k, n: self.n_dim });
        }
        Ok(())
    }

    /// `sigma_k` at every node.
    pub fn sigma_k(&self, k: usize) -> Result<Vec<f64>> {
        self.check_k(k)?;
        let m = self.n_dim - 1;
        let (c1, c2) = (binomial(m, k), binomial(m, k - 1));
        Ok(self
            .pairs
            .iter()
            .map(|&(a, b)| c1 * b.powi(k as i32) + c2 * a * b.powi(k as i32 - 1))
            .collect())
    }

    /// Gradient of `sigma_k` with respect to the full eigenvalue list at each
    /// node.
    pub fn sigma_k_gradient(&self, k: usize) -> Result<Vec<Vec<f64>>> {
        self.check_k(k)?;
        Ok(self
            .pairs
            .iter()
            .map(|&(a, b)| {
                let (da, db) = sigma_k_pair_gradient(self.n_dim, k, a, b);
                let mut g = vec![db; self.n_dim];
                g[0] = da;
                g
            })
            .collect())
    }

    /// Minimum eigenvalue and the node where it occurs.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (a.min(b), i))
            .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc })
    }

    /// First node where `sigma_1..sigma_k` is not all positive.
    pub fn first_outside_garding_cone(&self, k: usize) -> Option<usize> {
        self.pairs
            .iter()
            .position(|&(a, b)| (1..=k).any(|i| sigma_k_pair(self.n_dim, i, a, b) <= 0.0))
    }
}

/// Free-function form of [`RadiiSpectrum::sigma_k`].
pub fn sigma_k(spectrum: &RadiiSpectrum, k: usize) -> Result<Vec<f64>> {
    spectrum.sigma_k(k)
}

/// Free-function form of [`RadiiSpectrum::sigma_k_gradient`].
pub fn sigma_k_gradient(spectrum: &RadiiSpectrum, k: usize) -> Result<Vec<Vec<f64>>> {
    spectrum.sigma_k_gradient(k)
}

/// Closed-form eigenvalues of a symmetric 2x2 matrix `[[p, q], [q, r]]`.
pub fn sym2_eigen(p: f64, q: f64, r: f64) -> (f64, f64) {
    let mean = 0.5 * (p + r);
    let half_diff = 0.5 * (p - r);
    let disc = (half_diff * half_diff + q * q).sqrt();
    (mean - disc, mean + disc)
}

/// `W_u = hess(u) + u I` per node as `[W11, W12, W22]`; on axisymmetric grids
/// the `W22` entry is the tangential radius of multiplicity `n - 1`.
pub fn radii_matrix(u: &[f64], jet: &Jet) -> Vec<[f64; 3]> {
    jet.hess
        .iter()
        .zip(u)
        .map(|(h, &v)| [h[0] + v, h[1], h[2] + v])
        .collect()
}

/// Radii spectrum from precomputed derivatives.
pub fn spectrum_from_jet(grid: &SphereGrid, u: &[f64], jet: &Jet) -> RadiiSpectrum {
    let pairs = radii_matrix(u, jet)
        .into_iter()
        .map(|w| match grid.variant() {
            GridVariant::FullS2 => sym2_eigen(w[0], w[1], w[2]),
            GridVariant::Axisym => (w[0], w[2]),
        })
        .collect();
    RadiiSpectrum::from_pairs(grid.n_dim(), pairs)
}

/// Eigenvalues of `W_u` at every node.
pub fn radii_spectrum(u: &SupportField) -> Result<RadiiSpectrum> {
    let jet = u.jet()?;
    Ok(spectrum_from_jet(u.grid(), u.values(), &jet))
}

/// Global minimum principal radius; negative when `W_u` is indefinite
/// somewhere.
pub fn min_radius(u: &SupportField) -> Result<f64> {
    Ok(radii_spectrum(u)?.min_eigenvalue().0)
}

/// Points `X = u x + grad u` of the body with support function `u`.
#[derive(Debug, Clone)]
pub struct EmbeddedBody {
    pub grid: Arc<SphereGrid>,
    /// Positions in `R^{n+1}`, one per node.
    pub points: Vec<Vec<f64>>,
    /// `|X|` per node.
    pub rho: Vec<f64>,
}

impl EmbeddedBody {
    /// Largest `|rho^2 - (u^2 + |grad u|^2)|` over nodes.
    pub fn rho_identity_defect(&self, u: &SupportField, jet: &Jet) -> f64 {
        self.rho
            .iter()
            .zip(u.values())
            .enumerate()
            .map(|(i, (r, v))| (r * r - (v * v + jet.grad_norm_sq(i))).abs())
            .fold(0.0, f64::max)
    }
}

/// Tolerance on `rho^2 = u^2 + |grad u|^2`, relative to `max u^2`.
const RHO_IDENTITY_TOL: f64 = 1e-10;

pub fn embed(u: &SupportField) -> Result<EmbeddedBody> {
    let grid = u.grid().clone();
    let jet = u.jet()?;
    let spectrum = spectrum_from_jet(&grid, u.values(), &jet);
    let (min_radius, node) = spectrum.min_eigenvalue();
    if min_radius <= 0.0 {
        return Err(Error::NotConvex { min_radius, node });
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut rho = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (x, et, ep) = grid.frame(i);
        let g = jet.grad[i];
        let v = u.values()[i];
        let p: Vec<f64> = (0..x.len()).map(|d| v * x[d] + g[0] * et[d] + g[1] * ep[d]).collect();
        rho.push(p.iter().map(|c| c * c).sum::<f64>().sqrt());
        points.push(p);
    }
    let body = EmbeddedBody { grid, points, rho };
    let scale = u.values().iter().fold(1.0f64, |m, v| m.max(v * v));
    let defect = body.rho_identity_defect(u, &jet);
    if defect > RHO_IDENTITY_TOL * scale {
        return Err(Error::InvariantViolation {
            t: 0.0,
            what: format!("rho^2 = u^2 + |grad u|^2 fails by {defect:.3e}"),
        });
    }
    Ok(body)
}

/// `V_{k+1}(u, ..., u) = int u sigma_k(W_u)`.
pub fn mixed_volume_k1(u: &SupportField, k: usize) -> Result<f64> {
    let s = radii_spectrum(u)?.sigma_k(k)?;
    let integrand: Vec<f64> = s.iter().zip(u.values()).map(|(s, v)| s * v).collect();
    u.grid().quadrature(&integrand)
}

/// `sigma_k(B, A, ..., A)` with one slot `B` and `k - 1` slots `A`, for
/// matrices stored as `[11, 12, 22]` in the pair convention.
fn polarized_sigma_one_slot(n: usize, k: usize, a: [f64; 3], b: [f64; 3], full: bool) -> f64 {
    if full {
        // n = 2
        match k {
            1 => b[0] + b[2],
            _ => {
                let tr_a = a[0] + a[2];
                let tr_b = b[0] + b[2];
                let tr_ab = a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2];
                0.5 * (tr_a * tr_b - tr_ab)
            }
        }
    } else {
        let (da, db) = sigma_k_pair_gradient(n, k, a[0], a[2]);
        (b[0] * da + (n - 1) as f64 * b[2] * db) / k as f64
    }
}

/// The three mixed volumes entering the Aleksandrov-Fenchel inequality.
#[derive(Debug, Clone, Copy)]
pub struct PolarizedVolumes {
    /// `V(v, u, ..., u)`
    pub v_u: f64,
    /// `V(v, v, u, ..., u)`
    pub v_v: f64,
    /// `V(u, ..., u)`
    pub u_u: f64,
}

impl PolarizedVolumes {
    /// `V(v,u..)^2 - V(v,v,u..) V(u..)`, scaled by `V(v,u..)^2 + |V(v,v,u..) V(u..)|`.
    pub fn af_gap(&self) -> f64 {
        let lhs = self.v_u * self.v_u;
        let rhs = self.v_v * self.u_u;
        let scale = lhs + rhs.abs();
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs) / scale
        }
    }
}

pub fn polarized_mixed_volume(v: &SupportField, u: &SupportField, k: usize) -> Result<PolarizedVolumes> {
    let grid = u.grid();
    if !Arc::ptr_eq(grid, v.grid()) {
        grid.check_len(v.len())?;
    }
    let n = grid.n_dim();
    if k == 0 || k > n {
        return Err(Error::DegreeOutOfRange { k, n });
    }
    let full = grid.variant() == GridVariant::FullS2;
    let ju = u.jet()?;
    let jv = v.jet()?;
    let spectrum = spectrum_from_jet(grid, u.values(), &ju);
    if let Some(node) = spectrum.first_outside_garding_cone(k) {
        return Err(Error::OutsideGardingCone { k, node });
    }
    let wu = radii_matrix(u.values(), &ju);
    let wv = radii_matrix(v.values(), &jv);
    let sk = spectrum.sigma_k(k)?;

    let mut i_vu = Vec::with_capacity(grid.len());
    let mut i_vv = Vec::with_capacity(grid.len());
    let mut i_uu = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (vi, ui) = (v.values()[i], u.values()[i]);
        i_vu.push(vi * sk[i]);
        i_uu.push(ui * sk[i]);
        i_vv.push(vi * polarized_sigma_one_slot(n, k, wu[i], wv[i], full));
    }
    Ok(PolarizedVolumes {
        v_u: grid.quadrature(&i_vu)?,
        v_v: grid.quadrature(&i_vv)?,
        u_u: grid.quadrature(&i_uu)?,
    })
}

/// Relative defect of `int u sigma_k = (k+1)/(n-k) int sigma_{k+1}`.
pub fn minkowski_formula_check(u: &SupportField, k: usize) -> Result<f64> {
    let n = u.grid().n_dim();
    if k == 0 || k >= n {
        return Err(Error::DegreeOutOfRange { k, n });
    }
    let spectrum = radii_spectrum(u)?;
    let sk = spectrum.sigma_k(k)?;
    let sk1 = spectrum.sigma_k(k + 1)?;
    let lhs_integrand: Vec<f64> = sk.iter().zip(u.values()).map(|(s, v)| s * v).collect();
    let lhs = u.grid().quadrature(&lhs_integrand)?;
    let rhs = (k + 1) as f64 / (n - k) as f64 * u.grid().quadrature(&sk1)?;
    Ok((lhs - rhs).abs() / lhs.abs())
}
