//! Discretizations of the unit sphere.
//!
//! Two grids are provided:
//!
//! * [`GridVariant::FullS2`]: Gauss-Legendre latitudes (in `cos theta`) times a
//!   uniform longitude ring on `S^2`. Longitude derivatives are spectral,
//!   latitude derivatives use 9-point stencils along the meridian great
//!   circle, wrapping over the poles onto the antipodal meridian.
//! * [`GridVariant::Axisym`]: zonal functions on `S^n`, `2 <= n <= 8`, sampled
//!   at Gauss-Gegenbauer latitudes whose weights carry the
//!   `|S^{n-1}| sin^{n-1}(theta)` factor.
//!
//! Node order is latitude-major: node `i * n_lon + j` sits at latitude `i`
//! (from the north pole) and longitude `j`. Axisymmetric grids have
//! `n_lon = 1`.

mod fourier;
pub mod quadrature;
pub mod stencil;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use fourier::{RingFft, RingWork};
pub use quadrature::sphere_area;
use stencil::{meridian_stencils, StencilEntry};

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_AXISYM_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVariant {
    FullS2,
    Axisym,
}

impl fmt::Display for GridVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridVariant::FullS2 => f.write_str("full_s2"),
            GridVariant::Axisym => f.write_str("axisym"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub n_lat: usize,
    /// Ignored for axisymmetric grids.
    #[serde(default = "one")]
    pub n_lon: usize,
}

fn one() -> usize {
    1
}

impl Resolution {
    pub fn full(n_lat: usize, n_lon: usize) -> Self {
        Self { n_lat, n_lon }
    }

    pub fn axisym(n_lat: usize) -> Self {
        Self { n_lat, n_lon: 1 }
    }
}

/// First and second covariant derivatives per node, in the orthonormal frame
/// `(e_theta, e_phi)`.
///
/// `hess[i] = [H11, H12, H22]`. On axisymmetric grids `H12 = 0`, `H11 = u''`
/// and `H22 = cot(theta) u'` stands for all `n - 1` tangential directions.
#[derive(Debug, Clone)]
pub struct Jet {
    pub grad: Vec<[f64; 2]>,
    pub hess: Vec<[f64; 3]>,
}

impl Jet {
    pub fn grad_norm_sq(&self, node: usize) -> f64 {
        let g = self.grad[node];
        g[0] * g[0] + g[1] * g[1]
    }
}

pub struct SphereGrid {
    variant: GridVariant,
    n_dim: usize,
    n_lat: usize,
    n_lon: usize,
    theta: Vec<f64>,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
    antipode: Vec<usize>,
    stencils: Vec<Vec<StencilEntry>>,
    ring_cut: Vec<usize>,
    ring_fft: Option<RingFft>,
    area: f64,
}

impl fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereGrid")
            .field("variant", &self.variant)
            .field("n_dim", &self.n_dim)
            .field("n_lat", &self.n_lat)
            .field("n_lon", &self.n_lon)
            .finish()
    }
}

/// Builds a grid; see [`SphereGrid::build`].
pub fn build_grid(variant: GridVariant, n_dim: usize, resolution: Resolution) -> Result<Arc<SphereGrid>> {
    SphereGrid::build(variant, n_dim, resolution)
}

impl SphereGrid {
    pub fn build(variant: GridVariant, n_dim: usize, resolution: Resolution) -> Result<Arc<SphereGrid>> {
        let n_lat = resolution.n_lat;
        if n_lat < MIN_RESOLUTION {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_RESOLUTION} latitudes, got {n_lat}"
            )));
        }
        let n_lon = match variant {
            GridVariant::FullS2 => {
                if n_dim != 2 {
                    return Err(Error::InvalidGrid(format!(
                        "full grids live on S^2, got n_dim = {n_dim}"
                    )));
                }
                let n_lon = resolution.n_lon;
                if n_lon < MIN_RESOLUTION {
                    return Err(Error::InvalidGrid(format!(
                        "need at least {MIN_RESOLUTION} longitudes, got {n_lon}"
                    )));
                }
                if !n_lon.is_multiple_of(2) {
                    return Err(Error::InvalidGrid(format!(
                        "odd longitude count {n_lon}: antipodal map would not be grid-exact"
                    )));
                }
                n_lon
            }
            GridVariant::Axisym => {
                if !(2..=MAX_AXISYM_DIM).contains(&n_dim) {
                    return Err(Error::InvalidGrid(format!(
                        "axisymmetric grids support 2 <= n_dim <= {MAX_AXISYM_DIM}, got {n_dim}"
                    )));
                }
                if !n_lat.is_multiple_of(2) {
                    return Err(Error::InvalidGrid(format!(
                        "odd latitude count {n_lat}: the equator node would be its own antipode"
                    )));
                }
                1
            }
        };

        let area = sphere_area(n_dim);
        let lambda = (n_dim as f64 - 2.0) / 2.0;
        let lat_mass = match variant {
            GridVariant::FullS2 => 2.0,
            GridVariant::Axisym => area,
        };
        let (x, lat_weights) = quadrature::gauss_gegenbauer(n_lat, lambda, lat_mass);
        let theta: Vec<f64> = x.iter().map(|x| x.acos()).collect();
        let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let cos_theta = x;

        let dphi = 2.0 * std::f64::consts::PI / n_lon as f64;
        let phi: Vec<f64> = (0..n_lon).map(|j| j as f64 * dphi).collect();

        let mut weights = Vec::with_capacity(n_lat * n_lon);
        let mut antipode = Vec::with_capacity(n_lat * n_lon);
        for i in 0..n_lat {
            for j in 0..n_lon {
                weights.push(match variant {
                    GridVariant::FullS2 => lat_weights[i] * dphi,
                    GridVariant::Axisym => lat_weights[i],
                });
                let ia = n_lat - 1 - i;
                let ja = (j + n_lon / 2) % n_lon;
                antipode.push(ia * n_lon + ja);
            }
        }

        let stencils = meridian_stencils(&theta);
        let (ring_cut, ring_fft) = match variant {
            GridVariant::FullS2 => {
                let m_max = n_lon / 2;
                let cut = sin_theta
                    .iter()
                    .map(|s| ((m_max as f64 * s).floor() as usize).clamp(2, m_max))
                    .collect();
                (cut, Some(RingFft::new(n_lon)))
            }
            GridVariant::Axisym => (vec![0; n_lat], None),
        };

        Ok(Arc::new(SphereGrid {
            variant,
            n_dim,
            n_lat,
            n_lon,
            theta,
            sin_theta,
            cos_theta,
            phi,
            weights,
            antipode,
            stencils,
            ring_cut,
            ring_fft,
            area,
        }))
    }

    /// Copy of this grid with every quadrature weight multiplied by `factor`.
    /// Only used to check that verification catches corrupted weights.
    #[doc(hidden)]
    pub fn with_weight_scale(&self, factor: f64) -> Arc<SphereGrid> {
        Arc::new(SphereGrid {
            variant: self.variant,
            n_dim: self.n_dim,
            n_lat: self.n_lat,
            n_lon: self.n_lon,
            theta: self.theta.clone(),
            sin_theta: self.sin_theta.clone(),
            cos_theta: self.cos_theta.clone(),
            phi: self.phi.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            antipode: self.antipode.clone(),
            stencils: self.stencils.clone(),
            ring_cut: self.ring_cut.clone(),
            ring_fft: self.ring_fft.as_ref().map(|_| RingFft::new(self.n_lon)),
            area: self.area,
        })
    }

    pub fn variant(&self) -> GridVariant {
        self.variant
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn n_lat(&self) -> usize {
        self.n_lat
    }

    pub fn n_lon(&self) -> usize {
        self.n_lon
    }

    pub fn resolution(&self) -> Resolution {
        Resolution {
            n_lat: self.n_lat,
            n_lon: self.n_lon,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `|S^n|`.
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn antipode(&self) -> &[usize] {
        &self.antipode
    }

    pub fn lat_index(&self, node: usize) -> usize {
        node / self.n_lon
    }

    pub fn lon_index(&self, node: usize) -> usize {
        node % self.n_lon
    }

    pub fn theta(&self, node: usize) -> f64 {
        self.theta[self.lat_index(node)]
    }

    pub fn phi(&self, node: usize) -> f64 {
        self.phi[self.lon_index(node)]
    }

    /// `cos(theta)`, the component of the node direction along the polar axis.
    pub fn cos_polar(&self, node: usize) -> f64 {
        self.cos_theta[self.lat_index(node)]
    }

    pub fn sin_polar(&self, node: usize) -> f64 {
        self.sin_theta[self.lat_index(node)]
    }

    pub fn latitudes(&self) -> &[f64] {
        &self.theta
    }

    /// Unit direction of a node in `R^{n+1}`. Axisymmetric nodes are placed on
    /// the meridian through the first axis; the polar axis is the last one.
    pub fn direction(&self, node: usize) -> Vec<f64> {
        let (e_r, _, _) = self.frame(node);
        e_r
    }

    /// `(x, e_theta, e_phi)` at a node, each in `R^{n+1}`. On axisymmetric
    /// grids `e_phi` is the second axis (any tangential direction orthogonal to
    /// the meridian).
    pub fn frame(&self, node: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let i = self.lat_index(node);
        let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
        match self.variant {
            GridVariant::FullS2 => {
                let p = self.phi[self.lon_index(node)];
                let (sp, cp) = p.sin_cos();
                (vec![s * cp, s * sp, c], vec![c * cp, c * sp, -s], vec![-sp, cp, 0.0])
            }
            GridVariant::Axisym => {
                let d = self.n_dim + 1;
                let mut x = vec![0.0; d];
                let mut et = vec![0.0; d];
                let mut ep = vec![0.0; d];
                x[0] = s;
                x[d - 1] = c;
                et[0] = c;
                et[d - 1] = -s;
                ep[1] = 1.0;
                (x, et, ep)
            }
        }
    }

    /// Sum of `values[i] * weights[i]` by pairwise summation in node order.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node,
                context: "quadrature integrand",
            });
        }
        Ok(pairwise_dot(values, &self.weights))
    }

    /// Spherical average `quadrature(values) / |S^n|`.
    pub fn average(&self, values: &[f64]) -> Result<f64> {
        Ok(self.quadrature(values)? / self.area)
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::FieldSize {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// First and second covariant derivatives of a sampled function.
    pub fn jet(&self, values: &[f64]) -> Result<Jet> {
        self.check_len(values.len())?;
        let jet = match self.variant {
            GridVariant::FullS2 => self.jet_full(values),
            GridVariant::Axisym => self.jet_axisym(values),
        };
        for (node, (g, h)) in jet.grad.iter().zip(&jet.hess).enumerate() {
            if !(g.iter().all(|v| v.is_finite()) && h.iter().all(|v| v.is_finite())) {
                return Err(Error::NonFinite {
                    node,
                    context: "covariant derivatives",
                });
            }
        }
        Ok(jet)
    }

    fn jet_axisym(&self, u: &[f64]) -> Jet {
        let mut grad = Vec::with_capacity(self.n_lat);
        let mut hess = Vec::with_capacity(self.n_lat);
        for i in 0..self.n_lat {
            let (mut d1, mut d2) = (0.0, 0.0);
            for e in &self.stencils[i] {
                d1 += e.d1 * u[e.lat];
                d2 += e.d2 * u[e.lat];
            }
            let cot = self.cos_theta[i] / self.sin_theta[i];
            grad.push([d1, 0.0]);
            hess.push([d2, 0.0, cot * d1]);
        }
        Jet { grad, hess }
    }

    fn jet_full(&self, u: &[f64]) -> Jet {
        let (nl, nm) = (self.n_lat, self.n_lon);
        let half = nm / 2;
        let fft = self.ring_fft.as_ref().expect("full grid has ring transforms");
        let mut work = RingWork::default();
        let mut u_p = vec![0.0; u.len()];
        let mut u_pp = vec![0.0; u.len()];
        for i in 0..nl {
            let r = i * nm..(i + 1) * nm;
            let (a, b) = (&mut u_p[r.clone()], &mut u_pp[r.clone()]);
            fft.derivatives_with(&u[r], a, b, &mut work);
        }
        let mut grad = Vec::with_capacity(u.len());
        let mut hess = Vec::with_capacity(u.len());
        let (mut ut, mut utt, mut utp) = (vec![0.0; nm], vec![0.0; nm], vec![0.0; nm]);
        for i in 0..nl {
            let (s, c) = (self.sin_theta[i], self.cos_theta[i]);
            let cot = c / s;
            ut.fill(0.0);
            utt.fill(0.0);
            utp.fill(0.0);
            for e in &self.stencils[i] {
                let src = &u[e.lat * nm..(e.lat + 1) * nm];
                let src_p = &u_p[e.lat * nm..(e.lat + 1) * nm];
                // across a pole the meridian continues at phi + pi
                let shift = if e.flipped { half } else { 0 };
                for (lo, hi) in [(0, nm - shift), (nm - shift, nm)] {
                    let off = (lo + shift) % nm;
                    let n = hi - lo;
                    let (s, sp) = (&src[off..off + n], &src_p[off..off + n]);
                    for (((a, b), c), (&x, &xp)) in ut[lo..hi]
                        .iter_mut()
                        .zip(&mut utt[lo..hi])
                        .zip(&mut utp[lo..hi])
                        .zip(s.iter().zip(sp))
                    {
                        *a += e.d1 * x;
                        *b += e.d2 * x;
                        *c += e.d1 * xp;
                    }
                }
            }
            for j in 0..nm {
                let node = i * nm + j;
                let up = u_p[node];
                grad.push([ut[j], up / s]);
                hess.push([utt[j], (utp[j] - cot * up) / s, u_pp[node] / (s * s) + cot * ut[j]]);
            }
        }
        Jet { grad, hess }
    }

    /// Removes longitude wavenumbers that the ring at each latitude cannot
    /// resolve at the equatorial spacing. No-op on axisymmetric grids.
    pub fn polar_filter(&self, values: &mut [f64]) {
        if let Some(fft) = &self.ring_fft {
            let nm = self.n_lon;
            for (i, ring) in values.chunks_mut(nm).enumerate() {
                fft.low_pass(ring, self.ring_cut[i]);
            }
        }
    }
}

/// Pairwise (tree) summation of `a[i] * b[i]`; the order depends only on the
/// length, so results are bit-reproducible.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if a.len() <= BLOCK {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            s += x * y;
        }
        return s;
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// Legendre polynomial `P_l(x)`.
pub fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for m in 1..l {
        let m = m as f64;
        let p2 = ((2.0 * m + 1.0) * x * p1 - m * p0) / (m + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Samples of `u` (or `psi`) at the nodes of a grid.
#[derive(Debug, Clone)]
pub struct SupportField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl SupportField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node,
                context: "field sample",
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node direction.
    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.direction(i))).collect();
        Self::new(grid, values)
    }

    /// Samples a function of the polar angle.
    pub fn zonal(grid: Arc<SphereGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.theta(i))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<SphereGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn quadrature(&self) -> Result<f64> {
        self.grid.quadrature(&self.values)
    }

    pub fn jet(&self) -> Result<Jet> {
        self.grid.jet(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|v - w|` over nodes.
    pub fn sup_distance(&self, other: &SupportField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Antipodal average; the result is exactly even.
    pub fn symmetrize_even(&self) -> Self {
        let a = self.grid.antipode();
        let values = (0..self.values.len())
            .map(|i| 0.5 * (self.values[i] + self.values[a[i]]))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `max_i |v[i] - v[antipode[i]]|`.
    pub fn antipodal_defect(&self) -> f64 {
        let a = self.grid.antipode();
        (0..self.values.len())
            .map(|i| (self.values[i] - self.values[a[i]]).abs())
            .fold(0.0, f64::max)
    }
}

/// Quadrature of a field; see [`SphereGrid::quadrature`].
pub fn quadrature(field: &SupportField) -> Result<f64> {
    field.quadrature()
}

/// Covariant Hessian `[H11, H12, H22]` per node on a full `S^2` grid.
pub fn covariant_hessian_s2(field: &SupportField) -> Result<Vec<[f64; 3]>> {
    if field.grid().variant() != GridVariant::FullS2 {
        return Err(Error::InvalidGrid("covariant_hessian_s2 needs a full S^2 grid".into()));
    }
    Ok(field.jet()?.hess)
}

/// Radial and tangential eigenvalues `(u'' + u, cot(theta) u' + u)` of
/// `W_u` on an axisymmetric grid.
pub fn radii_eigen_axisym(field: &SupportField) -> Result<Vec<(f64, f64)>> {
    if field.grid().variant() != GridVariant::Axisym {
        return Err(Error::InvalidGrid(
            "radii_eigen_axisym needs an axisymmetric grid".into(),
        ));
    }
    let jet = field.jet()?;
    Ok(jet
        .hess
        .iter()
        .zip(field.values())
        .map(|(h, u)| (h[0] + u, h[2] + u))
        .collect())
}

/// Antipodal average of a field.
pub fn symmetrize_even(field: &SupportField) -> SupportField {
    field.symmetrize_even()
}
