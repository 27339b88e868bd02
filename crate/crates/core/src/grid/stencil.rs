//! Finite-difference stencils along meridian great circles.

/// Number of points in every latitude stencil.
pub const STENCIL_POINTS: usize = 9;

/// Fornberg's algorithm: weights `w[d][j]` for the `d`-th derivative at `z`
/// from samples at `x[j]`, for `d <= max_deriv`.
pub fn fornberg_weights(z: f64, x: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// One stencil entry: latitude index, whether the sample lives on the
/// antipodal meridian (pole crossing), and first/second derivative weights.
#[derive(Debug, Clone, Copy)]
pub struct StencilEntry {
    pub lat: usize,
    pub flipped: bool,
    pub d1: f64,
    pub d2: f64,
}

/// Builds the meridian stencils for latitudes `theta` (ascending, inside
/// (0, pi)). The meridian through a node continues over either pole onto the
/// antipodal meridian, so the stencil never touches `theta = 0` or `pi`.
pub fn meridian_stencils(theta: &[f64]) -> Vec<Vec<StencilEntry>> {
    use std::f64::consts::PI;
    let n = theta.len() as isize;
    let half = (STENCIL_POINTS / 2) as isize;
    (0..n)
        .map(|i| {
            let mut entries = Vec::with_capacity(STENCIL_POINTS);
            let mut positions = Vec::with_capacity(STENCIL_POINTS);
            for e in (i - half)..=(i + half) {
                let (lat, flipped, s) = if e < 0 {
                    let l = (-1 - e) as usize;
                    (l, true, -theta[l])
                } else if e >= n {
                    let l = (2 * n - 1 - e) as usize;
                    (l, true, 2.0 * PI - theta[l])
                } else {
                    (e as usize, false, theta[e as usize])
                };
                positions.push(s);
                entries.push(StencilEntry {
                    lat,
                    flipped,
                    d1: 0.0,
                    d2: 0.0,
                });
            }
            let w = fornberg_weights(theta[i as usize], &positions, 2);
            for (j, e) in entries.iter_mut().enumerate() {
                e.d1 = w[1][j];
                e.d2 = w[2][j];
            }
            entries
        })
        .collect()
}
