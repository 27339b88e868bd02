//! Gauss rules for the latitude direction.
//!
//! The measure on the sphere restricted to zonal functions is
//! `|S^{n-1}| (1 - x^2)^{(n-2)/2} dx` with `x = cos(theta)`, so the latitude
//! rule is Gauss-Gegenbauer with parameter `lambda = (n - 2) / 2`; for `n = 2`
//! this is plain Gauss-Legendre.

use nalgebra::DMatrix;

/// Surface area `|S^n|` of the unit `n`-sphere.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    // |S^0| = 2, |S^1| = 2 pi, |S^n| = 2 pi / (n - 1) |S^{n-2}|
    let mut even = 2.0;
    let mut odd = 2.0 * PI;
    let mut m = if n.is_multiple_of(2) { 0 } else { 1 };
    while m < n {
        m += 2;
        if m % 2 == 0 {
            even *= 2.0 * PI / (m as f64 - 1.0);
        } else {
            odd *= 2.0 * PI / (m as f64 - 1.0);
        }
    }
    if n.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// Off-diagonal recurrence coefficient `b_j` (j >= 1) of the orthonormal
/// polynomials for the weight `(1 - x^2)^lambda` on (-1, 1).
fn recurrence_b(j: usize, lambda: f64) -> f64 {
    let mu = lambda + 0.5;
    let j = j as f64;
    (j * (j + 2.0 * mu - 1.0) / (4.0 * (j + mu) * (j + mu - 1.0))).sqrt()
}

/// Evaluates the orthonormal polynomials `p_0..p_{n-1}` at `x`; returns
/// `(p_n(x), p_n'(x), sum_{j<n} p_j(x)^2)`.
fn orthonormal_eval(n: usize, x: f64, lambda: f64, mass: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = 1.0 / mass.sqrt();
    let mut dp = 0.0;
    let mut christoffel = 0.0;
    let mut b_prev = 0.0;
    for j in 0..n {
        christoffel += p * p;
        let b_next = recurrence_b(j + 1, lambda);
        let p_next = (x * p - b_prev * p_prev) / b_next;
        let dp_next = (p + x * dp - b_prev * dp_prev) / b_next;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
        b_prev = b_next;
    }
    (p, dp, christoffel)
}

/// Gauss-Gegenbauer nodes and weights for `(1 - x^2)^lambda`, scaled so the
/// weights sum to `mass`. Nodes are returned in descending `x` (ascending
/// polar angle).
pub fn gauss_gegenbauer(n: usize, lambda: f64, mass: f64) -> (Vec<f64>, Vec<f64>) {
    // Golub-Welsch for starting values, then Newton on p_n.
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for j in 1..n {
        let b = recurrence_b(j, lambda);
        jacobi[(j, j - 1)] = b;
        jacobi[(j - 1, j)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp, _) = orthonormal_eval(n, *x, lambda, mass);
            if dp != 0.0 {
                *x -= p / dp;
            }
        }
        let (_, _, c) = orthonormal_eval(n, *x, lambda, mass);
        weights.push(1.0 / c);
    }
    // enforce exact antisymmetry of the node set
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[i] - nodes[n - 1 - i]);
        nodes[i] = m;
        nodes[n - 1 - i] = -m;
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn areas() {
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_gegenbauer(12, 0.0, 2.0);
        for deg in 0..24 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "deg {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn chebyshev_second_kind_rule() {
        // lambda = 1/2: integral of sqrt(1 - x^2) x^2 over (-1, 1) = pi / 8
        let (x, w) = gauss_gegenbauer(20, 0.5, PI / 2.0);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((q - PI / 8.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn nodes_descend_and_are_symmetric() {
        let (x, _) = gauss_gegenbauer(9, 1.0, 1.0);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
        for i in 0..9 {
            assert_eq!(x[i], -x[8 - i]);
        }
    }
}
