//! Independent numerical references shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(νt) dt` by the trapezoid rule. The
/// integrand decays doubly exponentially, so the rule converges geometrically.
pub fn bessel_k_quad(nu: f64, x: f64) -> f64 {
    let h = 0.005;
    let mut sum = 0.5 * (-x).exp();
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let term = (-x * t.cosh() + nu * t).exp() * 0.5 + (-x * t.cosh() - nu * t).exp() * 0.5;
        sum += term;
        if term < sum * 1e-18 || k > 1_000_000 {
            break;
        }
        k += 1;
    }
    sum * h
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∫_a^b f` over geometric panels starting at `first`, each with an
/// `order`-point Gauss–Legendre rule; `[0, first]` is one extra panel.
pub fn integrate_graded(f: impl Fn(f64) -> f64, first: f64, b: f64, panels: usize, order: usize) -> f64 {
    let gl = gauss_legendre(order);
    let ratio = (b / first).powf(1.0 / panels as f64);
    let mut edges = vec![0.0, first];
    for k in 1..=panels {
        edges.push(first * ratio.powi(k as i32));
    }
    edges
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            gl.iter().map(|(x, wt)| wt * f(mid + half * x)).sum::<f64>() * half
        })
        .sum()
}

/// Inverse of a symmetric 2×2 matrix `[[a, b], [b, c]]` and its determinant.
fn inv2(s: [[f64; 2]; 2]) -> ([[f64; 2]; 2], f64) {
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    ([[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]], det)
}

/// Entropy and total mass of the 2-D multivariate Laplace law with covariance
/// `s`, from a polar tensor grid: trapezoid in angle, graded Gauss–Legendre
/// in the radial variable. The density is `K_0(√(2 xᵀΣ⁻¹x)) / (π √det Σ)`,
/// with `K_0` taken from [`bessel_k_quad`].
pub fn laplace2_entropy_quadrature(s: [[f64; 2]; 2]) -> (f64, f64) {
    let (inv, det) = inv2(s);
    let norm = PI * det.sqrt();
    // radial profile in u = √(2 g) r, shared by every angle
    let radial = |weight: &dyn Fn(f64) -> f64| integrate_graded(|u| weight(u), 1e-10, 60.0, 70, 16);
    let ent_u = radial(&|u: f64| {
        let f = bessel_k_quad(0.0, u) / norm;
        if f > 0.0 {
            -f * f.ln() * u
        } else {
            0.0
        }
    });
    let mass_u = radial(&|u: f64| bessel_k_quad(0.0, u) / norm * u);
    let n_phi = 256;
    let mut ang = 0.0;
    for k in 0..n_phi {
        let phi = 2.0 * PI * k as f64 / n_phi as f64;
        let (c, sn) = (phi.cos(), phi.sin());
        let g = inv[0][0] * c * c + 2.0 * inv[0][1] * c * sn + inv[1][1] * sn * sn;
        // r dr = u du / (2g)
        ang += 1.0 / (2.0 * g);
    }
    ang *= 2.0 * PI / n_phi as f64;
    (ang * ent_u, ang * mass_u)
}

/// Sample lag-free Pearson correlation.
pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    sab / (saa * sbb).sqrt()
}

/// Gaussian MI from a correlation coefficient.
pub fn gaussian_mi(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}
