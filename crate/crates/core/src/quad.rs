//! Quadrature rules: Gauss–Legendre nodes, panel composition, log-spaced grids.
//!
//! All higher-level integrals in this crate (radial, oscillatory-in-s, spectral
//! and t-grid) are assembled from the primitives here. Rules are deterministic:
//! the same parameters always produce bit-identical nodes and weights.

/// A one-dimensional quadrature rule: paired nodes and weights.
#[derive(Debug, Clone, Default)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate a scalar function with this rule.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the Legendre recurrence, seeded with the Chebyshev
/// approximation of the roots. Accurate to ~1 ulp for n up to several hundred.
pub fn gauss_legendre(n: usize) -> QuadRule {
    assert!(n >= 1, "Gauss-Legendre order must be >= 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess for the i-th root (descending).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and P'_n(x) by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadRule { nodes, weights }
}

/// Gauss–Legendre rule mapped onto [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> QuadRule {
    let base = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    QuadRule {
        nodes: base.nodes.iter().map(|&x| mid + half * x).collect(),
        weights: base.weights.iter().map(|&w| half * w).collect(),
    }
}

/// Composite rule: uniform panels over [a, b], Gauss–Legendre of `order` per panel.
pub fn panels_uniform(a: f64, b: f64, panels: usize, order: usize) -> QuadRule {
    let mut rule = QuadRule::default();
    let width = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let piece = gauss_legendre_on(order, lo, lo + width);
        rule.nodes.extend(piece.nodes);
        rule.weights.extend(piece.weights);
    }
    rule
}

/// Composite rule over [a, b] whose panel width does not exceed `max_width`.
pub fn panels_max_width(a: f64, b: f64, max_width: f64, order: usize) -> QuadRule {
    let count = (((b - a) / max_width).ceil() as usize).max(1);
    panels_uniform(a, b, count, order)
}

/// Base-2 integer power as f64, exact for the f64 exponent range.
pub fn pow2i(k: i32) -> f64 {
    f64::from_bits((((1023 + k) as u64) & 0x7ff) << 52)
}

/// Log-uniform grid `t_i = t0 * 2^(i/per_octave)` built so that scaling by
/// 4 = 2^2 is an exact index shift of `2 * per_octave` entries.
///
/// The fractional quarter/eighth powers of two are taken from a fixed table,
/// so `t[i + 2*per_octave] == 4.0 * t[i]` holds bit-exactly.
#[derive(Debug, Clone)]
pub struct LogGrid {
    pub nodes: Vec<f64>,
    /// Weight of the measure dt/t per node (trapezoid in log t).
    pub weights: Vec<f64>,
    pub per_octave: usize,
}

impl LogGrid {
    pub fn new(t_lo: f64, t_hi: f64, per_octave: usize) -> Self {
        assert!(t_lo > 0.0 && t_hi > t_lo && per_octave >= 1);
        // 2^(j/per_octave) for j in 0..per_octave, computed once.
        let fracs: Vec<f64> = (0..per_octave)
            .map(|j| (j as f64 / per_octave as f64).exp2())
            .collect();
        let n = ((t_hi / t_lo).log2() * per_octave as f64).ceil() as usize + 1;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let oct = (i / per_octave) as i32;
            let frac = fracs[i % per_octave];
            nodes.push(t_lo * pow2i(oct) * frac);
        }
        let dx = std::f64::consts::LN_2 / per_octave as f64;
        let mut weights = vec![dx; n];
        weights[0] = 0.5 * dx;
        weights[n - 1] = 0.5 * dx;
        LogGrid {
            nodes,
            weights,
            per_octave,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Binomial coefficient C(n, k) as f64.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// ln Γ(x) for x > 0 (Lanczos approximation, ~1e-13 relative).
pub fn ln_gamma(x: f64) -> f64 {
    // g = 7, n = 9 Lanczos coefficients.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Γ(x) for moderate positive x.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}
