//! Built-in test-function families: Gaussians with closed-form norms,
//! one-mode profiles, frequency-localized ring profiles and two-scale pairs.
//!
//! Families are deterministic; randomized shapes draw from an inline
//! SplitMix64 stream seeded by the caller.

use crate::error::Result;
use crate::littlewood_paley::make_localized;
use crate::quad::gamma;
use crate::spectral::{
    sphere_measure, RadialFunction, RadialProfile, RadialWindow, SpectralGrid,
};
use num_complex::Complex64;
use std::sync::Arc;

/// SplitMix64: deterministic 64-bit stream for reproducible test shapes.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// A Gaussian-type radial test function with its analytic L^2 norm:
/// f(z, s) = r^{2k} e^{-a r^2} e^{-b s^2} cos(omega s) (omega may be 0).
pub struct GaussianSpec {
    pub d: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub omega: f64,
}

impl GaussianSpec {
    /// ||f||_2 in closed form:
    /// omega_{2d-1} Gamma(2k+d) / (2 (2a)^{2k+d}) for the r factor,
    /// sqrt(pi/2b) (1 + e^{-omega^2/2b}) / 2-type factor in s.
    pub fn l2_norm(&self) -> f64 {
        let r_part = sphere_measure(self.d) * gamma(2.0 * self.k as f64 + self.d as f64)
            / (2.0 * (2.0 * self.a).powf(2.0 * self.k as f64 + self.d as f64));
        let base = (std::f64::consts::PI / (2.0 * self.b)).sqrt();
        let s_part = if self.omega == 0.0 {
            base
        } else {
            0.5 * base * (1.0 + (-self.omega * self.omega / (2.0 * self.b)).exp())
        };
        (r_part * s_part).sqrt()
    }

    pub fn window(&self) -> RadialWindow {
        let r_scale = 1.0 / self.a.sqrt();
        let s_scale = 1.0 / self.b.sqrt();
        RadialWindow::new(
            ((20.0 + 6.0 * self.k as f64) / self.a).sqrt(),
            (22.0 / self.b).sqrt(),
            0.2 * r_scale,
            (0.3 * s_scale).min(2.0 / (self.omega + 1.0 / s_scale)),
        )
    }

    pub fn function(&self) -> RadialFunction {
        let (k, a, b, omega) = (self.k as i32, self.a, self.b, self.omega);
        RadialFunction::from_closure(self.d, self.window(), move |r, s| {
            let radial = r.powi(2 * k) * (-a * r * r).exp();
            let vertical = (-b * s * s).exp() * if omega == 0.0 { 1.0 } else { (omega * s).cos() };
            Complex64::new(radial * vertical, 0.0)
        })
    }
}

/// The 10-member Gaussian family used by the Plancherel certification
/// (eight at d = 1, two at d = 2).
///
/// All members are s-band-pass (omega^2 / 4b >= 14): a plain Gaussian in s
/// carries spectral mass out to modes with (2m+d) lambda ~ O(1) as
/// lambda -> 0, which a finite Laguerre truncation cuts at the 1e-3 level.
/// Band-passing in s removes the lambda ~ 0 content, so the m-tail is
/// geometric and a 48-mode truncation is already below 1e-6.
pub fn plancherel_family() -> Vec<(String, GaussianSpec)> {
    let mut fam = Vec::new();
    for (i, (k, a, b, omega)) in [
        (0usize, 1.0, 0.16, 3.0),
        (0, 0.5, 0.16, 3.0),
        (0, 2.0, 0.2, 3.5),
        (0, 1.0, 0.12, 2.6),
        (1, 1.0, 0.16, 3.0),
        (1, 2.0, 0.2, 3.4),
        (0, 0.75, 0.25, 4.0),
        (1, 0.6, 0.25, 3.8),
    ]
    .into_iter()
    .enumerate()
    {
        fam.push((
            format!("gauss-d1-{i}"),
            GaussianSpec { d: 1, k, a, b, omega },
        ));
    }
    fam.push((
        "gauss-d2-0".to_string(),
        GaussianSpec { d: 2, k: 0, a: 1.0, b: 0.16, omega: 3.0 },
    ));
    fam.push((
        "gauss-d2-1".to_string(),
        GaussianSpec { d: 2, k: 1, a: 1.5, b: 0.2, omega: 3.5 },
    ));
    fam
}

/// Smooth even bump supported exactly in lo <= |tau| <= hi.
pub fn ring_bump(lo: f64, hi: f64) -> impl Fn(f64) -> f64 + Clone + Send + Sync {
    move |tau: f64| {
        let t = tau.abs();
        if t <= lo || t >= hi {
            0.0
        } else {
            let x = (t - lo) / (hi - lo);
            (-1.0 / (x * (1.0 - x))).exp()
        }
    }
}

/// One-mode profile: a Gaussian bump in lambda on a single Laguerre mode.
pub fn one_mode_profile(
    grid: &Arc<SpectralGrid>,
    m0: usize,
    lam0: f64,
    width: f64,
    amp: f64,
) -> RadialProfile {
    RadialProfile::from_fn(grid, |m, lam| {
        if m == m0 && lam > 0.0 {
            let dev = (lam - lam0) / width;
            if dev.abs() < 8.0 {
                return Complex64::new(amp * (-dev * dev).exp(), 0.0);
            }
        }
        Complex64::ZERO
    })
}

/// Canonical plateau-aligned ring for localized families: scaled tau in
/// [3, 4], inside the R* plateau of its block.
pub const PLATEAU_RING: (f64, f64) = (9.0, 16.0);

/// Frequency-localized profile at block j with a smooth in-ring bump,
/// a random cosine modulation along tau, and a random decay envelope in m.
pub fn localized_ring_profile(
    grid: &Arc<SpectralGrid>,
    j: i32,
    ring: (f64, f64),
    rng: &mut SplitMix64,
) -> Result<RadialProfile> {
    let (lo, hi) = (ring.0.sqrt(), ring.1.sqrt());
    let bump = ring_bump(lo, hi);
    let c1 = rng.uniform(-0.3, 0.3);
    let c2 = rng.uniform(-0.3, 0.3);
    let phase = rng.uniform(0.0, std::f64::consts::PI);
    let shape = move |tau: f64| {
        let b = bump(tau);
        if b == 0.0 {
            return 0.0;
        }
        let x = (tau.abs() - lo) / (hi - lo);
        b * (1.0
            + c1 * (std::f64::consts::PI * x + phase).cos()
            + c2 * (2.0 * std::f64::consts::PI * x).cos())
    };
    let base = make_localized(grid, j, ring, shape)?;
    let gamma_m = rng.uniform(0.4, 1.6);
    base.multiplier(|m, _| (1.0 + m as f64).powf(-gamma_m))
}

/// Deterministic family of localized shapes at the reference block.
pub fn localized_family(
    grid: &Arc<SpectralGrid>,
    ring: (f64, f64),
    count: usize,
    seed: u64,
) -> Result<Vec<(String, RadialProfile)>> {
    let mut rng = SplitMix64::new(seed);
    let mut fam = Vec::new();
    for i in 0..count {
        fam.push((
            format!("ring-{i}"),
            localized_ring_profile(grid, 0, ring, &mut rng)?,
        ));
    }
    Ok(fam)
}

/// Two-scale pair u + c (u o delta_{2^k}), amplitude matched so both
/// components carry the same Sobolev-scale weight.
pub fn two_scale_profile(base: &RadialProfile, k: i32, c: f64) -> Result<RadialProfile> {
    let shifted = base.dilate(k)?;
    let mut out = base.clone();
    out.values = &out.values + &shifted.values.mapv(|v| v * c);
    Ok(out)
}
