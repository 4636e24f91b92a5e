//! Dyadic partition of unity on the joint spectrum, block projectors and
//! low-pass operators, Besov and Sobolev norms, frequency-localized test
//! profiles and the Bernstein homothety check.
//!
//! The base bump chi is an exp-glue plateau with chi = 1 on {|tau| <= 1} and
//! support in {|tau| <= 3}; the ring profile is the telescoping difference
//! R*(tau) = chi(tau/4) - chi(tau), supported in {1 <= |tau| <= 12} with
//! R* = 1 on {3 <= |tau| <= 4}. Blocks scale by 4 (frequency reading 2^j):
//! block j multiplies the profile by R*((2m+d) 4^{-j} lambda). Blocks with
//! |p - q| >= 2 have exactly disjoint supports.

use crate::error::{Error, Result};
use crate::io;
use crate::quad::pow2i;
use crate::report::VerificationReport;
use crate::spectral::{
    inverse_transform, joint_eigenvalue, window_for_eigen_range, InverseOpts, RadialProfile,
    RadialWindow,
};
use num_complex::Complex64;
use std::path::Path;
use std::time::Instant;

/// Dyadic partition of unity on the spectral parameter tau = (2m+d) lambda.
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    /// Steepness of the exp-glue transition (1 is the standard glue).
    pub smoothness: u32,
    pub j_min: i32,
    pub j_max: i32,
}

/// chi plateau edges: chi = 1 on |tau| <= CHI_ONE, chi = 0 on |tau| >= CHI_ZERO.
pub const CHI_ONE: f64 = 1.0;
pub const CHI_ZERO: f64 = 3.0;

fn glue(x: f64, kappa: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-kappa / x).exp()
    }
}

impl DyadicPartition {
    /// Smoothed plateau: exactly 1 for |tau| <= 1, exactly 0 for |tau| >= 3.
    pub fn chi(&self, tau: f64) -> f64 {
        let x = (CHI_ZERO - tau.abs()) / (CHI_ZERO - CHI_ONE);
        let k = self.smoothness as f64;
        let a = glue(x, k);
        if a == 0.0 {
            return 0.0;
        }
        let b = glue(1.0 - x, k);
        a / (a + b)
    }

    /// Ring profile R*(tau) = chi(tau/4) - chi(tau), supported in
    /// {1 <= |tau| <= 12}, identically 1 on {3 <= |tau| <= 4}.
    pub fn rstar(&self, tau: f64) -> f64 {
        self.chi(tau / 4.0) - self.chi(tau)
    }

    /// Low-pass profile (the bump itself).
    pub fn rtilde(&self, tau: f64) -> f64 {
        self.chi(tau)
    }

    /// Block symbol of Delta_j at mode (m, lambda).
    pub fn block_symbol(&self, d: usize, j: i32, m: usize, lambda: f64) -> f64 {
        self.rstar((2 * m + d) as f64 * pow2i(-2 * j) * lambda)
    }

    /// Low-pass symbol of S_j at mode (m, lambda).
    pub fn low_pass_symbol(&self, d: usize, j: i32, m: usize, lambda: f64) -> f64 {
        self.rtilde((2 * m + d) as f64 * pow2i(-2 * j) * lambda)
    }

    /// Audit export: rows `tau,chi,rstar` over a log-spaced grid.
    pub fn to_csv(&self, points: usize) -> String {
        let mut out = String::from("tau,chi,rstar\n");
        for i in 0..points {
            let t = i as f64 / (points - 1) as f64;
            let tau = 1e-3 * (1e7_f64).powf(t);
            out.push_str(&format!("{},{},{}\n", tau, self.chi(tau), self.rstar(tau)));
        }
        out
    }

    pub fn write_csv(&self, path: &Path, points: usize) -> Result<()> {
        io::write_atomic(path, &self.to_csv(points))
    }
}

/// Build and validate a partition: checks the telescoping identities to
/// 1e-12 on a log-spaced grid and the value range [0, 1].
pub fn build_partition(smoothness: u32, j_min: i32, j_max: i32) -> Result<DyadicPartition> {
    if smoothness == 0 || j_max < j_min {
        return Err(Error::InvalidParameter(
            "need smoothness >= 1 and j_max >= j_min".into(),
        ));
    }
    let part = DyadicPartition {
        smoothness,
        j_min,
        j_max,
    };
    let residual = partition_residual(&part, 2000);
    if residual > 1e-12 {
        return Err(Error::PartitionResidual(residual));
    }
    Ok(part)
}

/// Max over a log grid of the two partition-of-unity residuals
/// |1 - chi(tau) - sum_{j>=0} R*(4^-j tau)| and |1 - sum_j R*(4^-j tau)|.
pub fn partition_residual(part: &DyadicPartition, points: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        let tau = 1e-6 * (1e12_f64).powf(t);
        // R*(4^-j tau) is supported where 4^-j tau lies in [1, 12]
        let j_center = (tau.log2() / 2.0).round() as i32;
        // low-pass + rings over j >= 0
        let mut acc = part.chi(tau);
        for j in 0..=(j_center + 3).max(0) {
            acc += part.rstar(pow2i(-2 * j) * tau);
        }
        worst = worst.max((1.0 - acc).abs());
        // homogeneous sum over all j covering the support
        let mut acc2 = 0.0;
        for j in (j_center - 3)..=(j_center + 3) {
            acc2 += part.rstar(pow2i(-2 * j) * tau);
        }
        worst = worst.max((1.0 - acc2).abs());
        let c = part.chi(tau);
        if !(0.0..=1.0).contains(&c) {
            worst = worst.max(1.0);
        }
    }
    worst
}

/// Littlewood-Paley block Delta_j at profile level.
pub fn project_block(p: &RadialProfile, j: i32, part: &DyadicPartition) -> Result<RadialProfile> {
    let d = p.grid.d;
    p.multiplier(|m, lam| part.block_symbol(d, j, m, lam))
}

/// Low-pass S_j at profile level.
pub fn low_pass(p: &RadialProfile, j: i32, part: &DyadicPartition) -> Result<RadialProfile> {
    let d = p.grid.d;
    p.multiplier(|m, lam| part.low_pass_symbol(d, j, m, lam))
}

/// Besov integrability/regularity parameters.
#[derive(Debug, Clone, Copy)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        let valid = |e: f64| e >= 1.0 || (e.is_infinite() && e > 0.0);
        if !valid(p) || !valid(r) {
            return Err(Error::InvalidParameter(format!(
                "Besov exponents need p, r in [1, inf], got ({p}, {r})"
            )));
        }
        Ok(BesovParams { s, p, r })
    }
}

/// L^p norm of a profile through physical space (Plancherel fast path at
/// p = 2). The window defaults to the profile's spectral extent.
pub fn profile_lp_norm(p: &RadialProfile, lp: f64, window: Option<RadialWindow>) -> Result<f64> {
    if lp == 2.0 {
        return Ok(p.plancherel_norm());
    }
    if p.eigen_extent().is_none() {
        return Ok(0.0);
    }
    let f = inverse_transform(
        p,
        InverseOpts {
            window,
            tail_tol: Some(1.0),
        },
    )?;
    f.lp_norm(lp)
}

/// Homogeneous Besov norm: ell^r over blocks of 2^{qs} ||Delta_q u||_{L^p}.
///
/// Blocks outside [j_min, j_max] must contribute less than 0.1% of the
/// total (checked on the two blocks beyond each end).
pub fn besov_norm(
    p: &RadialProfile,
    params: BesovParams,
    part: &DyadicPartition,
) -> Result<f64> {
    let block_norm = |q: i32| -> Result<f64> {
        let block = project_block(p, q, part)?;
        if block.eigen_extent().is_none() {
            return Ok(0.0);
        }
        let window = block.eigen_extent().map(|(a, b, l)| window_for_eigen_range(a, b, l));
        profile_lp_norm(&block, params.p, window)
    };
    let mut terms = Vec::new();
    for q in part.j_min..=part.j_max {
        let n = block_norm(q)?;
        terms.push((q, n));
    }
    let accumulate = |vals: &[f64]| -> f64 {
        if params.r.is_infinite() {
            vals.iter().fold(0.0, |a, &b| a.max(b))
        } else {
            vals.iter()
                .map(|v| v.powf(params.r))
                .sum::<f64>()
                .powf(1.0 / params.r)
        }
    };
    let weighted: Vec<f64> = terms
        .iter()
        .map(|&(q, n)| 2f64.powf(q as f64 * params.s) * n)
        .collect();
    let total = accumulate(&weighted);
    // out-of-range contribution check
    let mut outside = 0.0f64;
    for q in [part.j_min - 2, part.j_min - 1, part.j_max + 1, part.j_max + 2] {
        let n = block_norm(q)?;
        outside = outside.max(2f64.powf(q as f64 * params.s) * n);
    }
    if total > 0.0 && outside > 1e-3 * total {
        return Err(Error::TailAboveTolerance {
            estimate: outside / total,
            tol: 1e-3,
        });
    }
    Ok(total)
}

/// Homogeneous Sobolev norm ||(-Lap)^{s/2} u||_{L^p} through the spectral
/// multiplier (4 |lambda| (2m+d))^{s/2}.
pub fn sobolev_norm(p: &RadialProfile, s: f64, lp: f64) -> Result<f64> {
    let d = p.grid.d;
    if s < 0.0 {
        // negative powers blow up where the profile touches lambda ~ 0
        if let Some((mu_min, _, _)) = p.eigen_extent() {
            let floor = 16.0 * p.grid.lambda_min() * d as f64;
            if mu_min <= floor {
                return Err(Error::InvalidParameter(format!(
                    "profile supported down to mu = {mu_min:.3e}: negative power {s} is ill-conditioned near lambda = 0"
                )));
            }
        }
    }
    let lifted = p.multiplier(|m, lam| joint_eigenvalue(d, m, lam).powf(s / 2.0))?;
    let window = lifted
        .eigen_extent()
        .map(|(a, b, l)| window_for_eigen_range(a, b, l));
    profile_lp_norm(&lifted, lp, window)
}

/// Frequency-localized profile: R_m(lambda) = shape((2m+d) 4^{-j} lambda)
/// with shape supported in the ring sqrt(r1) <= |tau| <= sqrt(r2), so the
/// induced joint eigenvalues lie in 4^{j+1} [sqrt(r1), sqrt(r2)].
pub fn make_localized(
    grid: &std::sync::Arc<crate::spectral::SpectralGrid>,
    j: i32,
    ring: (f64, f64),
    shape: impl Fn(f64) -> f64,
) -> Result<RadialProfile> {
    let (r1, r2) = ring;
    if !(0.0 < r1 && r1 < r2) {
        return Err(Error::InvalidParameter("need 0 < r1 < r2".into()));
    }
    let (lo, hi) = (r1.sqrt(), r2.sqrt());
    // the shape must vanish off the ring
    for k in 0..200 {
        let t = k as f64 / 199.0;
        for tau in [lo * (0.2 + 0.78 * t), hi * (1.01 + 4.0 * t), -hi * (1.01 + 4.0 * t)] {
            if tau.abs() < lo * 0.99 || tau.abs() > hi * 1.001 {
                if shape(tau) != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "shape support violates the ring at tau = {tau}"
                    )));
                }
            }
        }
    }
    let d = grid.d;
    Ok(RadialProfile::from_fn(grid, |m, lam| {
        let tau = (2 * m + d) as f64 * pow2i(-2 * j) * lam;
        if tau.abs() < lo || tau.abs() > hi {
            Complex64::ZERO
        } else {
            Complex64::new(shape(tau), 0.0)
        }
    }))
}

/// Bernstein homothety check: for frequency-localized families replicated
/// across blocks by exact dilation, the ratio
/// ||(-Lap)^{rho/2} u||_p / (2^{j rho} ||u||_p) must be j-stable.
///
/// `family` holds shapes localized at the reference block j = 0; each is
/// swept over `js` by profile dilation. Passes when the per-shape ratio
/// spread (max/min over j) stays within `slack` for every shape.
pub fn bernstein_check(
    family: &[(String, RadialProfile)],
    js: &[i32],
    rho: f64,
    lp: f64,
    slack: f64,
) -> Result<VerificationReport> {
    let t0 = Instant::now();
    let mut report = VerificationReport::new("bernstein")
        .param("rho", rho)
        .param("p", if lp.is_infinite() { "inf".to_string() } else { lp.to_string() });
    let mut worst_spread: f64 = 0.0;
    let mut ratio_lo = f64::INFINITY;
    let mut ratio_hi: f64 = 0.0;
    for (name, shape) in family {
        let mut per_j = Vec::new();
        for &j in js {
            let u = shape.dilate(j)?;
            let d = u.grid.d;
            let window = u
                .eigen_extent()
                .map(|(a, b, l)| window_for_eigen_range(a, b, l));
            let base = profile_lp_norm(&u, lp, window)?;
            let lifted = u.multiplier(|m, lam| joint_eigenvalue(d, m, lam).powf(rho / 2.0))?;
            let lifted_window = lifted
                .eigen_extent()
                .map(|(a, b, l)| window_for_eigen_range(a, b, l));
            let high = profile_lp_norm(&lifted, lp, lifted_window)?;
            if base <= 0.0 {
                return Err(Error::DegenerateFit(format!("shape {name} vanished")));
            }
            let ratio = high / (2f64.powf(j as f64 * rho) * base);
            per_j.push(ratio);
            ratio_lo = ratio_lo.min(ratio);
            ratio_hi = ratio_hi.max(ratio);
        }
        let hi = per_j.iter().fold(0.0f64, |a, &b| a.max(b));
        let lo = per_j.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        worst_spread = worst_spread.max(hi / lo);
    }
    report.measure("max_spread_over_j", worst_spread);
    report.measure("ratio_min", ratio_lo);
    report.measure("ratio_max", ratio_hi);
    report.tol = slack;
    report.pass = worst_spread.is_finite() && worst_spread <= slack;
    report.runtime_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
