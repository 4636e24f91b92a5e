//! Generalized Laguerre polynomials L_m^(p) and their Gaussian-weighted form.
//!
//! The production path is the three-term recurrence
//!   (m+1) L_{m+1}^(p)(t) = (2m+p+1-t) L_m^(p)(t) - (m+p) L_{m-1}^(p)(t),
//! seeded with L_0 = 1 and L_1^(p) = 1+p-t. The defining alternating sum
//! is kept only as a reference oracle: it cancels catastrophically for
//! large t. The weighted form carries e^{-y/2} through the recurrence so
//! that large (m, y) never overflow.

use crate::error::{Error, Result};
use crate::quad::binomial;

/// Degree cap for polynomial evaluation.
pub const M_CAP: usize = 512;
/// Order cap.
pub const P_CAP: usize = 64;

fn check_caps(m: usize, p: usize) -> Result<()> {
    if m > M_CAP || p > P_CAP {
        return Err(Error::CapsExceeded {
            m,
            p,
            m_cap: M_CAP,
            p_cap: P_CAP,
        });
    }
    Ok(())
}

/// L_m^(p)(t) by the three-term recurrence.
pub fn laguerre(m: usize, p: usize, t: f64) -> Result<f64> {
    check_caps(m, p)?;
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Laguerre argument must be >= 0, got {t}"
        )));
    }
    Ok(laguerre_unchecked(m, p as f64, t))
}

fn laguerre_unchecked(m: usize, p: f64, t: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + p - t;
    for k in 1..m {
        let kf = k as f64;
        let next = ((2.0 * kf + p + 1.0 - t) * cur - (kf + p) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// L_m^(p)(y) e^{-y/2}, evaluated with the recurrence carried in weighted form.
pub fn weighted_laguerre(m: usize, p: usize, y: f64) -> Result<f64> {
    check_caps(m, p)?;
    if y < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Laguerre argument must be >= 0, got {y}"
        )));
    }
    let mut col = [0.0; 2];
    weighted_laguerre_iter(p as f64, y, m, |k, v| {
        if k == m {
            col[0] = v;
        }
    });
    Ok(col[0])
}

/// Stream W_k(y) = L_k^(p)(y) e^{-y/2} for k = 0..=m_max into a callback.
///
/// This is the inner loop of every radial transform: one pass produces the
/// whole column of weighted Laguerre values at a quadrature node.
#[inline]
pub fn weighted_laguerre_iter(p: f64, y: f64, m_max: usize, mut sink: impl FnMut(usize, f64)) {
    let w = (-0.5 * y).exp();
    let mut prev = w;
    sink(0, prev);
    if m_max == 0 {
        return;
    }
    let mut cur = (1.0 + p - y) * w;
    sink(1, cur);
    for k in 1..m_max {
        let kf = k as f64;
        let next = ((2.0 * kf + p + 1.0 - y) * cur - (kf + p) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        sink(k + 1, cur);
    }
}

/// Fill `out[0..=m_max]` with the weighted Laguerre column at y.
pub fn weighted_laguerre_column(p: f64, y: f64, out: &mut [f64]) {
    let m_max = out.len() - 1;
    weighted_laguerre_iter(p, y, m_max, |k, v| out[k] = v);
}

/// Reference evaluation by the defining alternating sum
/// L_m^(p)(t) = sum_k (-1)^k C(m+p, m-k) t^k / k!.
///
/// Test oracle only: unstable for large t.
pub fn laguerre_reference_sum(m: usize, p: usize, t: f64) -> f64 {
    let mut acc = 0.0;
    let mut term_pow = 1.0; // t^k / k!
    for k in 0..=m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(m + p, m - k) * term_pow;
        term_pow *= t / (k as f64 + 1.0);
    }
    acc
}

/// Calibrated constants C_p with sup_y |L_m^(p)(y) e^{-y/2}| <= C_p (m+1)^p
/// for all m <= 512. Empirical sup over a dense grid, frozen with a x2
/// safety factor; see the calibration test below.
pub const GROWTH_CONSTANTS: [f64; 8] = [2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];

/// C_p of the weighted growth bound, for p <= 7.
pub fn growth_constant(p: usize) -> f64 {
    GROWTH_CONSTANTS[p.min(GROWTH_CONSTANTS.len() - 1)]
}

/// Empirical sup of |L_m^(p)(y) e^{-y/2}| / (m+1)^p over m <= m_cap and a
/// dense y-grid on [0, y_max]. Used to calibrate `GROWTH_CONSTANTS`.
pub fn empirical_growth_sup(p: usize, m_cap: usize, y_max: f64, samples: usize) -> f64 {
    let mut sup: f64 = 0.0;
    let mut col = vec![0.0; m_cap + 1];
    for i in 0..=samples {
        // denser sampling near 0 where the maxima sit
        let x = i as f64 / samples as f64;
        let y = y_max * x * x;
        weighted_laguerre_column(p as f64, y, &mut col);
        for (m, &v) in col.iter().enumerate() {
            let ratio = v.abs() / ((m + 1) as f64).powi(p as i32);
            if ratio > sup {
                sup = ratio;
            }
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_zero_is_one() {
        for p in [0, 1, 5] {
            for t in [0.0, 0.3, 17.0] {
                assert_eq!(laguerre(0, p, t).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn degree_one() {
        // L_1^(0)(t) = 1 - t, L_1^(d-1)(t) = d - t
        assert!((laguerre(1, 0, 0.7).unwrap() - 0.3).abs() < 1e-15);
        for d in [1usize, 2, 3] {
            let got = laguerre(1, d - 1, 2.5).unwrap();
            assert!((got - (d as f64 - 2.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn caps_rejected() {
        assert!(laguerre(M_CAP + 1, 0, 1.0).is_err());
        assert!(weighted_laguerre(1, P_CAP + 1, 1.0).is_err());
        assert!(laguerre(1, 0, -0.5).is_err());
    }

    #[test]
    fn weighted_at_zero_is_binomial() {
        for (m, p) in [(0usize, 0usize), (3, 2), (10, 4), (100, 1)] {
            let got = weighted_laguerre(m, p, 0.0).unwrap();
            assert!(
                (got - binomial(m + p, m)).abs() / binomial(m + p, m) < 1e-13,
                "m={m} p={p}"
            );
        }
    }

    #[test]
    fn weighted_simple_value() {
        // L_0 == 1, so the weighted value at y=2 is e^{-1}
        let got = weighted_laguerre(0, 0, 2.0).unwrap();
        assert!((got - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn weighted_never_overflows() {
        // plain polynomial value overflows here; the weighted carry must not
        let v = weighted_laguerre(512, 3, 900.0).unwrap();
        assert!(v.is_finite());
        assert!(v.abs() <= growth_constant(3) * 513f64.powi(3));
    }

    #[test]
    fn sign_changes_match_degree() {
        // L_m^(p) has exactly m zeros on (0, inf)
        for p in [0usize, 2] {
            for m in 1..=10usize {
                let n = 4000;
                let y_hi = 4.0 * m as f64 + 2.0 * p as f64 + 8.0;
                let mut changes = 0;
                let mut last = laguerre(m, p, 1e-9).unwrap();
                for i in 1..=n {
                    let y = y_hi * i as f64 / n as f64;
                    let v = laguerre(m, p, y).unwrap();
                    if v.signum() != last.signum() {
                        changes += 1;
                    }
                    last = v;
                }
                assert_eq!(changes, m, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn growth_constants_hold_with_safety_margin() {
        // Frozen C_p must sit between ~1.8x and ~2.2x the empirical sup,
        // and in particular dominate it.
        for p in 0..GROWTH_CONSTANTS.len() {
            let emp = empirical_growth_sup(p, 512, 1000.0, 400);
            let frozen = GROWTH_CONSTANTS[p];
            assert!(frozen >= 1.5 * emp, "p={p}: frozen {frozen} emp {emp}");
            assert!(frozen <= 3.0 * emp, "p={p}: frozen {frozen} emp {emp}");
        }
    }

    proptest! {
        // Recurrence agrees with the defining sum; the sum's own rounding
        // (proportional to the sum of absolute terms) is allowed for near
        // the polynomial's zeros.
        #[test]
        fn recurrence_matches_sum(m in 0usize..=20, p in 0usize..=8, t in 0.0f64..50.0) {
            let a = laguerre(m, p, t).unwrap();
            let b = laguerre_reference_sum(m, p, t);
            let mut abs_sum = 0.0;
            let mut term_pow = 1.0;
            for k in 0..=m {
                abs_sum += binomial(m + p, m - k) * term_pow;
                term_pow *= t / (k as f64 + 1.0);
            }
            let tol = 1e-10 * a.abs().max(b.abs()).max(1.0) + 1e-13 * abs_sum;
            prop_assert!((a - b).abs() < tol);
        }

        // Weighted form equals polynomial times weight in the stable regime.
        #[test]
        fn weighted_consistent(m in 0usize..=40, p in 0usize..=6, y in 0.0f64..60.0) {
            let w = weighted_laguerre(m, p, y).unwrap();
            let l = laguerre(m, p, y).unwrap() * (-0.5 * y).exp();
            let scale = w.abs().max(l.abs()).max(1e-6);
            prop_assert!((w - l).abs() / scale < 1e-9);
        }
    }
}
