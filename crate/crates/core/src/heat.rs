//! Heat semigroup: the multiplier e^{-t 4|lambda|(2m+d)}, the explicit heat
//! kernel series at t = 1, self-similar scaling to general t, truncation
//! bounds, an explicit-Euler PDE oracle, and disk caching of kernel tables.
//!
//! The kernel series is
//!   h(r, s) = kappa_d sum_m int e^{-i lambda s} e^{-4|lambda|(2m+d)}
//!             L_m^(d-1)(2|lambda| r^2) e^{-|lambda| r^2} |lambda|^d dlambda,
//! and h_t(x, y, s) = t^{-(d+1)} h(x/sqrt t, y/sqrt t, s/t).

use crate::error::{Error, Result};
use crate::group::{sublaplacian_fd, sublaplacian_stability_limit, SampledField};
use crate::io;
use crate::laguerre::{growth_constant, weighted_laguerre_iter};
use crate::quad::{gamma, QuadRule};
use crate::spectral::{joint_eigenvalue, plancherel_prefactor, RadialProfile};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Apply the heat semigroup e^{t Lap} to a profile, t > 0.
pub fn heat_apply(p: &RadialProfile, t: f64) -> Result<RadialProfile> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "heat time must be positive, got {t}"
        )));
    }
    let d = p.grid.d;
    p.multiplier(|m, lam| (-t * joint_eigenvalue(d, m, lam)).exp())
}

/// Pointwise upper bound on the mass neglected by truncating the kernel
/// series at m_max and the lambda integral to [lambda_min, lambda_max].
///
/// Uses |L_m^(d-1)(y) e^{-y/2}| <= C_{d-1} (m+1)^{d-1} with the calibrated
/// constant, and closed-form gamma-integral estimates per piece.
pub fn tail_bound(m_max: usize, lambda_max: f64, lambda_min: f64, t: f64, d: usize) -> f64 {
    let kappa = plancherel_prefactor(d);
    let c = growth_constant(d - 1);
    let df = d as f64;
    // m-tail: full lambda integral of each neglected mode
    let mut m_tail = 0.0;
    let mut m = m_max + 1;
    loop {
        let a = 4.0 * t * (2 * m + d) as f64;
        let term = (m as f64 + 1.0).powi(d as i32 - 1) * 2.0 * gamma(df + 1.0) / a.powi(d as i32 + 1);
        m_tail += term;
        if term < 1e-3 * m_tail / m as f64 || m > m_max + 2_000_000 {
            // remaining terms decay like m^{-(d+2)}; integral comparison
            m_tail += term * m as f64 / (df + 1.0);
            break;
        }
        m += 1;
    }
    // lambda > lambda_max: doubling blocks, kept modes
    let mut hi_tail = 0.0;
    if lambda_max.is_finite() {
        for m in 0..=m_max {
            let a = 4.0 * t * (2 * m + d) as f64;
            let mut block = lambda_max;
            let mut piece = 0.0;
            for _ in 0..64 {
                let upper = 2.0 * block;
                let decay = (-a * block).exp();
                if decay == 0.0 || a * block > 700.0 {
                    break;
                }
                piece += decay * upper.powi(d as i32) * block;
                block = upper;
            }
            hi_tail += (m as f64 + 1.0).powi(d as i32 - 1) * 2.0 * piece;
        }
    }
    // lambda < lambda_min: integrand bounded by lambda^d
    let mut lo_tail = 0.0;
    for m in 0..=m_max {
        lo_tail += (m as f64 + 1.0).powi(d as i32 - 1)
            * 2.0
            * lambda_min.powi(d as i32 + 1)
            / (df + 1.0);
    }
    kappa * c * (m_tail + hi_tail + lo_tail)
}

/// Tabulated heat kernel values h_t(r, s) with truncation metadata.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub d: usize,
    pub t: f64,
    pub r_nodes: Vec<f64>,
    pub s_nodes: Vec<f64>,
    pub values: Array2<f64>,
    pub m_max: usize,
    pub lambda_max: f64,
    pub tol: f64,
    pub tail_estimate: f64,
    pub imag_residue: f64,
}

impl KernelTable {
    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation inside the tabulated range.
    pub fn interp(&self, r: f64, s: f64) -> Result<f64> {
        let rn = &self.r_nodes;
        let sn = &self.s_nodes;
        if r < rn[0] || r > *rn.last().unwrap() || s < sn[0] || s > *sn.last().unwrap() {
            return Err(Error::OutOfRange(format!("(r, s) = ({r}, {s})")));
        }
        let i = match rn.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(rn.len() - 2),
            Err(i) => i.saturating_sub(1).min(rn.len() - 2),
        };
        let k = match sn.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(sn.len() - 2),
            Err(k) => k.saturating_sub(1).min(sn.len() - 2),
        };
        let fr = (r - rn[i]) / (rn[i + 1] - rn[i]);
        let fs = (s - sn[k]) / (sn[k + 1] - sn[k]);
        Ok(self.values[[i, k]] * (1.0 - fr) * (1.0 - fs)
            + self.values[[i + 1, k]] * fr * (1.0 - fs)
            + self.values[[i, k + 1]] * (1.0 - fr) * fs
            + self.values[[i + 1, k + 1]] * fr * fs)
    }

    /// Catmull-Rom bicubic interpolation; falls back to bilinear within one
    /// cell of the table edge. Needed where the forward transform integrates
    /// the table against oscillatory kernels: the piecewise-linear kinks of
    /// bilinear interpolation leak into high Laguerre modes.
    pub fn interp_cubic(&self, r: f64, s: f64) -> Result<f64> {
        let rn = &self.r_nodes;
        let sn = &self.s_nodes;
        if r < rn[0] || r > *rn.last().unwrap() || s < sn[0] || s > *sn.last().unwrap() {
            return Err(Error::OutOfRange(format!("(r, s) = ({r}, {s})")));
        }
        let find = |nodes: &[f64], x: f64| -> usize {
            match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                Ok(i) => i.min(nodes.len() - 2),
                Err(i) => i.saturating_sub(1).min(nodes.len() - 2),
            }
        };
        let i = find(rn, r);
        let k = find(sn, s);
        if i == 0 || i + 2 >= rn.len() || k == 0 || k + 2 >= sn.len() {
            return self.interp(r, s);
        }
        let catmull = |p: [f64; 4], t: f64| -> f64 {
            0.5 * ((2.0 * p[1])
                + (-p[0] + p[2]) * t
                + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
                + (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * t * t * t)
        };
        let tr = (r - rn[i]) / (rn[i + 1] - rn[i]);
        let ts = (s - sn[k]) / (sn[k + 1] - sn[k]);
        let mut col = [0.0; 4];
        for (row, c) in col.iter_mut().enumerate() {
            let ir = i + row - 1;
            *c = catmull(
                [
                    self.values[[ir, k - 1]],
                    self.values[[ir, k]],
                    self.values[[ir, k + 1]],
                    self.values[[ir, k + 2]],
                ],
                ts,
            );
        }
        Ok(catmull(col, tr))
    }

    /// CSV cache format: `# heatkernel v1 d=.. mmax=.. lambda_max=.. tol=..`
    /// followed by rows r,s,value over the tensor grid.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 128);
        out.push_str(&format!(
            "# heatkernel v1 d={} mmax={} lambda_max={} tol={} t={} tail={} imag={}\n",
            self.d, self.m_max, self.lambda_max, self.tol, self.t, self.tail_estimate,
            self.imag_residue
        ));
        for (i, &r) in self.r_nodes.iter().enumerate() {
            for (k, &s) in self.s_nodes.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", r, s, self.values[[i, k]]));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<KernelTable> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty kernel file".into()))?;
        if !header.starts_with("# heatkernel v1") {
            return Err(Error::Parse("not a v1 heatkernel file".into()));
        }
        let fields = io::header_fields(header);
        let d = io::parse_usize(io::header_get(&fields, "d")?)?;
        let m_max = io::parse_usize(io::header_get(&fields, "mmax")?)?;
        let lambda_max = io::parse_f64(io::header_get(&fields, "lambda_max")?)?;
        let tol = io::parse_f64(io::header_get(&fields, "tol")?)?;
        let t = io::parse_f64(io::header_get(&fields, "t")?)?;
        let tail = io::parse_f64(io::header_get(&fields, "tail")?)?;
        let imag = io::parse_f64(io::header_get(&fields, "imag")?)?;
        let mut r_nodes: Vec<f64> = Vec::new();
        let mut s_nodes: Vec<f64> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("bad kernel row `{line}`")));
            }
            let r = io::parse_f64(cols[0])?;
            let s = io::parse_f64(cols[1])?;
            if r_nodes.last() != Some(&r) && !r_nodes.contains(&r) {
                r_nodes.push(r);
            }
            if r_nodes.len() == 1 {
                s_nodes.push(s);
            }
            vals.push(io::parse_f64(cols[2])?);
        }
        let (nr, ns) = (r_nodes.len(), s_nodes.len());
        if nr * ns != vals.len() {
            return Err(Error::Parse("kernel table is not a tensor grid".into()));
        }
        Ok(KernelTable {
            d,
            t,
            r_nodes,
            s_nodes,
            values: Array2::from_shape_vec((nr, ns), vals)
                .map_err(|_| Error::Parse("kernel shape".into()))?,
            m_max,
            lambda_max,
            tol,
            tail_estimate: tail,
            imag_residue: imag,
        })
    }
}

/// Pick series truncation (m_max, lambda_max) meeting an absolute pointwise
/// tolerance, then evaluate the kernel on the tensor grid r x s at time t.
pub fn kernel_eval(r_points: &[f64], s_points: &[f64], t: f64, tol: f64) -> Result<KernelTable> {
    kernel_eval_d(1, r_points, s_points, t, tol)
}

pub fn kernel_eval_d(
    d: usize,
    r_points: &[f64],
    s_points: &[f64],
    t: f64,
    tol: f64,
) -> Result<KernelTable> {
    if !(t > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter("need t > 0 and tol > 0".into()));
    }
    if r_points.windows(2).any(|w| w[0] >= w[1]) || s_points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "kernel sample points must be strictly ascending".into(),
        ));
    }
    let lambda_min = 1e-9;
    // grow the truncation until each tail piece clears a third of `tol`
    let mut m_max = 256usize;
    let mut lambda_max = (1.0 / tol).ln().max(4.0) / (4.0 * t * d as f64) + 2.0;
    for _ in 0..12 {
        if tail_bound(m_max, f64::INFINITY, 0.0, t, d) < tol / 3.0 {
            break;
        }
        m_max *= 2;
    }
    if m_max > 65536 {
        return Err(Error::TailAboveTolerance {
            estimate: tail_bound(m_max, lambda_max, lambda_min, t, d),
            tol,
        });
    }
    for _ in 0..12 {
        let full = tail_bound(m_max, lambda_max, lambda_min, t, d);
        if full < tol {
            break;
        }
        lambda_max *= 1.5;
    }
    let tail = tail_bound(m_max, lambda_max, lambda_min, t, d);
    if tail > tol {
        return Err(Error::TailAboveTolerance { estimate: tail, tol });
    }

    // lambda rule: geometric octaves, panel width capped by the oscillation
    // scale at the largest |s| requested
    let s_abs_max = s_points
        .iter()
        .map(|s| s.abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut rule = QuadRule::default();
    let mut lo = lambda_min;
    while lo < lambda_max {
        let hi = (2.0 * lo).min(lambda_max);
        let piece = crate::quad::panels_max_width(lo, hi, (5.5 / s_abs_max).min(hi - lo), 10);
        rule.nodes.extend(piece.nodes);
        rule.weights.extend(piece.weights);
        lo = hi;
    }

    // A[n][i] = sum_m e^{-4 t lambda (2m+d)} WL_m(2 lambda r_i^2)
    let a_mat: Vec<Vec<f64>> = rule
        .nodes
        .par_iter()
        .map(|&lam| {
            let decay = (-4.0 * t * lam).exp();
            let mode0 = decay.powi(d as i32);
            let step = decay * decay; // e^{-8 t lambda} per mode increment
            let mut out = vec![0.0; r_points.len()];
            for (i, &r) in r_points.iter().enumerate() {
                let y = 2.0 * lam * r * r;
                let mut acc = 0.0;
                let mut damp = mode0;
                weighted_laguerre_iter(d as f64 - 1.0, y, m_max, |_, wl| {
                    acc += damp * wl;
                    damp *= step;
                });
                out[i] = acc;
            }
            out
        })
        .collect();
    let kappa = plancherel_prefactor(d);
    // signed-lambda contraction; the imaginary part must cancel
    let rows: Vec<(Vec<f64>, f64)> = (0..r_points.len())
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; s_points.len()];
            let mut imag: f64 = 0.0;
            for (k, &s) in s_points.iter().enumerate() {
                let mut acc = Complex64::ZERO;
                for (n, &lam) in rule.nodes.iter().enumerate() {
                    let coef = kappa * rule.weights[n] * lam.powi(d as i32) * a_mat[n][i];
                    // both signs of lambda at once
                    acc += Complex64::from_polar(coef, -lam * s)
                        + Complex64::from_polar(coef, lam * s);
                }
                row[k] = acc.re;
                imag = imag.max(acc.im.abs());
            }
            (row, imag)
        })
        .collect();
    let mut values = Array2::zeros((r_points.len(), s_points.len()));
    let mut imag_residue: f64 = 0.0;
    for (i, (row, imag)) in rows.into_iter().enumerate() {
        imag_residue = imag_residue.max(imag);
        for (k, v) in row.into_iter().enumerate() {
            values[[i, k]] = v;
        }
    }
    Ok(KernelTable {
        d,
        t,
        r_nodes: r_points.to_vec(),
        s_nodes: s_points.to_vec(),
        values,
        m_max,
        lambda_max,
        tol,
        tail_estimate: tail,
        imag_residue,
    })
}

/// Self-similar evaluation: h_t at (r, s) from a reference table via
/// h_t(z, s) = (t0/t)^{d+1} h_{t0}(r sqrt(t0/t), s t0/t).
pub fn kernel_scaled(t: f64, r: f64, s: f64, table: &KernelTable) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("need t > 0".into()));
    }
    let ratio = table.t / t;
    let v = table.interp(r * ratio.sqrt(), s * ratio)?;
    Ok(v * ratio.powi(table.d as i32 + 1))
}

/// Sample h_t on a physical grid (d = 1) through the scaled table.
pub fn kernel_field(table: &KernelTable, grid: &std::sync::Arc<crate::group::GridSpec>, t: f64) -> Result<SampledField> {
    let ratio = table.t / t;
    let amp = ratio.powi(table.d as i32 + 1);
    let mut field = SampledField::zeros(grid);
    for ((ix, iy, is), v) in field.values.indexed_iter_mut() {
        let z = Complex64::new(grid.x(ix), grid.y(iy));
        let (r, s) = (z.norm() * ratio.sqrt(), grid.s(is) * ratio);
        // clamp the far tail to zero rather than erroring at the window edge
        let val = match table.interp_cubic(r, s) {
            Ok(v) => v * amp,
            Err(_) => 0.0,
        };
        *v = Complex64::new(val, 0.0);
    }
    Ok(field)
}

/// Explicit-Euler heat evolution on a sampled field; an independent PDE
/// oracle for the kernel. Enforces the stability limit dt <= 1/||stencil||.
pub fn fd_heat_oracle(u0: &SampledField, t: f64, steps: usize) -> Result<SampledField> {
    if steps == 0 || !(t > 0.0) {
        return Err(Error::InvalidParameter("need steps >= 1 and t > 0".into()));
    }
    let dt = t / steps as f64;
    let limit = sublaplacian_stability_limit(&u0.grid);
    if dt > limit {
        return Err(Error::StabilityViolation { dt, limit });
    }
    let mut u = u0.clone();
    for _ in 0..steps {
        let lap = sublaplacian_fd(&u)?;
        u = u.add(&lap.scale(Complex64::new(dt, 0.0)))?;
    }
    Ok(u)
}

/// Steps needed for a stable explicit-Euler run to time t.
pub fn stable_step_count(grid: &crate::group::GridSpec, t: f64) -> usize {
    (t / sublaplacian_stability_limit(grid)).ceil().max(1.0) as usize
}

/// Cache directory resolution: explicit flag, HEISENCALC_CACHE, or a
/// `heisencalc-cache` folder under the system temp directory.
pub fn cache_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("HEISENCALC_CACHE") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    std::env::temp_dir().join("heisencalc-cache")
}

/// Cache file name keyed by the parameters that invalidate a table.
pub fn cache_file_name(d: usize, t: f64, tol: f64, r_hi: f64, s_hi: f64, nr: usize, ns: usize) -> String {
    format!("heatkernel_v1_d{d}_t{t:e}_tol{tol:e}_r{r_hi:e}x{nr}_s{s_hi:e}x{ns}.csv")
}

/// Load a cached table or evaluate and atomically persist one.
pub fn kernel_cached(
    dir: &Path,
    d: usize,
    r_points: &[f64],
    s_points: &[f64],
    t: f64,
    tol: f64,
) -> Result<KernelTable> {
    let name = cache_file_name(
        d,
        t,
        tol,
        *r_points.last().unwrap_or(&0.0),
        *s_points.last().unwrap_or(&0.0),
        r_points.len(),
        s_points.len(),
    );
    let path = dir.join(name);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(table) = KernelTable::from_csv(&text) {
            if table.d == d && table.t == t && table.tol == tol {
                return Ok(table);
            }
        }
    }
    let table = kernel_eval_d(d, r_points, s_points, t, tol)?;
    std::fs::create_dir_all(dir)?;
    io::write_atomic(&path, &table.to_csv())?;
    Ok(table)
}

/// Default tensor grid for kernel tables at t = 1, d = 1.
pub fn default_table_axes(nr: usize, ns: usize) -> (Vec<f64>, Vec<f64>) {
    let r: Vec<f64> = (0..nr).map(|i| 8.0 * i as f64 / (nr - 1) as f64).collect();
    let s: Vec<f64> = (0..ns)
        .map(|k| -20.0 + 40.0 * k as f64 / (ns - 1) as f64)
        .collect();
    (r, s)
}

/// Closed-form center-axis profile at d = 1, t = 1:
/// h(0, s) = sech^2(pi s / 8) / 64 (Mittag-Leffler resummation of the
/// series over odd integers; an independent oracle for tests).
pub fn axis_oracle_d1(s: f64) -> f64 {
    let c = (std::f64::consts::PI * s / 8.0).cosh();
    1.0 / (64.0 * c * c)
}

/// Mass of h_t over H^1 by Gauss-Legendre panel quadrature on a fresh
/// evaluation (avoids the trapezoid boundary term at r = 0).
pub fn kernel_mass_d1(t: f64, tol: f64, r_max: f64, s_max: f64) -> Result<f64> {
    let r_rule = crate::quad::panels_uniform(0.0, r_max, 24, 8);
    let s_rule = crate::quad::panels_uniform(-s_max, s_max, 60, 8);
    let table = kernel_eval(&r_rule.nodes, &s_rule.nodes, t, tol)?;
    let mut acc = 0.0;
    for (i, (&r, &wr)) in r_rule.nodes.iter().zip(&r_rule.weights).enumerate() {
        let geom = wr * 2.0 * std::f64::consts::PI * r;
        let mut srow = 0.0;
        for (k, &ws) in s_rule.weights.iter().enumerate() {
            srow += ws * table.values[[i, k]];
        }
        acc += geom * srow;
    }
    Ok(acc)
}

/// Quadrature of a tabulated kernel against the Haar measure, using
/// trapezoid weights on the table axes (d = 1).
pub fn table_mass_d1(table: &KernelTable) -> f64 {
    let trap = |nodes: &[f64]| -> Vec<f64> {
        let n = nodes.len();
        (0..n)
            .map(|i| {
                let lo = if i == 0 { nodes[0] } else { nodes[i - 1] };
                let hi = if i + 1 == n { nodes[n - 1] } else { nodes[i + 1] };
                0.5 * (hi - lo)
            })
            .collect()
    };
    let wr = trap(&table.r_nodes);
    let ws = trap(&table.s_nodes);
    let mut acc = 0.0;
    for (i, &r) in table.r_nodes.iter().enumerate() {
        let geom = wr[i] * 2.0 * std::f64::consts::PI * r;
        let mut srow = 0.0;
        for (k, _) in table.s_nodes.iter().enumerate() {
            srow += ws[k] * table.values[[i, k]];
        }
        acc += geom * srow;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralGrid;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn grid(m_max: usize) -> Arc<SpectralGrid> {
        SpectralGrid::dyadic(1, m_max, -8, 6, 16).unwrap()
    }

    #[test]
    fn heat_one_mode_scale() {
        let g = grid(4);
        let p = RadialProfile::from_fn(&g, |m, lam| {
            if m == 0 && lam > 0.99 && lam < 1.01 {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        });
        let heated = heat_apply(&p, 1.0).unwrap();
        for i in 0..g.len() {
            let v = p.values[[0, i]];
            if v != Complex64::ZERO {
                let lam = g.node(i);
                let expect = (-4.0 * lam).exp();
                let got = heated.values[[0, i]].re;
                assert!((got - expect).abs() < 1e-14);
            }
        }
        assert!(heat_apply(&p, 0.0).is_err());
        assert!(heat_apply(&p, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn heat_semigroup_additive(t1 in 1e-3f64..2.0, t2 in 1e-3f64..2.0) {
            let g = grid(3);
            let p = RadialProfile::from_fn(&g, |m, lam| {
                Complex64::new(1.0 / (1.0 + m as f64 + lam * lam), 0.2)
            });
            let a = heat_apply(&heat_apply(&p, t1).unwrap(), t2).unwrap();
            let b = heat_apply(&p, t1 + t2).unwrap();
            let mut worst: f64 = 0.0;
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                let scale = y.norm().max(1e-30);
                worst = worst.max((x - y).norm() / scale);
            }
            prop_assert!(worst < 1e-12, "worst {worst:.3e}");
        }
    }

    #[test]
    fn tail_bound_monotonic() {
        let b1 = tail_bound(64, 8.0, 1e-9, 1.0, 1);
        let b2 = tail_bound(128, 8.0, 1e-9, 1.0, 1);
        let b3 = tail_bound(128, 8.0, 1e-9, 2.0, 1);
        assert!(b2 < b1, "{b2} !< {b1}");
        assert!(b3 < b2, "{b3} !< {b2}");
    }

    #[test]
    fn kernel_center_value_and_axis_profile() {
        // h(0,0) = 1/64 exactly (sum over odd squares); the axis profile is
        // sech^2(pi s / 8)/64
        let r = vec![0.0, 0.5, 1.0];
        let s = vec![-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0];
        let tol = 1e-5;
        let table = kernel_eval(&r, &s, 1.0, tol).unwrap();
        let h00 = table.values[[0, 3]];
        assert!(
            (h00 - 1.0 / 64.0).abs() < 5e-4 / 64.0,
            "h(0,0) = {h00}, expected {}",
            1.0 / 64.0
        );
        for (k, &sv) in s.iter().enumerate() {
            let got = table.values[[0, k]];
            let want = axis_oracle_d1(sv);
            assert!(
                (got - want).abs() < 1e-3 * want + tol,
                "s={sv}: {got} vs {want}"
            );
        }
        assert!(table.imag_residue < 1e-10 * table.peak());
        assert!(table.tail_estimate < tol);
    }

    #[test]
    fn kernel_parity_and_positivity() {
        let r: Vec<f64> = (0..25).map(|i| 6.0 * i as f64 / 24.0).collect();
        let s: Vec<f64> = (0..41).map(|k| -12.0 + 24.0 * k as f64 / 40.0).collect();
        let table = kernel_eval(&r, &s, 1.0, 1e-5).unwrap();
        // h(r, -s) = h(r, s)
        for i in 0..r.len() {
            for k in 0..s.len() {
                let mirrored = table.values[[i, s.len() - 1 - k]];
                assert!(
                    (table.values[[i, k]] - mirrored).abs() < 1e-13,
                    "parity at ({i},{k})"
                );
            }
        }
        let peak = table.peak();
        assert!(table.min_value() > -1e-6 * peak, "min {}", table.min_value());
    }

    #[test]
    fn kernel_mass_is_one() {
        let mass = kernel_mass_d1(1.0, 2e-5, 10.0, 30.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-4, "mass {mass}");
    }

    #[test]
    fn kernel_self_similarity() {
        // direct series at t = 2 vs scaling of the t = 1 table; probes are
        // chosen so the scaled lookup lands exactly on table nodes, leaving
        // pure series truncation as the only error (the acceptance suite
        // also exercises off-node interpolation with a dense table)
        let r: Vec<f64> = (0..41).map(|i| 5.0 * i as f64 / 40.0).collect();
        let s: Vec<f64> = (0..81).map(|k| -16.0 + 32.0 * k as f64 / 80.0).collect();
        let base = kernel_eval(&r, &s, 1.0, 1e-5).unwrap();
        let t: f64 = 2.0;
        let probe_idx = [(0usize, 40usize), (8, 44), (16, 50), (24, 30)];
        let probe_r: Vec<f64> = probe_idx.iter().map(|&(i, _)| r[i] * t.sqrt()).collect();
        let mut probe_s: Vec<f64> = probe_idx.iter().map(|&(_, k)| s[k] * t).collect();
        probe_s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        probe_s.dedup();
        let mut sorted_r = probe_r.clone();
        sorted_r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted_r.dedup();
        let direct = kernel_eval(&sorted_r, &probe_s, t, 1e-5).unwrap();
        let peak2 = direct.peak();
        for &(i, k) in &probe_idx {
            let (rv, sv) = (r[i] * t.sqrt(), s[k] * t);
            let scaled = kernel_scaled(t, rv, sv, &base).unwrap();
            let di = sorted_r.iter().position(|&x| x == rv).unwrap();
            let dk = probe_s.iter().position(|&x| x == sv).unwrap();
            let want = direct.values[[di, dk]];
            assert!(
                (scaled - want).abs() <= 3e-4 * want.abs().max(peak2),
                "({rv},{sv}): scaled {scaled} vs direct {want}"
            );
        }
        // t = 1 returns table values exactly at the nodes
        let same = kernel_scaled(1.0, r[3], s[5], &base).unwrap();
        assert!((same - base.values[[3, 5]]).abs() < 1e-15);
        // out-of-range query errors
        assert!(kernel_scaled(1e-6, 10.0, 15.0, &base).is_err());
    }

    #[test]
    fn fd_oracle_constant_and_mass() {
        let g = Arc::new(crate::group::GridSpec::cubic(12, 6.0).unwrap());
        let c = SampledField::from_fn(&g, |_, _| Complex64::new(0.3, 0.0));
        let evolved = fd_heat_oracle(&c, 0.01, 40).unwrap();
        let diff = evolved.sub(&c).unwrap();
        assert!(diff.max_abs() < 1e-13);
        // Gaussian mass is conserved to rounding (stencil telescopes)
        let f = SampledField::from_fn(&g, |z, s| {
            Complex64::new((-2.0 * z.norm_sqr() - 2.0 * s * s).exp(), 0.0)
        });
        let steps = stable_step_count(&g, 0.01);
        let evolved = fd_heat_oracle(&f, 0.01, steps).unwrap();
        let m0 = crate::group::haar_integral(&f).re;
        let m1 = crate::group::haar_integral(&evolved).re;
        assert!((m1 - m0).abs() < 1e-10 * m0.abs(), "{m0} vs {m1}");
        // stability enforcement
        assert!(matches!(
            fd_heat_oracle(&f, 1.0, 1),
            Err(Error::StabilityViolation { .. })
        ));
    }

    #[test]
    fn kernel_cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("heisencalc-test-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let r = vec![0.0, 1.0, 2.0];
        let s = vec![-2.0, 0.0, 2.0];
        let a = kernel_cached(&dir, 1, &r, &s, 1.0, 1e-5).unwrap();
        let b = kernel_cached(&dir, 1, &r, &s, 1.0, 1e-5).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        // distinct tolerance gets its own file
        let c = kernel_cached(&dir, 1, &r, &s, 1.0, 1e-6).unwrap();
        assert!(c.tol != a.tol);
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 2);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn kernel_csv_round_trip() {
        let r = vec![0.0, 0.7, 1.9];
        let s = vec![-1.0, 0.5];
        let t = kernel_eval(&r, &s, 1.0, 1e-4).unwrap();
        let text = t.to_csv();
        assert!(text.starts_with("# heatkernel v1 d=1"));
        let back = KernelTable::from_csv(&text).unwrap();
        assert_eq!(back.r_nodes, t.r_nodes);
        assert_eq!(back.s_nodes, t.s_nodes);
        assert_eq!(back.values, t.values);
    }

    #[test]
    fn heat_smooths_besov_scale() {
        // after heating, high-regularity Besov norms stay finite
        let g = grid(12);
        let part = crate::littlewood_paley::build_partition(1, -6, 6).unwrap();
        let p = RadialProfile::from_fn(&g, |m, lam| {
            let tau = (2 * m + 1) as f64 * lam;
            if tau.abs() > 0.5 && tau.abs() < 100.0 {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        });
        let heated = heat_apply(&p, 0.5).unwrap();
        let params = crate::littlewood_paley::BesovParams::new(5.0, 2.0, 1.0).unwrap();
        let n = crate::littlewood_paley::besov_norm(&heated, params, &part).unwrap();
        assert!(n.is_finite() && n > 0.0);
    }
}
