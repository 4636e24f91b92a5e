//! heisencalc: command-line front end for the Heisenberg spectral calculus.
//!
//! Subcommands: `kernel` tabulates heat-kernel tables (with disk caching),
//! `norms` prints Besov/Sobolev/L^p norms of built-in function families, and
//! `verify` runs the numerical certification suites and writes report CSVs.
//!
//! Configuration comes from an optional `key = value` file plus flags;
//! flags win. All CSV outputs start with a comment header carrying the tool
//! version and the config hash, and identical configs produce byte-identical
//! outputs.

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

mod config;
mod suites;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "heisencalc", version, about = "Numerical spectral calculus on the Heisenberg group")]
struct Cli {
    /// Config file with `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Kernel cache directory (env HEISENCALC_CACHE is the fallback).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Output directory (default `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance override for tolerance-driven commands.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized test families.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Reduced grid sizes for a fast full sweep.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the heat kernel h_t on an (r, s) grid and write the table CSV.
    Kernel {
        /// Evolution time.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Radial extent of the table.
        #[arg(long, default_value_t = 4.0)]
        r_max: f64,
        /// Vertical extent of the table (s in [-s_max, s_max]).
        #[arg(long, default_value_t = 8.0)]
        s_max: f64,
        /// Radial sample count.
        #[arg(long, default_value_t = 129)]
        nr: usize,
        /// Vertical sample count.
        #[arg(long, default_value_t = 257)]
        ns: usize,
    },
    /// Print norms of a built-in test function family as CSV.
    Norms {
        /// One of: gaussian, one-mode, localized-ring, two-bump.
        #[arg(long)]
        family: String,
        /// Block index for localized families.
        #[arg(long, default_value_t = 0)]
        j: i32,
        /// Regularity exponent.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Integrability exponent (use `inf` for the sup norm).
        #[arg(long, default_value = "2")]
        p: String,
        /// Besov summation exponent.
        #[arg(long, default_value = "2")]
        r: String,
        /// Gaussian radial decay rate.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Gaussian vertical decay rate.
        #[arg(long, default_value_t = 0.16)]
        b: f64,
        /// Vertical modulation frequency of the Gaussian family.
        #[arg(long, default_value_t = 3.0)]
        omega: f64,
        /// Laguerre mode for the one-mode family.
        #[arg(long, default_value_t = 0)]
        m: usize,
        /// Report norms for dilates delta_{2^k}, k = 0..count-1.
        #[arg(long, default_value_t = 1)]
        sweep: usize,
    },
    /// Run certification suites and write report CSV plus a text summary.
    Verify {
        /// Comma-separated suite list, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn main() {
    let code = run();
    std::process::exit(code);
}

fn run() -> i32 {
    let cli = Cli::parse();
    let cfg = match RunConfig::assemble(
        cli.config.as_deref(),
        cli.cache_dir.clone(),
        cli.out.clone(),
        cli.tol,
        cli.threads,
        cli.seed,
        cli.quick,
    ) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if let Some(n) = cfg.threads {
        // best effort; a pool may already exist
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.cmd {
        Cmd::Kernel { t, r_max, s_max, nr, ns } => cmd_kernel(&cfg, *t, *r_max, *s_max, *nr, *ns),
        Cmd::Norms {
            family,
            j,
            s,
            p,
            r,
            a,
            b,
            omega,
            m,
            sweep,
        } => cmd_norms(&cfg, family, *j, *s, p, r, *a, *b, *omega, *m, *sweep),
        Cmd::Verify { suite } => return cmd_verify(&cfg, suite),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = format!("{e:#}");
            eprintln!("error: {msg}");
            // tolerance infeasibility is its own exit code
            if msg.contains("tail above tolerance") || msg.contains("neglected tail") {
                3
            } else {
                2
            }
        }
    }
}

fn cmd_kernel(cfg: &RunConfig, t: f64, r_max: f64, s_max: f64, nr: usize, ns: usize) -> anyhow::Result<()> {
    if !(t > 0.0) || !(r_max > 0.0) || !(s_max > 0.0) || nr < 2 || ns < 2 {
        return Err(anyhow!("kernel grid parameters out of range"));
    }
    let tol = cfg.tol.unwrap_or(1e-5);
    let r: Vec<f64> = (0..nr).map(|i| r_max * i as f64 / (nr - 1) as f64).collect();
    let s: Vec<f64> = (0..ns)
        .map(|k| -s_max + 2.0 * s_max * k as f64 / (ns - 1) as f64)
        .collect();
    let dir = heisencalc_core::heat::cache_dir(cfg.cache_dir.as_deref());
    let table = heisencalc_core::heat::kernel_cached(&dir, cfg.d, &r, &s, t, tol)
        .context("kernel evaluation")?;
    let mut out = cfg.tool_header();
    out.push_str(&table.to_csv());
    let path = cfg.out_dir.join("kernel.csv");
    std::fs::create_dir_all(&cfg.out_dir)?;
    heisencalc_core::io::write_atomic(&path, &out)?;
    println!(
        "kernel table t={t} ({nr} x {ns}) written to {}; m_max={} lambda_max={:.3} tail<={:.2e} imag<={:.2e}",
        path.display(),
        table.m_max,
        table.lambda_max,
        table.tail_estimate,
        table.imag_residue
    );
    Ok(())
}

fn parse_exp(s: &str) -> anyhow::Result<f64> {
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    let v: f64 = s.parse().map_err(|_| anyhow!("bad exponent `{s}`"))?;
    if v < 1.0 {
        return Err(anyhow!("exponent must be >= 1 or `inf`"));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn cmd_norms(
    cfg: &RunConfig,
    family: &str,
    j: i32,
    s: f64,
    p: &str,
    r: &str,
    a: f64,
    b: f64,
    omega: f64,
    m: usize,
    sweep: usize,
) -> anyhow::Result<()> {
    use heisencalc_core::families as fam;
    use heisencalc_core::littlewood_paley as lpm;
    let lp = parse_exp(p)?;
    let lr = parse_exp(r)?;
    let grid = heisencalc_core::spectral::SpectralGrid::dyadic(
        cfg.d, cfg.m_max, cfg.oct_lo, cfg.oct_hi, cfg.panel_order,
    )?;
    let part = lpm::build_partition(1, cfg.j_min, cfg.j_max)?;
    let base: heisencalc_core::spectral::RadialProfile = match family {
        "gaussian" => {
            let spec = fam::GaussianSpec { d: cfg.d, k: 0, a, b, omega };
            heisencalc_core::spectral::forward_transform(&spec.function(), &grid)?
        }
        "one-mode" => fam::one_mode_profile(&grid, m, 1.0, 0.1, 1.0),
        "localized-ring" => {
            let mut rng = fam::SplitMix64::new(cfg.seed);
            fam::localized_ring_profile(&grid, j, fam::PLATEAU_RING, &mut rng)?
        }
        "two-bump" => {
            let mut rng = fam::SplitMix64::new(cfg.seed);
            let one = fam::localized_ring_profile(&grid, j, fam::PLATEAU_RING, &mut rng)?;
            fam::two_scale_profile(&one, 2, 2f64.powf(2.0 * (4.0 / lp.min(1e6) - s)))?
        }
        other => return Err(anyhow!("unknown family `{other}`")),
    };
    let mut out = cfg.tool_header();
    out.push_str("family,dilate_k,norm,value\n");
    let params = lpm::BesovParams::new(s, lp, lr)?;
    for k in 0..sweep.max(1) {
        let u = if k == 0 { base.clone() } else { base.dilate(k as i32)? };
        let l2 = u.plancherel_norm();
        let besov = lpm::besov_norm(&u, params, &part)?;
        let sobolev = lpm::sobolev_norm(&u, s, lp)?;
        let lp_val = lpm::profile_lp_norm(&u, lp, None)?;
        out.push_str(&format!("{family},{k},L2,{l2}\n"));
        out.push_str(&format!("{family},{k},Lp,{lp_val}\n"));
        out.push_str(&format!("{family},{k},besov,{besov}\n"));
        out.push_str(&format!("{family},{k},sobolev,{sobolev}\n"));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("norms.csv");
    heisencalc_core::io::write_atomic(&path, &out)?;
    print!("{out}");
    Ok(())
}

fn cmd_verify(cfg: &RunConfig, suite: &str) -> i32 {
    let names: Vec<&str> = if suite == "all" {
        suites::ALL_SUITES.to_vec()
    } else {
        suite.split(',').map(|s| s.trim()).collect()
    };
    for n in &names {
        if !suites::ALL_SUITES.contains(n) {
            eprintln!("unknown suite `{n}`; available: {}", suites::ALL_SUITES.join(","));
            return 2;
        }
    }
    let mut reports = Vec::new();
    for name in &names {
        match suites::run_suite(name, cfg) {
            Ok(mut batch) => reports.append(&mut batch),
            Err(e) => {
                eprintln!("suite `{name}` failed to run: {e:#}");
                return 1;
            }
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("cannot create output dir: {e}");
        return 2;
    }
    let csv_path = cfg.out_dir.join("report.csv");
    let summary_path = cfg.out_dir.join("summary.txt");
    if let Err(e) = heisencalc_core::verify::write_report_files(
        &reports,
        &csv_path,
        &summary_path,
        cfg.tool_header().trim_end(),
    ) {
        eprintln!("cannot write reports: {e}");
        return 2;
    }
    let mut all_pass = true;
    for r in &reports {
        println!("{}", r.summary_line());
        all_pass &= r.pass;
    }
    println!(
        "{} checks, {} failing; reports in {}",
        reports.len(),
        reports.iter().filter(|r| !r.pass).count(),
        csv_path.display()
    );
    if all_pass {
        0
    } else {
        1
    }
}
