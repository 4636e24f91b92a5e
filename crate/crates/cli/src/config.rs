//! Run configuration: `key = value` file plus flag overrides, with a stable
//! hash recorded in every output header.

use anyhow::{anyhow, Context};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    pub m_max: usize,
    pub oct_lo: i32,
    pub oct_hi: i32,
    pub panel_order: usize,
    pub grid_n: usize,
    pub j_min: i32,
    pub j_max: i32,
    pub tol: Option<f64>,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
    pub quick: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 1,
            m_max: 48,
            oct_lo: -12,
            oct_hi: 11,
            panel_order: 16,
            grid_n: 32,
            j_min: -7,
            j_max: 9,
            tol: None,
            cache_dir: None,
            out_dir: PathBuf::from("."),
            threads: None,
            seed: 7,
            quick: false,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "d",
    "m_max",
    "lambda_min",
    "lambda_max",
    "panel_order",
    "grid_n",
    "j_min",
    "j_max",
    "tol",
    "cache_dir",
    "out_dir",
    "threads",
    "seed",
    "quick",
];

impl RunConfig {
    pub fn assemble(
        file: Option<&Path>,
        cache_dir: Option<PathBuf>,
        out: Option<PathBuf>,
        tol: Option<f64>,
        threads: Option<usize>,
        seed: Option<u64>,
        quick: bool,
    ) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_file(&text)?;
        }
        if let Some(c) = cache_dir {
            cfg.cache_dir = Some(c);
        }
        if let Some(o) = out {
            cfg.out_dir = o;
        }
        if tol.is_some() {
            cfg.tol = tol;
        }
        if threads.is_some() {
            cfg.threads = threads;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if quick {
            cfg.quick = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, text: &str) -> anyhow::Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(anyhow!("line {}: unknown key `{key}`", lineno + 1));
            }
            match key {
                "d" => self.d = value.parse()?,
                "m_max" => self.m_max = value.parse()?,
                "lambda_min" => self.oct_lo = parse_octave(value)?,
                "lambda_max" => self.oct_hi = parse_octave(value)? - 1,
                "panel_order" => self.panel_order = value.parse()?,
                "grid_n" => self.grid_n = value.parse()?,
                "j_min" => self.j_min = value.parse()?,
                "j_max" => self.j_max = value.parse()?,
                "tol" => self.tol = Some(value.parse()?),
                "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
                "out_dir" => self.out_dir = PathBuf::from(value),
                "threads" => self.threads = Some(value.parse()?),
                "seed" => self.seed = value.parse()?,
                "quick" => self.quick = value.parse()?,
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.d == 0 || self.d > 8 {
            return Err(anyhow!("d must be in 1..=8"));
        }
        if self.m_max > 256 {
            return Err(anyhow!("m_max is capped at 256 (desk scale)"));
        }
        if self.grid_n < 4 || self.grid_n > 64 {
            return Err(anyhow!("grid_n must be in 4..=64"));
        }
        if self.panel_order < 4 || self.panel_order > 96 {
            return Err(anyhow!("panel_order must be in 4..=96"));
        }
        if self.oct_hi < self.oct_lo || self.j_max < self.j_min {
            return Err(anyhow!("empty spectral or block range"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(anyhow!("tol must be positive"));
            }
        }
        Ok(())
    }

    /// Canonical text form; hashed into output headers.
    pub fn canonical(&self) -> String {
        format!(
            "d={};m_max={};oct_lo={};oct_hi={};panel_order={};grid_n={};j_min={};j_max={};tol={:?};seed={};quick={}",
            self.d,
            self.m_max,
            self.oct_lo,
            self.oct_hi,
            self.panel_order,
            self.grid_n,
            self.j_min,
            self.j_max,
            self.tol,
            self.seed,
            self.quick
        )
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    /// First-line comment header shared by every CSV output.
    pub fn tool_header(&self) -> String {
        format!(
            "# heisencalc v{} config={:016x}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash()
        )
    }
}

fn parse_octave(value: f64_or_str()) -> anyhow::Result<i32> {
    unreachable!()
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
