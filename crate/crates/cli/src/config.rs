//! Flag and key=value file resolution. Flags win over the file.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use spm_core::Method;

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// benchmark1d or allen-cahn
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// birth-death or spm
    #[arg(long)]
    pub method: Option<String>,
    /// Initial particle count(s), comma separated; scientific notation allowed.
    #[arg(long, value_delimiter = ',')]
    pub n0: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub h: Vec<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Annihilation threshold n_a.
    #[arg(long)]
    pub na: Option<f64>,
    #[arg(long, alias = "seeds", value_delimiter = ',')]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: SPM_THREADS or all logical cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Particles per worker chunk and random stream.
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Record errors every this many steps (the final step is always recorded).
    #[arg(long)]
    pub report_every: Option<usize>,
    /// 1-D audit window as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub audit_window: Vec<f64>,
    /// Escalate warnings to errors.
    #[arg(long)]
    pub strict: bool,
    /// Plain-text key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Everything a run or sweep needs, after merging flags, file and defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: Option<String>,
    pub dim: usize,
    pub method: Method,
    pub n0: Vec<usize>,
    pub tau: Vec<f64>,
    pub h: Vec<f64>,
    pub t_final: f64,
    pub na: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub chunk_size: usize,
    pub report_every: usize,
    pub audit_window: (f64, f64),
    pub strict: bool,
    /// Keys left over in the file for command-specific use.
    pub extra: HashMap<String, String>,
}

pub fn read_kv_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        map.insert(k.trim().trim_start_matches("--").replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn list<T: FromStr>(raw: &str, key: &str) -> Result<Vec<T>> {
    raw.split(',').map(|s| s.trim().parse::<T>().map_err(|_| anyhow!("bad value '{s}' for {key}"))).collect()
}

fn one<T: FromStr>(raw: &str, key: &str) -> Result<T> {
    raw.trim().parse::<T>().map_err(|_| anyhow!("bad value '{raw}' for {key}"))
}

pub fn particle_count(n: f64) -> Result<usize> {
    if !(n >= 1.0) || n.fract() != 0.0 || n > 1e12 {
        bail!("particle count must be a positive integer, got {n}");
    }
    Ok(n as usize)
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<Resolved> {
        let mut file = match &self.config {
            Some(p) => read_kv_file(p)?,
            None => HashMap::new(),
        };
        let mut take = |k: &str| file.remove(k);

        let problem = self.problem.clone().or_else(|| take("problem"));
        let dim = match (self.dim, take("dim")) {
            (Some(d), _) => d,
            (None, Some(v)) => one(&v, "dim")?,
            (None, None) => match problem.as_deref() {
                Some("allen-cahn") => 2,
                _ => 1,
            },
        };
        let method_name = self.method.clone().or_else(|| take("method")).unwrap_or_else(|| "birth-death".into());
        let method = Method::from_str(&method_name)?;
        let n0_raw: Vec<f64> = match (self.n0.is_empty(), take("n0")) {
            (false, _) => self.n0.clone(),
            (true, Some(v)) => list(&v, "n0")?,
            (true, None) => vec![1e4],
        };
        let n0 = n0_raw.into_iter().map(particle_count).collect::<Result<Vec<_>>>()?;
        let tau = match (self.tau.is_empty(), take("tau")) {
            (false, _) => self.tau.clone(),
            (true, Some(v)) => list(&v, "tau")?,
            (true, None) => vec![0.01],
        };
        let h = match (self.h.is_empty(), take("h")) {
            (false, _) => self.h.clone(),
            (true, Some(v)) => list(&v, "h")?,
            (true, None) => vec![0.01],
        };
        let t_final = match (self.t_final, take("T")) {
            (Some(t), _) => t,
            (None, Some(v)) => one(&v, "T")?,
            (None, None) => 1.0,
        };
        let na = match (self.na, take("na")) {
            (Some(v), _) => v,
            (None, Some(v)) => one(&v, "na")?,
            (None, None) => 3.0,
        };
        let seeds = match (self.seed.is_empty(), take("seed").or_else(|| take("seeds"))) {
            (false, _) => self.seed.clone(),
            (true, Some(v)) => list(&v, "seed")?,
            (true, None) => vec![1],
        };
        let out = match (&self.out, take("out")) {
            (Some(p), _) => p.clone(),
            (None, Some(v)) => PathBuf::from(v),
            (None, None) => PathBuf::from("spm-out"),
        };
        let threads = match (self.threads, take("threads")) {
            (Some(t), _) => Some(t),
            (None, Some(v)) => Some(one(&v, "threads")?),
            (None, None) => None,
        };
        let chunk_size = match (self.chunk_size, take("chunk-size")) {
            (Some(c), _) => c,
            (None, Some(v)) => one(&v, "chunk-size")?,
            (None, None) => spm_core::DEFAULT_CHUNK_SIZE,
        };
        let report_every = match (self.report_every, take("report-every")) {
            (Some(c), _) => c,
            (None, Some(v)) => one(&v, "report-every")?,
            (None, None) => 10,
        };
        let audit_window = match (self.audit_window.as_slice(), take("audit-window")) {
            ([lo, hi], _) => (*lo, *hi),
            (_, Some(v)) => {
                let w: Vec<f64> = list(&v, "audit-window")?;
                if w.len() != 2 {
                    bail!("audit-window needs two values");
                }
                (w[0], w[1])
            }
            _ => spm_core::solver::DEFAULT_AUDIT_WINDOW,
        };
        let strict = self.strict || take("strict").is_some_and(|v| v == "true" || v == "1");
        if report_every == 0 {
            bail!("report-every must be positive");
        }
        if !(audit_window.0 < audit_window.1) {
            bail!("audit window must satisfy lo < hi");
        }
        Ok(Resolved {
            problem,
            dim,
            method,
            n0,
            tau,
            h,
            t_final,
            na,
            seeds,
            out,
            threads,
            chunk_size,
            report_every,
            audit_window,
            strict,
            extra: file,
        })
    }
}
