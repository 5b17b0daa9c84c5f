//! Diagnostics for the long-run behaviour of `Z_n`, and parameter sweeps.
//!
//! Convergence is probed on each path separately: for consecutive checkpoints
//! `m < m'` the report gives the fraction of replicas with `|Z_m' - Z_m| > eps`.
//! The limit, if any, may be random, so spread across replicas is reported but
//! never expected to vanish.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mc::{simulate, McError, ReplicaTrace, SimConfig};
use crate::model::{Boundary, Params};
use crate::stats::{summarize, DiagonalStats};

pub const DEFAULT_EPSILONS: [f64; 4] = [0.1, 0.05, 0.02, 0.01];
pub const DEFAULT_FIRST_CHECKPOINT: usize = 250;
pub const DEFAULT_LAST_CHECKPOINT: usize = 2000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no traces to analyse")]
    NoTraces,
    #[error("checkpoints must be non-empty and strictly increasing")]
    BadCheckpoints,
    #[error("checkpoint {checkpoint} is beyond trace length n_max = {n_max}")]
    CheckpointBeyondTrace { checkpoint: usize, n_max: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("grid resolution must be at least 2, got {0}")]
    BadResolution(usize),
    #[error(transparent)]
    Sim(#[from] McError),
    #[error("sweep store {path}: {source}")]
    Store { path: PathBuf, source: io::Error },
}

/// `first, 2 first, 4 first, ...` up to `last`.
pub fn doubling_checkpoints(first: usize, last: usize) -> Result<Vec<usize>, AnalysisError> {
    if first == 0 || first > last {
        return Err(AnalysisError::BadCheckpoints);
    }
    Ok(std::iter::successors(Some(first), |&m| m.checked_mul(2))
        .take_while(|&m| m <= last)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub m: usize,
    pub next: usize,
    /// `fractions[i]` is the share of replicas with `|Z_next - Z_m| > epsilons[i]`.
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub replicas: usize,
    pub epsilons: Vec<f64>,
    pub checkpoints: Vec<DiagonalStats>,
    pub cauchy: Vec<CauchyRow>,
    /// Per epsilon: whether the Cauchy fractions are non-increasing in `m`.
    /// A `false` entry flags the epsilon for inspection.
    pub non_increasing: Vec<bool>,
}

pub fn convergence_diagnostics(
    traces: &[ReplicaTrace],
    checkpoints: &[usize],
    epsilons: &[f64],
) -> Result<ConvergenceReport, AnalysisError> {
    if traces.is_empty() {
        return Err(AnalysisError::NoTraces);
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalysisError::BadCheckpoints);
    }
    if let Some(&e) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(AnalysisError::BadEpsilon(e));
    }
    let n_max = traces.iter().map(ReplicaTrace::n_max).min().unwrap();
    let last = *checkpoints.last().unwrap();
    if last > n_max {
        return Err(AnalysisError::CheckpointBeyondTrace {
            checkpoint: last,
            n_max,
        });
    }
    let count = traces.len() as f64;
    let cauchy: Vec<CauchyRow> = checkpoints
        .windows(2)
        .map(|w| {
            let (m, next) = (w[0], w[1]);
            let fractions = epsilons
                .iter()
                .map(|&eps| traces.iter().filter(|t| (t.z(next) - t.z(m)).abs() > eps).count() as f64 / count)
                .collect();
            CauchyRow { m, next, fractions }
        })
        .collect();
    let non_increasing = (0..epsilons.len())
        .map(|i| cauchy.windows(2).all(|w| w[1].fractions[i] <= w[0].fractions[i]))
        .collect();
    Ok(ConvergenceReport {
        replicas: traces.len(),
        epsilons: epsilons.to_vec(),
        checkpoints: checkpoints.iter().map(|&n| summarize(traces, n)).collect(),
        cauchy,
        non_increasing,
    })
}

/// Simulates up to the last checkpoint and runs [`convergence_diagnostics`].
pub fn convergence_run(
    config: &SimConfig,
    checkpoints: &[usize],
    epsilons: &[f64],
) -> Result<ConvergenceReport, AnalysisError> {
    let last = *checkpoints.last().ok_or(AnalysisError::BadCheckpoints)?;
    let mut config = config.clone();
    config.n_max = last;
    let traces = simulate(&config)?;
    convergence_diagnostics(&traces, checkpoints, epsilons)
}

/// Lattice points `(i, j, k) / (resolution - 1)` of the unit cube that satisfy
/// the parameter constraints, in lexicographic order of `(alpha, beta, gamma)`.
///
/// The constraints are decided on the integer indices. On the face
/// `k = i + j` the gamma value is clamped to the floating-point sum
/// `alpha + beta`, which differs from `k / (resolution - 1)` by at most one ulp,
/// so every emitted triple also passes [`Params::new`].
pub fn valid_grid(resolution: usize) -> Result<Vec<Params>, AnalysisError> {
    if resolution < 2 {
        return Err(AnalysisError::BadResolution(resolution));
    }
    let steps = (resolution - 1) as f64;
    let value = |i: usize| i as f64 / steps;
    let mut out = Vec::new();
    for i in 0..resolution {
        for j in 0..resolution {
            for k in i.max(j)..=(i + j).min(resolution - 1) {
                let (alpha, beta) = (value(i), value(j));
                let gamma = value(k).min(alpha + beta);
                out.push(Params::new(alpha, beta, gamma).expect("lattice point inside the region"));
            }
        }
    }
    Ok(out)
}

/// Settings shared by every sweep cell. All cells use the same seed, so two
/// cells see identical site uniforms and ordered cells give ordered fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTemplate {
    pub boundary: Boundary,
    pub checkpoint: usize,
    pub replicas: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub checkpoint: usize,
    pub mean_z: f64,
    pub var_z: f64,
    pub extinct_frac: f64,
    pub replicas: u64,
    pub seed: u64,
}

pub const SWEEP_HEADER: &str = "alpha,beta,gamma,checkpoint,mean_z,var_z,extinct_frac,replicas,seed";

impl SweepCell {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.alpha,
            self.beta,
            self.gamma,
            self.checkpoint,
            self.mean_z,
            self.var_z,
            self.extinct_frac,
            self.replicas,
            self.seed
        )
    }

    pub fn parse_row(line: &str) -> Option<SweepCell> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return None;
        }
        Some(SweepCell {
            alpha: f[0].parse().ok()?,
            beta: f[1].parse().ok()?,
            gamma: f[2].parse().ok()?,
            checkpoint: f[3].parse().ok()?,
            mean_z: f[4].parse().ok()?,
            var_z: f[5].parse().ok()?,
            extinct_frac: f[6].parse().ok()?,
            replicas: f[7].parse().ok()?,
            seed: f[8].parse().ok()?,
        })
    }

    pub fn params(&self) -> Option<Params> {
        Params::new(self.alpha, self.beta, self.gamma).ok()
    }

    fn key(&self) -> CellKey {
        CellKey::new(
            self.alpha,
            self.beta,
            self.gamma,
            self.checkpoint,
            self.replicas,
            self.seed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CellKey([u64; 6]);

impl CellKey {
    fn new(a: f64, b: f64, g: f64, checkpoint: usize, replicas: u64, seed: u64) -> Self {
        CellKey([a.to_bits(), b.to_bits(), g.to_bits(), checkpoint as u64, replicas, seed])
    }
}

/// Runs one cell of a sweep.
pub fn sweep_cell(params: Params, template: &SweepTemplate) -> Result<SweepCell, McError> {
    let config = SimConfig::new(
        params,
        template.boundary.clone(),
        template.checkpoint,
        template.replicas,
        template.master_seed,
    );
    let traces = simulate(&config)?;
    let s = summarize(&traces, template.checkpoint);
    Ok(SweepCell {
        alpha: params.alpha(),
        beta: params.beta(),
        gamma: params.gamma(),
        checkpoint: template.checkpoint,
        mean_z: s.mean_z,
        var_z: s.var_z,
        extinct_frac: s.extinct_frac,
        replicas: template.replicas,
        seed: template.master_seed,
    })
}

#[derive(Debug)]
pub struct CellFailure {
    pub index: usize,
    pub params: Params,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct SweepResult {
    /// Completed cells in grid order.
    pub cells: Vec<SweepCell>,
    /// Cells that ran or were stored unsuccessfully; the sweep continues past them.
    pub failures: Vec<CellFailure>,
    /// Cells taken from an earlier run instead of being simulated.
    pub reused: usize,
}

/// Where a sweep persists its rows. Rows are appended as cells finish; on
/// completion the file is rewritten in grid order.
#[derive(Debug, Clone)]
pub struct SweepStore {
    pub path: PathBuf,
    pub resume: bool,
}

fn store_err(path: &Path) -> impl FnOnce(io::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Store {
        path: path.to_path_buf(),
        source,
    }
}

fn load_rows(path: &Path) -> io::Result<Vec<SweepCell>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        // Partial lines from an interrupted append are skipped.
        if let Some(cell) = SweepCell::parse_row(&line?) {
            rows.push(cell);
        }
    }
    Ok(rows)
}

fn write_all_rows(path: &Path, cells: &[SweepCell]) -> io::Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut f = io::BufWriter::new(File::create(&tmp)?);
        writeln!(f, "{SWEEP_HEADER}")?;
        for c in cells {
            writeln!(f, "{}", c.csv_row())?;
        }
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Runs every cell of `grid` at the template's checkpoint.
///
/// With a store in resume mode, cells already present in the file with the same
/// parameters, checkpoint, replica count and seed are reused. Failures of a
/// single cell, including failures to append its row, are collected and do
/// not stop the sweep; only failing to set up or finalise the store is fatal.
pub fn run_sweep(
    grid: &[Params],
    template: &SweepTemplate,
    store: Option<&SweepStore>,
) -> Result<SweepResult, AnalysisError> {
    let mut done: HashMap<CellKey, SweepCell> = HashMap::new();
    if let Some(store) = store {
        if store.resume {
            for row in load_rows(&store.path).map_err(store_err(&store.path))? {
                done.insert(row.key(), row);
            }
        }
    }
    let key_of = |p: &Params| {
        CellKey::new(
            p.alpha(),
            p.beta(),
            p.gamma(),
            template.checkpoint,
            template.replicas,
            template.master_seed,
        )
    };
    let mut slots: Vec<Option<SweepCell>> = grid.iter().map(|p| done.get(&key_of(p)).cloned()).collect();
    let reused = slots.iter().filter(|s| s.is_some()).count();

    let appender = match store {
        Some(store) => {
            let existing: Vec<SweepCell> = slots.iter().flatten().cloned().collect();
            write_all_rows(&store.path, &existing).map_err(store_err(&store.path))?;
            let f = OpenOptions::new()
                .append(true)
                .open(&store.path)
                .map_err(store_err(&store.path))?;
            Some(Mutex::new(f))
        }
        None => None,
    };

    let todo: Vec<usize> = (0..grid.len()).filter(|&i| slots[i].is_none()).collect();
    let outcomes: Vec<(usize, Result<SweepCell, String>, Option<String>)> = todo
        .par_iter()
        .map(|&i| match sweep_cell(grid[i], template) {
            Ok(cell) => {
                let io_error = appender.as_ref().and_then(|m| {
                    let mut f = m.lock().unwrap();
                    writeln!(f, "{}", cell.csv_row())
                        .and_then(|_| f.flush())
                        .err()
                        .map(|e| e.to_string())
                });
                (i, Ok(cell), io_error)
            }
            Err(e) => (i, Err(e.to_string()), None),
        })
        .collect();

    let mut failures = Vec::new();
    for (i, outcome, io_error) in outcomes {
        match outcome {
            Ok(cell) => slots[i] = Some(cell),
            Err(error) => failures.push(CellFailure {
                index: i,
                params: grid[i],
                error,
            }),
        }
        if let Some(error) = io_error {
            failures.push(CellFailure {
                index: i,
                params: grid[i],
                error: format!("append failed: {error}"),
            });
        }
    }
    let cells: Vec<SweepCell> = slots.into_iter().flatten().collect();
    if let Some(store) = store {
        drop(appender);
        write_all_rows(&store.path, &cells).map_err(store_err(&store.path))?;
    }
    Ok(SweepResult {
        cells,
        failures,
        reused,
    })
}
