//! Cross-replica summaries of `Z_n` and the trace/stats file formats.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mc::{ReplicaTrace, SimConfig};
use crate::model::{Boundary, Params};

/// Quantile levels reported for `Z_n`.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.50, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("record spec must look like n0:n1 or n0:n1:stride, got {0:?}")]
    Syntax(String),
    #[error("record range {start}:{end} is empty or has zero stride")]
    Empty { start: usize, end: usize },
}

/// Diagonals to report: `start, start + stride, ...` up to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSpec {
    pub start: usize,
    pub end: usize,
    pub stride: usize,
}

impl RecordSpec {
    pub fn all(n_max: usize) -> Self {
        RecordSpec {
            start: 0,
            end: n_max,
            stride: 1,
        }
    }

    pub fn parse(s: &str) -> Result<Self, RecordError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| RecordError::Syntax(s.to_string()))
        };
        let (start, end, stride) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(RecordError::Syntax(s.to_string())),
        };
        if start > end || stride == 0 {
            return Err(RecordError::Empty { start, end });
        }
        Ok(RecordSpec { start, end, stride })
    }

    /// Recorded diagonals not beyond `n_max`.
    pub fn indices(&self, n_max: usize) -> impl Iterator<Item = usize> {
        (self.start..=self.end.min(n_max)).step_by(self.stride)
    }
}

/// Summary of `Z_n` over replicas at one diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalStats {
    pub n: usize,
    pub mean_z: f64,
    /// Unbiased sample variance across replicas (0 for a single replica).
    pub var_z: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 5],
    pub extinct_frac: f64,
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

pub fn summarize_values(n: usize, mut zs: Vec<f64>, extinct: usize) -> DiagonalStats {
    let (mean_z, var_z) = mean_var(&zs);
    let count = zs.len();
    zs.sort_by(f64::total_cmp);
    DiagonalStats {
        n,
        mean_z,
        var_z,
        quantiles: QUANTILE_LEVELS.map(|q| quantile(&zs, q)),
        extinct_frac: extinct as f64 / count as f64,
    }
}

pub fn summarize(traces: &[ReplicaTrace], n: usize) -> DiagonalStats {
    let zs = traces.iter().map(|t| t.z(n)).collect();
    let extinct = traces.iter().filter(|t| t.extinct_by(n)).count();
    summarize_values(n, zs, extinct)
}

/// Stats file written by `simulate --out stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub params: Params,
    pub boundary: Boundary,
    pub n_max: usize,
    pub replicas: u64,
    pub seed: u64,
    pub per_n: Vec<DiagonalStats>,
}

impl RunStats {
    pub fn from_traces(config: &SimConfig, traces: &[ReplicaTrace], record: RecordSpec) -> Self {
        RunStats {
            params: config.params,
            boundary: config.boundary.clone(),
            n_max: config.n_max,
            replicas: config.replicas,
            seed: config.master_seed,
            per_n: record.indices(config.n_max).map(|n| summarize(traces, n)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialise")
    }
}

/// Trace CSV: `replica_id,n,y,z`, replicas in order, then diagonals in order.
pub fn write_traces_csv<W: Write>(mut out: W, traces: &[ReplicaTrace], record: RecordSpec) -> io::Result<()> {
    writeln!(out, "replica_id,n,y,z")?;
    for t in traces {
        for n in record.indices(t.n_max()) {
            writeln!(out, "{},{},{},{}", t.replica_id, n, t.y_series[n], t.z(n))?;
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.0);
        assert_eq!(quantile(&xs, 0.25), 1.0);
        assert_eq!(quantile(&xs, 0.05), 0.2);
        assert_eq!(quantile(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn record_parsing() {
        assert_eq!(
            RecordSpec::parse("3:9").unwrap(),
            RecordSpec {
                start: 3,
                end: 9,
                stride: 1
            }
        );
        assert_eq!(
            RecordSpec::parse("0:100:10").unwrap().indices(55).collect::<Vec<_>>(),
            vec![0, 10, 20, 30, 40, 50]
        );
        assert!(RecordSpec::parse("9:3").is_err());
        assert!(RecordSpec::parse("1:2:0").is_err());
        assert!(RecordSpec::parse("x").is_err());
    }

    #[test]
    fn summary_of_known_values() {
        let s = summarize_values(4, vec![0.4, 0.0, 0.2, 0.2], 1);
        assert!((s.mean_z - 0.2).abs() < 1e-15);
        assert!((s.var_z - 0.08 / 3.0).abs() < 1e-15);
        assert_eq!(s.quantiles[2], 0.2);
        assert_eq!(s.extinct_frac, 0.25);
    }

    #[test]
    fn csv_layout() {
        let t = ReplicaTrace {
            replica_id: 3,
            y_series: vec![1, 2, 0],
            extinction_n: Some(2),
            site_updates: 0,
        };
        let mut buf = Vec::new();
        write_traces_csv(&mut buf, &[t], RecordSpec::all(2)).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "replica_id,n,y,z\n3,0,1,1\n3,1,2,1\n3,2,0,0\n"
        );
    }
}
