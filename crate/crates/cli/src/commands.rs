use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use pyrofield::analysis::{self, convergence_run, doubling_checkpoints, valid_grid, SweepStore, SweepTemplate};
use pyrofield::exact::{forward, triangle_enumeration, yn_pmf, ExactLimits, NORMALIZATION_TOL};
use pyrofield::one_dim::{compare, simulate_1d, OneDParams};
use pyrofield::stats::{write_traces_csv, RecordSpec, RunStats};
use pyrofield::{simulate as run_simulation, verify as checks, Boundary, Params, SimConfig};

use crate::error::{CliError, Kind};
use crate::{ConvergeArgs, ExactArgs, ModelArgs, OnedArgs, SimulateArgs, SweepArgs, VerifyArgs};

fn parse_indices(flag: &str, s: &str) -> Result<Vec<usize>, CliError> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|_| {
                CliError::usage(format!(
                    "--{flag} expects comma-separated non-negative integers, got {s:?}"
                ))
            })
        })
        .collect()
}

fn boundary(fire_x: &str, fire_y: &str) -> Result<Boundary, CliError> {
    Ok(Boundary::new(
        parse_indices("fire-x", fire_x)?,
        parse_indices("fire-y", fire_y)?,
    ))
}

fn model(args: &ModelArgs) -> Result<(Params, Boundary), CliError> {
    let params = Params::new(args.alpha, args.beta, args.gamma)?;
    Ok((params, boundary(&args.fire_x, &args.fire_y)?))
}

fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::usage("--seed is required; runs are never seeded from the clock"))
}

fn write_output(path: Option<&Path>, contents: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(contents)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s.into_bytes()
}

#[derive(Serialize)]
struct ExactReport<'a> {
    n: usize,
    ez: f64,
    var_z: f64,
    pmf: &'a [f64],
    params: Params,
    boundary: &'a Boundary,
    /// Largest disagreement with the brute-force triangle, when it was run.
    cross_check_max_diff: Option<f64>,
}

pub fn exact(args: ExactArgs) -> Result<(), CliError> {
    let (params, boundary) = model(&args.model)?;
    let limits = ExactLimits::new(args.n_max_exact, args.n_max_enum);
    let dists = forward(&params, &boundary, args.n, limits)?;
    let dist = dists.last().expect("n + 1 diagonals");
    let pmf = yn_pmf(dist);
    let pmf_total: f64 = pmf.pmf.iter().sum();
    if (pmf_total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(CliError::internal(format!(
            "pmf of Y_{} sums to {pmf_total:.17}",
            args.n
        )));
    }
    let cross_check_max_diff = if args.n <= limits.n_max_enum {
        let joint = triangle_enumeration(&params, &boundary, args.n, limits)?;
        let diff = dists
            .iter()
            .flat_map(|d| {
                let m = joint.diagonal_marginal(d.n());
                d.probs()
                    .iter()
                    .zip(m.probs().to_vec())
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0f64, f64::max);
        if diff > NORMALIZATION_TOL {
            return Err(CliError::internal(format!(
                "forward recursion and triangle enumeration disagree by {diff:e}"
            )));
        }
        Some(diff)
    } else {
        None
    };
    if let Some(path) = &args.csv {
        let write = || -> io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(path)?);
            writeln!(w, "config_index,probability")?;
            for (c, p) in dist.probs().iter().enumerate() {
                writeln!(w, "{c},{p}")?;
            }
            w.flush()
        };
        write().map_err(|e| CliError::io(path, e))?;
    }
    let report = ExactReport {
        n: args.n,
        ez: pmf.mean_z(),
        var_z: pmf.var_z(),
        pmf: &pmf.pmf,
        params,
        boundary: &boundary,
        cross_check_max_diff,
    };
    write_output(args.out.as_deref(), &json_line(&report))
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let (params, boundary) = model(&args.model)?;
    let seed = require_seed(args.seed)?;
    let record = match &args.record {
        Some(s) => RecordSpec::parse(s).map_err(|e| CliError::usage(e.to_string()))?,
        None => RecordSpec::all(args.n_max),
    };
    if record.start > args.n_max {
        return Err(CliError::usage(format!(
            "--record starts at {} beyond --n-max {}",
            record.start, args.n_max
        )));
    }
    let mut config = SimConfig::new(params, boundary, args.n_max, args.replicas, seed);
    config.stop_on_extinction = !args.no_early_stop;

    let start = Instant::now();
    let traces = run_simulation(&config)?;
    let secs = start.elapsed().as_secs_f64();
    if args.timing {
        let updates: u64 = traces.iter().map(|t| t.site_updates).sum();
        eprintln!(
            "TIMING site_updates={updates} seconds={secs:.3} per_minute={:.4e}",
            updates as f64 / secs.max(1e-9) * 60.0
        );
    }

    let as_csv = args
        .out
        .as_deref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if as_csv {
        let path = args.out.as_deref().unwrap();
        let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        write_traces_csv(BufWriter::new(file), &traces, record).map_err(|e| CliError::io(path, e))
    } else {
        let mut json = RunStats::from_traces(&config, &traces, record).to_json();
        json.push('\n');
        write_output(args.out.as_deref(), json.as_bytes())
    }
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let boundary = boundary(&args.fire_x, &args.fire_y)?;
    let seed = require_seed(args.seed)?;
    if args.replicas == 0 {
        return Err(CliError::usage("--replicas must be at least 1"));
    }
    let grid = valid_grid(args.resolution)?;
    let template = SweepTemplate {
        boundary,
        checkpoint: args.n_max,
        replicas: args.replicas,
        master_seed: seed,
    };
    let store = SweepStore {
        path: PathBuf::from(&args.out),
        resume: args.resume,
    };
    let result = analysis::run_sweep(&grid, &template, Some(&store))?;
    for f in &result.failures {
        eprintln!(
            "ERROR io: cell {} (alpha={}, beta={}, gamma={}): {}",
            f.index,
            f.params.alpha(),
            f.params.beta(),
            f.params.gamma(),
            f.error
        );
    }
    println!(
        "sweep: {} cells, {} reused, {} simulated, {} failures -> {}",
        grid.len(),
        result.reused,
        result.cells.len() - result.reused,
        result.failures.len(),
        args.out.display()
    );
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(
            Kind::Io,
            format!("{} sweep cells failed", result.failures.len()),
        ))
    }
}

pub fn oned(args: OnedArgs) -> Result<(), CliError> {
    let params = OneDParams::new(args.p)?;
    let seed = require_seed(args.seed)?;
    let sample = simulate_1d(&params, args.replicas, seed)?;
    let report = compare(&params, &sample, seed, args.max_tail)?;
    write_output(args.out.as_deref(), &json_line(&report))
}

pub fn converge(args: ConvergeArgs) -> Result<(), CliError> {
    let (params, boundary) = model(&args.model)?;
    let seed = require_seed(args.seed)?;
    let checkpoints = match &args.checkpoints {
        Some(list) => list.clone(),
        None => doubling_checkpoints(args.first, args.last)?,
    };
    let last = *checkpoints
        .last()
        .ok_or_else(|| CliError::usage("--checkpoints is empty"))?;
    let config = SimConfig::new(params, boundary, last, args.replicas, seed);
    let report = convergence_run(&config, &checkpoints, &args.epsilons)?;
    write_output(args.out.as_deref(), &json_line(&report))
}

pub fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let outcomes = checks::run_with(args.seed, |o| println!("{}", o.line()));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::new(
            Kind::Verification,
            format!("{failed} of {} checks failed", outcomes.len()),
        ))
    }
}
