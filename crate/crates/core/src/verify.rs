//! Self-verification: the cross-checks run by `pyrofield verify`.
//!
//! Each check returns a [`CheckOutcome`]; thresholds are fixed constants.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    self, convergence_run, doubling_checkpoints, valid_grid, SweepStore, SweepTemplate, DEFAULT_EPSILONS,
};
use crate::exact::{cylinder_probability, forward, triangle_enumeration, yn_pmf, CylinderEvent, ExactLimits};
use crate::mc::{burn_frequency, simulate, simulate_coupled, ReplicaTrace, SimConfig, SiteWindow};
use crate::model::{Boundary, Params};
use crate::one_dim::{compare, simulate_1d, OneDParams};
use crate::stats::{write_traces_csv, RecordSpec, RunStats};

pub const EXACT_TOL: f64 = 1e-12;
pub const Z_LIMIT: f64 = 3.0;
/// Site updates per minute required of the single-threaded simulator.
pub const MIN_SITE_UPDATES_PER_MINUTE: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let t = Instant::now();
    let (passed, detail) = f();
    CheckOutcome {
        id,
        name,
        passed,
        detail,
        elapsed: t.elapsed(),
    }
}

/// A parameter triple drawn uniformly in alpha and beta, then in gamma over
/// its admissible interval.
pub fn random_params<R: Rng>(rng: &mut R) -> Params {
    loop {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let lo = a.max(b);
        let hi = (a + b).min(1.0);
        let g = lo + rng.random::<f64>() * (hi - lo);
        if let Ok(p) = Params::new(a, b, g) {
            return p;
        }
    }
}

/// Ordered pair `lo <= hi`: `hi` is random, `lo` shrinks every entry and is
/// redrawn until it is admissible.
pub fn random_ordered_pair<R: Rng>(rng: &mut R) -> (Params, Params) {
    let hi = random_params(rng);
    loop {
        let s: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        if let Ok(lo) = Params::new(hi.alpha() * s[0], hi.beta() * s[1], hi.gamma() * s[2]) {
            return (lo, hi);
        }
    }
}

/// Number of traces in which a zero diagonal past the last ignition is
/// followed by a non-zero one.
pub fn absorption_violations(traces: &[ReplicaTrace], max_ignition: i64) -> usize {
    traces
        .iter()
        .filter(|t| {
            let first_zero = t
                .y_series
                .iter()
                .enumerate()
                .position(|(n, &y)| y == 0 && n as i64 > max_ignition);
            first_zero.is_some_and(|z| t.y_series[z..].iter().any(|&y| y != 0))
        })
        .count()
}

pub fn oracle_boundaries() -> [Boundary; 3] {
    [Boundary::delta(), Boundary::empty(), Boundary::new([0, 2], [0])]
}

/// 1. Diagonal marginals of the brute-force triangle equal the forward recursion.
pub fn check_oracle_equivalence(seed: u64) -> CheckOutcome {
    timed(1, "oracle equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limits = ExactLimits::default();
        let mut worst: f64 = 0.0;
        let start = Instant::now();
        for _ in 0..20 {
            let params = random_params(&mut rng);
            for b in oracle_boundaries() {
                let joint = triangle_enumeration(&params, &b, 5, limits).expect("n = 5 within limits");
                let dists = forward(&params, &b, 5, limits).expect("n = 5 within limits");
                for d in &dists {
                    let m = joint.diagonal_marginal(d.n());
                    for (x, y) in d.probs().iter().zip(m.probs()) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        (
            worst <= EXACT_TOL && secs < 60.0,
            format!("60 triangles, max |diff| = {worst:.2e}, {secs:.1} s"),
        )
    })
}

/// The two sides of the worked identity
/// `P{S22=1, S12=0, S11=1} = beta P{S12=0, S21=1, S11=1}`.
pub fn cylinder_identity_sides(params: &Params, boundary: &Boundary) -> (f64, f64) {
    let limits = ExactLimits::default();
    let lhs = CylinderEvent::new([((2, 2), true), ((1, 2), false), ((1, 1), true)]).unwrap();
    let rhs = CylinderEvent::new([((1, 2), false), ((2, 1), true), ((1, 1), true)]).unwrap();
    (
        cylinder_probability(params, boundary, &lhs, limits).unwrap(),
        params.beta() * cylinder_probability(params, boundary, &rhs, limits).unwrap(),
    )
}

/// 2. The worked identity holds for random parameters.
pub fn check_cylinder_identity(seed: u64) -> CheckOutcome {
    timed(2, "cylinder identity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let (l, r) = cylinder_identity_sides(&random_params(&mut rng), &Boundary::delta());
            worst = worst.max((l - r).abs());
        }
        (
            worst <= EXACT_TOL,
            format!("20 parameter draws, max |diff| = {worst:.2e}"),
        )
    })
}

/// Parameters used for the row/column law check; alpha and beta differ so a
/// swapped axis would show.
pub fn axis_law_params() -> Params {
    Params::new(0.6, 0.8, 0.9).unwrap()
}

/// 3. `P{S(0,k)=1} = gamma beta^k` and `P{S(j,0)=1} = gamma alpha^j`, exactly and by simulation.
pub fn check_axis_laws(seed: u64, replicas: u64) -> CheckOutcome {
    timed(3, "column/row laws", || {
        let params = axis_law_params();
        let b = Boundary::delta();
        let limits = ExactLimits::default();
        let col = |k: usize| params.gamma() * params.beta().powi(k as i32);
        let row = |j: usize| params.gamma() * params.alpha().powi(j as i32);
        let dists = forward(&params, &b, 10, limits).expect("n = 10 within limits");
        let mut worst_exact: f64 = 0.0;
        for (k, d) in dists.iter().enumerate() {
            // (0, k) is site 0 of diagonal k, (k, 0) is site k
            worst_exact = worst_exact.max((d.site_marginal(0) - col(k)).abs());
            worst_exact = worst_exact.max((d.site_marginal(k) - row(k)).abs());
        }
        for k in 0..=5 {
            let c = CylinderEvent::new([((0, k), true)]).unwrap();
            let r = CylinderEvent::new([((k, 0), true)]).unwrap();
            worst_exact = worst_exact.max((cylinder_probability(&params, &b, &c, limits).unwrap() - col(k)).abs());
            worst_exact = worst_exact.max((cylinder_probability(&params, &b, &r, limits).unwrap() - row(k)).abs());
        }
        let mut config = SimConfig::new(params, b, 20, replicas, seed);
        config.record_sites = Some(SiteWindow::new(0, 10, 0, 10).unwrap());
        let grid = burn_frequency(&config).expect("valid window");
        let n = replicas as f64;
        let mut worst_z: f64 = 0.0;
        for k in 0..=10 {
            for (freq, exact) in [(grid.frequency(0, k), col(k)), (grid.frequency(k, 0), row(k))] {
                let se = (exact * (1.0 - exact) / n).sqrt();
                worst_z = worst_z.max((freq - exact).abs() / se);
            }
        }
        (
            worst_exact <= EXACT_TOL && worst_z <= Z_LIMIT,
            format!("exact max |diff| = {worst_exact:.2e}, MC max |z| = {worst_z:.2} over {replicas} replicas"),
        )
    })
}

/// 4. Moments and tails of the 1D burnt count.
pub fn check_one_dim(seed: u64, replicas: u64) -> CheckOutcome {
    timed(4, "1D closed forms", || {
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for p in [0.3, 0.5, 0.9] {
            let params = OneDParams::new(p).unwrap();
            let sample = simulate_1d(&params, replicas, seed).expect("p < 1");
            let rep = compare(&params, &sample, seed, 20).expect("p < 1");
            let z = rep
                .z_scores
                .tails
                .iter()
                .fold(rep.z_scores.mean.abs().max(rep.z_scores.var.abs()), |m, t| {
                    m.max(t.abs())
                });
            parts.push(format!(
                "p={p}: mean {:.4} var {:.4} max|z| {z:.2}",
                rep.empirical.mean, rep.empirical.var
            ));
            worst = worst.max(z);
        }
        (worst <= Z_LIMIT, parts.join("; "))
    })
}

/// 5. Sample mean of `Z_10` against the exact value, in exact standard errors.
pub fn check_mc_vs_exact(seed: u64, replicas: u64) -> CheckOutcome {
    timed(5, "MC vs exact", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut absorbing = 0;
        for i in 0..5 {
            let params = random_params(&mut rng);
            let b = Boundary::delta();
            let exact = yn_pmf(
                forward(&params, &b, 10, ExactLimits::default())
                    .unwrap()
                    .last()
                    .unwrap(),
            );
            let config = SimConfig::new(params, b.clone(), 10, replicas, seed.wrapping_add(i));
            let traces = simulate(&config).unwrap();
            absorbing += absorption_violations(&traces, b.max_ignition());
            let mean = traces.iter().map(|t| t.z(10)).sum::<f64>() / replicas as f64;
            let se = (exact.var_z() / replicas as f64).sqrt();
            let z = if se > 0.0 {
                (mean - exact.mean_z()).abs() / se
            } else if mean == exact.mean_z() {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        (
            worst <= Z_LIMIT && absorbing == 0,
            format!("5 parameter draws, max |z| = {worst:.2}, absorption violations {absorbing}"),
        )
    })
}

/// 6. Coupled fields with ordered parameters (or nested ignition sets) are ordered at every site.
pub fn check_coupling(seed: u64, replicas: u64, n_max: usize) -> CheckOutcome {
    timed(6, "coupling domination", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = |a, b, g| Params::new(a, b, g).unwrap();
        let mut pairs = vec![
            (
                p(0.3, 0.3, 0.4),
                Boundary::delta(),
                p(0.5, 0.5, 0.75),
                Boundary::delta(),
            ),
            (p(0.7, 0.7, 0.9), Boundary::empty(), p(0.7, 0.7, 0.9), Boundary::delta()),
            (
                p(0.6, 0.7, 0.8),
                Boundary::new([0], [0]),
                p(0.7, 0.8, 0.95),
                Boundary::new([0, 3], [0, 9]),
            ),
        ];
        for _ in 0..2 {
            let (lo, hi) = random_ordered_pair(&mut rng);
            pairs.push((lo, Boundary::delta(), hi, Boundary::delta()));
        }
        let mut violations = 0;
        let mut absorbing = 0;
        for (lo_p, lo_b, hi_p, hi_b) in pairs.iter().cloned() {
            let lo = SimConfig::new(lo_p, lo_b, n_max, replicas, seed);
            let hi = SimConfig::new(hi_p, hi_b, n_max, replicas, seed);
            let out = simulate_coupled(&lo, &hi).expect("ordered pair");
            violations += out.iter().map(|t| t.violations).sum::<u64>();
            let (los, his): (Vec<_>, Vec<_>) = out.into_iter().map(|t| (t.lo, t.hi)).unzip();
            absorbing += absorption_violations(&los, lo.boundary.max_ignition())
                + absorption_violations(&his, hi.boundary.max_ignition());
        }
        (
            violations == 0 && absorbing == 0,
            format!("{} pairs x {replicas} replicas to n = {n_max}: {violations} domination violations, {absorbing} absorption violations", pairs.len()),
        )
    })
}

/// 7. No zero diagonal past the last ignition is ever followed by fire.
pub fn check_absorption(seed: u64, replicas: u64) -> CheckOutcome {
    timed(7, "extinction absorption", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boundaries = [
            Boundary::delta(),
            Boundary::new([0, 2], [0]),
            Boundary::new([1, 7], [4, 30]),
            Boundary::empty(),
        ];
        let mut violations = 0;
        let mut extinct = 0;
        let mut traces_seen = 0;
        for (i, b) in boundaries.iter().enumerate() {
            for _ in 0..3 {
                let mut config = SimConfig::new(random_params(&mut rng), b.clone(), 400, replicas, seed + i as u64);
                config.stop_on_extinction = false;
                let traces = simulate(&config).unwrap();
                violations += absorption_violations(&traces, b.max_ignition());
                extinct += traces.iter().filter(|t| t.extinction_n.is_some()).count();
                traces_seen += traces.len();
            }
        }
        (
            violations == 0,
            format!("{traces_seen} full-length traces, {extinct} extinct, {violations} violations"),
        )
    })
}

fn render_simulation(config: &SimConfig) -> (Vec<u8>, String) {
    let traces = simulate(config).unwrap();
    let mut csv = Vec::new();
    write_traces_csv(&mut csv, &traces, RecordSpec::all(config.n_max)).unwrap();
    (
        csv,
        RunStats::from_traces(config, &traces, RecordSpec::all(config.n_max)).to_json(),
    )
}

/// 8. Outputs do not depend on the number of worker threads.
pub fn check_determinism(seed: u64) -> CheckOutcome {
    timed(8, "determinism", || {
        let config = SimConfig::new(Params::new(0.7, 0.7, 0.9).unwrap(), Boundary::delta(), 300, 64, seed);
        let grid = valid_grid(3).unwrap();
        let template = SweepTemplate {
            boundary: Boundary::delta(),
            checkpoint: 60,
            replicas: 40,
            master_seed: seed,
        };
        let dir = std::env::temp_dir().join(format!("pyrofield-verify-{}-{seed}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut outputs = Vec::new();
        for threads in [1, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let path = dir.join(format!("sweep-{threads}.csv"));
            let store = SweepStore {
                path: path.clone(),
                resume: false,
            };
            let (sim, sweep) = pool.install(|| {
                let sim = render_simulation(&config);
                analysis::run_sweep(&grid, &template, Some(&store)).unwrap();
                (sim, std::fs::read(&path).unwrap())
            });
            outputs.push((sim, sweep));
        }
        // resuming a finished sweep must leave the file untouched
        let store = SweepStore {
            path: dir.join("sweep-1.csv"),
            resume: true,
        };
        let resumed = analysis::run_sweep(&grid, &template, Some(&store)).unwrap();
        let after = std::fs::read(&store.path).unwrap();
        let _ = std::fs::remove_dir_all(&dir);
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        let resume_ok = resumed.reused == grid.len() && after == outputs[0].1;
        (
            same && resume_ok,
            format!("traces, stats and sweep identical under 1/2/8 threads: {same}; resume no-op: {resume_ok}"),
        )
    })
}

/// Parameters for the throughput run: supercritical, so the fire keeps a wide front.
pub fn throughput_params() -> Params {
    Params::new(0.75, 0.75, 0.9).unwrap()
}

/// 9. Single-threaded site updates per minute of the streaming simulator.
pub fn check_throughput(seed: u64, n_max: usize, replicas: u64) -> CheckOutcome {
    timed(9, "throughput", || {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let config = SimConfig::new(throughput_params(), Boundary::delta(), n_max, replicas, seed);
        let start = Instant::now();
        let traces = pool.install(|| simulate(&config).unwrap());
        let secs = start.elapsed().as_secs_f64();
        let updates: u64 = traces.iter().map(|t| t.site_updates).sum();
        let per_minute = updates as f64 / secs * 60.0;
        (
            per_minute >= MIN_SITE_UPDATES_PER_MINUTE,
            format!("{updates} site updates in {secs:.2} s = {per_minute:.3e} per minute"),
        )
    })
}

/// Structural checks on a convergence report.
pub fn convergence_schema_problems(
    rep: &analysis::ConvergenceReport,
    checkpoints: &[usize],
    epsilons: &[f64],
) -> Vec<String> {
    let mut problems = Vec::new();
    if rep.checkpoints.iter().map(|c| c.n).collect::<Vec<_>>() != checkpoints {
        problems.push("checkpoint list".to_string());
    }
    if rep.epsilons != epsilons {
        problems.push("epsilon list".to_string());
    }
    if rep.cauchy.len() + 1 != checkpoints.len() {
        problems.push("cauchy row count".to_string());
    }
    for row in &rep.cauchy {
        if row.fractions.len() != epsilons.len() || row.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            problems.push(format!("cauchy row {}", row.m));
        }
    }
    for c in &rep.checkpoints {
        let q = &c.quantiles;
        let ordered = q.windows(2).all(|w| w[0] <= w[1]);
        if !ordered
            || !(0.0..=1.0).contains(&c.mean_z)
            || q[0] < 0.0
            || q[4] > 1.0
            || !(0.0..=1.0).contains(&c.extinct_frac)
        {
            problems.push(format!("checkpoint {}", c.n));
        }
    }
    if rep.non_increasing.len() != epsilons.len() {
        problems.push("monotonicity flags".to_string());
    }
    problems
}

/// 10. Convergence tables at 250..2000 within the time budget.
pub fn check_convergence(seed: u64, replicas: u64) -> CheckOutcome {
    timed(10, "convergence diagnostics", || {
        let config = SimConfig::new(
            Params::new(0.7, 0.7, 0.9).unwrap(),
            Boundary::delta(),
            2000,
            replicas,
            seed,
        );
        let checkpoints = doubling_checkpoints(250, 2000).unwrap();
        let start = Instant::now();
        let rep = convergence_run(&config, &checkpoints, &DEFAULT_EPSILONS).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let problems = convergence_schema_problems(&rep, &checkpoints, &DEFAULT_EPSILONS);
        let last = rep
            .cauchy
            .last()
            .map(|r| format!("{:?}", r.fractions))
            .unwrap_or_default();
        (
            problems.is_empty() && secs < 600.0,
            format!("{replicas} replicas in {secs:.1} s, schema problems {problems:?}, last Cauchy row {last}"),
        )
    })
}

/// Every check at its acceptance scale.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    run_with(seed, |_| {})
}

/// Like [`run_all`], reporting each outcome as soon as it is known.
pub fn run_with(seed: u64, mut report: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let checks: Vec<Box<dyn FnOnce() -> CheckOutcome>> = vec![
        Box::new(move || check_oracle_equivalence(seed)),
        Box::new(move || check_cylinder_identity(seed)),
        Box::new(move || check_axis_laws(seed, 1_000_000)),
        Box::new(move || check_one_dim(seed, 1_000_000)),
        Box::new(move || check_mc_vs_exact(seed, 100_000)),
        Box::new(move || check_coupling(seed, 10_000, 200)),
        Box::new(move || check_absorption(seed, 2_000)),
        Box::new(move || check_determinism(seed)),
        Box::new(move || check_throughput(seed, 20_000, 50)),
        Box::new(move || check_convergence(seed, 10_000)),
    ];
    checks
        .into_iter()
        .map(|c| {
            let o = c();
            report(&o);
            o
        })
        .collect()
}
