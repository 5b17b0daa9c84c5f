//! Streaming Monte Carlo simulation, one anti-diagonal at a time.
//!
//! Site `(j, n - j)` burns iff its uniform from [`SiteStream`] falls below the
//! kernel value of its neighbours. Only two diagonals are resident. On each
//! step only the sites that can possibly burn are visited: those next to a
//! burnt site of the previous diagonal, plus the two end sites when an ignition
//! index feeds them. Every other site has both neighbours unburnt and stays 0
//! whatever its uniform is, so skipping it does not change the realisation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Diagonal;
use crate::model::{Boundary, Params};
use crate::rng::SiteStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("replica count must be at least 1")]
    NoReplicas,
    #[error("record window reaches diagonal {depth} beyond n_max = {n_max}")]
    WindowBeyondHorizon { depth: usize, n_max: usize },
    #[error("record window is empty")]
    EmptyWindow,
    #[error("burn_frequency needs a record window")]
    NoWindow,
    #[error("coupling order violated: {0}")]
    CouplingOrderViolation(String),
}

/// Inclusive rectangle of sites `j0 <= j <= j1`, `k0 <= k <= k1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteWindow {
    pub j0: usize,
    pub j1: usize,
    pub k0: usize,
    pub k1: usize,
}

impl SiteWindow {
    pub fn new(j0: usize, j1: usize, k0: usize, k1: usize) -> Result<Self, McError> {
        if j0 > j1 || k0 > k1 {
            return Err(McError::EmptyWindow);
        }
        Ok(SiteWindow { j0, j1, k0, k1 })
    }

    /// Last diagonal touched by the window.
    pub fn depth(&self) -> usize {
        self.j1 + self.k1
    }

    pub fn width(&self) -> usize {
        self.j1 - self.j0 + 1
    }

    pub fn height(&self) -> usize {
        self.k1 - self.k0 + 1
    }

    fn index(&self, j: usize, k: usize) -> usize {
        (j - self.j0) * self.height() + (k - self.k0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: Params,
    pub boundary: Boundary,
    pub n_max: usize,
    pub replicas: u64,
    pub master_seed: u64,
    pub stop_on_extinction: bool,
    pub record_sites: Option<SiteWindow>,
}

impl SimConfig {
    pub fn new(params: Params, boundary: Boundary, n_max: usize, replicas: u64, master_seed: u64) -> Self {
        SimConfig {
            params,
            boundary,
            n_max,
            replicas,
            master_seed,
            stop_on_extinction: true,
            record_sites: None,
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.replicas == 0 {
            return Err(McError::NoReplicas);
        }
        if let Some(w) = self.record_sites {
            if w.depth() > self.n_max {
                return Err(McError::WindowBeyondHorizon {
                    depth: w.depth(),
                    n_max: self.n_max,
                });
            }
        }
        Ok(())
    }
}

/// `Y_n` for `n = 0..=n_max` along one realisation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaTrace {
    pub replica_id: u64,
    pub y_series: Vec<u32>,
    /// First `n` past the last ignition index with `Y_n = 0`.
    pub extinction_n: Option<usize>,
    /// Sites whose uniform was actually consulted.
    pub site_updates: u64,
}

impl ReplicaTrace {
    pub fn n_max(&self) -> usize {
        self.y_series.len() - 1
    }

    pub fn z(&self, n: usize) -> f64 {
        self.y_series[n] as f64 / (n + 1) as f64
    }

    pub fn z_series(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.y_series.len()).map(|n| self.z(n))
    }

    pub fn extinct_by(&self, n: usize) -> bool {
        self.extinction_n.is_some_and(|e| e <= n)
    }
}

/// One lattice realisation advanced diagonal by diagonal.
struct Field<'a> {
    table: [f64; 4],
    boundary: &'a Boundary,
    cur: Diagonal,
    next: Diagonal,
}

impl<'a> Field<'a> {
    fn new(params: &Params, boundary: &'a Boundary) -> Self {
        Field {
            table: params.kernel_table(),
            boundary,
            cur: Diagonal::zeros(0),
            next: Diagonal::zeros(0),
        }
    }

    /// Sites of the next diagonal that may burn, as an inclusive index range.
    fn candidates(&self) -> Option<(usize, usize)> {
        let next_n = self.cur.n() + 1;
        let mut lo = usize::MAX;
        let mut hi = 0;
        if let Some((a, b)) = self.cur.burnt_range() {
            lo = a;
            hi = b + 1;
        }
        if self.boundary.burns_y(next_n) {
            lo = 0;
        }
        if self.boundary.burns_x(next_n) {
            lo = lo.min(next_n);
            hi = next_n;
        }
        (lo != usize::MAX).then_some((lo, hi))
    }
}

fn start<const K: usize>(fields: &mut [Field<'_>; K], stream: &mut SiteStream) -> u64 {
    stream.seek(0, 0);
    let u = stream.next_uniform();
    for f in fields.iter_mut() {
        f.cur.reset(0);
        let code = f.boundary.diagonal0_neighbors().code();
        f.cur.set(0, u < f.table[code]);
    }
    1
}

/// Advances every field by one diagonal, sharing each site's uniform between
/// fields. Returns the number of uniforms drawn.
fn advance<const K: usize>(fields: &mut [Field<'_>; K], stream: &mut SiteStream) -> u64 {
    let next_n = fields[0].cur.n() + 1;
    let mut lo = usize::MAX;
    let mut hi = 0;
    for f in fields.iter() {
        if let Some((a, b)) = f.candidates() {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    for f in fields.iter_mut() {
        f.next.reset(next_n);
    }
    if lo == usize::MAX {
        for f in fields.iter_mut() {
            std::mem::swap(&mut f.cur, &mut f.next);
        }
        return 0;
    }
    let edges: [(bool, bool); K] =
        std::array::from_fn(|i| (fields[i].boundary.burns_y(next_n), fields[i].boundary.burns_x(next_n)));
    stream.seek(next_n, lo);
    // Word by word: bit b of `left` / `bottom` is the left / bottom neighbour of
    // site 64 w + b, and the burnt sites are collected in `out`.
    for w in (lo >> 6)..=(hi >> 6) {
        let first = lo.max(w << 6) & 63;
        let last = hi.min((w << 6) | 63) & 63;
        let mut lefts = [0u64; K];
        let mut bottoms = [0u64; K];
        for (i, f) in fields.iter().enumerate() {
            let cur = f.cur.words();
            let word = |i: usize| cur.get(i).copied().unwrap_or(0);
            let (le, be) = edges[i];
            let mut left = word(w) << 1;
            if w > 0 {
                left |= word(w - 1) >> 63;
            } else {
                left |= le as u64;
            }
            let mut bottom = word(w);
            if next_n >> 6 == w && be {
                bottom |= 1u64 << (next_n & 63);
            }
            lefts[i] = left;
            bottoms[i] = bottom;
        }
        let mut out = [0u64; K];
        for b in first..=last {
            let u = stream.next_uniform();
            for i in 0..K {
                let code = ((lefts[i] >> b) & 1) | ((bottoms[i] >> b) & 1) << 1;
                out[i] |= ((u < fields[i].table[code as usize]) as u64) << b;
            }
        }
        for (f, o) in fields.iter_mut().zip(out) {
            f.next.words_mut()[w] = o;
        }
    }
    for f in fields.iter_mut() {
        std::mem::swap(&mut f.cur, &mut f.next);
    }
    (hi - lo + 1) as u64
}

/// Runs one replica, calling `visit` with every diagonal that is actually
/// simulated (diagonals after an early stop are all zero and are not visited).
pub fn run_replica<F: FnMut(&Diagonal)>(config: &SimConfig, replica_id: u64, mut visit: F) -> ReplicaTrace {
    let max_ignition = config.boundary.max_ignition();
    let mut stream = SiteStream::new(config.master_seed, replica_id);
    let mut fields = [Field::new(&config.params, &config.boundary)];
    let mut y_series = Vec::with_capacity(config.n_max + 1);
    let mut extinction_n = None;
    let mut site_updates = start(&mut fields, &mut stream);
    loop {
        let n = fields[0].cur.n();
        let y = fields[0].cur.popcount();
        visit(&fields[0].cur);
        y_series.push(y);
        if extinction_n.is_none() && y == 0 && n as i64 > max_ignition {
            extinction_n = Some(n);
        }
        if n == config.n_max {
            break;
        }
        if extinction_n.is_some() && config.stop_on_extinction {
            y_series.resize(config.n_max + 1, 0);
            break;
        }
        site_updates += advance(&mut fields, &mut stream);
    }
    ReplicaTrace {
        replica_id,
        y_series,
        extinction_n,
        site_updates,
    }
}

pub fn simulate_replica(config: &SimConfig, replica_id: u64) -> ReplicaTrace {
    run_replica(config, replica_id, |_| {})
}

/// All replicas, in replica order. Runs on the current rayon pool.
pub fn simulate(config: &SimConfig) -> Result<Vec<ReplicaTrace>, McError> {
    config.validate()?;
    Ok((0..config.replicas)
        .into_par_iter()
        .map(|r| simulate_replica(config, r))
        .collect())
}

/// Per-site burn counts over a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurnGrid {
    pub window: SiteWindow,
    pub replicas: u64,
    counts: Vec<u64>,
}

impl BurnGrid {
    pub fn count(&self, j: usize, k: usize) -> u64 {
        self.counts[self.window.index(j, k)]
    }

    pub fn frequency(&self, j: usize, k: usize) -> f64 {
        self.count(j, k) as f64 / self.replicas as f64
    }
}

pub fn burn_frequency(config: &SimConfig) -> Result<BurnGrid, McError> {
    config.validate()?;
    let window = config.record_sites.ok_or(McError::NoWindow)?;
    let mut shallow = config.clone();
    shallow.n_max = window.depth();
    let cells = window.width() * window.height();
    let counts = (0..config.replicas)
        .into_par_iter()
        .fold(
            || vec![0u64; cells],
            |mut acc, r| {
                run_replica(&shallow, r, |d| {
                    let n = d.n();
                    let (j_lo, j_hi) = (window.j0.max(n.saturating_sub(window.k1)), window.j1.min(n));
                    for j in j_lo..=j_hi {
                        let k = n - j;
                        if k >= window.k0 && d.get(j) {
                            acc[window.index(j, k)] += 1;
                        }
                    }
                });
                acc
            },
        )
        .reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(BurnGrid {
        window,
        replicas: config.replicas,
        counts,
    })
}

/// Two realisations driven by the same site uniforms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledTrace {
    pub lo: ReplicaTrace,
    pub hi: ReplicaTrace,
    /// Sites burnt in the low field but not in the high one.
    pub violations: u64,
}

fn check_coupling(lo: &SimConfig, hi: &SimConfig) -> Result<(), McError> {
    let order = |what: &str| Err(McError::CouplingOrderViolation(what.to_string()));
    if !lo.params.dominated_by(&hi.params) {
        return order("low parameters must be componentwise <= high parameters");
    }
    if !lo.boundary.fire_x().is_subset(hi.boundary.fire_x()) || !lo.boundary.fire_y().is_subset(hi.boundary.fire_y()) {
        return order("low ignition sets must be contained in the high ones");
    }
    if lo.master_seed != hi.master_seed || lo.n_max != hi.n_max || lo.replicas != hi.replicas {
        return order("seed, n_max and replica count must match");
    }
    Ok(())
}

pub fn simulate_coupled_replica(lo: &SimConfig, hi: &SimConfig, replica_id: u64) -> CoupledTrace {
    let max_ignition = [lo.boundary.max_ignition(), hi.boundary.max_ignition()];
    let mut stream = SiteStream::new(lo.master_seed, replica_id);
    let mut fields = [
        Field::new(&lo.params, &lo.boundary),
        Field::new(&hi.params, &hi.boundary),
    ];
    let mut ys = [Vec::with_capacity(lo.n_max + 1), Vec::with_capacity(lo.n_max + 1)];
    let mut extinction = [None, None];
    let mut violations = 0;
    let mut site_updates = start(&mut fields, &mut stream);
    loop {
        let n = fields[0].cur.n();
        for i in 0..2 {
            let y = fields[i].cur.popcount();
            ys[i].push(y);
            if extinction[i].is_none() && y == 0 && n as i64 > max_ignition[i] {
                extinction[i] = Some(n);
            }
        }
        violations += fields[0]
            .cur
            .words()
            .iter()
            .zip(fields[1].cur.words())
            .map(|(l, h)| (l & !h).count_ones() as u64)
            .sum::<u64>();
        if n == lo.n_max {
            break;
        }
        if lo.stop_on_extinction && extinction.iter().all(Option::is_some) {
            for y in &mut ys {
                y.resize(lo.n_max + 1, 0);
            }
            break;
        }
        site_updates += advance(&mut fields, &mut stream);
    }
    let [y_lo, y_hi] = ys;
    CoupledTrace {
        lo: ReplicaTrace {
            replica_id,
            y_series: y_lo,
            extinction_n: extinction[0],
            site_updates,
        },
        hi: ReplicaTrace {
            replica_id,
            y_series: y_hi,
            extinction_n: extinction[1],
            site_updates,
        },
        violations,
    }
}

/// Coupled runs of every replica; the high field should dominate the low one
/// at every site, and [`CoupledTrace::violations`] counts where it does not.
pub fn simulate_coupled(lo: &SimConfig, hi: &SimConfig) -> Result<Vec<CoupledTrace>, McError> {
    lo.validate()?;
    hi.validate()?;
    check_coupling(lo, hi)?;
    Ok((0..lo.replicas)
        .into_par_iter()
        .map(|r| simulate_coupled_replica(lo, hi, r))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::neighbor_statuses;

    fn p(a: f64, b: f64, g: f64) -> Params {
        Params::new(a, b, g).unwrap()
    }

    /// Straightforward simulation visiting every site, with random access to
    /// the uniforms; used to check the windowed engine.
    fn naive(config: &SimConfig, replica: u64) -> Vec<Diagonal> {
        let u = |n, j| SiteStream::uniform_at(config.master_seed, replica, n, j);
        let mut d = Diagonal::zeros(0);
        d.set(0, u(0, 0) < config.params.kernel(config.boundary.diagonal0_neighbors()));
        let mut out = vec![d.clone()];
        for n in 1..=config.n_max {
            let mut next = Diagonal::zeros(n);
            for j in 0..=n {
                let nb = neighbor_statuses(&config.boundary, &d, j).unwrap();
                next.set(j, u(n, j) < config.params.kernel(nb));
            }
            out.push(next.clone());
            d = next;
        }
        out
    }

    #[test]
    fn windowed_engine_matches_naive() {
        for (params, boundary) in [
            (p(0.5, 0.5, 0.75), Boundary::delta()),
            (p(0.7, 0.8, 0.95), Boundary::new([0, 5], [2, 40])),
            (p(0.9, 0.2, 0.9), Boundary::new([3], [])),
        ] {
            let mut config = SimConfig::new(params, boundary, 90, 8, 11);
            config.stop_on_extinction = false;
            for r in 0..8 {
                let mut seen = Vec::new();
                let trace = run_replica(&config, r, |d| seen.push(d.clone()));
                let want = naive(&config, r);
                assert_eq!(seen, want, "replica {r}");
                let ys: Vec<u32> = want.iter().map(Diagonal::popcount).collect();
                assert_eq!(trace.y_series, ys);
            }
        }
    }

    #[test]
    fn early_stop_does_not_change_trace() {
        let mut config = SimConfig::new(p(0.5, 0.5, 0.75), Boundary::new([0, 4], [1]), 60, 1, 3);
        for r in 0..50 {
            config.stop_on_extinction = true;
            let a = simulate_replica(&config, r);
            config.stop_on_extinction = false;
            let b = simulate_replica(&config, r);
            assert_eq!(a.y_series, b.y_series);
            assert_eq!(a.extinction_n, b.extinction_n);
        }
    }

    #[test]
    fn degenerate_parameters() {
        let full = SimConfig::new(p(1.0, 1.0, 1.0), Boundary::delta(), 100, 4, 1);
        for t in simulate(&full).unwrap() {
            assert!(t.z_series().all(|z| z == 1.0));
            assert_eq!(t.extinction_n, None);
        }
        let dead = SimConfig::new(p(0.0, 0.0, 0.0), Boundary::delta(), 100, 4, 1);
        for t in simulate(&dead).unwrap() {
            assert!(t.y_series.iter().all(|&y| y == 0));
            assert_eq!(t.extinction_n, Some(1));
        }
        let empty = SimConfig::new(p(1.0, 1.0, 1.0), Boundary::empty(), 10, 2, 1);
        for t in simulate(&empty).unwrap() {
            assert!(t.y_series.iter().all(|&y| y == 0));
            assert_eq!(t.extinction_n, Some(0));
        }
    }

    #[test]
    fn traces_are_reproducible() {
        let config = SimConfig::new(p(0.7, 0.7, 0.9), Boundary::delta(), 300, 16, 99);
        let a = simulate(&config).unwrap();
        let b: Vec<_> = (0..16).rev().map(|r| simulate_replica(&config, r)).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn late_ignition_restarts_fire() {
        let config = SimConfig::new(p(0.0, 0.0, 0.0), Boundary::new([0, 6], []), 10, 1, 0);
        // with zero parameters nothing burns even though S(6, -1) = 1
        assert!(simulate_replica(&config, 0).y_series.iter().all(|&y| y == 0));
        let config = SimConfig::new(p(1.0, 1.0, 1.0), Boundary::new([6], []), 10, 1, 0);
        let t = simulate_replica(&config, 0);
        assert_eq!(&t.y_series[..6], &[0; 6]);
        // (6, 0) has left (5, 0) = 0 and bottom S(6, -1) = 1, so it burns with beta = 1
        assert_eq!(t.y_series[6], 1);
        assert_eq!(t.y_series[7], 2);
        assert_eq!(t.extinction_n, None);
    }

    #[test]
    fn coupling_rejects_unordered() {
        let lo = SimConfig::new(p(0.5, 0.5, 0.75), Boundary::delta(), 10, 4, 1);
        let hi = SimConfig::new(p(0.3, 0.3, 0.4), Boundary::delta(), 10, 4, 1);
        assert!(matches!(
            simulate_coupled(&lo, &hi),
            Err(McError::CouplingOrderViolation(_))
        ));
        let hi_empty = SimConfig::new(p(0.5, 0.5, 0.75), Boundary::empty(), 10, 4, 1);
        assert!(simulate_coupled(&lo, &hi_empty).is_err());
        let mut other_seed = lo.clone();
        other_seed.master_seed = 2;
        assert!(simulate_coupled(&lo, &other_seed).is_err());
    }

    #[test]
    fn coupling_identical_configs() {
        let c = SimConfig::new(p(0.6, 0.6, 0.8), Boundary::delta(), 80, 20, 5);
        for t in simulate_coupled(&c, &c).unwrap() {
            assert_eq!(t.lo, t.hi);
            assert_eq!(t.violations, 0);
            assert_eq!(t.lo, simulate_replica(&c, t.lo.replica_id));
        }
    }

    #[test]
    fn coupled_marginals_match_single_runs() {
        let lo = SimConfig::new(p(0.3, 0.3, 0.4), Boundary::delta(), 50, 10, 8);
        let hi = SimConfig::new(p(0.6, 0.6, 0.8), Boundary::new([0, 3], [0]), 50, 10, 8);
        for t in simulate_coupled(&lo, &hi).unwrap() {
            assert_eq!(t.violations, 0);
            assert_eq!(t.lo.y_series, simulate_replica(&lo, t.lo.replica_id).y_series);
            assert_eq!(t.hi.y_series, simulate_replica(&hi, t.hi.replica_id).y_series);
        }
    }

    #[test]
    fn window_validation() {
        assert_eq!(SiteWindow::new(2, 1, 0, 0), Err(McError::EmptyWindow));
        let mut c = SimConfig::new(p(0.5, 0.5, 0.75), Boundary::delta(), 5, 1, 0);
        c.record_sites = Some(SiteWindow::new(0, 3, 0, 3).unwrap());
        assert!(matches!(
            burn_frequency(&c),
            Err(McError::WindowBeyondHorizon { depth: 6, n_max: 5 })
        ));
        c.record_sites = None;
        assert_eq!(burn_frequency(&c), Err(McError::NoWindow));
        c.replicas = 0;
        assert_eq!(simulate(&c).unwrap_err(), McError::NoReplicas);
    }

    #[test]
    fn empty_boundary_window_is_zero() {
        let mut c = SimConfig::new(p(1.0, 1.0, 1.0), Boundary::empty(), 8, 100, 0);
        c.record_sites = Some(SiteWindow::new(0, 4, 0, 4).unwrap());
        let g = burn_frequency(&c).unwrap();
        for j in 0..=4 {
            for k in 0..=4 {
                assert_eq!(g.frequency(j, k), 0.0);
            }
        }
    }

    #[test]
    fn burn_frequency_counts_sites() {
        // everything burns with all-one parameters
        let mut c = SimConfig::new(p(1.0, 1.0, 1.0), Boundary::delta(), 9, 7, 0);
        c.record_sites = Some(SiteWindow::new(1, 4, 2, 5).unwrap());
        let g = burn_frequency(&c).unwrap();
        assert_eq!(g.count(1, 2), 7);
        assert_eq!(g.count(4, 5), 7);
    }
}
