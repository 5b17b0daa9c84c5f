//! Exact law of the field on small triangles.
//!
//! Two independent routes are provided:
//!
//! * a forward recursion over anti-diagonals ([`step_distribution`]): given the
//!   law of diagonal `n`, the sites of diagonal `n + 1` are conditionally
//!   independent, each burning with the kernel probability of its neighbours;
//! * a brute-force product over every site of a triangle
//!   ([`triangle_enumeration`]), which never uses the diagonal factorisation.
//!
//! Distributions are dense tables indexed by configuration: bit `j` of the
//! index is the status of site `j` of the diagonal.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::bits::Diagonal;
use crate::model::{neighbor_statuses, Boundary, NeighborPair, Params};

/// Default cap on the diagonal index of the forward recursion (8192 configurations).
pub const DEFAULT_N_MAX_EXACT: usize = 12;
/// Default cap on the triangle size of the brute-force enumeration (21 sites).
pub const DEFAULT_N_MAX_ENUM: usize = 5;
/// Allowed deviation of a probability table's total mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

// Past this the dense tables no longer fit in memory on any reasonable machine.
const HARD_N_MAX_EXACT: usize = 26;
const HARD_N_MAX_ENUM: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("diagonal {requested} exceeds the exact limit n_max_exact = {limit}")]
    ExactLimitExceeded { requested: usize, limit: usize },
    #[error("triangle of size {requested} exceeds the enumeration limit n_max_enum = {limit}")]
    EnumLimitExceeded { requested: usize, limit: usize },
    #[error("probability table for n = {n} sums to {sum:.17}, off by more than 1e-12")]
    Normalization { n: usize, sum: f64 },
    #[error("site ({j}, {k}) is constrained more than once")]
    DuplicateSite { j: usize, k: usize },
}

/// Limits for the exact engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLimits {
    pub n_max_exact: usize,
    pub n_max_enum: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            n_max_exact: DEFAULT_N_MAX_EXACT,
            n_max_enum: DEFAULT_N_MAX_ENUM,
        }
    }
}

impl ExactLimits {
    /// Clamps the limits to what dense tables can hold.
    pub fn new(n_max_exact: usize, n_max_enum: usize) -> Self {
        ExactLimits {
            n_max_exact: n_max_exact.min(HARD_N_MAX_EXACT),
            n_max_enum: n_max_enum.min(HARD_N_MAX_ENUM),
        }
    }
}

/// Probability of every configuration of diagonal `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl DiagonalDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `probs()[c]` is the probability of configuration `c`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.probs)
    }

    pub fn check_normalized(&self) -> Result<(), ExactError> {
        let sum = self.total();
        if (sum - 1.0).abs() > NORMALIZATION_TOL || self.probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(ExactError::Normalization { n: self.n, sum });
        }
        Ok(())
    }

    /// `P{S(j, n - j) = 1}`.
    pub fn site_marginal(&self, j: usize) -> f64 {
        assert!(j <= self.n);
        self.probs
            .iter()
            .enumerate()
            .filter(|(c, _)| c >> j & 1 == 1)
            .map(|(_, &p)| p)
            .sum()
    }
}

/// Law of diagonal 0, the single site `(0, 0)`.
pub fn initial_distribution(params: &Params, boundary: &Boundary) -> DiagonalDistribution {
    let q = params.kernel(boundary.diagonal0_neighbors());
    DiagonalDistribution {
        n: 0,
        probs: vec![1.0 - q, q],
    }
}

/// Law of diagonal `dist.n() + 1` from the law of diagonal `dist.n()`.
///
/// For each predecessor configuration the successor law is a product of
/// independent Bernoulli factors, expanded into a scratch table by doubling
/// and accumulated into the result. Predecessors are visited in index order so
/// the result is bit-for-bit reproducible.
pub fn step_distribution(
    params: &Params,
    boundary: &Boundary,
    dist: &DiagonalDistribution,
    limits: ExactLimits,
) -> Result<DiagonalDistribution, ExactError> {
    let next = dist.n + 1;
    if next > limits.n_max_exact {
        return Err(ExactError::ExactLimitExceeded {
            requested: next,
            limit: limits.n_max_exact,
        });
    }
    let sites = next + 1;
    let mut out = vec![0.0; 1 << sites];
    let mut scratch = vec![0.0; 1 << sites];
    let mut kappa = vec![0.0; sites];
    for (config, &p) in dist.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let prev = Diagonal::from_config(dist.n, config as u64);
        for (j, k) in kappa.iter_mut().enumerate() {
            *k = params.kernel(neighbor_statuses(boundary, &prev, j).expect("j <= n + 1"));
        }
        scratch[0] = p;
        let mut len = 1;
        for &k in &kappa {
            for i in 0..len {
                let mass = scratch[i];
                scratch[i] = mass * (1.0 - k);
                scratch[i + len] = mass * k;
            }
            len <<= 1;
        }
        for (o, s) in out.iter_mut().zip(&scratch) {
            *o += s;
        }
    }
    let dist = DiagonalDistribution { n: next, probs: out };
    dist.check_normalized()?;
    Ok(dist)
}

/// Laws of diagonals `0..=n`.
pub fn forward(
    params: &Params,
    boundary: &Boundary,
    n: usize,
    limits: ExactLimits,
) -> Result<Vec<DiagonalDistribution>, ExactError> {
    if n > limits.n_max_exact {
        return Err(ExactError::ExactLimitExceeded {
            requested: n,
            limit: limits.n_max_exact,
        });
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(initial_distribution(params, boundary));
    for _ in 0..n {
        let next = step_distribution(params, boundary, out.last().unwrap(), limits)?;
        out.push(next);
    }
    Ok(out)
}

/// Law of `Y_n`, the number of burnt sites on diagonal `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YnPmf {
    pub n: usize,
    pub pmf: Vec<f64>,
}

impl YnPmf {
    pub fn mean_y(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(y, p)| y as f64 * p).sum()
    }

    /// `E[Z_n] = E[Y_n] / (n + 1)`.
    pub fn mean_z(&self) -> f64 {
        self.mean_y() / (self.n + 1) as f64
    }

    pub fn var_z(&self) -> f64 {
        let m = self.mean_y();
        let second: f64 = self.pmf.iter().enumerate().map(|(y, p)| (y as f64).powi(2) * p).sum();
        (second - m * m).max(0.0) / ((self.n + 1) as f64).powi(2)
    }
}

pub fn yn_pmf(dist: &DiagonalDistribution) -> YnPmf {
    let mut pmf = vec![0.0; dist.n + 2];
    for (config, &p) in dist.probs.iter().enumerate() {
        pmf[config.count_ones() as usize] += p;
    }
    YnPmf { n: dist.n, pmf }
}

/// A finite set of site constraints `S(j, k) = status`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CylinderEvent {
    constraints: BTreeMap<(usize, usize), bool>,
}

impl CylinderEvent {
    pub fn new(constraints: impl IntoIterator<Item = ((usize, usize), bool)>) -> Result<Self, ExactError> {
        let mut map = BTreeMap::new();
        for ((j, k), status) in constraints {
            if map.insert((j, k), status).is_some() {
                return Err(ExactError::DuplicateSite { j, k });
            }
        }
        Ok(CylinderEvent { constraints: map })
    }

    pub fn constraints(&self) -> &BTreeMap<(usize, usize), bool> {
        &self.constraints
    }

    /// Largest `j + k` over the constrained sites; `None` for the sure event.
    pub fn depth(&self) -> Option<usize> {
        self.constraints.keys().map(|(j, k)| j + k).max()
    }
}

/// Exact joint law of every site `(j, k)` with `j + k <= n`.
///
/// Sites are ordered by diagonal, then by `j`; bit `i` of a configuration index
/// is the status of `sites()[i]`.
#[derive(Debug, Clone)]
pub struct TriangleJoint {
    n: usize,
    sites: Vec<(usize, usize)>,
    probs: Vec<f64>,
}

impl TriangleJoint {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sites(&self) -> &[(usize, usize)] {
        &self.sites
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn site_index(&self, j: usize, k: usize) -> usize {
        let m = j + k;
        m * (m + 1) / 2 + j
    }

    /// Marginal law of diagonal `m <= n`.
    pub fn diagonal_marginal(&self, m: usize) -> DiagonalDistribution {
        assert!(m <= self.n);
        let offset = m * (m + 1) / 2;
        let mask = (1usize << (m + 1)) - 1;
        let mut probs = vec![0.0; 1 << (m + 1)];
        for (config, &p) in self.probs.iter().enumerate() {
            probs[(config >> offset) & mask] += p;
        }
        DiagonalDistribution { n: m, probs }
    }

    /// Probability of an event whose sites all lie in the triangle.
    pub fn event_probability(&self, event: &CylinderEvent) -> f64 {
        let mut care = 0usize;
        let mut want = 0usize;
        for (&(j, k), &status) in event.constraints() {
            assert!(j + k <= self.n, "site ({j}, {k}) outside triangle {}", self.n);
            let bit = 1usize << self.site_index(j, k);
            care |= bit;
            if status {
                want |= bit;
            }
        }
        self.probs
            .iter()
            .enumerate()
            .filter(|(c, _)| c & care == want)
            .map(|(_, &p)| p)
            .sum()
    }
}

/// Brute-force joint law over the triangle `j + k <= n`.
///
/// Every configuration gets the product over its sites of the kernel
/// probability of the site's own status given its two neighbours, with the
/// ignition sets standing in for the neighbours outside the quadrant.
pub fn triangle_enumeration(
    params: &Params,
    boundary: &Boundary,
    n: usize,
    limits: ExactLimits,
) -> Result<TriangleJoint, ExactError> {
    if n > limits.n_max_enum {
        return Err(ExactError::EnumLimitExceeded {
            requested: n,
            limit: limits.n_max_enum,
        });
    }
    let sites: Vec<(usize, usize)> = (0..=n).flat_map(|m| (0..=m).map(move |j| (j, m - j))).collect();
    let count = sites.len();
    let index_of = |j: usize, k: usize| {
        let m = j + k;
        m * (m + 1) / 2 + j
    };
    // For each site: where to read its neighbours (a site index or a fixed boundary value).
    enum Source {
        Site(usize),
        Fixed(bool),
    }
    let neighbours: Vec<(Source, Source)> = sites
        .iter()
        .map(|&(j, k)| {
            let left = if j >= 1 {
                Source::Site(index_of(j - 1, k))
            } else {
                Source::Fixed(boundary.burns_y(k))
            };
            let bottom = if k >= 1 {
                Source::Site(index_of(j, k - 1))
            } else {
                Source::Fixed(boundary.burns_x(j))
            };
            (left, bottom)
        })
        .collect();
    let read = |src: &Source, config: usize| match *src {
        Source::Site(i) => config >> i & 1 == 1,
        Source::Fixed(b) => b,
    };
    let mut probs = vec![0.0; 1 << count];
    for (config, slot) in probs.iter_mut().enumerate() {
        let mut p = 1.0;
        for (i, (left, bottom)) in neighbours.iter().enumerate() {
            let q = params.kernel(NeighborPair::new(read(left, config), read(bottom, config)));
            p *= if config >> i & 1 == 1 { q } else { 1.0 - q };
            if p == 0.0 {
                break;
            }
        }
        *slot = p;
    }
    Ok(TriangleJoint { n, sites, probs })
}

/// Probability of a cylinder event, by enumerating the smallest triangle holding it.
pub fn cylinder_probability(
    params: &Params,
    boundary: &Boundary,
    event: &CylinderEvent,
    limits: ExactLimits,
) -> Result<f64, ExactError> {
    let Some(depth) = event.depth() else {
        return Ok(1.0);
    };
    let joint = triangle_enumeration(params, boundary, depth, limits)?;
    Ok(joint.event_probability(event))
}

/// Deterministic pairwise summation.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
