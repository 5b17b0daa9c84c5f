//! Parameters, boundary conditions and the local burn kernel.
//!
//! Sites live on the quarter lattice `(j, k)` with `j, k >= 0`. A site's status
//! depends only on its left neighbour `(j - 1, k)` and its bottom neighbour
//! `(j, k - 1)`. Sites are processed by anti-diagonal: diagonal `n` holds the
//! sites `(j, n - j)` for `0 <= j <= n`, so bit `j` of a diagonal is `S(j, n - j)`.
//!
//! The only sites with a negative coordinate that are ever consulted are the
//! ignition rows `S(j, -1)` and `S(-1, k)`; everything further out is zero and
//! is never represented.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Diagonal;

/// One of the inequalities a parameter triple has to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    AlphaNonNegative,
    BetaNonNegative,
    AlphaAtMostGamma,
    BetaAtMostGamma,
    GammaAtMostOne,
    GammaAtMostAlphaPlusBeta,
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Inequality::AlphaNonNegative => "alpha >= 0",
            Inequality::BetaNonNegative => "beta >= 0",
            Inequality::AlphaAtMostGamma => "alpha <= gamma",
            Inequality::BetaAtMostGamma => "beta <= gamma",
            Inequality::GammaAtMostOne => "gamma <= 1",
            Inequality::GammaAtMostAlphaPlusBeta => "gamma <= alpha + beta",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter {name} is not a finite number ({value})")]
    NotFinite { name: &'static str, value: f64 },
    #[error("constraint violated: {which} (alpha = {alpha}, beta = {beta}, gamma = {gamma})")]
    ConstraintViolation {
        which: Inequality,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
}

impl ParamError {
    /// The violated inequality, if the error is a constraint violation.
    pub fn violated(&self) -> Option<Inequality> {
        match self {
            ParamError::ConstraintViolation { which, .. } => Some(*which),
            ParamError::NotFinite { .. } => None,
        }
    }
}

/// The burn probabilities `(alpha, beta, gamma)`.
///
/// `alpha` applies when only the left neighbour burns, `beta` when only the
/// bottom neighbour burns and `gamma` when both do. A `Params` value always
/// satisfies `0 <= alpha, beta <= gamma <= min(1, alpha + beta)`; the check is a
/// plain IEEE comparison without tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl Params {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, ParamError> {
        for (name, value) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !value.is_finite() {
                return Err(ParamError::NotFinite { name, value });
            }
        }
        let checks = [
            (alpha >= 0.0, Inequality::AlphaNonNegative),
            (beta >= 0.0, Inequality::BetaNonNegative),
            (gamma <= 1.0, Inequality::GammaAtMostOne),
            (alpha <= gamma, Inequality::AlphaAtMostGamma),
            (beta <= gamma, Inequality::BetaAtMostGamma),
            (gamma <= alpha + beta, Inequality::GammaAtMostAlphaPlusBeta),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some(&(_, which)) => Err(ParamError::ConstraintViolation {
                which,
                alpha,
                beta,
                gamma,
            }),
            None => Ok(Params { alpha, beta, gamma }),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Probability that a site burns given its two neighbours.
    #[inline]
    pub fn kernel(&self, nb: NeighborPair) -> f64 {
        match (nb.left, nb.bottom) {
            (false, false) => 0.0,
            (true, false) => self.alpha,
            (false, true) => self.beta,
            (true, true) => self.gamma,
        }
    }

    /// Kernel values indexed by [`NeighborPair::code`].
    #[inline]
    pub fn kernel_table(&self) -> [f64; 4] {
        [0.0, self.alpha, self.beta, self.gamma]
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &Params) -> bool {
        self.alpha <= other.alpha && self.beta <= other.beta && self.gamma <= other.gamma
    }
}

impl<'de> Deserialize<'de> for Params {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            alpha: f64,
            beta: f64,
            gamma: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        Params::new(raw.alpha, raw.beta, raw.gamma).map_err(serde::de::Error::custom)
    }
}

/// Statuses of the two neighbours `(j - 1, k)` and `(j, k - 1)` of a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighborPair {
    pub left: bool,
    pub bottom: bool,
}

impl NeighborPair {
    pub const fn new(left: bool, bottom: bool) -> Self {
        NeighborPair { left, bottom }
    }

    /// `left + 2 * bottom`, the index into [`Params::kernel_table`].
    #[inline]
    pub const fn code(self) -> usize {
        self.left as usize | (self.bottom as usize) << 1
    }
}

/// Finite ignition sets: `S(j, -1) = 1` iff `j` is in `fire_x`, `S(-1, k) = 1`
/// iff `k` is in `fire_y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    fire_x: BTreeSet<usize>,
    fire_y: BTreeSet<usize>,
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::delta()
    }
}

impl Boundary {
    pub fn new(fire_x: impl IntoIterator<Item = usize>, fire_y: impl IntoIterator<Item = usize>) -> Self {
        Boundary {
            fire_x: fire_x.into_iter().collect(),
            fire_y: fire_y.into_iter().collect(),
        }
    }

    /// The Kronecker-delta boundary: only `S(0, -1)` and `S(-1, 0)` burn.
    pub fn delta() -> Self {
        Boundary::new([0], [0])
    }

    /// No ignition at all; every site stays unburnt.
    pub fn empty() -> Self {
        Boundary::new([], [])
    }

    pub fn fire_x(&self) -> &BTreeSet<usize> {
        &self.fire_x
    }

    pub fn fire_y(&self) -> &BTreeSet<usize> {
        &self.fire_y
    }

    /// Whether `S(j, -1) = 1`.
    #[inline]
    pub fn burns_x(&self, j: usize) -> bool {
        self.fire_x.contains(&j)
    }

    /// Whether `S(-1, k) = 1`.
    #[inline]
    pub fn burns_y(&self, k: usize) -> bool {
        self.fire_y.contains(&k)
    }

    /// Largest ignition index, or -1 when both sets are empty.
    pub fn max_ignition(&self) -> i64 {
        self.fire_x
            .iter()
            .chain(self.fire_y.iter())
            .max()
            .map_or(-1, |&m| m as i64)
    }

    /// Whether some boundary site feeds diagonal `n`, i.e. `n` is in either set.
    #[inline]
    pub fn ignites_diagonal(&self, n: usize) -> bool {
        self.burns_x(n) || self.burns_y(n)
    }

    /// Neighbours of the corner site `(0, 0)`.
    pub fn diagonal0_neighbors(&self) -> NeighborPair {
        NeighborPair::new(self.burns_y(0), self.burns_x(0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("site index {j} out of range for diagonal {n}")]
pub struct SiteIndexError {
    pub n: usize,
    pub j: usize,
}

/// Neighbours of site `j` on diagonal `prev.n() + 1`, i.e. of `(j, prev.n() + 1 - j)`.
///
/// The left neighbour of `j = 0` and the bottom neighbour of `j = n + 1` come
/// from the ignition sets.
pub fn neighbor_statuses(boundary: &Boundary, prev: &Diagonal, j: usize) -> Result<NeighborPair, SiteIndexError> {
    let n = prev.n();
    let next = n + 1;
    if j > next {
        return Err(SiteIndexError { n: next, j });
    }
    let left = if j >= 1 {
        prev.get(j - 1)
    } else {
        boundary.burns_y(next)
    };
    let bottom = if j <= n { prev.get(j) } else { boundary.burns_x(next) };
    Ok(NeighborPair { left, bottom })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_examples() {
        assert!(Params::new(0.5, 0.5, 0.75).is_ok());
        assert_eq!(
            Params::new(0.2, 0.3, 0.6).unwrap_err().violated(),
            Some(Inequality::GammaAtMostAlphaPlusBeta)
        );
        assert_eq!(
            Params::new(0.4, 0.3, 0.2).unwrap_err().violated(),
            Some(Inequality::AlphaAtMostGamma)
        );
        assert_eq!(
            Params::new(0.5, 0.5, 2.0).unwrap_err().violated(),
            Some(Inequality::GammaAtMostOne)
        );
        assert_eq!(
            Params::new(-0.1, 0.5, 0.5).unwrap_err().violated(),
            Some(Inequality::AlphaNonNegative)
        );
        assert!(matches!(
            Params::new(f64::NAN, 0.5, 0.5),
            Err(ParamError::NotFinite { name: "alpha", .. })
        ));
        // Edge points of the region are admitted.
        assert!(Params::new(0.0, 0.0, 0.0).is_ok());
        assert!(Params::new(1.0, 0.0, 1.0).is_ok());
        assert!(Params::new(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn error_message_names_inequality() {
        let msg = Params::new(0.5, 0.5, 2.0).unwrap_err().to_string();
        assert!(msg.contains("gamma <= 1"), "{msg}");
    }

    #[test]
    fn kernel_table_entries() {
        let p = Params::new(0.5, 0.25, 0.75).unwrap();
        assert_eq!(p.kernel(NeighborPair::new(false, false)), 0.0);
        assert_eq!(p.kernel(NeighborPair::new(true, false)), 0.5);
        assert_eq!(p.kernel(NeighborPair::new(false, true)), 0.25);
        assert_eq!(p.kernel(NeighborPair::new(true, true)), 0.75);
        for (l, b) in [(false, false), (true, false), (false, true), (true, true)] {
            let nb = NeighborPair::new(l, b);
            assert_eq!(p.kernel_table()[nb.code()], p.kernel(nb));
        }
    }

    #[test]
    fn deserialize_validates() {
        let ok: Params = serde_json::from_str(r#"{"alpha":0.5,"beta":0.5,"gamma":0.75}"#).unwrap();
        assert_eq!(ok.gamma(), 0.75);
        assert!(serde_json::from_str::<Params>(r#"{"alpha":0.5,"beta":0.5,"gamma":1.5}"#).is_err());
    }

    #[test]
    fn boundary_basics() {
        assert_eq!(Boundary::empty().max_ignition(), -1);
        assert_eq!(Boundary::delta().max_ignition(), 0);
        assert_eq!(Boundary::new([0, 3, 7], [0]).max_ignition(), 7);
        assert_eq!(Boundary::new([], [4]).max_ignition(), 4);
    }

    #[test]
    fn corner_neighbors() {
        assert_eq!(Boundary::delta().diagonal0_neighbors(), NeighborPair::new(true, true));
        assert_eq!(Boundary::empty().diagonal0_neighbors(), NeighborPair::new(false, false));
        assert_eq!(
            Boundary::new([2], []).diagonal0_neighbors(),
            NeighborPair::new(false, false)
        );
        assert_eq!(
            Boundary::new([0], []).diagonal0_neighbors(),
            NeighborPair::new(false, true)
        );
    }

    #[test]
    fn neighbor_examples() {
        let delta = Boundary::delta();
        let d0 = Diagonal::from_bits(0, &[true]);
        assert_eq!(
            neighbor_statuses(&delta, &d0, 0).unwrap(),
            NeighborPair::new(false, true)
        );
        assert_eq!(
            neighbor_statuses(&delta, &d0, 1).unwrap(),
            NeighborPair::new(true, false)
        );
        assert!(neighbor_statuses(&delta, &d0, 2).is_err());

        let b = Boundary::new([0, 3], [0]);
        let d2 = Diagonal::zeros(2);
        assert_eq!(neighbor_statuses(&b, &d2, 3).unwrap(), NeighborPair::new(false, true));
        assert_eq!(neighbor_statuses(&b, &d2, 0).unwrap(), NeighborPair::new(false, false));
    }

    #[test]
    fn interior_neighbors_read_previous_diagonal() {
        // diagonal 2 = S(0,2), S(1,1), S(2,0) = 1, 0, 1
        let d = Diagonal::from_bits(2, &[true, false, true]);
        let b = Boundary::empty();
        // (1,2): left (0,2)=1, bottom (1,1)=0
        assert_eq!(neighbor_statuses(&b, &d, 1).unwrap(), NeighborPair::new(true, false));
        // (2,1): left (1,1)=0, bottom (2,0)=1
        assert_eq!(neighbor_statuses(&b, &d, 2).unwrap(), NeighborPair::new(false, true));
    }

    fn valid_params() -> impl Strategy<Value = Params> {
        (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_filter_map("outside region", |(a, b, t)| {
            let lo = a.max(b);
            let hi = (a + b).min(1.0);
            Params::new(a, b, lo + t * (hi - lo)).ok()
        })
    }

    proptest! {
        #[test]
        fn kernel_is_monotone(p in valid_params()) {
            let t = p.kernel_table();
            prop_assert_eq!(t[0], 0.0);
            prop_assert!(t[3] >= t[1] && t[3] >= t[2]);
            prop_assert!(t[1] >= 0.0 && t[2] >= 0.0 && t[3] <= 1.0);
        }
    }
}
