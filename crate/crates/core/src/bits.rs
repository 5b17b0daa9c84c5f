//! Compact storage for one anti-diagonal of statuses.

/// Statuses of the `n + 1` sites on anti-diagonal `n`, packed 64 per word.
///
/// Bit `j` is the status of `(j, n - j)`. Bits past `n` are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagonal {
    n: usize,
    words: Vec<u64>,
}

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl Diagonal {
    pub fn zeros(n: usize) -> Self {
        Diagonal {
            n,
            words: vec![0; words_for(n + 1)],
        }
    }

    /// Panics if `bits.len() != n + 1`.
    pub fn from_bits(n: usize, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), n + 1, "diagonal {n} has {} sites", n + 1);
        let mut d = Diagonal::zeros(n);
        for (j, &b) in bits.iter().enumerate() {
            d.set(j, b);
        }
        d
    }

    /// Diagonal `n` from a configuration index (bit `j` of `config` is site `j`).
    pub fn from_config(n: usize, config: u64) -> Self {
        assert!(n < 64);
        let mut d = Diagonal::zeros(n);
        d.words[0] = config & low_mask(n + 1);
        d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sites, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j <= self.n);
        self.words[j >> 6] >> (j & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        debug_assert!(j <= self.n);
        let mask = 1u64 << (j & 63);
        if value {
            self.words[j >> 6] |= mask;
        } else {
            self.words[j >> 6] &= !mask;
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Number of burnt sites, `Y_n`.
    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_all_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Lowest and highest burnt index, if any.
    pub fn burnt_range(&self) -> Option<(usize, usize)> {
        let first = self
            .words
            .iter()
            .position(|&w| w != 0)
            .map(|i| i * 64 + self.words[i].trailing_zeros() as usize)?;
        let last = self
            .words
            .iter()
            .rposition(|&w| w != 0)
            .map(|i| i * 64 + 63 - self.words[i].leading_zeros() as usize)?;
        Some((first, last))
    }

    /// Configuration index of a diagonal with at most 64 sites.
    pub fn config(&self) -> u64 {
        assert!(self.n < 64);
        self.words[0]
    }

    /// Reinterpret as diagonal `n`, clearing every bit.
    pub(crate) fn reset(&mut self, n: usize) {
        self.n = n;
        let need = words_for(n + 1);
        self.words.clear();
        self.words.resize(need, 0);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..=self.n).map(move |j| self.get(j))
    }
}

#[inline]
pub(crate) fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_popcount() {
        let mut d = Diagonal::zeros(130);
        assert_eq!(d.len(), 131);
        assert!(d.is_all_zero());
        assert_eq!(d.burnt_range(), None);
        d.set(0, true);
        d.set(64, true);
        d.set(130, true);
        assert_eq!(d.popcount(), 3);
        assert_eq!(d.burnt_range(), Some((0, 130)));
        d.set(0, false);
        assert_eq!(d.burnt_range(), Some((64, 130)));
        assert!(d.get(64) && !d.get(63));
    }

    #[test]
    fn config_roundtrip() {
        let d = Diagonal::from_config(3, 0b1011);
        assert_eq!(d.iter().collect::<Vec<_>>(), vec![true, true, false, true]);
        assert_eq!(d.config(), 0b1011);
        // bits beyond the diagonal are dropped
        assert_eq!(Diagonal::from_config(1, 0b111).config(), 0b11);
    }
}
