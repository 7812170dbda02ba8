use std::cmp::Ordering;
use std::fmt;

/// A basis blade `e^{i1 i2 ...}` with strictly increasing indices in `1..=16`,
/// stored as a bitmask (bit `i-1` set for index `i`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Blade(u16);

pub const MAX_DIM: usize = 16;

impl Blade {
    pub const EMPTY: Blade = Blade(0);

    pub fn from_bits(bits: u16) -> Self {
        Blade(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn single(i: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&i), "blade index {i} out of range");
        Blade(1 << (i - 1))
    }

    /// Blade from an unordered index list, with the sign of the sorting
    /// permutation. Repeated indices give `None`.
    pub fn from_indices(indices: &[usize]) -> Option<(i8, Blade)> {
        let mut b = Blade::EMPTY;
        let mut sign = 1i8;
        for &i in indices {
            let (s, nb) = b.wedge(Blade::single(i))?;
            sign *= s;
            b = nb;
        }
        Some((sign, b))
    }

    /// Volume blade `e^{1...n}`.
    pub fn volume(n: usize) -> Self {
        Blade(((1u32 << n) - 1) as u16)
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << (i - 1)) != 0
    }

    pub fn max_index(self) -> usize {
        16 - self.0.leading_zeros() as usize
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (1..=MAX_DIM).filter(move |i| bits & (1 << (i - 1)) != 0)
    }

    /// `self ∧ other = sign · result`, or `None` when an index repeats.
    pub fn wedge(self, other: Blade) -> Option<(i8, Blade)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        // every pair (i in self, j in other) with i > j is one transposition
        let mut swaps = 0u32;
        for j in other.indices() {
            swaps += (self.0 >> j).count_ones();
        }
        let sign = if swaps.is_multiple_of(2) { 1 } else { -1 };
        Some((sign, Blade(self.0 | other.0)))
    }

    pub fn complement(self, n: usize) -> Blade {
        Blade(Blade::volume(n).0 & !self.0)
    }

    pub fn union(self, other: Blade) -> Blade {
        Blade(self.0 | other.0)
    }

    pub fn intersects(self, other: Blade) -> bool {
        self.0 & other.0 != 0
    }

    /// All blades of degree `p` in dimension `n`, in lexicographic order.
    pub fn all(n: usize, p: usize) -> Vec<Blade> {
        let mut out: Vec<Blade> = (0u32..(1 << n))
            .filter(|b| b.count_ones() as usize == p)
            .map(|b| Blade(b as u16))
            .collect();
        out.sort();
        out
    }
}

impl Ord for Blade {
    /// Degree first, then lexicographic on the index sequence.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.indices().cmp(other.indices()))
    }
}

impl PartialOrd for Blade {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Blade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices().map(|i| i.to_string()).collect();
        write!(f, "e{{{}}}", parts.join(" "))
    }
}

impl fmt::Debug for Blade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_index_vanishes() {
        assert!(Blade::single(1).wedge(Blade::single(1)).is_none());
    }

    #[test]
    fn sort_parity() {
        let b25 = Blade::from_indices(&[2, 5]).unwrap().1;
        let (s, b) = b25.wedge(Blade::single(1)).unwrap();
        assert_eq!((s, b.indices().collect::<Vec<_>>()), (1, vec![1, 2, 5]));
        let (s, _) = Blade::from_indices(&[2, 1]).unwrap();
        assert_eq!(s, -1);
    }

    #[test]
    fn lexicographic_order() {
        let all = Blade::all(4, 2);
        let shown: Vec<String> = all.iter().map(|b| b.to_string()).collect();
        assert_eq!(shown, ["e{1 2}", "e{1 3}", "e{1 4}", "e{2 3}", "e{2 4}", "e{3 4}"]);
    }
}
