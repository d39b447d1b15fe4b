//! Dense bitsets over an enumerated finite universe.
//!
//! The same representation backs state sets (over the global state space `S`)
//! and joint-action sets (over `A = 5^n`).

use std::fmt;

/// A fixed-width dense bitset. Trailing bits in the last word are kept zero so
/// that equality and hashing work on the raw words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitSet {
    words: Box<[u64]>,
    nbits: usize,
}

pub type StateSet = BitSet;

impl BitSet {
    pub fn empty(nbits: usize) -> Self {
        let nwords = (nbits + 63) / 64;
        BitSet {
            words: vec![0u64; nwords].into_boxed_slice(),
            nbits,
        }
    }

    pub fn full(nbits: usize) -> Self {
        let mut s = Self::empty(nbits);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        s.trim();
        s
    }

    pub fn singleton(nbits: usize, bit: usize) -> Self {
        let mut s = Self::empty(nbits);
        s.insert(bit);
        s
    }

    pub fn from_iter<I: IntoIterator<Item = usize>>(nbits: usize, it: I) -> Self {
        let mut s = Self::empty(nbits);
        for b in it {
            s.insert(b);
        }
        s
    }

    pub fn len_bits(&self) -> usize {
        self.nbits
    }

    pub fn insert(&mut self, bit: usize) {
        debug_assert!(bit < self.nbits);
        self.words[bit / 64] |= 1u64 << (bit % 64);
    }

    pub fn remove(&mut self, bit: usize) {
        debug_assert!(bit < self.nbits);
        self.words[bit / 64] &= !(1u64 << (bit % 64));
    }

    pub fn contains(&self, bit: usize) -> bool {
        debug_assert!(bit < self.nbits);
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= b;
        }
    }

    pub fn subtract(&mut self, other: &BitSet) {
        debug_assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a &= !b;
        }
    }

    pub fn complement_in_place(&mut self) {
        for w in self.words.iter_mut() {
            *w = !*w;
        }
        self.trim();
    }

    pub fn union(&self, other: &BitSet) -> BitSet {
        let mut r = self.clone();
        r.union_with(other);
        r
    }

    pub fn intersection(&self, other: &BitSet) -> BitSet {
        let mut r = self.clone();
        r.intersect_with(other);
        r
    }

    pub fn difference(&self, other: &BitSet) -> BitSet {
        let mut r = self.clone();
        r.subtract(other);
        r
    }

    pub fn complement(&self) -> BitSet {
        let mut r = self.clone();
        r.complement_in_place();
        r
    }

    pub fn is_subset_of(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(move |&b| self.contains(b))
    }

    pub fn first(&self) -> Option<usize> {
        for (i, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(i * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    fn trim(&mut self) {
        let rem = self.nbits % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitSet{{")?;
        let mut first = true;
        for b in self.iter() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// A set of actions for a single agent, packed into the low five bits.
pub type ActionSet = u8;

pub const ALL_ACTIONS: ActionSet = 0b11111;
pub const NUM_ACTIONS: usize = 5;

pub fn action_set_iter(set: ActionSet) -> impl Iterator<Item = usize> {
    (0..NUM_ACTIONS).filter(move |&a| set >> a & 1 == 1)
}

pub fn action_set_len(set: ActionSet) -> usize {
    (set & ALL_ACTIONS).count_ones() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let mut a = BitSet::empty(70);
        a.insert(0);
        a.insert(69);
        assert!(a.contains(69));
        assert_eq!(a.count(), 2);
        let full = BitSet::full(70);
        assert_eq!(full.count(), 70);
        let c = a.complement();
        assert_eq!(c.count(), 68);
        assert!(a.union(&c).eq(&full));
        assert!(a.intersection(&c).is_empty());
        assert_eq!(full.complement(), BitSet::empty(70));
    }

    #[test]
    fn subset_and_iter() {
        let a = BitSet::from_iter(10, [1, 3, 5]);
        let b = BitSet::from_iter(10, [1, 3, 5, 7]);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(a.first(), Some(1));
    }
}
