//! Sets of matrix coordinates with the usual set algebra.
//!
//! Backed by a bitset over the `d1 x d2` grid so membership tests in the
//! solver's inner loops are O(1) and iteration is row-major deterministic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A set of 0-based `(row, col)` coordinates within a fixed grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    rows: usize,
    cols: usize,
    words: Vec<u64>,
    len: usize,
}

impl IndexSet {
    pub fn empty(rows: usize, cols: usize) -> Self {
        debug_assert!(rows > 0 && cols > 0);
        let nbits = rows * cols;
        IndexSet {
            rows,
            cols,
            words: vec![0u64; nbits.div_ceil(64)],
            len: 0,
        }
    }

    /// The full grid.
    pub fn full(rows: usize, cols: usize) -> Self {
        let mut s = Self::empty(rows, cols);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        s.clear_tail();
        s.len = rows * cols;
        s
    }

    pub fn from_coords(rows: usize, cols: usize, coords: &[(usize, usize)]) -> Result<Self> {
        let mut s = Self::empty(rows, cols);
        for &(i, j) in coords {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!(
                    "coordinate ({i},{j}) outside {rows}x{cols} grid"
                )));
            }
            s.insert(i, j);
        }
        Ok(s)
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn bit(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    /// Inserts a coordinate; returns true if it was newly added.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        let b = self.bit(i, j);
        let mask = 1u64 << (b & 63);
        let w = &mut self.words[b >> 6];
        if *w & mask == 0 {
            *w |= mask;
            self.len += 1;
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        let b = self.bit(i, j);
        let mask = 1u64 << (b & 63);
        let w = &mut self.words[b >> 6];
        if *w & mask != 0 {
            *w &= !mask;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        let b = self.bit(i, j);
        self.words[b >> 6] & (1u64 << (b & 63)) != 0
    }

    fn check_dims(&self, other: &IndexSet) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "grid mismatch: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        let nbits = self.rows * self.cols;
        let used = nbits & 63;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
            }
        }
    }

    fn recount(&mut self) {
        self.len = self.words.iter().map(|w| w.count_ones() as usize).sum();
    }

    pub fn union(&self, other: &IndexSet) -> Result<IndexSet> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
        out.recount();
        Ok(out)
    }

    pub fn intersection(&self, other: &IndexSet) -> Result<IndexSet> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
        out.recount();
        Ok(out)
    }

    /// Set difference `self \ other`.
    pub fn difference(&self, other: &IndexSet) -> Result<IndexSet> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w &= !o;
        }
        out.recount();
        Ok(out)
    }

    pub fn complement(&self) -> IndexSet {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        out.clear_tail();
        out.recount();
        out
    }

    /// Row-major iteration over members (0-based coordinates).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.words
            .iter()
            .enumerate()
            .flat_map(move |(wi, &w)| BitIter { word: w, base: wi * 64 })
            .map(move |b| (b / cols, b % cols))
    }

    /// Members of row `i` in column order.
    pub fn row_members(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let cols = self.cols;
        (0..cols).filter(move |&j| self.contains(i, j))
    }
}

struct BitIter {
    word: u64,
    base: usize,
}

impl Iterator for BitIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.word == 0 {
            return None;
        }
        let tz = self.word.trailing_zeros() as usize;
        self.word &= self.word - 1;
        Some(self.base + tz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_algebra() {
        let a = IndexSet::from_coords(3, 3, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        let b = IndexSet::from_coords(3, 3, &[(1, 1), (0, 2)]).unwrap();
        let u = a.union(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        assert_eq!(u.len() + i.len(), a.len() + b.len());
        assert!(u.contains(0, 2) && u.contains(2, 2));
        assert_eq!(i.len(), 1);
        let d = a.difference(&b).unwrap();
        assert!(d.contains(0, 0) && !d.contains(1, 1));
        assert_eq!(a.complement().complement(), a);
    }

    #[test]
    fn full_and_empty() {
        let f = IndexSet::full(5, 7);
        assert_eq!(f.len(), 35);
        assert!(f.complement().is_empty());
        assert_eq!(f.iter().count(), 35);
    }

    #[test]
    fn iteration_is_row_major() {
        let s = IndexSet::from_coords(2, 3, &[(1, 0), (0, 2), (0, 1)]).unwrap();
        let got: alloc::vec::Vec<_> = s.iter().collect();
        assert_eq!(got, alloc::vec![(0, 1), (0, 2), (1, 0)]);
    }

    #[test]
    fn dims_mismatch_errors() {
        let a = IndexSet::empty(2, 2);
        let b = IndexSet::empty(2, 3);
        assert!(a.union(&b).is_err());
    }

    proptest! {
        #[test]
        fn inclusion_exclusion(coords_a in proptest::collection::vec((0usize..6, 0usize..5), 0..20),
                               coords_b in proptest::collection::vec((0usize..6, 0usize..5), 0..20)) {
            let a = IndexSet::from_coords(6, 5, &coords_a).unwrap();
            let b = IndexSet::from_coords(6, 5, &coords_b).unwrap();
            let u = a.union(&b).unwrap();
            let i = a.intersection(&b).unwrap();
            prop_assert_eq!(u.len() + i.len(), a.len() + b.len());
            prop_assert_eq!(a.complement().complement(), a.clone());
            // difference is closed and consistent with membership
            let d = a.difference(&b).unwrap();
            for (r, c) in d.iter() {
                prop_assert!(a.contains(r, c) && !b.contains(r, c));
            }
        }
    }
}
