//! Dense multi-index arrays over `[0, n)^r`.
//!
//! Storage is row-major: the last index varies fastest, so the flat offset of
//! `(i_0, …, i_{r−1})` is `Σ_k i_k · n^{r−1−k}`.

use std::ops::{Index, IndexMut};

/// Flat offset of a multi-index in a row-major `n^r` array.
#[inline]
pub fn flatten(dim: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

/// Inverse of [`flatten`].
pub fn unflatten(dim: usize, rank: usize, mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in idx.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
    idx
}

/// Iterates every multi-index of `[0, dim)^rank` in flat order.
#[derive(Debug, Clone)]
pub struct MultiIndexIter {
    dim: usize,
    current: Vec<usize>,
    done: bool,
}

impl MultiIndexIter {
    pub fn new(dim: usize, rank: usize) -> Self {
        MultiIndexIter { dim, current: vec![0; rank], done: dim == 0 && rank > 0 }
    }
}

impl Iterator for MultiIndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut pos = self.current.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.current[pos] += 1;
            if self.current[pos] < self.dim {
                break;
            }
            self.current[pos] = 0;
        }
        Some(out)
    }
}

pub fn multi_indices(dim: usize, rank: usize) -> MultiIndexIter {
    MultiIndexIter::new(dim, rank)
}

/// A rank-`r` array with every index ranging over `[0, dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray<F> {
    dim: usize,
    rank: usize,
    data: Vec<F>,
}

impl<F: Clone> DenseArray<F> {
    pub fn filled(dim: usize, rank: usize, value: F) -> Self {
        DenseArray { dim, rank, data: vec![value; dim.pow(rank as u32)] }
    }

    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> F) -> Self {
        let data = multi_indices(dim, rank).map(|idx| f(&idx)).collect();
        DenseArray { dim, rank, data }
    }

    pub fn from_vec(dim: usize, rank: usize, data: Vec<F>) -> Option<Self> {
        (data.len() == dim.pow(rank as u32)).then_some(DenseArray { dim, rank, data })
    }

    pub fn map<G: Clone>(&self, f: impl FnMut(&F) -> G) -> DenseArray<G> {
        DenseArray { dim: self.dim, rank: self.rank, data: self.data.iter().map(f).collect() }
    }
}

impl<F> DenseArray<F> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> &F {
        debug_assert_eq!(idx.len(), self.rank);
        &self.data[flatten(self.dim, idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut F {
        debug_assert_eq!(idx.len(), self.rank);
        let f = flatten(self.dim, idx);
        &mut self.data[f]
    }

    pub fn set(&mut self, idx: &[usize], value: F) {
        *self.get_mut(idx) = value;
    }
}

impl<F, const R: usize> Index<[usize; R]> for DenseArray<F> {
    type Output = F;
    fn index(&self, idx: [usize; R]) -> &F {
        self.get(&idx)
    }
}

impl<F, const R: usize> IndexMut<[usize; R]> for DenseArray<F> {
    fn index_mut(&mut self, idx: [usize; R]) -> &mut F {
        self.get_mut(&idx)
    }
}
