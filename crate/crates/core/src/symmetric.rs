//! Symmetric tensors stored by unique index multisets.
//!
//! Entries are kept in lexicographic order of non-decreasing index tuples, so a
//! rank-r tensor over p points holds C(p+r-1, r) values and is symmetric by
//! construction.

use serde::{Deserialize, Serialize};

/// Number of multisets of size `r` drawn from `p` symbols.
pub fn multichoose(p: usize, r: usize) -> usize {
    if r == 0 {
        return 1;
    }
    if p == 0 {
        return 0;
    }
    // C(p + r - 1, r), computed incrementally to stay exact for small inputs.
    let mut acc: u128 = 1;
    for k in 0..r as u128 {
        acc = acc * (p as u128 + k) / (k + 1);
    }
    acc as usize
}

/// All non-decreasing index tuples of length `r` over `0..p`, in lexicographic order.
pub fn multisets(p: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(multichoose(p, r));
    if p == 0 && r > 0 {
        return out;
    }
    let mut cur = vec![0usize; r];
    loop {
        out.push(cur.clone());
        // advance to the next non-decreasing tuple
        let mut k = r;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] + 1 < p {
                let v = cur[k] + 1;
                for slot in &mut cur[k..] {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Position of a (not necessarily sorted) index tuple in the multiset ordering.
pub fn multiset_rank(p: usize, idx: &[usize]) -> usize {
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let r = sorted.len();
    let mut rank = 0;
    let mut lo = 0;
    for (k, &a) in sorted.iter().enumerate() {
        assert!(a < p, "index {a} out of range for {p} points");
        for v in lo..a {
            rank += multichoose(p - v, r - k - 1);
        }
        lo = a;
    }
    rank
}

/// Number of distinct orderings of a multiset.
pub fn permutation_count(idx: &[usize]) -> usize {
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let mut total = factorial(sorted.len());
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total /= factorial(run);
            run = 1;
        }
    }
    total / factorial(run)
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    pub points: usize,
    pub rank: usize,
    pub data: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(points: usize, rank: usize) -> Self {
        SymTensor {
            points,
            rank,
            data: vec![0.0; multichoose(points, rank)],
        }
    }

    /// Fills every unique element from a function of its sorted index tuple.
    pub fn from_fn(points: usize, rank: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let data = multisets(points, rank).iter().map(|m| f(m)).collect();
        SymTensor { points, rank, data }
    }

    /// Like [`SymTensor::from_fn`] but stops at the first error.
    pub fn try_from_fn<E>(
        points: usize,
        rank: usize,
        mut f: impl FnMut(&[usize]) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let data = multisets(points, rank)
            .iter()
            .map(|m| f(m))
            .collect::<Result<_, E>>()?;
        Ok(SymTensor { points, rank, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.rank, "index arity");
        self.data[multiset_rank(self.points, idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        assert_eq!(idx.len(), self.rank, "index arity");
        let k = multiset_rank(self.points, idx);
        self.data[k] = value;
    }

    /// Sorted index tuples, in storage order.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        multisets(self.points, self.rank)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.indices().into_iter().zip(self.data.iter().copied())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SymTensor {
            points: self.points,
            rank: self.rank,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two tensors with the same shape.
    pub fn zip_with(&self, other: &SymTensor, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.points, self.rank), (other.points, other.rank), "tensor shape");
        SymTensor {
            points: self.points,
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn mean_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum::<f64>() / self.data.len() as f64
    }
}
