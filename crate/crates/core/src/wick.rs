//! Perfect matchings and Gaussian-process n-point functions.

use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::symmetric::SymTensor;

/// Largest arity for which pairings are enumerated.
pub const MAX_PAIRING_ARITY: usize = 12;

/// Disjoint index pairs (0-based, each with `a < b`) covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pairing(pub Vec<(usize, usize)>);

impl Pairing {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }
}

/// (n-1)!! for even n.
pub fn double_factorial_odd(n: usize) -> usize {
    (1..n).step_by(2).product()
}

/// All perfect matchings of `0..n`, smallest free index paired first and its
/// partners taken in ascending order.
pub fn enumerate_pairings(n: usize) -> Result<Vec<Pairing>> {
    if n % 2 == 1 {
        return Err(Error::OddArity(n));
    }
    if n > MAX_PAIRING_ARITY {
        return Err(Error::SizeLimit {
            n,
            max: MAX_PAIRING_ARITY,
        });
    }
    let mut out = Vec::with_capacity(double_factorial_odd(n));
    let mut free: Vec<usize> = (0..n).collect();
    let mut cur = Vec::with_capacity(n / 2);
    recurse(&mut free, &mut cur, &mut out);
    Ok(out)
}

fn recurse(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Pairing>) {
    if free.is_empty() {
        out.push(Pairing(cur.clone()));
        return;
    }
    let a = free[0];
    for k in 1..free.len() {
        let b = free[k];
        let rest: Vec<usize> = free
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 0 && i != k)
            .map(|(_, &v)| v)
            .collect();
        let saved = std::mem::replace(free, rest);
        cur.push((a, b));
        recurse(free, cur, out);
        cur.pop();
        *free = saved;
    }
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Σ over pairings of Π K(x_a, x_b) given the pairwise kernel matrix.
pub fn wick_sum(pairings: &[Pairing], k: impl Fn(usize, usize) -> f64) -> f64 {
    let mut acc = KahanSum::default();
    for p in pairings {
        acc.add(p.pairs().iter().map(|&(a, b)| k(a, b)).product());
    }
    acc.value()
}

/// Free n-point function at the given points; zero for odd n.
pub fn gp_npt(kernel: &KernelModel, points: &[&[f64]]) -> Result<f64> {
    let n = points.len();
    if n % 2 == 1 {
        return Ok(0.0);
    }
    let pairings = enumerate_pairings(n)?;
    let mut gram = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = kernel.k(points[a], points[b])?;
            gram[a * n + b] = v;
            gram[b * n + a] = v;
        }
    }
    Ok(wick_sum(&pairings, |a, b| gram[a * n + b]))
}

/// Free n-point tensor over a grid from its Gram matrix.
pub fn gp_tensor(gram: &[Vec<f64>], n: usize) -> Result<SymTensor> {
    let p = gram.len();
    if n % 2 == 1 {
        return Ok(SymTensor::zeros(p, n));
    }
    let pairings = enumerate_pairings(n)?;
    Ok(SymTensor::from_fn(p, n, |m| wick_sum(&pairings, |a, b| gram[m[a]][m[b]])))
}
