//! Integration over the cutoff box [-Λ, Λ]^d.
//!
//! The default scheme is composite Gauss–Legendre. Every axis is split at the
//! origin; in one dimension the panels are additionally graded geometrically
//! (breakpoints ±Λ, ±Λ/2, ±Λ/4, … down to 1/4) so that integrands with O(1)
//! structure near the origin stay resolved at very large cutoffs.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the integration box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    Finite(f64),
    Infinite,
}

impl Cutoff {
    pub fn is_finite(self) -> bool {
        matches!(self, Cutoff::Finite(_))
    }

    /// Value used in tables: the cutoff, or +∞.
    pub fn value(self) -> f64 {
        match self {
            Cutoff::Finite(l) => l,
            Cutoff::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Cutoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cutoff::Finite(l) => write!(f, "{l}"),
            Cutoff::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Cutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Cutoff::Infinite);
        }
        match t.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Cutoff::Finite(v)),
            Ok(v) if v == f64::INFINITY => Ok(Cutoff::Infinite),
            _ => Err(Error::config("invalid-cutoff", format!("cannot parse cutoff `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    TensorGaussLegendre { points_per_axis: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    /// Relative change accepted between successive refinements.
    pub tolerance: f64,
    /// Number of node doublings tried before giving up.
    pub max_refinements: usize,
    /// First cutoff tried when Λ = ∞.
    pub infinite_start: f64,
}

/// Smallest panel endpoint used by the one-dimensional grading.
const GRADING_FLOOR: f64 = 0.25;
const MAX_DOUBLINGS: usize = 48;

impl QuadratureSpec {
    /// 64 points per axis in one dimension, 48 in two, 32 otherwise.
    pub fn default_for(d_in: usize) -> Self {
        let points_per_axis = match d_in {
            1 => 64,
            2 => 48,
            _ => 32,
        };
        Self::gauss_legendre(points_per_axis)
    }

    pub fn gauss_legendre(points_per_axis: usize) -> Self {
        QuadratureSpec {
            scheme: Scheme::TensorGaussLegendre { points_per_axis },
            tolerance: 1e-6,
            max_refinements: 4,
            infinite_start: 8.0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        QuadratureSpec {
            scheme: Scheme::MonteCarlo { samples, seed },
            tolerance: 1e-2,
            max_refinements: 0,
            infinite_start: 8.0,
        }
    }

    /// Starts Λ = ∞ doubling at 8 times the given input scale.
    pub fn with_input_scale(mut self, max_norm: f64) -> Self {
        self.infinite_start = if max_norm > 0.0 { 8.0 * max_norm } else { 8.0 };
        self
    }

    pub fn validate(&self, d_in: usize) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::config("invalid-tolerance", "quadrature tolerance must be > 0"));
        }
        match self.scheme {
            Scheme::TensorGaussLegendre { points_per_axis } => {
                if points_per_axis < 2 || points_per_axis % 2 != 0 {
                    return Err(Error::config(
                        "invalid-quadrature-points",
                        format!("points per axis must be even and >= 2, got {points_per_axis}"),
                    ));
                }
                if d_in == 1 && points_per_axis < 16 {
                    return Err(Error::config(
                        "invalid-quadrature-points",
                        format!("one-dimensional rules need >= 16 points, got {points_per_axis}"),
                    ));
                }
            }
            Scheme::MonteCarlo { samples, .. } => {
                if d_in < 2 {
                    return Err(Error::config(
                        "monte-carlo-needs-d2",
                        "Monte-Carlo quadrature is only allowed for d_in >= 2",
                    ));
                }
                if samples < 2 {
                    return Err(Error::config("invalid-quadrature-points", "need >= 2 samples"));
                }
            }
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Panel endpoints covering [-Λ, Λ] along one axis.
pub fn panel_breaks(lambda: f64, d_in: usize) -> Vec<f64> {
    let mut pos = vec![lambda];
    if d_in == 1 {
        let mut b = lambda;
        while b > GRADING_FLOOR {
            b *= 0.5;
            pos.push(b);
        }
    }
    let mut breaks: Vec<f64> = pos.iter().map(|b| -b).collect();
    breaks.push(0.0);
    breaks.extend(pos.iter().rev());
    breaks
}

/// Composite rule on [-Λ, Λ] with `per_panel` nodes in each panel.
pub fn axis_rule(lambda: f64, d_in: usize, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(per_panel);
    let breaks = panel_breaks(lambda, d_in);
    let mut nodes = Vec::with_capacity((breaks.len() - 1) * per_panel);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for ab in breaks.windows(2) {
        let (mid, half) = (0.5 * (ab[0] + ab[1]), 0.5 * (ab[1] - ab[0]));
        for (ti, wi) in t.iter().zip(&w) {
            nodes.push(mid + half * ti);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Applies a tensor-product rule once, accumulating `len` integrands.
fn tensor_pass<F>(f: &F, len: usize, lambda: f64, d_in: usize, per_panel: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let (nodes, weights) = axis_rule(lambda, d_in, per_panel);
    let m = nodes.len();
    let mut total = vec![0.0; len];
    let mut vals = vec![0.0; len];
    let mut y = vec![0.0; d_in];
    let mut idx = vec![0usize; d_in];
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            y[k] = nodes[i];
            w *= weights[i];
        }
        f(&y, &mut vals);
        for (t, v) in total.iter_mut().zip(&vals) {
            *t += w * v;
        }
        // odometer over the d_in axes
        let mut k = 0;
        loop {
            if k == d_in {
                return total;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn converged(prev: &[f64], next: &[f64], tol: f64) -> bool {
    let scale = next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    prev.iter()
        .zip(next)
        .all(|(a, b)| (a - b).abs() <= tol * b.abs() + 1e-14 * scale)
}

fn residual(prev: &[f64], next: &[f64]) -> (f64, f64) {
    prev.iter()
        .zip(next)
        .map(|(a, b)| ((a - b).abs(), *b))
        .fold((0.0, 0.0), |acc, (r, b)| if r > acc.0 { (r, b) } else { acc })
}

/// Integral over a finite box with node doubling until the tolerance holds.
fn finite_box<F>(f: &F, len: usize, lambda: f64, d_in: usize, quad: &QuadratureSpec) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    match quad.scheme {
        Scheme::TensorGaussLegendre { points_per_axis } => {
            let mut q = points_per_axis / 2;
            let mut prev = tensor_pass(f, len, lambda, d_in, q);
            let mut last = (f64::NAN, f64::NAN);
            for _ in 0..quad.max_refinements.max(1) {
                q *= 2;
                let next = tensor_pass(f, len, lambda, d_in, q);
                if converged(&prev, &next, quad.tolerance) {
                    return Ok(next);
                }
                last = residual(&prev, &next);
                prev = next;
            }
            Err(Error::Quadrature {
                estimate: last.1,
                residual: last.0,
            })
        }
        Scheme::MonteCarlo { samples, seed } => {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let volume = (2.0 * lambda).powi(d_in as i32);
            let mut sum = vec![0.0; len];
            let mut sq = vec![0.0; len];
            let mut vals = vec![0.0; len];
            let mut y = vec![0.0; d_in];
            for _ in 0..samples {
                for v in y.iter_mut() {
                    *v = rng.random_range(-lambda..lambda);
                }
                f(&y, &mut vals);
                for k in 0..len {
                    sum[k] += vals[k];
                    sq[k] += vals[k] * vals[k];
                }
            }
            let n = samples as f64;
            let mut out = Vec::with_capacity(len);
            for k in 0..len {
                let mean = sum[k] / n;
                let var = (sq[k] / n - mean * mean).max(0.0) * n / (n - 1.0);
                let est = volume * mean;
                let err = volume * (var / n).sqrt();
                if err > quad.tolerance * est.abs() {
                    return Err(Error::Quadrature {
                        estimate: est,
                        residual: err,
                    });
                }
                out.push(est);
            }
            Ok(out)
        }
    }
}

/// Integrates `len` functions at once over [-Λ, Λ]^d. `f(y, out)` writes the
/// integrand values at `y`. With `Cutoff::Infinite` the box is doubled from
/// `quad.infinite_start` until the relative change drops below the tolerance;
/// that is only meaningful for decaying integrands.
pub fn integrate_box_vec<F>(
    f: F,
    len: usize,
    cutoff: Cutoff,
    d_in: usize,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    quad.validate(d_in)?;
    match cutoff {
        Cutoff::Finite(lambda) => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::config("invalid-cutoff", format!("cutoff must be > 0, got {lambda}")));
            }
            finite_box(&f, len, lambda, d_in, quad)
        }
        Cutoff::Infinite => {
            if matches!(quad.scheme, Scheme::MonteCarlo { .. }) {
                return Err(Error::config(
                    "monte-carlo-infinite-cutoff",
                    "Monte-Carlo quadrature needs a finite cutoff",
                ));
            }
            let mut lambda = quad.infinite_start;
            let mut prev = finite_box(&f, len, lambda, d_in, quad)?;
            let mut last = (f64::NAN, f64::NAN);
            for _ in 0..MAX_DOUBLINGS {
                lambda *= 2.0;
                let next = finite_box(&f, len, lambda, d_in, quad)?;
                if converged(&prev, &next, quad.tolerance) {
                    return Ok(next);
                }
                last = residual(&prev, &next);
                prev = next;
            }
            Err(Error::Quadrature {
                estimate: last.1,
                residual: last.0,
            })
        }
    }
}

/// Scalar version of [`integrate_box_vec`].
pub fn integrate_box<F>(f: F, cutoff: Cutoff, d_in: usize, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    integrate_box_vec(|y, out| out[0] = f(y), 1, cutoff, d_in, quad).map(|v| v[0])
}
