//! Sampling of single-hidden-layer networks and streaming of output moments.

use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Activation, ArchitectureSpec, ExperimentPlan, InputGrid};
use crate::error::{Error, Result};
use crate::symmetric::{multichoose, multisets, SymTensor};

/// Highest moment order tracked by the accumulators.
pub const MAX_ORDER: usize = 6;

/// Networks per work unit. Chunk boundaries are fixed so that the merge order
/// never depends on scheduling.
pub const CHUNK_SIZE: usize = 8192;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// Parameters of one network. `w0` is stored neuron-major: the weights feeding
/// hidden unit `j` are `w0[j * d_in..(j + 1) * d_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub w0: Vec<f64>,
    pub b0: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: f64,
}

/// Standard deviations of the four parameter groups.
#[derive(Debug, Clone, Copy)]
struct Scales {
    w0: f64,
    b: f64,
    w1: f64,
}

impl Scales {
    fn new(spec: &ArchitectureSpec) -> Self {
        Scales {
            w0: (spec.sigma_w_sq / spec.d_in as f64).sqrt(),
            b: spec.sigma_b_sq.sqrt(),
            w1: (spec.sigma_w_sq / spec.width as f64).sqrt(),
        }
    }
}

/// Draws `sd · ε`; a zero scale yields exactly zero without consuming the stream.
#[inline]
fn draw<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        sd * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Draws one network. For each hidden unit the order is `w0[:, j]`, `b0[j]`,
/// `w1[j]`; `b1` comes last. [`run_ensemble`] consumes the stream identically.
pub fn sample_params<R: Rng>(spec: &ArchitectureSpec, rng: &mut R) -> NetworkParams {
    let s = Scales::new(spec);
    let (n, d) = (spec.width, spec.d_in);
    let mut w0 = Vec::with_capacity(n * d);
    let mut b0 = Vec::with_capacity(n);
    let mut w1 = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..d {
            w0.push(draw(rng, s.w0));
        }
        b0.push(draw(rng, s.b));
        w1.push(draw(rng, s.w1));
    }
    let b1 = draw(rng, s.b);
    NetworkParams { w0, b0, w1, b1 }
}

/// Offset subtracted inside the Gauss activation so that each unit is
/// exp(z) / sqrt(exp[2(σ_b² + σ_W²|x|²/d_in)]).
pub fn gauss_offset(spec: &ArchitectureSpec, x: &[f64]) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    spec.sigma_b_sq + spec.sigma_w_sq * sq / spec.d_in as f64
}

#[inline]
fn activate(act: Activation, z: f64, offset: f64) -> f64 {
    match act {
        Activation::Erf => libm::erf(z),
        Activation::ReLU => z.max(0.0),
        Activation::Gauss => (z - offset).exp(),
    }
}

/// Network output at `x`.
pub fn forward(params: &NetworkParams, spec: &ArchitectureSpec, x: &[f64]) -> Result<f64> {
    let d = spec.d_in;
    assert_eq!(x.len(), d, "input dimension");
    assert_eq!(params.b0.len(), spec.width, "parameter width");
    let offset = gauss_offset(spec, x);
    let mut out = 0.0;
    for j in 0..spec.width {
        let w = &params.w0[j * d..(j + 1) * d];
        let z = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + params.b0[j];
        out += params.w1[j] * activate(spec.activation, z, offset);
    }
    out += params.b1;
    if !out.is_finite() {
        return Err(Error::NumericOverflow {
            experiment: 0,
            network: 0,
            detail: format!("output {out} at x = {x:?}"),
        });
    }
    Ok(out)
}

/// Largest grid index of every multiset, per order.
///
/// In lexicographic order the order-k multisets extending a given order-(k-1)
/// multiset q are contiguous and take last index `last[q]..p`, so products of
/// order k are generated by one pass over those of order k-1.
#[derive(Debug, Clone)]
struct ProductPlan {
    last: Vec<Vec<usize>>,
}

impl ProductPlan {
    fn new(points: usize) -> Self {
        let last = (0..=MAX_ORDER)
            .map(|k| {
                if k == 0 {
                    vec![0]
                } else {
                    multisets(points, k).iter().map(|m| m[k - 1]).collect()
                }
            })
            .collect();
        ProductPlan { last }
    }
}

/// Raw product sums Σ_α f_α(x_i1)…f_α(x_in) over unique multisets, n = 1..=6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub points: usize,
    pub count: u64,
    /// `sums[n - 1]` holds the order-n sums.
    pub sums: Vec<SymTensor>,
}

impl MomentAccumulator {
    pub fn new(points: usize) -> Self {
        MomentAccumulator {
            points,
            count: 0,
            sums: (1..=MAX_ORDER).map(|n| SymTensor::zeros(points, n)).collect(),
        }
    }

    /// Adds one network's outputs on the grid.
    pub fn push(&mut self, outputs: &[f64]) {
        let plan = ProductPlan::new(self.points);
        let mut scratch = Scratch::new(self.points);
        self.push_with(&plan, &mut scratch, outputs);
    }

    fn push_with(&mut self, plan: &ProductPlan, scratch: &mut Scratch, f: &[f64]) {
        debug_assert_eq!(f.len(), self.points);
        scratch.prev.clear();
        scratch.prev.extend_from_slice(f);
        for (s, &v) in self.sums[0].data.iter_mut().zip(f) {
            *s += v;
        }
        for k in 2..=MAX_ORDER {
            let sums = &mut self.sums[k - 1].data;
            scratch.next.resize(sums.len(), 0.0);
            let mut m = 0;
            for (&pv, &l) in scratch.prev.iter().zip(&plan.last[k - 1]) {
                let tail = &f[l..];
                let n = tail.len();
                let out = scratch.next[m..m + n].iter_mut().zip(sums[m..m + n].iter_mut());
                for ((o, s), &fj) in out.zip(tail) {
                    let v = pv * fj;
                    *o = v;
                    *s += v;
                }
                m += n;
            }
            std::mem::swap(&mut scratch.prev, &mut scratch.next);
        }
        self.count += 1;
    }

    /// Adds another accumulator over the same grid.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        assert_eq!(self.points, other.points, "grid size");
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
        self.count += other.count;
    }

    /// Order-n sums divided by the count.
    pub fn moment(&self, n: usize) -> SymTensor {
        assert!((1..=MAX_ORDER).contains(&n), "moment order {n}");
        assert!(self.count > 0, "empty accumulator");
        let c = self.count as f64;
        self.sums[n - 1].map(|v| v / c)
    }
}

struct Scratch {
    prev: Vec<f64>,
    next: Vec<f64>,
}

impl Scratch {
    fn new(points: usize) -> Self {
        let cap = multichoose(points, MAX_ORDER);
        Scratch {
            prev: Vec::with_capacity(cap),
            next: Vec::with_capacity(cap),
        }
    }
}

/// Key for the stream of one chunk: SHA-256 of (seed, width, experiment, chunk).
fn chunk_rng(seed: u64, width: usize, experiment: usize, chunk: usize) -> Xoshiro256PlusPlus {
    let mut h = Sha256::new();
    h.update(b"nnqft-stream");
    h.update(seed.to_le_bytes());
    h.update((width as u64).to_le_bytes());
    h.update((experiment as u64).to_le_bytes());
    h.update((chunk as u64).to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    Xoshiro256PlusPlus::from_seed(key)
}

/// Per-grid-point data reused for every network.
struct GridCache {
    xs: Vec<f64>,
    offsets: Vec<f64>,
}

trait Unit {
    fn eval(z: f64, offset: f64) -> f64;
}

struct ErfUnit;
struct ReluUnit;
struct GaussUnit;

impl Unit for ErfUnit {
    #[inline(always)]
    fn eval(z: f64, _: f64) -> f64 {
        libm::erf(z)
    }
}

impl Unit for ReluUnit {
    #[inline(always)]
    fn eval(z: f64, _: f64) -> f64 {
        z.max(0.0)
    }
}

impl Unit for GaussUnit {
    #[inline(always)]
    fn eval(z: f64, offset: f64) -> f64 {
        (z - offset).exp()
    }
}

struct ChunkJob<'a> {
    spec: &'a ArchitectureSpec,
    grid: &'a GridCache,
    plan: &'a ProductPlan,
    nets: usize,
    first_network: u64,
    experiment: usize,
}

fn sample_chunk(job: &ChunkJob<'_>, rng: &mut Xoshiro256PlusPlus) -> Result<MomentAccumulator> {
    match job.spec.activation {
        Activation::Erf => sample_chunk_with::<ErfUnit>(job, rng),
        Activation::ReLU => sample_chunk_with::<ReluUnit>(job, rng),
        Activation::Gauss => sample_chunk_with::<GaussUnit>(job, rng),
    }
}

fn sample_chunk_with<U: Unit>(
    job: &ChunkJob<'_>,
    rng: &mut Xoshiro256PlusPlus,
) -> Result<MomentAccumulator> {
    let spec = job.spec;
    let grid = job.grid;
    let p = grid.offsets.len();
    let d = spec.d_in;
    let s = Scales::new(spec);
    let mut acc = MomentAccumulator::new(p);
    let mut scratch = Scratch::new(p);
    let mut out = vec![0.0; p];
    let mut w = vec![0.0; d];
    for net in 0..job.nets {
        out.iter_mut().for_each(|o| *o = 0.0);
        for _ in 0..spec.width {
            for wi in w.iter_mut() {
                *wi = draw(rng, s.w0);
            }
            let b0 = draw(rng, s.b);
            let w1 = draw(rng, s.w1);
            if d == 1 {
                let w = w[0];
                let terms = out.iter_mut().zip(&grid.xs).zip(&grid.offsets);
                for ((o, &x), &off) in terms {
                    *o += w1 * U::eval(w * x + b0, off);
                }
            } else {
                let terms = out.iter_mut().zip(grid.xs.chunks_exact(d)).zip(&grid.offsets);
                for ((o, x), &off) in terms {
                    let z = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b0;
                    *o += w1 * U::eval(z, off);
                }
            }
        }
        let b1 = draw(rng, s.b);
        for o in out.iter_mut() {
            *o += b1;
        }
        if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                experiment: job.experiment,
                network: job.first_network + net as u64,
                detail: format!("output {} at grid point {bad}", out[bad]),
            });
        }
        acc.push_with(job.plan, &mut scratch, &out);
    }
    Ok(acc)
}

/// Draws `plan.n_experiments` ensembles of width-`width` networks and returns
/// one accumulator per experiment.
///
/// Results depend only on (seed, width, experiment, grid, spec): every chunk has
/// its own generator and chunks are merged in index order.
pub fn run_ensemble(
    plan: &ExperimentPlan,
    spec: &ArchitectureSpec,
    width: usize,
) -> Result<Vec<MomentAccumulator>> {
    let spec = spec.with_width(width);
    let grid = GridCache {
        xs: plan.grid.points.iter().flatten().copied().collect(),
        offsets: plan.grid.points.iter().map(|x| gauss_offset(&spec, x)).collect(),
    };
    let products = ProductPlan::new(plan.grid.len());
    let per = plan.nets_per_experiment;
    let chunks_per = per.div_ceil(CHUNK_SIZE);
    let units: Vec<(usize, usize)> = (0..plan.n_experiments)
        .flat_map(|e| (0..chunks_per).map(move |c| (e, c)))
        .collect();
    let work = |&(e, c): &(usize, usize)| {
        let start = c * CHUNK_SIZE;
        let nets = CHUNK_SIZE.min(per - start);
        let job = ChunkJob {
            spec: &spec,
            grid: &grid,
            plan: &products,
            nets,
            first_network: start as u64,
            experiment: e,
        };
        sample_chunk(&job, &mut chunk_rng(plan.seed, width, e, c))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<MomentAccumulator>> = {
        use rayon::prelude::*;
        units.par_iter().map(work).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<MomentAccumulator>> = units.iter().map(work).collect();

    let mut out = Vec::with_capacity(plan.n_experiments);
    let mut parts = parts.into_iter();
    for _ in 0..plan.n_experiments {
        let mut acc = parts.next().expect("chunk")?;
        for _ in 1..chunks_per {
            acc.merge(&parts.next().expect("chunk")?);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Accumulators for one (architecture, grid, width) together with the
/// information needed to check that later analyses use matching inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMoments {
    pub schema_version: u32,
    pub fingerprint: String,
    pub spec: ArchitectureSpec,
    pub grid: InputGrid,
    pub seed: u64,
    pub nets_per_experiment: usize,
    pub experiments: Vec<MomentAccumulator>,
}

impl EnsembleMoments {
    pub fn sample(plan: &ExperimentPlan, spec: &ArchitectureSpec, width: usize) -> Result<Self> {
        let experiments = run_ensemble(plan, spec, width)?;
        let spec = spec.with_width(width);
        Ok(EnsembleMoments {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            fingerprint: fingerprint(&spec, &plan.grid, plan.seed, plan.nets_per_experiment),
            spec,
            grid: plan.grid.clone(),
            seed: plan.seed,
            nets_per_experiment: plan.nets_per_experiment,
            experiments,
        })
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn total_count(&self) -> u64 {
        self.experiments.iter().map(|a| a.count).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    /// Parses a snapshot and checks its header against its contents.
    pub fn from_json(text: &str) -> Result<Self> {
        let snap: EnsembleMoments = serde_json::from_str(text)?;
        if snap.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(Error::SnapshotMismatch(format!(
                "schema_version {} (expected {SNAPSHOT_SCHEMA_VERSION})",
                snap.schema_version
            )));
        }
        let want = fingerprint(&snap.spec, &snap.grid, snap.seed, snap.nets_per_experiment);
        if want != snap.fingerprint {
            return Err(Error::SnapshotMismatch("fingerprint does not match contents".into()));
        }
        if snap
            .experiments
            .iter()
            .any(|a| a.count != snap.nets_per_experiment as u64 || a.points != snap.grid.len())
        {
            return Err(Error::SnapshotMismatch("experiment counts disagree with header".into()));
        }
        Ok(snap)
    }
}

/// Hash identifying the distribution and inputs an ensemble was drawn from.
pub fn fingerprint(spec: &ArchitectureSpec, grid: &InputGrid, seed: u64, nets: usize) -> String {
    let canonical = serde_json::json!({
        "spec": spec,
        "grid": grid.points,
        "seed": seed,
        "nets_per_experiment": nets,
    });
    crate::config::sha256_hex(canonical.to_string().as_bytes())
}
