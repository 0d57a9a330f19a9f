//! Empirical n-point functions, their deviations from the Gaussian process,
//! noise backgrounds, connected pieces and width scaling.

use serde::{Deserialize, Serialize};

use crate::config::InputGrid;
use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::sampler::{EnsembleMoments, MomentAccumulator};
use crate::stats::{fit_line, mean, std_dev, LineFit};
use crate::symmetric::SymTensor;
use crate::wick::{enumerate_pairings, gp_tensor};

/// z-value of the two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Estimates of an order-n correlator, one tensor per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTensor {
    pub order: usize,
    pub grid: InputGrid,
    pub per_experiment: Vec<SymTensor>,
    pub pooled: SymTensor,
    pub count_per_experiment: u64,
}

impl CorrelationTensor {
    fn from_parts(order: usize, grid: InputGrid, per_experiment: Vec<SymTensor>, count: u64) -> Self {
        let p = grid.len();
        let pooled = SymTensor::from_fn(p, order, |_| 0.0);
        let mut out = CorrelationTensor {
            order,
            grid,
            per_experiment,
            pooled,
            count_per_experiment: count,
        };
        out.pooled = out.element_map(|v| mean(v));
        out
    }

    pub fn n_experiments(&self) -> usize {
        self.per_experiment.len()
    }

    /// Applies `f` to the across-experiment values of every element.
    pub fn element_map(&self, f: impl Fn(&[f64]) -> f64) -> SymTensor {
        let mut vals = vec![0.0; self.per_experiment.len()];
        let mut out = SymTensor::zeros(self.grid.len(), self.order);
        for (k, slot) in out.data.iter_mut().enumerate() {
            for (v, t) in vals.iter_mut().zip(&self.per_experiment) {
                *v = t.data[k];
            }
            *slot = f(&vals);
        }
        out
    }

    /// Across-experiment standard deviation of each element.
    pub fn std_across(&self) -> SymTensor {
        self.element_map(std_dev)
    }

    /// Standard error of the pooled mean of each element.
    pub fn std_error(&self) -> SymTensor {
        let root = (self.n_experiments() as f64).sqrt();
        self.std_across().map(|s| s / root)
    }

    /// Same per-experiment transformation applied to every experiment.
    fn map_experiments(&self, order: usize, f: impl Fn(&SymTensor) -> SymTensor) -> Self {
        let per = self.per_experiment.iter().map(f).collect();
        Self::from_parts(order, self.grid.clone(), per, self.count_per_experiment)
    }
}

/// Per-experiment G⁽ⁿ⁾ = raw sum / count.
pub fn empirical_npt(accs: &[MomentAccumulator], grid: &InputGrid, n: usize) -> Result<CorrelationTensor> {
    if !(1..=crate::sampler::MAX_ORDER).contains(&n) {
        return Err(Error::config("unsupported-order", format!("order {n} is not accumulated")));
    }
    let first = accs
        .first()
        .ok_or_else(|| Error::config("no-experiments", "no accumulators given"))?;
    if accs
        .iter()
        .any(|a| a.points != grid.len() || a.count != first.count || a.count == 0)
    {
        return Err(Error::config(
            "mismatched-accumulators",
            "accumulators disagree on grid size or network count",
        ));
    }
    let per = accs.iter().map(|a| a.moment(n)).collect();
    Ok(CorrelationTensor::from_parts(n, grid.clone(), per, first.count))
}

impl EnsembleMoments {
    pub fn npt(&self, n: usize) -> Result<CorrelationTensor> {
        empirical_npt(&self.experiments, &self.grid, n)
    }
}

/// Normalized deviation m_n = (G⁽ⁿ⁾ − G_GP⁽ⁿ⁾)/G_GP⁽ⁿ⁾ with its noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub order: usize,
    pub gp: SymTensor,
    pub delta: SymTensor,
    /// Pooled m_n.
    pub m: SymTensor,
    /// Across-experiment standard deviation of m_n per element.
    pub m_std: SymTensor,
    /// 95% interval of the pooled m_n: mean ± 1.96·std/√n_experiments.
    pub ci_low: SymTensor,
    pub ci_high: SymTensor,
    /// Elements whose GP value is zero; excluded from every summary.
    pub degenerate: Vec<bool>,
    /// Mean over elements of `m_std`.
    pub background: f64,
    /// Mean over elements of |m|.
    pub mean_abs_m: f64,
}

impl DeviationReport {
    /// Fraction of usable elements with |m| above the background.
    pub fn fraction_above_background(&self) -> f64 {
        let usable: Vec<f64> = self
            .m
            .data
            .iter()
            .zip(&self.degenerate)
            .filter(|(_, &d)| !d)
            .map(|(v, _)| v.abs())
            .collect();
        usable.iter().filter(|&&v| v > self.background).count() as f64 / usable.len() as f64
    }

    pub fn above_background(&self) -> bool {
        self.mean_abs_m > self.background
    }
}

/// Free n-point tensor over the grid of `emp`.
pub fn gp_npt_tensor(kernel: &KernelModel, grid: &InputGrid, n: usize) -> Result<SymTensor> {
    gp_tensor(&kernel.gram(&grid.points)?, n)
}

pub fn deviation(emp: &CorrelationTensor, kernel: &KernelModel) -> Result<DeviationReport> {
    if !matches!(emp.order, 2 | 4 | 6) {
        return Err(Error::config("unsupported-order", format!("deviation of order {}", emp.order)));
    }
    let gp = gp_npt_tensor(kernel, &emp.grid, emp.order)?;
    let degenerate: Vec<bool> = gp.data.iter().map(|&g| g == 0.0).collect();
    let m_per: Vec<SymTensor> = emp
        .per_experiment
        .iter()
        .map(|t| t.zip_with(&gp, |g, q| if q == 0.0 { 0.0 } else { (g - q) / q }))
        .collect();
    let ms = CorrelationTensor::from_parts(emp.order, emp.grid.clone(), m_per, emp.count_per_experiment);
    let m = ms.pooled.clone();
    let m_std = ms.std_across();
    let half = m_std.map(|s| Z95 * s / (ms.n_experiments() as f64).sqrt());
    let usable = |t: &SymTensor| -> Vec<f64> {
        t.data
            .iter()
            .zip(&degenerate)
            .filter(|(_, &d)| !d)
            .map(|(v, _)| *v)
            .collect()
    };
    let background = mean(&usable(&m_std));
    let mean_abs_m = mean(&usable(&m).iter().map(|v| v.abs()).collect::<Vec<_>>());
    Ok(DeviationReport {
        order: emp.order,
        delta: emp.pooled.zip_with(&gp, |a, b| a - b),
        gp,
        ci_low: m.zip_with(&half, |a, h| a - h),
        ci_high: m.zip_with(&half, |a, h| a + h),
        m,
        m_std,
        degenerate,
        background,
        mean_abs_m,
    })
}

/// Source of the two-point function inside connected subtractions.
#[derive(Debug, Clone, Copy)]
pub enum TwoPoint<'a> {
    /// The analytic kernel (exact at any width).
    Kernel(&'a KernelModel),
    /// Pooled empirical G⁽²⁾.
    Empirical(&'a CorrelationTensor),
}

impl TwoPoint<'_> {
    fn matrix(&self, grid: &InputGrid) -> Result<Vec<Vec<f64>>> {
        match self {
            TwoPoint::Kernel(k) => k.gram(&grid.points),
            TwoPoint::Empirical(g2) => {
                if g2.order != 2 || g2.grid.points != grid.points {
                    return Err(Error::config("mismatched-tensors", "two-point tensor does not match grid"));
                }
                let p = grid.len();
                Ok((0..p)
                    .map(|i| (0..p).map(|j| g2.pooled.get(&[i, j])).collect())
                    .collect())
            }
        }
    }
}

fn check_pair(a: &CorrelationTensor, b: &CorrelationTensor) -> Result<()> {
    if a.grid.points != b.grid.points || a.n_experiments() != b.n_experiments() {
        return Err(Error::config(
            "mismatched-tensors",
            "correlators come from different grids or experiment counts",
        ));
    }
    Ok(())
}

/// G⁽⁴⁾ − (G₁₂G₃₄ + G₁₃G₂₄ + G₁₄G₂₃), per experiment.
pub fn connected4(emp4: &CorrelationTensor, two: TwoPoint<'_>) -> Result<CorrelationTensor> {
    if emp4.order != 4 {
        return Err(Error::config("unsupported-order", "connected4 needs an order-4 tensor"));
    }
    let g = two.matrix(&emp4.grid)?;
    let pairings = enumerate_pairings(4)?;
    let disc = SymTensor::from_fn(emp4.grid.len(), 4, |m| {
        crate::wick::wick_sum(&pairings, |a, b| g[m[a]][m[b]])
    });
    Ok(emp4.map_experiments(4, |t| t.zip_with(&disc, |a, b| a - b)))
}

/// The 15 ways of choosing the spectator pair of a six-point tuple, each as
/// (four remaining positions, pair positions).
pub fn six_point_splits() -> Vec<([usize; 4], [usize; 2])> {
    let mut out = Vec::with_capacity(15);
    for e in 0..6 {
        for f in e + 1..6 {
            let mut rest = [0; 4];
            let mut k = 0;
            for i in (0..6).filter(|&i| i != e && i != f) {
                rest[k] = i;
                k += 1;
            }
            out.push((rest, [e, f]));
        }
    }
    out
}

/// G⁽⁶⁾ minus the 15 G⁽⁴⁾_conn·G⁽²⁾ products minus the 15 triple-G⁽²⁾ terms,
/// per experiment. `conn4` must come from [`connected4`] on the same ensemble.
pub fn connected6(
    emp6: &CorrelationTensor,
    conn4: &CorrelationTensor,
    two: TwoPoint<'_>,
) -> Result<CorrelationTensor> {
    if emp6.order != 6 || conn4.order != 4 {
        return Err(Error::config("unsupported-order", "connected6 needs orders 6 and 4"));
    }
    check_pair(emp6, conn4)?;
    let g = two.matrix(&emp6.grid)?;
    let p = emp6.grid.len();
    let pairings = enumerate_pairings(6)?;
    let splits = six_point_splits();
    let triple = SymTensor::from_fn(p, 6, |m| crate::wick::wick_sum(&pairings, |a, b| g[m[a]][m[b]]));
    let per = emp6
        .per_experiment
        .iter()
        .zip(&conn4.per_experiment)
        .map(|(t6, c4)| {
            SymTensor::from_fn(p, 6, |m| {
                let mixed: f64 = splits
                    .iter()
                    .map(|(r, e)| c4.get(&[m[r[0]], m[r[1]], m[r[2]], m[r[3]]]) * g[m[e[0]]][m[e[1]]])
                    .sum();
                t6.get(m) - mixed - triple.get(m)
            })
        })
        .collect();
    Ok(CorrelationTensor::from_parts(6, emp6.grid.clone(), per, emp6.count_per_experiment))
}

/// Propagated noise of the connected six-point function,
/// √(δG⁽⁶⁾² + ⟨(G⁽²⁾·δG⁽⁴⁾)²⟩) per element, where ⟨·⟩ is the mean over the 15
/// spectator splits. Returns the tensor and its element mean.
pub fn g6_connected_background(
    dg6_std: &SymTensor,
    dg4_std: &SymTensor,
    g2: &[Vec<f64>],
) -> (SymTensor, f64) {
    let splits = six_point_splits();
    let t = SymTensor::from_fn(dg6_std.points, 6, |m| {
        let s6 = dg6_std.get(m);
        let mixed: f64 = splits
            .iter()
            .map(|(r, e)| {
                let v = g2[m[e[0]]][m[e[1]]] * dg4_std.get(&[m[r[0]], m[r[1]], m[r[2]], m[r[3]]]);
                v * v
            })
            .sum::<f64>()
            / splits.len() as f64;
        (s6 * s6 + mixed).sqrt()
    });
    let scalar = t.mean();
    (t, scalar)
}

/// Log-log slope of |value| against N over the masked points.
pub fn scaling_slope(series: &[(f64, f64)], mask: &[bool]) -> Result<LineFit> {
    assert_eq!(series.len(), mask.len());
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .iter()
        .zip(mask)
        .filter(|(_, &keep)| keep)
        .map(|(&(n, v), _)| (n.ln(), v.abs().ln()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientSignal {
            available: x.len(),
            required: 3,
        });
    }
    fit_line(&x, &y)
}

/// z-scores of odd-order pooled moments, which vanish by f → −f symmetry.
pub fn odd_moment_zscores(emp: &CorrelationTensor) -> SymTensor {
    emp.pooled.zip_with(&emp.std_error(), |m, s| if s > 0.0 { m / s } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> InputGrid {
        InputGrid::scalar("one", &[0.3]).unwrap()
    }

    #[test]
    fn constant_outputs() {
        let mut acc = MomentAccumulator::new(1);
        acc.push(&[2.0]);
        let g4 = empirical_npt(&[acc.clone(), acc], &grid1(), 4).unwrap();
        assert_eq!(g4.pooled.data, vec![16.0]);
        let g2 = empirical_npt(&[g4_acc(2.0), g4_acc(2.0)], &grid1(), 2).unwrap();
        let c = connected4(&g4, TwoPoint::Empirical(&g2)).unwrap();
        assert_eq!(c.pooled.data, vec![16.0 - 3.0 * 16.0]);
    }

    fn g4_acc(c: f64) -> MomentAccumulator {
        let mut a = MomentAccumulator::new(1);
        a.push(&[c]);
        a
    }

    #[test]
    fn background_arithmetic() {
        let six = SymTensor::from_fn(1, 6, |_| 3.0);
        let four = SymTensor::from_fn(1, 4, |_| 2.0);
        let (_, b) = g6_connected_background(&six, &four, &[vec![2.0]]);
        assert!((b - 5.0).abs() < 1e-15);
        let zero6 = SymTensor::zeros(1, 6);
        let zero4 = SymTensor::zeros(1, 4);
        assert_eq!(g6_connected_background(&zero6, &zero4, &[vec![2.0]]).1, 0.0);
        let (_, b) = g6_connected_background(&six, &zero4, &[vec![2.0]]);
        assert_eq!(b, 3.0);
    }

    #[test]
    fn slopes_of_power_laws() {
        let ns = [2.0, 5.0, 10.0, 100.0];
        let one: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 3.0 / n)).collect();
        let two: Vec<(f64, f64)> = ns.iter().map(|&n| (n, 3.0 / (n * n))).collect();
        let mask = [true; 4];
        assert!((scaling_slope(&one, &mask).unwrap().slope + 1.0).abs() < 1e-12);
        assert!((scaling_slope(&two, &mask).unwrap().slope + 2.0).abs() < 1e-12);
        let err = scaling_slope(&one, &[true, false, false, true]).unwrap_err();
        assert_eq!(err.code(), "insufficient-signal");
    }

    #[test]
    fn splits_cover_pairs() {
        let s = six_point_splits();
        assert_eq!(s.len(), 15);
        for (rest, pair) in s {
            let mut all: Vec<usize> = rest.iter().chain(pair.iter()).copied().collect();
            all.sort();
            assert_eq!(all, vec![0, 1, 2, 3, 4, 5]);
        }
    }
}
