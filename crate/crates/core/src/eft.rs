//! Leading-order interaction corrections: quartic coupling λ(y) = λ₀ + λ₂|y|²
//! and sextic coupling κ, integrated over the cutoff box.

use serde::{Deserialize, Serialize};

use crate::correlators::{six_point_splits, CorrelationTensor};
use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::quadrature::{integrate_box_vec, Cutoff, QuadratureSpec};
use crate::stats::std_dev;
use crate::symmetric::{multisets, SymTensor};
use crate::wick::{enumerate_pairings, gp_tensor, wick_sum};

/// Couplings and integration settings of the effective action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EftConfig {
    pub lambda0: f64,
    pub lambda2: f64,
    /// Non-local quartic coefficient; enters only through fitted features.
    pub lambda_nl: f64,
    pub kappa: f64,
    pub cutoff: Cutoff,
    pub quad: QuadratureSpec,
}

impl EftConfig {
    /// All couplings zero.
    pub fn free(cutoff: Cutoff, quad: QuadratureSpec) -> Self {
        EftConfig {
            lambda0: 0.0,
            lambda2: 0.0,
            lambda_nl: 0.0,
            kappa: 0.0,
            cutoff,
            quad,
        }
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0 = lambda0;
        self
    }
}

/// Extra factor under the integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    One,
    /// |y|².
    NormSq,
    /// K_W(y, y).
    SelfKernel,
}

fn max_norm(points: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| crate::config::norm(p)).fold(0.0, f64::max)
}

/// Requires a finite cutoff to enclose every input.
pub fn check_cutoff(cutoff: Cutoff, points: &[Vec<f64>]) -> Result<()> {
    if let Cutoff::Finite(l) = cutoff {
        let m = max_norm(points);
        if !(l > m) {
            return Err(Error::config(
                "cutoff-below-inputs",
                format!("cutoff {l} does not exceed the largest input norm {m}"),
            ));
        }
    }
    Ok(())
}

/// ∫ w(y) Π_{i∈m} K_W(x_i, y) dy over the box for every multiset m of size
/// `rank` over `points` (which may repeat).
pub fn kw_integrals(
    kernel: &KernelModel,
    points: &[Vec<f64>],
    rank: usize,
    weight: Weight,
    cutoff: Cutoff,
    quad: &QuadratureSpec,
) -> Result<SymTensor> {
    check_cutoff(cutoff, points)?;
    let p = points.len();
    let sets = multisets(p, rank);
    let quad = quad.with_input_scale(max_norm(points));
    let data = integrate_box_vec(
        |y, out| {
            let kw: Vec<f64> = points.iter().map(|x| kernel.k_w_integrand(x, y)).collect();
            let w = match weight {
                Weight::One => 1.0,
                Weight::NormSq => y.iter().map(|v| v * v).sum(),
                Weight::SelfKernel => kernel.k_w_integrand(y, y),
            };
            for (o, m) in out.iter_mut().zip(&sets) {
                *o = w * m.iter().map(|&i| kw[i]).product::<f64>();
            }
        },
        sets.len(),
        cutoff,
        kernel.d_in(),
        &quad,
    )?;
    Ok(SymTensor {
        points: p,
        rank,
        data,
    })
}

fn four(points: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    if points.len() != 4 {
        return Err(Error::config("wrong-arity", format!("expected 4 points, got {}", points.len())));
    }
    Ok(points.iter().map(|p| p.to_vec()).collect())
}

/// −24∫λ(y)ΠK_W(x_i,y)dy − 360κ∫K_W(z,z)ΠK_W(x_i,z)dz at four points.
pub fn g4_correction(kernel: &KernelModel, points: &[&[f64]], eft: &EftConfig) -> Result<f64> {
    let pts = four(points)?;
    let all = [0usize, 1, 2, 3];
    let mut total = 0.0;
    let terms = [
        (eft.lambda0, Weight::One, -24.0),
        (eft.lambda2, Weight::NormSq, -24.0),
        (eft.kappa, Weight::SelfKernel, -360.0),
    ];
    for (c, w, factor) in terms {
        if c != 0.0 {
            let t = kw_integrals(kernel, &pts, 4, w, eft.cutoff, &eft.quad)?;
            total += factor * c * t.get(&all);
        }
    }
    Ok(total)
}

/// GP four-point function plus the interaction correction.
pub fn predict_g4(kernel: &KernelModel, points: &[&[f64]], eft: &EftConfig) -> Result<f64> {
    Ok(crate::wick::gp_npt(kernel, points)? + g4_correction(kernel, points, eft)?)
}

/// λ_m = [K₁₂K₃₄ + K₁₃K₂₄ + K₁₄K₂₃ − G⁽⁴⁾] / [24∫ΠK_W(x_i,y)dy] per element
/// of the pooled four-point tensor.
pub fn extract_lambda_m(
    emp4: &CorrelationTensor,
    kernel: &KernelModel,
    cutoff: Cutoff,
    quad: &QuadratureSpec,
) -> Result<SymTensor> {
    let i4 = kw_integrals(kernel, &emp4.grid.points, 4, Weight::One, cutoff, quad)?;
    lambda_m_from_integrals(&emp4.pooled, kernel, &emp4.grid.points, &i4)
}

/// λ_m from a four-point tensor and precomputed quartic integrals.
pub fn lambda_m_from_integrals(
    g4: &SymTensor,
    kernel: &KernelModel,
    points: &[Vec<f64>],
    i4: &SymTensor,
) -> Result<SymTensor> {
    let gp = gp_tensor(&kernel.gram(points)?, 4)?;
    let mut out = SymTensor::zeros(points.len(), 4);
    for (k, slot) in out.data.iter_mut().enumerate() {
        let den = 24.0 * i4.data[k];
        if !(den.abs() >= 1e-30) {
            return Err(Error::DegenerateMeasure(format!(
                "quartic integral {den:e} at element {:?}",
                out_index(points.len(), k)
            )));
        }
        *slot = (gp.data[k] - g4.data[k]) / den;
    }
    Ok(out)
}

fn out_index(p: usize, k: usize) -> Vec<usize> {
    multisets(p, 4).swap_remove(k)
}

/// Mean over unique elements.
pub fn lambda_bar(lambda_m: &SymTensor) -> f64 {
    lambda_m.mean()
}

/// Standard deviation over unique elements divided by |mean|.
pub fn lambda_rel_spread(lambda_m: &SymTensor) -> f64 {
    std_dev(&lambda_m.data) / lambda_bar(lambda_m).abs()
}

/// Σ over the 15 spectator splits of I4(four points)·K(pair), per element of
/// a six-point tensor. The λ̄ correction is −24λ̄ times this.
fn quartic_six_sum(i4: &SymTensor, gram: &[Vec<f64>]) -> SymTensor {
    let splits = six_point_splits();
    SymTensor::from_fn(i4.points, 6, |m| {
        splits
            .iter()
            .map(|(r, e)| i4.get(&[m[r[0]], m[r[1]], m[r[2]], m[r[3]]]) * gram[m[e[0]]][m[e[1]]])
            .sum()
    })
}

/// Six-point prediction at one tuple: 15-term GP sum − 24λ̄ Σ_15 ∫ΠK_W·K.
pub fn predict_g6(
    kernel: &KernelModel,
    points: &[&[f64]],
    lambda_bar: f64,
    cutoff: Cutoff,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if points.len() != 6 {
        return Err(Error::config("wrong-arity", format!("expected 6 points, got {}", points.len())));
    }
    let pts: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    let t = predict_g6_tensor(kernel, &pts, lambda_bar, cutoff, quad)?;
    Ok(t.get(&[0, 1, 2, 3, 4, 5]))
}

/// [`predict_g6`] for every element of a grid.
pub fn predict_g6_tensor(
    kernel: &KernelModel,
    points: &[Vec<f64>],
    lambda_bar: f64,
    cutoff: Cutoff,
    quad: &QuadratureSpec,
) -> Result<SymTensor> {
    let i4 = kw_integrals(kernel, points, 4, Weight::One, cutoff, quad)?;
    let gram = kernel.gram(points)?;
    Ok(predict_g6_from_integrals(&i4, &gram, lambda_bar))
}

pub fn predict_g6_from_integrals(i4: &SymTensor, gram: &[Vec<f64>], lambda_bar: f64) -> SymTensor {
    let pairings = enumerate_pairings(6).expect("six is even");
    let gp = SymTensor::from_fn(i4.points, 6, |m| wick_sum(&pairings, |a, b| gram[m[a]][m[b]]));
    let corr = quartic_six_sum(i4, gram);
    gp.zip_with(&corr, |g, c| g - 24.0 * lambda_bar * c)
}

/// κ contributions to the six-point function:
/// −720κ∫ΠK_W(x_i,z) − 360κ Σ_15 ∫K_W(z,z)ΠK_W(4 points)·K(pair).
/// Diagnostics only; predictions keep κ = 0.
pub fn g6_kappa_correction(
    kernel: &KernelModel,
    points: &[Vec<f64>],
    kappa: f64,
    cutoff: Cutoff,
    quad: &QuadratureSpec,
) -> Result<SymTensor> {
    let i6 = kw_integrals(kernel, points, 6, Weight::One, cutoff, quad)?;
    let j4 = kw_integrals(kernel, points, 4, Weight::SelfKernel, cutoff, quad)?;
    let gram = kernel.gram(points)?;
    let mixed = quartic_six_sum(&j4, &gram);
    Ok(i6.zip_with(&mixed, |a, b| -720.0 * kappa * a - 360.0 * kappa * b))
}

/// (G⁽⁶⁾ − prediction)/G⁽⁶⁾; zero empirical elements are flagged and set to 0.
pub fn delta6(emp6: &SymTensor, prediction: &SymTensor) -> (SymTensor, Vec<bool>) {
    let flags: Vec<bool> = emp6.data.iter().map(|&g| g == 0.0).collect();
    let d = emp6.zip_with(prediction, |g, p| if g == 0.0 { 0.0 } else { (g - p) / g });
    (d, flags)
}

/// Mean |δ| over unflagged elements.
pub fn delta_mean_abs(delta: &SymTensor, flags: &[bool]) -> f64 {
    let v: Vec<f64> = delta
        .data
        .iter()
        .zip(flags)
        .filter(|(_, &f)| !f)
        .map(|(d, _)| d.abs())
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}
