//! Least-squares fits of local and non-local quartic couplings to measured
//! four-point deviations, with held-out evaluation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::InputGrid;
use crate::eft::{kw_integrals, Weight};
use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::quadrature::{Cutoff, QuadratureSpec};
use crate::symmetric::SymTensor;

/// Smallest accepted ratio of extreme singular values of the normalized design.
pub const COLLINEARITY_THRESHOLD: f64 = 1e-9;

/// Coefficient tensors of (λ₀, λ₂, λ_NL) in the four-point correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensors {
    pub t0: SymTensor,
    pub t2: SymTensor,
    pub tnl: SymTensor,
    pub cutoff: Cutoff,
}

/// T0 = 24∫ΠK_W, T2 = 24∫|y|²ΠK_W and
/// TNL = 8∫∫[K_W(x₁,x)K_W(x₂,x)K_W(x₃,y)K_W(x₄,y) + two more pairings].
///
/// The double integral factorizes into products of A_ij = ∫K_W(x_i,y)K_W(x_j,y)dy,
/// which is what a tensored rule over (x, y) computes as well.
pub fn build_features(
    kernel: &KernelModel,
    grid: &InputGrid,
    cutoff: Cutoff,
    quad: &QuadratureSpec,
) -> Result<FeatureTensors> {
    let pts = &grid.points;
    let t0 = kw_integrals(kernel, pts, 4, Weight::One, cutoff, quad)?.map(|v| 24.0 * v);
    let t2 = kw_integrals(kernel, pts, 4, Weight::NormSq, cutoff, quad)?.map(|v| 24.0 * v);
    let a = kw_integrals(kernel, pts, 2, Weight::One, cutoff, quad)?;
    let tnl = SymTensor::from_fn(grid.len(), 4, |m| {
        let g = |i: usize, j: usize| a.get(&[m[i], m[j]]);
        8.0 * (g(0, 1) * g(2, 3) + g(0, 2) * g(1, 3) + g(0, 3) * g(1, 2))
    });
    Ok(FeatureTensors { t0, t2, tnl, cutoff })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    M0,
    M1,
    M2,
    M3,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::M0, Model::M1, Model::M2, Model::M3];

    pub fn n_couplings(self) -> usize {
        match self {
            Model::M0 => 0,
            Model::M1 => 1,
            Model::M2 => 2,
            Model::M3 => 3,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Model::M0 => "m0",
            Model::M1 => "m1",
            Model::M2 => "m2",
            Model::M3 => "m3",
        };
        f.write_str(s)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m0" => Ok(Model::M0),
            "m1" => Ok(Model::M1),
            "m2" => Ok(Model::M2),
            "m3" => Ok(Model::M3),
            other => Err(Error::config("unknown-model", format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: Model,
    pub lambda0: f64,
    pub lambda2: f64,
    pub lambda_nl: f64,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    /// Percent.
    pub test_mape: Option<f64>,
    /// Test elements left out of the MAPE because the measured value is 0.
    pub test_excluded: usize,
    pub cutoff: Cutoff,
}

impl FitReport {
    pub fn couplings(&self) -> [f64; 3] {
        [self.lambda0, self.lambda2, self.lambda_nl]
    }
}

fn columns(model: Model, f: &FeatureTensors) -> Vec<&SymTensor> {
    [&f.t0, &f.t2, &f.tnl]
        .into_iter()
        .take(model.n_couplings())
        .collect()
}

/// ΔG⁽⁴⁾ predicted by the couplings: −(λ₀T0 + λ₂T2 + λ_NL·TNL).
pub fn predict(couplings: [f64; 3], f: &FeatureTensors) -> SymTensor {
    let mut out = f.t0.map(|v| -couplings[0] * v);
    for (c, t) in [(couplings[1], &f.t2), (couplings[2], &f.tnl)] {
        if c != 0.0 {
            out = out.zip_with(t, |a, b| a - c * b);
        }
    }
    out
}

fn mse(a: &SymTensor, b: &SymTensor) -> f64 {
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Least-squares couplings minimizing Σ(ΔG⁽⁴⁾ − ΔG⁽⁴⁾_EFT)² over unique elements.
pub fn fit_model(model: Model, dg4_train: &SymTensor, features: &FeatureTensors) -> Result<FitReport> {
    let cols = columns(model, features);
    let rows = dg4_train.len();
    let k = cols.len();
    if rows < k {
        return Err(Error::InsufficientSignal {
            available: rows,
            required: k,
        });
    }
    let mut c = [0.0; 3];
    if k > 0 {
        // columns scaled to unit norm so the conditioning test is unit-free
        let scales: Vec<f64> = cols
            .iter()
            .map(|t| t.data.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        if scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::CollinearFeatures("a feature tensor vanishes".into()));
        }
        let a = DMatrix::from_fn(rows, k, |i, j| -cols[j].data[i] / scales[j]);
        let b = DVector::from_column_slice(&dg4_train.data);
        let svd = a.svd(true, true);
        let sv = &svd.singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > COLLINEARITY_THRESHOLD * smax) {
            return Err(Error::CollinearFeatures(format!(
                "{model}: singular value ratio {:.3e}",
                smin / smax
            )));
        }
        let x = svd
            .solve(&b, 0.0)
            .map_err(|e| Error::CollinearFeatures(e.to_string()))?;
        for j in 0..k {
            c[j] = x[j] / scales[j];
        }
    }
    let fitted = predict(c, features);
    Ok(FitReport {
        model,
        lambda0: c[0],
        lambda2: c[1],
        lambda_nl: c[2],
        train_mse: mse(dg4_train, &fitted),
        test_mse: None,
        test_mape: None,
        test_excluded: 0,
        cutoff: features.cutoff,
    })
}

/// Held-out errors of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mse: f64,
    /// Percent.
    pub mape: f64,
    pub excluded: usize,
}

/// MSE over unique elements and MAPE = (100/p)Σ|A − F|/|A| over elements with A ≠ 0.
pub fn evaluate(couplings: [f64; 3], dg4_test: &SymTensor, features: &FeatureTensors) -> Evaluation {
    let f = predict(couplings, features);
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, p) in dg4_test.data.iter().zip(&f.data) {
        if *a != 0.0 {
            sum += ((a - p) / a).abs();
            used += 1;
        }
    }
    Evaluation {
        mse: mse(dg4_test, &f),
        mape: if used > 0 { 100.0 * sum / used as f64 } else { f64::NAN },
        excluded: dg4_test.len() - used,
    }
}

/// Fits on the training tensors and fills in the test errors.
pub fn fit_and_evaluate(
    model: Model,
    dg4_train: &SymTensor,
    train: &FeatureTensors,
    dg4_test: &SymTensor,
    test: &FeatureTensors,
) -> Result<FitReport> {
    let mut report = fit_model(model, dg4_train, train)?;
    let ev = evaluate(report.couplings(), dg4_test, test);
    report.test_mse = Some(ev.mse);
    report.test_mape = Some(ev.mape);
    report.test_excluded = ev.excluded;
    Ok(report)
}
