//! Cutoff dependence of the extracted quartic coupling.

use serde::{Deserialize, Serialize};

use crate::config::{Activation, InputGrid};
use crate::eft::{kw_integrals, lambda_bar, lambda_m_from_integrals, lambda_rel_spread, Weight};
use crate::error::{Error, Result};
use crate::kernels::KernelModel;
use crate::quadrature::{Cutoff, QuadratureSpec};
use crate::stats::fit_line;
use crate::symmetric::SymTensor;

/// One cutoff of a sweep. Failed extractions keep their error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub cutoff: f64,
    pub lambda_bar: Option<f64>,
    pub rel_spread: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub activation: Activation,
    pub width: usize,
    pub d_in: usize,
    pub points: Vec<SweepPoint>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub theory_slope: Option<f64>,
}

/// Re-extracts λ̄ from one pooled four-point tensor at every cutoff.
pub fn cutoff_sweep(
    g4: &SymTensor,
    grid: &InputGrid,
    kernel: &KernelModel,
    cutoffs: &[f64],
    quad: &QuadratureSpec,
) -> Result<SweepResult> {
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("cutoffs-not-increasing", "cutoffs must be strictly increasing"));
    }
    if cutoffs.iter().any(|c| !c.is_finite() || *c <= 0.0) {
        return Err(Error::config("invalid-cutoff", "sweep cutoffs must be finite and positive"));
    }
    let spec = kernel.spec;
    let points = cutoffs
        .iter()
        .map(|&c| {
            let res = kw_integrals(kernel, &grid.points, 4, Weight::One, Cutoff::Finite(c), quad)
                .and_then(|i4| lambda_m_from_integrals(g4, kernel, &grid.points, &i4));
            match res {
                Ok(lm) => SweepPoint {
                    cutoff: c,
                    lambda_bar: Some(lambda_bar(&lm)),
                    rel_spread: Some(lambda_rel_spread(&lm)),
                    error: None,
                },
                Err(e) => SweepPoint {
                    cutoff: c,
                    lambda_bar: None,
                    rel_spread: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let theory_slope = match spec.activation {
        Activation::ReLU if spec.sigma_b_sq == 0.0 => beta_theory_relu(spec.d_in).ok(),
        _ => None,
    };
    Ok(SweepResult {
        activation: spec.activation,
        width: spec.width,
        d_in: spec.d_in,
        points,
        slope: None,
        intercept: None,
        slope_stderr: None,
        theory_slope,
    })
}

/// Large-cutoff slope of log λ̄ against log Λ for ReLU networks: −(d_in + 4).
pub fn beta_theory_relu(d_in: usize) -> Result<f64> {
    if !(1..=3).contains(&d_in) {
        return Err(Error::config("unsupported-dimension", format!("d_in = {d_in}")));
    }
    Ok(-(d_in as f64 + 4.0))
}

/// OLS of log|λ̄| on log Λ over valid points with Λ ≥ `min_cutoff`; fills the
/// slope fields of `sweep` and returns (slope, stderr).
pub fn fit_rg_slope(sweep: &mut SweepResult, min_cutoff: f64) -> Result<(f64, f64)> {
    let (x, y): (Vec<f64>, Vec<f64>) = sweep
        .points
        .iter()
        .filter(|p| p.cutoff >= min_cutoff)
        .filter_map(|p| p.lambda_bar.filter(|l| *l != 0.0).map(|l| (p.cutoff.ln(), l.abs().ln())))
        .unzip();
    if x.len() < 4 {
        return Err(Error::InsufficientSignal {
            available: x.len(),
            required: 4,
        });
    }
    let fit = fit_line(&x, &y)?;
    sweep.slope = Some(fit.slope);
    sweep.intercept = Some(fit.intercept);
    sweep.slope_stderr = Some(fit.slope_stderr);
    Ok((fit.slope, fit.slope_stderr))
}

/// Scaling dimension of a coupling multiplying k fields whose kernel has
/// dimension `kernel_dim`: −d_in − k·kernel_dim/2.
pub fn coupling_dimension(kernel_dim: f64, k: u32, d_in: usize) -> f64 {
    -(d_in as f64) - k as f64 * kernel_dim / 2.0
}
