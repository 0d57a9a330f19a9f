//! Closed-form two-point functions of the three architectures.
//!
//! Every kernel splits as K = K_b + K_W with K_b = σ_b² constant.

use std::f64::consts::{FRAC_2_PI, PI};

use crate::config::{Activation, ArchitectureSpec};
use crate::error::{Error, Result};

/// Slack allowed on arcsin/arccos arguments before they count as a domain error.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(x: &[f64], y: &[f64], spec: &ArchitectureSpec) {
    assert_eq!(x.len(), spec.d_in, "input dimension");
    assert_eq!(y.len(), spec.d_in, "input dimension");
}

fn clamp_unit(v: f64, what: &str) -> Result<f64> {
    if v.is_nan() || v.abs() > 1.0 + CLAMP_TOLERANCE {
        return Err(Error::KernelDomain(format!("{what} argument {v} outside [-1, 1]")));
    }
    Ok(v.clamp(-1.0, 1.0))
}

/// Pre-activation covariance σ_b² + (σ_W²/d_in)·u·v.
fn k0(u: &[f64], v: &[f64], spec: &ArchitectureSpec) -> f64 {
    spec.sigma_b_sq + spec.sigma_w_sq / spec.d_in as f64 * dot(u, v)
}

fn erf_weight(x: &[f64], y: &[f64], spec: &ArchitectureSpec) -> Result<f64> {
    let num = 2.0 * k0(x, y, spec);
    let den = ((1.0 + 2.0 * k0(x, x, spec)) * (1.0 + 2.0 * k0(y, y, spec))).sqrt();
    let arg = clamp_unit(num / den, "arcsin")?;
    Ok(spec.sigma_w_sq * FRAC_2_PI * arg.asin())
}

/// Angular part of the arc-cosine kernel, sin θ + (π − θ) cos θ.
fn arccos_j(cos_theta: f64) -> f64 {
    let theta = cos_theta.acos();
    theta.sin() + (PI - theta) * cos_theta
}

fn relu_weight(x: &[f64], y: &[f64], spec: &ArchitectureSpec) -> Result<f64> {
    let (kxx, kyy) = (k0(x, x, spec), k0(y, y, spec));
    if kxx <= 0.0 || kyy <= 0.0 {
        return Err(Error::DegenerateInput(
            "arc-cosine angle undefined for a zero-variance input".into(),
        ));
    }
    let norm = (kxx * kyy).sqrt();
    let c = clamp_unit(k0(x, y, spec) / norm, "arccos")?;
    Ok(spec.sigma_w_sq / (2.0 * PI) * norm * arccos_j(c))
}

fn gauss_weight(x: &[f64], y: &[f64], spec: &ArchitectureSpec) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    spec.sigma_w_sq * (-spec.sigma_w_sq * d2 / (2.0 * spec.d_in as f64)).exp()
}

pub fn kernel_erf(x: &[f64], y: &[f64], spec: &ArchitectureSpec) -> Result<f64> {
    check_dims(x, y, spec);
    Ok(spec.sigma_b_sq + erf_weight(x, y, spec)?)
}

pub fn kernel_relu(x: &[f64], y: &[f64], spec: &ArchitectureSpec) -> Result<f64> {
    check_dims(x, y, spec);
    Ok(spec.sigma_b_sq + relu_weight(x, y, spec)?)
}

pub fn kernel_gauss(x: &[f64], y: &[f64], spec: &ArchitectureSpec) -> Result<f64> {
    check_dims(x, y, spec);
    Ok(spec.sigma_b_sq + gauss_weight(x, y, spec))
}

/// K(x, x') − σ_b² for the architecture in `spec`.
pub fn kernel_w(x: &[f64], y: &[f64], spec: &ArchitectureSpec) -> Result<f64> {
    check_dims(x, y, spec);
    match spec.activation {
        Activation::Erf => erf_weight(x, y, spec),
        Activation::ReLU => relu_weight(x, y, spec),
        Activation::Gauss => Ok(gauss_weight(x, y, spec)),
    }
}

/// Analytic kernel of one architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelModel {
    pub spec: ArchitectureSpec,
}

impl KernelModel {
    pub fn new(spec: ArchitectureSpec) -> Self {
        KernelModel { spec }
    }

    pub fn d_in(&self) -> usize {
        self.spec.d_in
    }

    pub fn k_b(&self) -> f64 {
        self.spec.sigma_b_sq
    }

    pub fn k(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.k_b() + self.k_w(x, y)?)
    }

    pub fn k_w(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        kernel_w(x, y, &self.spec)
    }

    /// K_W for use inside integrands. The arc-cosine kernel is continued by 0
    /// at a zero-variance input (its limit, since it carries a √(K₀K₀′)
    /// factor); domain errors become NaN so that quadrature fails loudly.
    pub fn k_w_integrand(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.spec.activation {
            Activation::ReLU if k0(x, x, &self.spec) <= 0.0 || k0(y, y, &self.spec) <= 0.0 => 0.0,
            _ => self.k_w(x, y).unwrap_or(f64::NAN),
        }
    }

    /// Gram matrix K(x_i, x_j), row-major.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points
            .iter()
            .map(|x| points.iter().map(|y| self.k(x, y)).collect())
            .collect()
    }
}
