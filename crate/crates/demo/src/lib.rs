//! Browser bindings for three small experiments. Each entry point returns a
//! JSON string that `www/index.html` plots on a canvas.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use nnqft::config::{builtin_grid, Activation, ArchitectureSpec, ExperimentPlan, GridName};
use nnqft::correlators::{deviation, scaling_slope};
use nnqft::kernels::KernelModel;
use nnqft::quadrature::QuadratureSpec;
use nnqft::rg::{cutoff_sweep, fit_rg_slope};
use nnqft::sampler::EnsembleMoments;

pub const FALLOFF_WIDTHS: [usize; 7] = [2, 3, 4, 5, 10, 20, 50];
pub const FLOW_CUTOFFS: [f64; 7] = [1e3, 2e3, 5e3, 1e4, 2e4, 5e4, 1e5];
const EXPERIMENTS: usize = 4;

fn parse_activation(name: &str) -> nnqft::Result<Activation> {
    serde_json::from_value(serde_json::Value::String(name.to_lowercase())).map_err(Into::into)
}

#[derive(Serialize)]
pub struct KernelCurves {
    pub xs: Vec<f64>,
    pub erf: Vec<f64>,
    pub relu: Vec<f64>,
    pub gauss: Vec<f64>,
}

/// K(x0, x) for the three architectures at unit weight and bias variances
/// (ReLU without bias), on `n` points of [lo, hi].
pub fn kernel_curves_data(x0: f64, lo: f64, hi: f64, n: usize) -> nnqft::Result<KernelCurves> {
    let n = n.max(2);
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let curve = |act| -> nnqft::Result<Vec<f64>> {
        let k = KernelModel::new(ArchitectureSpec::standard(act, 1));
        xs.iter()
            .map(|&x| match k.k(&[x0], &[x]) {
                // ReLU at a zero-variance input: K_W vanishes in the limit
                Err(e) if e.code() == "degenerate-input" => Ok(k.k_b()),
                r => r,
            })
            .collect()
    };
    Ok(KernelCurves {
        erf: curve(Activation::Erf)?,
        relu: curve(Activation::ReLU)?,
        gauss: curve(Activation::Gauss)?,
        xs,
    })
}

#[derive(Serialize)]
pub struct Falloff {
    pub widths: Vec<usize>,
    pub m4: Vec<f64>,
    pub m4_background: Vec<f64>,
    pub m6: Vec<f64>,
    pub m6_background: Vec<f64>,
    pub m4_slope: Option<f64>,
    pub m6_slope: Option<f64>,
}

/// Mean |m₄| and |m₆| against width for a small ensemble on the default grid.
pub fn falloff_data(activation: &str, nets: usize, seed: u64) -> nnqft::Result<Falloff> {
    let act = parse_activation(activation)?;
    let spec = ArchitectureSpec::standard(act, 1);
    let plan = ExperimentPlan {
        n_experiments: EXPERIMENTS,
        nets_per_experiment: nets,
        widths: FALLOFF_WIDTHS.to_vec(),
        seed,
        grid: builtin_grid(&GridName::default_for(act)),
    };
    nnqft::config::validate(&plan, &spec)?;
    let mut out = Falloff {
        widths: FALLOFF_WIDTHS.to_vec(),
        m4: Vec::new(),
        m4_background: Vec::new(),
        m6: Vec::new(),
        m6_background: Vec::new(),
        m4_slope: None,
        m6_slope: None,
    };
    for &w in &FALLOFF_WIDTHS {
        let snap = EnsembleMoments::sample(&plan, &spec, w)?;
        let k = KernelModel::new(spec.with_width(w));
        let d4 = deviation(&snap.npt(4)?, &k)?;
        let d6 = deviation(&snap.npt(6)?, &k)?;
        out.m4.push(d4.mean_abs_m);
        out.m4_background.push(d4.background);
        out.m6.push(d6.mean_abs_m);
        out.m6_background.push(d6.background);
    }
    let slope = |sig: &[f64], bg: &[f64]| {
        let series: Vec<(f64, f64)> = FALLOFF_WIDTHS.iter().zip(sig).map(|(&w, &s)| (w as f64, s)).collect();
        let mask: Vec<bool> = sig.iter().zip(bg).map(|(s, b)| s > b).collect();
        scaling_slope(&series, &mask).ok().map(|f| f.slope)
    };
    out.m4_slope = slope(&out.m4, &out.m4_background);
    out.m6_slope = slope(&out.m6, &out.m6_background);
    Ok(out)
}

#[derive(Serialize)]
pub struct Flow {
    pub cutoffs: Vec<f64>,
    pub lambda_bar: Vec<Option<f64>>,
    pub slope: f64,
    pub theory_slope: Option<f64>,
}

/// λ̄(Λ) for ReLU-net at input dimension 1, 2 or 3.
pub fn relu_flow_data(d_in: usize, width: usize, nets: usize, seed: u64) -> nnqft::Result<Flow> {
    let name = match d_in {
        1 => GridName::ReluDefault,
        2 => GridName::ReluD2,
        _ => GridName::ReluD3,
    };
    let grid = builtin_grid(&name);
    let spec = ArchitectureSpec::standard(Activation::ReLU, grid.dim());
    let plan = ExperimentPlan {
        n_experiments: EXPERIMENTS,
        nets_per_experiment: nets,
        widths: vec![width],
        seed,
        grid,
    };
    nnqft::config::validate(&plan, &spec)?;
    let snap = EnsembleMoments::sample(&plan, &spec, width)?;
    let g4 = snap.npt(4)?;
    let k = KernelModel::new(spec.with_width(width));
    let q = QuadratureSpec::default_for(spec.d_in);
    let mut sweep = cutoff_sweep(&g4.pooled, &g4.grid, &k, &FLOW_CUTOFFS, &q)?;
    let (slope, _) = fit_rg_slope(&mut sweep, FLOW_CUTOFFS[0])?;
    Ok(Flow {
        cutoffs: FLOW_CUTOFFS.to_vec(),
        lambda_bar: sweep.points.iter().map(|p| p.lambda_bar).collect(),
        slope,
        theory_slope: sweep.theory_slope,
    })
}

fn to_js<T: Serialize>(r: nnqft::Result<T>) -> Result<String, JsValue> {
    r.map(|v| serde_json::to_string(&v).expect("serializable"))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn kernel_curves(x0: f64, lo: f64, hi: f64, n: usize) -> Result<String, JsValue> {
    to_js(kernel_curves_data(x0, lo, hi, n))
}

#[wasm_bindgen]
pub fn falloff(activation: &str, nets: usize, seed: u64) -> Result<String, JsValue> {
    to_js(falloff_data(activation, nets, seed))
}

#[wasm_bindgen]
pub fn relu_flow(d_in: usize, width: usize, nets: usize, seed: u64) -> Result<String, JsValue> {
    to_js(relu_flow_data(d_in, width, nets, seed))
}
