//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Sampling runs at desk scale (20 experiments of 5·10⁴ networks). The process
//! exits 0 unless `NNQFT_ACCEPTANCE_STRICT=1` is set and a criterion failed.
//! `NNQFT_ACCEPTANCE_ONLY=AC2,AC7` restricts the run to the listed criteria.

use std::collections::HashMap;
use std::time::Instant;

use nnqft::config::{
    builtin_grid, default_cutoff, default_fit_cutoff, Activation, ArchitectureSpec, ExperimentPlan, GridName, InputGrid, Scale, PAPER_WIDTHS,
    RELU_CUTOFFS,
};
use nnqft::correlators::{
    connected4, connected6, deviation, g6_connected_background, gp_npt_tensor, scaling_slope, TwoPoint,
};
use nnqft::eft::{
    extract_lambda_m, kw_integrals, lambda_bar, lambda_m_from_integrals, lambda_rel_spread, predict_g6_tensor,
    Weight,
};
use nnqft::fit::{build_features, fit_and_evaluate, fit_model, predict, FeatureTensors, Model};
use nnqft::kernels::KernelModel;
use nnqft::quadrature::{integrate_box, Cutoff, QuadratureSpec};
use nnqft::rg::{beta_theory_relu, cutoff_sweep, fit_rg_slope};
use nnqft::sampler::EnsembleMoments;
use nnqft::symmetric::SymTensor;
use nnqft::wick::{enumerate_pairings, gp_npt};

const SEED: u64 = 20_240_601;
const ARCHS: [Activation; 3] = [Activation::Erf, Activation::ReLU, Activation::Gauss];

/// Widths at which the couplings are fitted and the six-point function predicted.
fn fit_width(act: Activation) -> usize {
    match act {
        Activation::Gauss => 1000,
        Activation::ReLU => 20,
        Activation::Erf => 5,
    }
}

fn cutoff_for(act: Activation) -> Cutoff {
    default_cutoff(act)
}

/// Ensembles shared between criteria, keyed by (activation, d_in, grid, width).
struct Ensembles {
    cache: HashMap<(Activation, usize, String, usize), EnsembleMoments>,
}

impl Ensembles {
    fn get(&mut self, act: Activation, d: usize, grid: &GridName, width: usize) -> &EnsembleMoments {
        let key = (act, d, grid.to_string(), width);
        self.cache.entry(key).or_insert_with(|| {
            let t = Instant::now();
            let plan = ExperimentPlan::new(Scale::Desk, vec![width], SEED, builtin_grid(grid));
            let spec = ArchitectureSpec::standard(act, d);
            let e = EnsembleMoments::sample(&plan, &spec, width).expect("sampling");
            eprintln!("  sampled {act} d={d} {grid} N={width} in {:.1}s", t.elapsed().as_secs_f64());
            e
        })
    }

    fn default(&mut self, act: Activation, width: usize) -> &EnsembleMoments {
        self.get(act, 1, &GridName::default_for(act), width)
    }
}

fn kernel(act: Activation, d: usize, width: usize) -> KernelModel {
    KernelModel::new(ArchitectureSpec::standard(act, d).with_width(width))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: &str, title: &str, outcome: Outcome, tally: &mut Vec<(String, bool)>) {
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    println!("{id:<5} {tag}  {title} | {}", outcome.detail);
    tally.push((id.to_string(), outcome.pass));
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn ac1(ens: &mut Ensembles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for act in ARCHS {
        for width in [5, 20, 100, 1000] {
            let e = ens.default(act, width);
            let g2 = e.npt(2).unwrap();
            let k = kernel(act, 1, width);
            let gp = gp_npt_tensor(&k, &g2.grid, 2).unwrap();
            let se = g2.std_error();
            let zmax = g2
                .pooled
                .data
                .iter()
                .zip(&gp.data)
                .zip(&se.data)
                .map(|((a, b), s)| ((a - b) / s).abs())
                .fold(0.0, f64::max);
            let dev = deviation(&g2, &k).unwrap();
            let ok = zmax < 4.0 && dev.mean_abs_m <= dev.background;
            pass &= ok;
            if !ok || width == 1000 {
                parts.push(format!(
                    "{act} N={width}: max|z|={zmax:.2} |m2|={:.1e} bg={:.1e}",
                    dev.mean_abs_m, dev.background
                ));
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

/// Slope over the widths where the signal exceeds its background.
fn masked_slope(widths: &[usize], signal: &[f64], background: &[f64]) -> (Result<f64, String>, usize) {
    let series: Vec<(f64, f64)> = widths.iter().zip(signal).map(|(&n, &v)| (n as f64, v)).collect();
    let mask: Vec<bool> = signal.iter().zip(background).map(|(s, b)| s > b).collect();
    let used = mask.iter().filter(|m| **m).count();
    (scaling_slope(&series, &mask).map(|f| f.slope).map_err(|e| e.to_string()), used)
}

fn ac2(ens: &mut Ensembles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for act in ARCHS {
        for order in [4, 6] {
            let (mut sig, mut bg) = (Vec::new(), Vec::new());
            for &w in &PAPER_WIDTHS {
                let d = deviation(&ens.default(act, w).npt(order).unwrap(), &kernel(act, 1, w)).unwrap();
                sig.push(d.mean_abs_m);
                bg.push(d.background);
            }
            let (slope, used) = masked_slope(&PAPER_WIDTHS, &sig, &bg);
            match slope {
                Ok(s) => {
                    pass &= within(s, -1.0, 0.25);
                    parts.push(format!("{act} m{order}: {s:.3} ({used} widths)"));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{act} m{order}: {e}"));
                }
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn ac3(ens: &mut Ensembles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for act in [Activation::ReLU, Activation::Gauss] {
        let (mut sig, mut bg) = (Vec::new(), Vec::new());
        for &w in &PAPER_WIDTHS {
            let e = ens.default(act, w);
            let k = kernel(act, 1, w);
            let (g4, g6) = (e.npt(4).unwrap(), e.npt(6).unwrap());
            let c4 = connected4(&g4, TwoPoint::Kernel(&k)).unwrap();
            let c6 = connected6(&g6, &c4, TwoPoint::Kernel(&k)).unwrap();
            let gram = k.gram(&g6.grid.points).unwrap();
            let (_, b) = g6_connected_background(&g6.std_across(), &g4.std_across(), &gram);
            sig.push(c6.pooled.mean_abs());
            bg.push(b);
        }
        let (slope, used) = masked_slope(&PAPER_WIDTHS, &sig, &bg);
        match slope {
            Ok(s) => {
                pass &= within(s, -2.0, 0.5);
                parts.push(format!("{act}: {s:.3} ({used} widths)"));
            }
            Err(e) => {
                pass = false;
                let ratio = sig.iter().zip(&bg).map(|(s, b)| s / b).fold(0.0, f64::max);
                parts.push(format!("{act}: {e}; largest signal/background {ratio:.2}"));
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn lambda_m_of(ens: &mut Ensembles, act: Activation, width: usize) -> SymTensor {
    let g4 = ens.default(act, width).npt(4).unwrap();
    extract_lambda_m(&g4, &kernel(act, 1, width), cutoff_for(act), &QuadratureSpec::default_for(1)).unwrap()
}

fn ac4(ens: &mut Ensembles) -> Outcome {
    let gauss = lambda_rel_spread(&lambda_m_of(ens, Activation::Gauss, 1000));
    let erf = lambda_rel_spread(&lambda_m_of(ens, Activation::Erf, 5));
    let relu = lambda_rel_spread(&lambda_m_of(ens, Activation::ReLU, 20));
    Outcome {
        pass: gauss < 0.2,
        detail: format!("gauss N=1000 spread {gauss:.2e} (< 0.2); reported: erf N=5 {erf:.2e}, relu N=20 {relu:.2e}"),
    }
}

fn ac5(ens: &mut Ensembles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for act in [Activation::Gauss, Activation::ReLU, Activation::Erf] {
        let width = fit_width(act);
        let lm = lambda_m_of(ens, act, width);
        let lb = lambda_bar(&lm);
        let g6 = ens.default(act, width).npt(6).unwrap();
        let k = kernel(act, 1, width);
        let q = QuadratureSpec::default_for(1);
        let pred = predict_g6_tensor(&k, &g6.grid.points, lb, cutoff_for(act), &q).unwrap();
        let gp = gp_npt_tensor(&k, &g6.grid, 6).unwrap();
        let ratios: Vec<f64> = pred.data.iter().zip(&g6.pooled.data).map(|(p, g)| p / g).collect();
        let closer = pred
            .data
            .iter()
            .zip(&gp.data)
            .zip(&g6.pooled.data)
            .filter(|((p, q), g)| (*p / *g - 1.0).abs() < (*q / *g - 1.0).abs())
            .count() as f64
            / ratios.len() as f64;
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut ok = closer >= 0.9;
        if act == Activation::Gauss {
            ok &= lo >= 0.9 && hi <= 1.1;
        }
        pass &= ok;
        parts.push(format!(
            "{act} N={width}: ratio [{lo:.4}, {hi:.4}], closer than GP for {:.0}%",
            100.0 * closer
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn ac6(ens: &mut Ensembles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, n2) in [(20, 40), (100, 200)] {
        let r = lambda_bar(&lambda_m_of(ens, Activation::Gauss, n)) / lambda_bar(&lambda_m_of(ens, Activation::Gauss, n2));
        pass &= within(r, 2.0, 0.6);
        parts.push(format!("λ̄({n})/λ̄({n2}) = {r:.3}"));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn ac7(ens: &mut Ensembles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let cutoffs: Vec<f64> = RELU_CUTOFFS.iter().copied().filter(|&c| c >= 1e3).collect();
    for (d, name, tol) in [(1, GridName::ReluDefault, 0.3), (2, GridName::ReluD2, 0.5), (3, GridName::ReluD3, 0.5)] {
        let k = kernel(Activation::ReLU, d, 20);
        let q = QuadratureSpec::default_for(d);
        let e = ens.get(Activation::ReLU, d, &name, 20);
        let g4 = e.npt(4).unwrap();
        let theory = beta_theory_relu(d).unwrap();
        let slope = cutoff_sweep(&g4.pooled, &g4.grid, &k, &cutoffs, &q)
            .and_then(|mut s| fit_rg_slope(&mut s, 1e3).map(|(v, _)| v));
        match slope {
            Ok(s) => {
                pass &= within(s, theory, tol);
                parts.push(format!("d={d}: {s:.3} vs {theory}"));
            }
            Err(err) => {
                pass = false;
                parts.push(format!("d={d}: {err}"));
            }
        }
        // quadrature-level scaling, no sampling involved
        let grid = builtin_grid(&name);
        let lam = 1e3 * grid.max_norm();
        let a = kw_integrals(&k, &grid.points, 4, Weight::One, Cutoff::Finite(lam), &q).unwrap();
        let b = kw_integrals(&k, &grid.points, 4, Weight::One, Cutoff::Finite(2.0 * lam), &q).unwrap();
        let want = 2f64.powi(d as i32 + 4);
        let worst = a.data.iter().zip(&b.data).map(|(x, y)| (y / x / want - 1.0).abs()).fold(0.0, f64::max);
        pass &= worst < 0.01;
        parts.push(format!("D(2Λ)/D(Λ) off by {worst:.1e}"));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn ac8(ens: &mut Ensembles) -> Outcome {
    let g4 = ens.default(Activation::Gauss, 1000).npt(4).unwrap();
    let k = kernel(Activation::Gauss, 1, 1000);
    let q = QuadratureSpec::default_for(1);
    let inf = lambda_bar(&extract_lambda_m(&g4, &k, Cutoff::Infinite, &q).unwrap());
    let five = lambda_bar(&extract_lambda_m(&g4, &k, Cutoff::Finite(5.0), &q).unwrap());
    let rel = ((five - inf) / inf).abs();
    Outcome {
        pass: rel < 1e-3,
        detail: format!("λ̄(5) = {five:.6e}, λ̄(∞) = {inf:.6e}, relative difference {rel:.1e}"),
    }
}


fn ac9(ens: &mut Ensembles) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let q = QuadratureSpec::default_for(1);
    for act in ARCHS {
        let width = fit_width(act);
        let k = kernel(act, 1, width);
        let base = GridName::default_for(act);
        let train_name = GridName::TrainScaled(Box::new(base.clone()));
        let dg = |ens: &mut Ensembles, name: &GridName| {
            let e = ens.get(act, 1, name, width);
            deviation(&e.npt(4).unwrap(), &k).unwrap().delta
        };
        let (dg_train, dg_test) = (dg(ens, &train_name), dg(ens, &base));
        let f_train = build_features(&k, &builtin_grid(&train_name), default_fit_cutoff(act), &q).unwrap();
        let f_test = build_features(&k, &builtin_grid(&base), default_fit_cutoff(act), &q).unwrap();
        let mut mse = Vec::new();
        let mut line = format!("{act} N={width}:");
        for model in Model::ALL {
            match fit_and_evaluate(model, &dg_train, &f_train, &dg_test, &f_test) {
                Ok(r) => {
                    let mape = r.test_mape.unwrap();
                    match model {
                        Model::M0 => pass &= mape == 100.0,
                        Model::M1 => pass &= mape < 5.0,
                        _ => {}
                    }
                    mse.push(r.train_mse);
                    line += &format!(" {model} MAPE {mape:.3}%");
                    if model == Model::M1 {
                        line += &format!(" (λ0 {:.3e})", r.lambda0);
                    }
                }
                Err(e) if e.code() == "collinear-features" && act == Activation::ReLU => {
                    line += &format!(" {model} collinear");
                }
                Err(e) => {
                    pass = false;
                    line += &format!(" {model} error: {e}");
                }
            }
        }
        let monotone = mse.windows(2).all(|w| w[1] <= w[0]);
        pass &= monotone;
        line += if monotone { ", train MSE nested" } else { ", train MSE NOT nested" };
        parts.push(line);
    }
    let planted = planted_recovery();
    pass &= planted < 1e-10;
    parts.push(format!("planted λ0 relative error {planted:.1e}"));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn planted_recovery() -> f64 {
    let k = kernel(Activation::Gauss, 1, 1000);
    let grid = builtin_grid(&GridName::GaussDefault);
    let f: FeatureTensors = build_features(&k, &grid, Cutoff::Finite(10.0), &QuadratureSpec::default_for(1)).unwrap();
    let truth = 0.0046;
    let r = fit_model(Model::M1, &predict([truth, 0.0, 0.0], &f), &f).unwrap();
    ((r.lambda0 - truth) / truth).abs()
}

fn ac10() -> Outcome {
    let t = Instant::now();
    let mut failures = Vec::new();
    for (n, want) in [(2, 1), (4, 3), (6, 15), (8, 105), (10, 945), (12, 10395)] {
        if enumerate_pairings(n).map(|p| p.len()).ok() != Some(want) {
            failures.push(format!("pairings({n})"));
        }
    }
    let k = kernel(Activation::Gauss, 1, 1000);
    let xs: Vec<[f64; 1]> = [0.3, -0.1, 0.7, 0.2, -0.5, 0.05].iter().map(|&v| [v]).collect();
    let base: Vec<&[f64]> = xs.iter().map(|p| p.as_slice()).collect();
    let v0 = gp_npt(&k, &base).unwrap();
    for perm in [[5, 4, 3, 2, 1, 0], [1, 0, 3, 2, 5, 4], [2, 5, 0, 4, 1, 3]] {
        let pts: Vec<&[f64]> = perm.iter().map(|&i| base[i]).collect();
        if (gp_npt(&k, &pts).unwrap() - v0).abs() > 1e-12 * v0.abs() {
            failures.push(format!("permutation {perm:?}"));
        }
    }
    let q = QuadratureSpec::default_for(1);
    let g = integrate_box(|y| (-y[0] * y[0]).exp(), Cutoff::Infinite, 1, &q).unwrap();
    if (g - std::f64::consts::PI.sqrt()).abs() > 1e-6 {
        failures.push("gaussian integral".into());
    }
    let kw4 = integrate_box(|y| (-2.0 * y[0] * y[0]).exp(), Cutoff::Infinite, 1, &q).unwrap();
    if (kw4 - (std::f64::consts::PI / 2.0).sqrt()).abs() > 1e-6 {
        failures.push("quartic gauss integral".into());
    }
    let grid: InputGrid = builtin_grid(&GridName::GaussDefault);
    let gp = gp_npt_tensor(&k, &grid, 4).unwrap();
    let g4 = gp.map(|v| v * 1.01);
    let i4 = kw_integrals(&k, &grid.points, 4, Weight::One, Cutoff::Infinite, &q).unwrap();
    let lm = lambda_m_from_integrals(&g4, &k, &grid.points, &i4).unwrap();
    let back: Vec<f64> = gp
        .data
        .iter()
        .zip(&lm.data)
        .zip(&i4.data)
        .map(|((g, l), i)| g - 24.0 * l * i)
        .collect();
    if back.iter().zip(&g4.data).any(|(a, b)| (a - b).abs() > 1e-6 * b.abs()) {
        failures.push("λ_m round trip".into());
    }
    let betas: Vec<f64> = (1..=3).map(|d| beta_theory_relu(d).unwrap()).collect();
    if betas != [-5.0, -6.0, -7.0] {
        failures.push("β values".into());
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        pass: failures.is_empty() && secs < 10.0,
        detail: if failures.is_empty() {
            format!("all oracle checks hold in {secs:.2}s")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    }
}

fn main() {
    let only: Option<Vec<String>> = std::env::var("NNQFT_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|t| t.trim().to_ascii_uppercase()).collect());
    let strict = std::env::var("NNQFT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let wanted = |id: &str| only.as_ref().is_none_or(|o| o.iter().any(|x| x == id));
    let start = Instant::now();
    let mut ens = Ensembles { cache: HashMap::new() };
    let mut tally = Vec::new();

    type Criterion = fn(&mut Ensembles) -> Outcome;
    let criteria: [(&str, &str, Criterion); 9] = [
        ("AC1", "exact two-point function", ac1),
        ("AC2", "1/N falloff of m4 and m6", ac2),
        ("AC3", "1/N² falloff of connected G6", ac3),
        ("AC4", "λ_m constancy (Gauss)", ac4),
        ("AC5", "six-point prediction", ac5),
        ("AC6", "λ̄ scales as 1/N", ac6),
        ("AC7", "ReLU RG slope −(d+4)", ac7),
        ("AC8", "Gauss cutoff insensitivity", ac8),
        ("AC9", "coupling fit protocol", ac9),
    ];
    println!("acceptance: {} experiments × {} nets, seed {SEED}", Scale::Desk.counts().0, Scale::Desk.counts().1);
    for (id, title, run) in criteria {
        if wanted(id) {
            report(id, title, run(&mut ens), &mut tally);
        }
    }
    if wanted("AC10") {
        report("AC10", "oracle and property checks", ac10(), &mut tally);
    }
    let passed = tally.iter().filter(|(_, p)| *p).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.0}s",
        tally.len(),
        start.elapsed().as_secs_f64()
    );
    if strict && passed < tally.len() {
        std::process::exit(1);
    }
}
