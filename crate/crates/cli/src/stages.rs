use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use nnqft::config::{sha256_hex, ArchitectureSpec, ConfigFile, ExperimentPlan, InputGrid, Scale};
use nnqft::correlators::{
    connected4, connected6, deviation, g6_connected_background, gp_npt_tensor, scaling_slope, TwoPoint,
};
use nnqft::eft::{delta6, delta_mean_abs, extract_lambda_m, lambda_bar, lambda_rel_spread, predict_g6_tensor};
use nnqft::fit::{build_features, fit_and_evaluate, FitReport, Model};
use nnqft::kernels::KernelModel;
use nnqft::quadrature::Cutoff;
use nnqft::rg::{cutoff_sweep, fit_rg_slope};
use nnqft::sampler::{fingerprint, EnsembleMoments};

use crate::output::{coords, element, io_error, CliError, Outputs, OUTPUT_SCHEMA_VERSION};
use crate::GlobalArgs;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Sample,
    Npt,
    Scaling,
    ExtractLambda,
    #[value(name = "predict-g6")]
    PredictG6,
    RgSweep,
    FitCouplings,
}

impl Stage {
    fn name(self) -> String {
        self.to_possible_value().expect("named").get_name().to_string()
    }
}

/// Configuration with command-line overrides applied.
pub struct Context {
    pub cfg: ConfigFile,
    pub config_sha256: String,
    pub plan: ExperimentPlan,
    pub spec: ArchitectureSpec,
    pub out: Outputs,
    width: Option<usize>,
}

impl Context {
    pub fn load(args: &GlobalArgs) -> Result<Self, CliError> {
        let path = args
            .config
            .as_ref()
            .ok_or_else(|| CliError::new("missing-config", "--config PATH is required"))?;
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let mut cfg = ConfigFile::parse(&text)?;
        if let Some(seed) = args.seed {
            cfg.plan.seed = seed;
        }
        let scale = match (args.desk_scale, args.paper_scale) {
            (true, _) => Some(Scale::Desk),
            (_, true) => Some(Scale::Paper),
            _ => None,
        };
        if let Some(scale) = scale {
            (cfg.plan.n_experiments, cfg.plan.nets_per_experiment) = scale.counts();
        }
        if let Some(widths) = &args.widths {
            cfg.plan.widths = widths.clone();
        }
        if let Some(cutoffs) = &args.cutoffs {
            cfg.analysis.cutoffs = Some(cutoffs.clone());
        }
        if let Some(n) = args.quad_points {
            cfg.analysis.quad_points = Some(n);
        }
        let (mut plan, spec) = cfg.resolve()?;
        if let Some(w) = args.width {
            if w == 0 {
                return Err(CliError::new("zero-width", "--width must be positive"));
            }
            plan.widths = vec![w];
        }
        cfg.quadrature().validate(spec.d_in)?;
        if let Some(k) = args.threads {
            if k == 0 {
                return Err(CliError::new("invalid-threads", "--threads must be positive"));
            }
            // fails only if a pool already exists, which cannot happen here
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
        Ok(Context {
            cfg,
            config_sha256: sha256_hex(text.as_bytes()),
            plan,
            spec,
            out: Outputs::new(args.out.clone())?,
            width: args.width,
        })
    }

    /// Width analyzed by the single-width pipeline stages.
    fn analysis_width(&self) -> Result<usize, CliError> {
        let w = self
            .width
            .or(self.cfg.analysis.prediction_width)
            .unwrap_or(*self.plan.widths.last().expect("validated"));
        if !self.plan.widths.contains(&w) {
            return Err(CliError::new(
                "width-not-sampled",
                format!("analysis width {w} is not among the plan widths {:?}", self.plan.widths),
            ));
        }
        Ok(w)
    }

    fn snapshot_name(grid: &InputGrid, width: usize) -> String {
        let label: String = grid
            .label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        format!("snapshot-{label}-n{width}.json")
    }

    /// Loads a snapshot and checks it was drawn from this configuration on `grid`.
    fn load_on(&self, path: &Path, grid: &InputGrid) -> Result<EnsembleMoments, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let snap = EnsembleMoments::from_json(&text)?;
        let want = fingerprint(&self.spec.with_width(snap.width()), grid, self.plan.seed, self.plan.nets_per_experiment);
        let mismatch = |what: String| {
            CliError::from(nnqft::Error::SnapshotMismatch(format!("{}: {what}", path.display())))
        };
        if snap.fingerprint != want {
            let what = if snap.seed != self.plan.seed {
                format!("seed {} differs from the configured {}", snap.seed, self.plan.seed)
            } else if snap.grid.points != grid.points {
                format!("grid `{}` differs from the configured `{}`", snap.grid.label, grid.label)
            } else if snap.nets_per_experiment != self.plan.nets_per_experiment {
                format!(
                    "{} nets per experiment, configuration has {}",
                    snap.nets_per_experiment, self.plan.nets_per_experiment
                )
            } else {
                "architecture differs from the configuration".to_string()
            };
            return Err(mismatch(what));
        }
        if snap.experiments.len() != self.plan.n_experiments {
            return Err(mismatch(format!(
                "{} experiments, configuration has {}",
                snap.experiments.len(),
                self.plan.n_experiments
            )));
        }
        Ok(snap)
    }

    pub fn load_snapshot(&self, path: &Path) -> Result<EnsembleMoments, CliError> {
        self.load_on(path, &self.plan.grid)
    }

    pub fn load_snapshots(&self, paths: &[PathBuf]) -> Result<Vec<EnsembleMoments>, CliError> {
        let mut snaps = paths.iter().map(|p| self.load_snapshot(p)).collect::<Result<Vec<_>, _>>()?;
        snaps.sort_by_key(|s| s.width());
        if snaps.windows(2).any(|w| w[0].width() == w[1].width()) {
            return Err(CliError::new("duplicate-width", "two snapshots have the same width"));
        }
        Ok(snaps)
    }

    pub fn load_fit_pair(&self, train: &Path, test: &Path) -> Result<(EnsembleMoments, EnsembleMoments), CliError> {
        let train = self.load_on(train, &self.cfg.train_grid()?)?;
        let test = self.load_snapshot(test)?;
        if train.width() != test.width() {
            return Err(nnqft::Error::SnapshotMismatch(format!(
                "train width {} differs from test width {}",
                train.width(),
                test.width()
            ))
            .into());
        }
        Ok((train, test))
    }
}

fn cutoff_json(c: Cutoff) -> Value {
    match c {
        Cutoff::Finite(v) => json!(v),
        Cutoff::Infinite => json!("inf"),
    }
}

fn kernel_of(snap: &EnsembleMoments) -> KernelModel {
    KernelModel::new(snap.spec)
}

pub fn sample(ctx: &mut Context, grid: &InputGrid, widths: &[usize]) -> Result<Vec<PathBuf>, CliError> {
    let plan = ExperimentPlan {
        grid: grid.clone(),
        ..ctx.plan.clone()
    };
    let mut paths = Vec::new();
    for &w in widths {
        let t = Instant::now();
        let snap = EnsembleMoments::sample(&plan, &ctx.spec, w)?;
        let name = Context::snapshot_name(grid, w);
        paths.push(ctx.out.write_text(&name, &snap.to_json())?);
        println!("sampled N={w} on {} in {:.1}s -> {name}", grid.label, t.elapsed().as_secs_f64());
    }
    Ok(paths)
}

#[derive(Serialize)]
struct KernelRow {
    i: usize,
    j: usize,
    x_i: String,
    x_j: String,
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "K_W")]
    k_w: f64,
}

pub fn kernels(ctx: &mut Context) -> Result<(), CliError> {
    let k = KernelModel::new(ctx.spec);
    let pts = &ctx.plan.grid.points;
    let mut rows = Vec::new();
    for (i, a) in pts.iter().enumerate() {
        for (j, b) in pts.iter().enumerate() {
            rows.push(KernelRow {
                i,
                j,
                x_i: coords(a),
                x_j: coords(b),
                k: k.k(a, b)?,
                k_w: k.k_w(a, b)?,
            });
        }
    }
    ctx.out.write_csv("kernels.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct NptRow {
    width: usize,
    order: usize,
    element: String,
    value: f64,
    gp: f64,
    m: f64,
    m_std: f64,
    ci_low: f64,
    ci_high: f64,
    background: f64,
    degenerate: bool,
}

pub fn npt(ctx: &mut Context, snaps: &[EnsembleMoments]) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for snap in snaps {
        let k = kernel_of(snap);
        for order in [2, 4, 6] {
            let emp = snap.npt(order)?;
            let dev = deviation(&emp, &k)?;
            for (idx, (m, value)) in emp.pooled.iter().enumerate() {
                rows.push(NptRow {
                    width: snap.width(),
                    order,
                    element: element(&m),
                    value,
                    gp: dev.gp.data[idx],
                    m: dev.m.data[idx],
                    m_std: dev.m_std.data[idx],
                    ci_low: dev.ci_low.data[idx],
                    ci_high: dev.ci_high.data[idx],
                    background: dev.background,
                    degenerate: dev.degenerate[idx],
                });
            }
        }
    }
    ctx.out.write_csv("npt.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct ScalingRow {
    width: usize,
    quantity: &'static str,
    signal: f64,
    background: f64,
    above_background: bool,
}

#[derive(Serialize)]
struct SlopeRow {
    quantity: &'static str,
    slope: Option<f64>,
    intercept: Option<f64>,
    r2: Option<f64>,
    slope_stderr: Option<f64>,
    n_widths: usize,
    status: String,
}

pub struct ScalingSummary {
    pub m2_below_background: bool,
    pub m4_slope: Option<f64>,
    pub m6_slope: Option<f64>,
    pub g6_conn_slope: Option<f64>,
}

pub fn scaling(ctx: &mut Context, snaps: &[EnsembleMoments]) -> Result<ScalingSummary, CliError> {
    const QUANTITIES: [&str; 4] = ["m2", "m4", "m6", "g6_conn"];
    let mut series: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); QUANTITIES.len()];
    for snap in snaps {
        let k = kernel_of(snap);
        for (q, order) in [2, 4, 6].into_iter().enumerate() {
            let d = deviation(&snap.npt(order)?, &k)?;
            series[q].push((snap.width(), d.mean_abs_m, d.background));
        }
        let (g4, g6) = (snap.npt(4)?, snap.npt(6)?);
        let c4 = connected4(&g4, TwoPoint::Kernel(&k))?;
        let c6 = connected6(&g6, &c4, TwoPoint::Kernel(&k))?;
        let gram = k.gram(&g6.grid.points)?;
        let (_, bg) = g6_connected_background(&g6.std_across(), &g4.std_across(), &gram);
        series[3].push((snap.width(), c6.pooled.mean_abs(), bg));
    }
    let mut rows = Vec::new();
    let mut slope_rows = Vec::new();
    for (q, name) in QUANTITIES.iter().enumerate() {
        for &(width, signal, background) in &series[q] {
            rows.push(ScalingRow {
                width,
                quantity: name,
                signal,
                background,
                above_background: signal > background,
            });
        }
        if q == 0 {
            continue;
        }
        let points: Vec<(f64, f64)> = series[q].iter().map(|&(w, s, _)| (w as f64, s)).collect();
        let mask: Vec<bool> = series[q].iter().map(|&(_, s, b)| s > b).collect();
        let n_widths = mask.iter().filter(|m| **m).count();
        let fit = scaling_slope(&points, &mask);
        slope_rows.push(SlopeRow {
            quantity: name,
            slope: fit.as_ref().ok().map(|f| f.slope),
            intercept: fit.as_ref().ok().map(|f| f.intercept),
            r2: fit.as_ref().ok().map(|f| f.r2),
            slope_stderr: fit.as_ref().ok().map(|f| f.slope_stderr),
            n_widths,
            status: fit.as_ref().map_or_else(|e| e.code().to_string(), |_| "ok".into()),
        });
    }
    ctx.out.write_csv("scaling.csv", &rows)?;
    ctx.out.write_csv("scaling_slopes.csv", &slope_rows)?;
    Ok(ScalingSummary {
        m2_below_background: series[0].iter().all(|&(_, s, b)| s <= b),
        m4_slope: slope_rows[0].slope,
        m6_slope: slope_rows[1].slope,
        g6_conn_slope: slope_rows[2].slope,
    })
}

#[derive(Serialize)]
struct LambdaRow {
    element: String,
    lambda_m: f64,
}

#[derive(Serialize)]
pub struct LambdaSummary {
    pub schema_version: u32,
    pub width: usize,
    pub cutoff: Value,
    pub lambda_bar: f64,
    pub lambda_rel_spread: f64,
}

pub fn extract_lambda(ctx: &mut Context, snap: &EnsembleMoments) -> Result<LambdaSummary, CliError> {
    let k = kernel_of(snap);
    let cutoff = ctx.cfg.cutoff();
    let lm = extract_lambda_m(&snap.npt(4)?, &k, cutoff, &ctx.cfg.quadrature())?;
    let rows: Vec<LambdaRow> = lm
        .iter()
        .map(|(m, v)| LambdaRow {
            element: element(&m),
            lambda_m: v,
        })
        .collect();
    let w = snap.width();
    ctx.out.write_csv(&format!("lambda_m-n{w}.csv"), &rows)?;
    let summary = LambdaSummary {
        schema_version: OUTPUT_SCHEMA_VERSION,
        width: w,
        cutoff: cutoff_json(cutoff),
        lambda_bar: lambda_bar(&lm),
        lambda_rel_spread: lambda_rel_spread(&lm),
    };
    ctx.out.write_json(&format!("lambda-n{w}.json"), &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct DeltaRow {
    element: String,
    g6: f64,
    prediction: f64,
    gp: f64,
    delta: f64,
    delta_gp: f64,
    excluded: bool,
}

#[derive(Serialize)]
pub struct PredictSummary {
    pub schema_version: u32,
    pub width: usize,
    pub cutoff: Value,
    pub lambda_bar: f64,
    pub lambda_rel_spread: f64,
    pub delta_mean_abs: f64,
    /// Same statistic for the free (GP) prediction.
    pub delta_gp_mean_abs: f64,
}

pub fn predict_g6(ctx: &mut Context, snap: &EnsembleMoments) -> Result<PredictSummary, CliError> {
    let k = kernel_of(snap);
    let cutoff = ctx.cfg.cutoff();
    let q = ctx.cfg.quadrature();
    let lm = extract_lambda_m(&snap.npt(4)?, &k, cutoff, &q)?;
    let lb = lambda_bar(&lm);
    let g6 = snap.npt(6)?;
    let pred = predict_g6_tensor(&k, &g6.grid.points, lb, cutoff, &q)?;
    let gp = gp_npt_tensor(&k, &g6.grid, 6)?;
    let (delta, flags) = delta6(&g6.pooled, &pred);
    let (delta_gp, _) = delta6(&g6.pooled, &gp);
    let rows: Vec<DeltaRow> = g6
        .pooled
        .iter()
        .enumerate()
        .map(|(i, (m, v))| DeltaRow {
            element: element(&m),
            g6: v,
            prediction: pred.data[i],
            gp: gp.data[i],
            delta: delta.data[i],
            delta_gp: delta_gp.data[i],
            excluded: flags[i],
        })
        .collect();
    let w = snap.width();
    ctx.out.write_csv(&format!("delta6-n{w}.csv"), &rows)?;
    let summary = PredictSummary {
        schema_version: OUTPUT_SCHEMA_VERSION,
        width: w,
        cutoff: cutoff_json(cutoff),
        lambda_bar: lb,
        lambda_rel_spread: lambda_rel_spread(&lm),
        delta_mean_abs: delta_mean_abs(&delta, &flags),
        delta_gp_mean_abs: delta_mean_abs(&delta_gp, &flags),
    };
    ctx.out.write_json(&format!("predict-g6-n{w}.json"), &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct SweepRow {
    cutoff: f64,
    lambda_bar: Option<f64>,
    spread: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub width: usize,
    pub slope: f64,
    pub stderr: f64,
    pub theory_slope: Option<f64>,
    pub min_cutoff: f64,
    /// (max − min)/|mean| of λ̄ over the valid cutoffs.
    pub lambda_bar_rel_range: f64,
}

pub fn rg_sweep(ctx: &mut Context, snap: &EnsembleMoments) -> Result<SweepSummary, CliError> {
    let k = kernel_of(snap);
    let g4 = snap.npt(4)?;
    let min_cutoff = ctx.cfg.rg_min_cutoff();
    let mut sweep = cutoff_sweep(&g4.pooled, &g4.grid, &k, &ctx.cfg.rg_cutoffs(), &ctx.cfg.quadrature())?;
    let rows: Vec<SweepRow> = sweep
        .points
        .iter()
        .map(|p| SweepRow {
            cutoff: p.cutoff,
            lambda_bar: p.lambda_bar,
            spread: p.rel_spread,
            error: p.error.clone(),
        })
        .collect();
    let w = snap.width();
    ctx.out.write_csv(&format!("rg_sweep-n{w}.csv"), &rows)?;
    let (slope, stderr) = fit_rg_slope(&mut sweep, min_cutoff)?;
    let valid: Vec<f64> = sweep.points.iter().filter_map(|p| p.lambda_bar).collect();
    let (lo, hi) = valid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let summary = SweepSummary {
        schema_version: OUTPUT_SCHEMA_VERSION,
        width: w,
        slope,
        stderr,
        theory_slope: sweep.theory_slope,
        min_cutoff,
        lambda_bar_rel_range: (hi - lo) / mean.abs(),
    };
    ctx.out.write_json(&format!("rg_sweep-n{w}.json"), &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct FitOutput<'a> {
    schema_version: u32,
    width: usize,
    train_grid: &'a str,
    test_grid: &'a str,
    feature_cutoff: Value,
    #[serde(flatten)]
    report: &'a FitReport,
}

pub fn fit_couplings(
    ctx: &mut Context,
    model: Model,
    train: &EnsembleMoments,
    test: &EnsembleMoments,
) -> Result<FitReport, CliError> {
    let k = kernel_of(test);
    let q = ctx.cfg.quadrature();
    let cutoff = ctx.cfg.fit_cutoff();
    let dg_train = deviation(&train.npt(4)?, &k)?.delta;
    let dg_test = deviation(&test.npt(4)?, &k)?.delta;
    let f_train = build_features(&k, &train.grid, cutoff, &q)?;
    let f_test = build_features(&k, &test.grid, cutoff, &q)?;
    let report = fit_and_evaluate(model, &dg_train, &f_train, &dg_test, &f_test)?;
    let w = test.width();
    let out = FitOutput {
        schema_version: OUTPUT_SCHEMA_VERSION,
        width: w,
        train_grid: &train.grid.label,
        test_grid: &test.grid.label,
        feature_cutoff: cutoff_json(cutoff),
        report: &report,
    };
    ctx.out.write_json(&format!("fit-{}-n{w}.json", model_name(model)), &out)?;
    Ok(report)
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::M0 => "m0",
        Model::M1 => "m1",
        Model::M2 => "m2",
        Model::M3 => "m3",
    }
}

#[derive(Serialize, Default)]
struct PipelineSummary {
    schema_version: u32,
    activation: String,
    analysis_width: usize,
    stages: Vec<String>,
    m2_below_background: Option<bool>,
    g4_slope: Option<f64>,
    m6_slope: Option<f64>,
    g6_conn_slope: Option<f64>,
    lambda_bar: Option<f64>,
    lambda_rel_spread: Option<f64>,
    delta6_mean_abs: Option<f64>,
    rg_slope: Option<f64>,
    rg_theory_slope: Option<f64>,
    rg_lambda_bar_rel_range: Option<f64>,
    /// Test MAPE (percent) per model, or the error code when it cannot be fitted.
    fit_test_mape: serde_json::Map<String, Value>,
}

pub fn pipeline(ctx: &mut Context, stages: &[Stage]) -> Result<(), CliError> {
    if stages.is_empty() || stages.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::new(
            "invalid-stage-order",
            "stages must be listed once each in the order sample,npt,scaling,extract-lambda,predict-g6,rg-sweep,fit-couplings",
        ));
    }
    let width = ctx.analysis_width()?;
    let grid = ctx.plan.grid.clone();
    let widths = ctx.plan.widths.clone();
    let mut summary = PipelineSummary {
        schema_version: OUTPUT_SCHEMA_VERSION,
        activation: ctx.spec.activation.to_string(),
        analysis_width: width,
        stages: stages.iter().map(|s| s.name()).collect(),
        ..Default::default()
    };
    let snapshot_path = |ctx: &Context, g: &InputGrid, w: usize| ctx.out.path(&Context::snapshot_name(g, w));
    for &stage in stages {
        let name = stage.name();
        println!("stage {name}");
        let run = |ctx: &mut Context, summary: &mut PipelineSummary| -> Result<(), CliError> {
            match stage {
                Stage::Sample => {
                    sample(ctx, &grid, &widths)?;
                    if stages.contains(&Stage::FitCouplings) {
                        let train = ctx.cfg.train_grid()?;
                        sample(ctx, &train, &[width])?;
                    }
                }
                Stage::Npt | Stage::Scaling => {
                    let paths: Vec<PathBuf> = widths.iter().map(|&w| snapshot_path(ctx, &grid, w)).collect();
                    let snaps = ctx.load_snapshots(&paths)?;
                    if stage == Stage::Npt {
                        npt(ctx, &snaps)?;
                    } else {
                        let s = scaling(ctx, &snaps)?;
                        summary.m2_below_background = Some(s.m2_below_background);
                        summary.g4_slope = s.m4_slope;
                        summary.m6_slope = s.m6_slope;
                        summary.g6_conn_slope = s.g6_conn_slope;
                    }
                }
                Stage::ExtractLambda => {
                    let snap = ctx.load_snapshot(&snapshot_path(ctx, &grid, width))?;
                    let s = extract_lambda(ctx, &snap)?;
                    summary.lambda_bar = Some(s.lambda_bar);
                    summary.lambda_rel_spread = Some(s.lambda_rel_spread);
                }
                Stage::PredictG6 => {
                    let snap = ctx.load_snapshot(&snapshot_path(ctx, &grid, width))?;
                    let s = predict_g6(ctx, &snap)?;
                    summary.lambda_bar = Some(s.lambda_bar);
                    summary.lambda_rel_spread = Some(s.lambda_rel_spread);
                    summary.delta6_mean_abs = Some(s.delta_mean_abs);
                }
                Stage::RgSweep => {
                    let snap = ctx.load_snapshot(&snapshot_path(ctx, &grid, width))?;
                    let s = rg_sweep(ctx, &snap)?;
                    summary.rg_slope = Some(s.slope);
                    summary.rg_theory_slope = s.theory_slope;
                    summary.rg_lambda_bar_rel_range = Some(s.lambda_bar_rel_range);
                }
                Stage::FitCouplings => {
                    let train_path = snapshot_path(ctx, &ctx.cfg.train_grid()?, width);
                    let (train, test) = ctx.load_fit_pair(&train_path, &snapshot_path(ctx, &grid, width))?;
                    for model in Model::ALL {
                        let entry = match fit_couplings(ctx, model, &train, &test) {
                            Ok(r) => json!(r.test_mape),
                            // nested models can be degenerate on some grids; that is a result
                            Err(e) if e.code == "collinear-features" && model != Model::M1 => json!(e.code),
                            Err(e) => return Err(e),
                        };
                        summary.fit_test_mape.insert(model_name(model).into(), entry);
                    }
                }
            }
            Ok(())
        };
        run(ctx, &mut summary).map_err(|e| e.in_stage(&name))?;
    }
    ctx.out.write_json("summary.json", &summary)?;
    Ok(())
}
