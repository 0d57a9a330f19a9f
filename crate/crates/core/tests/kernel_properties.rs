use nalgebra::DMatrix;
use nnqft::config::{builtin_grid, Activation, ArchitectureSpec, ExperimentPlan, GridName};
use nnqft::correlators::empirical_npt;
use nnqft::kernels::{kernel_erf, kernel_gauss, kernel_relu, kernel_w, KernelModel};
use nnqft::sampler::run_ensemble;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

fn spec(act: Activation, d: usize) -> ArchitectureSpec {
    ArchitectureSpec::standard(act, d)
}

#[test]
fn closed_form_values() {
    let e = spec(Activation::Erf, 1);
    let want = 1.0 + std::f64::consts::FRAC_2_PI * (2.0f64 / 3.0).asin();
    assert!((kernel_erf(&[0.0], &[0.0], &e).unwrap() - want).abs() < 1e-15);
    assert!((want - 1.46456).abs() < 1e-5);
    assert!((kernel_w(&[0.0], &[0.0], &e).unwrap() - (want - 1.0)).abs() < 1e-15);

    let r = spec(Activation::ReLU, 1);
    assert!((kernel_relu(&[1.0], &[1.0], &r).unwrap() - 0.5).abs() < 1e-15);
    assert!(kernel_relu(&[1.0], &[-1.0], &r).unwrap().abs() < 1e-15);
    assert_eq!(kernel_w(&[0.4], &[0.7], &r).unwrap(), kernel_relu(&[0.4], &[0.7], &r).unwrap());
    assert_eq!(kernel_relu(&[0.0], &[1.0], &r).unwrap_err().code(), "degenerate-input");

    let g = spec(Activation::Gauss, 1);
    assert_eq!(kernel_gauss(&[0.3], &[0.3], &g).unwrap(), 2.0);
    assert!((kernel_gauss(&[0.0], &[60.0], &g).unwrap() - 1.0).abs() < 1e-300);
    assert_eq!(kernel_w(&[0.2], &[0.2], &g).unwrap(), 1.0);
}

#[test]
fn erf_zero_weight_limit() {
    let mut s = ArchitectureSpec::new(Activation::Erf, 1, 1e-12, 0.5);
    let limit = 0.5 + 1e-12 * std::f64::consts::FRAC_2_PI * (1.0f64 / 2.0).asin();
    assert!((kernel_erf(&[0.3], &[0.9], &s).unwrap() - limit).abs() < 1e-20);
    s.sigma_w_sq = 0.0;
    assert_eq!(kernel_erf(&[0.3], &[0.9], &s).unwrap(), 0.5);
}

fn gram_min_eigen(k: &KernelModel, pts: &[Vec<f64>]) -> f64 {
    let g = k.gram(pts).unwrap();
    let m = DMatrix::from_fn(pts.len(), pts.len(), |i, j| g[i][j]);
    m.symmetric_eigenvalues().min()
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..3.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn symmetric_and_above_bias(
        act in prop::sample::select(vec![Activation::Erf, Activation::ReLU, Activation::Gauss]),
        d in 1usize..=3,
        x in prop::collection::vec(-3.0f64..3.0, 3),
        y in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let k = KernelModel::new(spec(act, d));
        let (x, y) = (&x[..d], &y[..d]);
        prop_assume!(act != Activation::ReLU || (x.iter().any(|v| *v != 0.0) && y.iter().any(|v| *v != 0.0)));
        let (a, b) = (k.k(x, y).unwrap(), k.k(y, x).unwrap());
        prop_assert_eq!(a, b);
        prop_assert!(k.k(x, x).unwrap() >= k.k_b());
        prop_assert_eq!(k.k(x, y).unwrap(), k.k_b() + k.k_w(x, y).unwrap());
    }

    #[test]
    fn gauss_is_translation_invariant(
        d in 1usize..=3,
        x in prop::collection::vec(-2.0f64..2.0, 3),
        y in prop::collection::vec(-2.0f64..2.0, 3),
        c in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let s = spec(Activation::Gauss, d);
        let shift = |v: &[f64]| v.iter().zip(&c).map(|(a, b)| a + b).collect::<Vec<_>>();
        let a = kernel_gauss(&x[..d], &y[..d], &s).unwrap();
        let b = kernel_gauss(&shift(&x[..d]), &shift(&y[..d]), &s).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn gram_matrices_are_psd(
        act in prop::sample::select(vec![Activation::Erf, Activation::ReLU, Activation::Gauss]),
        d in 1usize..=3,
        pts in prop::collection::vec(point(3), 2..=8),
    ) {
        let k = KernelModel::new(spec(act, d));
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| p[..d].to_vec()).collect();
        prop_assert!(gram_min_eigen(&k, &pts) >= -1e-10);
    }
}

/// σ_b² + σ_W²·E[φ(z)φ(z')] by direct simulation of one hidden unit.
fn unit_covariance(s: &ArchitectureSpec, x: &[f64], y: &[f64], draws: usize) -> (f64, f64) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    let d = s.d_in as f64;
    let phi = |z: f64, u: &[f64]| match s.activation {
        Activation::Erf => libm::erf(z),
        Activation::ReLU => z.max(0.0),
        Activation::Gauss => (z - s.sigma_b_sq - s.sigma_w_sq * u.iter().map(|v| v * v).sum::<f64>() / d).exp(),
    };
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..draws {
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let w: Vec<f64> = (0..s.d_in).map(|_| (s.sigma_w_sq / d).sqrt() * normal()).collect();
        let b = s.sigma_b_sq.sqrt() * normal();
        let z = |u: &[f64]| w.iter().zip(u).map(|(a, c)| a * c).sum::<f64>() + b;
        let v = phi(z(x), x) * phi(z(y), y);
        sum += v;
        sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let se = ((sq / n - mean * mean) / n).sqrt();
    (s.sigma_b_sq + s.sigma_w_sq * mean, s.sigma_w_sq * se)
}

#[test]
fn kernels_match_single_unit_simulation() {
    let cases: [(Activation, usize, Vec<f64>, Vec<f64>); 6] = [
        (Activation::Erf, 1, vec![0.0], vec![0.0]),
        (Activation::Erf, 1, vec![0.2], vec![1.0]),
        (Activation::Erf, 2, vec![0.5, -0.3], vec![1.0, 0.8]),
        (Activation::ReLU, 1, vec![1.0], vec![1.0]),
        (Activation::ReLU, 3, vec![0.5, 1.0, 0.2], vec![1.0, -0.4, 0.3]),
        (Activation::Gauss, 2, vec![0.1, -0.2], vec![0.4, 0.3]),
    ];
    for (act, d, x, y) in cases {
        let s = spec(act, d);
        let (mc, se) = unit_covariance(&s, &x, &y, 1_000_000);
        let exact = KernelModel::new(s).k(&x, &y).unwrap();
        assert!((mc - exact).abs() < 4.0 * se, "{act} d={d}: {mc} ± {se} vs {exact}");
    }
}

#[test]
fn two_point_function_is_exact_at_finite_width() {
    for act in [Activation::Erf, Activation::ReLU, Activation::Gauss] {
        let grid = builtin_grid(&GridName::default_for(act));
        let s = spec(act, 1);
        let plan = ExperimentPlan {
            n_experiments: 10,
            nets_per_experiment: 20_000,
            widths: vec![3, 20],
            seed: 5,
            grid: grid.clone(),
        };
        for &n in &plan.widths {
            let accs = run_ensemble(&plan, &s, n).unwrap();
            let g2 = empirical_npt(&accs, &grid, 2).unwrap();
            let se = g2.std_error();
            let k = KernelModel::new(s.with_width(n));
            for (m, v) in g2.pooled.iter() {
                let want = k.k(&grid.points[m[0]], &grid.points[m[1]]).unwrap();
                let z = (v - want) / se.get(&m);
                assert!(z.abs() < 4.0, "{act} N={n} {m:?}: z = {z}");
            }
        }
    }
}
