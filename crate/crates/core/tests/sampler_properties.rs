use nnqft::config::{builtin_grid, Activation, ArchitectureSpec, ExperimentPlan, GridName, InputGrid};
use nnqft::correlators::{connected4, connected6, empirical_npt, odd_moment_zscores, TwoPoint};
use nnqft::kernels::KernelModel;
use nnqft::sampler::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn plan(grid: InputGrid, experiments: usize, nets: usize, seed: u64) -> ExperimentPlan {
    ExperimentPlan {
        n_experiments: experiments,
        nets_per_experiment: nets,
        widths: vec![4],
        seed,
        grid,
    }
}

#[test]
fn forward_examples() {
    let relu = ArchitectureSpec::standard(Activation::ReLU, 1).with_width(1);
    let p = NetworkParams {
        w0: vec![2.0],
        b0: vec![0.0],
        w1: vec![3.0],
        b1: 0.0,
    };
    assert_eq!(forward(&p, &relu, &[0.5]).unwrap(), 3.0);
    let zero = NetworkParams {
        w0: vec![0.0; 3],
        b0: vec![0.0; 3],
        w1: vec![0.7, -0.2, 1.1],
        b1: 0.0,
    };
    let erf = ArchitectureSpec::standard(Activation::Erf, 1).with_width(3);
    assert_eq!(forward(&zero, &erf, &[0.4]).unwrap(), 0.0);
    let gauss = ArchitectureSpec::standard(Activation::Gauss, 1).with_width(3);
    let x: f64 = 0.7;
    let want = 1.6 * (-1.0 - x * x).exp();
    assert!((forward(&zero, &gauss, &[x]).unwrap() - want).abs() < 1e-15);
    let mut huge = zero.clone();
    huge.w0 = vec![1e3; 3];
    assert_eq!(forward(&huge, &gauss, &[1.0]).unwrap_err().code(), "numeric-overflow");
}

#[test]
fn parameter_distributions() {
    let spec = ArchitectureSpec::new(Activation::Erf, 2, 1.5, 0.0).with_width(10);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
    let (mut w0, mut w1) = (Vec::new(), Vec::new());
    while w0.len() < 1_000_000 {
        let p = sample_params(&spec, &mut rng);
        assert!(p.b0.iter().all(|b| *b == 0.0) && p.b1 == 0.0);
        w0.extend(p.w0);
        w1.extend(p.w1);
    }
    let var = w0.iter().map(|v| v * v).sum::<f64>() / w0.len() as f64;
    assert!((var / (1.5 / 2.0) - 1.0).abs() < 0.01, "{var}");
    let n = w1.len() as f64;
    let mean = w1.iter().sum::<f64>() / n;
    assert!(mean.abs() < 3.0 * (1.5f64 / 10.0).sqrt() / n.sqrt());
}

#[test]
fn zero_parameters_give_zero_moments() {
    let mut spec = ArchitectureSpec::standard(Activation::Erf, 1);
    spec.sigma_b_sq = 0.0;
    spec.sigma_w_sq = f64::MIN_POSITIVE;
    let grid = builtin_grid(&GridName::ErfDefault);
    let accs = run_ensemble(&plan(grid, 2, 1, 3), &spec, 4).unwrap();
    for a in &accs {
        assert_eq!(a.count, 1);
        assert!(a.sums.iter().all(|t| t.data.iter().all(|v| v.abs() < 1e-300)));
    }
}

#[test]
fn ensembles_are_reproducible() {
    let spec = ArchitectureSpec::standard(Activation::Gauss, 1);
    let grid = builtin_grid(&GridName::GaussDefault);
    let pl = plan(grid, 3, 2 * CHUNK_SIZE + 17, 11);
    let a = EnsembleMoments::sample(&pl, &spec, 4).unwrap();
    let b = EnsembleMoments::sample(&pl, &spec, 4).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.total_count(), 3 * pl.nets_per_experiment as u64);
    let other = EnsembleMoments::sample(&plan(pl.grid.clone(), 3, pl.nets_per_experiment, 12), &spec, 4).unwrap();
    assert_ne!(a.experiments[0].sums[1].data, other.experiments[0].sums[1].data);
    // experiments are keyed by their index, not by how many there are
    let fewer = EnsembleMoments::sample(&plan(pl.grid.clone(), 2, pl.nets_per_experiment, 11), &spec, 4).unwrap();
    assert_eq!(fewer.experiments[..], a.experiments[..2]);
}

#[test]
fn snapshots_round_trip_and_detect_tampering() {
    let spec = ArchitectureSpec::standard(Activation::ReLU, 1);
    let grid = builtin_grid(&GridName::ReluDefault);
    let snap = EnsembleMoments::sample(&plan(grid, 2, 500, 2), &spec, 5).unwrap();
    let text = snap.to_json();
    assert_eq!(EnsembleMoments::from_json(&text).unwrap(), snap);
    let mut bad = snap.clone();
    bad.seed += 1;
    assert_eq!(EnsembleMoments::from_json(&bad.to_json()).unwrap_err().code(), "snapshot-mismatch");
    let mut bad = snap.clone();
    bad.experiments[1].count -= 1;
    assert_eq!(EnsembleMoments::from_json(&bad.to_json()).unwrap_err().code(), "snapshot-mismatch");
    let mut bad = snap;
    bad.schema_version = 99;
    assert_eq!(EnsembleMoments::from_json(&bad.to_json()).unwrap_err().code(), "snapshot-mismatch");
}

#[test]
fn odd_moments_vanish() {
    for act in [Activation::Erf, Activation::ReLU, Activation::Gauss] {
        let spec = ArchitectureSpec::standard(act, 1);
        let grid = builtin_grid(&GridName::default_for(act));
        let accs = run_ensemble(&plan(grid.clone(), 20, 20_000, 8), &spec, 10).unwrap();
        for n in [1, 3] {
            let z = odd_moment_zscores(&empirical_npt(&accs, &grid, n).unwrap());
            let worst = z.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(worst < 4.0, "{act} order {n}: |z| = {worst}");
        }
    }
}

/// For ReLU with σ_b = 0 and positive scalar inputs, f(x) = x·S with S a sum of
/// N independent copies of a = w1·max(w0, 0). With σ_W = 1 the cumulants of S
/// are κ₂ = 1/2, κ₄ = 15/(4N) and κ₆ = 165/(2N²).
#[test]
fn relu_connected_moments_match_exact_cumulants() {
    let width = 4;
    let spec = ArchitectureSpec::standard(Activation::ReLU, 1);
    let grid = InputGrid::scalar("pos", &[0.5, 1.0, 1.5]).unwrap();
    let accs = run_ensemble(&plan(grid.clone(), 20, 100_000, 21), &spec, width).unwrap();
    let k = KernelModel::new(spec.with_width(width));
    let g4 = empirical_npt(&accs, &grid, 4).unwrap();
    let g6 = empirical_npt(&accs, &grid, 6).unwrap();
    let c4 = connected4(&g4, TwoPoint::Kernel(&k)).unwrap();
    let c6 = connected6(&g6, &c4, TwoPoint::Kernel(&k)).unwrap();
    let n = width as f64;
    for (c, kappa) in [(&c4, 15.0 / (4.0 * n)), (&c6, 165.0 / (2.0 * n * n))] {
        let se = c.std_error();
        for (m, v) in c.pooled.iter() {
            let prod: f64 = m.iter().map(|&i| grid.points[i][0]).product();
            let z = (v - kappa * prod) / se.get(&m);
            assert!(z.abs() < 4.0, "order {} {m:?}: {v} vs {}", c.order, kappa * prod);
        }
    }
}

fn acc_from(values: &[Vec<f64>]) -> MomentAccumulator {
    let mut a = MomentAccumulator::new(values[0].len());
    for v in values {
        a.push(v);
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn merge_is_associative_and_commutative(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 3..30),
        cut in (0.1f64..0.45, 0.55f64..0.9),
    ) {
        let (i, j) = ((rows.len() as f64 * cut.0) as usize, (rows.len() as f64 * cut.1) as usize);
        prop_assume!(0 < i && i < j && j < rows.len());
        let (a, b, c) = (acc_from(&rows[..i]), acc_from(&rows[i..j]), acc_from(&rows[j..]));
        let mut left = a.clone();
        left.merge(&b);
        left.merge(&c);
        let mut right = b.clone();
        right.merge(&c);
        let mut right2 = a.clone();
        right2.merge(&right);
        let mut swapped = c.clone();
        swapped.merge(&a);
        swapped.merge(&b);
        let whole = acc_from(&rows);
        prop_assert_eq!(left.count, whole.count);
        for other in [&right2, &swapped, &whole] {
            for (s, t) in left.sums.iter().zip(&other.sums) {
                for (x, y) in s.data.iter().zip(&t.data) {
                    prop_assert!((x - y).abs() <= 1e-12 * (x.abs().max(y.abs()) + 1e-3));
                }
            }
        }
    }

    #[test]
    fn accumulated_products_match_direct_products(
        row in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let acc = acc_from(&[row.clone()]);
        for n in 1..=MAX_ORDER {
            for (m, v) in acc.moment(n).iter() {
                let want: f64 = m.iter().map(|&i| row[i]).product();
                prop_assert!((v - want).abs() <= 1e-12 * want.abs().max(1e-12));
            }
        }
    }
}
