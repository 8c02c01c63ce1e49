//! Property tests for the network, the pair builder, the samplers and the metrics.

use jhat_core::cloud::{PointCloud, SampleSet};
use jhat_core::evaluation::{e_delta, e_delta_sweep, e_star_delta};
use jhat_core::field::FnField;
use jhat_core::neighbors::{build_pairs, shuffle_pairs};
use jhat_core::nn::{apply_max_norm, jacobian_loss, lipschitz_upper_bound, Activation, Layer, LossBatch, Network};
use jhat_core::testbed::{add_noise, DomainBox, NoiseSpec, TestFunction};
use jhat_core::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_net(seed: u64, d: usize, c: usize, act: Activation) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![d];
    dims.extend((0..rng.random_range(0..3)).map(|_| rng.random_range(1..6)));
    dims.push(c * d);
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let a = if j + 2 == dims.len() { Activation::Identity } else { act };
            let weights = (0..w[0] * w[1]).map(|_| rng.random_range(-1.5..1.5)).collect();
            let biases = (0..w[1]).map(|_| rng.random_range(-1.0..1.0)).collect();
            Layer::new(w[0], w[1], weights, biases, a).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn random_batch(seed: u64, d: usize, c: usize, rows: usize) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut u: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
            unit(&mut u);
            unit(&mut u);
            let v: Vec<f64> = (0..c).map(|_| rng.random_range(-2.0..2.0)).collect();
            (x, u, v)
        })
        .collect()
}

fn batch_of(rows: &[(Vec<f64>, Vec<f64>, Vec<f64>)], d: usize, c: usize) -> LossBatch {
    let mut b = LossBatch::new(d, c);
    for (x, u, v) in rows {
        b.push(x, u, v).unwrap();
    }
    b
}

fn loss(net: &Network, b: &LossBatch) -> f64 {
    jacobian_loss(&net.forward_batch(b.bases(), b.len()).unwrap(), b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_is_invariant_under_row_permutation(seed in any::<u64>(), d in 1usize..4, c in 1usize..4, rows in 1usize..12) {
        let net = random_net(seed, d, c, Activation::Swish);
        let mut data = random_batch(seed ^ 1, d, c, rows);
        let a = loss(&net, &batch_of(&data, d, c));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for i in (1..data.len()).rev() {
            data.swap(i, rng.random_range(0..=i));
        }
        let b = loss(&net, &batch_of(&data, d, c));
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn loss_vanishes_on_exact_targets(seed in any::<u64>(), d in 1usize..4, c in 1usize..4, rows in 1usize..8) {
        let net = random_net(seed, d, c, Activation::Swish);
        let data = random_batch(seed ^ 3, d, c, rows);
        let exact: Vec<_> = data
            .iter()
            .map(|(x, u, _)| {
                let j = net.forward(x).unwrap();
                let v: Vec<f64> = j.chunks_exact(d).map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum()).collect();
                (x.clone(), u.clone(), v)
            })
            .collect();
        prop_assert!(loss(&net, &batch_of(&exact, d, c)) < 1e-28);
        let mut off = exact.clone();
        off[0].2[0] += 1e-3;
        prop_assert!(loss(&net, &batch_of(&off, d, c)) > 0.0);
    }

    #[test]
    fn identity_network_is_affine_composition(seed in any::<u64>(), d in 1usize..4, c in 1usize..3) {
        let net = random_net(seed, d, c, Activation::Identity);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut y = x.clone();
        for l in net.layers() {
            let w = l.weight_matrix();
            y = w.mul_vec(&y).unwrap().iter().zip(l.biases()).map(|(a, b)| a + b).collect();
        }
        let got = net.forward(&x).unwrap();
        for (a, b) in got.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn max_norm_is_idempotent(seed in any::<u64>(), max_w in 0.05f64..2.0) {
        let mut net = random_net(seed, 2, 2, Activation::Swish);
        apply_max_norm(&mut net, max_w);
        let once = net.clone();
        apply_max_norm(&mut net, max_w);
        for (a, b) in once.layers().iter().zip(net.layers()) {
            for row in a.weights().chunks_exact(a.inputs()) {
                prop_assert!(row.iter().map(|w| w * w).sum::<f64>().sqrt() <= max_w * (1.0 + 1e-15));
            }
            for (p, q) in a.weights().iter().zip(b.weights()) {
                prop_assert!((p - q).abs() <= 1e-15 * p.abs());
            }
        }
    }

    #[test]
    fn pairs_reproduce_raw_differences(seed in any::<u64>(), k in 1usize..8) {
        let f = TestFunction::by_name("F9").unwrap();
        let s = SampleSet::from_function(&f, f.sample_domain(60, seed)).unwrap();
        let pairs = build_pairs(&s, k, 0.9).unwrap();
        for (p, e) in pairs.entries().iter().enumerate() {
            let dx: Vec<f64> = pairs.direction(p).iter().map(|u| u * e.distance).collect();
            let dy: Vec<f64> = pairs.delta(p).iter().map(|v| v * e.distance).collect();
            let (xi, xj) = (s.inputs().point(e.i), s.inputs().point(e.j));
            let (yi, yj) = (s.outputs().point(e.i), s.outputs().point(e.j));
            for a in 0..3 {
                prop_assert!((dx[a] - (xj[a] - xi[a])).abs() < 1e-10);
                prop_assert!((dy[a] - (yj[a] - yi[a])).abs() < 1e-10);
            }
        }
        let shuffled = shuffle_pairs(&pairs, seed);
        let key = |e: &jhat_core::neighbors::PairEntry| (e.i, e.j);
        let mut a: Vec<_> = pairs.entries().iter().map(key).collect();
        let mut b: Vec<_> = shuffled.entries().iter().map(key).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn lipschitz_bound_dominates_sampled_slopes() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..10 {
        let net = random_net(seed, 2, 2, Activation::Swish);
        let bound = lipschitz_upper_bound(&net);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-1e-2..1e-2)).collect();
            let (fx, fy) = (net.forward(&x).unwrap(), net.forward(&y).unwrap());
            let jx = Matrix::from_row_major(2, 2, fx).unwrap();
            let jy = Matrix::from_row_major(2, 2, fy).unwrap();
            let dx = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!((&jx - &jy).operator_norm() <= bound * dx * (1.0 + 1e-12));
        }
    }
}

#[test]
fn uniform_sampler_is_centered() {
    let n = 100_000;
    let b = DomainBox::new(vec![-2.0, 0.0, 1.0], vec![2.0, 3.0, 1.5]).unwrap();
    let pts = b.sample(n, 8);
    for a in 0..3 {
        let (lo, hi) = (b.lower()[a], b.upper()[a]);
        let mean = pts.iter().map(|p| p[a]).sum::<f64>() / n as f64;
        let sigma_mean = (hi - lo) / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - (lo + hi) / 2.0).abs() < 5.0 * sigma_mean, "axis {a}");
        assert!(pts.iter().all(|p| p[a] > lo && p[a] < hi));
    }
}

#[test]
fn noise_has_requested_moments() {
    let n = 100_000;
    let y = PointCloud::new(2, vec![0.5; 2 * n]).unwrap();
    let sigma = 0.01;
    let noisy = add_noise(&y, NoiseSpec { sigma, seed: 3 }).unwrap();
    let e: Vec<f64> = noisy.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a - b).collect();
    let m = e.iter().sum::<f64>() / e.len() as f64;
    let sd = (e.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (e.len() - 1) as f64).sqrt();
    assert!(m.abs() < 5.0 * sigma / (e.len() as f64).sqrt());
    assert!((sd / sigma - 1.0).abs() < 0.02);
    assert_eq!(noisy, add_noise(&y, NoiseSpec { sigma, seed: 3 }).unwrap());
}

fn noisy_estimate(f: &TestFunction, scale: f64) -> impl jhat_core::field::JacobianField + '_ {
    let (d, c) = (f.input_dim(), f.output_dim());
    FnField::new(d, c, move |x: &[f64]| {
        let j = f.analytic_jacobian(x).unwrap();
        let bump: Vec<f64> = j.as_slice().iter().enumerate().map(|(k, v)| v + scale * (x[0] * k as f64).sin()).collect();
        Matrix::from_row_major(c, d, bump).unwrap()
    })
}

#[test]
fn metric_filters_shrink_with_delta_and_ignore_order() {
    let f = TestFunction::by_name("F0").unwrap();
    let est = noisy_estimate(&f, 0.05);
    let pts = f.sample_domain(2000, 4);
    let sweep: Vec<_> = e_delta_sweep(&est, &f, &pts, &[0.0, 0.01, 0.1, 0.5, 0.9])
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .collect();
    for w in sweep.windows(2) {
        assert!(w[0].retained >= w[1].retained);
        assert!(w[0].retained <= w[0].total);
    }
    let mut rev: Vec<f64> = Vec::new();
    for p in pts.iter().rev() {
        rev.extend_from_slice(p);
    }
    let rev = PointCloud::new(2, rev).unwrap();
    assert_eq!(
        e_delta(&est, &f, &pts, 0.1).unwrap().value_percent.to_bits(),
        e_delta(&est, &f, &rev, 0.1).unwrap().value_percent.to_bits()
    );
    assert_eq!(e_delta(&f, &f, &pts, 0.0).unwrap().value_percent, 0.0);

    let v = SampleSet::from_function(&f, f.sample_domain(800, 6)).unwrap();
    let order: Vec<usize> = (0..v.len()).rev().collect();
    let v_rev = SampleSet::new(v.inputs().select(&order), v.outputs().select(&order)).unwrap();
    let a = e_star_delta(&est, &v, 0.01, 10, 0.5).unwrap();
    let b = e_star_delta(&est, &v_rev, 0.01, 10, 0.5).unwrap();
    assert_eq!(a.value_percent.to_bits(), b.value_percent.to_bits());
    assert_eq!(a.retained, b.retained);
}
