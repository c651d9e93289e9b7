use orthofl::dataio::{synth_quadratic, SyntheticQuadratic};
use orthofl::objectives::{full_gradient, loss, minibatch_gradient, quadratic_constants, Dataset, Objective};
use orthofl::rng::{stream, Purpose};
use orthofl::stats::RunningStats;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn hinge_data(seed: u64) -> Dataset {
    let mut rng = stream(seed, Purpose::Data, &[]);
    let n = 30;
    let features: Vec<f64> = (0..n * 4).map(|_| rng.sample(StandardNormal)).collect();
    let labels = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    Dataset::labeled(features, 4, labels).unwrap()
}

fn quad_data(seed: u64) -> (Vec<Dataset>, Objective) {
    let spec = SyntheticQuadratic { clients: 3, dim: 5, samples_per_client: 12, condition: 6.0, noise_std: 0.3, lambda: 0.05 };
    let (shards, obj, _) = synth_quadratic(&spec, &mut stream(seed, Purpose::Data, &[])).unwrap();
    (shards, obj)
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn hinge_gradient_is_subgradient(seed in 0u64..200, w in vec_strategy(4), v in vec_strategy(4), lambda in 0.0f64..0.5) {
        let data = hinge_data(seed);
        let obj = Objective::hinge(lambda);
        let g = full_gradient(&obj, &w, &data).unwrap();
        let diff: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let lhs = loss(&obj, &v, &data).unwrap();
        let rhs = loss(&obj, &w, &data).unwrap() + dot(&g, &diff);
        prop_assert!(lhs >= rhs - 1e-9);
    }

    #[test]
    fn regularized_hinge_is_lambda_strongly_convex(seed in 0u64..200, w in vec_strategy(4), v in vec_strategy(4), lambda in 0.01f64..0.5) {
        let data = hinge_data(seed);
        let obj = Objective::hinge(lambda);
        let g = full_gradient(&obj, &w, &data).unwrap();
        let diff: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let lhs = loss(&obj, &v, &data).unwrap();
        let rhs = loss(&obj, &w, &data).unwrap() + dot(&g, &diff) + 0.5 * lambda * dot(&diff, &diff);
        prop_assert!(lhs >= rhs - 1e-9);
    }

    #[test]
    fn loss_is_midpoint_convex(seed in 0u64..200, u in vec_strategy(4), v in vec_strategy(4)) {
        let data = hinge_data(seed);
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        for obj in [Objective::hinge(0.01), Objective::quadratic(0.01)] {
            let f = |w: &[f64]| loss(&obj, w, &data).unwrap();
            prop_assert!(f(&mid) <= 0.5 * (f(&u) + f(&v)) + 1e-12);
        }
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences(seed in 0u64..200, w in vec_strategy(5)) {
        let (shards, obj) = quad_data(seed);
        let data = &shards[0];
        let g = full_gradient(&obj, &w, data).unwrap();
        for j in 0..5 {
            let h = 1e-5;
            let mut up = w.clone();
            let mut dn = w.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (loss(&obj, &up, data).unwrap() - loss(&obj, &dn, data).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "coord {}: {} vs {}", j, fd, g[j]);
        }
    }
}

#[test]
fn minibatch_gradient_is_unbiased() {
    let (shards, obj) = quad_data(7);
    let data = &shards[1];
    let w = [0.4, -0.2, 1.0, 0.0, 0.7];
    let full = full_gradient(&obj, &w, data).unwrap();
    let mut rng = stream(7, Purpose::Sgd, &[]);
    let mut stats = vec![RunningStats::new(); 5];
    for _ in 0..10_000 {
        let perm = orthofl::dataio::shuffled_indices(data.len(), &mut rng);
        let g = minibatch_gradient(&obj, &w, data, &perm[..4]).unwrap();
        for (s, v) in stats.iter_mut().zip(&g) {
            s.push(*v);
        }
    }
    for (s, f) in stats.iter().zip(&full) {
        assert!((s.mean() - f).abs() <= 3.0 * s.std_error(), "{} vs {f}", s.mean());
    }
}

#[test]
fn quadratic_full_batch_gradient_closed_form() {
    let (shards, obj) = quad_data(8);
    let data = &shards[2];
    let w = [1.0, 2.0, -1.0, 0.5, 0.0];
    let g = full_gradient(&obj, &w, data).unwrap();
    let n = data.len() as f64;
    for j in 0..5 {
        let mut want = obj.lambda * w[j];
        for i in 0..data.len() {
            want += (dot(data.row(i), &w) - data.target(i)) * data.row(i)[j] / n;
        }
        assert!((g[j] - want).abs() < 1e-12);
    }
}

#[test]
fn minimizer_gradient_vanishes_and_loss_is_minimum() {
    let (shards, obj) = quad_data(9);
    let q = quadratic_constants(&obj, &shards).unwrap();
    let all = Dataset::concat(&shards).unwrap();
    let g = full_gradient(&obj, &q.w_star, &all).unwrap();
    assert!(dot(&g, &g).sqrt() <= 1e-8);
    assert_eq!(loss(&obj, &q.w_star, &all).unwrap(), q.f_star);
    let shifted = quadratic_constants(&Objective::quadratic(obj.lambda + 0.1), &shards).unwrap();
    assert!((shifted.mu - q.mu - 0.1).abs() < 1e-12 && (shifted.lip - q.lip - 0.1).abs() < 1e-12);
}
