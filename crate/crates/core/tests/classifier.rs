mod common;

use common::*;
use liveface::classifier::svm::{grid_search, rbf, train_svm, SvmParams};
use liveface::classifier::{evaluate, fuse, FusionRule, Standardizer};
use liveface::Liveness;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn concordance(scores: &[f64], labels: &[Liveness]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (s, l) in scores.iter().zip(labels) {
        if *l != Liveness::Live {
            continue;
        }
        for (t, m) in scores.iter().zip(labels) {
            if *m == Liveness::Fake {
                pairs += 1.0;
                num += if s > t {
                    1.0
                } else if s == t {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Liveness> {
    let mut labels: Vec<Liveness> = (0..n)
        .map(|_| if rng.random_bool(0.5) { Liveness::Live } else { Liveness::Fake })
        .collect();
    labels[0] = Liveness::Live;
    labels[1] = Liveness::Fake;
    labels
}

#[test]
fn auc_is_pairwise_concordance() {
    let mut rng = rng(51);
    for trial in 0..50 {
        let n = rng.random_range(2..120);
        let labels = random_labels(&mut rng, n);
        // Coarse scores force ties.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64 + 0.5 * gauss(&mut rng).signum()).collect();
        let report = evaluate(&scores, &labels, 0.0).unwrap();
        assert!((report.auc - concordance(&scores, &labels)).abs() < 1e-12, "trial {trial}");
    }
}

#[test]
fn eer_of_identical_distributions_is_one_half() {
    let mut rng = rng(52);
    let mut total = 0.0;
    let draws = 50;
    for _ in 0..draws {
        let labels: Vec<Liveness> = (0..1000).map(|i| if i % 2 == 0 { Liveness::Live } else { Liveness::Fake }).collect();
        let scores: Vec<f64> = (0..1000).map(|_| gauss(&mut rng)).collect();
        total += evaluate(&scores, &labels, 0.0).unwrap().eer;
    }
    assert!((total / draws as f64 - 0.5).abs() < 0.02);
}

#[test]
fn separable_scores_have_zero_eer() {
    let labels = [Liveness::Live, Liveness::Live, Liveness::Fake, Liveness::Fake];
    let r = evaluate(&[2.0, 1.0, -1.0, -3.0], &labels, 0.0).unwrap();
    assert_eq!((r.auc, r.eer, r.accuracy), (1.0, 0.0, 1.0));
}

fn xor() -> (Vec<Vec<f64>>, Vec<f64>) {
    (
        vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![1.0, 1.0, -1.0, -1.0],
    )
}

#[test]
fn xor_dual_matches_closed_form() {
    // By symmetry every alpha is equal; maximizing 4a - a^2 S / 2 gives a = 4/S,
    // clipped to C.
    let (x, y) = xor();
    for gamma in [0.5, 1.0, 2.0] {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += y[i] * y[j] * rbf(gamma, &x[i], &x[j]);
            }
        }
        for c in [0.1, 1.0, 100.0] {
            let fit = train_svm(
                &x,
                &y,
                &SvmParams {
                    c,
                    gamma: Some(gamma),
                    tol: 1e-6,
                    ..SvmParams::default()
                },
            )
            .unwrap();
            let a = (4.0 / s).min(c);
            for alpha in &fit.alphas {
                assert!((alpha - a).abs() < 1e-5, "gamma {gamma} C {c}: {:?} vs {a}", fit.alphas);
            }
            let dual = 4.0 * a - 0.5 * a * a * s;
            assert!((fit.dual_objective - dual).abs() < 1e-6);
            assert!(fit.model.bias.abs() < 1e-6);
        }
    }
}

fn blobs(rng: &mut ChaCha8Rng, n: usize, dim: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        x.push((0..dim).map(|_| gauss(rng) + label * gap).collect());
        y.push(label);
    }
    (x, y)
}

#[test]
fn free_support_vectors_sit_on_the_margin() {
    let mut rng = rng(53);
    let (x, y) = blobs(&mut rng, 80, 3, 0.7);
    let params = SvmParams {
        c: 10.0,
        tol: 1e-6,
        ..SvmParams::default()
    };
    let fit = train_svm(&x, &y, &params).unwrap();
    let mut free = 0;
    for ((xi, yi), a) in x.iter().zip(&y).zip(&fit.alphas) {
        let f = fit.model.decision_score(xi).unwrap();
        if *a > 1e-8 && *a < params.c - 1e-8 {
            free += 1;
            assert!((yi * f - 1.0).abs() < 1e-4, "{}", yi * f);
        } else if *a <= 1e-8 {
            assert!(yi * f >= 1.0 - 1e-4);
        } else {
            assert!(yi * f <= 1.0 + 1e-4);
        }
    }
    assert!(free > 0);
    let balance: f64 = fit.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
    assert!(balance.abs() < 1e-9);
}

#[test]
fn duplicating_data_with_half_c_keeps_the_decision_function() {
    let mut rng = rng(54);
    let (x, y) = blobs(&mut rng, 40, 2, 0.5);
    let p = SvmParams {
        c: 2.0,
        gamma: Some(0.5),
        tol: 1e-7,
        ..SvmParams::default()
    };
    let a = train_svm(&x, &y, &p).unwrap();
    let x2: Vec<_> = x.iter().chain(&x).cloned().collect();
    let y2: Vec<_> = y.iter().chain(&y).cloned().collect();
    let b = train_svm(&x2, &y2, &SvmParams { c: 1.0, ..p }).unwrap();
    let (probe, _) = blobs(&mut rng, 50, 2, 0.5);
    for v in &probe {
        let (fa, fb) = (a.model.decision_score(v).unwrap(), b.model.decision_score(v).unwrap());
        assert!((fa - fb).abs() < 1e-4, "{fa} vs {fb}");
    }
}

#[test]
fn grid_search_is_deterministic_and_on_grid() {
    let mut rng = rng(55);
    let (x, y) = blobs(&mut rng, 60, 4, 0.8);
    let (best, grid) = grid_search(&x, &y, &SvmParams::default(), 0.25, 7).unwrap();
    assert_eq!(grid.len(), 12);
    assert!(grid.iter().any(|g| g.c == best.c && Some(g.gamma) == best.gamma));
    let top = grid.iter().map(|g| g.holdout_accuracy).fold(0.0, f64::max);
    let first_top = grid.iter().find(|g| g.holdout_accuracy == top).unwrap();
    assert_eq!((first_top.c, Some(first_top.gamma)), (best.c, best.gamma));
    let (again, _) = grid_search(&x, &y, &SvmParams::default(), 0.25, 7).unwrap();
    assert_eq!(best, again);
}

#[test]
fn standardizer_zero_mean_unit_variance() {
    let mut rng = rng(56);
    let (x, _) = blobs(&mut rng, 50, 5, 0.0);
    let x: Vec<Vec<f64>> = x.into_iter().map(|mut v| {
        v[4] = 3.0;
        v
    }).collect();
    let s = Standardizer::fit(&x).unwrap();
    let z: Vec<_> = x.iter().map(|v| s.transform(v).unwrap()).collect();
    for j in 0..4 {
        let mean: f64 = z.iter().map(|v| v[j]).sum::<f64>() / 50.0;
        let var: f64 = z.iter().map(|v| v[j] * v[j]).sum::<f64>() / 50.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }
    assert!(z.iter().all(|v| v[4] == 0.0));
}

#[test]
fn fusion_threshold_is_inclusive() {
    let rule = FusionRule::default();
    assert_eq!(fuse(1.0, -1.0, &rule), (0.0, Liveness::Live));
    assert_eq!(fuse(-0.5, 0.25, &rule).1, Liveness::Fake);
    let skewed = FusionRule::new([0.8, 0.2], 0.1).unwrap();
    assert!((fuse(1.0, -1.0, &skewed).0 - 0.6).abs() < 1e-15);
}
