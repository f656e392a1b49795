#![allow(clippy::needless_range_loop)]

mod support;

use std::time::Instant;

use approx::assert_relative_eq;
use gbtsvm::box_qp::{self, DualAssembly};
use gbtsvm::bundled;
use gbtsvm::classifiers::{
    gbftsvm_duals, predict, predict_batch, train_gbftsvm, train_gbtwsvm, train_twsvm,
};
use gbtsvm::dataset_io::{load_dataset, make_folds, normalize_min_max};
use gbtsvm::evaluation::{
    cross_validate, cross_validate_with, grid_search, noise_sweep, CvOptions,
};
use gbtsvm::granular_ball::generate_balls;
use gbtsvm::pythagorean::class_geometry;
use gbtsvm::{
    BallFamily, Dataset, GenerationConfig, GranularBall, Label, LoadOptions, Method,
    PythagoreanScore, Region, TrainConfig,
};
use nalgebra::{DMatrix, DVector};

use Label::{Negative as N, Positive as P};

fn ball(center: &[f64], radius: f64, label: Label) -> GranularBall {
    GranularBall {
        center: center.to_vec(),
        radius,
        purity: 1.0,
        label,
        members: Vec::new(),
    }
}

fn family(balls: Vec<GranularBall>) -> BallFamily {
    let n = balls.len();
    BallFamily {
        balls,
        config: GenerationConfig::default(),
        source_n: n,
    }
}

fn pure_score(score: f64) -> PythagoreanScore {
    PythagoreanScore {
        mu: score,
        nu: 0.0,
        theta: 0.0,
        score,
        region: Region::Positive,
    }
}

/// Dense `F (EᵀE + εI)⁻¹ Fᵀ` and `(EᵀE + εI)⁻¹ Fᵀ` built with the test-side
/// eliminator, with `E = [own 1]`, `F = [other 1]`.
fn dense_dual(own: &[Vec<f64>], other: &[Vec<f64>], eps: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let aug = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().copied().chain([1.0]).collect())
            .collect()
    };
    let (e, f) = (aug(own), aug(other));
    let k = e[0].len();
    let mut h = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            h[i][j] = e.iter().map(|r| r[i] * r[j]).sum();
        }
        h[i][i] += eps;
    }
    // column c of H⁻¹Fᵀ solves H x = F[c]
    let hinv_ft: Vec<Vec<f64>> = f
        .iter()
        .map(|fr| {
            support::gauss_solve(h.clone(), fr.clone()).expect("regularized gram is invertible")
        })
        .collect();
    let q = f
        .iter()
        .map(|fi| {
            hinv_ft
                .iter()
                .map(|col| fi.iter().zip(col).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    (q, hinv_ft)
}

fn combine(cols: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
    let k = cols[0].len();
    (0..k)
        .map(|i| cols.iter().zip(alpha).map(|(c, a)| c[i] * a).sum())
        .collect()
}

#[test]
fn four_points_split_into_the_optimal_two_partition() {
    let pts = [[0.0, 0.0], [0.0, 1.0], [5.0, 0.0], [5.0, 1.0]];
    let sse = |idx: &[usize]| -> f64 {
        let c = [0, 1].map(|j| idx.iter().map(|&i| pts[i][j]).sum::<f64>() / idx.len() as f64);
        idx.iter()
            .map(|&i| (pts[i][0] - c[0]).powi(2) + (pts[i][1] - c[1]).powi(2))
            .sum()
    };
    // every split into two non-empty groups, by bitmask over rows 1..4 (row 0 fixed in group a)
    let best = (0u8..7)
        .map(|mask| {
            let (a, b): (Vec<usize>, Vec<usize>) =
                (0..4).partition(|&i| i == 0 || mask >> (i - 1) & 1 == 0);
            (sse(&a) + sse(&b), a)
        })
        .filter(|(_, a)| a.len() < 4)
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    assert_eq!(best.1, vec![0, 1]);

    let rows: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
    let ds = Dataset::from_rows(&rows, vec![P, P, N, N]).unwrap();
    let mut fam = generate_balls(&ds, &GenerationConfig::default()).unwrap();
    fam.balls
        .sort_by(|a, b| a.center[0].total_cmp(&b.center[0]));
    assert_eq!(fam.len(), 2);
    for (b, (cx, label)) in fam.balls.iter().zip([(0.0, P), (5.0, N)]) {
        assert_relative_eq!(b.center[0], cx);
        assert_relative_eq!(b.center[1], 0.5);
        assert_relative_eq!(b.radius, 0.5);
        assert_eq!(b.purity, 1.0);
        assert_eq!(b.label, label);
    }
}

#[test]
fn class_radius_is_the_farthest_center_from_the_mean() {
    let centers = [[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]];
    let mut balls: Vec<GranularBall> = centers.iter().map(|c| ball(c, 0.1, P)).collect();
    balls.push(ball(&[9.0, 9.0], 0.1, N));
    let geo = class_geometry(&family(balls), 1e-6).unwrap();

    let mean = [1.0, 4.0 / 3.0];
    let exhaustive = centers
        .iter()
        .map(|c| ((c[0] - mean[0]).powi(2) + (c[1] - mean[1]).powi(2)).sqrt())
        .fold(f64::MIN, f64::max);
    assert_relative_eq!(geo.center_pos[0], mean[0], epsilon = 1e-15);
    assert_relative_eq!(geo.center_pos[1], mean[1], epsilon = 1e-15);
    assert_relative_eq!(geo.radius_pos, exhaustive, epsilon = 1e-15);
    assert_relative_eq!(geo.radius_pos, 73f64.sqrt() / 3.0, epsilon = 1e-15);
    assert_eq!(geo.radius_neg, 0.0);
}

#[test]
fn mixed_scale_columns_normalize_independently() {
    let rows = vec![
        vec![2.0, -1000.0],
        vec![4.0, 500.0],
        vec![6.0, 0.0],
        vec![3.0, 2000.0],
    ];
    let ds = Dataset::from_rows(&rows, vec![P, N, P, N]).unwrap();
    let out = normalize_min_max(&ds);
    for j in 0..2 {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (lo, hi) = col
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        for (i, v) in col.iter().enumerate() {
            assert_relative_eq!(
                out.features()[(i, j)],
                (v - lo) / (hi - lo),
                epsilon = 1e-15
            );
        }
    }
}

#[test]
fn small_qp_matches_enumeration() {
    for seed in 0..20 {
        let p = support::random_qp(&mut support::rng(seed), 3);
        let qp = gbtsvm::BoxQp::new(
            DMatrix::from_fn(3, 3, |i, j| p.q[i][j]),
            DVector::from_vec(p.lin.clone()),
            DVector::from_vec(p.upper.clone()),
        )
        .unwrap();
        let sol = box_qp::solve(&qp, 1e-10, 10_000).unwrap();
        let (oracle, f) = support::active_set_oracle(&p.q, &p.lin, &p.upper);
        for i in 0..3 {
            assert!((sol.alpha[i] - oracle[i]).abs() <= 1e-4, "seed {seed}");
        }
        assert!((sol.objective_value - f).abs() <= 1e-8 * (1.0 + f.abs()));
    }
}

#[test]
fn six_point_twsvm_matches_oracle_planes() {
    let pos = vec![vec![0.0, 0.0], vec![0.5, 1.0], vec![-0.5, 2.0]];
    let neg = vec![vec![3.0, 0.5], vec![3.5, 1.5], vec![4.0, 0.0]];
    let rows: Vec<Vec<f64>> = pos.iter().chain(&neg).cloned().collect();
    let ds = Dataset::from_rows(&rows, vec![P, P, P, N, N, N]).unwrap();
    let cfg = TrainConfig {
        qp_tol: 1e-10,
        ..TrainConfig::default()
    };
    let model = train_twsvm(&ds, &cfg).unwrap();

    let ones = vec![1.0; 3];
    let (q1, cols1) = dense_dual(&pos, &neg, cfg.reg_eps);
    let (a1, _) = support::active_set_oracle(&q1, &ones, &[cfg.c1; 3]);
    let u: Vec<f64> = combine(&cols1, &a1).iter().map(|v| -v).collect();
    let (q2, cols2) = dense_dual(&neg, &pos, cfg.reg_eps);
    let (a2, _) = support::active_set_oracle(&q2, &ones, &[cfg.c2; 3]);
    let v = combine(&cols2, &a2);

    for j in 0..2 {
        assert!(
            (model.w1[j] - u[j]).abs() <= 1e-4,
            "w1[{j}] {} vs {}",
            model.w1[j],
            u[j]
        );
        assert!(
            (model.w2[j] - v[j]).abs() <= 1e-4,
            "w2[{j}] {} vs {}",
            model.w2[j],
            v[j]
        );
    }
    assert!((model.b1 - u[2]).abs() <= 1e-4);
    assert!((model.b2 - v[2]).abs() <= 1e-4);
    for (x, label) in rows.iter().zip(ds.labels()) {
        assert_eq!(predict(&model, x).unwrap(), *label);
    }
}

#[test]
fn mixed_scores_cap_each_coordinate() {
    let fam = family(vec![
        ball(&[0.0, 0.0], 0.2, P),
        ball(&[0.0, 2.0], 0.3, P),
        ball(&[3.0, 1.0], 0.1, N),
    ]);
    let scores = [pure_score(0.3), pure_score(0.9), pure_score(0.6)];
    let cfg = TrainConfig::default().with_penalties(2.0, 4.0);
    let duals = gbftsvm_duals(&fam, &scores, &cfg).unwrap();
    assert_eq!(duals.second.qp.upper().as_slice(), &[4.0 * 0.3, 4.0 * 0.9]);
    assert_eq!(duals.first.qp.upper().as_slice(), &[2.0 * 0.6]);

    let pos = vec![vec![0.0, 0.0], vec![0.0, 2.0]];
    let neg = vec![vec![3.0, 1.0]];
    let (q, _) = dense_dual(&neg, &pos, cfg.reg_eps);
    let lin = [1.2, 1.3];
    let (oracle, f) = support::active_set_oracle(&q, &lin, &[1.2, 3.6]);
    for i in 0..2 {
        for j in 0..2 {
            assert_relative_eq!(
                duals.second.qp.hessian()[(i, j)],
                q[i][j],
                max_relative = 1e-9
            );
        }
    }
    let sol = box_qp::solve(&duals.second.qp, 1e-10, 100_000).unwrap();
    for i in 0..2 {
        assert!((sol.alpha[i] - oracle[i]).abs() <= 1e-4 * (1.0 + oracle[i]));
    }
    assert!((sol.objective_value - f).abs() <= 1e-8 * (1.0 + f.abs()));
}

#[test]
fn zero_score_ball_leaves_the_first_plane_unchanged() {
    let balls = vec![
        ball(&[0.0, 0.0], 0.2, P),
        ball(&[0.5, 1.5], 0.2, P),
        ball(&[3.0, 0.0], 0.3, N),
        ball(&[3.5, 1.0], 0.2, N),
        ball(&[1.0, 0.6], 0.1, N),
    ];
    let scores: Vec<PythagoreanScore> = [1.0, 0.8, 0.9, 0.7, 0.0].map(pure_score).to_vec();
    let cfg = TrainConfig::default();
    let with = train_gbftsvm(&family(balls.clone()), &scores, &cfg).unwrap();
    let duals = gbftsvm_duals(&family(balls.clone()), &scores, &cfg).unwrap();
    assert_eq!(
        duals.first.qp.dim(),
        2,
        "zero-capacity coordinate is dropped"
    );

    let without = train_gbftsvm(&family(balls[..4].to_vec()), &scores[..4], &cfg).unwrap();
    for j in 0..2 {
        assert!((with.w1[j] - without.w1[j]).abs() < 1e-6);
    }
    assert!((with.b1 - without.b1).abs() < 1e-6);
}

#[test]
fn larger_opposite_radii_never_lower_the_dual_optimum() {
    let own = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.5, 1.0, -0.5, 2.0]);
    let other = DMatrix::from_row_slice(3, 2, &[3.0, 0.5, 3.5, 1.5, 4.0, 0.0]);
    let mut last = f64::MIN;
    for step in 0..6 {
        let r = DVector::from_vec(vec![
            0.1 * step as f64,
            0.05 * step as f64,
            0.2 * step as f64,
        ]);
        let asm = DualAssembly::new(&own, &other, &r, 1e-4, DVector::from_element(3, 1.0)).unwrap();
        let sol = box_qp::solve(&asm.qp, 1e-10, 100_000).unwrap();
        assert!(sol.objective_value >= last - 1e-9);
        last = sol.objective_value;
    }
}

#[test]
fn separable_data_is_classified_by_every_method() {
    let ds = support::separable_dataset(&mut support::rng(11), 200, 3);
    let folds = make_folds(ds.n_samples(), 10, 3).unwrap();
    for method in Method::ALL {
        let r = cross_validate(
            &ds,
            method,
            &TrainConfig::default(),
            &GenerationConfig::default(),
            &folds,
        )
        .unwrap();
        assert!(r.accuracy >= 0.95, "{method}: {}", r.accuracy);
    }
}

#[test]
fn ten_folds_on_682_rows() {
    let ds = bundled::fourclass();
    let folds = make_folds(ds.n_samples(), 10, 1).unwrap();
    let r = cross_validate(
        &ds,
        Method::Gbtwsvm,
        &TrainConfig::default(),
        &GenerationConfig::default(),
        &folds,
    )
    .unwrap();
    assert_eq!(r.per_fold.len(), 10);
    let mut sizes: Vec<usize> = r.per_fold.iter().map(|f| f.n_test).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [vec![68; 8], vec![69; 2]].concat());
}

#[test]
fn grid_sizes() {
    let ds = bundled::moons();
    let folds = make_folds(ds.n_samples(), 5, 2).unwrap();
    let run = |exps: &[i32]| {
        grid_search(
            &ds,
            Method::Gbftsvm,
            exps,
            &TrainConfig::default(),
            &GenerationConfig::default(),
            &folds,
            &CvOptions::default(),
        )
        .unwrap()
    };
    let single = run(&[0]);
    assert_eq!(single.surface.len(), 1);
    assert_eq!(single.best_exponents, (0, 0));
    assert_eq!(single.best_params, (1.0, 1.0));
    let small = run(&[-1, 0, 1]);
    assert_eq!(small.surface.len(), 9);
    let top = small
        .surface
        .values()
        .map(|r| r.accuracy)
        .fold(f64::MIN, f64::max);
    assert_eq!(small.best_accuracy, top);
}

#[test]
fn noise_sweep_shape_and_zero_rate() {
    let ds = bundled::moons();
    let folds = make_folds(ds.n_samples(), 5, 4).unwrap();
    let gen = GenerationConfig::default();
    let methods = [
        (Method::Gbtwsvm, TrainConfig::default()),
        (Method::Gbftsvm, TrainConfig::default()),
    ];
    let rows = noise_sweep(
        &ds,
        &methods,
        &[0.05, 0.10],
        &[1, 2, 3],
        &gen,
        &folds,
        &CvOptions::default(),
    )
    .unwrap();
    for (m, _) in &methods {
        assert_eq!(rows.iter().filter(|r| r.method == *m).count(), 6);
    }

    let zero = noise_sweep(
        &ds,
        &methods[..1],
        &[0.0],
        &[9],
        &gen,
        &folds,
        &CvOptions::default(),
    )
    .unwrap();
    let clean = cross_validate_with(
        &ds,
        Method::Gbtwsvm,
        &TrainConfig::default(),
        &gen,
        &folds,
        &CvOptions::default(),
    )
    .unwrap();
    assert_eq!(zero[0].report.accuracy, clean.accuracy);
    assert_eq!(zero[0].report.precision, clean.precision);
    let fold_acc =
        |r: &gbtsvm::MetricReport| r.per_fold.iter().map(|f| f.accuracy).collect::<Vec<_>>();
    assert_eq!(fold_acc(&zero[0].report), fold_acc(&clean));
}

#[test]
fn batch_prediction_matches_rowwise_and_is_fast() {
    let ds = normalize_min_max(&bundled::fourclass());
    let model = train_twsvm(&ds, &TrainConfig::default()).unwrap();
    let xs = ds.features().clone();
    let batch = predict_batch(&model, &xs).unwrap();
    for i in 0..ds.n_samples() {
        assert_eq!(batch[i], predict(&model, &ds.row(i)).unwrap());
    }
    assert!(predict_batch(&model, &DMatrix::zeros(0, 2))
        .unwrap()
        .is_empty());

    let mut best = f64::MAX;
    for _ in 0..5 {
        let t = Instant::now();
        std::hint::black_box(predict_batch(&model, &xs).unwrap());
        best = best.min(t.elapsed().as_secs_f64());
    }
    assert!(best < 0.010, "{best} s");
}

#[test]
fn fourclass_file_loads_with_expected_shape() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/fourclass.csv");
    let ds = load_dataset(path, &LoadOptions::default()).unwrap();
    assert_eq!((ds.n_samples(), ds.n_features()), (682, 2));
    assert!(ds.has_both_classes());
    assert_eq!(ds.source_id(), "fourclass");
}

#[test]
fn wine_duals_converge_across_the_penalty_grid() {
    // few positive balls in 13 dimensions make the first dual badly scaled
    let ds = normalize_min_max(&bundled::wine());
    let fam = generate_balls(&ds, &GenerationConfig::default()).unwrap();
    for e in -5..=5 {
        let c = 2f64.powi(e);
        let model = train_gbtwsvm(&fam, &TrainConfig::default().with_penalties(c, c)).unwrap();
        assert!(model.converged, "c = 2^{e}");
        let model = train_twsvm(&ds, &TrainConfig::default().with_penalties(c, c)).unwrap();
        assert!(model.converged, "twsvm c = 2^{e}");
    }
}
