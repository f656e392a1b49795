//! Shared fixtures for the benchmarks.

use gbtsvm::classifiers::{twsvm_duals, TwinDuals};
use gbtsvm::dataset_io::normalize_min_max;
use gbtsvm::granular_ball::generate_balls;
use gbtsvm::pythagorean::{score_family, DEFAULT_EPSILON};
use gbtsvm::{bundled, BallFamily, Dataset, GenerationConfig, PythagoreanScore, TrainConfig};

/// The bundled 682-row fourclass set scaled to the unit square.
pub fn fourclass() -> Dataset {
    normalize_min_max(&bundled::fourclass())
}

/// First `n` rows of the scaled fourclass set.
pub fn fourclass_prefix(n: usize) -> Dataset {
    let ds = fourclass();
    let idx: Vec<usize> = (0..n.min(ds.n_samples())).collect();
    ds.subset(&idx)
}

/// TWSVM duals on the first `n` rows; the first dual has one coordinate per
/// negative row.
pub fn point_duals(n: usize) -> TwinDuals {
    twsvm_duals(&fourclass_prefix(n), &TrainConfig::default()).expect("both classes present")
}

pub fn balls(ds: &Dataset, t0: f64) -> BallFamily {
    let cfg = GenerationConfig {
        initial_purity: t0,
        ..GenerationConfig::default()
    };
    generate_balls(ds, &cfg).expect("valid configuration")
}

pub fn scored_balls(ds: &Dataset, t0: f64) -> (BallFamily, Vec<PythagoreanScore>) {
    let fam = balls(ds, t0);
    let scores = score_family(&fam, DEFAULT_EPSILON).expect("both classes present");
    (fam, scores)
}
