//! Cross-validated evaluation, penalty grid search, label-noise sweeps and
//! Friedman/Nemenyi rank statistics.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::classifiers::{self, Method, TrainConfig};
use crate::dataset_io::{inject_label_noise, Dataset, FoldPlan, Label, MinMaxScaler, NoiseSpec};
use crate::error::{Error, Result};
use crate::granular_ball::{generate_balls, BallFamily, GenerationConfig};
use crate::pythagorean::{score_family, PythagoreanScore, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Accuracy plus support-weighted precision and recall over both classes.
pub fn compute_metrics(y_true: &[Label], y_pred: &[Label]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = y_true.len() as f64;
    let correct = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    let (mut precision, mut recall) = (0.0, 0.0);
    for class in [Label::Positive, Label::Negative] {
        let support = y_true.iter().filter(|&&t| t == class).count();
        if support == 0 {
            continue;
        }
        let predicted = y_pred.iter().filter(|&&p| p == class).count();
        let tp = y_true
            .iter()
            .zip(y_pred)
            .filter(|(&t, &p)| t == class && p == class)
            .count();
        let w = support as f64 / n;
        if predicted > 0 {
            precision += w * tp as f64 / predicted as f64;
        }
        recall += w * tp as f64 / support as f64;
    }
    Ok(Metrics {
        accuracy: correct as f64 / n,
        precision,
        recall,
    })
}

/// Derives an independent seed for fold `fold` of a run seeded with `seed`
/// (SplitMix64 finalizer).
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    let mut z = seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Which rows receive label noise during a cross-validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTarget {
    /// Only the training rows of each fold; test labels stay clean.
    TrainOnly,
    /// The whole dataset before splitting.
    All,
}

/// Where min-max scaling statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Whole dataset, before splitting.
    Global,
    /// Each training split; the test split reuses its statistics.
    TrainSplit,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvOptions {
    pub normalization: Normalization,
    pub score_epsilon: f64,
    pub noise: Option<NoiseSpec>,
    pub noise_target: NoiseTarget,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            normalization: Normalization::Global,
            score_epsilon: DEFAULT_EPSILON,
            noise: None,
            noise_target: NoiseTarget::TrainOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_balls: Option<usize>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub ball_time_s: f64,
    pub train_time_s: f64,
    pub predict_time_s: f64,
    pub converged: bool,
    /// Set when the fold could not be trained; metrics are then zero.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Sample standard deviation of fold accuracies.
    pub acc_sd: f64,
    /// Sum over folds.
    pub train_time_s: f64,
    pub predict_time_s: f64,
    pub per_fold: Vec<FoldRecord>,
}

impl MetricReport {
    pub fn skipped_folds(&self) -> Vec<usize> {
        self.per_fold
            .iter()
            .filter(|f| f.skipped.is_some())
            .map(|f| f.fold)
            .collect()
    }

    fn aggregate(per_fold: Vec<FoldRecord>) -> Result<MetricReport> {
        let used: Vec<&FoldRecord> = per_fold.iter().filter(|f| f.skipped.is_none()).collect();
        if used.is_empty() {
            return Err(Error::NoUsableFolds);
        }
        let k = used.len() as f64;
        let mean = |f: fn(&FoldRecord) -> f64| used.iter().map(|r| f(r)).sum::<f64>() / k;
        let accuracy = mean(|r| r.accuracy);
        let acc_sd = if used.len() > 1 {
            (used
                .iter()
                .map(|r| (r.accuracy - accuracy).powi(2))
                .sum::<f64>()
                / (k - 1.0))
                .sqrt()
        } else {
            0.0
        };
        Ok(MetricReport {
            accuracy,
            precision: mean(|r| r.precision),
            recall: mean(|r| r.recall),
            acc_sd,
            train_time_s: per_fold.iter().map(|r| r.train_time_s).sum(),
            predict_time_s: per_fold.iter().map(|r| r.predict_time_s).sum(),
            per_fold,
        })
    }
}

/// Everything about a fold that does not depend on the penalties, so a grid
/// search can reuse it.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub fold: usize,
    pub train: Dataset,
    pub test: Dataset,
    pub family: Option<BallFamily>,
    pub scores: Option<Vec<PythagoreanScore>>,
    pub ball_time_s: f64,
    pub skipped: Option<String>,
}

fn skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::SingleClassDataset
            | Error::SingleClassFamily
            | Error::DegenerateModel { .. }
            | Error::NumericalFailure(_)
    )
}

fn scaled(ds: &Dataset, scaler: &MinMaxScaler) -> Result<Dataset> {
    Dataset::new(
        scaler.transform(ds.features())?,
        ds.labels().to_vec(),
        ds.source_id(),
    )
}

pub fn prepare_folds(
    ds: &Dataset,
    method: Method,
    gen_cfg: &GenerationConfig,
    folds: &FoldPlan,
    opts: &CvOptions,
) -> Result<Vec<PreparedFold>> {
    if folds.n_samples() != ds.n_samples() {
        return Err(Error::Shape(format!(
            "fold plan covers {} rows, dataset has {}",
            folds.n_samples(),
            ds.n_samples()
        )));
    }
    gen_cfg.validate()?;
    let mut base = match (opts.noise, opts.noise_target) {
        (Some(spec), NoiseTarget::All) => inject_label_noise(ds, &spec),
        _ => ds.clone(),
    };
    if opts.normalization == Normalization::Global {
        base = scaled(&base, &MinMaxScaler::fit(base.features()))?;
    }
    (0..folds.k)
        .into_par_iter()
        .map(|fold| -> Result<PreparedFold> {
            let mut train = base.subset(&folds.train_indices(fold));
            let mut test = base.subset(&folds.test_indices(fold));
            if let (Some(spec), NoiseTarget::TrainOnly) = (opts.noise, opts.noise_target) {
                let fold_spec = NoiseSpec {
                    rate: spec.rate,
                    seed: fold_seed(spec.seed, fold),
                };
                train = inject_label_noise(&train, &fold_spec);
            }
            if opts.normalization == Normalization::TrainSplit {
                let scaler = MinMaxScaler::fit(train.features());
                train = scaled(&train, &scaler)?;
                test = scaled(&test, &scaler)?;
            }
            let mut prepared = PreparedFold {
                fold,
                train,
                test,
                family: None,
                scores: None,
                ball_time_s: 0.0,
                skipped: None,
            };
            if !prepared.train.has_both_classes() {
                prepared.skipped = Some(Error::SingleClassDataset.to_string());
                return Ok(prepared);
            }
            if method.uses_balls() {
                let start = Instant::now();
                let fam = generate_balls(
                    &prepared.train,
                    &gen_cfg.with_seed(fold_seed(gen_cfg.seed, fold)),
                )?;
                if method == Method::Gbftsvm {
                    match score_family(&fam, opts.score_epsilon) {
                        Ok(s) => prepared.scores = Some(s),
                        Err(e) if skippable(&e) => prepared.skipped = Some(e.to_string()),
                        Err(e) => return Err(e),
                    }
                }
                prepared.ball_time_s = start.elapsed().as_secs_f64();
                prepared.family = Some(fam);
            }
            Ok(prepared)
        })
        .collect()
}

fn run_fold(p: &PreparedFold, method: Method, cfg: &TrainConfig) -> Result<FoldRecord> {
    let mut rec = FoldRecord {
        fold: p.fold,
        n_train: p.train.n_samples(),
        n_test: p.test.n_samples(),
        n_balls: p.family.as_ref().map(BallFamily::len),
        accuracy: 0.0,
        precision: 0.0,
        recall: 0.0,
        ball_time_s: p.ball_time_s,
        train_time_s: 0.0,
        predict_time_s: 0.0,
        converged: false,
        skipped: p.skipped.clone(),
    };
    if rec.skipped.is_some() {
        return Ok(rec);
    }
    if p.test.is_empty() {
        rec.skipped = Some("empty test fold".into());
        return Ok(rec);
    }
    let start = Instant::now();
    let trained = match method {
        Method::Twsvm => classifiers::train_twsvm(&p.train, cfg),
        Method::Gbtwsvm => classifiers::train_gbtwsvm(p.family.as_ref().expect("prepared"), cfg),
        Method::Gbftsvm => classifiers::train_gbftsvm(
            p.family.as_ref().expect("prepared"),
            p.scores.as_deref().expect("prepared"),
            cfg,
        ),
    };
    rec.train_time_s = start.elapsed().as_secs_f64();
    let model = match trained {
        Ok(m) => m,
        Err(e) if skippable(&e) => {
            rec.skipped = Some(e.to_string());
            return Ok(rec);
        }
        Err(e) => return Err(e),
    };
    let start = Instant::now();
    let pred = classifiers::predict_batch(&model, p.test.features())?;
    rec.predict_time_s = start.elapsed().as_secs_f64();
    let m = compute_metrics(p.test.labels(), &pred)?;
    rec.accuracy = m.accuracy;
    rec.precision = m.precision;
    rec.recall = m.recall;
    rec.converged = model.converged;
    Ok(rec)
}

pub fn evaluate_prepared(
    prepared: &[PreparedFold],
    method: Method,
    cfg: &TrainConfig,
) -> Result<MetricReport> {
    let per_fold = prepared
        .par_iter()
        .map(|p| run_fold(p, method, cfg))
        .collect::<Result<Vec<_>>>()?;
    for f in per_fold.iter().filter(|f| f.skipped.is_some()) {
        log::warn!(
            "fold {} skipped: {}",
            f.fold,
            f.skipped.as_deref().unwrap_or("")
        );
    }
    MetricReport::aggregate(per_fold)
}

/// k-fold evaluation with default options (global min-max scaling, no
/// noise). Balls are generated on each training split only.
pub fn cross_validate(
    ds: &Dataset,
    method: Method,
    cfg: &TrainConfig,
    gen_cfg: &GenerationConfig,
    folds: &FoldPlan,
) -> Result<MetricReport> {
    cross_validate_with(ds, method, cfg, gen_cfg, folds, &CvOptions::default())
}

pub fn cross_validate_with(
    ds: &Dataset,
    method: Method,
    cfg: &TrainConfig,
    gen_cfg: &GenerationConfig,
    folds: &FoldPlan,
    opts: &CvOptions,
) -> Result<MetricReport> {
    cfg.validate()?;
    let prepared = prepare_folds(ds, method, gen_cfg, folds, opts)?;
    evaluate_prepared(&prepared, method, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    /// Exponents `(i, j)` of the best `(C1, C2) = (2^i, 2^j)`.
    pub best_exponents: (i32, i32),
    pub best_params: (f64, f64),
    pub best_accuracy: f64,
    pub surface: BTreeMap<(i32, i32), MetricReport>,
}

impl GridResult {
    pub fn best_report(&self) -> &MetricReport {
        &self.surface[&self.best_exponents]
    }
}

/// Evaluates every `(2^i, 2^j)` pair, tying `C3 = C1` and `C4 = C2`. All
/// three methods are twin methods, so the grid is always two-dimensional.
/// Ties in accuracy go to the lexicographically smallest pair.
pub fn grid_search(
    ds: &Dataset,
    method: Method,
    exponents: &[i32],
    base: &TrainConfig,
    gen_cfg: &GenerationConfig,
    folds: &FoldPlan,
    opts: &CvOptions,
) -> Result<GridResult> {
    if exponents.is_empty() {
        return Err(Error::InvalidConfig("empty exponent grid".into()));
    }
    let mut exps = exponents.to_vec();
    exps.sort_unstable();
    exps.dedup();
    let prepared = prepare_folds(ds, method, gen_cfg, folds, opts)?;
    let points: Vec<(i32, i32)> = exps
        .iter()
        .flat_map(|&i| exps.iter().map(move |&j| (i, j)))
        .collect();
    let reports = points
        .par_iter()
        .map(|&(i, j)| {
            let cfg = base.with_penalties(2f64.powi(i), 2f64.powi(j));
            evaluate_prepared(&prepared, method, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let surface: BTreeMap<_, _> = points.into_iter().zip(reports).collect();
    let (best_exponents, best) = surface
        .iter()
        .fold(
            None::<(&(i32, i32), &MetricReport)>,
            |acc, (k, r)| match acc {
                Some((_, b)) if b.accuracy >= r.accuracy => acc,
                _ => Some((k, r)),
            },
        )
        .expect("non-empty grid");
    Ok(GridResult {
        best_exponents: *best_exponents,
        best_params: (2f64.powi(best_exponents.0), 2f64.powi(best_exponents.1)),
        best_accuracy: best.accuracy,
        surface: surface.clone(),
    })
}

/// Parses a grid specification such as `-5..5` (inclusive) or `-1,0,2`.
pub fn parse_exponents(spec: &str) -> Result<Vec<i32>> {
    let bad = || Error::InvalidConfig(format!("bad grid specification {spec:?}"));
    let s = spec.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: i32 = a.trim().parse().map_err(|_| bad())?;
        let b: i32 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<i32>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRow {
    pub method: Method,
    pub rate: f64,
    pub seed: u64,
    pub report: MetricReport,
}

/// Cross-validates each method at each `(rate, seed)` with fixed penalties.
pub fn noise_sweep(
    ds: &Dataset,
    methods: &[(Method, TrainConfig)],
    rates: &[f64],
    seeds: &[u64],
    gen_cfg: &GenerationConfig,
    folds: &FoldPlan,
    opts: &CvOptions,
) -> Result<Vec<NoiseRow>> {
    let specs = rates
        .iter()
        .flat_map(|&r| seeds.iter().map(move |&s| NoiseSpec::new(r, s)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(methods.len() * specs.len());
    for (method, cfg) in methods {
        for spec in &specs {
            let o = CvOptions {
                noise: Some(*spec),
                ..*opts
            };
            rows.push(NoiseRow {
                method: *method,
                rate: spec.rate,
                seed: spec.seed,
                report: cross_validate_with(ds, *method, cfg, gen_cfg, folds, &o)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceReport {
    /// `rank_matrix[dataset][model]`, 1 = best accuracy, ties averaged.
    pub rank_matrix: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
    pub chi2_f: f64,
    pub f_f: f64,
    pub dof: (usize, usize),
    pub q_alpha: f64,
    pub cd: f64,
    /// `|avg_rank_i − avg_rank_j| > cd`
    pub pairwise_significant: Vec<Vec<bool>>,
}

/// Studentized range statistic divided by √2 at α = 0.05 for 2..=10 models.
pub const NEMENYI_Q_05: [f64; 9] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
];

pub fn nemenyi_q_alpha_05(models: usize) -> Option<f64> {
    (2..=10).contains(&models).then(|| NEMENYI_Q_05[models - 2])
}

pub fn nemenyi_cd(models: usize, datasets: usize, q_alpha: f64) -> f64 {
    let (m, n) = (models as f64, datasets as f64);
    q_alpha * (m * (m + 1.0) / (6.0 * n)).sqrt()
}

/// Descending ranks with ties sharing the mean of their positions.
pub fn rank_row(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test over an `N datasets x M models` accuracy matrix.
pub fn friedman_test(acc: &[Vec<f64>], q_alpha: f64) -> Result<SignificanceReport> {
    let n = acc.len();
    let m = acc.first().map_or(0, Vec::len);
    if n < 2 || m < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 datasets and 2 models, got {n}x{m}"
        )));
    }
    if let Some(i) = acc.iter().position(|r| r.len() != m) {
        return Err(Error::Shape(format!(
            "row {i} has {} entries, expected {m}",
            acc[i].len()
        )));
    }
    if acc.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Shape(
            "accuracy matrix has missing or non-finite entries".into(),
        ));
    }
    let rank_matrix: Vec<Vec<f64>> = acc.iter().map(|r| rank_row(r)).collect();
    let avg_ranks: Vec<f64> = (0..m)
        .map(|j| rank_matrix.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let (nf, mf) = (n as f64, m as f64);
    let sum_sq: f64 = avg_ranks.iter().map(|r| r * r).sum();
    let chi2_f =
        (12.0 * nf / (mf * (mf + 1.0)) * (sum_sq - mf * (mf + 1.0).powi(2) / 4.0)).max(0.0);
    let f_f = (nf - 1.0) * chi2_f / (nf * (mf - 1.0) - chi2_f);
    let cd = nemenyi_cd(m, n, q_alpha);
    let pairwise_significant = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (avg_ranks[i] - avg_ranks[j]).abs() > cd)
                .collect()
        })
        .collect();
    Ok(SignificanceReport {
        rank_matrix,
        avg_ranks,
        chi2_f,
        f_f,
        dof: (m - 1, (m - 1) * (n - 1)),
        q_alpha,
        cd,
        pairwise_significant,
    })
}

/// Accuracy table with one row per dataset and one column per model.
#[derive(Debug, Clone, PartialEq)]
pub struct AccMatrix {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Reads `dataset,model1,model2,...` CSV. Ragged rows and non-numeric cells
/// are shape errors.
pub fn parse_acc_matrix<R: Read>(reader: R) -> Result<AccMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Shape(e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(Error::Shape(
            "header needs a dataset column and at least one model".into(),
        ));
    }
    let models: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let (mut datasets, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Shape(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Shape(format!(
                "line {line}: {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        datasets.push(rec[0].to_string());
        values.push(
            rec.iter()
                .skip(1)
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| Error::Shape(format!("line {line}: non-numeric entry {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(AccMatrix {
        models,
        datasets,
        values,
    })
}

/// `model,avg_rank,cd` rows for critical-difference plots.
pub fn write_cd_data<W: Write>(
    mut w: W,
    models: &[String],
    report: &SignificanceReport,
) -> std::io::Result<()> {
    writeln!(w, "model,avg_rank,cd")?;
    for (name, r) in models.iter().zip(&report.avg_ranks) {
        writeln!(w, "{name},{r:.6},{:.6}", report.cd)?;
    }
    Ok(())
}

/// One line of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: Method,
    pub noise_rate: f64,
    pub noise_seed: Option<u64>,
    pub c1_exp: i32,
    pub c2_exp: i32,
    pub report: MetricReport,
}

/// Metric table without timings, so repeated runs produce identical bytes.
pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[ReportRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "dataset,method,noise_rate,noise_seed,c1,c2,accuracy,acc_sd,precision,recall,folds_used,folds_skipped"
    )?;
    for r in rows {
        let skipped = r.report.skipped_folds().len();
        writeln!(
            w,
            "{},{},{},{},2^{},2^{},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.dataset,
            r.method,
            r.noise_rate,
            r.noise_seed
                .map_or_else(|| "-".to_string(), |s| s.to_string()),
            r.c1_exp,
            r.c2_exp,
            r.report.accuracy,
            r.report.acc_sd,
            r.report.precision,
            r.report.recall,
            r.report.per_fold.len() - skipped,
            skipped
        )?;
    }
    Ok(())
}

pub fn write_timing_csv<W: Write>(mut w: W, rows: &[ReportRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "dataset,method,noise_rate,noise_seed,ball_time_s,train_time_s,predict_time_s"
    )?;
    for r in rows {
        let balls: f64 = r.report.per_fold.iter().map(|f| f.ball_time_s).sum();
        writeln!(
            w,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.dataset,
            r.method,
            r.noise_rate,
            r.noise_seed
                .map_or_else(|| "-".to_string(), |s| s.to_string()),
            balls,
            r.report.train_time_s,
            r.report.predict_time_s
        )?;
    }
    Ok(())
}

/// Flat `key=value` manifest, keys sorted.
pub fn write_manifest<W: Write>(
    mut w: W,
    entries: &BTreeMap<String, String>,
) -> std::io::Result<()> {
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}
