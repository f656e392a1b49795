use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use gbtsvm::bundled;
use gbtsvm::classifiers::{predict_batch, train_gbftsvm, train_gbtwsvm, train_twsvm};
use gbtsvm::dataset_io::{
    load_dataset, load_features, make_folds, make_stratified_folds, Format, LabelColumn,
};
use gbtsvm::evaluation::{
    compute_metrics, friedman_test, grid_search, nemenyi_q_alpha_05, noise_sweep, parse_acc_matrix,
    parse_exponents, write_cd_data, write_manifest, write_metrics_csv, write_timing_csv, CvOptions,
    NoiseTarget, ReportRow,
};
use gbtsvm::granular_ball::generate_balls;
use gbtsvm::pythagorean::score_family;
use gbtsvm::{
    Dataset, GenerationConfig, LoadOptions, Method, MinMaxScaler, TrainConfig, TwinModel,
};
use sha2::{Digest, Sha256};

use crate::args::{
    BallArgs, BallGenArgs, BenchmarkArgs, Cli, Command, DataArgs, FormatArg, PredictArgs,
    SolverArgs, StatsArgs, TrainArgs,
};
use crate::CliError;

type Manifest = BTreeMap<String, String>;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    fs::create_dir_all(&cli.global.out)?;
    let mut manifest = Manifest::new();
    let name = match &cli.command {
        Command::Train(a) => {
            train(cli, a, &mut manifest)?;
            "train"
        }
        Command::Predict(a) => {
            predict(a, &mut manifest)?;
            "predict"
        }
        Command::Balls(a) => {
            balls(cli, a, &mut manifest)?;
            "balls"
        }
        Command::Benchmark(a) => {
            benchmark(cli, a, &mut manifest)?;
            "benchmark"
        }
        Command::Stats(a) => {
            stats(cli, a, &mut manifest)?;
            "stats"
        }
    };
    manifest.insert("command".into(), name.into());
    manifest.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    manifest.insert("seed".into(), cli.global.seed.to_string());
    manifest.insert(
        "threads".into(),
        cli.global
            .threads
            .map_or_else(|| "auto".to_string(), |t| t.to_string()),
    );
    let path = cli.global.out.join(format!("{name}.manifest"));
    write_manifest(BufWriter::new(File::create(&path)?), &manifest)?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loaded dataset with the name used in report files and its content hash.
struct Source {
    name: String,
    dataset: Dataset,
    sha256: String,
}

fn bundled_text(name: &str) -> Option<&'static str> {
    match name {
        "fourclass" => Some(bundled::FOURCLASS_CSV),
        "moons" => Some(bundled::MOONS_CSV),
        "wine" => Some(bundled::WINE_CSV),
        _ => None,
    }
}

fn load_options(
    format: FormatArg,
    label_column: &str,
    positive_label: Option<&str>,
) -> LoadOptions {
    LoadOptions {
        format: match format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Sparse => Format::Sparse,
        },
        label_column: label_column
            .parse::<LabelColumn>()
            .unwrap_or(LabelColumn::Last),
        positive_label: positive_label.map(str::to_string),
    }
}

fn load_source(spec: &str, opts: &LoadOptions) -> Result<Source, CliError> {
    if let Some(name) = spec.strip_prefix("bundled:") {
        let text = bundled_text(name).ok_or_else(|| {
            CliError::Input(format!(
                "unknown bundled dataset {name:?} (have {})",
                bundled::NAMES.join(", ")
            ))
        })?;
        let dataset = bundled::by_name(name).expect("name checked above");
        return Ok(Source {
            name: name.to_string(),
            dataset,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let bytes = fs::read(spec).map_err(|e| CliError::Input(format!("cannot read {spec}: {e}")))?;
    let dataset = load_dataset(spec, opts)?;
    Ok(Source {
        name: dataset.source_id().to_string(),
        dataset,
        sha256: sha256_hex(&bytes),
    })
}

fn load_data_args(d: &DataArgs) -> Result<Source, CliError> {
    load_source(
        &d.data,
        &load_options(d.format, &d.label_column, d.positive_label.as_deref()),
    )
}

fn record_source(m: &mut Manifest, key: &str, spec: &str, s: &Source) {
    m.insert(format!("{key}.path"), spec.to_string());
    m.insert(format!("{key}.sha256"), s.sha256.clone());
    m.insert(format!("{key}.n"), s.dataset.n_samples().to_string());
    m.insert(format!("{key}.d"), s.dataset.n_features().to_string());
}

fn gen_config(b: &BallGenArgs, seed: u64) -> Result<GenerationConfig, CliError> {
    let cfg = GenerationConfig {
        initial_purity: b.t0,
        radius_mode: b.radius.into(),
        min_split_size: b.min_split,
        de_overlap: b.de_overlap.into(),
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn record_gen(m: &mut Manifest, g: &GenerationConfig) {
    m.insert("balls.t0".into(), g.initial_purity.to_string());
    m.insert(
        "balls.radius".into(),
        format!("{:?}", g.radius_mode).to_lowercase(),
    );
    m.insert(
        "balls.de_overlap".into(),
        format!("{:?}", g.de_overlap).to_lowercase(),
    );
    m.insert("balls.min_split".into(), g.min_split_size.to_string());
}

fn solver_config(s: &SolverArgs) -> TrainConfig {
    TrainConfig {
        reg_eps: s.reg_eps,
        qp_tol: s.qp_tol,
        qp_max_iter: s.qp_max_iter,
        ..TrainConfig::default()
    }
}

fn record_train(m: &mut Manifest, c: &TrainConfig) {
    for (k, v) in [("c1", c.c1), ("c2", c.c2), ("c3", c.c3), ("c4", c.c4)] {
        m.insert(format!("train.{k}"), v.to_string());
    }
    m.insert("train.reg_eps".into(), c.reg_eps.to_string());
    m.insert("train.qp_tol".into(), c.qp_tol.to_string());
    m.insert(
        "train.qp_max_iter".into(),
        c.qp_max_iter
            .map_or_else(|| "auto".to_string(), |n| n.to_string()),
    );
}

fn train(cli: &Cli, a: &TrainArgs, m: &mut Manifest) -> Result<(), CliError> {
    let src = load_data_args(&a.data)?;
    record_source(m, "data", &a.data.data, &src);
    let gen = gen_config(&a.balls, cli.global.seed)?;
    let cfg = TrainConfig {
        c1: a.c1,
        c2: a.c2,
        c3: a.c3.unwrap_or(a.c1),
        c4: a.c4.unwrap_or(a.c2),
        ..solver_config(&a.solver)
    };
    cfg.validate()?;
    if !src.dataset.has_both_classes() {
        return Err(CliError::Input(
            "training data contains a single class".into(),
        ));
    }
    let scaler = (!a.no_normalize).then(|| MinMaxScaler::fit(src.dataset.features()));
    let ds = match &scaler {
        Some(s) => Dataset::new(
            s.transform(src.dataset.features())?,
            src.dataset.labels().to_vec(),
            src.name.clone(),
        )?,
        None => src.dataset.clone(),
    };

    let start = Instant::now();
    let (model, n_balls) = match a.method {
        Method::Twsvm => (train_twsvm(&ds, &cfg)?, None),
        Method::Gbtwsvm => {
            let fam = generate_balls(&ds, &gen)?;
            (train_gbtwsvm(&fam, &cfg)?, Some(fam.len()))
        }
        Method::Gbftsvm => {
            let fam = generate_balls(&ds, &gen)?;
            let scores = score_family(&fam, a.epsilon)?;
            (train_gbftsvm(&fam, &scores, &cfg)?, Some(fam.len()))
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let model = match scaler {
        Some(s) => model.with_scaler(s),
        None => model,
    };
    model.save(&a.model_out)?;

    let balls = n_balls.map_or_else(|| "-".to_string(), |n| n.to_string());
    println!(
        "method={} n={} balls={} train_s={:.6} converged={}",
        a.method,
        ds.n_samples(),
        balls,
        elapsed,
        model.converged
    );
    m.insert("method".into(), a.method.to_string());
    m.insert("normalize".into(), (!a.no_normalize).to_string());
    m.insert("epsilon".into(), a.epsilon.to_string());
    m.insert("model_out".into(), a.model_out.display().to_string());
    m.insert("result.balls".into(), balls);
    m.insert("result.converged".into(), model.converged.to_string());
    if a.method.uses_balls() {
        record_gen(m, &gen);
    }
    record_train(m, &cfg);
    Ok(())
}

fn predict(a: &PredictArgs, m: &mut Manifest) -> Result<(), CliError> {
    let model = TwinModel::load(&a.model)?;
    let dim = model.dim();
    let opts = load_options(FormatArg::Csv, "last", a.positive_label.as_deref());
    let labeled = load_dataset(&a.data, &opts)
        .ok()
        .filter(|d| d.n_features() == dim);
    let (features, truth) = match labeled {
        Some(ds) => (ds.features().clone(), Some(ds.labels().to_vec())),
        None => {
            let x = load_features(&a.data)?;
            if x.ncols() != dim {
                return Err(gbtsvm::Error::DimensionMismatch {
                    expected: dim,
                    got: x.ncols(),
                }
                .into());
            }
            (x, None)
        }
    };
    let labels = predict_batch(&model, &features)?;

    let mut text = String::with_capacity(labels.len() * 3);
    for l in &labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    match &a.labels_out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }

    m.insert("model".into(), a.model.display().to_string());
    m.insert("model.sha256".into(), sha256_hex(&fs::read(&a.model)?));
    m.insert("data.path".into(), a.data.clone());
    m.insert("data.sha256".into(), sha256_hex(&fs::read(&a.data)?));
    m.insert("data.n".into(), labels.len().to_string());
    if let Some(t) = truth {
        let r = compute_metrics(&t, &labels)?;
        let line = format!(
            "accuracy={:.6} precision={:.6} recall={:.6}",
            r.accuracy, r.precision, r.recall
        );
        if a.labels_out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
        m.insert("result.accuracy".into(), format!("{:.6}", r.accuracy));
    }
    Ok(())
}

fn balls(cli: &Cli, a: &BallArgs, m: &mut Manifest) -> Result<(), CliError> {
    let src = load_data_args(&a.data)?;
    record_source(m, "data", &a.data.data, &src);
    let gen = gen_config(&a.balls, cli.global.seed)?;
    let ds = if a.no_normalize {
        src.dataset.clone()
    } else {
        gbtsvm::dataset_io::normalize_min_max(&src.dataset)
    };
    let fam = generate_balls(&ds, &gen)?;
    let scores = if a.scores {
        Some(score_family(&fam, a.epsilon)?)
    } else {
        None
    };

    let csv_path = cli.global.out.join("balls.csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    fam.write_csv(&mut w, scores.as_deref())?;
    w.flush()?;
    fs::write(cli.global.out.join("balls.json"), fam.metadata_json())?;

    let (pos, neg) = fam.class_counts();
    println!(
        "n={} balls={} positive={} negative={}",
        ds.n_samples(),
        fam.len(),
        pos,
        neg
    );
    record_gen(m, &gen);
    m.insert("normalize".into(), (!a.no_normalize).to_string());
    m.insert("scores".into(), a.scores.to_string());
    m.insert("result.balls".into(), fam.len().to_string());
    Ok(())
}

fn exp_label(e: i32) -> String {
    format!("2^{e}")
}

fn benchmark(cli: &Cli, a: &BenchmarkArgs, m: &mut Manifest) -> Result<(), CliError> {
    let exps = parse_exponents(&a.grid)?;
    if a.noise.iter().any(|r| !(0.0..0.5).contains(r)) {
        return Err(CliError::Usage("noise rates must lie in [0, 0.5)".into()));
    }
    let gen = gen_config(&a.balls, cli.global.seed)?;
    let base = solver_config(&a.solver);
    base.validate()?;
    let opts = CvOptions {
        normalization: a.normalize.into(),
        score_epsilon: a.epsilon,
        noise: None,
        noise_target: if a.noise_all {
            NoiseTarget::All
        } else {
            NoiseTarget::TrainOnly
        },
    };
    let noisy_rates: Vec<f64> = a.noise.iter().copied().filter(|&r| r > 0.0).collect();
    let timing_dir = cli.global.out.join("timing");

    let mut succeeded = 0usize;
    let mut last_err = None;
    for (i, spec) in a.data.iter().enumerate() {
        let key = format!("data.{i}");
        let result = benchmark_one(
            cli,
            a,
            spec,
            &exps,
            &gen,
            &base,
            &opts,
            &noisy_rates,
            &timing_dir,
        );
        match result {
            Ok((src, best)) => {
                succeeded += 1;
                record_source(m, &key, spec, &src);
                for (method, (e1, e2), acc) in best {
                    m.insert(
                        format!("result.{}.{method}", src.name),
                        format!(
                            "c1={} c2={} accuracy={acc:.6}",
                            exp_label(e1),
                            exp_label(e2)
                        ),
                    );
                }
            }
            Err(e) => {
                log::error!("{spec}: {}", e.message());
                m.insert(format!("{key}.path"), spec.clone());
                m.insert(format!("{key}.error"), e.message().to_string());
                last_err = Some(e);
            }
        }
    }
    m.insert(
        "methods".into(),
        a.methods
            .iter()
            .map(|m| m.as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    m.insert("grid".into(), a.grid.clone());
    m.insert("folds".into(), a.folds.to_string());
    m.insert("stratified".into(), a.stratified.to_string());
    m.insert(
        "normalize".into(),
        format!("{:?}", a.normalize).to_lowercase(),
    );
    m.insert(
        "noise.rates".into(),
        a.noise
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    m.insert(
        "noise.seeds".into(),
        a.noise_seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    m.insert(
        "noise.target".into(),
        if a.noise_all { "all" } else { "train" }.into(),
    );
    m.insert("epsilon".into(), a.epsilon.to_string());
    record_gen(m, &gen);
    record_train(m, &base);
    match (succeeded, last_err) {
        (0, Some(e)) => Err(e),
        _ => Ok(()),
    }
}

type Best = Vec<(Method, (i32, i32), f64)>;

#[allow(clippy::too_many_arguments)]
fn benchmark_one(
    cli: &Cli,
    a: &BenchmarkArgs,
    spec: &str,
    exps: &[i32],
    gen: &GenerationConfig,
    base: &TrainConfig,
    opts: &CvOptions,
    noisy_rates: &[f64],
    timing_dir: &Path,
) -> Result<(Source, Best), CliError> {
    let src = load_source(spec, &LoadOptions::default())?;
    let ds = &src.dataset;
    let seed = cli.global.seed;
    let folds = if a.stratified {
        make_stratified_folds(ds.labels(), a.folds, seed)?
    } else {
        make_folds(ds.n_samples(), a.folds, seed)?
    };
    let mut rows = Vec::new();
    let mut best = Vec::new();
    for &method in &a.methods {
        let g = grid_search(ds, method, exps, base, gen, &folds, opts)?;
        log::info!(
            "{} {method}: {:.4} at ({}, {})",
            src.name,
            g.best_accuracy,
            exp_label(g.best_exponents.0),
            exp_label(g.best_exponents.1)
        );
        let (e1, e2) = g.best_exponents;
        best.push((method, (e1, e2), g.best_accuracy));
        rows.push(ReportRow {
            dataset: src.name.clone(),
            method,
            noise_rate: 0.0,
            noise_seed: None,
            c1_exp: e1,
            c2_exp: e2,
            report: g.best_report().clone(),
        });
        if !noisy_rates.is_empty() {
            let cfg = base.with_penalties(g.best_params.0, g.best_params.1);
            for r in noise_sweep(
                ds,
                &[(method, cfg)],
                noisy_rates,
                &a.noise_seeds,
                gen,
                &folds,
                opts,
            )? {
                rows.push(ReportRow {
                    dataset: src.name.clone(),
                    method,
                    noise_rate: r.rate,
                    noise_seed: Some(r.seed),
                    c1_exp: e1,
                    c2_exp: e2,
                    report: r.report,
                });
            }
        }
    }
    let mut w = BufWriter::new(File::create(
        cli.global.out.join(format!("{}.csv", src.name)),
    )?);
    write_metrics_csv(&mut w, &rows)?;
    w.flush()?;
    fs::create_dir_all(timing_dir)?;
    let mut t = BufWriter::new(File::create(timing_dir.join(format!("{}.csv", src.name)))?);
    write_timing_csv(&mut t, &rows)?;
    t.flush()?;
    Ok((src, best))
}

fn stats(cli: &Cli, a: &StatsArgs, m: &mut Manifest) -> Result<(), CliError> {
    let (table, sha) = if a.acc_matrix == "bundled:reference" {
        (
            bundled::reference_accuracy(),
            sha256_hex(bundled::REFERENCE_ACC_CSV.as_bytes()),
        )
    } else {
        let bytes = fs::read(&a.acc_matrix)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", a.acc_matrix)))?;
        (parse_acc_matrix(bytes.as_slice())?, sha256_hex(&bytes))
    };
    let models = table.models.len();
    let q = match a.q_alpha {
        Some(q) if q >= 0.0 && q.is_finite() => q,
        Some(q) => {
            return Err(CliError::Usage(format!(
                "--q-alpha must be non-negative, got {q}"
            )))
        }
        None => nemenyi_q_alpha_05(models).ok_or_else(|| {
            CliError::Usage(format!(
                "no tabulated critical value for {models} models; pass --q-alpha"
            ))
        })?,
    };
    let r = friedman_test(&table.values, q)?;

    println!("datasets={} models={}", table.values.len(), models);
    println!("chi2_f={:.6}", r.chi2_f);
    println!("f_f={:.6}", r.f_f);
    println!("dof={},{}", r.dof.0, r.dof.1);
    println!("q_alpha={q}");
    println!("cd={:.6}", r.cd);
    for (name, rank) in table.models.iter().zip(&r.avg_ranks) {
        println!("rank {name}={rank:.4}");
    }
    for i in 0..models {
        for j in (i + 1)..models {
            if r.pairwise_significant[i][j] {
                println!("significant {} {}", table.models[i], table.models[j]);
            }
        }
    }
    let mut w = BufWriter::new(File::create(cli.global.out.join("cd.csv"))?);
    write_cd_data(&mut w, &table.models, &r)?;
    w.flush()?;

    m.insert("acc_matrix.path".into(), a.acc_matrix.clone());
    m.insert("acc_matrix.sha256".into(), sha);
    m.insert("q_alpha".into(), q.to_string());
    m.insert("result.f_f".into(), format!("{:.6}", r.f_f));
    m.insert("result.cd".into(), format!("{:.6}", r.cd));
    Ok(())
}
