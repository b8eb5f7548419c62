use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::Context as _;
use serde::Serialize;

use gbafs::baselines::{cfs_select, fisher_scores, random_select, relieff_weights, ReliefConfig};
use gbafs::classify::{evaluate, KnnConfig};
use gbafs::dataio::{split_train_test, SplitSpec};
use gbafs::pipeline::{embed_features, index_sweep, select_with_fit, PipelineConfig};
use gbafs::plot::{embedding_scatter, line_chart, Series};
use gbafs::report::{
    write_curve_csv, write_embedding_csv, write_feature_space_csv, ComparisonReport, DataEcho,
    SelectedFeature, SelectionReport, Timings,
};
use gbafs::Dataset;

use crate::compare::{compare, CompareConfig, ALL_METHODS};
use crate::{
    ensure_dir, write_file, BaselineArgs, BaselineMethod, Cli, Command, CompareArgs, DataArgs,
    EmbedArgs, EvaluateArgs, SelectArgs, UsageError,
};

pub(crate) fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Select(a) => select(a, &cli.out_dir),
        Command::Compare(a) => compare_cmd(a, &cli.out_dir),
        Command::Baseline(a) => baseline(a, &cli.out_dir),
        Command::Evaluate(a) => evaluate_cmd(a, &cli.out_dir),
        Command::EmbedOnly(a) => embed_only(a, &cli.out_dir),
    }
}

fn echo(args: &DataArgs, d: &Dataset, train_fraction: Option<f64>) -> DataEcho {
    DataEcho {
        input: args.input.display().to_string(),
        label_column: args.label_column(),
        normalized: !args.no_normalize,
        train_fraction,
        split_seed: args.seed,
        n_instances: d.n_instances(),
        n_features: d.n_features(),
        class_ids: d.class_ids().to_vec(),
    }
}

/// The training part of a seeded split, or the whole dataset.
fn training_part(d: Dataset, train_fraction: Option<f64>, seed: u64) -> anyhow::Result<Dataset> {
    match train_fraction {
        None => Ok(d),
        Some(train_fraction) => {
            let spec = SplitSpec { train_fraction, fold_count: 2, seed };
            Ok(split_train_test(&d, &spec)?.0)
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn coords_of(e: &ndarray::Array2<f64>) -> Vec<(f64, f64)> {
    e.rows().into_iter().map(|r| (r[0], r.get(1).copied().unwrap_or(0.0))).collect()
}

fn select(args: &SelectArgs, out: &Path) -> anyhow::Result<()> {
    let mut timings = Timings { threads: rayon::current_num_threads(), ..Default::default() };
    let start = Instant::now();
    let data = args.data.load()?;
    let train = training_part(data, args.train_fraction, args.data.seed)?;
    timings.record("load", start.elapsed().as_secs_f64());

    let cfg = args.pipeline.config(args.data.seed);
    let start = Instant::now();
    let (result, fitted) = select_with_fit(&train, &cfg)?;
    timings.record("selection", start.elapsed().as_secs_f64());

    let start = Instant::now();
    let sweep = index_sweep(&fitted, &result.curve.ks, &cfg)?;
    timings.record("index_sweep", start.elapsed().as_secs_f64());

    ensure_dir(out)?;
    let report = SelectionReport::new(echo(&args.data, &train, args.train_fraction), &result, sweep);
    write_file(&out.join("selection.json"), report.to_json()?)?;
    write_curve_csv(create(&out.join("curve.csv"))?, &report.curve, &report.sweep)?;
    let coords = result.embedding.coords();
    write_embedding_csv(create(&out.join("embedding.csv"))?, train.feature_names(), coords)?;
    if args.export_z {
        write_feature_space_csv(create(&out.join("feature_space.csv"))?, train.feature_names(), &fitted.feature_space)?;
    }
    if args.plots {
        let series = |name, f: &dyn Fn(&gbafs::pipeline::SweepPoint) -> Option<f64>| Series {
            name,
            points: report.sweep.iter().map(|p| (p.k as f64, f(p))).collect(),
        };
        let mut curves = vec![
            series("silhouette", &|p| p.silhouette),
            series("ss", &|p| p.simplified_silhouette),
            series("mss", &|p| p.mss),
        ];
        curves.push(Series {
            name: "cv mss",
            points: report.curve.ks.iter().zip(&report.curve.averaged).map(|(&k, &v)| (k as f64, v)).collect(),
        });
        write_file(&out.join("curves.svg"), line_chart("Index curves over k", &curves, Some(result.k_min as f64)))?;
        let scatter = embedding_scatter(
            "Embedded features",
            &coords_of(coords),
            &result.clustering.assignment,
            &result.clustering.medoids,
            train.feature_names(),
        );
        write_file(&out.join("embedding.svg"), scatter)?;
    }
    write_json(&out.join("timings.json"), &timings)?;

    println!("k_min = {} ({:?})", result.k_min, result.knee_source);
    println!("selected: {}", result.selected_names.join(", "));
    println!("report: {}", out.join("selection.json").display());
    Ok(())
}

fn read_report(path: &Path) -> anyhow::Result<SelectionReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    SelectionReport::from_json(&text).with_context(|| format!("in {}", path.display()))
}

fn check_report_matches(report: &SelectionReport, d: &Dataset) -> anyhow::Result<()> {
    if report.data.n_features != d.n_features() {
        return Err(UsageError(format!(
            "report was built on {} features, the input has {}",
            report.data.n_features,
            d.n_features()
        ))
        .into());
    }
    Ok(())
}

fn compare_cmd(args: &CompareArgs, out: &Path) -> anyhow::Result<()> {
    let data = args.data.load()?;
    let pipeline = args.pipeline.config(args.data.seed);
    let cfg = CompareConfig {
        pipeline: pipeline.clone(),
        repetitions: args.repetitions,
        train_fraction: args.train_fraction,
        knn: KnnConfig { n_neighbors: args.neighbors },
        relief_neighbors: args.relief_neighbors,
        seed: args.data.seed,
        methods: ALL_METHODS.to_vec(),
    };
    let k = match &args.report {
        Some(path) => {
            let report = read_report(path)?;
            check_report_matches(&report, &data)?;
            report.k_min
        }
        None => {
            // selection on the first repetition's training part
            let spec = SplitSpec {
                train_fraction: args.train_fraction,
                fold_count: pipeline.fold_count,
                seed: gbafs::rng::derive_seed(args.data.seed, &[0, 0]),
            };
            let (train, _) = split_train_test(&data, &spec)?;
            let k = gbafs::pipeline::select_features(&train, &pipeline)?.k_min;
            log::info!("inline selection gave k_min = {k}");
            k
        }
    };

    let comparison = compare(&data, k, &cfg)?;
    let methods = comparison.summaries(&cfg.methods);
    let report = ComparisonReport {
        data: echo(&args.data, &data, Some(args.train_fraction)),
        knn: cfg.knn,
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        k_min: k,
        methods,
        timing: comparison.timing(),
    };
    ensure_dir(out)?;
    write_json(&out.join("comparison.json"), &report)?;
    let mut w = csv::Writer::from_writer(create(&out.join("comparison.csv"))?);
    w.write_record(["method", "k", "accuracy", "balanced_f", "predict_seconds"])?;
    for m in &report.methods {
        w.write_record([
            m.method.clone(),
            m.k.to_string(),
            m.accuracy.to_string(),
            m.balanced_f.to_string(),
            m.predict_seconds.to_string(),
        ])?;
    }
    w.flush()?;

    println!("k = {k}, {} repetitions, KNN with {} neighbors", cfg.repetitions, cfg.knn.n_neighbors);
    println!("{:<8} {:>5} {:>9} {:>11}", "method", "k", "accuracy", "balanced_f");
    for m in &report.methods {
        println!("{:<8} {:>5} {:>9.4} {:>11.4}", m.method, m.k, m.accuracy, m.balanced_f);
    }
    if let Some(t) = &report.timing {
        println!(
            "prediction time: {:.4}s with k features, {:.4}s with all, {:.1}% saved",
            t.subset_seconds,
            t.all_features_seconds,
            100.0 * t.saved_fraction
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineReport {
    data: DataEcho,
    method: String,
    k: usize,
    selected: Vec<SelectedFeature>,
    /// Per-feature scores for ranking methods.
    scores: Option<Vec<f64>>,
}

fn baseline(args: &BaselineArgs, out: &Path) -> anyhow::Result<()> {
    let data = args.data.load()?;
    let train = training_part(data, args.train_fraction, args.data.seed)?;
    let (subset, scores) = match args.method {
        BaselineMethod::Fisher => {
            let r = fisher_scores(&train);
            (r.top(args.k)?, Some(r.scores))
        }
        BaselineMethod::Relieff => {
            let cfg = ReliefConfig { neighbors: args.relief_neighbors, sample_count: None, seed: args.data.seed };
            let r = relieff_weights(&train, &cfg)?;
            (r.top(args.k)?, Some(r.scores))
        }
        BaselineMethod::Cfs => (cfs_select(&train, args.k)?, None),
        BaselineMethod::Random => (random_select(train.n_features(), args.k, args.data.seed)?, None),
    };
    let selected: Vec<SelectedFeature> = subset
        .iter()
        .map(|&index| SelectedFeature { index, name: train.feature_names()[index].clone() })
        .collect();
    let method = format!("{:?}", args.method).to_lowercase();
    println!("{method}: {}", selected.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(", "));
    let report = BaselineReport { data: echo(&args.data, &train, args.train_fraction), method, k: args.k, selected, scores };
    ensure_dir(out)?;
    write_json(&out.join("baseline.json"), &report)
}

/// Resolves names first, then zero-based indices.
fn parse_features(spec: &str, d: &Dataset) -> anyhow::Result<Vec<usize>> {
    let mut subset = Vec::new();
    for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let idx = match d.feature_names().iter().position(|n| n == token) {
            Some(i) => i,
            None => match token.parse::<usize>() {
                Ok(i) if i < d.n_features() => i,
                _ => return Err(UsageError(format!("unknown feature '{token}'")).into()),
            },
        };
        if !subset.contains(&idx) {
            subset.push(idx);
        }
    }
    if subset.is_empty() {
        return Err(UsageError("no features given".into()).into());
    }
    Ok(subset)
}

#[derive(Serialize)]
struct EvaluationOutput {
    data: DataEcho,
    feature_names: Vec<String>,
    evaluation: gbafs::classify::EvalReport,
}

fn evaluate_cmd(args: &EvaluateArgs, out: &Path) -> anyhow::Result<()> {
    let data = args.data.load()?;
    let subset = match (&args.features, &args.report) {
        (Some(spec), _) => parse_features(spec, &data)?,
        (None, Some(path)) => {
            let report = read_report(path)?;
            check_report_matches(&report, &data)?;
            report.selected_indices()
        }
        (None, None) => return Err(UsageError("pass --features or --report".into()).into()),
    };
    let spec = SplitSpec { train_fraction: args.train_fraction, fold_count: 2, seed: args.data.seed };
    let (train, test) = split_train_test(&data, &spec)?;
    let evaluation = evaluate(&train, &test, &subset, &KnnConfig { n_neighbors: args.neighbors })?;
    println!(
        "accuracy {:.4}, balanced F {:.4}, prediction {:.4}s on {} features",
        evaluation.accuracy,
        evaluation.balanced_f,
        evaluation.predict_time,
        subset.len()
    );
    let output = EvaluationOutput {
        data: echo(&args.data, &data, Some(args.train_fraction)),
        feature_names: subset.iter().map(|&f| data.feature_names()[f].clone()).collect(),
        evaluation,
    };
    ensure_dir(out)?;
    write_json(&out.join("evaluation.json"), &output)
}

fn embed_only(args: &EmbedArgs, out: &Path) -> anyhow::Result<()> {
    let data = args.data.load()?;
    let cfg = PipelineConfig { tsne: args.tsne.config(args.data.seed), seed: args.data.seed, ..Default::default() };
    let fitted = embed_features(&data, &cfg, args.data.seed)?;
    ensure_dir(out)?;
    let coords = fitted.embedding.coords();
    write_embedding_csv(create(&out.join("embedding.csv"))?, data.feature_names(), coords)?;
    if args.export_z {
        write_feature_space_csv(create(&out.join("feature_space.csv"))?, data.feature_names(), &fitted.feature_space)?;
    }
    if args.plots {
        let assignment = vec![0; data.n_features()];
        let svg = embedding_scatter("Embedded features", &coords_of(coords), &assignment, &[], data.feature_names());
        write_file(&out.join("embedding.svg"), svg)?;
    }
    println!("embedded {} features: {}", data.n_features(), out.join("embedding.csv").display());
    Ok(())
}
