use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::PathBuf;

use drivernet::data::{
    average_image, decode_image, diff_image, encode_image, load_manifest, load_samples, normalize, split_by_driver,
    split_by_image, synth_dataset, ClassLabel, DatasetIndex, FloatImage, Preprocess, Sample,
};
use drivernet::model::{build_model, initialize, load_weights, save_weights, InitializerSpec, ModelGraph};
use drivernet::train::{
    benchmark_latency, combine_probabilities, evaluate as score, train_with, ConfusionMatrix, EvalReport,
};
use drivernet::NUM_CLASSES;

use crate::config::{model_config_for, DiffPairs, RunConfig};
use crate::CliError;

fn preprocess(cfg: &RunConfig) -> Preprocess {
    Preprocess::for_input(cfg.model_config.input_dims())
}

fn fresh_model(cfg: &RunConfig) -> Result<ModelGraph, CliError> {
    let mut m = build_model(cfg.model, &cfg.model_config)?;
    initialize(&mut m, &InitializerSpec::new(cfg.model.initializer(), cfg.seed));
    Ok(m)
}

fn weights_path(cfg: &RunConfig) -> PathBuf {
    cfg.weights.clone().unwrap_or_else(|| cfg.output_dir.join("weights.ddwt"))
}

fn trained_model(cfg: &RunConfig) -> Result<ModelGraph, CliError> {
    let mut m = build_model(cfg.model, &cfg.model_config)?;
    load_weights(&mut m, weights_path(cfg))?;
    Ok(m)
}

fn required<'a>(v: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::Config(format!("`{key}` is required for this command (--{key} or --set {key}=...)")))
}

fn index(cfg: &RunConfig) -> Result<DatasetIndex, CliError> {
    if !cfg.manifest.exists() {
        return Err(CliError::Input(format!(
            "dataset manifest {} not found (set dataset_root or manifest)",
            cfg.manifest.display()
        )));
    }
    Ok(load_manifest(&cfg.manifest)?)
}

/// Training and validation rows under the configured split mode.
fn split(cfg: &RunConfig, index: &DatasetIndex) -> Result<(DatasetIndex, DatasetIndex), CliError> {
    if cfg.val_fraction == 0.0 {
        return Ok((index.clone(), DatasetIndex::from_rows(Vec::new())));
    }
    Ok(if cfg.train.allow_leaky_split {
        split_by_image(index, cfg.val_fraction, cfg.seed)?
    } else {
        let (tr, va, _) = split_by_driver(index, cfg.val_fraction, cfg.seed)?;
        (tr, va)
    })
}

/// The rows `evaluate` and `ensemble` score.
fn eval_rows(cfg: &RunConfig) -> Result<DatasetIndex, CliError> {
    let rows = match &cfg.eval_manifest {
        Some(p) => load_manifest(p)?,
        None => split(cfg, &index(cfg)?)?.1,
    };
    if rows.is_empty() {
        return Err(CliError::Input("evaluation set is empty".into()));
    }
    Ok(rows)
}

fn image_path(cfg: &RunConfig, stem: &str, channels: usize) -> PathBuf {
    cfg.output_dir.join(format!("{stem}.{}", if channels == 1 { "pgm" } else { "ppm" }))
}

pub fn eda(cfg: &RunConfig) -> Result<(), CliError> {
    let index = index(cfg)?;
    let counts = index.class_counts();
    let mut csv = String::from("class,description,count\n");
    for label in ClassLabel::all() {
        let n = counts.get(&label).copied().unwrap_or(0);
        writeln!(csv, "{},{},{n}", label.name(), label.description()).unwrap();
        println!("{:>3}  {:>6}  {}", label.name(), n, label.description());
    }
    writeln!(csv, "total,,{}", index.len()).unwrap();
    println!("total {}  drivers {}", index.len(), index.drivers().len());
    fs::write(cfg.output_dir.join("class_counts.csv"), csv)?;

    let pre = preprocess(cfg);
    let mut averages: Vec<(ClassLabel, FloatImage)> = Vec::new();
    for label in ClassLabel::all() {
        if counts.get(&label).copied().unwrap_or(0) == 0 {
            eprintln!("warning: class {label} has no images; skipping its average");
            continue;
        }
        let avg = average_image(&index, &cfg.dataset_root, label, &pre)?;
        encode_image(&avg.to_u8(), image_path(cfg, &format!("avg_{label}"), avg.channels))?;
        averages.push((label, avg));
    }
    let find = |name: &str| -> Result<&FloatImage, CliError> {
        let label: ClassLabel = name
            .parse()
            .map_err(|_| CliError::Config(format!("diff pair names unknown class {name:?}")))?;
        averages
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, a)| a)
            .ok_or_else(|| CliError::Input(format!("class {name} has no average image")))
    };
    let pairs: Vec<(String, String)> = match &cfg.diff_pairs {
        DiffPairs::All => {
            let names: Vec<String> = averages.iter().map(|(l, _)| l.name()).collect();
            let mut p = Vec::new();
            for i in 0..names.len() {
                for j in i + 1..names.len() {
                    p.push((names[i].clone(), names[j].clone()));
                }
            }
            p
        }
        DiffPairs::Listed(p) => p.clone(),
    };
    for (a, b) in &pairs {
        let d = diff_image(find(a)?, find(b)?)?;
        encode_image(&d.visual, image_path(cfg, &format!("diff_{a}_{b}"), d.raw.channels))?;
    }
    println!(
        "wrote class_counts.csv, {} average images and {} difference images to {}",
        averages.len(),
        pairs.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let index = index(cfg)?;
    let (tr, va) = split(cfg, &index)?;
    let pre = preprocess(cfg);
    let mut model = fresh_model(cfg)?;
    let train_samples = load_samples(&tr, &cfg.dataset_root, &pre)?;
    let val_samples = load_samples(&va, &cfg.dataset_root, &pre)?;

    let mut report = String::new();
    writeln!(report, "model = {}", cfg.model).unwrap();
    writeln!(report, "input = {:?}", model.input_dims()).unwrap();
    writeln!(report, "total_parameters = {}", model.count_parameters(false)).unwrap();
    writeln!(report, "trainable_parameters = {}", model.count_parameters(true)).unwrap();
    writeln!(
        report,
        "split = {}",
        if cfg.train.allow_leaky_split { "by-image (leaky)" } else { "by-driver" }
    )
    .unwrap();
    writeln!(report, "train_images = {}", tr.len()).unwrap();
    writeln!(report, "val_images = {}", va.len()).unwrap();
    print!("{report}");

    let history = train_with(&mut model, &train_samples, &val_samples, &cfg.train, &cfg.augment, |e| {
        let val = e.val_accuracy.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "epoch {:>3}/{}  loss {:.4}  train_acc {:.4}  val_acc {val}",
            e.epoch, cfg.train.epochs, e.train_loss, e.train_accuracy
        );
        ControlFlow::Continue(())
    })?;
    let last = history.last().expect("at least one epoch");
    writeln!(report, "final_train_loss = {}", last.train_loss).unwrap();
    writeln!(report, "final_train_accuracy = {}", last.train_accuracy).unwrap();
    if let Some(v) = last.val_accuracy {
        writeln!(report, "final_val_accuracy = {v}").unwrap();
    }

    save_weights(&model, cfg.output_dir.join("weights.ddwt"))?;
    history.write_csv(cfg.output_dir.join("history.csv"))?;
    fs::write(cfg.output_dir.join("train_report.txt"), &report)?;
    println!("wrote weights.ddwt, history.csv and train_report.txt to {}", cfg.output_dir.display());
    Ok(())
}

fn print_report(r: &EvalReport) {
    println!("samples {}  accuracy {:.4}  macro_f1 {:.4}", r.samples, r.overall_accuracy, r.macro_f1);
    for c in &r.per_class {
        println!("{:>3}  support {:>5}  accuracy {:.4}  f1 {:.4}", c.class, c.support, c.accuracy, c.f1);
    }
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let model = trained_model(cfg)?;
    let rows = eval_rows(cfg)?;
    let samples = load_samples(&rows, &cfg.dataset_root, &preprocess(cfg))?;
    let report = score(&model, &samples)?;
    report.write(&cfg.output_dir, "eval_report")?;
    print_report(&report);
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<(), CliError> {
    let model = trained_model(cfg)?;
    let x = preprocess(cfg).load_tensor(required(&cfg.image, "image")?)?;
    let probs = model.forward(&x)?;
    let best = probs.argmax();
    let label = ClassLabel::new(best)?;
    println!("{} {}", label.name(), probs.data()[best]);
    println!("{}", serde_json::to_string(probs.data()).map_err(|e| CliError::Internal(e.to_string()))?);
    Ok(())
}

pub fn benchmark(cfg: &RunConfig) -> Result<(), CliError> {
    let model = match &cfg.weights {
        Some(_) => trained_model(cfg)?,
        None => {
            eprintln!("note: no weights given; timing a freshly initialized {}", cfg.model);
            fresh_model(cfg)?
        }
    };
    let image = decode_image(required(&cfg.image, "image")?)?;
    let stats = benchmark_latency(&model, &image, &preprocess(cfg), cfg.warmup, cfg.iterations, cfg.budget_seconds)?;
    println!(
        "mean {:.6}s  p95 {:.6}s  max {:.6}s  over {} iterations (budget {}s: {})",
        stats.mean,
        stats.p95,
        stats.max,
        stats.iterations,
        stats.budget,
        if stats.within_budget { "pass" } else { "FAIL" }
    );
    let json = serde_json::to_string_pretty(&stats).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(cfg.output_dir.join("benchmark.json"), json + "\n")?;
    if stats.within_budget {
        Ok(())
    } else {
        Err(CliError::OverBudget {
            mean: stats.mean,
            budget: stats.budget,
        })
    }
}

pub fn ensemble(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.members.is_empty() {
        return Err(CliError::Config("ensemble needs `members = model:weights, ...`".into()));
    }
    let rows = eval_rows(cfg)?;
    let mut members: Vec<(ModelGraph, Vec<Sample>)> = Vec::new();
    for m in &cfg.members {
        let mut mc = model_config_for(&cfg.raw, m.model, m.model == cfg.model)?;
        mc.seed = cfg.seed;
        let mut graph = build_model(m.model, &mc)?;
        load_weights(&mut graph, &m.weights)?;
        let samples = load_samples(&rows, &cfg.dataset_root, &Preprocess::for_input(mc.input_dims()))?;
        members.push((graph, samples));
    }
    let mut cm = ConfusionMatrix::new(NUM_CLASSES);
    for i in 0..rows.len() {
        let outputs = members
            .iter()
            .map(|(g, s)| g.forward(&normalize(&s[i].image)))
            .collect::<drivernet::Result<Vec<_>>>()?;
        let p = combine_probabilities(&outputs, cfg.ensemble_weights.as_deref())?;
        cm.record(rows.rows()[i].label.index(), p.argmax());
    }
    let report = EvalReport::from_confusion(cm);
    report.write(&cfg.output_dir, "ensemble_report")?;
    print_report(&report);
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = synth_dataset(&cfg.synth)?;
    corpus.write(&cfg.dataset_root)?;
    println!(
        "wrote {} images from {} drivers to {}",
        corpus.index.len(),
        cfg.synth.num_drivers,
        cfg.dataset_root.display()
    );
    Ok(())
}
