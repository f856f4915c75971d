use std::path::{Path, PathBuf};

use fuseid_core::eval::{compare_conditions, EvalReport};
use fuseid_core::pipeline::{
    evaluate_svm, extract_feature_set, run_baseline, run_experiment, train_svm,
};
use fuseid_core::store::{
    generate_synthetic, pair_samples, read_embeddings, write_embeddings, DatasetManifest,
    EmbeddingRecord, Split,
};
use fuseid_core::svm::{load_svm, save_svm};
use fuseid_core::two_branch::{
    build_model, load_model, read_features, save_model, train, write_features,
};
use fuseid_core::{Error, Result};
use serde::Serialize;

use crate::config::{self, ExperimentConfig};
use crate::runlog::RunLog;
use crate::{Cli, Command};
use clap::Parser;

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub fn run(args: Vec<String>) -> Result<(), CliError> {
    let (rest, mut overrides) = config::split_overrides(args)?;
    let cli = Cli::try_parse_from(rest).map_err(CliError::Usage)?;
    match &cli.command {
        Command::Synth {
            identities: Some(n),
            ..
        } => overrides.push(("synth.num_identities".into(), n.to_string())),
        Command::Train {
            epochs: Some(n), ..
        } => overrides.push(("train.epochs".into(), n.to_string())),
        _ => {}
    }
    let cfg = config::resolve(cli.config.as_deref(), &overrides, cli.seed)?;
    match cli.command {
        Command::Synth { out, .. } => cmd_synth(&cfg, out),
        Command::Train {
            data, out, history, ..
        } => cmd_train(&cfg, data, out, history),
        Command::Extract {
            data,
            model,
            out,
            split,
            mask_face,
        } => cmd_extract(&cfg, data, model, &out, split, mask_face),
        Command::SvmTrain { features, out } => cmd_svm(&cfg, &features, out),
        Command::Eval {
            svm,
            features,
            report,
            confusion,
        } => cmd_eval(&cfg, svm, &features, &report, confusion),
        Command::Baseline {
            data,
            report,
            confusion,
        } => cmd_baseline(&cfg, data, &report, confusion),
        Command::Compare { reports, out } => cmd_compare(&reports, out),
        Command::Run { data, out_dir } => cmd_run(&cfg, data, out_dir),
    }
    .map_err(CliError::Core)
}

fn pick(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.clone()).ok_or_else(|| {
        Error::InvalidConfig(format!("no {what} path: pass --{what} or set paths.{what}"))
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Creates the parent directory of an output path.
fn prepare(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    prepare(path)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_data(log: &mut RunLog, path: &Path) -> Result<(DatasetManifest, Vec<EmbeddingRecord>)> {
    log.input(path)?;
    let (manifest, records) = read_embeddings(path)?;
    manifest.check_trainable(&records)?;
    Ok((manifest, records))
}

fn write_report(
    report: &EvalReport,
    labels: &[String],
    path: &Path,
    csv: Option<PathBuf>,
) -> Result<()> {
    write_text(path, &report.to_json())?;
    let csv = csv.unwrap_or_else(|| with_suffix(path, ".confusion.csv"));
    write_text(&csv, &report.confusion.to_csv(labels))
}

fn cmd_synth(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let out = pick(out, &cfg.paths.data, "data")?;
    let mut log = RunLog::new("synth");
    let records = log.time("generate", || generate_synthetic(&cfg.synth))?;
    let manifest = DatasetManifest::from_records(&records, cfg.synth.voice_dim, cfg.synth.face_dim);
    manifest.check_trainable(&records)?;
    prepare(&out)?;
    write_embeddings(&records, &out)?;
    log.note(format!(
        "synth: {} speakers, voice_dim {}, face_dim {}, train {}+{} / test {}+{} voice+face records -> {}",
        manifest.num_speakers,
        manifest.voice_dim,
        manifest.face_dim,
        manifest.counts.train.voice,
        manifest.counts.train.face,
        manifest.counts.test.voice,
        manifest.counts.test.face,
        out.display()
    ));
    log.finish(&out, cfg)
}

#[derive(Serialize)]
struct History<'a> {
    learning_rate: f64,
    batch_size: usize,
    effective_batch_size: usize,
    epochs: usize,
    loss: &'a [f64],
}

fn cmd_train(
    cfg: &ExperimentConfig,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    history: Option<PathBuf>,
) -> Result<()> {
    let data = pick(data, &cfg.paths.data, "data")?;
    let out = pick(out, &cfg.paths.model, "model")?;
    let mut log = RunLog::new("train");
    let (manifest, records) = load_data(&mut log, &data)?;
    let pairing = pair_samples(&records, Split::Train)?;
    let spec = cfg
        .arch
        .resolve(manifest.voice_dim, manifest.face_dim, manifest.num_speakers);
    let effective = cfg.train.effective_batch_size(pairing.pairs.len());
    log.note(format!(
        "train: lr={} batch_size={} (effective {effective}) epochs={} dropout={:?} seed={} pairs={} skipped={}",
        cfg.train.learning_rate,
        cfg.train.batch_size,
        cfg.train.epochs,
        spec.dropout_rates,
        cfg.train.seed,
        pairing.pairs.len(),
        pairing.skipped
    ));
    let model = build_model::<f32>(&spec, cfg.train.seed)?;
    let (model, loss) = log.time("train", || train(model, &pairing.pairs, &cfg.train))?;
    for (epoch, l) in loss.iter().enumerate() {
        println!("epoch {:>4}  loss {l:.6}", epoch + 1);
    }
    prepare(&out)?;
    save_model(&model, &out)?;
    let history_path = history.unwrap_or_else(|| with_suffix(&out, ".history.json"));
    let h = History {
        learning_rate: cfg.train.learning_rate,
        batch_size: cfg.train.batch_size,
        effective_batch_size: effective,
        epochs: cfg.train.epochs,
        loss: &loss,
    };
    write_text(
        &history_path,
        &serde_json::to_string_pretty(&h).expect("history serializes"),
    )?;
    log.note(format!("model -> {}", out.display()));
    log.finish(&out, cfg)
}

fn cmd_extract(
    cfg: &ExperimentConfig,
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    out: &Path,
    split: Split,
    mask_face: bool,
) -> Result<()> {
    let data = pick(data, &cfg.paths.data, "data")?;
    let model_path = pick(model, &cfg.paths.model, "model")?;
    let mut log = RunLog::new("extract");
    let (manifest, records) = load_data(&mut log, &data)?;
    log.input(&model_path)?;
    let model = load_model(&model_path)?;
    if model.spec.voice_in_dim != manifest.voice_dim {
        return Err(Error::DimensionMismatch {
            context: "model voice input vs data".into(),
            expected: model.spec.voice_in_dim,
            actual: manifest.voice_dim,
        });
    }
    if model.spec.face_in_dim != manifest.face_dim {
        return Err(Error::DimensionMismatch {
            context: "model face input vs data".into(),
            expected: model.spec.face_in_dim,
            actual: manifest.face_dim,
        });
    }
    let set = log.time("extract", || {
        extract_feature_set(&model, &records, split, mask_face)
    })?;
    prepare(out)?;
    write_features(&set, out)?;
    log.note(format!(
        "extract: {} {split} features, dim {}, masked={} -> {}",
        set.features.len(),
        set.dim,
        set.masked,
        out.display()
    ));
    log.finish(out, cfg)
}

fn cmd_svm(cfg: &ExperimentConfig, features: &Path, out: Option<PathBuf>) -> Result<()> {
    let out = pick(out, &cfg.paths.svm, "svm")?;
    let mut log = RunLog::new("svm-train");
    log.input(features)?;
    let set = read_features(features)?;
    if set.split != Split::Train {
        return Err(Error::InvalidConfig(format!(
            "svm-train expects train-split features, {} holds {}",
            features.display(),
            set.split
        )));
    }
    let svm = log.time("svm", || train_svm(&set, &cfg.svm))?;
    prepare(&out)?;
    save_svm(&svm, &out)?;
    let unconverged = svm.machines.iter().filter(|m| !m.converged).count();
    log.note(format!(
        "svm-train: {} classes, {} machines ({unconverged} hit the iteration cap), kernel {:?} degree {} gamma {} -> {}",
        svm.num_classes,
        svm.machines.len(),
        svm.kernel.kind,
        svm.kernel.degree,
        svm.kernel.gamma,
        out.display()
    ));
    log.finish(&out, cfg)
}

fn cmd_eval(
    cfg: &ExperimentConfig,
    svm: Option<PathBuf>,
    features: &Path,
    report: &Path,
    confusion: Option<PathBuf>,
) -> Result<()> {
    let svm_path = pick(svm, &cfg.paths.svm, "svm")?;
    let mut log = RunLog::new("eval");
    log.input(&svm_path)?;
    log.input(features)?;
    let svm = load_svm(&svm_path)?;
    let set = read_features(features)?;
    let r = log.time("predict", || evaluate_svm(&svm, &set))?;
    write_report(&r, &set.labels, report, confusion)?;
    log.note(format!(
        "eval: {} top1 {:.4} over {} samples -> {}",
        r.condition,
        r.top1,
        r.n_samples,
        report.display()
    ));
    log.finish(report, cfg)
}

fn cmd_baseline(
    cfg: &ExperimentConfig,
    data: Option<PathBuf>,
    report: &Path,
    confusion: Option<PathBuf>,
) -> Result<()> {
    let data = pick(data, &cfg.paths.data, "data")?;
    let mut log = RunLog::new("baseline");
    let (manifest, records) = load_data(&mut log, &data)?;
    let r = log.time("baseline", || run_baseline(&records, &cfg.svm))?;
    write_report(&r, &manifest.labels(), report, confusion)?;
    log.note(format!(
        "baseline: {} top1 {:.4} over {} samples -> {}",
        r.condition,
        r.top1,
        r.n_samples,
        report.display()
    ));
    log.finish(report, cfg)
}

fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Corrupt(format!("{}: not an evaluation report: {e}", path.display())))
}

fn cmd_compare(reports: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    let reports = reports
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>>>()?;
    let cmp = compare_conditions(&reports)?;
    print!("{}", cmp.to_text());
    if let Some(out) = out {
        write_text(&out, &cmp.to_json())?;
    }
    Ok(())
}

fn cmd_run(cfg: &ExperimentConfig, data: Option<PathBuf>, out_dir: Option<PathBuf>) -> Result<()> {
    let data = pick(data, &cfg.paths.data, "data")?;
    let dir = out_dir
        .or_else(|| cfg.paths.report_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut log = RunLog::new("run");
    let (manifest, records) = load_data(&mut log, &data)?;
    log.note(format!(
        "run: lr={} batch_size={} epochs={} seed={}",
        cfg.train.learning_rate, cfg.train.batch_size, cfg.train.epochs, cfg.train.seed
    ));
    let outcome = log.time("experiment", || run_experiment(&records, &cfg.pipeline()))?;
    let labels = manifest.labels();
    for r in outcome.reports() {
        write_report(r, &labels, &dir.join(format!("{}.json", r.condition)), None)?;
    }
    let comparison = dir.join("comparison.json");
    write_text(&comparison, &outcome.comparison.to_json())?;
    write_text(
        &dir.join("loss_history.json"),
        &serde_json::to_string_pretty(&outcome.loss_history).expect("history serializes"),
    )?;
    print!("{}", outcome.comparison.to_text());
    log.finish(&comparison, cfg)
}
