//! Pipeline stages and their on-disk artifacts under `run.out_dir`:
//!
//! | stage      | writes                                   |
//! |------------|------------------------------------------|
//! | synth      | `corpus/`                                |
//! | preprocess | `aligned/`                               |
//! | partition  | `partition.txt`                          |
//! | mine       | `samples.csv`                            |
//! | train      | `model.smw`, `train_log.csv`             |
//! | embed      | `descriptors/<season>.smd`               |
//! | evaluate   | `eval/` (fc matrix, match and PR CSVs)   |
//! | report     | `report/` (CSVs, table, PNG charts)      |
//!
//! Each stage also writes `<stage>.manifest` with SHA-256 sums of its files.
//! Directories are assembled under a temporary name and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use super::config::{CorpusSource, RunConfig};
use crate::artifact::{write_atomic, write_manifest};
use crate::backbone::{load_weights, save_weights, DescriptorMatrix, EmbeddingModel};
use crate::dataset::{align, filter_frames, load_traverse, save_traverse, synth_corpus, AlignedCorpus, Partition};
use crate::error::{Error, Result};
use crate::metric::{history_csv, train, FrameRef, LossKind, Miner, PairLabel, PairSample, TrainingSet, TripletSample};
use crate::parallel::Parallelism;
use crate::report::{emit_csvs, emit_report, load_report, FC_MATRIX};
use crate::retrieval::{describe_corpus, evaluate_descriptor_sets, Representation};

pub const CORPUS_DIR: &str = "corpus";
pub const ALIGNED_DIR: &str = "aligned";
pub const SEASONS_FILE: &str = "seasons.txt";
pub const PARTITION_FILE: &str = "partition.txt";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const MODEL_FILE: &str = "model.smw";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const DESCRIPTOR_DIR: &str = "descriptors";
pub const EVAL_DIR: &str = "eval";
pub const REPORT_DIR: &str = "report";

const TRIPLET_HEADER: [&str; 6] = [
    "neutral_traverse",
    "neutral_index",
    "positive_traverse",
    "positive_index",
    "negative_traverse",
    "negative_index",
];
const PAIR_HEADER: [&str; 5] = ["anchor_traverse", "anchor_index", "other_traverse", "other_index", "label"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Preprocess,
    Partition,
    Mine,
    Train,
    Embed,
    Evaluate,
    Report,
}

impl Stage {
    pub const CHAIN: [Stage; 8] = [
        Stage::Synth,
        Stage::Preprocess,
        Stage::Partition,
        Stage::Mine,
        Stage::Train,
        Stage::Embed,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Preprocess => "preprocess",
            Stage::Partition => "partition",
            Stage::Mine => "mine",
            Stage::Train => "train",
            Stage::Embed => "embed",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

/// Run one stage; returns the files it produced (manifest excluded).
pub fn run_stage(stage: Stage, cfg: &RunConfig, par: &Parallelism) -> Result<Vec<PathBuf>> {
    cfg.check_paths()?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let files = match stage {
        Stage::Synth => synth_stage(cfg)?,
        Stage::Preprocess => preprocess_stage(cfg)?,
        Stage::Partition => partition_stage(cfg)?,
        Stage::Mine => mine_stage(cfg)?,
        Stage::Train => train_stage(cfg, par)?,
        Stage::Embed => embed_stage(cfg, par)?,
        Stage::Evaluate => evaluate_stage(cfg, par)?,
        Stage::Report => report_stage(cfg)?,
    };
    write_manifest(out, &out.join(format!("{}.manifest", stage.name())), &files)?;
    info!("{}: wrote {} files", stage.name(), files.len());
    Ok(files)
}

fn require(path: PathBuf, stage: Stage) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            path,
            stage: stage.name(),
        })
    }
}

fn tmp_dir(final_dir: &Path) -> Result<PathBuf> {
    let name = final_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = final_dir.with_file_name(format!(".{name}.tmp"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    Ok(tmp)
}

/// Swap a fully written temp dir into place; returns its files, sorted.
fn publish_dir(tmp: &Path, final_dir: &Path) -> Result<Vec<PathBuf>> {
    if final_dir.exists() {
        fs::remove_dir_all(final_dir).map_err(|e| Error::io(final_dir, e))?;
    }
    fs::rename(tmp, final_dir).map_err(|e| Error::io(final_dir, e))?;
    let mut files = Vec::new();
    let mut stack = vec![final_dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    Ok(files)
}

fn write_corpus_dir(traverses: &[crate::dataset::Traverse], final_dir: &Path) -> Result<Vec<PathBuf>> {
    let tmp = tmp_dir(final_dir)?;
    let mut seasons = String::new();
    for t in traverses {
        save_traverse(t, &tmp)?;
        seasons.push_str(&t.season);
        seasons.push('\n');
    }
    fs::write(tmp.join(SEASONS_FILE), seasons).map_err(|e| Error::io(&tmp, e))?;
    publish_dir(&tmp, final_dir)
}

fn read_seasons(dir: &Path, producer: Stage) -> Result<Vec<String>> {
    let path = require(dir.join(SEASONS_FILE), producer)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_owned).collect())
}

fn load_corpus_dir(cfg: &RunConfig, dir: &Path, producer: Stage) -> Result<Vec<crate::dataset::Traverse>> {
    read_seasons(dir, producer)?
        .iter()
        .map(|s| {
            let path = require(dir.join(format!("{s}.csv")), producer)?;
            Ok(load_traverse(&path, s, cfg.image)?.0)
        })
        .collect()
}

fn load_aligned(cfg: &RunConfig) -> Result<AlignedCorpus> {
    AlignedCorpus::new(load_corpus_dir(cfg, &cfg.out_dir.join(ALIGNED_DIR), Stage::Preprocess)?)
}

fn load_partition(cfg: &RunConfig, total: usize) -> Result<Partition> {
    let path = require(cfg.out_dir.join(PARTITION_FILE), Stage::Partition)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Partition::from_text(&text, total)
}

/// Fresh model from the config seed: backbone from `seed`, head from `seed + 1`.
pub fn fresh_model(cfg: &RunConfig) -> Result<EmbeddingModel> {
    Ok(EmbeddingModel::new(cfg.backbone_spec()?, &cfg.tap, cfg.seed)?.with_head(cfg.seed.wrapping_add(1)))
}

fn synth_stage(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let CorpusSource::Synth(s) = &cfg.corpus else {
        return Err(Error::config("synth stage needs corpus.source = synth"));
    };
    let corpus = synth_corpus(s)?;
    write_corpus_dir(corpus.traverses(), &cfg.out_dir.join(CORPUS_DIR))
}

fn preprocess_stage(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let raw = match &cfg.corpus {
        CorpusSource::Synth(_) => load_corpus_dir(cfg, &cfg.out_dir.join(CORPUS_DIR), Stage::Synth)?,
        CorpusSource::Manifests(m) => m
            .iter()
            .map(|(season, path)| {
                let (t, stats) = load_traverse(path, season, cfg.image)?;
                info!("{season}: {} rows, {} dropped for bad GPS", stats.rows, stats.dropped_gps);
                Ok(t)
            })
            .collect::<Result<_>>()?,
    };
    let filtered = raw
        .iter()
        .map(|t| filter_frames(t, cfg.filter))
        .collect::<Result<Vec<_>>>()?;
    let corpus = align(&filtered, cfg.align_tol_m)?;
    info!(
        "aligned {} traverses x {} frames, max GPS error {:.2} m",
        corpus.n_traverses(),
        corpus.len(),
        corpus.max_alignment_error_m()
    );
    write_corpus_dir(corpus.traverses(), &cfg.out_dir.join(ALIGNED_DIR))
}

fn partition_stage(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.test_segments.is_empty() {
        return Err(Error::config("partition.test_segments is required (e.g. 100:200,300:400)"));
    }
    let seasons = read_seasons(&cfg.out_dir.join(ALIGNED_DIR), Stage::Preprocess)?;
    let first = require(cfg.out_dir.join(ALIGNED_DIR).join(format!("{}.csv", seasons[0])), Stage::Preprocess)?;
    let total = csv::Reader::from_path(&first)?.records().count();
    let p = Partition::new(total, &cfg.test_segments, cfg.buffer)?;
    info!("partition: {} train, {} test, {} discarded", p.train_indices.len(), p.n_test(), p.n_discarded());
    let path = cfg.out_dir.join(PARTITION_FILE);
    write_atomic(&path, p.to_text().as_bytes())?;
    Ok(vec![path])
}

fn mine_stage(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let corpus = load_aligned(cfg)?;
    let p = load_partition(cfg, corpus.len())?;
    let miner = Miner::for_corpus(&corpus, Some(&p), cfg.labeling, cfg.train.negative_exclusion)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    match cfg.loss {
        LossKind::Triplet => {
            w.write_record(TRIPLET_HEADER)?;
            for t in miner.mine_triplets(cfg.n_triplets, cfg.seed)? {
                w.write_record(
                    [t.neutral, t.positive, t.negative]
                        .iter()
                        .flat_map(|f| [f.traverse.to_string(), f.index.to_string()]),
                )?;
            }
        }
        LossKind::Contrastive => {
            w.write_record(PAIR_HEADER)?;
            let n_pos = cfg.n_pairs / 2;
            for s in miner.mine_pairs(n_pos, cfg.n_pairs - n_pos, cfg.seed)? {
                let label = match s.label {
                    PairLabel::Positive => "positive",
                    PairLabel::Negative => "negative",
                };
                w.write_record([
                    s.anchor.traverse.to_string(),
                    s.anchor.index.to_string(),
                    s.other.traverse.to_string(),
                    s.other.index.to_string(),
                    label.to_string(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::data(format!("csv buffer: {e}")))?;
    let path = cfg.out_dir.join(SAMPLES_FILE);
    write_atomic(&path, &bytes)?;
    Ok(vec![path])
}

fn frame(rec: &csv::StringRecord, i: usize) -> Result<FrameRef> {
    let num = |k: usize| -> Result<usize> {
        rec.get(k)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::data(format!("{SAMPLES_FILE}: bad field {k} in {rec:?}")))
    };
    Ok(FrameRef::new(num(i)?, num(i + 1)?))
}

/// Read `samples.csv`; the header decides pairs vs triplets.
pub fn load_samples(path: &Path) -> Result<TrainingSet> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header == TRIPLET_HEADER {
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            out.push(TripletSample {
                neutral: frame(&rec, 0)?,
                positive: frame(&rec, 2)?,
                negative: frame(&rec, 4)?,
            });
        }
        Ok(TrainingSet::Triplets(out))
    } else if header == PAIR_HEADER {
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let label = match rec.get(4) {
                Some("positive") => PairLabel::Positive,
                Some("negative") => PairLabel::Negative,
                other => return Err(Error::data(format!("{SAMPLES_FILE}: bad label {other:?}"))),
            };
            out.push(PairSample {
                anchor: frame(&rec, 0)?,
                other: frame(&rec, 2)?,
                label,
            });
        }
        Ok(TrainingSet::Pairs(out))
    } else {
        Err(Error::data(format!("{}: unrecognised header {header:?}", path.display())))
    }
}

fn train_stage(cfg: &RunConfig, par: &Parallelism) -> Result<Vec<PathBuf>> {
    let corpus = load_aligned(cfg)?;
    let set = load_samples(&require(cfg.out_dir.join(SAMPLES_FILE), Stage::Mine)?)?;
    let matches_loss = matches!(
        (&set, cfg.loss),
        (TrainingSet::Triplets(_), LossKind::Triplet) | (TrainingSet::Pairs(_), LossKind::Contrastive)
    );
    if !matches_loss {
        return Err(Error::config(format!(
            "{SAMPLES_FILE} does not match train.loss = {:?}; rerun `mine`",
            cfg.loss
        )));
    }
    let (model, history) = train(&fresh_model(cfg)?, &corpus, &set, &cfg.train, par)?;
    let model_path = cfg.out_dir.join(MODEL_FILE);
    let tmp = cfg.out_dir.join(format!(".{MODEL_FILE}.tmp"));
    save_weights(&model, &tmp)?;
    fs::rename(&tmp, &model_path).map_err(|e| Error::io(&model_path, e))?;
    let log_path = cfg.out_dir.join(TRAIN_LOG);
    write_atomic(&log_path, history_csv(&history).as_bytes())?;
    Ok(vec![model_path, log_path])
}

fn load_model(cfg: &RunConfig) -> Result<EmbeddingModel> {
    let path = cfg.out_dir.join(MODEL_FILE);
    match (&cfg.representation, path.exists()) {
        // raw tap descriptors do not need a trained head
        (Representation::Tap(_), false) => fresh_model(cfg),
        _ => load_weights(&fresh_model(cfg)?, &require(path, Stage::Train)?),
    }
}

fn embed_stage(cfg: &RunConfig, par: &Parallelism) -> Result<Vec<PathBuf>> {
    let corpus = load_aligned(cfg)?;
    let model = load_model(cfg)?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let sets = describe_corpus(&corpus, &model, &all, &cfg.representation, par)?;
    let final_dir = cfg.out_dir.join(DESCRIPTOR_DIR);
    let tmp = tmp_dir(&final_dir)?;
    for (season, rows) in corpus.seasons().iter().zip(&sets) {
        DescriptorMatrix::from_rows(rows)?.save(&tmp.join(format!("{season}.smd")))?;
    }
    publish_dir(&tmp, &final_dir)
}

fn evaluate_stage(cfg: &RunConfig, par: &Parallelism) -> Result<Vec<PathBuf>> {
    let seasons = read_seasons(&cfg.out_dir.join(ALIGNED_DIR), Stage::Preprocess)?;
    let mut matrices = Vec::with_capacity(seasons.len());
    for s in &seasons {
        let path = require(cfg.out_dir.join(DESCRIPTOR_DIR).join(format!("{s}.smd")), Stage::Embed)?;
        matrices.push(DescriptorMatrix::load(&path)?);
    }
    let total = matrices[0].count;
    if matrices.iter().any(|m| m.count != total) {
        return Err(Error::data("descriptor files differ in row count"));
    }
    let test = load_partition(cfg, total)?.test_indices();
    let sets: Vec<Vec<Vec<f32>>> = matrices
        .iter()
        .map(|m| test.iter().map(|&i| m.row(i).to_vec()).collect())
        .collect();
    let report = evaluate_descriptor_sets(&seasons, &sets, &test, cfg.tolerance, par)?;
    info!("mean cross-season fc {:.4}", report.mean_fc());
    let final_dir = cfg.out_dir.join(EVAL_DIR);
    let tmp = tmp_dir(&final_dir)?;
    emit_csvs(&report, &tmp)?;
    publish_dir(&tmp, &final_dir)
}

fn report_stage(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let eval_dir = cfg.out_dir.join(EVAL_DIR);
    require(eval_dir.join(FC_MATRIX), Stage::Evaluate)?;
    let report = load_report(&eval_dir)?;
    let final_dir = cfg.out_dir.join(REPORT_DIR);
    let tmp = tmp_dir(&final_dir)?;
    emit_report(&report, &tmp)?;
    publish_dir(&tmp, &final_dir)
}
