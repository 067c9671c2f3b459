//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use seasonmatch::backbone::{BackboneSpec, EmbeddingModel};
use seasonmatch::dataset::{synth_corpus, AlignedCorpus, ConditionAppearance, Partition, PlaceLabeling, SynthConfig};
use seasonmatch::metric::{
    contrastive, contrastive_loss, train, wohlhart_lepetit, wohlhart_lepetit_loss, Miner, PairLabel, TrainConfig,
    TrainingSet,
};
use seasonmatch::parallel::Parallelism;
use seasonmatch::retrieval::{
    cross_season_matrix_with, default_thresholds, fraction_correct, precision_recall, DescriptorIndex, MatchResult,
    Representation,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.1?}, limit {limit:?}"))
}

fn loss_correctness() -> Outcome {
    let start = Instant::now();
    let cases = [((1.0, 1.0, 1.0), 0.5), ((0.5, 2.0, 1.0), 0.0), ((0.0, 0.0, 1.0), 1.0)];
    for ((d_p, d_n, m), want) in cases {
        let got = wohlhart_lepetit_loss(d_p, d_n, m).map_err(|e| e.to_string())?;
        ensure(got == want, format!("({d_p}, {d_n}, {m}) gave {got}, want {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut zero_branch = 0;
    for _ in 0..10_000 {
        let d_p = rng.random_range(0.0..3.0);
        let d_n = rng.random_range(0.0..4.0);
        let m = rng.random_range(0.01..2.0);
        let l = wohlhart_lepetit_loss(d_p, d_n, m).map_err(|e| e.to_string())?;
        ensure((0.0..=1.0).contains(&l), format!("loss {l} out of range at ({d_p}, {d_n}, {m})"))?;
        let in_zero_branch = d_n >= m + d_p;
        ensure(in_zero_branch == (l == 0.0), format!("zero-branch mismatch at ({d_p}, {d_n}, {m})"))?;
        zero_branch += usize::from(in_zero_branch);
    }
    // boundary inputs hit exactly
    for (d_p, m) in [(0.5, 1.0), (0.0, 0.25), (2.0, 0.5)] {
        let l = wohlhart_lepetit_loss(d_p, m + d_p, m).map_err(|e| e.to_string())?;
        ensure(l == 0.0, format!("boundary ({d_p}, {}, {m}) gave {l}", m + d_p))?;
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!("3 cases exact, 10000 random in [0,1], {zero_branch} in zero branch"))
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;

    let mut n = 0;
    while n < 100 {
        let d_p: f64 = rng.random_range(0.0..2.0);
        let d_n: f64 = rng.random_range(0.0..3.0);
        let m: f64 = rng.random_range(0.1..2.0);
        if d_p < 1e-3 || d_n < 1e-3 || (d_n - (m + d_p)).abs() <= 1e-3 {
            continue;
        }
        let f = |p: f64, q: f64| wohlhart_lepetit_loss(p, q, m).unwrap();
        let g = wohlhart_lepetit(d_p, d_n, m).map_err(|e| e.to_string())?;
        let fd_p = (f(d_p + h, d_n) - f(d_p - h, d_n)) / (2.0 * h);
        let fd_n = (f(d_p, d_n + h) - f(d_p, d_n - h)) / (2.0 * h);
        for (a, b) in [(g.d_positive, fd_p), (g.d_negative, fd_n)] {
            let e = rel_err(a, b);
            worst = worst.max(e);
            ensure(e <= 1e-5, format!("triplet gradient {a} vs {b} at ({d_p}, {d_n}, {m})"))?;
        }
        n += 1;
    }

    let mut n = 0;
    while n < 100 {
        let d: f64 = rng.random_range(0.0..2.5);
        let m: f64 = rng.random_range(0.1..2.0);
        let label = if n % 2 == 0 { PairLabel::Positive } else { PairLabel::Negative };
        if d < 1e-3 || (d - m).abs() <= 1e-3 {
            continue;
        }
        let f = |x: f64| contrastive_loss(x, label, m).unwrap();
        let a = contrastive(d, label, m).map_err(|e| e.to_string())?.d_distance;
        let b = (f(d + h) - f(d - h)) / (2.0 * h);
        let e = rel_err(a, b);
        worst = worst.max(e);
        ensure(e <= 1e-5, format!("contrastive gradient {a} vs {b} at d={d}, m={m}, {label:?}"))?;
        n += 1;
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("200 points, worst relative error {worst:.2e}"))
}

/// Independent oracle: f64 argmin over all rows, lowest frame index on ties.
fn brute_nearest(rows: &[Vec<f32>], frames: &[usize], q: &[f32]) -> (usize, f64) {
    let mut best: Option<(f64, usize)> = None;
    for (r, &fi) in rows.iter().zip(frames) {
        let mut s = 0.0f64;
        for k in 0..q.len() {
            let d = q[k] as f64 - r[k] as f64;
            s += d * d;
        }
        best = match best {
            Some((bs, bf)) if bs < s || (bs == s && bf < fi) => Some((bs, bf)),
            _ => Some((s, fi)),
        };
    }
    let (s, f) = best.unwrap();
    (f, s.sqrt())
}

fn retrieval_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut queries = 0usize;
    for inst in 0..20 {
        let dim = [8, 64, 128][inst % 3];
        let n = rng.random_range(50..=1000usize);
        // coarse values on some instances so exact ties occur
        let coarse = inst % 4 == 0;
        let value = |rng: &mut ChaCha8Rng| -> f32 {
            if coarse {
                rng.random_range(0..3) as f32
            } else {
                rng.random_range(-1.0..1.0)
            }
        };
        let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..dim).map(|_| value(&mut rng)).collect()).collect();
        let mut frames: Vec<usize> = (0..n).map(|i| i * 2 + rng.random_range(0..2)).collect();
        frames.reverse();
        let index = DescriptorIndex::build(&rows, frames.clone()).map_err(|e| e.to_string())?;

        let nq = 100.min(n);
        let mut matches = Vec::with_capacity(nq);
        for k in 0..nq {
            let q: Vec<f32> = if k % 3 == 0 {
                rows[rng.random_range(0..n)].clone()
            } else {
                (0..dim).map(|_| value(&mut rng)).collect()
            };
            let qi = frames[rng.random_range(0..n)];
            let m = index.query_nearest(qi, &q).map_err(|e| e.to_string())?;
            let (f, d) = brute_nearest(&rows, &frames, &q);
            ensure(
                m.retrieved_index == f && m.distance == d,
                format!("instance {inst} query {k}: got ({}, {}), oracle ({f}, {d})", m.retrieved_index, m.distance),
            )?;
            matches.push(m);
            queries += 1;
        }

        let tol = inst % 4;
        let fc = fraction_correct(&mut matches, tol).map_err(|e| e.to_string())?;
        let good = matches.iter().filter(|m| m.query_index.abs_diff(m.retrieved_index) <= tol).count();
        ensure(fc == good as f64 / nq as f64, format!("instance {inst}: fc {fc} vs recount"))?;

        let ts = default_thresholds(&matches, 20);
        let pr = precision_recall(&matches, &ts).map_err(|e| e.to_string())?;
        for p in &pr {
            let acc: Vec<&MatchResult> = matches.iter().filter(|m| m.distance <= p.threshold).collect();
            let ok = acc.iter().filter(|m| m.retrieved_index.abs_diff(m.query_index) <= tol).count();
            let prec = if acc.is_empty() { 1.0 } else { ok as f64 / acc.len() as f64 };
            ensure(
                p.precision == prec && p.recall == ok as f64 / nq as f64,
                format!("instance {inst}: PR point at {} disagrees with recount", p.threshold),
            )?;
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("20 instances, {queries} queries match brute force; fc and PR recounts equal"))
}

fn partition_arithmetic() -> Outcome {
    let start = Instant::now();
    let p = Partition::new(28_865, &[5000..6150, 14_000..15_150, 23_000..24_150], 141).map_err(|e| e.to_string())?;
    ensure(p.n_test() == 3450, format!("test {}", p.n_test()))?;
    ensure(p.train_indices.len() == 24_569, format!("train {}", p.train_indices.len()))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!("3450 test, 24569 train, {} discarded", p.n_discarded()))
}

fn descriptor_dimension() -> Outcome {
    let start = Instant::now();
    let spec = BackboneSpec::vgg16([3, 224, 224]).map_err(|e| e.to_string())?;
    let dim = spec.tap_dim("pool4").map_err(|e| e.to_string())?;
    ensure(dim == 100_352, format!("pool4 dim {dim}"))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!("VGG-16 pool4 at 224x224x3 = {dim}"))
}

const SEED: u64 = 7;
const N_PLACES: usize = 500;

fn desk_partition() -> Partition {
    Partition::new(N_PLACES, &[50..100, 225..275, 400..450], 10).expect("valid partition")
}

/// Second capture of one traverse: same scene and condition, fresh sensor noise.
fn recapture(corpus: &AlignedCorpus, c: usize) -> AlignedCorpus {
    let t = &corpus.traverses()[c];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 100 + c as u64);
    let noise = Normal::new(0.0f32, ConditionAppearance::preset(c).noise).unwrap();
    let mut again = t.clone();
    again.season = format!("{}-again", t.season);
    for f in &mut again.frames {
        f.image.data.iter_mut().for_each(|v| *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0));
    }
    AlignedCorpus::new(vec![t.clone(), again]).unwrap()
}

fn same_condition_fc(corpus: &AlignedCorpus, model: &EmbeddingModel, test: &[usize], par: &Parallelism) -> f64 {
    let mut worst: f64 = 1.0;
    for c in 0..corpus.n_traverses() {
        // identical traverse as reference, then an independent recapture
        let t = corpus.traverses()[c].clone();
        let mut twin = t.clone();
        twin.season = format!("{}-same", t.season);
        let same = AlignedCorpus::new(vec![t, twin]).unwrap();
        for pair in [same, recapture(corpus, c)] {
            let r = cross_season_matrix_with(&pair, model, test, 2, &Representation::Embedding, par).unwrap();
            worst = worst.min(r.combinations.iter().map(|c| c.fc).fold(1.0, f64::min));
        }
    }
    worst
}

fn desk_end_to_end() -> Outcome {
    let start = Instant::now();
    let par = Parallelism::Sequential;
    let corpus = synth_corpus(&SynthConfig::new(N_PLACES, 4, SEED)).map_err(|e| e.to_string())?;
    let partition = desk_partition();
    let test = partition.test_indices();
    let spec = BackboneSpec::desk([3, 32, 48], [8, 16, 32, 32]).map_err(|e| e.to_string())?;
    let model = EmbeddingModel::new(spec, "pool4", SEED).map_err(|e| e.to_string())?.with_head(SEED + 1);
    let score = |m: &EmbeddingModel, repr: &Representation| {
        cross_season_matrix_with(&corpus, m, &test, 2, repr, &par).map(|r| r.mean_fc())
    };
    let baseline = score(&model, &Representation::Tap("pool4".into())).map_err(|e| e.to_string())?;

    let miner = Miner::for_corpus(&corpus, Some(&partition), PlaceLabeling::default(), 3).map_err(|e| e.to_string())?;
    let set = TrainingSet::Triplets(miner.mine_triplets(20_000, SEED).map_err(|e| e.to_string())?);
    let cfg = TrainConfig {
        epochs: 20,
        learning_rate: 2.0,
        seed: SEED,
        ..TrainConfig::default()
    };
    let (head_only, log) = train(&model, &corpus, &set, &cfg, &par).map_err(|e| e.to_string())?;
    ensure(
        model.backbone_checksum() == head_only.backbone_checksum(),
        "head-only training changed the backbone",
    )?;
    let trained = score(&head_only, &Representation::Embedding).map_err(|e| e.to_string())?;
    let same = same_condition_fc(&corpus, &head_only, &test, &par);

    let ft_cfg = TrainConfig {
        epochs: 2,
        learning_rate: 0.2,
        fine_tune: true,
        seed: SEED,
        ..TrainConfig::default()
    };
    let ft_set = TrainingSet::Triplets(miner.mine_triplets(2_000, SEED + 1).map_err(|e| e.to_string())?);
    let (fine, _) = train(&head_only, &corpus, &ft_set, &ft_cfg, &par).map_err(|e| e.to_string())?;
    let fine_fc = score(&fine, &Representation::Embedding).map_err(|e| e.to_string())?;

    let summary = format!(
        "raw pool4 {baseline:.4}, head-only {trained:.4} (loss {:.4} -> {:.4}), same-condition min {same:.4}, fine-tuned {fine_fc:.4}, {:.1?}",
        log[0].mean_loss,
        log.last().unwrap().mean_loss,
        start.elapsed()
    );
    ensure(trained - baseline >= 0.05, format!("(a) gain {:.4} < 0.05; {summary}", trained - baseline))?;
    ensure(same >= 0.95, format!("(b) same-condition fc {same:.4} < 0.95; {summary}"))?;
    ensure(fine_fc >= trained - 0.02, format!("(c) fine-tuned regressed; {summary}"))?;
    within(Duration::from_secs(15 * 60), start)?;
    Ok(summary)
}

fn mining_populations() -> Outcome {
    let start = Instant::now();
    let corpus = synth_corpus(&SynthConfig::new(100, 2, 0)).map_err(|e| e.to_string())?;
    let s = 3usize;
    let excl = 3usize;
    let labeling = PlaceLabeling::new(s, 2 * s - 1).map_err(|e| e.to_string())?;
    let miner = Miner::for_corpus(&corpus, None, labeling, excl).map_err(|e| e.to_string())?;

    let frames: Vec<(usize, usize)> = (0..2).flat_map(|t| (0..100).map(move |i| (t, i))).collect();
    let far = s.max(excl);
    let (mut pos, mut neg) = (0u64, 0u64);
    for (a, &(t, i)) in frames.iter().enumerate() {
        for &(u, j) in &frames[a + 1..] {
            if t != u && i.abs_diff(j) <= s {
                pos += 1;
            }
            if i.abs_diff(j) > far {
                neg += 1;
            }
        }
    }
    let mut trip = 0u64;
    for &(t, i) in &frames {
        for &(u, j) in &frames {
            if u == t || i.abs_diff(j) > s {
                continue;
            }
            trip += frames.iter().filter(|&&(_, k)| i.abs_diff(k) > far).count() as u64;
        }
    }
    ensure(miner.positive_population() == pos, format!("positives {} vs {pos}", miner.positive_population()))?;
    ensure(miner.negative_population() == neg, format!("negatives {} vs {neg}", miner.negative_population()))?;
    ensure(miner.triplet_population() == trip, format!("triplets {} vs {trip}", miner.triplet_population()))?;
    within(Duration::from_secs(10), start)?;
    Ok(format!("positives {pos}, negatives {neg}, triplets {trip} match enumeration"))
}

fn write_cli_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("run.cfg");
    let text = format!(
        "run.out_dir = {}\nseed = {SEED}\nsynth.n_places = {N_PLACES}\nsynth.n_conditions = 4\n\
         partition.test_segments = 50:100,225:275,400:450\npartition.buffer = 10\n\
         mine.n_triplets = 20000\ntrain.epochs = 20\ntrain.lr = 2.0\n",
        dir.join("out").display()
    );
    fs::write(&cfg, text).unwrap();
    cfg
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_seasonmatch");
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        fs::create_dir_all(&dir).unwrap();
        let cfg = write_cli_config(&dir);
        for stage in ["synth", "preprocess", "partition", "mine", "train", "embed", "evaluate", "report"] {
            let out = Command::new(bin)
                .args([stage, "--config", cfg.to_str().unwrap()])
                .env_remove("SEASONMATCH_THREADS")
                .env("RUST_LOG", "warn")
                .output()
                .map_err(|e| e.to_string())?;
            ensure(
                out.status.success(),
                format!("run {run} stage {stage}: {}", String::from_utf8_lossy(&out.stderr)),
            )?;
        }
        reports.push(csv_files(&dir.join("out/report")));
    }
    ensure(reports[0].len() == 1 + 2 * 12, format!("{} report CSVs", reports[0].len()))?;
    for ((na, a), (nb, b)) in reports[0].iter().zip(&reports[1]) {
        ensure(na == nb && a == b, format!("{na} differs between runs"))?;
    }
    within(Duration::from_secs(20 * 60), start)?;
    Ok(format!("{} report CSVs byte-identical across two runs, {:.1?}", reports[0].len(), start.elapsed()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 loss correctness", loss_correctness),
        ("2 gradient checks", gradient_checks),
        ("3 retrieval exactness", retrieval_exactness),
        ("4 partition arithmetic", partition_arithmetic),
        ("5 descriptor dimension", descriptor_dimension),
        ("6 desk-scale end-to-end", desk_end_to_end),
        ("7 mining populations", mining_populations),
        ("8 CLI determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
