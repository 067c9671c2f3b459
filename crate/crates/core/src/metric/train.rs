//! Minibatch SGD on the mean batch loss.
//!
//! Head-only runs extract tap features once (the backbone is frozen);
//! fine-tuning runs backpropagate through the backbone per sample. Per-sample
//! gradients are summed in sample order, so results do not depend on the
//! thread count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{self, PairLabel};
use super::mining::{FrameRef, PairSample, TripletSample};
use crate::backbone::layers::dense_backward;
use crate::backbone::{EmbeddingModel, Gradients, Trainable};
use crate::dataset::AlignedCorpus;
use crate::error::{Error, Result};
use crate::parallel::Parallelism;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Contrastive,
    Triplet,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contrastive" => Ok(LossKind::Contrastive),
            "triplet" => Ok(LossKind::Triplet),
            other => Err(Error::config(format!("unknown loss `{other}` (contrastive|triplet)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainingSet {
    Pairs(Vec<PairSample>),
    Triplets(Vec<TripletSample>),
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        match self {
            TrainingSet::Pairs(p) => p.len(),
            TrainingSet::Triplets(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn frames(&self, k: usize) -> Vec<FrameRef> {
        match self {
            TrainingSet::Pairs(p) => vec![p[k].anchor, p[k].other],
            TrainingSet::Triplets(t) => vec![t[k].neutral, t[k].positive, t[k].negative],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Triplet margin, or the contrastive margin for pair training.
    pub margin: f64,
    pub fine_tune: bool,
    pub seed: u64,
    pub negative_exclusion: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            margin: 1.0,
            fine_tune: false,
            seed: 0,
            negative_exclusion: 3,
        }
    }
}

impl TrainConfig {
    pub fn default_learning_rate(fine_tune: bool) -> f64 {
        if fine_tune {
            1e-4
        } else {
            1e-3
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::config("margin must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning rate must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub samples_seen: usize,
}

fn distance(a: &[f32], b: &[f32]) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| *x as f64 - *y as f64).collect();
    (diff.iter().map(|d| d * d).sum::<f64>().sqrt(), diff)
}

/// Loss of one sample and `d loss / d embedding` for each of its frames.
fn sample_loss(set: &TrainingSet, k: usize, emb: &[Vec<f32>], margin: f64) -> Result<(f64, Vec<Vec<f32>>)> {
    if emb.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("embedding of sample {k}")));
    }
    match set {
        TrainingSet::Pairs(p) => {
            let (d, diff) = distance(&emb[0], &emb[1]);
            let l = loss::contrastive(d, p[k].label, margin)?;
            // positives: d(d^2)/de = 2 diff, avoids dividing by d
            let coeff = match p[k].label {
                PairLabel::Positive => 2.0,
                PairLabel::Negative if d > 0.0 => l.d_distance / d,
                PairLabel::Negative => 0.0,
            };
            let ga: Vec<f32> = diff.iter().map(|v| (coeff * v) as f32).collect();
            let gb: Vec<f32> = ga.iter().map(|v| -v).collect();
            Ok((l.value, vec![ga, gb]))
        }
        TrainingSet::Triplets(_) => {
            let (dp, diff_p) = distance(&emb[0], &emb[1]);
            let (dn, diff_n) = distance(&emb[0], &emb[2]);
            let l = loss::wohlhart_lepetit(dp, dn, margin)?;
            let cp = if dp > 0.0 { l.d_positive / dp } else { 0.0 };
            let cn = if dn > 0.0 { l.d_negative / dn } else { 0.0 };
            let gn: Vec<f32> = diff_p.iter().zip(&diff_n).map(|(a, b)| (cp * a + cn * b) as f32).collect();
            let gp: Vec<f32> = diff_p.iter().map(|a| (-cp * a) as f32).collect();
            let gm: Vec<f32> = diff_n.iter().map(|b| (-cn * b) as f32).collect();
            Ok((l.value, vec![gn, gp, gm]))
        }
    }
}

fn check_frames(set: &TrainingSet, corpus: &AlignedCorpus) -> Result<()> {
    for k in 0..set.len() {
        for f in set.frames(k) {
            if f.traverse >= corpus.n_traverses() || f.index >= corpus.len() {
                return Err(Error::data(format!("sample {k} references missing frame {f:?}")));
            }
        }
    }
    Ok(())
}

/// Tap features of every frame referenced by `set`, indexed `traverse * N + index`.
fn tap_cache(model: &EmbeddingModel, corpus: &AlignedCorpus, set: &TrainingSet, par: &Parallelism) -> Result<Vec<Option<Vec<f32>>>> {
    let n = corpus.len();
    let mut needed = vec![false; corpus.n_traverses() * n];
    for k in 0..set.len() {
        for f in set.frames(k) {
            needed[f.traverse * n + f.index] = true;
        }
    }
    let keys: Vec<usize> = (0..needed.len()).filter(|&i| needed[i]).collect();
    let feats = par.map(keys.len(), |j| {
        let key = keys[j];
        model.tap_features(corpus.image(key / n, key % n)).map(|d| d.values)
    });
    let mut cache = vec![None; needed.len()];
    for (key, f) in keys.into_iter().zip(feats) {
        cache[key] = Some(f?);
    }
    Ok(cache)
}

/// Mean loss over `set` at the model's current parameters.
pub fn mean_loss(model: &EmbeddingModel, corpus: &AlignedCorpus, set: &TrainingSet, margin: f64, par: &Parallelism) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::data("no samples"));
    }
    check_frames(set, corpus)?;
    let cache = tap_cache(model, corpus, set, par)?;
    let n = corpus.len();
    let mut total = 0.0;
    for k in 0..set.len() {
        let emb = set
            .frames(k)
            .iter()
            .map(|f| model.embed_features(cache[f.traverse * n + f.index].as_ref().unwrap()).map(|d| d.values))
            .collect::<Result<Vec<_>>>()?;
        total += sample_loss(set, k, &emb, margin)?.0;
    }
    Ok(total / set.len() as f64)
}

/// Train the head (and, with `fine_tune`, the backbone) on `set`.
pub fn train(
    model: &EmbeddingModel,
    corpus: &AlignedCorpus,
    set: &TrainingSet,
    cfg: &TrainConfig,
    par: &Parallelism,
) -> Result<(EmbeddingModel, Vec<EpochLog>)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    if model.head().is_none() {
        return Err(Error::config("embedding head is not initialized"));
    }
    check_frames(set, corpus)?;

    let mut model = model.clone();
    model.trainable = if cfg.fine_tune { Trainable::All } else { Trainable::HeadOnly };
    let cache = if cfg.fine_tune {
        None
    } else {
        Some(tap_cache(&model, corpus, set, par)?)
    };
    let n = corpus.len();
    let lr = cfg.learning_rate as f32;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut seen = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = model.zero_gradients();
            let mut batch_loss = 0.0;
            match &cache {
                Some(cache) => {
                    let head = model.head().expect("checked");
                    for &k in batch {
                        let taps: Vec<&Vec<f32>> = set
                            .frames(k)
                            .iter()
                            .map(|f| cache[f.traverse * n + f.index].as_ref().expect("cached"))
                            .collect();
                        let emb: Vec<Vec<f32>> = taps.iter().map(|t| head.apply(t)).collect();
                        let (l, ge) = sample_loss(set, k, &emb, cfg.margin)?;
                        batch_loss += l;
                        for (tap, g) in taps.iter().zip(&ge) {
                            dense_backward(tap, &head.weight, false, g, g, &mut grads.head.weight, &mut grads.head.bias, false);
                        }
                    }
                }
                None => {
                    let per_sample = par.map(batch.len(), |j| -> Result<(f64, Gradients)> {
                        let k = batch[j];
                        let mut g = model.zero_gradients();
                        let acts = set
                            .frames(k)
                            .iter()
                            .map(|f| model.forward_cached(corpus.image(f.traverse, f.index)))
                            .collect::<Result<Vec<_>>>()?;
                        let emb = acts
                            .iter()
                            .map(|a| model.embed_features(a.last().unwrap()).map(|d| d.values))
                            .collect::<Result<Vec<_>>>()?;
                        let (l, ge) = sample_loss(set, k, &emb, cfg.margin)?;
                        for (a, ge) in acts.iter().zip(ge) {
                            let gt = model.head_backward(a.last().unwrap(), &ge, &mut g);
                            model.backbone_backward(a, gt, &mut g);
                        }
                        Ok((l, g))
                    });
                    for r in per_sample {
                        let (l, g) = r?;
                        batch_loss += l;
                        add_into(&mut grads, &g);
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}, batch {b}")));
            }
            grads.scale(1.0 / batch.len() as f32);
            if !grads.is_finite() {
                return Err(Error::NonFinite(format!("gradient at epoch {epoch}, batch {b}")));
            }
            if lr != 0.0 {
                model.sgd_step(&grads, lr);
            }
            epoch_loss += batch_loss;
            seen += batch.len();
        }
        let mean_loss = epoch_loss / set.len() as f64;
        log::info!("epoch {epoch}: mean loss {mean_loss:.6}");
        history.push(EpochLog {
            epoch,
            mean_loss,
            samples_seen: seen,
        });
    }
    Ok((model, history))
}

fn add_into(acc: &mut Gradients, g: &Gradients) {
    for (a, b) in acc.layers.iter_mut().zip(&g.layers) {
        a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
        a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
    }
    acc.head.weight.iter_mut().zip(&g.head.weight).for_each(|(x, y)| *x += y);
    acc.head.bias.iter_mut().zip(&g.head.bias).for_each(|(x, y)| *x += y);
}

/// `epoch,mean_loss,samples_seen` CSV.
pub fn history_csv(history: &[EpochLog]) -> String {
    let mut out = String::from("epoch,mean_loss,samples_seen\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.epoch, h.mean_loss, h.samples_seen));
    }
    out
}
