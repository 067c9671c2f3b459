//! Desk-scale experiment on the synthetic 4-condition corpus: head-only
//! triplet training on cached pool4 features, then a short fine-tune through
//! the backbone, each scored against raw-pixel and raw-pool4 descriptors.
//!
//! cargo run --release --example cross_season_experiment -- [n_places] [n_triplets] [epochs] [lr] [fine_tune_lr]

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use seasonmatch::backbone::{BackboneSpec, EmbeddingModel, INPUT_TAP};
use seasonmatch::dataset::{synth_corpus, AlignedCorpus, ConditionAppearance, Partition, PlaceLabeling, SynthConfig};
use seasonmatch::metric::{train, Miner, TrainConfig, TrainingSet};
use seasonmatch::parallel::Parallelism;
use seasonmatch::retrieval::{cross_season_matrix_with, Representation};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> seasonmatch::Result<()> {
    let n_places: usize = arg(1, 500);
    let n_triplets: usize = arg(2, 20_000);
    let epochs: usize = arg(3, 20);
    let lr: f64 = arg(4, 2.0);
    let ft_lr: f64 = arg(5, 0.2);
    let seed = 7;
    let par = Parallelism::from_env()?;
    let t0 = Instant::now();

    let corpus = synth_corpus(&SynthConfig::new(n_places, 4, seed))?;
    let seg = n_places / 10;
    let segments = [seg..2 * seg, 9 * seg / 2..11 * seg / 2, 8 * seg..9 * seg];
    let partition = Partition::new(n_places, &segments, 10)?;
    let test = partition.test_indices();
    println!(
        "corpus {}x{}, {} train / {} test frames",
        corpus.n_traverses(),
        corpus.len(),
        partition.train_indices.len(),
        test.len()
    );

    let spec = BackboneSpec::desk([3, 32, 48], [8, 16, 32, 32])?;
    let model = EmbeddingModel::new(spec, "pool4", seed)?.with_head(seed + 1);
    let score = |m: &EmbeddingModel, repr: &Representation| -> seasonmatch::Result<f64> {
        Ok(cross_season_matrix_with(&corpus, m, &test, 2, repr, &par)?.mean_fc())
    };
    println!("raw pixels      fc {:.4}", score(&model, &Representation::Tap(INPUT_TAP.into()))?);
    println!("raw pool4       fc {:.4}", score(&model, &Representation::Tap("pool4".into()))?);
    println!("untrained head  fc {:.4}", score(&model, &Representation::Embedding)?);

    let miner = Miner::for_corpus(&corpus, Some(&partition), PlaceLabeling::default(), 3)?;
    let set = TrainingSet::Triplets(miner.mine_triplets(n_triplets, seed)?);
    let cfg = TrainConfig {
        epochs,
        learning_rate: lr,
        seed,
        ..TrainConfig::default()
    };
    let (head_only, log) = train(&model, &corpus, &set, &cfg, &par)?;
    for e in log.iter().step_by(5).chain(log.last()) {
        println!("  epoch {:>3} loss {:.5}", e.epoch, e.mean_loss);
    }
    println!("head-only       fc {:.4}  ({:.1?})", score(&head_only, &Representation::Embedding)?, t0.elapsed());

    // same condition, second capture: fresh sensor noise on every frame
    for (c, t) in corpus.traverses().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100 + c as u64);
        let noise = Normal::new(0.0f32, ConditionAppearance::preset(c).noise).expect("valid sigma");
        let mut again = t.clone();
        again.season = format!("{}-again", t.season);
        for f in &mut again.frames {
            f.image.data.iter_mut().for_each(|v| *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0));
        }
        let pair = AlignedCorpus::new(vec![t.clone(), again])?;
        let r = cross_season_matrix_with(&pair, &head_only, &test, 2, &Representation::Embedding, &par)?;
        println!("  same-condition {:<7} fc {:.4}", t.season, r.mean_fc());
    }

    let ft_cfg = TrainConfig {
        epochs: 2,
        learning_rate: ft_lr,
        fine_tune: true,
        seed,
        ..TrainConfig::default()
    };
    let ft_set = TrainingSet::Triplets(miner.mine_triplets(n_triplets / 10, seed + 1)?);
    let (fine, _) = train(&head_only, &corpus, &ft_set, &ft_cfg, &par)?;
    println!("fine-tuned      fc {:.4}  ({:.1?})", score(&fine, &Representation::Embedding)?, t0.elapsed());
    Ok(())
}
