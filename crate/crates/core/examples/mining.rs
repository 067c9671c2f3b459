//! Positive/negative pair and triplet populations, and seeded sampling.

use seasonmatch::dataset::{synth_corpus, Partition, PlaceLabeling, SynthConfig};
use seasonmatch::metric::Miner;

fn main() -> seasonmatch::Result<()> {
    let corpus = synth_corpus(&SynthConfig::new(100, 2, 0))?;
    let labeling = PlaceLabeling::default();
    let all = Miner::for_corpus(&corpus, None, labeling, 3)?;
    println!("2 traverses x 100 frames, same-place separation {}", labeling.same_place_sep);
    println!("  positive pairs {}", all.positive_population());
    println!("  negative pairs {}", all.negative_population());
    println!("  triplets       {}", all.triplet_population());

    let p = Partition::new(100, &[40..60], 5)?;
    let train_only = Miner::for_corpus(&corpus, Some(&p), labeling, 3)?;
    println!("train frames only ({}): {} triplets", p.train_indices.len(), train_only.triplet_population());

    for t in train_only.mine_triplets(5, 42)? {
        println!(
            "  neutral {}:{:<3} positive {}:{:<3} negative {}:{}",
            t.neutral.traverse, t.neutral.index, t.positive.traverse, t.positive.index, t.negative.traverse, t.negative.index
        );
    }
    let pairs = train_only.mine_pairs(3, 3, 42)?;
    for s in &pairs {
        println!("  {:?} {}:{} - {}:{}", s.label, s.anchor.traverse, s.anchor.index, s.other.traverse, s.other.index);
    }
    Ok(())
}
