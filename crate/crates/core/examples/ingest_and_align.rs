//! Manifest ingestion, speed/darkness filtering and GPS alignment of two
//! traverses sampled at different rates.

use seasonmatch::dataset::{align, filter_frames, load_traverse, save_traverse, synth_corpus, FilterThresholds, SynthConfig};

fn main() -> seasonmatch::Result<()> {
    let dir = std::env::temp_dir().join("seasonmatch_ingest");
    let corpus = synth_corpus(&SynthConfig::new(80, 2, 9))?;
    let mut traverses = corpus.into_traverses();

    // the second traverse stops at a station for a few frames and skips every fifth frame
    let second = &mut traverses[1];
    for f in &mut second.frames[30..34] {
        f.speed = 3.0;
    }
    second.frames.retain(|f| f.index % 5 != 4);

    let shape = seasonmatch::dataset::ImageShape {
        height: 32,
        width: 48,
        channels: 3,
    };
    let mut loaded = Vec::new();
    for t in &traverses {
        let manifest = save_traverse(t, &dir)?;
        let (t, stats) = load_traverse(&manifest, &t.season, shape)?;
        let kept = filter_frames(&t, FilterThresholds::default())?;
        println!("{:<7} {} rows, {} kept after filtering", t.season, stats.rows, kept.len());
        loaded.push(kept);
    }
    let aligned = align(&loaded, 25.0)?;
    println!(
        "aligned corpus: {} traverses x {} frames, max GPS error {:.2} m",
        aligned.n_traverses(),
        aligned.len(),
        aligned.max_alignment_error_m()
    );
    Ok(())
}
