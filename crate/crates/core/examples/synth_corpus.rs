//! Generate the synthetic multi-condition corpus and save it as manifests
//! plus PNGs.
//!
//! cargo run --example synth_corpus -- [out_dir] [n_places]

use std::path::PathBuf;

use seasonmatch::dataset::{save_traverse, synth_corpus, SynthConfig};

fn main() -> seasonmatch::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("seasonmatch_synth"));
    let n: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(60);
    let cfg = SynthConfig::new(n, 4, 5);
    let corpus = synth_corpus(&cfg)?;
    for (t, look) in corpus.traverses().iter().zip(&cfg.conditions) {
        let mean: f64 = t.frames.iter().map(|f| f.image.mean_intensity()).sum::<f64>() / t.len() as f64;
        let manifest = save_traverse(t, &out)?;
        println!(
            "{:<7} mean intensity {mean:.3}  hue {:+.2} brightness {:+.2} whitening {:.2} -> {}",
            t.season,
            look.hue_shift,
            look.brightness,
            look.whitening,
            manifest.display()
        );
    }
    Ok(())
}
