//! Layer-tagged feature extraction, the 128-d head, and weight files.

use seasonmatch::backbone::{load_weights, save_weights, BackboneSpec, EmbeddingModel, INPUT_TAP};
use seasonmatch::dataset::{synth_corpus, SynthConfig};

fn main() -> seasonmatch::Result<()> {
    let vgg = BackboneSpec::vgg16([3, 224, 224])?;
    println!("VGG-16 at 224x224: pool4 shape {:?}, dim {}", vgg.output_shape("pool4")?, vgg.tap_dim("pool4")?);

    let spec = BackboneSpec::desk([3, 32, 48], [8, 16, 32, 32])?;
    for (layer, shape) in spec.layers.iter().zip(spec.shapes()?.iter().skip(1)) {
        println!("  {:<6} {:?}", layer.name, shape);
    }
    let model = EmbeddingModel::new(spec, "pool4", 1)?.with_head(2);
    let corpus = synth_corpus(&SynthConfig::new(8, 2, 3))?;
    let img = corpus.image(0, 0);
    for tap in [INPUT_TAP, "conv1", "pool2", "pool4"] {
        let d = model.extract_features(img, tap)?;
        println!("tap {tap:<6} dim {:>5}  source {}", d.dim(), d.source);
    }
    let e = model.embed(img)?;
    println!("embedding dim {} from {}", e.dim(), e.source);

    let path = std::env::temp_dir().join("seasonmatch_example.smw");
    save_weights(&model, &path)?;
    let back = load_weights(&EmbeddingModel::new(model.spec().clone(), "pool4", 99)?.with_head(99), &path)?;
    assert_eq!(back.embed(img)?, e);
    println!("weights round trip through {} ok", path.display());
    Ok(())
}
