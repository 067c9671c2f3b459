//! Exact nearest-neighbor retrieval, fc, PR curves, and report files.
//!
//! cargo run --example retrieval -- [out_dir]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seasonmatch::parallel::Parallelism;
use seasonmatch::report::{emit_report, fc_table};
use seasonmatch::retrieval::{evaluate_descriptor_sets, DescriptorIndex};

fn main() -> seasonmatch::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // a reference route and two noisier revisits of it
    let base: Vec<Vec<f32>> = (0..200).map(|_| (0..16).map(|_| rng.random::<f32>()).collect()).collect();
    let revisit = |rng: &mut ChaCha8Rng, sigma: f32| -> Vec<Vec<f32>> {
        base.iter()
            .map(|d| d.iter().map(|v| v + sigma * (rng.random::<f32>() - 0.5)).collect())
            .collect()
    };
    let sets = vec![base.clone(), revisit(&mut rng, 0.4), revisit(&mut rng, 1.2)];
    let seasons: Vec<String> = ["reference", "mild", "harsh"].map(String::from).to_vec();
    let frames: Vec<usize> = (0..200).collect();

    let index = DescriptorIndex::build(&sets[0], frames.clone())?;
    let m = index.query_nearest(17, &sets[2][17])?;
    println!("query 17 -> frame {} at distance {:.4}", m.retrieved_index, m.distance);

    let report = evaluate_descriptor_sets(&seasons, &sets, &frames, 2, &Parallelism::Sequential)?;
    print!("{}", fc_table(&report));

    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("seasonmatch_report"));
    let files = emit_report(&report, &out)?;
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}
