//! The full `seasonmatch` stage chain driven in-process on a small synthetic
//! corpus. Equivalent shell:
//!
//! seasonmatch synth --config run.cfg && seasonmatch preprocess --config run.cfg && ...

use std::fs;

use seasonmatch::cli::{main_with_args, Stage};

fn main() {
    let dir = std::env::temp_dir().join("seasonmatch_cli");
    fs::create_dir_all(&dir).expect("temp dir");
    let cfg = dir.join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "run.out_dir = {}\nseed = 3\nsynth.n_places = 120\nsynth.n_conditions = 2\n\
             partition.test_segments = 20:50,80:110\npartition.buffer = 5\n\
             mine.n_triplets = 2000\ntrain.epochs = 5\ntrain.lr = 2.0\n",
            dir.join("run").display()
        ),
    )
    .expect("write config");

    for stage in Stage::CHAIN {
        let code = main_with_args(["seasonmatch", stage.name(), "--config", cfg.to_str().unwrap()]);
        println!("{:<10} exit {code}", stage.name());
        if code != 0 {
            std::process::exit(code);
        }
    }
}
