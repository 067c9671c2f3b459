//! Train/test partition with buffer gaps at the full Nordland scale.

use seasonmatch::dataset::partition::{format_segments, parse_segments, DEFAULT_BUFFER};
use seasonmatch::dataset::Partition;

fn main() -> seasonmatch::Result<()> {
    let segments = parse_segments("5000:6150,14000:15150,23000:24150")?;
    let p = Partition::new(28_865, &segments, DEFAULT_BUFFER)?;
    println!("segments  {}", format_segments(&p.test_segments));
    println!("buffer    {} frames", p.buffer);
    println!("train     {}", p.train_indices.len());
    println!("test      {}", p.n_test());
    println!("discarded {}", p.n_discarded());

    let text = p.to_text();
    println!("\nfirst lines of the partition file:");
    for line in text.lines().take(3) {
        println!("  {line}");
    }
    let back = Partition::from_text(&text, 28_865)?;
    assert_eq!(back, p);
    println!("round trip ok");
    Ok(())
}
