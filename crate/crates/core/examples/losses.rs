//! The two metric-learning losses and their distance gradients.

use seasonmatch::metric::{contrastive, wohlhart_lepetit, PairLabel};

fn main() -> seasonmatch::Result<()> {
    println!("{:>5} {:>5} {:>8} {:>9} {:>9}", "d_p", "d_n", "loss", "dL/dd_p", "dL/dd_n");
    for (d_p, d_n) in [(0.0, 0.5), (0.0, 1.0), (1.0, 0.0), (0.5, 0.5), (0.2, 0.9), (0.1, 1.5)] {
        let t = wohlhart_lepetit(d_p, d_n, 1.0)?;
        println!(
            "{d_p:>5.2} {d_n:>5.2} {:>8.4} {:>9.4} {:>9.4}",
            t.value, t.d_positive, t.d_negative
        );
    }

    println!("\ncontrastive, margin 1");
    for d in [0.0, 0.25, 0.5, 1.0, 1.5] {
        let p = contrastive(d, PairLabel::Positive, 1.0)?;
        let n = contrastive(d, PairLabel::Negative, 1.0)?;
        println!("d = {d:.2}: positive {:.4} (grad {:.3}), negative {:.4} (grad {:.3})", p.value, p.d_distance, n.value, n.d_distance);
    }
    Ok(())
}
