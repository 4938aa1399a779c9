//! Concave-convex repair of two overlapping discs: the neck is found, the
//! second disc is cut away and the target disc survives.
//!
//! `cargo run --example ccir_repair [trace.csv]` also writes the contour trace.

use leukoseg::ccir::{ccir_run, CcirConfig};
use leukoseg::imagecore::draw::disc_mask;

fn main() -> leukoseg::Result<()> {
    let (w, h) = (100, 60);
    let a = disc_mask(w, h, 30.0, 30.0, 20.0);
    let b = disc_mask(w, h, 60.0, 30.0, 20.0);
    let both = a.union(&b)?;

    let run = ccir_run(&both, (30.0, 30.0), &CcirConfig::default())?;
    println!("input area {}, {} iteration(s)", both.count(), run.iterations);
    for (k, step) in run.committed.iter().enumerate() {
        println!(
            "commit {k}: poles {} -> {}, circularity {:.3} -> {:.3}, area {} -> {}",
            step.poles_before,
            step.poles_after,
            step.circularity_before,
            step.circularity_after,
            step.area_before,
            step.area_after
        );
    }
    let keep_a = run.mask.intersection(&a)?.count() as f64 / a.count() as f64;
    let only_b = b.difference(&a)?;
    let keep_b = run.mask.intersection(&only_b)?.count() as f64 / only_b.count() as f64;
    println!(
        "retained {:.1}% of the target disc, {:.1}% of the other disc outside the overlap",
        100.0 * keep_a,
        100.0 * keep_b
    );

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, run.trace_csv())?;
        println!("wrote {path}");
    }
    Ok(())
}
