//! Accuracy, over- and under-segmentation of a shifted prediction.

use leukoseg::evalsynth::{evaluate, summarize};
use leukoseg::imagecore::draw::disc_mask;

fn main() -> leukoseg::Result<()> {
    let gt = disc_mask(80, 80, 40.0, 40.0, 20.0);
    let mut reports = Vec::new();
    for shift in [0.0, 2.0, 4.0, 8.0] {
        let pred = disc_mask(80, 80, 40.0 + shift, 40.0, 20.0);
        let r = evaluate(&gt, &pred)?;
        println!(
            "shift {shift:>3}: SA {:6.2}%  OR {:.4}  UR {:.4}  ER {:.4}",
            r.sa, r.or_rate, r.ur_rate, r.er_rate
        );
        reports.push(r);
    }
    if let Some(s) = summarize(&reports) {
        println!("mean SA {:.2}% (sd {:.2})", s.sa_mean, s.sa_sd);
    }
    Ok(())
}
