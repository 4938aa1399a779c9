//! Segments one image end to end and prints every candidate's scores.
//!
//! `cargo run --release --example segment_image [image.png]`; without an
//! argument an adhered phantom is used.

use leukoseg::evalsynth::{evaluate, generate_phantom, PhantomParams};
use leukoseg::imagecore::io::read_rgb;
use leukoseg::pipeline::{segment, PipelineConfig};

fn main() -> leukoseg::Result<()> {
    let (img, gt) = match std::env::args().nth(1) {
        Some(path) => (read_rgb(path.as_ref())?, None),
        None => {
            let params = PhantomParams {
                adhesion: 0.3,
                ..PhantomParams::default()
            };
            let ph = generate_phantom(&params, 4)?;
            (ph.image, Some(ph.gt_cell))
        }
    };
    let seg = segment(&img, &PipelineConfig::default())?;
    for (k, r) in seg.results.iter().enumerate() {
        println!("site {k}: roi {:?}", r.site.combined_roi);
        for c in &r.all_candidates {
            let mark = if c.channel == r.winning_channel { "*" } else { " " };
            match c.scores {
                Some(s) => println!(
                    " {mark}{} {:?} t={:3} area {:5}  CirRato {:.3} BAdh {:.3} Sgmv {:.3} CirSim {:.3} Dec {:.4}",
                    c.channel,
                    c.provenance,
                    c.threshold,
                    c.mask.count(),
                    s.cir_rato,
                    s.b_adh,
                    s.sgmv,
                    s.cir_sim,
                    s.dec
                ),
                None => println!(" {mark}{} unscored", c.channel),
            }
        }
    }
    for f in &seg.failures {
        println!("site {} failed: {}", f.site, f.reason);
    }
    if let Some(gt) = gt {
        let r = evaluate(&gt, &seg.cell_union())?;
        println!("SA {:.2}%", r.sa);
    }
    Ok(())
}
