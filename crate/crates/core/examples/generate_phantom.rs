//! Writes one seeded phantom and its ground-truth masks.
//!
//! `cargo run --example generate_phantom [out_dir] [seed]`

use std::path::PathBuf;

use leukoseg::evalsynth::{generate_phantom, PhantomParams};
use leukoseg::imagecore::io::{write_mask, write_rgb};

fn main() -> leukoseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "phantom_out".into()));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let params = PhantomParams {
        adhesion: 0.3,
        noise_sigma: 4.0,
        ..PhantomParams::default()
    };
    let ph = generate_phantom(&params, seed)?;
    std::fs::create_dir_all(&out)?;
    write_rgb(&out.join("smear.png"), &ph.image)?;
    write_mask(&out.join("cell.pgm"), &ph.gt_cell)?;
    write_mask(&out.join("nucleus.pgm"), &ph.gt_nucleus)?;
    write_mask(&out.join("rbc.pgm"), &ph.gt_rbc)?;
    println!(
        "seed {seed}: {} leukocyte(s), {} erythrocytes, cell {} px, nucleus {} px, overlap with erythrocytes {} px",
        ph.leukocytes.len(),
        ph.erythrocytes.len(),
        ph.gt_cell.count(),
        ph.gt_nucleus.count(),
        ph.gt_cell.intersection(&ph.gt_rbc)?.count()
    );
    println!("wrote {}", out.display());
    Ok(())
}
