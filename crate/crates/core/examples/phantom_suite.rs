//! Segments seeded phantoms (clean, noisy, adhered) and prints accuracy.

use leukoseg::evalsynth::{evaluate, generate_phantom, PhantomParams};
use leukoseg::pipeline::{segment, PipelineConfig};

fn main() -> leukoseg::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let config = PipelineConfig::default();
    let suites = [
        ("clean", PhantomParams::default()),
        (
            "noisy",
            PhantomParams {
                noise_sigma: 8.0,
                ..PhantomParams::default()
            },
        ),
        (
            "adhered",
            PhantomParams {
                adhesion: 0.3,
                ..PhantomParams::default()
            },
        ),
    ];
    for (name, params) in suites {
        let mut total = 0.0;
        for seed in 0..seeds {
            let ph = generate_phantom(&params, seed)?;
            let seg = segment(&ph.image, &config)?;
            let report = evaluate(&ph.gt_cell, &seg.cell_union())?;
            let channels: Vec<String> = seg.results.iter().map(|r| r.winning_channel.to_string()).collect();
            println!(
                "{name:8} seed {seed:3}  sites {}  SA {:7.2}%  OR {:.3}  UR {:.3}  winner {}",
                seg.results.len(),
                report.sa,
                report.or_rate,
                report.ur_rate,
                channels.join(",")
            );
            total += report.sa;
        }
        println!("{name:8} mean SA {:.2}%", total / seeds as f64);
    }
    Ok(())
}
