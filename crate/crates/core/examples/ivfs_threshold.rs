//! Fuzzy-divergence threshold selection on a noisy three-class image.

use leukoseg::imagecore::ChannelImage;
use leukoseg::ivfs::{divergence_to_ideal, membership_map, search_thresholds, IvfsConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> leukoseg::Result<()> {
    let (w, h) = (96, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let values = (0..w * h)
        .map(|i| {
            let base = match (i % w) * 3 / w {
                0 => 50.0,
                1 => 130.0,
                _ => 210.0,
            };
            (base + rng.random_range(-12.0..12.0f64)).round() as u8
        })
        .collect();
    let img = ChannelImage::new(w, h, values)?;

    for n in [2, 3] {
        let result = search_thresholds(&img, &IvfsConfig::full_range(n))?;
        println!(
            "{n} classes: thresholds {:?}, divergence {:.4}, means {:?}",
            result.thresholds,
            result.divergence,
            result
                .region_means
                .iter()
                .map(|m| format!("{m:.1}"))
                .collect::<Vec<_>>()
        );
    }

    // A poor split scores worse than the selected one.
    let bad = divergence_to_ideal(&membership_map(&img, &[100, 200], 0.5)?);
    println!("divergence at [100, 200]: {bad:.4}");
    Ok(())
}
