//! Stepwise averaging on a four-class histogram and on a phantom's HSG image.

use leukoseg::evalsynth::{generate_phantom, PhantomParams};
use leukoseg::imagecore::{hsg_from_rgb, ChannelImage, Histogram, HsgWeights};
use leukoseg::swam::{levels_from_histogram, nucleus_mask, swam_levels, ChannelPolarity};

fn main() -> leukoseg::Result<()> {
    // Four classes at 40, 100, 160 and 220, background most common.
    let mut counts = [0u64; 256];
    for (level, n) in [(40usize, 500u64), (100, 200), (160, 120), (220, 60)] {
        for d in 0..5 {
            counts[level - 2 + d] += n / 5;
        }
    }
    let levels = levels_from_histogram(&Histogram::from_counts(counts), ChannelPolarity::Ascending)?;
    println!("synthetic histogram: {:?}", levels.ascending());

    let ph = generate_phantom(&PhantomParams::default(), 3)?;
    let hsg: ChannelImage = hsg_from_rgb(&ph.image, &HsgWeights::default());
    let levels = swam_levels(&hsg)?;
    println!(
        "phantom HSG: background {} erythrocyte {} cytoplasm {} nucleus {}",
        levels.background, levels.erythrocyte, levels.cytoplasm, levels.nucleus
    );
    let mask = nucleus_mask(&hsg, &levels);
    let hit = mask.intersection(&ph.gt_nucleus)?.count();
    println!(
        "nucleus threshold {}: {} px selected, {} of {} true nucleus px",
        levels.nucleus_threshold(),
        mask.count(),
        hit,
        ph.gt_nucleus.count()
    );
    Ok(())
}
