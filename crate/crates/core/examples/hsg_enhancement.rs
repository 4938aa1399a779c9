//! Converts a phantom smear to the HSG enhancement image and shows how the
//! nucleus separates from everything else.
//!
//! `cargo run --example hsg_enhancement [out.png]`

use leukoseg::evalsynth::{generate_phantom, PhantomParams};
use leukoseg::imagecore::io::write_gray;
use leukoseg::imagecore::{hsg_from_rgb, rgb_to_hsi, HsgWeights};

fn main() -> leukoseg::Result<()> {
    let ph = generate_phantom(&PhantomParams::default(), 7)?;
    let (h, s, _) = rgb_to_hsi(&ph.image);
    let hsg = hsg_from_rgb(&ph.image, &HsgWeights::default());

    let mean_over = |img: &leukoseg::imagecore::ChannelImage, m: &leukoseg::imagecore::BinaryMask| {
        let (sum, n) = m
            .foreground()
            .fold((0u64, 0u64), |(s, n), (x, y)| (s + img.get(x, y) as u64, n + 1));
        sum as f64 / n.max(1) as f64
    };
    let cytoplasm = ph.gt_cell.difference(&ph.gt_nucleus)?;
    println!("{:<12} {:>6} {:>6} {:>6}", "class", "H", "S", "HSG");
    for (name, mask) in [
        ("nucleus", &ph.gt_nucleus),
        ("cytoplasm", &cytoplasm),
        ("erythrocyte", &ph.gt_rbc),
    ] {
        println!(
            "{name:<12} {:6.1} {:6.1} {:6.1}",
            mean_over(&h, mask),
            mean_over(&s, mask),
            mean_over(&hsg, mask)
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        write_gray(path.as_ref(), &hsg)?;
        println!("wrote {path}");
    }
    Ok(())
}
