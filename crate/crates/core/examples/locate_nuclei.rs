//! Finds nuclei in a multi-cell phantom, merges lobes and sizes each
//! leukocyte's region of interest.

use leukoseg::evalsynth::{generate_phantom, PhantomParams};
use leukoseg::pipeline::{segment_nucleus, PipelineConfig};

fn main() -> leukoseg::Result<()> {
    let params = PhantomParams {
        width: 480,
        height: 360,
        leukocytes: 3,
        erythrocytes: 30,
        ..PhantomParams::default()
    };
    let ph = generate_phantom(&params, 5)?;
    let (_, sites) = segment_nucleus(&ph.image, &PipelineConfig::default())?;
    println!("{} leukocytes placed, {} sites found", ph.leukocytes.len(), sites.len());
    for (i, s) in sites.iter().enumerate() {
        let r = s.combined_roi;
        println!(
            "site {i}: {} lobe component(s), circularity {:.3}, radius {:.1}, roi ({},{})-({},{})",
            s.nucleus_components.len(),
            s.nucleus_stats.circularity,
            s.equivalent_radius,
            r.x1,
            r.y1,
            r.x2,
            r.y2
        );
    }
    for (i, l) in ph.leukocytes.iter().enumerate() {
        println!(
            "truth {i}: centre ({:.0},{:.0}) radius {:.1}, {} lobes",
            l.cell.cx,
            l.cell.cy,
            l.cell.r,
            l.lobes.len()
        );
    }
    Ok(())
}
