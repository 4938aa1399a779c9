//! The candidate decision rule on three scored candidates.

use leukoseg::pipeline::{decide, DecisionScore};

fn main() {
    let rows = [
        ("G", DecisionScore::new(0.4986, 0.0677, 0.3567, 0.7121)),
        ("H", DecisionScore::new(0.8020, 0.0000, 0.4814, 0.4607)),
        ("S", DecisionScore::new(0.8561, 0.0000, 0.5363, 0.6994)),
    ];
    println!(
        "{:<3} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "ch", "CirRato", "BAdh", "Sgmv", "CirSim", "Dec"
    );
    for (name, s) in &rows {
        println!(
            "{name:<3} {:8.4} {:8.4} {:8.4} {:8.4} {:8.4}",
            s.cir_rato, s.b_adh, s.sgmv, s.cir_sim, s.dec
        );
    }
    let scores: Vec<DecisionScore> = rows.iter().map(|(_, s)| *s).collect();
    if let Some(i) = decide(&scores) {
        println!("winner: {}", rows[i].0);
    }
}
