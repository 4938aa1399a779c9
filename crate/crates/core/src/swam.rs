//! Stepwise averaging: four characteristic grey levels (background,
//! erythrocyte, cytoplasm, nucleus) from conditional means of the histogram.
//!
//! Starting from `t_i = 0`, each of three rounds takes
//! `t_j = mean{v > t_i}` and `t_k = mean{t_i < v < t_j}`, then moves `t_i` to
//! `t_k`. The three `t_k` are the background, erythrocyte and cytoplasm levels;
//! the last `t_j` is the nucleus level.

use crate::error::{Error, Result};
use crate::imagecore::{apply_threshold, histogram, BinaryMask, ChannelImage, Histogram, Polarity};

const ROUNDS: usize = 3;

/// Whether the nucleus is the brightest or the darkest class of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ChannelPolarity {
    Ascending,
    Descending,
}

impl ChannelPolarity {
    /// Threshold polarity that keeps the nucleus side.
    pub fn keep(self) -> Polarity {
        match self {
            ChannelPolarity::Ascending => Polarity::KeepAbove,
            ChannelPolarity::Descending => Polarity::KeepBelow,
        }
    }
}

/// The four levels in the channel's own grey scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SwamLevels {
    pub background: u8,
    pub erythrocyte: u8,
    pub cytoplasm: u8,
    pub nucleus: u8,
    pub polarity: ChannelPolarity,
}

impl SwamLevels {
    /// Levels sorted by grey value, lowest first.
    pub fn ascending(&self) -> [u8; 4] {
        let l = [self.background, self.erythrocyte, self.cytoplasm, self.nucleus];
        match self.polarity {
            ChannelPolarity::Ascending => l,
            ChannelPolarity::Descending => [l[3], l[2], l[1], l[0]],
        }
    }

    /// Midpoint of the cytoplasm and nucleus levels, rounded half up.
    pub fn nucleus_threshold(&self) -> u8 {
        round_half_up(self.cytoplasm as u64 + self.nucleus as u64, 2)
    }
}

/// Levels of an image whose nucleus is the brightest class.
pub fn swam_levels(img: &ChannelImage) -> Result<SwamLevels> {
    swam_levels_with_polarity(img, ChannelPolarity::Ascending)
}

/// Levels for either polarity; descending channels are inverted, processed
/// and mapped back.
pub fn swam_levels_with_polarity(img: &ChannelImage, polarity: ChannelPolarity) -> Result<SwamLevels> {
    let hist = histogram(img, None)?;
    levels_from_histogram(&hist, polarity)
}

pub fn levels_from_histogram(hist: &Histogram, polarity: ChannelPolarity) -> Result<SwamLevels> {
    let (lo, hi) = hist
        .range()
        .ok_or_else(|| Error::DegenerateImage("empty histogram".into()))?;
    if lo == hi {
        return Err(Error::DegenerateImage(format!("constant image (value {lo})")));
    }
    let counts = match polarity {
        ChannelPolarity::Ascending => *hist.counts(),
        ChannelPolarity::Descending => {
            let mut inv = [0u64; 256];
            for (f, &c) in hist.counts().iter().enumerate() {
                inv[255 - f] = c;
            }
            inv
        }
    };
    let [b, r, c, n] = stepwise_levels(&counts)?;
    let map = |v: u8| match polarity {
        ChannelPolarity::Ascending => v,
        ChannelPolarity::Descending => 255 - v,
    };
    Ok(SwamLevels {
        background: map(b),
        erythrocyte: map(r),
        cytoplasm: map(c),
        nucleus: map(n),
        polarity,
    })
}

/// Core iteration on raw histogram counts.
fn stepwise_levels(counts: &[u64; 256]) -> Result<[u8; 4]> {
    let mut t_i: u8 = 0;
    let mut t_j: u8 = 0;
    let mut t_ks = [0u8; ROUNDS];
    for t_k in t_ks.iter_mut() {
        t_j = conditional_mean(counts, t_i as usize + 1, 255)
            .ok_or_else(|| Error::DegenerateImage(format!("no pixels above grey level {t_i}")))?;
        // Nothing strictly between t_i and t_j: the level does not move.
        let next = if t_j as usize > t_i as usize + 1 {
            conditional_mean(counts, t_i as usize + 1, t_j as usize - 1).unwrap_or(t_i)
        } else {
            t_i
        };
        *t_k = next;
        t_i = next;
    }
    Ok([t_ks[0], t_ks[1], t_ks[2], t_j])
}

/// Mean grey value over bins `lo..=hi`, rounded half up.
fn conditional_mean(counts: &[u64; 256], lo: usize, hi: usize) -> Option<u8> {
    if lo > hi {
        return None;
    }
    let (mut n, mut sum) = (0u64, 0u64);
    for (f, &c) in counts.iter().enumerate().take(hi + 1).skip(lo) {
        n += c;
        sum += f as u64 * c;
    }
    (n > 0).then(|| round_half_up(sum, n))
}

fn round_half_up(num: u64, den: u64) -> u8 {
    ((2 * num + den) / (2 * den)) as u8
}

/// Raw nucleus mask: threshold at the cytoplasm/nucleus midpoint on the
/// nucleus side. Impurities are removed later by the locator.
pub fn nucleus_mask(img: &ChannelImage, levels: &SwamLevels) -> BinaryMask {
    apply_threshold(img, levels.nucleus_threshold(), levels.polarity.keep())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::draw::disc_mask;

    /// Histogram-level simulation of the three averaging rounds with exact
    /// rational arithmetic, written independently of the implementation.
    fn oracle(pairs: &[(u8, u64)]) -> [u8; 4] {
        let mean = |lo: f64, hi: f64| -> Option<f64> {
            let sel: Vec<_> = pairs
                .iter()
                .filter(|(v, _)| (*v as f64) > lo && (*v as f64) < hi)
                .collect();
            let n: u64 = sel.iter().map(|(_, c)| c).sum();
            if n == 0 {
                return None;
            }
            let s: u64 = sel.iter().map(|(v, c)| *v as u64 * c).sum();
            Some((s as f64 / n as f64 + 0.5).floor())
        };
        let mut ti = 0.0;
        let mut out = [0u8; 4];
        let mut tj = 0.0;
        for slot in out.iter_mut().take(3) {
            tj = mean(ti, 256.0).unwrap();
            let tk = mean(ti, tj).unwrap_or(ti);
            *slot = tk as u8;
            ti = tk;
        }
        out[3] = tj as u8;
        out
    }

    fn image_from(pairs: &[(u8, u64)]) -> ChannelImage {
        let mut values = Vec::new();
        for &(v, c) in pairs {
            values.extend(std::iter::repeat_n(v, c as usize));
        }
        let n = values.len();
        ChannelImage::new(n, 1, values).unwrap()
    }

    fn as_array(l: &SwamLevels) -> [u8; 4] {
        [l.background, l.erythrocyte, l.cytoplasm, l.nucleus]
    }

    #[test]
    fn four_level_phantom_matches_oracle() {
        let pairs = [(30, 600), (90, 250), (150, 100), (220, 50)];
        let levels = swam_levels(&image_from(&pairs)).unwrap();
        let expected = oracle(&pairs);
        assert_eq!(expected, [30, 90, 150, 173]);
        assert_eq!(as_array(&levels), expected);
    }

    #[test]
    fn two_level_phantom() {
        let pairs = [(10, 900), (200, 100)];
        let levels = swam_levels(&image_from(&pairs)).unwrap();
        assert_eq!(as_array(&levels), oracle(&pairs));
        assert!(levels.nucleus > 150);
        assert!(levels.background < 40);
    }

    #[test]
    fn missing_class_stays_monotone() {
        let pairs = [(40, 700), (120, 200), (230, 100)];
        let l = as_array(&swam_levels(&image_from(&pairs)).unwrap());
        assert_eq!(l, oracle(&pairs));
        assert!(l.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constant_and_black_images_are_degenerate() {
        let c = ChannelImage::filled(5, 5, 90).unwrap();
        assert!(matches!(swam_levels(&c), Err(Error::DegenerateImage(_))));
        let z = ChannelImage::filled(5, 5, 0).unwrap();
        assert!(matches!(swam_levels(&z), Err(Error::DegenerateImage(_))));
    }

    #[test]
    fn descending_polarity_mirrors_levels() {
        let pairs = [(30, 600), (90, 250), (150, 100), (220, 50)];
        let img = image_from(&pairs);
        let asc = swam_levels(&img).unwrap();
        let desc = swam_levels_with_polarity(&img.inverted(), ChannelPolarity::Descending).unwrap();
        assert_eq!(desc.background, 255 - asc.background);
        assert_eq!(desc.nucleus, 255 - asc.nucleus);
        let sorted = desc.ascending();
        assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn nucleus_threshold_midpoint() {
        let l = SwamLevels {
            background: 20,
            erythrocyte: 80,
            cytoplasm: 150,
            nucleus: 220,
            polarity: ChannelPolarity::Ascending,
        };
        assert_eq!(l.nucleus_threshold(), 185);
    }

    #[test]
    fn bright_disc_becomes_nucleus_mask() {
        let disc = disc_mask(60, 60, 30.0, 30.0, 10.0);
        let values = disc.values().iter().map(|&v| if v != 0 { 220 } else { 30 }).collect();
        let img = ChannelImage::new(60, 60, values).unwrap();
        let levels = swam_levels(&img).unwrap();
        assert_eq!(nucleus_mask(&img, &levels), disc);
    }

    #[test]
    fn everything_below_threshold_gives_empty_mask() {
        let img = ChannelImage::new(3, 1, vec![10, 20, 30]).unwrap();
        let l = SwamLevels {
            background: 50,
            erythrocyte: 60,
            cytoplasm: 70,
            nucleus: 80,
            polarity: ChannelPolarity::Ascending,
        };
        assert!(nucleus_mask(&img, &l).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_image() -> impl Strategy<Value = Vec<u8>> {
            prop::collection::vec(1u8..=200, 16..200)
        }

        proptest! {
            #[test]
            fn levels_are_ordered(values in small_image()) {
                let n = values.len();
                let img = ChannelImage::new(n, 1, values.clone()).unwrap();
                prop_assume!(values.iter().any(|&v| v != values[0]));
                let l = swam_levels(&img).unwrap();
                prop_assert!(l.background <= l.erythrocyte);
                prop_assert!(l.erythrocyte <= l.cytoplasm);
                prop_assert!(l.cytoplasm <= l.nucleus);
            }

            #[test]
            fn permutation_invariant(mut values in small_image(), seed in any::<u64>()) {
                use rand::{seq::SliceRandom, SeedableRng};
                prop_assume!(values.iter().any(|&v| v != values[0]));
                let n = values.len();
                let a = swam_levels(&ChannelImage::new(n, 1, values.clone()).unwrap()).unwrap();
                values.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let b = swam_levels(&ChannelImage::new(n, 1, values).unwrap()).unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn shift_moves_levels(values in small_image(), c in 1u8..=55) {
                prop_assume!(values.iter().any(|&v| v != values[0]));
                let n = values.len();
                let a = swam_levels(&ChannelImage::new(n, 1, values.clone()).unwrap()).unwrap();
                let shifted: Vec<u8> = values.iter().map(|&v| v + c).collect();
                let b = swam_levels(&ChannelImage::new(n, 1, shifted).unwrap()).unwrap();
                for (x, y) in as_array(&a).iter().zip(as_array(&b).iter()) {
                    prop_assert!((*y as i32 - *x as i32 - c as i32).abs() <= 1, "{:?} vs {:?}", a, b);
                }
            }
        }
    }
}
