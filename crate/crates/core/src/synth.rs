//! Seeded synthetic data: labelled colour samples and test scenes.
//!
//! Used by tests, benchmarks and the CLI's self-contained demos; nothing
//! here is needed to train on real data.

use rand::Rng;

use crate::colorspace::RgbPixel;
use crate::dataset::{Label, RawSample};
use crate::error::Result;
use crate::imageio::{Image, MaskImage};
use crate::rng::{self, SplitMix64};

/// Base skin tones, light to dark.
pub const SKIN_TONES: [RgbPixel; 6] = [
    RgbPixel::new(255, 219, 172),
    RgbPixel::new(241, 194, 125),
    RgbPixel::new(224, 172, 140),
    RgbPixel::new(198, 134, 66),
    RgbPixel::new(141, 85, 36),
    RgbPixel::new(92, 51, 23),
];

const TONE_JITTER: i16 = 12;
/// Non-skin draws closer than this (max-channel distance) to a tone are rejected.
const EXCLUSION: i16 = 45;

fn jitter(rng: &mut SplitMix64, base: RgbPixel, amount: i16) -> RgbPixel {
    let mut ch = |c: u8| (i16::from(c) + rng.random_range(-amount..=amount)).clamp(0, 255) as u8;
    RgbPixel::new(ch(base.r), ch(base.g), ch(base.b))
}

pub fn skin_colour(rng: &mut SplitMix64) -> RgbPixel {
    let base = SKIN_TONES[rng.random_range(0..SKIN_TONES.len())];
    jitter(rng, base, TONE_JITTER)
}

fn near_skin(p: RgbPixel) -> bool {
    SKIN_TONES.iter().any(|t| {
        let d = |a: u8, b: u8| (i16::from(a) - i16::from(b)).abs();
        d(p.r, t.r).max(d(p.g, t.g)).max(d(p.b, t.b)) < EXCLUSION
    })
}

pub fn non_skin_colour(rng: &mut SplitMix64) -> RgbPixel {
    loop {
        let p = RgbPixel::new(rng.random(), rng.random(), rng.random());
        if !near_skin(p) {
            return p;
        }
    }
}

/// `n` labelled samples, roughly one in five of them skin.
pub fn labelled_samples(n: usize, seed: u64) -> Vec<RawSample> {
    let mut rng = rng::seeded(seed);
    (0..n)
        .map(|_| {
            let (p, label) = if rng.random_bool(0.2) {
                (skin_colour(&mut rng), Label::Skin)
            } else {
                (non_skin_colour(&mut rng), Label::NonSkin)
            };
            RawSample { b: p.b, g: p.g, r: p.r, label }
        })
        .collect()
}

/// A skin-toned disc on a noisy blue background, with salt noise: a
/// fraction `salt` of pixels swap to the other class's colours. The
/// returned mask is the disc, without the noise.
pub fn disc_scene(width: usize, height: usize, salt: f64, seed: u64) -> Result<(Image, MaskImage)> {
    let mut rng = rng::seeded(seed);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let radius = width.min(height) as f64 / 3.0;
    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        dx * dx + dy * dy <= radius * radius
    };
    let tone = SKIN_TONES[2];
    let background = RgbPixel::new(40, 70, 180);
    let img = Image::from_fn(width, height, |x, y| {
        let flip = rng.random_bool(salt);
        match (inside(x, y), flip) {
            (true, false) => jitter(&mut rng, tone, 8),
            (false, false) => jitter(&mut rng, background, 20),
            (true, true) => non_skin_colour(&mut rng),
            (false, true) => skin_colour(&mut rng),
        }
    })?;
    let mask = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| if inside(x, y) { 255 } else { 0 })
        .collect();
    Ok((img, MaskImage::new(width, height, mask)?))
}
