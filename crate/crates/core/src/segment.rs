//! Whole-image segmentation: per-pixel classification, optional
//! neighbourhood refinement and an optional half-resolution fast path.

use rayon::prelude::*;

use crate::classifiers::{ClassProbabilities, PixelClassifier};
use crate::error::Result;
use crate::imageio::{downscale_half, upscale_mask_2x, Image, MaskImage};
use crate::neighbourhood::{refine, NeighbourhoodConfig, ProbabilityMap};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegmentOptions {
    pub refine: Option<NeighbourhoodConfig>,
    /// Classify a 2x2-pooled copy and scale the mask back up.
    pub downscale: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    /// Always at the input image's resolution.
    pub mask: MaskImage,
    /// At the working resolution (half size when downscaling). Holds the
    /// refined probabilities when refinement ran.
    pub probabilities: ProbabilityMap,
}

/// Classifies every pixel. Rows are processed in parallel.
pub fn probability_map<C: PixelClassifier + ?Sized>(img: &Image, clf: &C) -> Result<ProbabilityMap> {
    let (w, h) = (img.width(), img.height());
    let cells: Vec<ClassProbabilities> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| (0..w).map(move |x| clf.classify(img.pixel(x, y))))
        .collect();
    ProbabilityMap::new(w, h, cells)
}

pub fn segment<C: PixelClassifier + ?Sized>(img: &Image, clf: &C, opts: &SegmentOptions) -> Result<Segmentation> {
    if let Some(cfg) = &opts.refine {
        cfg.validate()?;
    }
    let working;
    let source = if opts.downscale {
        working = downscale_half(img)?;
        &working
    } else {
        img
    };
    let map = probability_map(source, clf)?;
    let (probabilities, mask) = match &opts.refine {
        Some(cfg) => refine(&map, cfg)?,
        None => {
            let mask = map.argmax_mask();
            (map, mask)
        }
    };
    let mut mask = MaskImage::from(&mask);
    if opts.downscale {
        mask = upscale_mask_2x(&mask, img.width(), img.height())?;
    }
    Ok(Segmentation { mask, probabilities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ThresholdRange;
    use crate::colorspace::RgbPixel;

    const SKIN: RgbPixel = RgbPixel::new(224, 172, 140);
    const BLUE: RgbPixel = RgbPixel::new(20, 40, 200);

    fn block_image(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, _| if x < w / 2 { SKIN } else { BLUE }).unwrap()
    }

    #[test]
    fn threshold_segments_a_two_tone_image() {
        let img = block_image(8, 4);
        let seg = segment(&img, &ThresholdRange::default(), &SegmentOptions::default()).unwrap();
        for y in 0..4 {
            for x in 0..8 {
                assert_eq!(seg.mask.is_skin(x, y), x < 4, "({x},{y})");
            }
        }
    }

    #[test]
    fn downscale_restores_original_size() {
        for (w, h) in [(8, 6), (9, 7), (2, 3)] {
            let img = block_image(w, h);
            let opts = SegmentOptions { refine: None, downscale: true };
            let seg = segment(&img, &ThresholdRange::default(), &opts).unwrap();
            assert_eq!((seg.mask.width(), seg.mask.height()), (w, h));
            assert_eq!((seg.probabilities.width(), seg.probabilities.height()), (w / 2, h / 2));
        }
    }

    /// Threshold decisions softened to 0.6 / 0.1. With hard 0 / 1 inputs
    /// the refined products of a lone pixel are both zero and the tie
    /// keeps it.
    struct Soft;

    impl PixelClassifier for Soft {
        fn classify(&self, p: RgbPixel) -> ClassProbabilities {
            let hard = ThresholdRange::default().classify(p);
            ClassProbabilities::from_skin(0.1 + 0.5 * hard.p_skin)
        }
    }

    #[test]
    fn refinement_removes_a_lone_false_positive() {
        let mut img = Image::filled(7, 7, BLUE).unwrap();
        img.set_pixel(3, 3, SKIN);
        let plain = segment(&img, &Soft, &SegmentOptions::default()).unwrap();
        assert_eq!(plain.mask.skin_count(), 1);
        let opts = SegmentOptions { refine: Some(NeighbourhoodConfig::default()), downscale: false };
        let refined = segment(&img, &Soft, &opts).unwrap();
        assert_eq!(refined.mask.skin_count(), 0);
    }

    #[test]
    fn rejects_images_too_small_to_halve() {
        let img = block_image(1, 5);
        let opts = SegmentOptions { refine: None, downscale: true };
        assert!(segment(&img, &ThresholdRange::default(), &opts).is_err());
    }
}
