//! Stage-1 colour classifiers.
//!
//! Every classifier maps a single pixel to a [`ClassProbabilities`] pair.
//! The YCrCb box threshold lives here; naive Bayes and the CART tree have
//! their own modules, and the feed-forward network lives in [`crate::nn`].

pub mod bayes;
pub mod tree;

use crate::colorspace::{rgb_to_ycbcr, RgbPixel, YcbcrPixel};
use crate::dataset::Label;

pub use bayes::{BayesConfig, BayesModel, BayesPrediction, BayesVariant};
pub use tree::{Attribute, TreeConfig, TreeModel, TreeNode};

/// `(P(colour = skin), P(colour = non-skin))`, summing to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassProbabilities {
    pub p_skin: f64,
    pub p_non_skin: f64,
}

impl ClassProbabilities {
    pub const SKIN: Self = Self {
        p_skin: 1.0,
        p_non_skin: 0.0,
    };
    pub const NON_SKIN: Self = Self {
        p_skin: 0.0,
        p_non_skin: 1.0,
    };

    pub fn from_skin(p_skin: f64) -> Self {
        Self {
            p_skin,
            p_non_skin: 1.0 - p_skin,
        }
    }

    /// Normalizes two non-negative scores. `None` when both are zero.
    pub fn from_scores(skin: f64, non_skin: f64) -> Option<Self> {
        let total = skin + non_skin;
        (total > 0.0).then(|| Self {
            p_skin: skin / total,
            p_non_skin: non_skin / total,
        })
    }

    pub fn probability(&self, label: Label) -> f64 {
        match label {
            Label::Skin => self.p_skin,
            Label::NonSkin => self.p_non_skin,
        }
    }

    /// Skin wins ties.
    pub fn label(&self) -> Label {
        if self.p_skin >= self.p_non_skin {
            Label::Skin
        } else {
            Label::NonSkin
        }
    }
}

pub trait PixelClassifier: Sync {
    fn classify(&self, pixel: RgbPixel) -> ClassProbabilities;
}

/// Inclusive box in `(Y, Cr, Cb)` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThresholdRange {
    pub lower: YcbcrPixel,
    pub upper: YcbcrPixel,
}

impl Default for ThresholdRange {
    fn default() -> Self {
        Self {
            lower: YcbcrPixel::new(0, 147, 60),
            upper: YcbcrPixel::new(255, 180, 127),
        }
    }
}

impl ThresholdRange {
    pub fn is_valid(&self) -> bool {
        self.lower.y <= self.upper.y && self.lower.cr <= self.upper.cr && self.lower.cb <= self.upper.cb
    }

    pub fn contains(&self, p: YcbcrPixel) -> bool {
        (self.lower.y..=self.upper.y).contains(&p.y)
            && (self.lower.cr..=self.upper.cr).contains(&p.cr)
            && (self.lower.cb..=self.upper.cb).contains(&p.cb)
    }
}

pub fn threshold_classify(p: RgbPixel, range: &ThresholdRange) -> ClassProbabilities {
    if range.contains(rgb_to_ycbcr(p)) {
        ClassProbabilities::SKIN
    } else {
        ClassProbabilities::NON_SKIN
    }
}

impl PixelClassifier for ThresholdRange {
    fn classify(&self, pixel: RgbPixel) -> ClassProbabilities {
        threshold_classify(pixel, self)
    }
}
