//! Count-based Bayes classifier over quantized HSV.
//!
//! No binning: every one of the 256 values of each attribute keeps its own
//! per-class count. Likelihoods carry an additive pseudo-count `alpha`:
//!
//! ```text
//! P(a = u | X) = (count(a = u, X) + alpha) / (N_X + 256 * alpha)
//! ```
//!
//! The [`BayesVariant::Naive`] model multiplies the three per-attribute
//! likelihoods. [`BayesVariant::Joint`] instead counts whole `(h, s, v)`
//! tuples, with `256^3` in place of `256` in the smoothing denominator.

use std::collections::BTreeMap;

use crate::classifiers::{ClassProbabilities, PixelClassifier};
use crate::colorspace::{rgb_to_hsv, HsvPixel, RgbPixel};
use crate::dataset::{HsvSample, Label};
use crate::error::{Error, Result};

pub const VALUES_PER_ATTRIBUTE: usize = 256;
const JOINT_CELLS: f64 = 16_777_216.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BayesVariant {
    #[default]
    Naive,
    Joint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BayesConfig {
    pub alpha: f64,
    pub variant: BayesVariant,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            variant: BayesVariant::Naive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BayesPrediction {
    pub probabilities: ClassProbabilities,
    /// Both class scores were zero, so the priors were returned instead.
    /// Only possible with `alpha = 0`.
    pub prior_fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesModel {
    alpha: f64,
    variant: BayesVariant,
    /// `counts[class][attribute][value]`
    counts: Box<[[[u64; VALUES_PER_ATTRIBUTE]; 3]; 2]>,
    class_totals: [u64; 2],
    /// Per-tuple counts, populated for the joint variant only.
    joint: BTreeMap<HsvPixel, [u64; 2]>,
}

impl BayesModel {
    pub fn fit(train: &[HsvSample], alpha: f64) -> Result<Self> {
        Self::fit_with(
            train,
            &BayesConfig {
                alpha,
                ..BayesConfig::default()
            },
        )
    }

    pub fn fit_with(train: &[HsvSample], cfg: &BayesConfig) -> Result<Self> {
        if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
            return Err(Error::Config(format!("smoothing alpha must be >= 0, got {}", cfg.alpha)));
        }
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut counts = [[[0u64; VALUES_PER_ATTRIBUTE]; 3]; 2];
        let mut class_totals = [0u64; 2];
        let mut joint = BTreeMap::new();
        for s in train {
            let class = s.label.index();
            class_totals[class] += 1;
            for (attr, value) in s.pixel.channels().into_iter().enumerate() {
                counts[class][attr][value as usize] += 1;
            }
            if cfg.variant == BayesVariant::Joint {
                joint.entry(s.pixel).or_insert([0u64; 2])[class] += 1;
            }
        }
        for label in [Label::Skin, Label::NonSkin] {
            if class_totals[label.index()] == 0 {
                return Err(Error::MissingClass(label));
            }
        }
        Ok(Self {
            alpha: cfg.alpha,
            variant: cfg.variant,
            counts: Box::new(counts),
            class_totals,
            joint,
        })
    }

    /// Rebuilds a model from stored tables. Checks that every attribute
    /// table sums to its class total.
    pub fn from_parts(
        alpha: f64,
        variant: BayesVariant,
        counts: [[[u64; VALUES_PER_ATTRIBUTE]; 3]; 2],
        class_totals: [u64; 2],
        joint: BTreeMap<HsvPixel, [u64; 2]>,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("smoothing alpha must be >= 0, got {alpha}")));
        }
        for (class, tables) in counts.iter().enumerate() {
            if class_totals[class] == 0 {
                return Err(Error::Config("empty class in Bayes tables".into()));
            }
            for table in tables {
                if table.iter().sum::<u64>() != class_totals[class] {
                    return Err(Error::Config("Bayes count table does not sum to its class total".into()));
                }
            }
        }
        if variant == BayesVariant::Joint {
            for class in 0..2 {
                if joint.values().map(|c| c[class]).sum::<u64>() != class_totals[class] {
                    return Err(Error::Config("joint Bayes table does not sum to its class total".into()));
                }
            }
        }
        Ok(Self {
            alpha,
            variant,
            counts: Box::new(counts),
            class_totals,
            joint,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn variant(&self) -> BayesVariant {
        self.variant
    }

    pub fn counts(&self) -> &[[[u64; VALUES_PER_ATTRIBUTE]; 3]; 2] {
        &self.counts
    }

    pub fn class_totals(&self) -> [u64; 2] {
        self.class_totals
    }

    pub fn joint_counts(&self) -> &BTreeMap<HsvPixel, [u64; 2]> {
        &self.joint
    }

    pub fn prior(&self, label: Label) -> f64 {
        let total = self.class_totals[0] + self.class_totals[1];
        self.class_totals[label.index()] as f64 / total as f64
    }

    /// `P(attribute = value | label)`; attribute 0 = h, 1 = s, 2 = v.
    pub fn likelihood(&self, attribute: usize, value: u8, label: Label) -> f64 {
        let class = label.index();
        let count = self.counts[class][attribute][value as usize] as f64;
        (count + self.alpha) / (self.class_totals[class] as f64 + VALUES_PER_ATTRIBUTE as f64 * self.alpha)
    }

    /// `P((h, s, v) | label)` under the joint variant's tuple counts.
    pub fn joint_likelihood(&self, pixel: HsvPixel, label: Label) -> f64 {
        let class = label.index();
        let count = self.joint.get(&pixel).map_or(0, |c| c[class]) as f64;
        (count + self.alpha) / (self.class_totals[class] as f64 + JOINT_CELLS * self.alpha)
    }

    /// Unnormalized posterior `P(X) * P((h, s, v) | X)`.
    pub fn score(&self, pixel: HsvPixel, label: Label) -> f64 {
        let likelihood = match self.variant {
            BayesVariant::Naive => pixel
                .channels()
                .into_iter()
                .enumerate()
                .map(|(attr, v)| self.likelihood(attr, v, label))
                .product::<f64>(),
            BayesVariant::Joint => self.joint_likelihood(pixel, label),
        };
        self.prior(label) * likelihood
    }

    pub fn predict_detailed(&self, pixel: HsvPixel) -> BayesPrediction {
        let skin = self.score(pixel, Label::Skin);
        let non_skin = self.score(pixel, Label::NonSkin);
        match ClassProbabilities::from_scores(skin, non_skin) {
            Some(probabilities) => BayesPrediction {
                probabilities,
                prior_fallback: false,
            },
            None => BayesPrediction {
                probabilities: ClassProbabilities {
                    p_skin: self.prior(Label::Skin),
                    p_non_skin: self.prior(Label::NonSkin),
                },
                prior_fallback: true,
            },
        }
    }

    pub fn predict(&self, pixel: HsvPixel) -> ClassProbabilities {
        self.predict_detailed(pixel).probabilities
    }
}

impl PixelClassifier for BayesModel {
    fn classify(&self, pixel: RgbPixel) -> ClassProbabilities {
        self.predict(rgb_to_hsv(pixel))
    }
}
