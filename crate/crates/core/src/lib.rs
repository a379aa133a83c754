//! Pixel-wise skin colour segmentation with neighbourhood refinement.
//!
//! Segmentation runs in two stages:
//!
//! 1. A colour classifier maps every pixel to a pair of probabilities
//!    `(P(colour = skin), P(colour = non-skin))`. Four classifiers are
//!    available: a YCrCb box threshold, a naive Bayes model over quantized
//!    HSV, a CART decision tree, and a small feed-forward network trained
//!    with Adam.
//! 2. The per-pixel [`ProbabilityMap`] is refined by the likeliness of the
//!    pixel's neighbourhood: the stage-1 skin probability is multiplied by
//!    the mean skin probability of the surrounding pixels (see
//!    [`neighbourhood`]), which suppresses isolated false positives and
//!    fills small holes inside skin regions.
//!
//! The crate also carries the evaluation suite ([`metrics`]), the UCI skin
//! segmentation loader ([`dataset`]), binary PPM/PGM I/O and the half
//! resolution fast path ([`imageio`], [`segment`]), and a text model file
//! format ([`model_file`]).

pub mod classifiers;
pub mod colorspace;
pub mod dataset;
pub mod error;
pub mod imageio;
pub mod metrics;
pub mod model;
pub mod model_file;
pub mod neighbourhood;
pub mod nn;
pub mod rng;
pub mod segment;
pub mod synth;

pub use classifiers::{ClassProbabilities, PixelClassifier, ThresholdRange};
pub use colorspace::{HsvPixel, RgbPixel, YcbcrPixel};
pub use dataset::{HsvSample, Label, RawSample, SplitConfig};
pub use error::{Error, Result};
pub use imageio::{Image, MaskImage};
pub use metrics::{ConfusionMatrix, MetricsReport, RocCurve};
pub use model::{Model, ModelKind};
pub use neighbourhood::{NeighbourhoodConfig, ProbabilityMap, RefinementRule, SkinMask};
