//! A trained stage-1 classifier of any kind.

use std::fmt;
use std::str::FromStr;

use crate::classifiers::{BayesModel, ClassProbabilities, PixelClassifier, ThresholdRange, TreeModel};
use crate::colorspace::RgbPixel;
use crate::nn::MlpModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Threshold,
    Bayes,
    Tree,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Threshold, ModelKind::Bayes, ModelKind::Tree, ModelKind::Mlp];

    pub const fn name(self) -> &'static str {
        match self {
            ModelKind::Threshold => "threshold",
            ModelKind::Bayes => "bayes",
            ModelKind::Tree => "tree",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model kind {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Threshold(ThresholdRange),
    Bayes(BayesModel),
    Tree(TreeModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Threshold(_) => ModelKind::Threshold,
            Model::Bayes(_) => ModelKind::Bayes,
            Model::Tree(_) => ModelKind::Tree,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }
}

impl PixelClassifier for Model {
    fn classify(&self, pixel: RgbPixel) -> ClassProbabilities {
        match self {
            Model::Threshold(m) => m.classify(pixel),
            Model::Bayes(m) => m.classify(pixel),
            Model::Tree(m) => m.classify(pixel),
            Model::Mlp(m) => m.classify(pixel),
        }
    }
}
