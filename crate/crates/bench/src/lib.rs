//! Shared fixtures for the benchmarks: a small trained model of each kind
//! and a synthetic test scene.

use skinseg_core::classifiers::{BayesModel, TreeConfig, TreeModel};
use skinseg_core::dataset::{split, to_hsv_samples};
use skinseg_core::nn::{self, MlpArchitecture, TrainConfig};
use skinseg_core::synth::{disc_scene, labelled_samples};
use skinseg_core::{HsvSample, Image, Model, SplitConfig, ThresholdRange};

pub fn training_set(n: usize) -> Vec<HsvSample> {
    let (train, _) = split(&labelled_samples(n, 17), &SplitConfig::default()).expect("n >= 2");
    to_hsv_samples(&train)
}

pub fn models(train: &[HsvSample]) -> Vec<Model> {
    vec![
        Model::Threshold(ThresholdRange::default()),
        Model::Bayes(BayesModel::fit(train, 1.0).expect("both classes")),
        Model::Tree(TreeModel::fit(train, &TreeConfig::default()).expect("both classes")),
        Model::Mlp(
            nn::train(train, &MlpArchitecture::default(), &TrainConfig::default())
                .expect("both classes")
                .model,
        ),
    ]
}

/// 450x600 disc scene with 2% salt noise.
pub fn scene() -> Image {
    disc_scene(450, 600, 0.02, 8).expect("valid size").0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(models(&training_set(500)).len(), 4);
        let img = scene();
        assert_eq!((img.width(), img.height()), (450, 600));
    }
}
