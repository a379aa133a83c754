//! CART decision tree with Gini impurity over `(h, s, v)`.
//!
//! Candidate thresholds are midpoints between consecutive distinct values
//! present in a node. The split with the largest impurity decrease wins;
//! ties go to the lowest attribute (h, then s, then v) and then the lowest
//! threshold. Split quality is compared in exact integer arithmetic, so
//! tie-breaking never depends on floating-point rounding.
//!
//! Nodes are stored in preorder: a split's left child immediately follows
//! it.

use std::cmp::Ordering;
use std::fmt;

use crate::classifiers::{ClassProbabilities, PixelClassifier};
use crate::colorspace::{rgb_to_hsv, HsvPixel, RgbPixel};
use crate::dataset::HsvSample;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Hue,
    Saturation,
    Value,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Hue, Attribute::Saturation, Attribute::Value];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn of(self, p: HsvPixel) -> u8 {
        p.channels()[self.index()]
    }

    pub const fn symbol(self) -> &'static str {
        match self {
            Attribute::Hue => "h",
            Attribute::Saturation => "s",
            Attribute::Value => "v",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.symbol() == s)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreeNode {
    /// Samples with `value <= threshold` go left.
    Split {
        attribute: Attribute,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        skin: u64,
        non_skin: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeConfig {
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    nodes: Vec<TreeNode>,
}

/// Sum of squared class counts over a node's size, kept as a fraction.
/// For a partition into children, `sum_children (a^2 + b^2) / n_child` is
/// `n - weighted Gini`, so larger is purer.
#[derive(Clone, Copy, Debug)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of_node(skin: u64, non: u64) -> Self {
        let (a, b) = (u128::from(skin), u128::from(non));
        Self {
            num: a * a + b * b,
            den: a + b,
        }
    }

    fn of_split(left: [u64; 2], right: [u64; 2]) -> Self {
        let l = Self::of_node(left[0], left[1]);
        let r = Self::of_node(right[0], right[1]);
        Self {
            num: l.num * r.den + r.num * l.den,
            den: l.den * r.den,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// A chosen split of one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub attribute: Attribute,
    pub threshold: f64,
}

fn class_counts<'a>(samples: impl Iterator<Item = &'a HsvSample>) -> [u64; 2] {
    let mut c = [0u64; 2];
    for s in samples {
        c[s.label.index()] += 1;
    }
    c
}

/// Best split of `samples` by Gini decrease, or `None` when every sample
/// carries the same `(h, s, v)` on all attributes that vary (no candidate).
fn best_split(samples: &[HsvSample]) -> Option<SplitChoice> {
    let total = class_counts(samples.iter());
    let mut best: Option<(Purity, SplitChoice)> = None;
    for attribute in Attribute::ALL {
        let mut hist = [[0u64; 2]; 256];
        for s in samples {
            hist[attribute.of(s.pixel) as usize][s.label.index()] += 1;
        }
        let mut left = [0u64; 2];
        let mut prev: Option<usize> = None;
        for (value, counts) in hist.iter().enumerate() {
            if counts[0] + counts[1] == 0 {
                continue;
            }
            if let Some(p) = prev {
                let right = [total[0] - left[0], total[1] - left[1]];
                let purity = Purity::of_split(left, right);
                let better = match &best {
                    None => true,
                    Some((b, _)) => purity.cmp(b) == Ordering::Greater,
                };
                if better {
                    let threshold = (p + value) as f64 / 2.0;
                    best = Some((purity, SplitChoice { attribute, threshold }));
                }
            }
            left[0] += counts[0];
            left[1] += counts[1];
            prev = Some(value);
        }
    }
    best.map(|(_, choice)| choice)
}

impl TreeModel {
    pub fn fit(train: &[HsvSample], cfg: &TreeConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if cfg.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }

        struct Task {
            lo: usize,
            hi: usize,
            depth: usize,
            // Parent split whose right-child index must be patched.
            patch_right_of: Option<usize>,
        }

        let mut samples = train.to_vec();
        let mut nodes = Vec::new();
        let mut stack = vec![Task {
            lo: 0,
            hi: samples.len(),
            depth: 0,
            patch_right_of: None,
        }];
        while let Some(task) = stack.pop() {
            let idx = nodes.len();
            if let Some(parent) = task.patch_right_of {
                if let TreeNode::Split { right, .. } = &mut nodes[parent] {
                    *right = idx;
                }
            }
            let slice = &mut samples[task.lo..task.hi];
            let [skin, non_skin] = class_counts(slice.iter());
            let leaf = TreeNode::Leaf { skin, non_skin };
            let can_split = skin > 0
                && non_skin > 0
                && slice.len() >= cfg.min_samples_split
                && cfg.max_depth.is_none_or(|d| task.depth < d);
            let choice = if can_split { best_split(slice) } else { None };
            let Some(choice) = choice else {
                nodes.push(leaf);
                continue;
            };

            // Stable partition: left part keeps `value <= threshold`.
            let (mut lefts, rights): (Vec<HsvSample>, Vec<HsvSample>) = slice
                .iter()
                .partition(|s| f64::from(choice.attribute.of(s.pixel)) <= choice.threshold);
            let mid = task.lo + lefts.len();
            lefts.extend(rights);
            slice.copy_from_slice(&lefts);

            nodes.push(TreeNode::Split {
                attribute: choice.attribute,
                threshold: choice.threshold,
                left: idx + 1,
                right: usize::MAX,
            });
            stack.push(Task {
                lo: mid,
                hi: task.hi,
                depth: task.depth + 1,
                patch_right_of: Some(idx),
            });
            stack.push(Task {
                lo: task.lo,
                hi: mid,
                depth: task.depth + 1,
                patch_right_of: None,
            });
        }
        Ok(Self { nodes })
    }

    /// Rebuilds a tree from a preorder node list with explicit child links.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Config("tree has no nodes".into()));
        }
        // Every non-root node must be referenced exactly once, by an
        // earlier split, so the links form a tree rooted at 0.
        let mut referenced = vec![false; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, threshold, .. } = *node {
                if !threshold.is_finite() {
                    return Err(Error::Config(format!("node {i} has a non-finite threshold")));
                }
                for child in [left, right] {
                    if child <= i || child >= nodes.len() || referenced[child] {
                        return Err(Error::Config(format!("node {i} has an invalid child link {child}")));
                    }
                    referenced[child] = true;
                }
            }
        }
        if referenced.iter().skip(1).any(|r| !r) {
            return Err(Error::Config("tree contains unreachable nodes".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            if let TreeNode::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn leaf_for(&self, p: HsvPixel) -> (u64, u64) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                } => {
                    i = if f64::from(attribute.of(p)) <= threshold { left } else { right };
                }
                TreeNode::Leaf { skin, non_skin } => return (skin, non_skin),
            }
        }
    }

    pub fn predict(&self, p: HsvPixel) -> ClassProbabilities {
        let (skin, non_skin) = self.leaf_for(p);
        ClassProbabilities::from_scores(skin as f64, non_skin as f64).unwrap_or(ClassProbabilities::from_skin(0.5))
    }
}

impl PixelClassifier for TreeModel {
    fn classify(&self, pixel: RgbPixel) -> ClassProbabilities {
        self.predict(rgb_to_hsv(pixel))
    }
}

/// Predicted label for every sample, for training-accuracy checks.
pub fn training_accuracy(model: &TreeModel, samples: &[HsvSample]) -> f64 {
    let hits = samples
        .iter()
        .filter(|s| model.predict(s.pixel).label() == s.label)
        .count();
    hits as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;
    use crate::dataset::Label;

    fn sample(h: u8, s: u8, v: u8, skin: bool) -> HsvSample {
        HsvSample {
            pixel: HsvPixel::new(h, s, v),
            label: if skin { Label::Skin } else { Label::NonSkin },
        }
    }

    fn gini(skin: f64, non: f64) -> f64 {
        let n = skin + non;
        1.0 - (skin / n).powi(2) - (non / n).powi(2)
    }

    /// Tries every (attribute, midpoint) pair and scores it by Gini decrease.
    /// Decreases within 1e-12 of the best count as ties.
    fn brute_root_split(samples: &[HsvSample]) -> Option<(Attribute, f64)> {
        let count = |it: &mut dyn Iterator<Item = &HsvSample>| {
            it.fold((0.0, 0.0), |(a, b), s| if s.label.is_skin() { (a + 1.0, b) } else { (a, b + 1.0) })
        };
        let (ps, pn) = count(&mut samples.iter());
        let parent = gini(ps, pn);
        let n = samples.len() as f64;
        let mut candidates = Vec::new();
        for attr in Attribute::ALL {
            let mut values: Vec<u8> = samples.iter().map(|s| attr.of(s.pixel)).collect();
            values.sort_unstable();
            values.dedup();
            for w in values.windows(2) {
                let t = (w[0] as f64 + w[1] as f64) / 2.0;
                let (ls, ln) = count(&mut samples.iter().filter(|s| attr.of(s.pixel) as f64 <= t));
                let (rs, rn) = count(&mut samples.iter().filter(|s| attr.of(s.pixel) as f64 > t));
                let child = (ls + ln) / n * gini(ls, ln) + (rs + rn) / n * gini(rs, rn);
                candidates.push((parent - child, attr, t));
            }
        }
        let best = candidates.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        candidates
            .into_iter()
            .filter(|c| c.0 >= best - 1e-12)
            .map(|c| (c.1, c.2))
            .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
    }

    #[test]
    fn separable_hue_gives_single_root_split() {
        let mut train: Vec<_> = (0..=10).map(|h| sample(h, 50, 50, true)).collect();
        train.extend((200..=210).map(|h| sample(h, 50, 50, false)));
        let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes().len(), 3);
        match *tree.root() {
            TreeNode::Split { attribute, threshold, left, right } => {
                assert_eq!(attribute, Attribute::Hue);
                assert_eq!(threshold, 105.0);
                assert_eq!(tree.nodes()[left], TreeNode::Leaf { skin: 11, non_skin: 0 });
                assert_eq!(tree.nodes()[right], TreeNode::Leaf { skin: 0, non_skin: 11 });
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn pure_input_is_a_single_leaf() {
        let train = vec![sample(1, 2, 3, true), sample(9, 9, 9, true)];
        let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes(), &[TreeNode::Leaf { skin: 2, non_skin: 0 }]);
        assert_eq!(tree.predict(HsvPixel::new(100, 100, 100)), ClassProbabilities::SKIN);
    }

    #[test]
    fn leaf_frequencies_are_probabilities() {
        let tree = TreeModel::from_nodes(vec![TreeNode::Leaf { skin: 3, non_skin: 1 }]).unwrap();
        assert_eq!(tree.predict(HsvPixel::new(7, 7, 7)), ClassProbabilities { p_skin: 0.75, p_non_skin: 0.25 });
    }

    #[test]
    fn six_sample_root_matches_enumeration() {
        let train = vec![
            sample(10, 200, 30, true),
            sample(20, 180, 90, true),
            sample(30, 40, 60, false),
            sample(15, 60, 200, false),
            sample(40, 190, 120, true),
            sample(25, 50, 10, false),
        ];
        let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
        let TreeNode::Split { attribute, threshold, .. } = *tree.root() else {
            panic!("expected a split");
        };
        assert_eq!(Some((attribute, threshold)), brute_root_split(&train));
        // s <= 120 separates perfectly
        assert_eq!((attribute, threshold), (Attribute::Saturation, 120.0));
    }

    #[test]
    fn xor_layout_still_grows_to_purity() {
        // No single split lowers Gini here; the tree must still split.
        let train = vec![
            sample(0, 0, 0, true),
            sample(1, 1, 0, true),
            sample(0, 1, 0, false),
            sample(1, 0, 0, false),
        ];
        let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
        assert_eq!(training_accuracy(&tree, &train), 1.0);
    }

    #[test]
    fn from_nodes_rejects_bad_links() {
        let bad = vec![
            TreeNode::Split { attribute: Attribute::Hue, threshold: 1.5, left: 1, right: 1 },
            TreeNode::Leaf { skin: 1, non_skin: 0 },
        ];
        assert!(TreeModel::from_nodes(bad).is_err());
        assert!(TreeModel::from_nodes(vec![]).is_err());
    }

    fn small_samples() -> impl Strategy<Value = Vec<HsvSample>> {
        prop::collection::vec((0u8..6, 0u8..6, 0u8..6, any::<bool>()), 1..80)
            .prop_map(|v| v.into_iter().map(|(h, s, vv, k)| sample(h, s, vv, k)).collect())
    }

    fn consistent(samples: &[HsvSample]) -> bool {
        let mut seen: HashMap<HsvPixel, Label> = HashMap::new();
        samples.iter().all(|s| *seen.entry(s.pixel).or_insert(s.label) == s.label)
    }

    proptest! {
        #[test]
        fn root_split_matches_enumeration(train in small_samples()) {
            let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
            match *tree.root() {
                TreeNode::Split { attribute, threshold, .. } => {
                    prop_assert_eq!(Some((attribute, threshold)), brute_root_split(&train));
                }
                TreeNode::Leaf { skin, non_skin } => {
                    prop_assert!(skin == 0 || non_skin == 0 || brute_root_split(&train).is_none());
                }
            }
        }

        #[test]
        fn leaf_counts_cover_training_set(train in small_samples()) {
            let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
            let total: u64 = tree.nodes().iter().map(|n| match n {
                TreeNode::Leaf { skin, non_skin } => skin + non_skin,
                _ => 0,
            }).sum();
            prop_assert_eq!(total as usize, train.len());
        }

        #[test]
        fn fully_grown_tree_recovers_consistent_labels(train in small_samples()) {
            prop_assume!(consistent(&train));
            let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
            prop_assert_eq!(training_accuracy(&tree, &train), 1.0);
        }

        #[test]
        fn deeper_is_never_worse_on_training_data(train in small_samples()) {
            let mut prev = 0.0;
            for depth in 0..8 {
                let cfg = TreeConfig { max_depth: Some(depth), ..TreeConfig::default() };
                let acc = training_accuracy(&TreeModel::fit(&train, &cfg).unwrap(), &train);
                prop_assert!(acc >= prev - 1e-12);
                prev = acc;
            }
        }

        #[test]
        fn predictions_sum_to_one(train in small_samples(), q in any::<(u8, u8, u8)>()) {
            let tree = TreeModel::fit(&train, &TreeConfig::default()).unwrap();
            let p = tree.predict(HsvPixel::new(q.0, q.1, q.2));
            prop_assert!((p.p_skin + p.p_non_skin - 1.0).abs() < 1e-9);
        }
    }
}
