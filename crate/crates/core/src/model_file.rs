//! Versioned plain-text model files.
//!
//! ```text
//! skinseg-model
//! format_version = 1
//! model_kind = tree
//! seed = 7
//! test_fraction = 3.0000000000000000e-1
//! training_fingerprint = 5f1c...
//! <kind-specific body>
//! end
//! ```
//!
//! Every line is `key = value`, in a fixed order. Reals are written in
//! scientific notation with 17 significant digits, which round-trips any
//! `f64` exactly.
//!
//! Bodies:
//!
//! * threshold: `lower = Y Cr Cb`, `upper = Y Cr Cb`
//! * bayes: `variant`, `alpha`, `priors`, `class_totals`, six
//!   `counts.<class>.<attribute>` lines of 256 counts, then
//!   `joint_entries = n` and `n` lines `joint = h s v skin non_skin`
//! * tree: `nodes = n`, then `n` preorder lines, either
//!   `node = split <h|s|v> <threshold>` or `node = leaf <skin> <non_skin>`
//! * mlp: `widths = 3 ... 2`, then `layer.<i>.weights` (row-major,
//!   outputs x inputs) and `layer.<i>.bias` for every layer

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::classifiers::bayes::VALUES_PER_ATTRIBUTE;
use crate::classifiers::{Attribute, BayesModel, BayesVariant, ThresholdRange, TreeModel, TreeNode};
use crate::colorspace::{HsvPixel, YcbcrPixel};
use crate::dataset::{write_uci, RawSample};
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind};
use crate::nn::{MlpArchitecture, MlpModel};

pub const MAGIC: &str = "skinseg-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelHeader {
    pub seed: u64,
    pub test_fraction: f64,
    pub training_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub header: ModelHeader,
    pub model: Model,
}

/// SHA-256 over the samples in their UCI text form, hex encoded.
pub fn training_fingerprint(samples: &[RawSample]) -> String {
    let mut buf = Vec::with_capacity(samples.len() * 12);
    write_uci(samples, &mut buf).expect("writing to a Vec cannot fail");
    hex::encode(Sha256::digest(&buf))
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

const CLASS_NAMES: [&str; 2] = ["skin", "non_skin"];

impl ModelFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("format_version", FORMAT_VERSION.to_string());
        kv("model_kind", self.model.kind().to_string());
        kv("seed", self.header.seed.to_string());
        kv("test_fraction", real(self.header.test_fraction));
        kv("training_fingerprint", self.header.training_fingerprint.clone());

        match &self.model {
            Model::Threshold(range) => {
                kv("lower", join([range.lower.y, range.lower.cr, range.lower.cb]));
                kv("upper", join([range.upper.y, range.upper.cr, range.upper.cb]));
            }
            Model::Bayes(m) => {
                let variant = match m.variant() {
                    BayesVariant::Naive => "naive",
                    BayesVariant::Joint => "joint",
                };
                kv("variant", variant.to_string());
                kv("alpha", real(m.alpha()));
                kv(
                    "priors",
                    format!("{} {}", real(m.prior(crate::Label::Skin)), real(m.prior(crate::Label::NonSkin))),
                );
                kv("class_totals", join(m.class_totals()));
                for (class, tables) in m.counts().iter().enumerate() {
                    for attr in Attribute::ALL {
                        kv(
                            &format!("counts.{}.{}", CLASS_NAMES[class], attr.symbol()),
                            join(tables[attr.index()]),
                        );
                    }
                }
                kv("joint_entries", m.joint_counts().len().to_string());
                for (p, c) in m.joint_counts() {
                    kv("joint", join([u64::from(p.h), u64::from(p.s), u64::from(p.v), c[0], c[1]]));
                }
            }
            Model::Tree(t) => {
                kv("nodes", t.nodes().len().to_string());
                for node in t.nodes() {
                    let line = match node {
                        TreeNode::Split { attribute, threshold, .. } => {
                            format!("split {} {}", attribute.symbol(), real(*threshold))
                        }
                        TreeNode::Leaf { skin, non_skin } => format!("leaf {skin} {non_skin}"),
                    };
                    kv("node", line);
                }
            }
            Model::Mlp(m) => {
                kv("widths", join(m.widths()));
                for i in 0..m.layer_count() {
                    let layer = m.layer(i);
                    kv(&format!("layer.{i}.weights"), join(layer.weights.iter().map(|&w| real(w))));
                    kv(&format!("layer.{i}.bias"), join(layer.bias.iter().map(|&b| real(b))));
                }
            }
        }
        out.insert_str(0, &format!("{MAGIC}\n"));
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        if r.next_line()? != MAGIC {
            return Err(r.error("not a skinseg model file"));
        }
        let version: u32 = r.parse_value("format_version")?;
        if version != FORMAT_VERSION {
            return Err(r.error(&format!("unsupported format_version {version}")));
        }
        let kind: ModelKind = r
            .value("model_kind")?
            .parse()
            .map_err(|e: String| r.error(&e))?;
        let header = ModelHeader {
            seed: r.parse_value("seed")?,
            test_fraction: r.parse_value("test_fraction")?,
            training_fingerprint: r.value("training_fingerprint")?.to_string(),
        };

        let model = match kind {
            ModelKind::Threshold => {
                let lower = r.triple("lower")?;
                let upper = r.triple("upper")?;
                let range = ThresholdRange {
                    lower: YcbcrPixel::new(lower[0], lower[1], lower[2]),
                    upper: YcbcrPixel::new(upper[0], upper[1], upper[2]),
                };
                if !range.is_valid() {
                    return Err(r.error("threshold lower bound exceeds upper bound"));
                }
                Model::Threshold(range)
            }
            ModelKind::Bayes => Model::Bayes(read_bayes(&mut r)?),
            ModelKind::Tree => Model::Tree(read_tree(&mut r)?),
            ModelKind::Mlp => Model::Mlp(read_mlp(&mut r)?),
        };
        if r.next_line()? != "end" {
            return Err(r.error("expected `end`"));
        }
        Ok(Self { header, model })
    }
}

fn read_bayes(r: &mut Reader<'_>) -> Result<BayesModel> {
    let variant = match r.value("variant")? {
        "naive" => BayesVariant::Naive,
        "joint" => BayesVariant::Joint,
        other => return Err(r.error(&format!("unknown Bayes variant {other:?}"))),
    };
    let alpha: f64 = r.parse_value("alpha")?;
    // Priors are derived from the class totals; the stored pair is checked.
    let priors: Vec<f64> = r.list("priors")?;
    let totals: Vec<u64> = r.list("class_totals")?;
    if priors.len() != 2 || totals.len() != 2 {
        return Err(r.error("priors and class_totals need two values"));
    }
    let mut counts = [[[0u64; VALUES_PER_ATTRIBUTE]; 3]; 2];
    for (class, tables) in counts.iter_mut().enumerate() {
        for attr in Attribute::ALL {
            let key = format!("counts.{}.{}", CLASS_NAMES[class], attr.symbol());
            let row: Vec<u64> = r.list(&key)?;
            if row.len() != VALUES_PER_ATTRIBUTE {
                return Err(r.error(&format!("{key} needs {VALUES_PER_ATTRIBUTE} counts")));
            }
            tables[attr.index()].copy_from_slice(&row);
        }
    }
    let n: usize = r.parse_value("joint_entries")?;
    let mut joint = BTreeMap::new();
    for _ in 0..n {
        let e: Vec<u64> = r.list("joint")?;
        if e.len() != 5 || e[..3].iter().any(|&v| v > 255) {
            return Err(r.error("joint entry must be `h s v skin non_skin`"));
        }
        joint.insert(HsvPixel::new(e[0] as u8, e[1] as u8, e[2] as u8), [e[3], e[4]]);
    }
    let model = BayesModel::from_parts(alpha, variant, counts, [totals[0], totals[1]], joint)
        .map_err(|e| r.error(&e.to_string()))?;
    let stored_ok = [crate::Label::Skin, crate::Label::NonSkin]
        .iter()
        .zip(&priors)
        .all(|(&l, &p)| model.prior(l) == p);
    if !stored_ok {
        return Err(r.error("priors do not match class totals"));
    }
    Ok(model)
}

fn read_tree(r: &mut Reader<'_>) -> Result<TreeModel> {
    let n: usize = r.parse_value("nodes")?;
    if n == 0 {
        return Err(r.error("tree needs at least one node"));
    }
    let mut nodes: Vec<TreeNode> = Vec::with_capacity(n.min(1 << 20));
    // Splits still waiting for their right child.
    let mut pending: Vec<usize> = Vec::new();
    for i in 0..n {
        let line = r.value("node")?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let node = match fields.as_slice() {
            ["split", attr, threshold] => TreeNode::Split {
                attribute: Attribute::from_symbol(attr).ok_or_else(|| r.error("unknown split attribute"))?,
                threshold: threshold.parse().map_err(|_| r.error("bad split threshold"))?,
                left: i + 1,
                right: usize::MAX,
            },
            ["leaf", skin, non] => TreeNode::Leaf {
                skin: skin.parse().map_err(|_| r.error("bad leaf count"))?,
                non_skin: non.parse().map_err(|_| r.error("bad leaf count"))?,
            },
            _ => return Err(r.error("node must be `split <attr> <threshold>` or `leaf <skin> <non_skin>`")),
        };
        if i > 0 && matches!(nodes[i - 1], TreeNode::Leaf { .. }) {
            let parent = pending.pop().ok_or_else(|| r.error("node after a complete tree"))?;
            if let TreeNode::Split { right, .. } = &mut nodes[parent] {
                *right = i;
            }
        }
        if matches!(node, TreeNode::Split { .. }) {
            pending.push(i);
        }
        nodes.push(node);
    }
    if !pending.is_empty() || matches!(nodes.last(), Some(TreeNode::Split { .. })) {
        return Err(r.error("tree node list ends inside a subtree"));
    }
    TreeModel::from_nodes(nodes).map_err(|e| r.error(&e.to_string()))
}

fn read_mlp(r: &mut Reader<'_>) -> Result<MlpModel> {
    let widths: Vec<usize> = r.list("widths")?;
    if widths.len() < 3 || widths[0] != crate::nn::INPUT_DIM || widths[widths.len() - 1] != crate::nn::OUTPUT_DIM {
        return Err(r.error("widths must start with 3, end with 2 and include a hidden layer"));
    }
    let arch = MlpArchitecture::new(widths[1..widths.len() - 1].to_vec()).map_err(|e| r.error(&e.to_string()))?;
    let mut params = Vec::new();
    for (i, w) in widths.windows(2).enumerate() {
        let weights: Vec<f64> = r.list(&format!("layer.{i}.weights"))?;
        let bias: Vec<f64> = r.list(&format!("layer.{i}.bias"))?;
        if weights.len() != w[0] * w[1] || bias.len() != w[1] {
            return Err(r.error(&format!("layer {i} has the wrong number of parameters")));
        }
        params.extend(weights);
        params.extend(bias);
    }
    MlpModel::from_params(&arch, params).map_err(|e| r.error(&e.to_string()))
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::ModelFile {
            line: self.line,
            message: message.to_string(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end())
            }
            None => {
                self.line += 1;
                Err(self.error("unexpected end of file"))
            }
        }
    }

    fn value(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(" = ") {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.error(&format!("expected `{key} = ...`"))),
        }
    }

    fn parse_value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.value(key)?;
        v.parse().map_err(|_| self.error(&format!("bad value for {key}: {v:?}")))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let v = self.value(key)?;
        v.split_whitespace()
            .map(|t| t.parse().map_err(|_| self.error(&format!("bad entry in {key}: {t:?}"))))
            .collect()
    }

    fn triple(&mut self, key: &str) -> Result<[u8; 3]> {
        let v: Vec<u8> = self.list(key)?;
        v.try_into().map_err(|_| self.error(&format!("{key} needs three 0..=255 values")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{PixelClassifier, TreeConfig};
    use crate::dataset::{HsvSample, Label};
    use crate::nn::{MlpArchitecture, TrainConfig};
    use crate::{rng, RgbPixel};
    use rand::Rng;

    fn header() -> ModelHeader {
        ModelHeader {
            seed: 7,
            test_fraction: 0.3,
            training_fingerprint: training_fingerprint(&[]),
        }
    }

    fn training_set() -> Vec<HsvSample> {
        let mut rng = rng::seeded(1);
        (0..400)
            .map(|_| {
                let pixel = HsvPixel::new(rng.random(), rng.random(), rng.random());
                let label = if pixel.h < 40 && pixel.s > 60 { Label::Skin } else { Label::NonSkin };
                HsvSample { pixel, label }
            })
            .collect()
    }

    fn all_models() -> Vec<Model> {
        let train = training_set();
        let joint = crate::classifiers::BayesConfig { alpha: 0.5, variant: BayesVariant::Joint };
        vec![
            Model::Threshold(ThresholdRange::default()),
            Model::Bayes(BayesModel::fit(&train, 1.0).unwrap()),
            Model::Bayes(BayesModel::fit_with(&train, &joint).unwrap()),
            Model::Tree(TreeModel::fit(&train, &TreeConfig::default()).unwrap()),
            Model::Mlp(
                crate::nn::train(&train, &MlpArchitecture::new(vec![6, 4]).unwrap(), &TrainConfig { epochs: 2, batch_size: 16, seed: 3 })
                    .unwrap()
                    .model,
            ),
        ]
    }

    #[test]
    fn every_kind_round_trips_with_identical_predictions() {
        let mut rng = rng::seeded(9);
        let probes: Vec<RgbPixel> = (0..10_000).map(|_| RgbPixel::new(rng.random(), rng.random(), rng.random())).collect();
        for model in all_models() {
            let file = ModelFile { header: header(), model };
            let text = file.to_text();
            let back = ModelFile::from_text(&text).unwrap();
            assert_eq!(back, file, "{}", file.model.kind());
            assert_eq!(back.to_text(), text);
            for &p in &probes {
                assert_eq!(back.model.classify(p), file.model.classify(p));
            }
        }
    }

    #[test]
    fn fingerprint_is_stable() {
        let s = [RawSample { b: 1, g: 2, r: 3, label: Label::Skin }];
        assert_eq!(training_fingerprint(&s), training_fingerprint(&s));
        assert_eq!(training_fingerprint(&s).len(), 64);
        assert_ne!(training_fingerprint(&s), training_fingerprint(&[]));
    }

    #[test]
    fn rejects_unknown_versions_and_kinds() {
        let text = ModelFile { header: header(), model: Model::Threshold(ThresholdRange::default()) }.to_text();
        let bad_version = text.replace("format_version = 1", "format_version = 9");
        assert!(matches!(ModelFile::from_text(&bad_version), Err(Error::ModelFile { line: 2, .. })));
        let bad_kind = text.replace("model_kind = threshold", "model_kind = forest");
        assert!(matches!(ModelFile::from_text(&bad_kind), Err(Error::ModelFile { line: 3, .. })));
        assert!(ModelFile::from_text("").is_err());
        assert!(ModelFile::from_text(&text.replace("end\n", "")).is_err());
    }

    #[test]
    fn rejects_inconsistent_bodies() {
        let m = Model::Bayes(BayesModel::fit(&training_set(), 1.0).unwrap());
        let text = ModelFile { header: header(), model: m }.to_text();
        let broken = text.replacen("class_totals = ", "class_totals = 1", 1);
        assert!(ModelFile::from_text(&broken).is_err());

        let tree = TreeModel::fit(&training_set(), &TreeConfig::default()).unwrap();
        let text = ModelFile { header: header(), model: Model::Tree(tree) }.to_text();
        let lines: Vec<&str> = text.lines().collect();
        let nodes_line = lines.iter().position(|l| l.starts_with("nodes = ")).unwrap();
        // Drop the last node but keep the declared count.
        let mut truncated: Vec<&str> = lines.clone();
        truncated.remove(lines.len() - 2);
        truncated.insert(nodes_line + 1, "node = split h 1.0e0");
        assert!(ModelFile::from_text(&(truncated.join("\n") + "\n")).is_err());
    }
}
