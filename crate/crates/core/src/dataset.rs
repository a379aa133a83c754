//! The UCI "Skin Segmentation" sample file and train/test splitting.
//!
//! The file holds one sample per line: four whitespace-separated integers
//! `B G R label`, where label `1` is skin and `2` is non-skin.

use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::colorspace::{rgb_to_hsv, HsvPixel, RgbPixel};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Skin,
    NonSkin,
}

impl Label {
    /// Code used by the UCI file.
    pub const fn code(self) -> u8 {
        match self {
            Label::Skin => 1,
            Label::NonSkin => 2,
        }
    }

    pub const fn is_skin(self) -> bool {
        matches!(self, Label::Skin)
    }

    /// Index used by per-class tables: skin = 0, non-skin = 1.
    pub const fn index(self) -> usize {
        match self {
            Label::Skin => 0,
            Label::NonSkin => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Skin => "skin",
            Label::NonSkin => "non-skin",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RawSample {
    pub b: u8,
    pub g: u8,
    pub r: u8,
    pub label: Label,
}

impl RawSample {
    pub fn rgb(&self) -> RgbPixel {
        RgbPixel::new(self.r, self.g, self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HsvSample {
    pub pixel: HsvPixel,
    pub label: Label,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub skin: usize,
    pub non_skin: usize,
}

impl ClassCounts {
    pub fn from_labels(labels: impl IntoIterator<Item = Label>) -> Self {
        labels.into_iter().fold(Self::default(), |mut acc, l| {
            match l {
                Label::Skin => acc.skin += 1,
                Label::NonSkin => acc.non_skin += 1,
            }
            acc
        })
    }

    pub fn total(&self) -> usize {
        self.skin + self.non_skin
    }
}

fn parse_channel(field: &str, line: usize) -> Result<u8> {
    field.parse::<u8>().map_err(|_| Error::Parse {
        line,
        message: format!("channel value {field:?} is not an integer in 0..=255"),
    })
}

/// Parses a UCI sample stream. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_uci<R: BufRead>(reader: R) -> Result<Vec<RawSample>> {
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields (B G R label), found {}", fields.len()),
            });
        }
        let b = parse_channel(fields[0], line_no)?;
        let g = parse_channel(fields[1], line_no)?;
        let r = parse_channel(fields[2], line_no)?;
        let label = match fields[3] {
            "1" => Label::Skin,
            "2" => Label::NonSkin,
            other => {
                return Err(Error::InvalidLabel {
                    line: line_no,
                    code: other.to_string(),
                })
            }
        };
        samples.push(RawSample { b, g, r, label });
    }
    Ok(samples)
}

/// Writes samples in the tab-separated layout of the distributed file.
pub fn write_uci<W: Write>(samples: &[RawSample], mut out: W) -> std::io::Result<()> {
    for s in samples {
        writeln!(out, "{}\t{}\t{}\t{}", s.b, s.g, s.r, s.label.code())?;
    }
    Ok(())
}

pub fn to_hsv_samples(raw: &[RawSample]) -> Vec<HsvSample> {
    raw.iter()
        .map(|s| HsvSample {
            pixel: rgb_to_hsv(s.rgb()),
            label: s.label,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.30,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.test_fraction > 0.0 && self.test_fraction < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidTestFraction(self.test_fraction))
        }
    }
}

/// `(train, test)` sizes for `n` samples.
///
/// The training set gets `floor(n * (1 - fraction))` samples and the test
/// set the remainder, i.e. `ceil(n * fraction)`. Products within 1e-9 of an
/// integer are snapped to it so that decimal fractions such as 0.3 do not
/// pick up a sample from binary rounding. Both sides always keep at least
/// one sample.
pub fn split_sizes(n: usize, test_fraction: f64) -> Result<(usize, usize)> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    SplitConfig {
        test_fraction,
        seed: 0,
    }
    .validate()?;
    let exact = n as f64 * test_fraction;
    let nearest = exact.round();
    let test = if (exact - nearest).abs() <= 1e-9 * n as f64 {
        nearest
    } else {
        exact.ceil()
    } as usize;
    let test = test.clamp(1, n - 1);
    Ok((n - test, test))
}

/// Seeded uniform shuffle followed by a cut: the first part of the shuffled
/// sequence is the training set, the rest the test set.
pub fn split<T: Clone>(samples: &[T], cfg: &SplitConfig) -> Result<(Vec<T>, Vec<T>)> {
    let (n_train, _) = split_sizes(samples.len(), cfg.test_fraction)?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng::seeded(cfg.seed));
    let train = order[..n_train].iter().map(|&i| samples[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| samples[i].clone()).collect();
    Ok((train, test))
}
