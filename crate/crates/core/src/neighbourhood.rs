//! Neighbourhood likeliness refinement of a stage-1 probability map.
//!
//! For a pixel with `c` in-bounds neighbours in the `(2r+1)^2` window
//! (centre excluded), let `S1` and `S2` be the sums of their skin and
//! non-skin probabilities. The likeliness pair is
//!
//! ```text
//! L1 = k1 / c * S1        L2 = k2 / c * S2        L1 + L2 = K
//! ```
//!
//! and the refined skin score is `P(colour = skin) * L1`, compared against
//! `P(colour = non-skin) * L2`.
//!
//! Two rules pick the constants:
//!
//! * [`RefinementRule::Symmetric`]: `k1 = k2 = K` for every pixel, so a
//!   pixel is skin iff `p * S1 >= (1 - p) * S2`. Isolated skin pixels are
//!   dropped and small holes are filled.
//! * [`RefinementRule::PaperLiteral`]: a pixel labelled skin in stage 1
//!   (`p >= tau`) gets `k1 = K * c / S1` and `k2 = 0`, i.e. `L1 = K`,
//!   `L2 = 0`; every other pixel gets `k1 = k2 = K`. This rule can only add
//!   skin pixels. A stage-1 skin pixel whose neighbours have `S1 = 0` gets
//!   `L1 = 0`.
//!
//! Likeliness is always computed from the input map (one synchronous
//! pass). A map without neighbours (1x1) falls back to the pixel's own
//! probabilities.

use rayon::prelude::*;

use crate::classifiers::ClassProbabilities;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    cells: Vec<ClassProbabilities>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, cells: Vec<ClassProbabilities>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("probability map must be non-empty, got {width}x{height}")));
        }
        if cells.len() != width * height {
            return Err(Error::LengthMismatch {
                left: cells.len(),
                right: width * height,
            });
        }
        for (i, c) in cells.iter().enumerate() {
            let valid = (0.0..=1.0).contains(&c.p_skin)
                && (0.0..=1.0).contains(&c.p_non_skin)
                && (c.p_skin + c.p_non_skin - 1.0).abs() <= 1e-9;
            if !valid {
                return Err(Error::Config(format!(
                    "cell {i} has invalid probabilities ({}, {})",
                    c.p_skin, c.p_non_skin
                )));
            }
        }
        Ok(Self { width, height, cells })
    }

    /// Builds a map from skin probabilities alone.
    pub fn from_skin(width: usize, height: usize, p_skin: &[f64]) -> Result<Self> {
        Self::new(width, height, p_skin.iter().map(|&p| ClassProbabilities::from_skin(p)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[ClassProbabilities] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> ClassProbabilities {
        self.cells[y * self.width + x]
    }

    /// Stage-1 argmax mask (skin wins ties).
    pub fn argmax_mask(&self) -> SkinMask {
        SkinMask {
            width: self.width,
            height: self.height,
            skin: self.cells.iter().map(|c| c.p_skin >= c.p_non_skin).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RefinementRule {
    PaperLiteral,
    #[default]
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighbourhoodConfig {
    pub radius: usize,
    /// Total likeliness `K = L1 + L2`.
    pub k: f64,
    pub rule: RefinementRule,
    /// Stage-1 skin cut used by [`RefinementRule::PaperLiteral`].
    pub tau: f64,
}

impl Default for NeighbourhoodConfig {
    fn default() -> Self {
        Self {
            radius: 1,
            k: 1.0,
            rule: RefinementRule::Symmetric,
            tau: 0.5,
        }
    }
}

impl NeighbourhoodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::Config("neighbourhood radius must be at least 1".into()));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("K must be positive, got {}", self.k)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkinMask {
    pub width: usize,
    pub height: usize,
    pub skin: Vec<bool>,
}

impl SkinMask {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.skin[y * self.width + x]
    }

    pub fn skin_count(&self) -> usize {
        self.skin.iter().filter(|s| **s).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighbourSums {
    pub s1: f64,
    pub s2: f64,
    pub c: usize,
}

/// Inclusive window bounds along one axis, clipped to `0..len`.
fn window(center: usize, radius: usize, len: usize) -> (usize, usize) {
    (center.saturating_sub(radius), (center + radius).min(len - 1))
}

pub fn neighbour_sums(map: &ProbabilityMap, x: usize, y: usize, radius: usize) -> Result<NeighbourSums> {
    if x >= map.width || y >= map.height {
        return Err(Error::OutOfBounds {
            x,
            y,
            width: map.width,
            height: map.height,
        });
    }
    let (x0, x1) = window(x, radius, map.width);
    let (y0, y1) = window(y, radius, map.height);
    let mut sums = NeighbourSums { s1: 0.0, s2: 0.0, c: 0 };
    for ny in y0..=y1 {
        for nx in x0..=x1 {
            if (nx, ny) != (x, y) {
                let cell = map.get(nx, ny);
                sums.s1 += cell.p_skin;
                sums.s2 += cell.p_non_skin;
                sums.c += 1;
            }
        }
    }
    Ok(sums)
}

/// `(L1, L2)` for one pixel under `cfg.rule`.
pub fn likeliness(s1: f64, s2: f64, c: usize, own: ClassProbabilities, cfg: &NeighbourhoodConfig) -> (f64, f64) {
    if c == 0 {
        return (own.p_skin, own.p_non_skin);
    }
    let c = c as f64;
    match cfg.rule {
        RefinementRule::PaperLiteral if own.p_skin >= cfg.tau => {
            if s1 > 0.0 {
                (cfg.k, 0.0)
            } else {
                (0.0, 0.0)
            }
        }
        _ => (cfg.k * s1 / c, cfg.k * s2 / c),
    }
}

/// Combines stage-1 probabilities with likeliness: returns the refined
/// pair and the skin decision `p * L1 >= q * L2`.
fn combine(own: ClassProbabilities, l1: f64, l2: f64) -> (ClassProbabilities, bool) {
    let skin = own.p_skin * l1;
    let non = own.p_non_skin * l2;
    (ClassProbabilities::from_scores(skin, non).unwrap_or(own), skin >= non)
}

/// One refinement pass over the whole map.
///
/// Window sums are accumulated in row-major window order with the centre
/// skipped, so they are reproducible bit for bit. Rows are processed in
/// parallel; the result does not depend on the thread count.
pub fn refine(map: &ProbabilityMap, cfg: &NeighbourhoodConfig) -> Result<(ProbabilityMap, SkinMask)> {
    cfg.validate()?;
    let (w, h, r) = (map.width, map.height, cfg.radius);
    let mut cells = vec![ClassProbabilities::SKIN; w * h];
    let mut skin = vec![false; w * h];
    cells
        .par_chunks_mut(w)
        .zip(skin.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (cell_row, skin_row))| {
            let (y0, y1) = window(y, r, h);
            for x in 0..w {
                let (x0, x1) = window(x, r, w);
                let (mut s1, mut s2) = (0.0, 0.0);
                for ny in y0..=y1 {
                    let row = &map.cells[ny * w..(ny + 1) * w];
                    for (nx, n) in row.iter().enumerate().take(x1 + 1).skip(x0) {
                        if (nx, ny) != (x, y) {
                            s1 += n.p_skin;
                            s2 += n.p_non_skin;
                        }
                    }
                }
                let c = (x1 - x0 + 1) * (y1 - y0 + 1) - 1;
                let own = map.cells[y * w + x];
                let (l1, l2) = likeliness(s1, s2, c, own, cfg);
                let (refined, is_skin) = combine(own, l1, l2);
                cell_row[x] = refined;
                skin_row[x] = is_skin;
            }
        });

    let mask = SkinMask { width: w, height: h, skin };
    Ok((ProbabilityMap { width: w, height: h, cells }, mask))
}

pub mod reference {
    //! Naive per-pixel refinement used to cross-check [`super::refine`].
    //! Shares no code with it beyond the data types.

    use super::{NeighbourhoodConfig, ProbabilityMap, RefinementRule, SkinMask};

    pub fn refine_brute_oracle(map: &ProbabilityMap, cfg: &NeighbourhoodConfig) -> SkinMask {
        let (w, h) = (map.width() as i64, map.height() as i64);
        let r = cfg.radius as i64;
        let mut skin = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                let own = map.cells()[(y * w + x) as usize];
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                let mut c = 0usize;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (nx, ny) = (x + dx, y + dy);
                        if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let n = map.cells()[(ny * w + nx) as usize];
                        s1 += n.p_skin;
                        s2 += n.p_non_skin;
                        c += 1;
                    }
                }
                let (l1, l2) = if c == 0 {
                    (own.p_skin, own.p_non_skin)
                } else if cfg.rule == RefinementRule::PaperLiteral && own.p_skin >= cfg.tau {
                    if s1 == 0.0 {
                        (0.0, 0.0)
                    } else {
                        (cfg.k * c as f64 / s1 * s1 / c as f64, 0.0)
                    }
                } else {
                    (cfg.k * s1 / c as f64, cfg.k * s2 / c as f64)
                };
                skin.push(own.p_skin * l1 >= own.p_non_skin * l2);
            }
        }
        SkinMask {
            width: map.width(),
            height: map.height(),
            skin,
        }
    }
}
