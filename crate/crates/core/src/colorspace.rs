//! 8-bit RGB to quantized HSV and full-range YCrCb.
//!
//! Both conversions are evaluated in exact integer arithmetic and rounded
//! half-up, so results are bit-identical on every platform.

use std::fmt;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RgbPixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl RgbPixel {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

impl fmt::Display for RgbPixel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rgb({}, {}, {})", self.r, self.g, self.b)
    }
}

/// HSV with every channel quantized onto `0..=255`.
///
/// Hue is scaled from degrees `[0, 360)` onto `[0, 255]`, so all three
/// attributes share one 256-value domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HsvPixel {
    pub h: u8,
    pub s: u8,
    pub v: u8,
}

impl HsvPixel {
    pub const fn new(h: u8, s: u8, v: u8) -> Self {
        Self { h, s, v }
    }

    /// Channels in attribute order `[h, s, v]`.
    pub const fn channels(self) -> [u8; 3] {
        [self.h, self.s, self.v]
    }
}

/// Full-range BT.601 luma and chroma, stored in `(Y, Cr, Cb)` order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct YcbcrPixel {
    pub y: u8,
    pub cr: u8,
    pub cb: u8,
}

impl YcbcrPixel {
    pub const fn new(y: u8, cr: u8, cb: u8) -> Self {
        Self { y, cr, cb }
    }
}

/// Rounds `num / den` half-up for non-negative `den`.
fn div_round_half_up(num: i64, den: i64) -> i64 {
    (2 * num + den).div_euclid(2 * den)
}

fn clamp_u8(v: i64) -> u8 {
    v.clamp(0, 255) as u8
}

/// Converts to HSV: `H` in degrees from the max-channel sector formula,
/// `S = chroma / max`, `V = max / 255`, each then mapped onto `0..=255`
/// with round-half-up. Black and greys have `s = 0` and `h = 0`.
pub fn rgb_to_hsv(p: RgbPixel) -> HsvPixel {
    let (r, g, b) = (i64::from(p.r), i64::from(p.g), i64::from(p.b));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;

    let h = if chroma == 0 {
        0
    } else {
        // H / 60 = sector / chroma, with sector in [0, 6 * chroma).
        let sector = if max == r {
            (g - b).rem_euclid(6 * chroma)
        } else if max == g {
            (b - r) + 2 * chroma
        } else {
            (r - g) + 4 * chroma
        };
        // h = H / 360 * 255 = sector * 255 / (6 * chroma)
        div_round_half_up(sector * 255, 6 * chroma)
    };
    let s = if max == 0 {
        0
    } else {
        div_round_half_up(chroma * 255, max)
    };

    HsvPixel {
        h: clamp_u8(h),
        s: clamp_u8(s),
        v: max as u8,
    }
}

/// Full-range BT.601: `Y = 0.299R + 0.587G + 0.114B`,
/// `Cr = 0.713 (R - Y) + 128`, `Cb = 0.564 (B - Y) + 128`.
///
/// Evaluated with the coefficients scaled to integers (Y in thousandths,
/// chroma in millionths) so rounding is exact; `Y` is not rounded before
/// it feeds the chroma terms.
pub fn rgb_to_ycbcr(p: RgbPixel) -> YcbcrPixel {
    let (r, g, b) = (i64::from(p.r), i64::from(p.g), i64::from(p.b));
    let y_milli = 299 * r + 587 * g + 114 * b;
    let cr_micro = (1000 * r - y_milli) * 713 + 128_000_000;
    let cb_micro = (1000 * b - y_milli) * 564 + 128_000_000;
    YcbcrPixel {
        y: clamp_u8(div_round_half_up(y_milli, 1000)),
        cr: clamp_u8(div_round_half_up(cr_micro, 1_000_000)),
        cb: clamp_u8(div_round_half_up(cb_micro, 1_000_000)),
    }
}

/// Each channel divided by 255; the network's input vector.
pub fn normalize_hsv(p: HsvPixel) -> [f64; 3] {
    [
        f64::from(p.h) / 255.0,
        f64::from(p.s) / 255.0,
        f64::from(p.v) / 255.0,
    ]
}
