//! Binary PPM (P6) / PGM (P5) rasters at 8 bits per channel, and the 2x
//! down/up-sampling used by the half-resolution segmentation path.

use crate::colorspace::RgbPixel;
use crate::error::{Error, Result};
use crate::neighbourhood::{ProbabilityMap, SkinMask};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    /// Row-major RGB triples.
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("image must be non-empty, got {width}x{height}")));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| Error::Dimensions(format!("{width}x{height} is too large")))?;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: expected,
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, pixel: RgbPixel) -> Result<Self> {
        let data = [pixel.r, pixel.g, pixel.b].repeat(width * height);
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> RgbPixel) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                data.extend_from_slice(&[p.r, p.g, p.b]);
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> RgbPixel {
        let i = 3 * (y * self.width + x);
        RgbPixel::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, p: RgbPixel) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&[p.r, p.g, p.b]);
    }

    pub fn pixels(&self) -> impl Iterator<Item = RgbPixel> + '_ {
        self.data.chunks_exact(3).map(|c| RgbPixel::new(c[0], c[1], c[2]))
    }
}

/// Single-channel mask: 255 = skin, 0 = non-skin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("mask must be non-empty, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: width * height,
            });
        }
        if let Some(v) = data.iter().find(|&&v| v != 0 && v != 255) {
            return Err(Error::Config(format!("mask values must be 0 or 255, found {v}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_skin(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 255
    }

    pub fn skin_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 255).count()
    }
}

impl From<&SkinMask> for MaskImage {
    fn from(mask: &SkinMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            data: mask.skin.iter().map(|&s| if s { 255 } else { 0 }).collect(),
        }
    }
}

struct Header {
    width: usize,
    height: usize,
    payload_offset: usize,
}

fn parse_header(bytes: &[u8], magic: &'static str) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic.as_bytes() {
        return Err(Error::BadMagic { expected: magic });
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments before each field; at least one
        // separator is required after the magic number and each field.
        let start = pos;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::BadHeader("header ends early".into())),
            }
        }
        if pos == start {
            return Err(Error::BadHeader("missing whitespace between header fields".into()));
        }
        let digits_start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if pos == digits_start {
            return Err(Error::BadHeader(format!("header field {} is not a decimal integer", i + 1)));
        }
        *field = std::str::from_utf8(&bytes[digits_start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::BadHeader("header value out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::BadHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedDepth(maxval.min(u64::from(u32::MAX)) as u32));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::BadHeader("maxval must be followed by one whitespace byte".into())),
    }
    let width = usize::try_from(width).map_err(|_| Error::BadHeader("width too large".into()))?;
    let height = usize::try_from(height).map_err(|_| Error::BadHeader("height too large".into()))?;
    Ok(Header {
        width,
        height,
        payload_offset: pos,
    })
}

fn payload<'a>(bytes: &'a [u8], header: &Header, channels: usize) -> Result<&'a [u8]> {
    let expected = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::BadHeader("dimensions overflow".into()))?;
    let available = bytes.len() - header.payload_offset;
    if available < expected {
        return Err(Error::Truncated {
            expected,
            found: available,
        });
    }
    Ok(&bytes[header.payload_offset..header.payload_offset + expected])
}

/// Reads a binary PPM. Bytes after the payload are ignored.
pub fn read_ppm(bytes: &[u8]) -> Result<Image> {
    let header = parse_header(bytes, "P6")?;
    let data = payload(bytes, &header, 3)?.to_vec();
    Image::new(header.width, header.height, data)
}

/// Reads a binary PGM mask; every sample must be 0 or 255.
pub fn read_pgm(bytes: &[u8]) -> Result<MaskImage> {
    let header = parse_header(bytes, "P5")?;
    let data = payload(bytes, &header, 1)?.to_vec();
    MaskImage::new(header.width, header.height, data)
}

fn with_header(magic: &str, width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(payload);
    out
}

/// Canonical `P6\n<w> <h>\n255\n` header followed by the raw payload.
pub fn write_ppm(img: &Image) -> Vec<u8> {
    with_header("P6", img.width, img.height, &img.data)
}

pub fn write_pgm(mask: &MaskImage) -> Vec<u8> {
    with_header("P5", mask.width, mask.height, &mask.data)
}

/// Greyscale rendering of the skin probability, `round(255 * p_skin)`.
pub fn probability_pgm(map: &ProbabilityMap) -> Vec<u8> {
    let payload: Vec<u8> = map
        .cells()
        .iter()
        .map(|c| (c.p_skin * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    with_header("P5", map.width(), map.height(), &payload)
}

/// 2x2 mean pooling with round-half-up; a trailing odd row or column is
/// dropped.
pub fn downscale_half(img: &Image) -> Result<Image> {
    if img.width < 2 || img.height < 2 {
        return Err(Error::Dimensions(format!(
            "cannot halve a {}x{} image",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width / 2, img.height / 2);
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                let at = |sx: usize, sy: usize| u32::from(img.data[3 * (sy * img.width + sx) + ch]);
                let sum = at(2 * x, 2 * y) + at(2 * x + 1, 2 * y) + at(2 * x, 2 * y + 1) + at(2 * x + 1, 2 * y + 1);
                data.push(((sum + 2) / 4) as u8);
            }
        }
    }
    Image::new(w, h, data)
}

/// Nearest-neighbour 2x upscale: `out(x, y) = mask(min(x / 2, w - 1), min(y / 2, h - 1))`.
///
/// Each target dimension must lie in `2n - 1 ..= 2n + 1`, which covers
/// restoring a mask computed on a [`downscale_half`] image to the original
/// size, whether or not the original had a trailing odd row or column.
pub fn upscale_mask_2x(mask: &MaskImage, target_w: usize, target_h: usize) -> Result<MaskImage> {
    let fits = |target: usize, src: usize| (2 * src - 1..=2 * src + 1).contains(&target);
    if !fits(target_w, mask.width) || !fits(target_h, mask.height) {
        return Err(Error::Dimensions(format!(
            "cannot upscale a {}x{} mask to {target_w}x{target_h}",
            mask.width, mask.height
        )));
    }
    let mut data = Vec::with_capacity(target_w * target_h);
    for y in 0..target_h {
        let sy = (y / 2).min(mask.height - 1);
        for x in 0..target_w {
            let sx = (x / 2).min(mask.width - 1);
            data.push(mask.data[sy * mask.width + sx]);
        }
    }
    Ok(MaskImage {
        width: target_w,
        height: target_h,
        data,
    })
}
