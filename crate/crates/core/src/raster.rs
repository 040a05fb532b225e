//! Float rasters and the CRAYRAST file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CRAYRAST"
//! 8       4     version (u32) = 1
//! 12      4     height (u32)
//! 16      4     width (u32)
//! 20      4     channels (u32)
//! 24      ...   f32 LE payload, row-major, channel-interleaved
//! ```
//!
//! Also holds [`Image`], the 8-bit-backed float image used by the renderer,
//! with PNG load/save helpers.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::RasterError;

pub const MAGIC: &[u8; 8] = b"CRAYRAST";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

/// `height × width × channels` f32 raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(RasterError::Empty);
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(RasterError::BadLength {
                expected: expected * 4,
                got: data.len() * 4,
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self, RasterError> {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.height as u32, self.width as u32, self.channels as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RasterError> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(RasterError::BadMagic);
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(8);
        if version != VERSION {
            return Err(RasterError::BadVersion(version));
        }
        let (h, w, c) = (word(12) as usize, word(16) as usize, word(20) as usize);
        let payload = &bytes[HEADER_LEN..];
        let expected = h
            .checked_mul(w)
            .and_then(|n| n.checked_mul(c))
            .and_then(|n| n.checked_mul(4))
            .unwrap_or(usize::MAX);
        if payload.len() != expected {
            return Err(RasterError::BadLength {
                expected,
                got: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(h, w, c, data)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), RasterError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, RasterError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Writes one channel as 8-bit grayscale, mapping `[lo, hi]` to
    /// `[0, 255]`. NaN becomes 0.
    pub fn save_channel_png(&self, channel: usize, lo: f32, hi: f32, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let span = if hi > lo { hi - lo } else { 1.0 };
        let bytes: Vec<u8> = (0..self.height * self.width)
            .map(|i| {
                let v = self.data[i * self.channels + channel];
                if v.is_nan() {
                    0
                } else {
                    (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8
                }
            })
            .collect();
        image::save_buffer(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )?;
        Ok(())
    }
}

/// RGB float image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Self {
        assert_eq!(data.len(), width * height, "image data length");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: [f32; 3]) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at continuous pixel-index coordinates (pixel `i` is
    /// centered at `i`). Rows clamp; columns wrap when `wrap_x`, else clamp.
    pub fn sample_bilinear(&self, x: f64, y: f64, wrap_x: bool) -> [f32; 3] {
        let (w, h) = (self.width as i64, self.height as i64);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let col = |c: i64| {
            if wrap_x {
                c.rem_euclid(w) as usize
            } else {
                c.clamp(0, w - 1) as usize
            }
        };
        let row = |r: i64| r.clamp(0, h - 1) as usize;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let (c0, c1, r0, r1) = (col(x0), col(x0 + 1), row(y0), row(y0 + 1));
        let mut out = [0.0f32; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let p = |c: usize, r: usize| self.data[r * self.width + c][k] as f64;
            let top = p(c0, r0) * (1.0 - fx) + p(c1, r0) * fx;
            let bottom = p(c0, r1) * (1.0 - fx) + p(c1, r1) * fx;
            *o = (top * (1.0 - fy) + bottom * fy) as f32;
        }
        out
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let data = img
            .pixels()
            .map(|p| p.0.map(|c| c as f32 / 255.0))
            .collect();
        Ok(Self::new(w as usize, h as usize, data))
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }

    pub fn to_raster(&self) -> Raster {
        let data = self.data.iter().flatten().copied().collect();
        Raster::new(self.height, self.width, 3, data).expect("image is non-empty")
    }
}

/// Saves a boolean mask as an 8-bit PNG (255 = valid).
pub fn save_mask_png(mask: &[bool], width: usize, height: usize, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    image::save_buffer(path, &bytes, width as u32, height as u32, image::ExtendedColorType::L8)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let r = Raster::new(2, 3, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, f32::NAN]).unwrap();
        let b = r.to_bytes();
        assert_eq!(&b[..8], b"CRAYRAST");
        assert_eq!(&b[8..24], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(b.len(), 24 + 6 * 4);
        assert_eq!(&b[28..32], &1.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_malformed() {
        let good = Raster::zeros(2, 2, 2).unwrap().to_bytes();
        assert!(matches!(Raster::from_bytes(&good[..30]), Err(RasterError::BadLength { .. })));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(Raster::from_bytes(&bad), Err(RasterError::BadMagic)));
        let mut bad = good;
        bad[8] = 2;
        assert!(matches!(Raster::from_bytes(&bad), Err(RasterError::BadVersion(2))));
        assert!(Raster::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster::new(1, 2, 3, vec![0.5, -1.0, f32::NAN, 3.0, 1e-30, f32::INFINITY]).unwrap();
        let path = dir.path().join("x.crr");
        r.save(&path).unwrap();
        let back = Raster::load(&path).unwrap();
        assert_eq!(back.to_bytes(), r.to_bytes());
        r.save_channel_png(0, -1.0, 1.0, dir.path().join("x.png")).unwrap();
    }

    #[test]
    fn png_round_trip_is_exact_for_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::new(2, 1, vec![[0.0, 128.0 / 255.0, 1.0], [1.0 / 255.0, 0.2, 0.4]]);
        let path = dir.path().join("i.png");
        img.save_png(&path).unwrap();
        let back = Image::load_png(&path).unwrap();
        assert_eq!(back.to_rgb8(), img.to_rgb8());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(h in 1usize..5, w in 1usize..5, c in 1usize..4, seed in any::<u64>()) {
            let data: Vec<f32> = (0..h * w * c)
                .map(|i| f32::from_bits((seed as u32).wrapping_mul(2654435761).wrapping_add(i as u32 * 97)))
                .collect();
            let r = Raster::new(h, w, c, data).unwrap();
            let back = Raster::from_bytes(&r.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), r.to_bytes());
        }
    }
}
