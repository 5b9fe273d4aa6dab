//! RGB rasters and binary masks, plus their PNG and run-length codecs.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::pixel_hash;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image has zero area ({width}x{height})")]
    ZeroArea { width: u32, height: u32 },
    #[error("pixel buffer length {actual} does not match {width}x{height}x{channels}")]
    BufferLength {
        width: u32,
        height: u32,
        channels: u32,
        actual: usize,
    },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("run lengths sum to {actual}, expected {expected}")]
    RleLength { expected: u64, actual: u64 },
    #[error("png codec: {0}")]
    Png(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRgb {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageRgb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageRgb")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("hash", &format_args!("{:016x}", self.pixel_hash()))
            .finish()
    }
}

impl ImageRgb {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroArea { width, height });
        }
        if data.len() != width as usize * height as usize * 3 {
            return Err(RasterError::BufferLength {
                width,
                height,
                channels: 3,
                actual: data.len(),
            });
        }
        Ok(ImageRgb {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, RasterError> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixel_hash(&self) -> u64 {
        pixel_hash(self.width, self.height, &self.data)
    }

    /// Copy of the `w`x`h` window with top-left corner (x, y).
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> ImageRgb {
        assert!(
            x + w <= self.width && y + h <= self.height,
            "crop out of bounds"
        );
        let mut data = Vec::with_capacity(w as usize * h as usize * 3);
        for row in y..y + h {
            let start = (row as usize * self.width as usize + x as usize) * 3;
            data.extend_from_slice(&self.data[start..start + w as usize * 3]);
        }
        ImageRgb {
            width: w,
            height: h,
            data,
        }
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let img = RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_rgb8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    /// Loads any format the image codec was built with (PNG here).
    pub fn load(path: &Path) -> Result<Self, RasterError> {
        let bytes = std::fs::read(path)?;
        Self::from_png(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<(), RasterError> {
        std::fs::write(path, self.to_png()?)?;
        Ok(())
    }
}

/// Row-major binary occupancy mask.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Mask({}x{}, {} set)",
            self.width,
            self.height,
            self.count()
        )
    }
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        if bits.len() != width as usize * height as usize {
            return Err(RasterError::BufferLength {
                width,
                height,
                channels: 1,
                actual: bits.len(),
            });
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            bits,
        }
    }

    /// Filled axis-aligned rectangle, `w`x`h` starting at (x0, y0).
    pub fn rect(width: u32, height: u32, x0: u32, y0: u32, w: u32, h: u32) -> Self {
        Self::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Uncompressed row-major RLE; the first run counts unset pixels and may be 0.
    pub fn to_rle(&self) -> Vec<u64> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u64;
        for &b in &self.bits {
            if b != current {
                runs.push(len);
                current = b;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        runs
    }

    pub fn from_rle(width: u32, height: u32, runs: &[u64]) -> Result<Self, RasterError> {
        let expected = width as u64 * height as u64;
        let actual = runs.iter().try_fold(0u64, |acc, &r| acc.checked_add(r));
        if actual != Some(expected) {
            return Err(RasterError::RleLength {
                expected,
                actual: actual.unwrap_or(u64::MAX),
            });
        }
        let mut bits = Vec::with_capacity(expected as usize);
        let mut value = false;
        for &r in runs {
            bits.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    /// 1-channel PNG with 0 for unset and 255 for set.
    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let raw = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let img = GrayImage::from_raw(self.width, self.height, raw).expect("length invariant");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Any luma at or above 128 counts as set.
    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma8();
        let (w, h) = img.dimensions();
        let bits = img.into_raw().into_iter().map(|v| v >= 128).collect();
        Self::from_bits(w, h, bits)
    }

    pub fn load(path: &Path) -> Result<Self, RasterError> {
        Self::from_png(&std::fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), RasterError> {
        std::fs::write(path, self.to_png()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_area_rejected() {
        assert!(matches!(
            ImageRgb::new(0, 4, vec![]),
            Err(RasterError::ZeroArea { .. })
        ));
        assert!(ImageRgb::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn rle_first_run_counts_zeros() {
        let m = Mask::from_bits(4, 1, vec![true, true, false, true]).unwrap();
        assert_eq!(m.to_rle(), vec![0, 2, 1, 1]);
        let m = Mask::from_bits(3, 1, vec![false, false, false]).unwrap();
        assert_eq!(m.to_rle(), vec![3]);
    }

    #[test]
    fn rle_length_checked() {
        assert!(matches!(
            Mask::from_rle(2, 2, &[1, 2]),
            Err(RasterError::RleLength { .. })
        ));
    }

    #[test]
    fn png_roundtrip() {
        let mut img = ImageRgb::filled(5, 3, [10, 20, 30]).unwrap();
        img.set_pixel(4, 2, [255, 0, 7]);
        let back = ImageRgb::from_png(&img.to_png().unwrap()).unwrap();
        assert_eq!(back, img);

        let m = Mask::rect(6, 5, 1, 1, 3, 2);
        assert_eq!(Mask::from_png(&m.to_png().unwrap()).unwrap(), m);
    }

    #[test]
    fn crop_copies_window() {
        let img = ImageRgb::new(3, 2, (0..18).collect()).unwrap();
        let c = img.crop(1, 1, 2, 1);
        assert_eq!(c.data(), &[12, 13, 14, 15, 16, 17]);
    }

    proptest! {
        #[test]
        fn rle_roundtrip(w in 1u32..20, h in 1u32..20, seed in any::<u64>()) {
            let mut g = crate::hashing::SplitMix64::new(seed);
            let m = Mask::from_fn(w, h, |_, _| g.next_u64() & 1 == 1);
            let back = Mask::from_rle(w, h, &m.to_rle()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
