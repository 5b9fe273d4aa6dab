//! Deterministic stand-in for every model role. Each output is a pure
//! function of the declared inputs:
//!
//! * text embedding: FNV-1a-64 of the UTF-8 bytes seeds SplitMix64; 512 draws
//!   mapped to [-1, 1) as `((r >> 11) / 2^53) * 2 - 1`, then L2-normalized.
//! * crop embedding: same draw, seeded with the pixel hash of the crop.
//! * image encoding: `encoding_id` is the 16-digit lowercase hex pixel hash
//!   (FNV-1a-64 over width and height as LE u32, then the RGB bytes).
//! * mask: seed = FNV(object_text) ^ FNV(encoding_id); draws r1..r4 give the
//!   rectangle `x0 = r1 % W`, `y0 = r2 % H`, `w = 1 + r3 % (W - x0)`,
//!   `h = 1 + r4 % (H - y0)`.
//! * stylize: `delta_c = ((FNV(style) >> 8c) % 128) - 64`, added to every
//!   byte of channel c with clamping to [0, 255].

use crate::hashing::{fnv1a64, SplitMix64};
use crate::raster::{ImageRgb, Mask};

use super::{
    check_text, BackendError, Embedding, EmbeddingSource, ImageEmbedder, ImageEncoder,
    ImageEncoding, MaskGenerator, Stylizer, TextEncoder, EMBEDDING_DIM,
};

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    max_pixels: Option<u64>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rejects images above `max_pixels` with `ImageTooLarge`.
    pub fn with_pixel_limit(max_pixels: u64) -> Self {
        MockBackend {
            max_pixels: Some(max_pixels),
        }
    }

    pub fn style_deltas(style_phrase: &str) -> [i16; 3] {
        let h = fnv1a64(style_phrase.as_bytes());
        [0, 1, 2].map(|c| ((h >> (8 * c)) % 128) as i16 - 64)
    }

    pub fn encoding_id(img: &ImageRgb) -> String {
        format!("{:016x}", img.pixel_hash())
    }

    /// The rectangle (x0, y0, w, h) the mock produces for an encoding.
    pub fn mask_rect(
        encoding_id: &str,
        width: u32,
        height: u32,
        object_text: &str,
    ) -> (u32, u32, u32, u32) {
        let seed = fnv1a64(object_text.as_bytes()) ^ fnv1a64(encoding_id.as_bytes());
        let mut g = SplitMix64::new(seed);
        let (w, h) = (u64::from(width), u64::from(height));
        let x0 = g.next_u64() % w;
        let y0 = g.next_u64() % h;
        let rw = 1 + g.next_u64() % (w - x0);
        let rh = 1 + g.next_u64() % (h - y0);
        (x0 as u32, y0 as u32, rw as u32, rh as u32)
    }
}

pub(crate) fn seeded_unit_vector(seed: u64, source: EmbeddingSource) -> Embedding {
    let mut g = SplitMix64::new(seed);
    let raw: Vec<f64> = (0..EMBEDDING_DIM).map(|_| g.next_signed_unit()).collect();
    Embedding::normalized(raw, source).expect("512 uniform draws are never all zero")
}

pub(crate) fn apply_deltas(img: &ImageRgb, deltas: [i16; 3]) -> ImageRgb {
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &b)| (i16::from(b) + deltas[i % 3]).clamp(0, 255) as u8)
        .collect();
    ImageRgb::new(img.width(), img.height(), data).expect("same dimensions")
}

fn is_mock_id(id: &str) -> bool {
    id.len() == 16 && id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl TextEncoder for MockBackend {
    fn encode_text(&self, text: &str) -> Result<Embedding, BackendError> {
        check_text(text)?;
        Ok(seeded_unit_vector(
            fnv1a64(text.as_bytes()),
            EmbeddingSource::Text,
        ))
    }
}

impl ImageEncoder for MockBackend {
    fn encode_image(&self, img: &ImageRgb) -> Result<ImageEncoding, BackendError> {
        let pixels = u64::from(img.width()) * u64::from(img.height());
        if let Some(limit) = self.max_pixels {
            if pixels > limit {
                return Err(BackendError::ImageTooLarge { pixels, limit });
            }
        }
        Ok(ImageEncoding {
            encoding_id: Self::encoding_id(img),
            width: img.width(),
            height: img.height(),
        })
    }
}

impl ImageEmbedder for MockBackend {
    fn embed_image(&self, img: &ImageRgb) -> Result<Embedding, BackendError> {
        Ok(seeded_unit_vector(
            img.pixel_hash(),
            EmbeddingSource::ImageCrop,
        ))
    }
}

impl MaskGenerator for MockBackend {
    fn generate_mask(
        &self,
        enc: &ImageEncoding,
        object_text: &str,
        _text_emb: &Embedding,
    ) -> Result<Mask, BackendError> {
        check_text(object_text)?;
        if !is_mock_id(&enc.encoding_id) || enc.width == 0 || enc.height == 0 {
            return Err(BackendError::UnknownEncoding(enc.encoding_id.clone()));
        }
        let (x0, y0, w, h) = Self::mask_rect(&enc.encoding_id, enc.width, enc.height, object_text);
        Ok(Mask::rect(enc.width, enc.height, x0, y0, w, h))
    }
}

impl Stylizer for MockBackend {
    fn stylize(
        &self,
        img: &ImageRgb,
        style_phrase: &str,
        _style_emb: &Embedding,
    ) -> Result<ImageRgb, BackendError> {
        check_text(style_phrase)?;
        Ok(apply_deltas(img, Self::style_deltas(style_phrase)))
    }
}
