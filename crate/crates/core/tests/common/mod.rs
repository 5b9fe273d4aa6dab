//! Fixtures and brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use parking_lot::Mutex;
use proptest::prelude::*;

use mosaic_core::backends::ImageEncoding;
use mosaic_core::{
    BackendError, Embedding, EmbeddingSource, ImageEmbedder, ImageEncoder, ImageRgb, Mask,
    MockBackend, OverlapPolicy, TextEncoder,
};

pub fn gradient(w: u32, h: u32) -> ImageRgb {
    let data = (0..h)
        .flat_map(|y| {
            (0..w).flat_map(move |x| {
                [
                    (x * 7 + 3) as u8,
                    (y * 5 + 9) as u8,
                    ((x ^ y) * 3 + 100) as u8,
                ]
            })
        })
        .collect();
    ImageRgb::new(w, h, data).unwrap()
}

/// Tight bbox by exhaustive scan, `(x0, y0, x1, y1)` inclusive.
pub fn brute_bbox(m: &Mask) -> Option<(u32, u32, u32, u32)> {
    let mut b: Option<(u32, u32, u32, u32)> = None;
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                b = Some(match b {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    b
}

/// Per-pixel selector: the winning mask's frame, else `fill`.
pub fn brute_composite(
    fill: &ImageRgb,
    masks: &[Mask],
    frames: &[ImageRgb],
    policy: OverlapPolicy,
) -> ImageRgb {
    let mut out = fill.clone();
    for y in 0..fill.height() {
        for x in 0..fill.width() {
            let hits: Vec<usize> = (0..masks.len()).filter(|&i| masks[i].get(x, y)).collect();
            let winner = match policy {
                OverlapPolicy::LastWins => hits.last(),
                OverlapPolicy::FirstWins => hits.first(),
            };
            if let Some(&i) = winner {
                out.set_pixel(x, y, frames[i].pixel(x, y));
            }
        }
    }
    out
}

/// LRU by hand: `(hits, misses, evictions)` for a key trace.
pub fn lru_sim(trace: &[u8], capacity: usize) -> (u64, u64, u64) {
    let mut order: VecDeque<u8> = VecDeque::new();
    let (mut hits, mut misses, mut evictions) = (0, 0, 0);
    for &k in trace {
        if let Some(pos) = order.iter().position(|&o| o == k) {
            hits += 1;
            order.remove(pos);
        } else {
            misses += 1;
            if order.len() == capacity {
                order.pop_front();
                evictions += 1;
            }
        }
        order.push_back(k);
    }
    (hits, misses, evictions)
}

pub fn direct_cross_entropy(probs: &[Vec<f64>], gold: &[u32]) -> f64 {
    let mut s = 0.0;
    for (p, &g) in probs.iter().zip(gold) {
        s += -(p[g as usize]).ln();
    }
    s / gold.len() as f64
}

/// Image encoder that counts calls and the peak number of concurrent calls
/// per key.
pub struct CountingEncoder {
    pub delay: Duration,
    pub calls: AtomicUsize,
    active: Mutex<HashMap<u64, usize>>,
    pub peak_per_key: AtomicUsize,
    pub fail: bool,
}

impl CountingEncoder {
    pub fn new(delay: Duration) -> Self {
        CountingEncoder {
            delay,
            calls: AtomicUsize::new(0),
            active: Mutex::new(HashMap::new()),
            peak_per_key: AtomicUsize::new(0),
            fail: false,
        }
    }

    pub fn failing(delay: Duration) -> Self {
        CountingEncoder {
            fail: true,
            ..Self::new(delay)
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ImageEncoder for CountingEncoder {
    fn encode_image(&self, img: &ImageRgb) -> Result<ImageEncoding, BackendError> {
        let key = img.pixel_hash();
        self.calls.fetch_add(1, Ordering::SeqCst);
        {
            let mut a = self.active.lock();
            let n = a.entry(key).or_default();
            *n += 1;
            self.peak_per_key.fetch_max(*n, Ordering::SeqCst);
        }
        std::thread::sleep(self.delay);
        *self.active.lock().get_mut(&key).unwrap() -= 1;
        if self.fail {
            return Err(BackendError::BackendUnavailable("scripted failure".into()));
        }
        MockBackend::new().encode_image(img)
    }
}

/// Text encoder that maps every phrase to basis vector 0.
pub struct BasisText;

impl TextEncoder for BasisText {
    fn encode_text(&self, _: &str) -> Result<Embedding, BackendError> {
        Ok(Embedding::basis(0, EmbeddingSource::Text))
    }
}

/// Crop embedder returning basis 0 or 1 depending on the crop's first red
/// byte: at least `threshold` gives basis 0.
pub struct RedSwitch {
    pub threshold: u8,
}

impl ImageEmbedder for RedSwitch {
    fn embed_image(&self, img: &ImageRgb) -> Result<Embedding, BackendError> {
        let i = if img.data()[0] >= self.threshold {
            0
        } else {
            1
        };
        Ok(Embedding::basis(i, EmbeddingSource::ImageCrop))
    }
}

/// Crop embedder that returns the mock text embedding of a fixed phrase.
pub struct EchoText(pub String);

impl ImageEmbedder for EchoText {
    fn embed_image(&self, _: &ImageRgb) -> Result<Embedding, BackendError> {
        MockBackend::new()
            .encode_text(&self.0)
            .map(|e| e.with_source(EmbeddingSource::ImageCrop))
    }
}

pub fn arb_mask(w: u32, h: u32) -> impl Strategy<Value = Mask> {
    (
        prop::collection::vec(any::<bool>(), (w * h) as usize),
        0u8..4,
    )
        .prop_map(move |(bits, sparsity)| {
            let bits = bits
                .chunks(1)
                .enumerate()
                .map(|(i, b)| b[0] && (sparsity == 0 || i % (sparsity as usize + 1) != 0))
                .collect();
            Mask::from_bits(w, h, bits).unwrap()
        })
}

pub fn arb_dims() -> impl Strategy<Value = (u32, u32)> {
    (1u32..=32, 1u32..=32)
}

pub fn arb_image(w: u32, h: u32) -> impl Strategy<Value = ImageRgb> {
    prop::collection::vec(any::<u8>(), (w * h * 3) as usize)
        .prop_map(move |d| ImageRgb::new(w, h, d).unwrap())
}

pub fn arb_policy() -> impl Strategy<Value = OverlapPolicy> {
    prop_oneof![
        Just(OverlapPolicy::LastWins),
        Just(OverlapPolicy::FirstWins)
    ]
}

/// A probability vector over `n` tokens built from random weights.
pub fn arb_distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

/// 32x32 fixture whose channels stay well inside [0, 255] under the mock
/// style deltas used in the end-to-end checks.
pub fn e2e_image() -> ImageRgb {
    let data = (0..32u32)
        .flat_map(|y| (0..32u32).flat_map(move |x| [(64 + 2 * x) as u8, (64 + 3 * y) as u8, 128]))
        .collect();
    ImageRgb::new(32, 32, data).unwrap()
}

pub const E2E_ENCODING_ID: &str = "6c4cd78e22f28345";
pub const E2E_PROMPT: &str = "cat as ink and sky in pop art style";
/// Mock rectangles `(x0, y0, w, h)` on [`e2e_image`], computed offline.
pub const CAT_RECT: (u32, u32, u32, u32) = (9, 3, 11, 20);
pub const SKY_RECT: (u32, u32, u32, u32) = (12, 11, 12, 9);
pub const INK: [i16; 3] = [47, 26, 20];
pub const POP_ART: [i16; 3] = [53, -6, -44];
pub const WATERCOLOR: [i16; 3] = [-25, -24, 54];

pub fn shifted(img: &ImageRgb, d: [i16; 3]) -> ImageRgb {
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &b)| (i16::from(b) + d[i % 3]).clamp(0, 255) as u8)
        .collect();
    ImageRgb::new(img.width(), img.height(), data).unwrap()
}

pub fn rect_mask(r: (u32, u32, u32, u32)) -> Mask {
    Mask::from_fn(32, 32, |x, y| {
        x >= r.0 && x < r.0 + r.2 && y >= r.1 && y < r.1 + r.3
    })
}
