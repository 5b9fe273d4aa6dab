//! Deterministic fixtures shared by the benches.

use mosaic_core::hashing::SplitMix64;
use mosaic_core::{ImageRgb, Mask};

pub fn gradient(width: u32, height: u32) -> ImageRgb {
    let data = (0..height)
        .flat_map(|y| {
            (0..width).flat_map(move |x| [(x * 7) as u8, (y * 5) as u8, ((x + y) * 3) as u8])
        })
        .collect();
    ImageRgb::new(width, height, data).expect("valid dimensions")
}

/// `n` random rectangles covering roughly a quarter of the image each.
pub fn random_masks(width: u32, height: u32, n: usize, seed: u64) -> Vec<Mask> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let w = 1 + (rng.next_u64() % u64::from(width / 2)) as u32;
            let h = 1 + (rng.next_u64() % u64::from(height / 2)) as u32;
            let x0 = (rng.next_u64() % u64::from(width - w + 1)) as u32;
            let y0 = (rng.next_u64() % u64::from(height - h + 1)) as u32;
            Mask::rect(width, height, x0, y0, w, h)
        })
        .collect()
}

pub const PROMPTS: [&str; 4] = [
    "a cat in watercolor style",
    "tree as oil painting, the car on the left in the style of van gogh and sky styled like ukiyo-e",
    "mountain in pencil sketch style; river as pop art; small boat in the foreground as ink wash",
    "dog, cat and bird as pixel art",
];
