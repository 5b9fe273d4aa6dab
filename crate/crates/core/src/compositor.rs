//! Mask algebra and hard-edged pixel selection.
//!
//! Overlap arbitration runs as a separate pass so that compositing only ever
//! sees pairwise-disjoint masks. Every output pixel is copied unmodified from
//! exactly one source image.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ImageRgb, Mask};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompositeError {
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("background style {0:?} has no stylized frame")]
    MissingBackground(String),
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// Tightest box around the set pixels.
pub fn mask_bbox(m: &Mask) -> Result<BBox, CompositeError> {
    let (w, h) = m.dims();
    let rows_set = |y: u32| (0..w).any(|x| m.get(x, y));
    let cols_set = |x: u32| (0..h).any(|y| m.get(x, y));
    let y0 = (0..h)
        .find(|&y| rows_set(y))
        .ok_or(CompositeError::EmptyMask)?;
    let y1 = (0..h).rev().find(|&y| rows_set(y)).expect("non-empty");
    let x0 = (0..w).find(|&x| cols_set(x)).expect("non-empty");
    let x1 = (0..w).rev().find(|&x| cols_set(x)).expect("non-empty");
    Ok(BBox { x0, y0, x1, y1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapPolicy {
    /// A contested pixel goes to the latest mask in list order.
    #[default]
    LastWins,
    FirstWins,
}

impl OverlapPolicy {
    pub fn flipped(self) -> Self {
        match self {
            OverlapPolicy::LastWins => OverlapPolicy::FirstWins,
            OverlapPolicy::FirstWins => OverlapPolicy::LastWins,
        }
    }
}

impl FromStr for OverlapPolicy {
    type Err = CompositeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last-wins" => Ok(OverlapPolicy::LastWins),
            "first-wins" => Ok(OverlapPolicy::FirstWins),
            other => Err(CompositeError::UnknownPolicy(other.to_string())),
        }
    }
}

impl fmt::Display for OverlapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverlapPolicy::LastWins => "last-wins",
            OverlapPolicy::FirstWins => "first-wins",
        })
    }
}

/// What fills pixels no mask covers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum UncoveredPolicy {
    #[default]
    ContentPassthrough,
    /// The stylized frame of this style phrase.
    BackgroundStyle(String),
}

impl FromStr for UncoveredPolicy {
    type Err = CompositeError;

    /// `content` or `background:<style phrase>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "content" {
            return Ok(UncoveredPolicy::ContentPassthrough);
        }
        match s.strip_prefix("background:").map(str::trim) {
            Some(style) if !style.is_empty() => Ok(UncoveredPolicy::BackgroundStyle(style.into())),
            _ => Err(CompositeError::UnknownPolicy(s.to_string())),
        }
    }
}

impl fmt::Display for UncoveredPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UncoveredPolicy::ContentPassthrough => f.write_str("content"),
            UncoveredPolicy::BackgroundStyle(s) => write!(f, "background:{s}"),
        }
    }
}

impl TryFrom<String> for UncoveredPolicy {
    type Error = CompositeError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<UncoveredPolicy> for String {
    fn from(p: UncoveredPolicy) -> Self {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompositePolicy {
    pub overlap: OverlapPolicy,
    pub uncovered: UncoveredPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleAssignment {
    pub mask: Mask,
    pub styled: ImageRgb,
    pub ordinal: usize,
}

fn check_dims(expected: (u32, u32), actual: (u32, u32)) -> Result<(), CompositeError> {
    if expected != actual {
        return Err(CompositeError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Per-pixel owner index under `policy`, or `None` where no mask is set.
fn claims(masks: &[&Mask], policy: OverlapPolicy) -> Vec<Option<usize>> {
    let n = masks.first().map_or(0, |m| m.bits().len());
    let mut owner = vec![None; n];
    for (i, m) in masks.iter().enumerate() {
        for (p, &b) in m.bits().iter().enumerate() {
            if b && (policy == OverlapPolicy::LastWins || owner[p].is_none()) {
                owner[p] = Some(i);
            }
        }
    }
    owner
}

/// Makes masks pairwise disjoint without changing their union.
pub fn resolve_overlaps(
    masks: &[Mask],
    policy: OverlapPolicy,
) -> Result<Vec<Mask>, CompositeError> {
    let Some(first) = masks.first() else {
        return Ok(Vec::new());
    };
    for m in masks {
        check_dims(first.dims(), m.dims())?;
    }
    let refs: Vec<&Mask> = masks.iter().collect();
    let owner = claims(&refs, policy);
    let (w, h) = first.dims();
    Ok((0..masks.len())
        .map(|i| {
            let bits = owner.iter().map(|o| *o == Some(i)).collect();
            Mask::from_bits(w, h, bits).expect("same length")
        })
        .collect())
}

/// Assembles the output image. `background` supplies the frame for
/// [`UncoveredPolicy::BackgroundStyle`] and is ignored otherwise.
pub fn composite(
    content: &ImageRgb,
    assignments: &[StyleAssignment],
    policy: &CompositePolicy,
    background: Option<&ImageRgb>,
) -> Result<ImageRgb, CompositeError> {
    let dims = content.dims();
    for a in assignments {
        check_dims(dims, a.mask.dims())?;
        check_dims(dims, a.styled.dims())?;
    }
    let fill = match &policy.uncovered {
        UncoveredPolicy::ContentPassthrough => content,
        UncoveredPolicy::BackgroundStyle(style) => {
            let bg = background.ok_or_else(|| CompositeError::MissingBackground(style.clone()))?;
            check_dims(dims, bg.dims())?;
            bg
        }
    };
    let masks: Vec<&Mask> = assignments.iter().map(|a| &a.mask).collect();
    let owner = claims(&masks, policy.overlap);
    let mut out = fill.clone();
    if assignments.is_empty() {
        return Ok(out);
    }
    for y in 0..dims.1 {
        for x in 0..dims.0 {
            if let Some(i) = owner[(y * dims.0 + x) as usize] {
                out.set_pixel(x, y, assignments[i].styled.pixel(x, y));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered_fraction: f64,
    pub overlap_fraction: f64,
}

pub fn coverage_report(masks: &[Mask]) -> Result<Coverage, CompositeError> {
    let Some(first) = masks.first() else {
        return Ok(Coverage {
            covered_fraction: 0.0,
            overlap_fraction: 0.0,
        });
    };
    for m in masks {
        check_dims(first.dims(), m.dims())?;
    }
    let n = first.bits().len();
    let (mut covered, mut overlapped) = (0usize, 0usize);
    for p in 0..n {
        match masks.iter().filter(|m| m.bits()[p]).count() {
            0 => {}
            1 => covered += 1,
            _ => {
                covered += 1;
                overlapped += 1;
            }
        }
    }
    Ok(Coverage {
        covered_fraction: covered as f64 / n as f64,
        overlap_fraction: overlapped as f64 / n as f64,
    })
}
