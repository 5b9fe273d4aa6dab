//! FNV-1a and SplitMix64, the two primitives the mock backends, the
//! encoding cache and crop sampling are defined in terms of.

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Streaming 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(FNV_OFFSET)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::new();
    h.write(bytes);
    h.finish()
}

/// Hash of an RGB raster: width and height as little-endian u32, then the raw
/// row-major bytes. Used both as the mock encoding id and as the cache key.
pub fn pixel_hash(width: u32, height: u32, data: &[u8]) -> u64 {
    let mut h = Fnv1a::new();
    h.write(&width.to_le_bytes());
    h.write(&height.to_le_bytes());
    h.write(data);
    h.finish()
}

/// SplitMix64 generator (Steele, Lea & Flood).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in [-1, 1) from the top 53 bits.
    pub fn next_signed_unit(&mut self) -> f64 {
        let r = self.next_u64();
        ((r >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}
