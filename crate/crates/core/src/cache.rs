//! Content-addressed LRU cache of image encodings.
//!
//! Keys are the pixel hash of the image, so the same pixels under two file
//! names share one entry. Concurrent misses on one key coalesce behind a
//! single in-flight encode. Failed encodes are handed to the requests that
//! were waiting on them and are never stored.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::Arc;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, ImageEncoder, ImageEncoding};
use crate::raster::ImageRgb;

pub const DEFAULT_CAPACITY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    /// Hits that waited on another caller's in-flight encode.
    pub coalesced: u64,
    pub capacity: usize,
    pub live: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Coalesced,
    /// The encoder was invoked by this call.
    Miss,
}

type Outcome = Result<ImageEncoding, BackendError>;

struct Flight {
    result: Mutex<Option<Outcome>>,
    done: Condvar,
}

struct Entry {
    encoding: ImageEncoding,
    dims: (u32, u32),
    last_used: u64,
}

#[derive(Default)]
struct State {
    entries: HashMap<u64, Entry>,
    inflight: HashMap<u64, Arc<Flight>>,
    tick: u64,
    hits: u64,
    misses: u64,
    evictions: u64,
    coalesced: u64,
}

pub struct EncodingCache {
    capacity: NonZeroUsize,
    state: Mutex<State>,
}

impl Default for EncodingCache {
    fn default() -> Self {
        Self::new(NonZeroUsize::new(DEFAULT_CAPACITY).unwrap())
    }
}

/// Publishes a result to waiters even if the encoder panics.
struct FlightGuard<'a> {
    cache: &'a EncodingCache,
    key: u64,
    dims: (u32, u32),
    flight: Arc<Flight>,
    published: bool,
}

impl FlightGuard<'_> {
    fn publish(mut self, outcome: Outcome) -> Outcome {
        self.finish(outcome.clone());
        self.published = true;
        outcome
    }

    fn finish(&self, outcome: Outcome) {
        {
            let mut st = self.cache.state.lock();
            st.inflight.remove(&self.key);
            if let Ok(enc) = &outcome {
                st.tick += 1;
                let tick = st.tick;
                st.entries.insert(
                    self.key,
                    Entry {
                        encoding: enc.clone(),
                        dims: self.dims,
                        last_used: tick,
                    },
                );
                self.cache.evict_over_capacity(&mut st);
            }
        }
        *self.flight.result.lock() = Some(outcome);
        self.flight.done.notify_all();
    }
}

impl Drop for FlightGuard<'_> {
    fn drop(&mut self) {
        if !self.published {
            self.finish(Err(BackendError::BackendUnavailable(
                "image encoder panicked".into(),
            )));
        }
    }
}

impl EncodingCache {
    pub fn new(capacity: NonZeroUsize) -> Self {
        EncodingCache {
            capacity,
            state: Mutex::new(State::default()),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity.get()
    }

    fn evict_over_capacity(&self, st: &mut State) {
        while st.entries.len() > self.capacity.get() {
            let oldest = st
                .entries
                .iter()
                .min_by_key(|(_, e)| e.last_used)
                .map(|(k, _)| *k)
                .expect("non-empty");
            st.entries.remove(&oldest);
            st.evictions += 1;
        }
    }

    pub fn get_or_encode(
        &self,
        img: &ImageRgb,
        encoder: &dyn ImageEncoder,
    ) -> Result<ImageEncoding, BackendError> {
        self.lookup(img, encoder).map(|(enc, _)| enc)
    }

    /// Like [`get_or_encode`](Self::get_or_encode), also reporting how the
    /// lookup was served.
    pub fn lookup(
        &self,
        img: &ImageRgb,
        encoder: &dyn ImageEncoder,
    ) -> Result<(ImageEncoding, Lookup), BackendError> {
        let key = img.pixel_hash();
        let dims = img.dims();
        let flight = {
            let mut st = self.state.lock();
            st.tick += 1;
            let tick = st.tick;
            if let Some(e) = st.entries.get_mut(&key).filter(|e| e.dims == dims) {
                e.last_used = tick;
                let enc = e.encoding.clone();
                st.hits += 1;
                return Ok((enc, Lookup::Hit));
            }
            if let Some(f) = st.inflight.get(&key).cloned() {
                st.hits += 1;
                st.coalesced += 1;
                drop(st);
                let mut slot = f.result.lock();
                while slot.is_none() {
                    f.done.wait(&mut slot);
                }
                return slot
                    .clone()
                    .expect("set")
                    .map(|enc| (enc, Lookup::Coalesced));
            }
            st.misses += 1;
            let f = Arc::new(Flight {
                result: Mutex::new(None),
                done: Condvar::new(),
            });
            st.inflight.insert(key, f.clone());
            f
        };
        let guard = FlightGuard {
            cache: self,
            key,
            dims,
            flight,
            published: false,
        };
        guard
            .publish(encoder.encode_image(img))
            .map(|enc| (enc, Lookup::Miss))
    }

    pub fn stats(&self) -> CacheStats {
        let st = self.state.lock();
        CacheStats {
            hits: st.hits,
            misses: st.misses,
            evictions: st.evictions,
            coalesced: st.coalesced,
            capacity: self.capacity.get(),
            live: st.entries.len(),
        }
    }

    /// Zeroes the counters; cached entries are kept.
    pub fn reset_stats(&self) {
        let mut st = self.state.lock();
        st.hits = 0;
        st.misses = 0;
        st.evictions = 0;
        st.coalesced = 0;
    }

    pub fn clear(&self) {
        self.state.lock().entries.clear();
    }
}
