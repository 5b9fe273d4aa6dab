mod common;

use std::num::NonZeroUsize;
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::Duration;

use common::{gradient, CountingEncoder};
use mosaic_core::cache::Lookup;
use mosaic_core::{BackendError, EncodingCache};

fn cache() -> Arc<EncodingCache> {
    Arc::new(EncodingCache::new(NonZeroUsize::new(4).unwrap()))
}

#[test]
fn sixteen_concurrent_lookups_encode_once() {
    let cache = cache();
    let enc = Arc::new(CountingEncoder::new(Duration::from_millis(150)));
    let img = Arc::new(gradient(64, 64));
    let barrier = Arc::new(Barrier::new(16));
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let (cache, enc, img, barrier) =
                (cache.clone(), enc.clone(), img.clone(), barrier.clone());
            thread::spawn(move || {
                barrier.wait();
                cache.lookup(&img, &*enc).unwrap()
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(enc.calls(), 1);
    assert_eq!(
        enc.peak_per_key.load(std::sync::atomic::Ordering::SeqCst),
        1
    );
    assert!(results.windows(2).all(|w| w[0].0 == w[1].0));
    assert_eq!(results.iter().filter(|r| r.1 == Lookup::Miss).count(), 1);
    let s = cache.stats();
    assert_eq!((s.misses, s.hits), (1, 15));
    assert_eq!(
        s.coalesced as usize,
        results.iter().filter(|r| r.1 == Lookup::Coalesced).count()
    );
}

#[test]
fn distinct_keys_encode_in_parallel() {
    let cache = cache();
    let enc = Arc::new(CountingEncoder::new(Duration::from_millis(100)));
    let barrier = Arc::new(Barrier::new(8));
    let handles: Vec<_> = (0..8u32)
        .map(|i| {
            let (cache, enc, barrier) = (cache.clone(), enc.clone(), barrier.clone());
            thread::spawn(move || {
                let img = gradient(8 + i % 2, 8);
                barrier.wait();
                cache.get_or_encode(&img, &*enc).unwrap()
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(enc.calls(), 2);
    assert_eq!(cache.stats().misses, 2);
}

#[test]
fn shared_failure_is_not_cached() {
    let cache = cache();
    let failing = Arc::new(CountingEncoder::failing(Duration::from_millis(100)));
    let img = Arc::new(gradient(16, 16));
    let barrier = Arc::new(Barrier::new(6));
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let (cache, enc, img, barrier) =
                (cache.clone(), failing.clone(), img.clone(), barrier.clone());
            thread::spawn(move || {
                barrier.wait();
                cache.get_or_encode(&img, &*enc)
            })
        })
        .collect();
    for h in handles {
        assert!(matches!(
            h.join().unwrap(),
            Err(BackendError::BackendUnavailable(_))
        ));
    }
    assert_eq!(failing.calls(), 1);
    assert_eq!(cache.stats().live, 0);
    let ok = CountingEncoder::new(Duration::ZERO);
    cache.get_or_encode(&img, &ok).unwrap();
    assert_eq!(ok.calls(), 1);
}
