//! Seeded batch sampling.
//!
//! The `g`-th training example of a run (`g = iteration · batch_size + b`)
//! comes from epoch `g / n` at position `g % n` of that epoch's shuffled
//! utterance order, and its segment offset is drawn from a generator keyed
//! by `g` alone. Every draw is a pure function of `(seed, g)`, so resuming
//! needs no generator state beyond the seed and the iteration counter.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dsp::{sample_segment, AudioClip};

fn keyed_rng(seed: u64, domain: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(domain.as_bytes());
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Utterance order for one epoch.
pub fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut keyed_rng(seed, "epoch", epoch));
    order
}

/// Training segments for one iteration.
///
/// # Panics
///
/// If `clips` is empty.
pub fn sample_batch(clips: &[AudioClip], seed: u64, iteration: u64, batch_size: usize, segment_length: usize) -> Vec<AudioClip> {
    assert!(!clips.is_empty(), "no clips to sample from");
    let n = clips.len() as u64;
    let mut cached: Option<(u64, Vec<usize>)> = None;
    (0..batch_size as u64)
        .map(|b| {
            let g = iteration * batch_size as u64 + b;
            let epoch = g / n;
            if cached.as_ref().is_none_or(|(e, _)| *e != epoch) {
                cached = Some((epoch, epoch_order(seed, epoch, clips.len())));
            }
            let idx = cached.as_ref().unwrap().1[(g % n) as usize];
            sample_segment(&clips[idx], segment_length, &mut keyed_rng(seed, "segment", g))
        })
        .collect()
}
