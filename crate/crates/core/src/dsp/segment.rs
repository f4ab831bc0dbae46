use rand::Rng;

use super::AudioClip;

/// A uniformly placed window of `segment_length` samples, or the whole clip
/// zero-padded at the end when it is shorter.
///
/// # Panics
///
/// If `segment_length` is zero.
pub fn sample_segment<R: Rng + ?Sized>(clip: &AudioClip, segment_length: usize, rng: &mut R) -> AudioClip {
    assert!(segment_length > 0, "segment_length must be positive");
    let samples = clip.samples();
    let out = if samples.len() >= segment_length {
        let start = rng.random_range(0..=samples.len() - segment_length);
        samples[start..start + segment_length].to_vec()
    } else {
        let mut v = samples.to_vec();
        v.resize(segment_length, 0.0);
        v
    };
    AudioClip::new(out, clip.sample_rate())
}
