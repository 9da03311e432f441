//! Fixtures shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereo_aware::{sample_scene, SceneSpec, StereoSignal};

/// Training-length signal: 93,120 samples give 192 frames at hop 480.
pub const TRAIN_LEN: usize = 93_120;

pub fn white_stereo(len: usize, seed: u64) -> StereoSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ch = || (0..len).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<f64>>();
    let l = ch();
    let r = ch();
    StereoSignal::new(l, r, stereo_aware::DEFAULT_SAMPLE_RATE).expect("finite samples")
}

/// Reference and a noisy estimate of it.
pub fn train_pair(seed: u64) -> (StereoSignal, StereoSignal) {
    let s = white_stereo(TRAIN_LEN, seed);
    let n = white_stereo(TRAIN_LEN, seed ^ 0xa5a5);
    let sh = s.zip_with(&n, |a, b| a + 0.1 * b).expect("same length");
    (s, sh)
}

/// First reverberant training scene at or after `seed`.
pub fn reverberant_scene(seed: u64) -> SceneSpec {
    (seed..)
        .map(|s| sample_scene(s).expect("feasible scene"))
        .find(|s| s.t60 > 0.0)
        .expect("reverberant scene")
}
