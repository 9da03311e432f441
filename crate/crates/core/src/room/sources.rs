//! Deterministic stand-ins for clean speech and noise recordings.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Formant centers and bandwidths (Hz) of a few vowel-like timbres.
const VOWELS: [[(f64, f64); 3]; 4] = [
    [(730.0, 90.0), (1090.0, 110.0), (2440.0, 170.0)],
    [(270.0, 60.0), (2290.0, 100.0), (3010.0, 120.0)],
    [(300.0, 70.0), (870.0, 90.0), (2240.0, 150.0)],
    [(530.0, 80.0), (1840.0, 100.0), (2480.0, 140.0)],
];

fn formant_gain(freq: f64, vowel: &[(f64, f64); 3]) -> f64 {
    vowel
        .iter()
        .map(|(fc, bw)| 1.0 / (1.0 + ((freq - fc) / bw).powi(2)))
        .sum::<f64>()
        + 0.02
}

/// Voiced syllables with gliding pitch and vowel formants separated by
/// short pauses, normalized to unit peak.
pub fn speech_like<R: Rng + ?Sized>(len: usize, fs: f64, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let mut pos = rng.random_range(0..(fs * 0.05) as usize + 1);
    while pos < len {
        let dur = (rng.random_range(0.12..0.35) * fs) as usize;
        let f0_start = rng.random_range(95.0..240.0);
        let f0_end = f0_start * rng.random_range(0.8..1.25);
        let vowel = &VOWELS[rng.random_range(0..VOWELS.len())];
        let harmonics = ((4000.0 / f0_start) as usize).max(1);
        let gains: Vec<f64> = (1..=harmonics)
            .map(|h| formant_gain(h as f64 * f0_start, vowel) / (h as f64).sqrt())
            .collect();
        let mut phase = 0.0;
        for i in 0..dur.min(len - pos) {
            let u = i as f64 / dur as f64;
            let f0 = f0_start + (f0_end - f0_start) * u;
            phase += TAU * f0 / fs;
            let env = (std::f64::consts::PI * u).sin().powi(2);
            let sample: f64 = gains
                .iter()
                .enumerate()
                .filter(|(h, _)| (*h as f64 + 1.0) * f0 < fs / 2.0)
                .map(|(h, g)| g * ((h as f64 + 1.0) * phase).sin())
                .sum();
            out[pos + i] += env * sample;
        }
        pos += dur + (rng.random_range(0.03..0.2) * fs) as usize;
    }
    normalize_peak(&mut out);
    out
}

/// Colored Gaussian noise with a random spectral tilt and slow amplitude
/// modulation, normalized to unit peak.
pub fn noise_like<R: Rng + ?Sized>(len: usize, fs: f64, rng: &mut R) -> Vec<f64> {
    let white = Normal::new(0.0, 1.0).expect("valid normal");
    let pole = rng.random_range(0.0..0.95);
    let mod_rate = rng.random_range(0.2..3.0);
    let mod_depth = rng.random_range(0.0..0.6);
    let mod_phase = rng.random_range(0.0..TAU);
    let mut state = 0.0;
    let mut out: Vec<f64> = (0..len)
        .map(|i| {
            let w: f64 = white.sample(rng);
            state = pole * state + (1.0 - pole) * w;
            let m = 1.0 + mod_depth * (TAU * mod_rate * i as f64 / fs + mod_phase).sin();
            m * (state + 0.05 * w)
        })
        .collect();
    normalize_peak(&mut out);
    out
}

fn normalize_peak(x: &mut [f64]) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_and_bounded() {
        let a = speech_like(48_000, 48_000.0, &mut ChaCha8Rng::seed_from_u64(3));
        let b = speech_like(48_000, 48_000.0, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
        assert!(a.iter().any(|v| v.abs() > 0.5));
        // Pauses leave exact silence somewhere.
        assert!(a.iter().filter(|v| **v == 0.0).count() > 100);
        let n = noise_like(10_000, 48_000.0, &mut ChaCha8Rng::seed_from_u64(4));
        assert!(n.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    }
}
