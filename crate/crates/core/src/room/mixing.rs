use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{simulate_rir, ImpulseResponsePair, SceneSpec, SourceKind};
use crate::error::{Error, Result};
use crate::signal::StereoSignal;

/// Linear convolution of `a` and `b`, truncated to `out_len` samples.
pub fn fft_convolve(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0; out_len];
    }
    let full = a.len() + b.len() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fa.resize(n, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fb.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    (0..out_len)
        .map(|i| if i < full { fa[i].re * scale } else { 0.0 })
        .collect()
}

/// Channel-averaged SNR of `s` against `n` in dB.
pub fn snr_db(s: &StereoSignal, n: &StereoSignal) -> f64 {
    10.0 * (s.mean_power() / n.mean_power()).log10()
}

/// Reverberant speech `s`, reverberant noise `n` and their sum `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub y: StereoSignal,
    pub s: StereoSignal,
    pub n: StereoSignal,
}

fn spatialize(src: &[f64], rir: &ImpulseResponsePair, len: usize) -> Result<StereoSignal> {
    let l = fft_convolve(src, &rir.channels[0], len);
    let r = fft_convolve(src, &rir.channels[1], len);
    StereoSignal::new(l, r, rir.sample_rate)
}

/// Mixes mono sources through precomputed RIRs. The noise (tiled to the
/// clean length if shorter) is rescaled to hit `snr_db`, then both are scaled
/// so the mixture RMS sits at `level_db` dBFS.
pub fn mix_with_rirs(
    clean: &[f64],
    noise: &[f64],
    rir_speech: &ImpulseResponsePair,
    rir_noise: &ImpulseResponsePair,
    snr_db: f64,
    level_db: f64,
) -> Result<Mixture> {
    if clean.is_empty() || clean.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroPower("speech"));
    }
    if noise.is_empty() || noise.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroPower("noise"));
    }
    let len = clean.len();
    let tiled: Vec<f64> = noise.iter().copied().cycle().take(len).collect();
    let s = spatialize(clean, rir_speech, len)?;
    let n = spatialize(&tiled, rir_noise, len)?;
    let (ps, pn) = (s.mean_power(), n.mean_power());
    if ps <= 0.0 {
        return Err(Error::ZeroPower("reverberant speech"));
    }
    if pn <= 0.0 {
        return Err(Error::ZeroPower("reverberant noise"));
    }
    let noise_gain = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let n = n.map(|v| v * noise_gain)?;
    let y = s.add(&n)?;
    let level_gain = 10f64.powf(level_db / 20.0) / y.mean_power().sqrt();
    let s = s.map(|v| v * level_gain)?;
    let n = n.map(|v| v * level_gain)?;
    let y = s.add(&n)?;
    Ok(Mixture { y, s, n })
}

/// Renders both RIRs for `scene` and mixes the sources through them.
pub fn mix(clean: &[f64], noise: &[f64], scene: &SceneSpec) -> Result<Mixture> {
    let rs = simulate_rir(scene, SourceKind::Speech)?;
    let rn = simulate_rir(scene, SourceKind::Noise)?;
    mix_with_rirs(clean, noise, &rs, &rn, scene.snr_db, scene.level_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rir(taps: &[(usize, f64)], len: usize) -> ImpulseResponsePair {
        let mut l = vec![0.0; len];
        let mut r = vec![0.0; len];
        for &(i, g) in taps {
            l[i] += g;
            r[(i + 3) % len] += 0.5 * g;
        }
        ImpulseResponsePair { channels: [l, r], sample_rate: 48_000 }
    }

    fn tone(len: usize, f: f64) -> Vec<f64> {
        (0..len).map(|i| (f * i as f64).sin() + 0.1).collect()
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [0.25, 1.0, -1.0];
        let got = fft_convolve(&a, &b, 7);
        for (k, g) in got.iter().enumerate() {
            let direct: f64 = (0..a.len())
                .filter(|&i| k >= i && k - i < b.len())
                .map(|i| a[i] * b[k - i])
                .sum();
            assert!((g - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_hits_requested_snr_and_sum() {
        let clean = tone(5000, 0.05);
        let noise = tone(3000, 0.31);
        let m = mix_with_rirs(&clean, &noise, &rir(&[(5, 1.0), (40, 0.3)], 64), &rir(&[(9, 0.7)], 64), 5.0, -26.0)
            .unwrap();
        assert!((snr_db(&m.s, &m.n) - 5.0).abs() < 1e-3);
        assert!((10.0 * m.y.mean_power().log10() + 26.0).abs() < 1e-9);
        for c in 0..2 {
            for i in 0..5000 {
                assert_eq!(m.y.channel(c)[i] - (m.s.channel(c)[i] + m.n.channel(c)[i]), 0.0);
            }
        }
        let louder = m.n.map(|v| 2.0 * v).unwrap();
        let drop = snr_db(&m.s, &m.n) - snr_db(&m.s, &louder);
        assert!((drop - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn silent_source_rejected() {
        let r = rir(&[(0, 1.0)], 8);
        assert!(matches!(
            mix_with_rirs(&[0.0; 100], &[1.0; 100], &r, &r, 0.0, -20.0),
            Err(Error::ZeroPower("speech"))
        ));
        assert!(matches!(
            mix_with_rirs(&[1.0; 100], &[0.0; 100], &r, &r, 0.0, -20.0),
            Err(Error::ZeroPower("noise"))
        ));
    }
}
