//! Independent reference implementations used by the integration and
//! acceptance tests. Everything here is written from the formulas with
//! plain loops and no shared helpers from the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::Array3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereo_aware::{ComplexSpectrogram, StereoSignal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> StereoSignal {
    let l = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    StereoSignal::new(l, r, 48_000).unwrap()
}

/// Random spectrogram with `frames x bins` entries per channel. Roughly one
/// band in twenty is zeroed in both channels to exercise the silent path.
pub fn random_spectrogram(rng: &mut ChaCha8Rng, frames: usize, bins: usize) -> ComplexSpectrogram {
    let mut arr = Array3::from_shape_fn((2, frames, bins), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    if rng.random_bool(0.3) {
        let t = rng.random_range(0..frames);
        let width = 1 << rng.random_range(0..4);
        let start = rng.random_range(0..bins / width) * width;
        for c in 0..2 {
            for f in start..start + width {
                arr[[c, t, f]] = Complex64::new(0.0, 0.0);
            }
        }
    }
    ComplexSpectrogram::from_bins(arr, 2 * bins, bins / 2).unwrap()
}

/// Plain-DFT STFT with reflect padding and a periodic Hann window.
pub fn naive_stft(x: &StereoSignal, w: usize, hop: usize) -> Vec<Vec<Vec<Complex64>>> {
    let n = x.len();
    let half = w / 2;
    let frames = 1 + n / hop;
    let win: Vec<f64> = (0..w).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / w as f64).cos()).collect();
    let reflect = |i: isize| -> usize {
        let n = n as isize;
        let mut j = i;
        if j < 0 {
            j = -j;
        }
        if j >= n {
            j = 2 * (n - 1) - j;
        }
        j as usize
    };
    (0..2)
        .map(|c| {
            let ch = x.channel(c);
            (0..frames)
                .map(|t| {
                    let start = (t * hop) as isize - half as isize;
                    (0..half)
                        .map(|k| {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for i in 0..w {
                                let v = ch[reflect(start + i as isize)] * win[i];
                                let ang = -2.0 * PI * (k * i) as f64 / w as f64;
                                acc += Complex64::from_polar(v, ang);
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn get(s: &ComplexSpectrogram, c: usize, t: usize, f: usize) -> Complex64 {
    s.bins()[[c, t, f]]
}

pub fn wrap(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Per-frame, per-band IID, IPD and IC computed bin by bin.
pub struct NaiveParams {
    pub iid: Vec<Vec<f64>>,
    pub ipd: Vec<Vec<f64>>,
    pub ic: Vec<Vec<f64>>,
}

pub fn naive_params(s: &ComplexSpectrogram, width: usize) -> NaiveParams {
    let frames = s.frames();
    let bins = s.num_bins();
    let bands = bins / width;
    let mut total = 0.0;
    for c in 0..2 {
        for t in 0..frames {
            for f in 0..bins {
                total += get(s, c, t, f).norm_sqr();
            }
        }
    }
    let eps = (1e-10 * total / (2 * frames * bands) as f64).max(1e-20);
    let mut out = NaiveParams {
        iid: vec![vec![0.0; bands]; frames],
        ipd: vec![vec![0.0; bands]; frames],
        ic: vec![vec![1.0; bands]; frames],
    };
    for t in 0..frames {
        for b in 0..bands {
            let (mut p1, mut p2, mut re, mut im) = (0.0, 0.0, 0.0, 0.0);
            for f in b * width..(b + 1) * width {
                let (x1, x2) = (get(s, 0, t, f), get(s, 1, t, f));
                p1 += x1.re * x1.re + x1.im * x1.im;
                p2 += x2.re * x2.re + x2.im * x2.im;
                re += x1.re * x2.re + x1.im * x2.im;
                im += x1.im * x2.re - x1.re * x2.im;
            }
            if p1 + p2 <= eps {
                continue;
            }
            out.iid[t][b] = 10.0 * ((p1 + eps) / (p2 + eps)).log10();
            out.ipd[t][b] = if re == 0.0 && im == 0.0 { 0.0 } else { wrap(im.atan2(re)) };
            out.ic[t][b] = (re * re + im * im).sqrt() / ((p1 + eps) * (p2 + eps)).sqrt();
        }
    }
    out
}

/// `[channel][frame][band]` OPD of the estimate against the reference.
pub fn naive_opd(s: &ComplexSpectrogram, sh: &ComplexSpectrogram, width: usize) -> Vec<Vec<Vec<f64>>> {
    let bands = s.num_bins() / width;
    (0..2)
        .map(|c| {
            (0..s.frames())
                .map(|t| {
                    (0..bands)
                        .map(|b| {
                            let (mut re, mut im) = (0.0, 0.0);
                            for f in b * width..(b + 1) * width {
                                let (x, y) = (get(s, c, t, f), get(sh, c, t, f));
                                re += x.re * y.re + x.im * y.im;
                                im += x.im * y.re - x.re * y.im;
                            }
                            if re == 0.0 && im == 0.0 {
                                0.0
                            } else {
                                wrap(im.atan2(re))
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn rms_of(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn genlog(x: f64) -> f64 {
    let gamma = 1.0 / 3.0;
    ((x + 1e-12).powf(gamma) - 1.0) / gamma
}

pub fn naive_lsd(s: &ComplexSpectrogram, sh: &ComplexSpectrogram) -> f64 {
    let frames = s.frames();
    let mut acc = 0.0;
    for c in 0..2 {
        for t in 0..frames {
            let d: Vec<f64> = (0..s.num_bins())
                .map(|f| genlog(get(s, c, t, f).norm()) - genlog(get(sh, c, t, f).norm()))
                .collect();
            acc += rms_of(&d);
        }
    }
    acc / (2 * frames) as f64
}

pub fn naive_time_loss(s: &StereoSignal, sh: &StereoSignal) -> f64 {
    (0..2)
        .map(|c| {
            let d: Vec<f64> = s.channel(c).iter().zip(sh.channel(c)).map(|(a, b)| a - b).collect();
            rms_of(&d)
        })
        .sum::<f64>()
        / 2.0
}

/// `[l_iid, l_ipd, l_ic, l_opd]`.
pub fn naive_image_losses(s: &ComplexSpectrogram, sh: &ComplexSpectrogram, width: usize) -> [f64; 4] {
    let (a, b) = (naive_params(s, width), naive_params(sh, width));
    let frames = s.frames();
    let per_frame = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>, angular: bool| {
        (0..frames)
            .map(|t| {
                let d: Vec<f64> = x[t]
                    .iter()
                    .zip(&y[t])
                    .map(|(u, v)| if angular { wrap(u - v) } else { u - v })
                    .collect();
                rms_of(&d)
            })
            .sum::<f64>()
            / frames as f64
    };
    let o = naive_opd(s, sh, width);
    let mut l_opd = 0.0;
    for ch in &o {
        for row in ch {
            l_opd += rms_of(row);
        }
    }
    [
        per_frame(&a.iid, &b.iid, false),
        per_frame(&a.ipd, &b.ipd, true),
        per_frame(&a.ic, &b.ic, false),
        l_opd / (2 * frames) as f64,
    ]
}

/// Relative difference with a floor that keeps exact zeros comparable.
pub fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs()).max(1e-300)
    }
}

/// Max absolute difference over the max magnitude of the reference array.
pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(1e-300)
    }
}

/// Angular arrays compared after wrapping each difference.
pub fn rel_inf_angle(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max(wrap(x - y).abs()));
    diff / PI
}
