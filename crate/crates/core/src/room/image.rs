use rayon::prelude::*;

use super::{Point, RoomSpec, SceneSpec, SourceKind};
use crate::error::{Error, Result};
use crate::DEFAULT_SAMPLE_RATE;

/// 0.9 s at 48 kHz.
pub const RIR_LEN: usize = 43_200;

/// Stereo impulse response from one source to the microphone pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponsePair {
    pub channels: [Vec<f64>; 2],
    pub sample_rate: u32,
}

/// Candidate image coordinate along one axis: offset to the receiver and
/// the number of wall reflections it implies.
#[derive(Clone, Copy)]
struct AxisImage {
    offset: f64,
    reflections: u32,
}

fn axis_images(len: f64, src: f64, rcv: f64, reach: f64) -> Vec<AxisImage> {
    let m_max = (reach / (2.0 * len)).ceil() as i64 + 1;
    let mut out = Vec::with_capacity((4 * m_max + 2) as usize);
    for m in -m_max..=m_max {
        for q in 0..=1i64 {
            let offset = (1 - 2 * q) as f64 * src + 2.0 * m as f64 * len - rcv;
            if offset.abs() <= reach {
                out.push(AxisImage {
                    offset,
                    reflections: ((m - q).abs() + m.abs()) as u32,
                });
            }
        }
    }
    out
}

/// Allen-Berkley image-method response from `src` to `mic`, `len` samples
/// long. Each image contributes `beta^n / (4 pi d)` at the nearest sample to
/// its propagation delay.
pub fn image_method(room: &RoomSpec, src: &Point, mic: &Point, fs: f64, len: usize) -> Vec<f64> {
    let c = room.speed_of_sound;
    let beta = room.reflection();
    let mut h = vec![0.0; len];
    let samples_per_meter = fs / c;
    let push = |h: &mut Vec<f64>, d: f64, gain: f64| {
        let idx = (d * samples_per_meter).round() as usize;
        if idx < h.len() {
            h[idx] += gain / (4.0 * std::f64::consts::PI * d.max(1e-6));
        }
    };
    if beta == 0.0 {
        push(&mut h, super::distance(src, mic), 1.0);
        return h;
    }

    let reach = len as f64 / samples_per_meter;
    let reach_sq = reach * reach;
    let xs = axis_images(room.dims[0], src[0], mic[0], reach);
    let ys = axis_images(room.dims[1], src[1], mic[1], reach);
    let zs = axis_images(room.dims[2], src[2], mic[2], reach);
    let max_refl = [&xs, &ys, &zs]
        .iter()
        .map(|v| v.iter().map(|a| a.reflections).max().unwrap_or(0))
        .sum::<u32>();
    let powers: Vec<f64> = (0..=max_refl).map(|n| beta.powi(n as i32)).collect();

    for x in &xs {
        let dx2 = x.offset * x.offset;
        for y in &ys {
            let dxy2 = dx2 + y.offset * y.offset;
            if dxy2 > reach_sq {
                continue;
            }
            for z in &zs {
                let d2 = dxy2 + z.offset * z.offset;
                if d2 > reach_sq {
                    continue;
                }
                let gain = powers[(x.reflections + y.reflections + z.reflections) as usize];
                push(&mut h, d2.sqrt(), gain);
            }
        }
    }
    high_pass(&mut h, fs);
    h
}

/// Allen-Berkley 100 Hz high-pass. All image gains are positive, so images
/// landing on the same sample add up coherently at DC; the filter removes
/// that non-physical build-up. It is causal and leaves the first sample of
/// the response unchanged.
fn high_pass(h: &mut [f64], fs: f64) {
    let w = 2.0 * std::f64::consts::PI * 100.0 / fs;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let (mut y0, mut y1) = (0.0, 0.0);
    for v in h.iter_mut() {
        let y2 = y1;
        y1 = y0;
        y0 = b1 * y1 + b2 * y2 + *v;
        *v = y0 + a1 * y1 + r1 * y2;
    }
}

/// Stereo RIR for the scene's speaker or noise source; anechoic scenes
/// (`t60 == 0`) keep only the direct path.
pub fn simulate_rir(scene: &SceneSpec, source: SourceKind) -> Result<ImpulseResponsePair> {
    let src = scene.source(source);
    if !scene.room.contains(&src) {
        return Err(Error::SourceOutsideRoom(src));
    }
    let room = if scene.t60 == 0.0 {
        RoomSpec {
            absorption: 1.0,
            ..scene.room
        }
    } else {
        scene.room
    };
    let fs = DEFAULT_SAMPLE_RATE as f64;
    let mut chans: Vec<Vec<f64>> = scene
        .mics
        .par_iter()
        .map(|mic| image_method(&room, &src, mic, fs, RIR_LEN))
        .collect();
    let right = chans.pop().expect("two mics");
    let left = chans.pop().expect("two mics");
    Ok(ImpulseResponsePair {
        channels: [left, right],
        sample_rate: DEFAULT_SAMPLE_RATE,
    })
}

/// Reverberation time from the Schroeder energy decay curve: a line is
/// fitted to the curve between -5 and -25 dB and extrapolated to -60 dB.
/// Returns `None` when the curve never falls to -25 dB.
pub fn schroeder_t60(rir: &[f64], fs: f64) -> Option<f64> {
    let mut edc = vec![0.0; rir.len()];
    let mut acc = 0.0;
    for (i, v) in rir.iter().enumerate().rev() {
        acc += v * v;
        edc[i] = acc;
    }
    let total = *edc.first()?;
    if total <= 0.0 {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / total).log10()).collect();
    let start = db.iter().position(|&v| v <= -5.0)?;
    let end = db.iter().position(|&v| v <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    // Least-squares slope in dB per second.
    let n = (end - start + 1) as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in db.iter().enumerate().take(end + 1).skip(start) {
        let t = i as f64 / fs;
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let slope = (n * sty - st * sy) / (n * stt - st * st);
    (slope < 0.0).then(|| -60.0 / slope)
}

/// Index of the first sample whose magnitude exceeds `threshold`.
pub fn first_arrival(rir: &[f64], threshold: f64) -> Option<usize> {
    rir.iter().position(|v| v.abs() > threshold)
}
