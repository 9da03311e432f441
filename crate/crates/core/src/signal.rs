//! Stereo waveforms, complex spectrograms and the STFT pair that maps
//! between them.
//!
//! Analysis frames are taken from a reflect-padded signal (half a window on
//! each side) with a periodic Hann window. Synthesis is weighted overlap-add
//! normalized by the summed squared analysis windows, which reconstructs the
//! interior exactly for any hop that keeps the window sum positive.
//!
//! A [`ComplexSpectrogram`] exposes the `window_len / 2` bins `0..F` used by
//! every loss and parameter extractor. The Nyquist coefficient of each frame
//! is carried alongside so the inverse transform stays lossless.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;

/// Two-channel waveform. Both channels share one length and every sample
/// is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSignal {
    channels: [Vec<f64>; 2],
    sample_rate: u32,
}

impl StereoSignal {
    pub fn new(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::ShapeMismatch(format!(
                "channel lengths differ: {} vs {}",
                left.len(),
                right.len()
            )));
        }
        if left.iter().chain(right.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            channels: [left, right],
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            channels: [vec![0.0; len], vec![0.0; len]],
            sample_rate,
        }
    }

    /// Duplicates a mono signal onto both channels.
    pub fn upmix(mono: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let right = mono.clone();
        Self::new(mono, right, sample_rate)
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>; 2] {
        &self.channels
    }

    pub fn into_channels(self) -> [Vec<f64>; 2] {
        self.channels
    }

    /// Applies `f` to every sample of both channels.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let [l, r] = &self.channels;
        Self::new(
            l.iter().map(|&v| f(v)).collect(),
            r.iter().map(|&v| f(v)).collect(),
            self.sample_rate,
        )
    }

    /// Sample-wise combination of two equal-length signals.
    pub fn zip_with(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "signal lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let mut out = [Vec::new(), Vec::new()];
        for (c, ch) in out.iter_mut().enumerate() {
            *ch = self.channels[c]
                .iter()
                .zip(&other.channels[c])
                .map(|(&a, &b)| f(a, b))
                .collect();
        }
        let [l, r] = out;
        Self::new(l, r, self.sample_rate)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Copy of samples `start..start + len`.
    pub fn segment(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InsufficientSamples {
                needed: start + len,
                got: self.len(),
            });
        }
        Ok(Self {
            channels: [
                self.channels[0][start..start + len].to_vec(),
                self.channels[1][start..start + len].to_vec(),
            ],
            sample_rate: self.sample_rate,
        })
    }

    pub fn swapped(&self) -> Self {
        Self {
            channels: [self.channels[1].clone(), self.channels[0].clone()],
            sample_rate: self.sample_rate,
        }
    }

    /// Mean of squared samples across both channels.
    pub fn mean_power(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = self.channels.iter().flatten().map(|v| v * v).sum();
        total / (2 * self.len()) as f64
    }
}

/// Multiplies every sample by `a` (the encoder input scaling).
pub fn scale_input(x: &StereoSignal, a: f64) -> Result<StereoSignal> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::DegenerateScale(a));
    }
    x.map(|v| v * a)
}

/// Reverses [`scale_input`] with the same factor.
pub fn unscale_output(x: &StereoSignal, a: f64) -> Result<StereoSignal> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::DegenerateScale(a));
    }
    x.map(|v| v / a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: WindowKind,
    /// Keep only the first `crop_frames` frames when that many are available.
    #[serde(default)]
    pub crop_frames: Option<usize>,
}

impl Default for StftConfig {
    /// 2048-sample Hann window, hop 480, cropped to 192 frames.
    fn default() -> Self {
        Self {
            window_len: 2048,
            hop: 480,
            window: WindowKind::Hann,
            crop_frames: Some(192),
        }
    }
}

impl StftConfig {
    pub fn new(window_len: usize, hop: usize) -> Self {
        Self {
            window_len,
            hop,
            window: WindowKind::Hann,
            crop_frames: None,
        }
    }

    pub fn with_crop(mut self, frames: Option<usize>) -> Self {
        self.crop_frames = frames;
        self
    }

    /// Positive-frequency bins kept per frame (`window_len / 2`).
    pub fn bins(&self) -> usize {
        self.window_len / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || !self.window_len.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "window_len {} must be a power of two >= 2",
                self.window_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::InvalidConfig(format!(
                "hop {} must be in 1..={}",
                self.hop, self.window_len
            )));
        }
        if self.crop_frames == Some(0) {
            return Err(Error::InvalidConfig("crop_frames must be >= 1".into()));
        }
        Ok(())
    }

    /// Frames produced for a signal of `len` samples, after cropping.
    pub fn frame_count(&self, len: usize) -> usize {
        let available = 1 + len / self.hop;
        match self.crop_frames {
            Some(t) if t <= available => t,
            _ => available,
        }
    }
}

/// Complex STFT of a stereo signal, indexed `[channel, frame, bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    bins: Array3<Complex64>,
    nyquist: Array2<Complex64>,
    window_len: usize,
    hop: usize,
}

impl ComplexSpectrogram {
    /// `bins` must have shape `(2, T, F)` and `nyquist` shape `(2, T)`.
    pub fn from_parts(
        bins: Array3<Complex64>,
        nyquist: Array2<Complex64>,
        window_len: usize,
        hop: usize,
    ) -> Result<Self> {
        let (c, t, f) = bins.dim();
        if c != 2 {
            return Err(Error::ShapeMismatch(format!("expected 2 channels, got {c}")));
        }
        if t == 0 || f == 0 {
            return Err(Error::ShapeMismatch(format!(
                "empty spectrogram ({t} frames, {f} bins)"
            )));
        }
        if nyquist.dim() != (2, t) {
            return Err(Error::ShapeMismatch(format!(
                "nyquist column shape {:?} does not match (2, {t})",
                nyquist.dim()
            )));
        }
        if bins
            .iter()
            .chain(nyquist.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            bins,
            nyquist,
            window_len,
            hop,
        })
    }

    /// Spectrogram with zero Nyquist column, for synthetic inputs.
    pub fn from_bins(bins: Array3<Complex64>, window_len: usize, hop: usize) -> Result<Self> {
        let t = bins.dim().1;
        Self::from_parts(bins, Array2::zeros((2, t)), window_len, hop)
    }

    pub fn zeros(frames: usize, bins: usize, window_len: usize, hop: usize) -> Self {
        Self {
            bins: Array3::zeros((2, frames, bins)),
            nyquist: Array2::zeros((2, frames)),
            window_len,
            hop,
        }
    }

    pub fn frames(&self) -> usize {
        self.bins.dim().1
    }

    pub fn num_bins(&self) -> usize {
        self.bins.dim().2
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bins(&self) -> &Array3<Complex64> {
        &self.bins
    }

    pub fn nyquist(&self) -> &Array2<Complex64> {
        &self.nyquist
    }

    /// `[frame, bin]` view of one channel.
    pub fn channel(&self, c: usize) -> ArrayView2<'_, Complex64> {
        self.bins.index_axis(ndarray::Axis(0), c)
    }

    /// Applies `f` to every coefficient, including the Nyquist column.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        Self::from_parts(
            self.bins.mapv(&f),
            self.nyquist.mapv(&f),
            self.window_len,
            self.hop,
        )
    }

    pub fn scaled(&self, a: Complex64) -> Result<Self> {
        self.map(|z| z * a)
    }

    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        for c in 0..2 {
            out.bins
                .index_axis_mut(ndarray::Axis(0), c)
                .assign(&self.bins.index_axis(ndarray::Axis(0), 1 - c));
            out.nyquist
                .row_mut(c)
                .assign(&self.nyquist.row(1 - c));
        }
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.bins.dim() == other.bins.dim()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "spectrogram shapes differ: {:?} vs {:?}",
                self.bins.dim(),
                other.bins.dim()
            )))
        }
    }
}

/// Cached window and FFT plans for one [`StftConfig`].
#[derive(Clone)]
pub struct StftPlan {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan").field("cfg", &self.cfg).finish()
    }
}

/// Maps an index of the reflect-padded signal back to the original.
fn reflect_index(padded: usize, half: usize, len: usize) -> usize {
    let k = padded as isize - half as isize;
    let n = len as isize;
    let r = if k < 0 {
        -k
    } else if k >= n {
        2 * (n - 1) - k
    } else {
        k
    };
    r as usize
}

impl StftPlan {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window: cfg.window.coefficients(cfg.window_len),
            forward: planner.plan_fft_forward(cfg.window_len),
            inverse: planner.plan_fft_inverse(cfg.window_len),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len < self.cfg.window_len {
            return Err(Error::InsufficientSamples {
                needed: self.cfg.window_len,
                got: len,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &StereoSignal) -> Result<ComplexSpectrogram> {
        let n = x.len();
        self.check_len(n)?;
        let w = self.cfg.window_len;
        let half = w / 2;
        let f = self.cfg.bins();
        let frames = self.cfg.frame_count(n);
        let mut bins = Array3::zeros((2, frames, f));
        let mut nyquist = Array2::zeros((2, frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); w];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for c in 0..2 {
            let ch = x.channel(c);
            for t in 0..frames {
                let start = t * self.cfg.hop;
                for (m, slot) in buf.iter_mut().enumerate() {
                    let v = ch[reflect_index(start + m, half, n)];
                    *slot = Complex64::new(self.window[m] * v, 0.0);
                }
                self.forward.process_with_scratch(&mut buf, &mut scratch);
                for (k, z) in buf[..f].iter().enumerate() {
                    bins[[c, t, k]] = *z;
                }
                nyquist[[c, t]] = buf[f];
            }
        }
        ComplexSpectrogram::from_parts(bins, nyquist, w, self.cfg.hop)
    }

    fn check_geometry(&self, x: &ComplexSpectrogram) -> Result<()> {
        if x.window_len != self.cfg.window_len
            || x.hop != self.cfg.hop
            || x.num_bins() != self.cfg.bins()
        {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram geometry (window {}, hop {}, {} bins) does not match config \
                 (window {}, hop {}, {} bins)",
                x.window_len,
                x.hop,
                x.num_bins(),
                self.cfg.window_len,
                self.cfg.hop,
                self.cfg.bins()
            )));
        }
        Ok(())
    }

    /// Weighted overlap-add synthesis producing `out_len` samples. Samples
    /// not covered by any frame are zero.
    pub fn inverse(&self, x: &ComplexSpectrogram, out_len: usize) -> Result<StereoSignal> {
        self.check_geometry(x)?;
        let w = self.cfg.window_len;
        let half = w / 2;
        let f = self.cfg.bins();
        let frames = x.frames();
        let padded_len = (frames - 1) * self.cfg.hop + w;
        let mut buf = vec![Complex64::new(0.0, 0.0); w];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];

        let mut norm = vec![0.0; padded_len];
        for t in 0..frames {
            let start = t * self.cfg.hop;
            for (m, wv) in self.window.iter().enumerate() {
                norm[start + m] += wv * wv;
            }
        }
        let floor = f64::EPSILON * norm.iter().cloned().fold(0.0, f64::max);

        let mut out = [vec![0.0; out_len], vec![0.0; out_len]];
        for (c, out_ch) in out.iter_mut().enumerate() {
            let mut acc = vec![0.0; padded_len];
            for t in 0..frames {
                buf[0] = Complex64::new(x.bins[[c, t, 0]].re, 0.0);
                for k in 1..f {
                    let z = x.bins[[c, t, k]];
                    buf[k] = z;
                    buf[w - k] = z.conj();
                }
                buf[f] = Complex64::new(x.nyquist[[c, t]].re, 0.0);
                self.inverse.process_with_scratch(&mut buf, &mut scratch);
                let start = t * self.cfg.hop;
                for (m, z) in buf.iter().enumerate() {
                    acc[start + m] += self.window[m] * z.re / w as f64;
                }
            }
            for (i, slot) in out_ch.iter_mut().enumerate() {
                let j = i + half;
                if j < padded_len && norm[j] > floor {
                    *slot = acc[j] / norm[j];
                }
            }
        }
        let [l, r] = out;
        StereoSignal::new(l, r, crate::DEFAULT_SAMPLE_RATE)
    }

    /// Adjoint of [`StftPlan::forward`] restricted to bins `0..F`: given
    /// `grad[c, t, f] = dL/dRe X + i dL/dIm X`, returns `dL/dx` for a signal
    /// of `signal_len` samples.
    pub fn backward(&self, grad: &Array3<Complex64>, signal_len: usize) -> Result<[Vec<f64>; 2]> {
        self.check_len(signal_len)?;
        let w = self.cfg.window_len;
        let half = w / 2;
        let f = self.cfg.bins();
        let (c_dim, frames, f_dim) = grad.dim();
        if c_dim != 2 || f_dim != f || frames != self.cfg.frame_count(signal_len) {
            return Err(Error::ShapeMismatch(format!(
                "gradient shape {:?} does not match (2, {}, {f})",
                grad.dim(),
                self.cfg.frame_count(signal_len)
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); w];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let mut out = [vec![0.0; signal_len], vec![0.0; signal_len]];
        for (c, out_ch) in out.iter_mut().enumerate() {
            for t in 0..frames {
                for (k, slot) in buf.iter_mut().enumerate() {
                    *slot = if k < f {
                        grad[[c, t, k]]
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
                self.inverse.process_with_scratch(&mut buf, &mut scratch);
                let start = t * self.cfg.hop;
                for (m, z) in buf.iter().enumerate() {
                    out_ch[reflect_index(start + m, half, signal_len)] += self.window[m] * z.re;
                }
            }
        }
        Ok(out)
    }
}

pub fn stft(x: &StereoSignal, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    StftPlan::new(*cfg)?.forward(x)
}

pub fn istft(x: &ComplexSpectrogram, cfg: &StftConfig, out_len: usize) -> Result<StereoSignal> {
    StftPlan::new(*cfg)?.inverse(x, out_len)
}
