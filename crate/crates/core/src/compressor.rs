//! Frequency-axis band compressor and its replication inverse.
//!
//! Bins `[0, F/4)` pass through, `[F/4, F/2)` are averaged in disjoint
//! pairs and `[F/2, F)` in disjoint groups of four, halving the bin count.

use std::ops::Range;

use ndarray::Array3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexSpectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandCompressorSpec {
    bins: usize,
}

impl BandCompressorSpec {
    pub const MID_FACTOR: usize = 2;
    pub const HIGH_FACTOR: usize = 4;

    /// `bins` must be a positive multiple of 8 so every averaging group is
    /// complete.
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 || bins % 8 != 0 {
            return Err(Error::InvalidConfig(format!(
                "band compressor needs a bin count divisible by 8, got {bins}"
            )));
        }
        Ok(Self { bins })
    }

    /// Spec for a compressed spectrogram with `compressed` bins.
    pub fn from_compressed(compressed: usize) -> Result<Self> {
        if compressed == 0 || compressed % 4 != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{compressed} bins is not a valid compressed length"
            )));
        }
        Self::new(compressed * 2)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn pass_edge(&self) -> usize {
        self.bins / 4
    }

    pub fn mid_edge(&self) -> usize {
        self.bins / 2
    }

    pub fn compressed_len(&self) -> usize {
        self.pass_edge() + self.pass_edge() / Self::MID_FACTOR + self.mid_edge() / Self::HIGH_FACTOR
    }

    /// Source bin range of every compressed bin, in order.
    pub fn groups(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        let pass = (0..self.pass_edge()).map(|k| k..k + 1);
        let mid = (self.pass_edge()..self.mid_edge())
            .step_by(Self::MID_FACTOR)
            .map(|k| k..k + Self::MID_FACTOR);
        let high = (self.mid_edge()..self.bins)
            .step_by(Self::HIGH_FACTOR)
            .map(|k| k..k + Self::HIGH_FACTOR);
        pass.chain(mid).chain(high)
    }
}

/// Pairwise sum so that a group of equal values averages back exactly.
fn group_mean(x: &ComplexSpectrogram, c: usize, t: usize, group: Range<usize>) -> Complex64 {
    let v = |f: usize| x.bins()[[c, t, f]];
    let s = group.start;
    match group.len() {
        1 => v(s),
        2 => (v(s) + v(s + 1)) / 2.0,
        _ => ((v(s) + v(s + 1)) + (v(s + 2) + v(s + 3))) / 4.0,
    }
}

pub fn compress(x: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    let spec = BandCompressorSpec::new(x.num_bins())?;
    let frames = x.frames();
    let mut out = Array3::zeros((2, frames, spec.compressed_len()));
    for c in 0..2 {
        for t in 0..frames {
            for (k, group) in spec.groups().enumerate() {
                out[[c, t, k]] = group_mean(x, c, t, group);
            }
        }
    }
    ComplexSpectrogram::from_parts(out, x.nyquist().clone(), x.window_len(), x.hop())
}

pub fn decompress(xc: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    let spec = BandCompressorSpec::from_compressed(xc.num_bins())?;
    let frames = xc.frames();
    let mut out = Array3::zeros((2, frames, spec.bins()));
    for c in 0..2 {
        for t in 0..frames {
            for (k, group) in spec.groups().enumerate() {
                let v = xc.bins()[[c, t, k]];
                for f in group {
                    out[[c, t, f]] = v;
                }
            }
        }
    }
    ComplexSpectrogram::from_parts(out, xc.nyquist().clone(), xc.window_len(), xc.hop())
}
