//! Per-frame, per-band spatial cues of a stereo spectrogram.
//!
//! For every frame `t` and band `b` covering bins `[f_b, f_{b+1})`:
//!
//! ```text
//! P_c = sum |S_c[f]|^2          C = sum S_1[f] conj(S_2[f])
//! IID = 10 log10((P_1 + e) / (P_2 + e))
//! IPD = arg(C)
//! IC  = |C| / sqrt((P_1 + e) (P_2 + e))
//! OPD = arg(sum S_c[f] conj(Ŝ_c[f]))      (per channel, against an estimate)
//! ```
//!
//! `e` is [`BAND_EPS_REL`] times the mean band power of the spectrogram,
//! floored at [`BAND_EPS_FLOOR`]. A band whose combined power is at or below
//! `e` is silent: its IID and IPD are 0 and its IC is 1.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::signal::ComplexSpectrogram;

pub const BAND_EPS_REL: f64 = 1e-10;
pub const BAND_EPS_FLOOR: f64 = 1e-20;

/// Wraps an angle to the principal interval `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        PI
    } else {
        y
    }
}

/// `arg(z)` in `(-pi, pi]`.
pub(crate) fn principal_arg(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandPartition {
    bins: usize,
    bins_per_band: usize,
}

pub fn partition_bands(bins: usize, bins_per_band: usize) -> Result<BandPartition> {
    if bins == 0 || bins_per_band == 0 || bins % bins_per_band != 0 {
        return Err(Error::InvalidConfig(format!(
            "{bins} bins cannot be split into bands of {bins_per_band}"
        )));
    }
    Ok(BandPartition {
        bins,
        bins_per_band,
    })
}

impl BandPartition {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bins_per_band(&self) -> usize {
        self.bins_per_band
    }

    pub fn bands(&self) -> usize {
        self.bins / self.bins_per_band
    }

    /// Band edges `f_1 .. f_{B+1}`.
    pub fn edges(&self) -> Vec<usize> {
        (0..=self.bands()).map(|b| b * self.bins_per_band).collect()
    }

    pub fn band(&self, b: usize) -> Range<usize> {
        b * self.bins_per_band..(b + 1) * self.bins_per_band
    }

    pub(crate) fn check(&self, s: &ComplexSpectrogram) -> Result<()> {
        if s.num_bins() != self.bins {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {} bins, partition expects {}",
                s.num_bins(),
                self.bins
            )));
        }
        Ok(())
    }
}

/// Band-summed powers and cross-spectrum of one spectrogram.
#[derive(Debug, Clone)]
pub(crate) struct BandSums {
    /// `[channel, frame, band]` power sums.
    pub power: Array3<f64>,
    /// `[frame, band]` sums of `S_1 conj(S_2)`.
    pub cross: Array2<Complex64>,
    pub eps: f64,
    /// Whether `eps` came from the relative term rather than the floor.
    pub eps_relative: bool,
}

impl BandSums {
    pub fn new(s: &ComplexSpectrogram, p: &BandPartition) -> Result<Self> {
        p.check(s)?;
        let (frames, bands) = (s.frames(), p.bands());
        let bins = s.bins();
        let mut power = Array3::zeros((2, frames, bands));
        let mut cross = Array2::zeros((frames, bands));
        for t in 0..frames {
            for b in 0..bands {
                let (mut p1, mut p2) = (0.0, 0.0);
                let mut x = Complex64::new(0.0, 0.0);
                for f in p.band(b) {
                    let (a, c) = (bins[[0, t, f]], bins[[1, t, f]]);
                    p1 += a.norm_sqr();
                    p2 += c.norm_sqr();
                    x += a * c.conj();
                }
                power[[0, t, b]] = p1;
                power[[1, t, b]] = p2;
                cross[[t, b]] = x;
            }
        }
        // Channel totals are added last so swapping channels reproduces eps bitwise.
        let left: f64 = power.index_axis(ndarray::Axis(0), 0).sum();
        let right: f64 = power.index_axis(ndarray::Axis(0), 1).sum();
        let mean = (left + right) / (2 * frames * bands) as f64;
        let rel = BAND_EPS_REL * mean;
        Ok(Self {
            power,
            cross,
            eps: rel.max(BAND_EPS_FLOOR),
            eps_relative: rel > BAND_EPS_FLOOR,
        })
    }

    pub fn is_silent(&self, t: usize, b: usize) -> bool {
        self.power[[0, t, b]] + self.power[[1, t, b]] <= self.eps
    }

    pub fn iid(&self, t: usize, b: usize) -> f64 {
        if self.is_silent(t, b) {
            return 0.0;
        }
        10.0 * ((self.power[[0, t, b]] + self.eps).log10() - (self.power[[1, t, b]] + self.eps).log10())
    }

    pub fn ipd(&self, t: usize, b: usize) -> f64 {
        if self.is_silent(t, b) {
            return 0.0;
        }
        principal_arg(self.cross[[t, b]])
    }

    pub fn ic(&self, t: usize, b: usize) -> f64 {
        if self.is_silent(t, b) {
            return 1.0;
        }
        let q1 = self.power[[0, t, b]] + self.eps;
        let q2 = self.power[[1, t, b]] + self.eps;
        // Cauchy-Schwarz bounds this by 1 up to rounding.
        (self.cross[[t, b]].norm() / (q1 * q2).sqrt()).min(1.0)
    }

    pub fn params(&self) -> StereoImageParams {
        let (_, frames, bands) = self.power.dim();
        StereoImageParams {
            iid_db: Array2::from_shape_fn((frames, bands), |(t, b)| self.iid(t, b)),
            ipd_rad: Array2::from_shape_fn((frames, bands), |(t, b)| self.ipd(t, b)),
            ic: Array2::from_shape_fn((frames, bands), |(t, b)| self.ic(t, b)),
        }
    }
}

/// `[frame, band]` sums of `S_c conj(Ŝ_c)` per channel.
pub(crate) fn opd_cross(
    sref: &ComplexSpectrogram,
    sest: &ComplexSpectrogram,
    p: &BandPartition,
) -> Result<Array3<Complex64>> {
    p.check(sref)?;
    sref.ensure_same_shape(sest)?;
    let (frames, bands) = (sref.frames(), p.bands());
    let mut out = Array3::zeros((2, frames, bands));
    for c in 0..2 {
        for t in 0..frames {
            for b in 0..bands {
                out[[c, t, b]] = p
                    .band(b)
                    .map(|f| sref.bins()[[c, t, f]] * sest.bins()[[c, t, f]].conj())
                    .sum();
            }
        }
    }
    Ok(out)
}

/// IID, IPD and IC per `[frame, band]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoImageParams {
    pub iid_db: Array2<f64>,
    pub ipd_rad: Array2<f64>,
    pub ic: Array2<f64>,
}

/// OPD per `[channel, frame, band]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpdParams {
    pub opd_rad: Array3<f64>,
}

pub fn image_params(s: &ComplexSpectrogram, p: &BandPartition) -> Result<StereoImageParams> {
    Ok(BandSums::new(s, p)?.params())
}

pub fn opd(
    sref: &ComplexSpectrogram,
    sest: &ComplexSpectrogram,
    p: &BandPartition,
) -> Result<OpdParams> {
    let cross = opd_cross(sref, sest, p)?;
    Ok(OpdParams {
        opd_rad: cross.mapv(principal_arg),
    })
}

#[derive(Serialize)]
struct ParamsJson {
    frames: usize,
    bands: usize,
    iid_db: Vec<Vec<f64>>,
    ipd_rad: Vec<Vec<f64>>,
    ic: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    opd_rad: Option<[Vec<Vec<f64>>; 2]>,
}

fn rows(a: ndarray::ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl StereoImageParams {
    pub fn frames(&self) -> usize {
        self.iid_db.nrows()
    }

    pub fn bands(&self) -> usize {
        self.iid_db.ncols()
    }

    /// Frame-major JSON document, optionally with OPD against a reference.
    pub fn to_json(&self, opd: Option<&OpdParams>) -> serde_json::Value {
        let doc = ParamsJson {
            frames: self.frames(),
            bands: self.bands(),
            iid_db: rows(self.iid_db.view()),
            ipd_rad: rows(self.ipd_rad.view()),
            ic: rows(self.ic.view()),
            opd_rad: opd.map(|o| {
                [
                    rows(o.opd_rad.index_axis(ndarray::Axis(0), 0)),
                    rows(o.opd_rad.index_axis(ndarray::Axis(0), 1)),
                ]
            }),
        };
        serde_json::to_value(doc).expect("parameter tensors serialize")
    }

    /// One CSV row per `(frame, band)`, frame-major.
    pub fn write_csv<W: Write>(&self, w: W, opd: Option<&OpdParams>) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["frame", "band", "iid_db", "ipd_rad", "ic"];
        if opd.is_some() {
            header.extend(["opd_l_rad", "opd_r_rad"]);
        }
        out.write_record(&header)?;
        for t in 0..self.frames() {
            for b in 0..self.bands() {
                let mut rec = vec![
                    t.to_string(),
                    b.to_string(),
                    self.iid_db[[t, b]].to_string(),
                    self.ipd_rad[[t, b]].to_string(),
                    self.ic[[t, b]].to_string(),
                ];
                if let Some(o) = opd {
                    rec.push(o.opd_rad[[0, t, b]].to_string());
                    rec.push(o.opd_rad[[1, t, b]].to_string());
                }
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
