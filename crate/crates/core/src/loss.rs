//! The stereo-aware training objective.
//!
//! ```text
//! total = LSD + a_TL TL + a_IID L_IID + a_IPD L_IPD + a_IC L_IC + a_OPD L_OPD
//! ```
//!
//! Each term is a mean over frames (and channels, where applicable) of a
//! per-frame RMS:
//!
//! * `LSD`: RMS over bins of `g(|S|) - g(|Ŝ|)` with the generalized
//!   logarithm `g(x) = ((x + 1e-12)^γ - 1) / γ`, averaged over channels and frames.
//! * `TL`: per-channel RMS waveform error, averaged over channels.
//! * `L_IID`, `L_IPD`, `L_IC`: RMS over bands of the parameter difference,
//!   averaged over frames. IPD differences are wrapped to `(-pi, pi]`.
//! * `L_OPD`: RMS over bands of the OPD between reference and estimate,
//!   averaged over channels and frames.
//!
//! Terms that are disabled are still reported in the breakdown but do not
//! enter `total`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{opd_cross, partition_bands, principal_arg, wrap_angle, BandPartition, BandSums};
use crate::signal::{ComplexSpectrogram, StereoSignal, StftConfig, StftPlan};

/// Offset added to magnitudes before the generalized logarithm.
pub const GENLOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenLogParams {
    pub gamma: f64,
}

impl Default for GenLogParams {
    fn default() -> Self {
        Self { gamma: 1.0 / 3.0 }
    }
}

impl GenLogParams {
    pub fn new(gamma: f64) -> Result<Self> {
        let g = Self { gamma };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} must lie in (0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }

    /// `g(mag)`.
    pub fn apply(&self, mag: f64) -> f64 {
        ((mag + GENLOG_EPS).powf(self.gamma) - 1.0) / self.gamma
    }

    /// `g'(mag)`.
    pub fn derivative(&self, mag: f64) -> f64 {
        (mag + GENLOG_EPS).powf(self.gamma - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnabledTerms {
    pub lsd: bool,
    pub tl: bool,
    pub iid: bool,
    pub ipd: bool,
    pub ic: bool,
    pub opd: bool,
}

impl Default for EnabledTerms {
    fn default() -> Self {
        Self::all()
    }
}

impl EnabledTerms {
    pub fn all() -> Self {
        Self {
            lsd: true,
            tl: true,
            iid: true,
            ipd: true,
            ic: true,
            opd: true,
        }
    }

    pub fn none() -> Self {
        Self {
            lsd: false,
            tl: false,
            iid: false,
            ipd: false,
            ic: false,
            opd: false,
        }
    }

    pub fn any_image(&self) -> bool {
        self.iid || self.ipd || self.ic || self.opd
    }

    pub fn any_spectral(&self) -> bool {
        self.lsd || self.any_image()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha_tl: f64,
    pub alpha_iid: f64,
    pub alpha_ipd: f64,
    pub alpha_ic: f64,
    pub alpha_opd: f64,
    pub enabled: EnabledTerms,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha_tl: 50.0,
            alpha_iid: 0.05,
            alpha_ipd: 0.05,
            alpha_ic: 0.4,
            alpha_opd: 0.05,
            enabled: EnabledTerms::all(),
        }
    }
}

impl LossWeights {
    /// Default weights with the terms named by a training-method label such
    /// as `spec`, `spec-time`, `stereo-spec-time-IC` or `spec-time-all`.
    pub fn for_method(label: &str) -> Result<Self> {
        let normalized: String = label
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_lowercase();
        let body = normalized.strip_prefix("stereo-").unwrap_or(&normalized);
        let mut enabled = EnabledTerms::none();
        for part in body.split('-') {
            match part {
                "spec" => enabled.lsd = true,
                "time" => enabled.tl = true,
                "iid" => enabled.iid = true,
                "ipd" => enabled.ipd = true,
                "ic" => enabled.ic = true,
                "opd" => enabled.opd = true,
                "all" => {
                    enabled.iid = true;
                    enabled.ipd = true;
                    enabled.ic = true;
                    enabled.opd = true;
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown loss term `{other}` in method `{label}`"
                    )))
                }
            }
        }
        Ok(Self {
            enabled,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha_tl", self.alpha_tl),
            ("alpha_iid", self.alpha_iid),
            ("alpha_ipd", self.alpha_ipd),
            ("alpha_ic", self.alpha_ic),
            ("alpha_opd", self.alpha_opd),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Itemized loss values and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub lsd: f64,
    pub tl: f64,
    pub l_iid: f64,
    pub l_ipd: f64,
    pub l_ic: f64,
    pub l_opd: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub const FIELDS: [&'static str; 7] = ["lsd", "tl", "l_iid", "l_ipd", "l_ic", "l_opd", "total"];

    /// Weighted sum of the enabled parts.
    pub fn recombine(&self, w: &LossWeights) -> f64 {
        let e = &w.enabled;
        let mut total = 0.0;
        if e.lsd {
            total += self.lsd;
        }
        if e.tl {
            total += w.alpha_tl * self.tl;
        }
        if e.iid {
            total += w.alpha_iid * self.l_iid;
        }
        if e.ipd {
            total += w.alpha_ipd * self.l_ipd;
        }
        if e.ic {
            total += w.alpha_ic * self.l_ic;
        }
        if e.opd {
            total += w.alpha_opd * self.l_opd;
        }
        total
    }

    /// Flat record in [`LossBreakdown::FIELDS`] order.
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.lsd, self.tl, self.l_iid, self.l_ipd, self.l_ic, self.l_opd, self.total,
        ]
    }
}

/// Everything needed to evaluate the loss; also the on-disk JSON schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub stft: StftConfig,
    pub bins_per_band: usize,
    pub gamma: f64,
    pub weights: LossWeights,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            bins_per_band: 32,
            gamma: 1.0 / 3.0,
            weights: LossWeights::default(),
        }
    }
}

impl LossConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        partition_bands(self.stft.bins(), self.bins_per_band)?;
        GenLogParams::new(self.gamma)?;
        self.weights.validate()
    }
}

/// Per-frame RMS of a sequence of differences.
pub(crate) fn rms<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut n = 0usize;
    let mut acc = 0.0;
    for v in values {
        acc += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (acc / n as f64).sqrt()
    }
}

pub fn lsd(s: &ComplexSpectrogram, sh: &ComplexSpectrogram, g: &GenLogParams) -> Result<f64> {
    s.ensure_same_shape(sh)?;
    g.validate()?;
    let (frames, bins) = (s.frames(), s.num_bins());
    let mut acc = 0.0;
    for c in 0..2 {
        for t in 0..frames {
            acc += rms((0..bins).map(|f| {
                g.apply(s.bins()[[c, t, f]].norm()) - g.apply(sh.bins()[[c, t, f]].norm())
            }));
        }
    }
    Ok(acc / (2 * frames) as f64)
}

pub fn time_loss(s: &StereoSignal, sh: &StereoSignal) -> Result<f64> {
    if s.len() != sh.len() {
        return Err(Error::ShapeMismatch(format!(
            "signal lengths differ: {} vs {}",
            s.len(),
            sh.len()
        )));
    }
    let per_channel: f64 = (0..2)
        .map(|c| rms(s.channel(c).iter().zip(sh.channel(c)).map(|(a, b)| a - b)))
        .sum();
    Ok(per_channel / 2.0)
}

/// Image-preservation terms computed from precomputed band statistics.
pub(crate) struct ImageTerms {
    pub iid: f64,
    pub ipd: f64,
    pub ic: f64,
    pub opd: f64,
}

impl ImageTerms {
    pub fn compute(
        s: &ComplexSpectrogram,
        sh: &ComplexSpectrogram,
        p: &BandPartition,
    ) -> Result<Self> {
        s.ensure_same_shape(sh)?;
        let ref_sums = BandSums::new(s, p)?;
        let est_sums = BandSums::new(sh, p)?;
        let cross = opd_cross(s, sh, p)?;
        let (frames, bands) = (s.frames(), p.bands());
        let per_frame = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
            (0..frames).map(|t| rms((0..bands).map(|b| f(t, b)))).sum::<f64>() / frames as f64
        };
        let iid = per_frame(&|t, b| ref_sums.iid(t, b) - est_sums.iid(t, b));
        let ipd = per_frame(&|t, b| wrap_angle(ref_sums.ipd(t, b) - est_sums.ipd(t, b)));
        let ic = per_frame(&|t, b| ref_sums.ic(t, b) - est_sums.ic(t, b));
        let mut opd = 0.0;
        for c in 0..2 {
            for t in 0..frames {
                opd += rms((0..bands).map(|b| principal_arg(cross[[c, t, b]])));
            }
        }
        opd /= (2 * frames) as f64;
        Ok(Self { iid, ipd, ic, opd })
    }
}

/// Image-preservation part of the loss. `lsd` and `tl` are zero in the
/// returned breakdown and `total` is the weighted sum of the enabled image
/// terms.
pub fn image_pres_loss(
    s: &ComplexSpectrogram,
    sh: &ComplexSpectrogram,
    p: &BandPartition,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    w.validate()?;
    let terms = ImageTerms::compute(s, sh, p)?;
    let mut out = LossBreakdown {
        l_iid: terms.iid,
        l_ipd: terms.ipd,
        l_ic: terms.ic,
        l_opd: terms.opd,
        ..Default::default()
    };
    let image_only = LossWeights {
        enabled: EnabledTerms {
            lsd: false,
            tl: false,
            ..w.enabled
        },
        ..*w
    };
    out.total = out.recombine(&image_only);
    Ok(out)
}

/// Reusable loss evaluator holding the STFT plan and band layout.
#[derive(Debug, Clone)]
pub struct StereoLoss {
    pub(crate) plan: StftPlan,
    pub(crate) partition: BandPartition,
    pub(crate) genlog: GenLogParams,
    pub(crate) weights: LossWeights,
}

impl StereoLoss {
    pub fn new(cfg: &LossConfig) -> Result<Self> {
        cfg.validate()?;
        let partition = partition_bands(cfg.stft.bins(), cfg.bins_per_band)?;
        Self::from_parts(&cfg.stft, partition, GenLogParams::new(cfg.gamma)?, cfg.weights)
    }

    pub fn from_parts(
        stft: &StftConfig,
        partition: BandPartition,
        genlog: GenLogParams,
        weights: LossWeights,
    ) -> Result<Self> {
        genlog.validate()?;
        weights.validate()?;
        if partition.bins() != stft.bins() {
            return Err(Error::InvalidConfig(format!(
                "band partition covers {} bins but the STFT yields {}",
                partition.bins(),
                stft.bins()
            )));
        }
        Ok(Self {
            plan: StftPlan::new(*stft)?,
            partition,
            genlog,
            weights,
        })
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn partition(&self) -> &BandPartition {
        &self.partition
    }

    pub fn stft_plan(&self) -> &StftPlan {
        &self.plan
    }

    pub fn evaluate(&self, s: &StereoSignal, sh: &StereoSignal) -> Result<LossBreakdown> {
        let tl = time_loss(s, sh)?;
        let spec_ref = self.plan.forward(s)?;
        let spec_est = self.plan.forward(sh)?;
        let lsd = lsd(&spec_ref, &spec_est, &self.genlog)?;
        let image = ImageTerms::compute(&spec_ref, &spec_est, &self.partition)?;
        let mut out = LossBreakdown {
            lsd,
            tl,
            l_iid: image.iid,
            l_ipd: image.ipd,
            l_ic: image.ic,
            l_opd: image.opd,
            total: 0.0,
        };
        out.total = out.recombine(&self.weights);
        Ok(out)
    }
}

pub fn total_loss(
    s: &StereoSignal,
    sh: &StereoSignal,
    cfg: &StftConfig,
    p: &BandPartition,
    g: &GenLogParams,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    StereoLoss::from_parts(cfg, *p, *g, *w)?.evaluate(s, sh)
}
