//! Objective evaluation: per-channel SDR, stereo-image preservation errors,
//! a known-noise Wiener enhancer and the manifest-driven batch harness.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{image_pres_loss, LossWeights};
use crate::params::BandPartition;
use crate::room::{snr_bucket, t60_class};
use crate::signal::{ComplexSpectrogram, StereoSignal, StftConfig, StftPlan};
use crate::wav;

/// Reported SDR when the estimate matches the reference exactly.
pub const SDR_CAP_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdrReport {
    pub left: f64,
    pub right: f64,
    pub mean: f64,
}

/// Energy-ratio SDR of each channel and their mean, capped at
/// [`SDR_CAP_DB`].
pub fn sdr(s: &StereoSignal, sh: &StereoSignal) -> Result<SdrReport> {
    if s.len() != sh.len() {
        return Err(Error::ShapeMismatch(format!(
            "reference has {} samples, estimate {}",
            s.len(),
            sh.len()
        )));
    }
    let mut out = [0.0; 2];
    for (c, v) in out.iter_mut().enumerate() {
        let (r, e) = (s.channel(c), sh.channel(c));
        let num: f64 = r.iter().map(|x| x * x).sum();
        if num == 0.0 {
            return Err(Error::SilentReference(c));
        }
        let den: f64 = r.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
        *v = if den == 0.0 {
            SDR_CAP_DB
        } else {
            (10.0 * (num / den).log10()).min(SDR_CAP_DB)
        };
    }
    Ok(SdrReport {
        left: out[0],
        right: out[1],
        mean: 0.5 * (out[0] + out[1]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreservationErrors {
    pub iid: f64,
    pub ipd: f64,
    pub ic: f64,
    pub opd: f64,
}

/// Image-preservation errors of `sh` against `s`. These are the loss terms
/// computed by [`image_pres_loss`] on the two spectrograms.
pub fn preservation_errors(
    s: &StereoSignal,
    sh: &StereoSignal,
    cfg: &StftConfig,
    p: &BandPartition,
) -> Result<PreservationErrors> {
    let plan = StftPlan::new(*cfg)?;
    let b = image_pres_loss(&plan.forward(s)?, &plan.forward(sh)?, p, &LossWeights::default())?;
    Ok(PreservationErrors {
        iid: b.l_iid,
        ipd: b.l_ipd,
        ic: b.l_ic,
        opd: b.l_opd,
    })
}

/// Applies the per-channel mask `|S|^2 / (|S|^2 + |N|^2)`, with `S = Y - N`,
/// to the mixture and resynthesizes it. Cells where both powers vanish keep
/// the mixture unchanged.
pub fn oracle_wiener_enhance(y: &StereoSignal, n: &StereoSignal, cfg: &StftConfig) -> Result<StereoSignal> {
    if y.len() != n.len() {
        return Err(Error::ShapeMismatch(format!(
            "mixture has {} samples, noise {}",
            y.len(),
            n.len()
        )));
    }
    let plan = StftPlan::new(cfg.with_crop(None))?;
    let yf = plan.forward(y)?;
    let nf = plan.forward(n)?;
    let gain = |yv: num_complex::Complex64, nv: num_complex::Complex64| {
        let ps = (yv - nv).norm_sqr();
        let pn = nv.norm_sqr();
        if ps + pn == 0.0 {
            yv
        } else {
            yv * (ps / (ps + pn))
        }
    };
    let mut bins = yf.bins().clone();
    bins.zip_mut_with(nf.bins(), |a, b| *a = gain(*a, *b));
    let mut nyq = yf.nyquist().clone();
    nyq.zip_mut_with(nf.nyquist(), |a, b| *a = gain(*a, *b));
    let masked = ComplexSpectrogram::from_parts(bins, nyq, yf.window_len(), yf.hop())?;
    let mut out = plan.inverse(&masked, y.len())?;
    if out.sample_rate() != y.sample_rate() {
        out = StereoSignal::new(out.channel(0).to_vec(), out.channel(1).to_vec(), y.sample_rate())?;
    }
    Ok(out)
}

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub scene: String,
    /// Reverberant speech image, the evaluation reference.
    pub clean: String,
    /// Reverberant noise image.
    pub noise: String,
    pub mix: String,
    pub rir_speech: String,
    pub rir_noise: String,
    pub snr_db: f64,
    pub t60: f64,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_manifest<W: Write>(mut w: W, entries: &[ManifestEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Source of the estimate evaluated against each item's clean reference.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// The unprocessed mixture.
    Noisy,
    /// [`oracle_wiener_enhance`] of the mixture with the known noise.
    Oracle,
    /// The reference itself.
    Identity,
    /// `<dir>/<id>.wav` for every item.
    Directory { label: String, dir: PathBuf },
}

impl Method {
    pub fn label(&self) -> &str {
        match self {
            Method::Noisy => "noisy",
            Method::Oracle => "oracle",
            Method::Identity => "identity",
            Method::Directory { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub item: String,
    pub snr_bucket: f64,
    pub t60_class: String,
    pub sdr_l: f64,
    pub sdr_r: f64,
    pub sdr_mean: f64,
    pub iid: f64,
    pub ipd: f64,
    pub ic: f64,
    pub opd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub method: String,
    pub item: String,
    pub error: String,
}

/// Per-method means over the rows of one SNR bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub method: String,
    pub snr_bucket: f64,
    pub count: usize,
    pub sdr_l: f64,
    pub sdr_r: f64,
    pub sdr_mean: f64,
    pub iid: f64,
    pub ipd: f64,
    pub ic: f64,
    pub opd: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub failures: Vec<EvalFailure>,
    pub buckets: Vec<BucketSummary>,
}

/// Alias kept for callers that think of the table as a report.
pub type EvalReport = EvalTable;

impl EvalTable {
    pub fn all_failed(&self) -> bool {
        self.rows.is_empty() && !self.failures.is_empty()
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a EvalRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        if self.rows.is_empty() {
            out.write_record([
                "method", "item", "snr_bucket", "t60_class", "sdr_l", "sdr_r", "sdr_mean", "iid",
                "ipd", "ic", "opd",
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("evaluation table serializes")
    }
}

/// Arithmetic means of each metric over `rows`, grouped by method and SNR
/// bucket. Groups appear in method order of first occurrence, then by
/// ascending bucket.
pub fn bucket_means(rows: &[EvalRow]) -> Vec<BucketSummary> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out = Vec::new();
    for m in methods {
        let mut buckets: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.snr_bucket).collect();
        buckets.sort_by(f64::total_cmp);
        buckets.dedup();
        for b in buckets {
            let group: Vec<&EvalRow> = rows.iter().filter(|r| r.method == m && r.snr_bucket == b).collect();
            let n = group.len() as f64;
            let mean = |f: fn(&EvalRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            out.push(BucketSummary {
                method: m.to_string(),
                snr_bucket: b,
                count: group.len(),
                sdr_l: mean(|r| r.sdr_l),
                sdr_r: mean(|r| r.sdr_r),
                sdr_mean: mean(|r| r.sdr_mean),
                iid: mean(|r| r.iid),
                ipd: mean(|r| r.ipd),
                ic: mean(|r| r.ic),
                opd: mean(|r| r.opd),
            });
        }
    }
    out
}

struct Item {
    clean: StereoSignal,
    noise: StereoSignal,
    mix: StereoSignal,
}

fn load_item(base: &Path, e: &ManifestEntry) -> Result<Item> {
    let read = |rel: &str| wav::read_stereo(base.join(rel), false);
    Ok(Item {
        clean: read(&e.clean)?,
        noise: read(&e.noise)?,
        mix: read(&e.mix)?,
    })
}

/// Evaluates every method on every manifest entry. Failures are collected
/// per (item, method) and do not stop the batch. Rows are sorted by item id,
/// then by the order of `methods`.
pub fn batch_evaluate(
    entries: &[ManifestEntry],
    base: &Path,
    methods: &[Method],
    cfg: &StftConfig,
    p: &BandPartition,
) -> Result<EvalTable> {
    let cfg = cfg.with_crop(None);
    cfg.validate()?;
    let results: Vec<(usize, usize, std::result::Result<EvalRow, EvalFailure>)> = entries
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, e)| {
            let item = load_item(base, e);
            methods
                .iter()
                .enumerate()
                .map(|(m, method)| {
                    let res = item
                        .as_ref()
                        .map_err(|err| err.to_string())
                        .and_then(|it| evaluate_one(e, it, method, base, &cfg, p).map_err(|err| err.to_string()))
                        .map_err(|error| EvalFailure {
                            method: method.label().to_string(),
                            item: e.id.clone(),
                            error,
                        });
                    (i, m, res)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut ordered = results;
    ordered.sort_by(|a, b| entries[a.0].id.cmp(&entries[b.0].id).then(a.1.cmp(&b.1)));
    let mut table = EvalTable::default();
    for (_, _, r) in ordered {
        match r {
            Ok(row) => table.rows.push(row),
            Err(f) => table.failures.push(f),
        }
    }
    table.buckets = bucket_means(&table.rows);
    Ok(table)
}

fn evaluate_one(
    e: &ManifestEntry,
    item: &Item,
    method: &Method,
    base: &Path,
    cfg: &StftConfig,
    p: &BandPartition,
) -> Result<EvalRow> {
    let est = match method {
        Method::Noisy => item.mix.clone(),
        Method::Oracle => oracle_wiener_enhance(&item.mix, &item.noise, cfg)?,
        Method::Identity => item.clean.clone(),
        Method::Directory { dir, .. } => {
            let dir = if dir.is_absolute() { dir.clone() } else { base.join(dir) };
            wav::read_stereo(dir.join(format!("{}.wav", e.id)), false)?
        }
    };
    let d = sdr(&item.clean, &est)?;
    let pe = preservation_errors(&item.clean, &est, cfg, p)?;
    Ok(EvalRow {
        method: method.label().to_string(),
        item: e.id.clone(),
        snr_bucket: snr_bucket(e.snr_db),
        t60_class: t60_class(e.t60).to_string(),
        sdr_l: d.left,
        sdr_r: d.right,
        sdr_mean: d.mean,
        iid: pe.iid,
        ipd: pe.ipd,
        ic: pe.ic,
        opd: pe.opd,
    })
}
