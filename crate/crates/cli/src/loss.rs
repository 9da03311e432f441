use rayon::prelude::*;
use serde::Serialize;
use stereo_aware::{LossBreakdown, LossConfig, LossWeights, StereoLoss, StereoSignal};

use crate::analyze::read_input;
use crate::failure::{emit, Failure, WithPath};
use crate::LossArgs;

/// Trims two signals to a common length when they differ by at most one hop.
pub fn align(a: StereoSignal, b: StereoSignal, hop: usize) -> Result<(StereoSignal, StereoSignal), Failure> {
    let (la, lb) = (a.len(), b.len());
    if la.abs_diff(lb) > hop {
        return Err(Failure::validation(format!(
            "length mismatch: {la} vs {lb} samples differs by more than one hop ({hop})"
        )));
    }
    let n = la.min(lb);
    Ok((a.segment(0, n)?, b.segment(0, n)?))
}

#[derive(Serialize)]
struct GradCheck {
    segment_samples: usize,
    coordinates: usize,
    max_rel_error: f64,
    singular_cells: usize,
}

#[derive(Serialize)]
struct Report {
    weights: LossWeights,
    breakdown: LossBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad_check: Option<GradCheck>,
}

/// Central-difference audit of the analytic gradient, step 1e-4 relative.
fn grad_check(loss: &StereoLoss, s: &StereoSignal, sh: &StereoSignal) -> Result<GradCheck, Failure> {
    let g = loss.gradient(s, sh)?;
    let n = sh.len();
    let fd: Vec<f64> = (0..2 * n)
        .into_par_iter()
        .map(|i| {
            let (c, k) = (i / n, i % n);
            let h = 1e-4 * sh.channel(c)[k].abs().max(1e-2);
            let bump = |d: f64| -> stereo_aware::Result<f64> {
                let mut ch = sh.clone().into_channels();
                ch[c][k] += d;
                let [l, r] = ch;
                Ok(loss.evaluate(s, &StereoSignal::new(l, r, sh.sample_rate())?)?.total)
            };
            Ok((bump(h)? - bump(-h)?) / (2.0 * h))
        })
        .collect::<stereo_aware::Result<_>>()?;
    let analytic = g.to_flat();
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = analytic.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(GradCheck {
        segment_samples: n,
        coordinates: 2 * n,
        max_rel_error: if diff == 0.0 { 0.0 } else { diff / scale.max(f64::MIN_POSITIVE) },
        singular_cells: g.singular_cells,
    })
}

pub fn run(args: LossArgs) -> Result<(), Failure> {
    let cfg = match &args.config {
        Some(path) => LossConfig::load(path).at(path)?,
        None => LossConfig::default(),
    };
    let loss = StereoLoss::new(&cfg)?;
    let s = read_input(&args.reference, args.upmix)?;
    let sh = read_input(&args.estimate, args.upmix)?;
    let (s, sh) = align(s, sh, cfg.stft.hop)?;
    let breakdown = loss.evaluate(&s, &sh)?;
    let grad = if args.grad_check {
        let len = s.len().min(cfg.stft.window_len + 4 * cfg.stft.hop);
        Some(grad_check(&loss, &s.segment(0, len)?, &sh.segment(0, len)?)?)
    } else {
        None
    };
    let report = Report {
        weights: cfg.weights,
        breakdown,
        grad_check: grad,
    };
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"))
}
