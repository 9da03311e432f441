//! Analytic gradient of the stereo-aware loss with respect to the estimate.
//!
//! Spectral terms are differentiated with respect to the estimate's STFT
//! coefficients using the convention `G = dL/dRe X + i dL/dIm X`; the
//! accumulated spectrogram gradient is then pulled back to the waveform by
//! [`StftPlan::backward`]. The time loss is differentiated directly.
//!
//! For a real function `h` of a cross-spectrum `C = sum X_1 conj(X_2)` with
//! gradient `H = dh/dC`, the per-bin gradients are `H X_2` for `X_1` and
//! `conj(H) X_1` for `X_2`. With `H = iC/|C|^2` this gives `arg`, with
//! `H = C/|C|^2` it gives `ln |C|`.
//!
//! Subgradient conventions: `sqrt` at 0 and `|x|` at 0 both get derivative 0,
//! which is also the central difference at such a kink. Cells on silent or
//! zero-magnitude bins, bands with a vanishing cross-spectrum, IC within
//! `1e-12` of 1, or phases within `1e-6` rad of the wrap are counted in
//! [`LossGradient::singular_cells`].

use std::f64::consts::{LN_10, PI};

use ndarray::Array3;
use num_complex::Complex64;

use crate::error::Result;
use crate::loss::{rms, GenLogParams, LossWeights, StereoLoss};
use crate::params::{
    opd_cross, principal_arg, wrap_angle, BandPartition, BandSums, BAND_EPS_REL,
};
use crate::signal::{StereoSignal, StftConfig};

const RMS_TOL: f64 = 1e-12;
const WRAP_TOL: f64 = 1e-6;
const DEGENERATE_REL: f64 = 1e-12;
const IC_TOL: f64 = 1e-12;

/// Gradient of the total loss with respect to each estimate sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub grad: [Vec<f64>; 2],
    /// Number of frames/bands where a subgradient convention was applied.
    pub singular_cells: usize,
}

impl LossGradient {
    pub fn is_singular(&self) -> bool {
        self.singular_cells > 0
    }

    /// Channel-major flat array of length `2N`: left samples, then right.
    pub fn to_flat(&self) -> Vec<f64> {
        self.grad.iter().flatten().copied().collect()
    }
}

/// `d rms / d v_i = v_i / (n * rms)`, zero when `rms` vanishes.
fn rms_scale(r: f64, n: usize) -> f64 {
    if r > RMS_TOL {
        1.0 / (n as f64 * r)
    } else {
        0.0
    }
}

impl StereoLoss {
    pub fn gradient(&self, s: &StereoSignal, sh: &StereoSignal) -> Result<LossGradient> {
        let w = &self.weights;
        let n = sh.len();
        crate::loss::time_loss(s, sh)?;
        let mut grad = [vec![0.0; n], vec![0.0; n]];
        let mut singular = 0usize;

        if w.enabled.tl {
            for (c, g) in grad.iter_mut().enumerate() {
                let (a, b) = (s.channel(c), sh.channel(c));
                let r = rms(a.iter().zip(b).map(|(x, y)| x - y));
                let k = 0.5 * w.alpha_tl * rms_scale(r, n);
                for ((gi, x), y) in g.iter_mut().zip(a).zip(b) {
                    *gi += k * (y - x);
                }
            }
        }

        if w.enabled.any_spectral() {
            let spec_ref = self.plan.forward(s)?;
            let spec_est = self.plan.forward(sh)?;
            let frames = spec_est.frames();
            let mut g_spec = Array3::<Complex64>::zeros(spec_est.bins().dim());
            if w.enabled.lsd {
                singular += lsd_grad(&spec_ref, &spec_est, &self.genlog, &mut g_spec);
            }
            if w.enabled.any_image() {
                singular += image_grad(&spec_ref, &spec_est, &self.partition, w, &mut g_spec)?;
            }
            debug_assert_eq!(frames, g_spec.dim().1);
            let back = self.plan.backward(&g_spec, n)?;
            for (g, b) in grad.iter_mut().zip(back) {
                for (gi, bi) in g.iter_mut().zip(b) {
                    *gi += bi;
                }
            }
        }

        Ok(LossGradient {
            grad,
            singular_cells: singular,
        })
    }
}

fn lsd_grad(
    s: &crate::signal::ComplexSpectrogram,
    sh: &crate::signal::ComplexSpectrogram,
    g: &GenLogParams,
    out: &mut Array3<Complex64>,
) -> usize {
    let (_, frames, bins) = sh.bins().dim();
    let mut singular = 0;
    let mut diff = vec![0.0; bins];
    for c in 0..2 {
        for t in 0..frames {
            for (f, d) in diff.iter_mut().enumerate() {
                *d = g.apply(s.bins()[[c, t, f]].norm()) - g.apply(sh.bins()[[c, t, f]].norm());
            }
            let r = rms(diff.iter().copied());
            let k = rms_scale(r, bins) / (2 * frames) as f64;
            for (f, d) in diff.iter().enumerate() {
                let z = sh.bins()[[c, t, f]];
                let mag = z.norm();
                if mag == 0.0 {
                    singular += 1;
                    continue;
                }
                // d/dŜ of -g(|Ŝ|) is -g'(|Ŝ|) Ŝ/|Ŝ|.
                out[[c, t, f]] -= z * (k * d * g.derivative(mag) / mag);
            }
        }
    }
    singular
}

/// Per-band upstream coefficients for one frame's RMS term.
fn frame_coeffs(diffs: &[f64], scale: f64) -> Vec<f64> {
    let k = scale * rms_scale(rms(diffs.iter().copied()), diffs.len());
    diffs.iter().map(|d| k * d).collect()
}

fn image_grad(
    s: &crate::signal::ComplexSpectrogram,
    sh: &crate::signal::ComplexSpectrogram,
    p: &BandPartition,
    w: &LossWeights,
    out: &mut Array3<Complex64>,
) -> Result<usize> {
    let e = &w.enabled;
    let ref_sums = BandSums::new(s, p)?;
    let est = BandSums::new(sh, p)?;
    let (frames, bands) = (sh.frames(), p.bands());
    let bins = sh.bins();
    let inv_t = 1.0 / frames as f64;
    let db = 10.0 / LN_10;
    let mut singular = 0usize;
    // Accumulated dL/d eps of the estimate's band floor.
    let mut d_eps = 0.0;

    let mut iid_d = vec![0.0; bands];
    let mut ipd_d = vec![0.0; bands];
    let mut ic_d = vec![0.0; bands];
    for t in 0..frames {
        for b in 0..bands {
            iid_d[b] = ref_sums.iid(t, b) - est.iid(t, b);
            ipd_d[b] = wrap_angle(ref_sums.ipd(t, b) - est.ipd(t, b));
            ic_d[b] = ref_sums.ic(t, b) - est.ic(t, b);
        }
        // Loss terms depend on -M(Ŝ), hence the negative scale.
        let a_iid = frame_coeffs(&iid_d, -w.alpha_iid * inv_t);
        let a_ipd = frame_coeffs(&ipd_d, -w.alpha_ipd * inv_t);
        let a_ic = frame_coeffs(&ic_d, -w.alpha_ic * inv_t);

        for b in 0..bands {
            if est.is_silent(t, b) {
                singular += 1;
                continue;
            }
            let q1 = est.power[[0, t, b]] + est.eps;
            let q2 = est.power[[1, t, b]] + est.eps;
            let cross = est.cross[[t, b]];
            let cross_sq = cross.norm_sqr();
            let cross_degenerate = cross_sq <= (DEGENERATE_REL * DEGENERATE_REL) * q1 * q2;

            // Gradient w.r.t. X_1 is a1 X_1 + h1 X_2, w.r.t. X_2 is a2 X_2 + h2 X_1.
            let mut a1 = 0.0;
            let mut a2 = 0.0;
            let mut h1 = Complex64::new(0.0, 0.0);
            let mut h2 = Complex64::new(0.0, 0.0);

            if e.iid {
                let k = a_iid[b] * db;
                a1 += 2.0 * k / q1;
                a2 -= 2.0 * k / q2;
                d_eps += k * (1.0 / q1 - 1.0 / q2);
            }
            if e.ipd {
                if cross_degenerate || PI - ipd_d[b].abs() <= WRAP_TOL {
                    singular += 1;
                }
                if !cross_degenerate {
                    let hc = Complex64::new(0.0, 1.0) * cross / cross_sq * a_ipd[b];
                    h1 += hc;
                    h2 += hc.conj();
                }
            }
            if e.ic {
                let ic = est.ic(t, b);
                if 1.0 - ic <= IC_TOL {
                    singular += 1;
                }
                let k = a_ic[b] * ic;
                a1 -= k / q1;
                a2 -= k / q2;
                d_eps -= 0.5 * k * (1.0 / q1 + 1.0 / q2);
                if cross_degenerate {
                    singular += 1;
                } else {
                    let hc = cross / cross_sq * k;
                    h1 += hc;
                    h2 += hc.conj();
                }
            }

            for f in p.band(b) {
                let (x1, x2) = (bins[[0, t, f]], bins[[1, t, f]]);
                out[[0, t, f]] += x1 * a1 + h1 * x2;
                out[[1, t, f]] += x2 * a2 + h2 * x1;
            }
        }
    }

    if e.opd {
        let cross = opd_cross(s, sh, p)?;
        let scale = w.alpha_opd / (2 * frames) as f64;
        let mut o = vec![0.0; bands];
        for c in 0..2 {
            for t in 0..frames {
                for (b, ob) in o.iter_mut().enumerate() {
                    *ob = principal_arg(cross[[c, t, b]]);
                }
                let a_opd = frame_coeffs(&o, scale);
                for b in 0..bands {
                    let d = cross[[c, t, b]];
                    let d_sq = d.norm_sqr();
                    let pr = ref_sums.power[[c, t, b]];
                    let pe = est.power[[c, t, b]];
                    if d_sq <= DEGENERATE_REL * DEGENERATE_REL * pr * pe || d_sq == 0.0 {
                        singular += 1;
                        continue;
                    }
                    if PI - o[b].abs() <= WRAP_TOL {
                        singular += 1;
                    }
                    // d arg(sum S conj(Ŝ)) / dŜ = -i conj(D) S / |D|^2.
                    let k = Complex64::new(0.0, -1.0) * d.conj() / d_sq * a_opd[b];
                    for f in p.band(b) {
                        out[[c, t, f]] += k * s.bins()[[c, t, f]];
                    }
                }
            }
        }
    }

    if d_eps != 0.0 && est.eps_relative {
        // eps = BAND_EPS_REL * sum |X|^2 / (2 T B), so d eps / dX = BAND_EPS_REL X / (T B).
        let k = d_eps * BAND_EPS_REL / (frames * bands) as f64;
        out.zip_mut_with(bins, |g, x| *g += x * k);
    }

    Ok(singular)
}

pub fn loss_gradient(
    s: &StereoSignal,
    sh: &StereoSignal,
    cfg: &StftConfig,
    p: &BandPartition,
    g: &GenLogParams,
    w: &LossWeights,
) -> Result<LossGradient> {
    StereoLoss::from_parts(cfg, *p, *g, *w)?.gradient(s, sh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{EnabledTerms, LossWeights};
    use crate::params::partition_bands;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(rng: &mut ChaCha8Rng, len: usize) -> (StereoSignal, StereoSignal) {
        let mut ch = || (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let s = StereoSignal::new(ch(), ch(), 48_000).unwrap();
        let noise = StereoSignal::new(ch(), ch(), 48_000).unwrap();
        let sh = s.zip_with(&noise, |a, b| a + 0.3 * b).unwrap();
        (s, sh)
    }

    fn only(f: impl Fn(&mut EnabledTerms)) -> LossWeights {
        let mut e = EnabledTerms::none();
        f(&mut e);
        LossWeights {
            enabled: e,
            ..LossWeights::default()
        }
    }

    fn central_difference(loss: &StereoLoss, s: &StereoSignal, sh: &StereoSignal, c: usize, i: usize) -> f64 {
        let h = 1e-4 * sh.channel(c)[i].abs().max(1e-2);
        let bump = |delta: f64| {
            let mut chans = sh.clone().into_channels();
            chans[c][i] += delta;
            let [l, r] = chans;
            let x = StereoSignal::new(l, r, 48_000).unwrap();
            loss.evaluate(s, &x).unwrap().total
        };
        (bump(h) - bump(-h)) / (2.0 * h)
    }

    #[test]
    fn time_loss_gradient_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, sh) = pair(&mut rng, 300);
        let w = only(|e| e.tl = true);
        let g = loss_gradient(&s, &sh, &StftConfig::new(128, 32), &partition_bands(64, 32).unwrap(), &GenLogParams::default(), &w).unwrap();
        for c in 0..2 {
            let r = rms(s.channel(c).iter().zip(sh.channel(c)).map(|(a, b)| a - b));
            for i in 0..300 {
                let expect = 50.0 * 0.5 * (sh.channel(c)[i] - s.channel(c)[i]) / (300.0 * r);
                assert!((g.grad[c][i] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn disabled_terms_contribute_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (s, sh) = pair(&mut rng, 300);
        let cfg = StftConfig::new(128, 32);
        let p = partition_bands(64, 32).unwrap();
        let gl = GenLogParams::default();
        let tl = loss_gradient(&s, &sh, &cfg, &p, &gl, &only(|e| e.tl = true)).unwrap();
        let mut zero_weights = LossWeights::default();
        zero_weights.alpha_iid = 0.0;
        zero_weights.enabled = only(|e| {
            e.tl = true;
        })
        .enabled;
        let again = loss_gradient(&s, &sh, &cfg, &p, &gl, &zero_weights).unwrap();
        assert_eq!(tl.grad, again.grad);
        let none = loss_gradient(&s, &sh, &cfg, &p, &gl, &only(|_| {})).unwrap();
        assert!(none.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn each_term_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (s, sh) = pair(&mut rng, 256);
        let cfg = StftConfig::new(128, 32);
        let p = partition_bands(64, 32).unwrap();
        let setters: [fn(&mut EnabledTerms); 6] = [
            |e| e.lsd = true,
            |e| e.tl = true,
            |e| e.iid = true,
            |e| e.ipd = true,
            |e| e.ic = true,
            |e| e.opd = true,
        ];
        for (k, set) in setters.iter().enumerate() {
            let loss = StereoLoss::from_parts(&cfg, p, GenLogParams::default(), only(set)).unwrap();
            let g = loss.gradient(&s, &sh).unwrap();
            assert!(!g.is_singular(), "term {k}");
            let scale = g.to_flat().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for c in 0..2 {
                for i in (0..256).step_by(7) {
                    let fd = central_difference(&loss, &s, &sh, c, i);
                    assert!(
                        (fd - g.grad[c][i]).abs() <= 1e-6 * scale,
                        "term {k} ch {c} sample {i}: fd {fd} analytic {}",
                        g.grad[c][i]
                    );
                }
            }
        }
    }

    #[test]
    fn identity_estimate_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (s, _) = pair(&mut rng, 256);
        let loss = StereoLoss::from_parts(
            &StftConfig::new(128, 32),
            partition_bands(64, 32).unwrap(),
            GenLogParams::default(),
            LossWeights::default(),
        )
        .unwrap();
        let g = loss.gradient(&s, &s).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert_eq!(g.to_flat().len(), 512);
    }

    #[test]
    fn silent_band_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (s, _) = pair(&mut rng, 256);
        let sh = StereoSignal::zeros(256, 48_000);
        let w = only(|e| e.iid = true);
        let g = loss_gradient(&s, &sh, &StftConfig::new(128, 32), &partition_bands(64, 32).unwrap(), &GenLogParams::default(), &w).unwrap();
        assert!(g.is_singular());
    }
}
