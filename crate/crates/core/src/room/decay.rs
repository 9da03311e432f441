//! Expected energy decay of an image-method response.
//!
//! An image reached along unit direction `u` after travelling `d` meters has
//! undergone about `d * sum_i |u_i| / L_i` wall reflections, so the late
//! energy envelope is the direction average of
//! `exp(-a c t sum_i |u_i| / L_i)` with `a = -ln(1 - absorption)`. Averaging
//! weights the directions with few reflections more heavily than a diffuse
//! field model does, which is why the response decays more slowly than
//! Eyring's formula predicts in elongated rooms.

use super::Point;

const GRID: usize = 24;
const FIT_POINTS: usize = 64;

/// Decay rate per second and meter of travel for each direction of an
/// octant grid with equal solid-angle cells.
fn reflection_rates(dims: Point) -> Vec<f64> {
    let mut out = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        let mu = (i as f64 + 0.5) / GRID as f64;
        let rho = (1.0 - mu * mu).sqrt();
        for j in 0..GRID {
            let phi = (j as f64 + 0.5) / GRID as f64 * std::f64::consts::FRAC_PI_2;
            let u = [rho * phi.cos(), rho * phi.sin(), mu];
            out.push(u.iter().zip(&dims).map(|(ui, l)| ui / l).sum());
        }
    }
    out
}

struct Envelope {
    rates: Vec<f64>,
    horizon: f64,
    total: f64,
}

impl Envelope {
    fn new(dims: Point, absorption: f64, c: f64, horizon: f64) -> Self {
        let a = -(1.0 - absorption).ln();
        let rates: Vec<f64> = reflection_rates(dims).into_iter().map(|w| a * c * w).collect();
        let mut env = Self {
            rates,
            horizon,
            total: 1.0,
        };
        env.total = env.remaining(0.0);
        env
    }

    /// Backward-integrated energy from `t` to the horizon.
    fn remaining(&self, t: f64) -> f64 {
        self.rates
            .iter()
            .map(|&r| ((-r * t).exp() - (-r * self.horizon).exp()) / r)
            .sum::<f64>()
            / self.rates.len() as f64
    }

    fn db(&self, t: f64) -> f64 {
        10.0 * (self.remaining(t) / self.total).log10()
    }

    fn crossing(&self, level_db: f64) -> Option<f64> {
        if self.db(self.horizon * (1.0 - 1e-9)) > level_db {
            return None;
        }
        let (mut lo, mut hi) = (0.0, self.horizon);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.db(mid) > level_db {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Expected Schroeder T60 (T20 fit between -5 and -25 dB, extrapolated)
/// of a response truncated at `horizon` seconds. Infinite when the curve
/// does not reach -25 dB.
pub fn model_t60(dims: Point, absorption: f64, c: f64, horizon: f64) -> f64 {
    if absorption >= 1.0 {
        return 0.0;
    }
    if absorption <= 0.0 {
        return f64::INFINITY;
    }
    let env = Envelope::new(dims, absorption, c, horizon);
    let (Some(t5), Some(t25)) = (env.crossing(-5.0), env.crossing(-25.0)) else {
        return f64::INFINITY;
    };
    let ts: Vec<f64> = (0..FIT_POINTS)
        .map(|k| t5 + (t25 - t5) * k as f64 / (FIT_POINTS - 1) as f64)
        .collect();
    let ys: Vec<f64> = ts.iter().map(|&t| env.db(t)).collect();
    let n = FIT_POINTS as f64;
    let (st, sy) = (ts.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let stt: f64 = ts.iter().map(|t| t * t).sum();
    let sty: f64 = ts.iter().zip(&ys).map(|(t, y)| t * y).sum();
    let slope = (n * sty - st * sy) / (n * stt - st * st);
    -60.0 / slope
}

/// Uniform absorption whose expected image-method decay has reverberation
/// time `t60`. Zero `t60` means fully absorbing walls.
pub fn absorption_for_t60(dims: Point, t60: f64, c: f64, horizon: f64) -> f64 {
    if t60 <= 0.0 {
        return 1.0;
    }
    // T60 scales as 1/a for a = -ln(1 - absorption) up to truncation at the
    // horizon, so a fixed-point update converges in a few steps.
    let absorption = |a: f64| 1.0 - (-a).exp();
    let mut a = 1.0;
    for _ in 0..50 {
        let t = model_t60(dims, absorption(a), c, horizon);
        if !t.is_finite() {
            a *= 2.0;
            continue;
        }
        let next = a * t / t60;
        if ((next - a) / a).abs() < 1e-12 {
            a = next;
            break;
        }
        a = next;
    }
    absorption(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_early_rate_matches_mean_free_path() {
        // Mean of |u_x| + |u_y| + |u_z| over the sphere is 3/2.
        let rates = reflection_rates([2.0, 2.0, 2.0]);
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!((mean - 0.75).abs() < 1e-3);
    }

    #[test]
    fn inversion_round_trips() {
        for (dims, t60) in [([5.0, 4.0, 8.0], 0.5), ([3.0, 3.0, 8.0], 0.2), ([7.5, 6.0, 3.0], 0.8)] {
            let a = absorption_for_t60(dims, t60, 340.0, 0.9);
            assert!(a > 0.0 && a < 1.0);
            assert!((model_t60(dims, a, 340.0, 0.9) - t60).abs() < 1e-6);
        }
        assert_eq!(absorption_for_t60([5.0, 4.0, 3.0], 0.0, 340.0, 0.9), 1.0);
    }

    #[test]
    fn slower_than_eyring() {
        let dims = [5.0, 4.0, 8.0];
        let (v, s) = (160.0, 2.0 * (20.0 + 40.0 + 32.0));
        let eyring = 1.0 - (-24.0 * std::f64::consts::LN_10 * v / (340.0 * s * 0.5)).exp();
        assert!(model_t60(dims, eyring, 340.0, 0.9) > 0.5);
    }
}
