//! Sliding-window algebraic estimator of the lumped dynamics `F` in the
//! ultra-local model `ẏ = F + v`.
//!
//! Over a window of length `T` with `τ = 0` at the oldest sample,
//!
//! ```text
//! F̂ = −(6/T³) ∫₀ᵀ [(T − 2τ)·y(τ) + τ·(T − τ)·v(τ)] dτ
//! ```
//!
//! where `v = α̂·u` is the effective input. The integral is evaluated with
//! composite Simpson weights, which are exact for the quadratic integrands an
//! affine output and constant input produce.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Fewest samples the filter accepts.
pub const MIN_SAMPLES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Window length T, s
    pub window: f64,
    /// Sampling period Δt, s
    pub sample_dt: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: 0.2,
            sample_dt: 0.01,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(Error::invalid("estimator sample period must be > 0"));
        }
        if !(self.window.is_finite() && self.window >= 2.0 * self.sample_dt * (1.0 - 1e-9)) {
            return Err(Error::invalid(
                "estimator window must span at least two sample periods",
            ));
        }
        Ok(())
    }

    /// Number of samples kept, `⌊T/Δt⌋ + 1`.
    pub fn capacity(&self) -> usize {
        // the epsilon absorbs representation error in ratios like 0.2/0.01
        (self.window / self.sample_dt + 1e-9).floor() as usize + 1
    }
}

/// Ring buffer of `(y, v)` pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    samples: VecDeque<(f64, f64)>,
    capacity: usize,
}

impl SignalWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            samples: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, y: f64, v: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((y, v));
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.samples.iter()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }
}

/// Unit-spacing weights integrating `n` equally spaced samples, exact for
/// cubics. Odd interval counts close with a 3/8 panel.
pub(crate) fn quadrature_weights(n: usize) -> Vec<f64> {
    assert!(n >= MIN_SAMPLES);
    let intervals = n - 1;
    let mut w = vec![0.0; n];
    let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    for k in (0..simpson_end).step_by(2) {
        w[k] += 1.0 / 3.0;
        w[k + 1] += 4.0 / 3.0;
        w[k + 2] += 1.0 / 3.0;
    }
    if simpson_end != intervals {
        let k = simpson_end;
        w[k] += 3.0 / 8.0;
        w[k + 1] += 9.0 / 8.0;
        w[k + 2] += 9.0 / 8.0;
        w[k + 3] += 3.0 / 8.0;
    }
    w
}

/// Estimates `F` from the window. Runs over the filled part of the window
/// when it is not yet full.
pub fn estimate_f(window: &SignalWindow, cfg: &EstimatorConfig) -> Result<f64> {
    let n = window.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples(n));
    }
    let dt = cfg.sample_dt;
    let t = (n - 1) as f64 * dt;
    let weights = quadrature_weights(n);
    // the y-kernel integrates to zero, so y may be taken relative to any
    // offset; the oldest sample keeps constants exact in floating point
    let y0 = window.iter().next().map_or(0.0, |p| p.0);
    let integral: f64 = window
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(j, (&(y, v), w))| {
            let tau = j as f64 * dt;
            w * ((t - 2.0 * tau) * (y - y0) + tau * (t - tau) * v)
        })
        .sum::<f64>()
        * dt;
    Ok(-6.0 / (t * t * t) * integral)
}

/// Window plus its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicEstimator {
    cfg: EstimatorConfig,
    window: SignalWindow,
}

impl AlgebraicEstimator {
    pub fn new(cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            window: SignalWindow::new(cfg.capacity()),
            cfg,
        })
    }

    pub fn push(&mut self, y: f64, v: f64) {
        self.window.push(y, v);
    }

    pub fn estimate(&self) -> Result<f64> {
        estimate_f(&self.window, &self.cfg)
    }

    pub fn window(&self) -> &SignalWindow {
        &self.window
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn filled(cfg: &EstimatorConfig, n: usize, y: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> SignalWindow {
        let mut w = SignalWindow::new(cfg.capacity());
        for j in 0..n {
            let tau = j as f64 * cfg.sample_dt;
            w.push(y(tau), v(tau));
        }
        w
    }

    /// Independent oracle: the same integral by a fine midpoint rule on the
    /// continuous signals.
    fn oracle(t: f64, y: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> f64 {
        let m = 200_000;
        let h = t / m as f64;
        let s: f64 = (0..m)
            .map(|i| {
                let tau = (i as f64 + 0.5) * h;
                (t - 2.0 * tau) * y(tau) + tau * (t - tau) * v(tau)
            })
            .sum();
        -6.0 / t.powi(3) * s * h
    }

    #[test]
    fn capacity_is_floor_plus_one() {
        assert_eq!(EstimatorConfig::default().capacity(), 21);
        let c = EstimatorConfig { window: 0.205, sample_dt: 0.01 };
        assert_eq!(c.capacity(), 21);
        assert!(EstimatorConfig { window: 0.01, sample_dt: 0.01 }.validate().is_err());
    }

    #[test]
    fn push_evicts_oldest() {
        let mut w = SignalWindow::new(3);
        w.push(1.0, 0.0);
        assert_eq!(w.len(), 1);
        for k in 2..=4 {
            w.push(k as f64, 0.0);
        }
        assert_eq!(w.len(), 3);
        let ys: Vec<f64> = w.iter().map(|p| p.0).collect();
        assert_eq!(ys, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn repeated_pushes_give_constant_window() {
        let mut w = SignalWindow::new(5);
        for _ in 0..5 {
            w.push(3.0, 1.5);
        }
        assert!(w.iter().all(|&p| p == (3.0, 1.5)));
    }

    #[test]
    fn weights_integrate_cubics_exactly() {
        for n in 3..30 {
            let w = quadrature_weights(n);
            let len = (n - 1) as f64;
            let num: f64 = w.iter().enumerate().map(|(j, wj)| wj * (j as f64).powi(3)).sum();
            assert!((num - len.powi(4) / 4.0).abs() < 1e-9 * len.powi(4), "n = {n}");
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let cfg = EstimatorConfig::default();
        let w = filled(&cfg, 2, |_| 1.0, |_| 0.0);
        assert!(matches!(estimate_f(&w, &cfg), Err(Error::InsufficientSamples(2))));
    }

    #[test]
    fn constant_output_gives_zero() {
        let cfg = EstimatorConfig::default();
        let w = filled(&cfg, 21, |_| 7.5, |_| 0.0);
        assert!(estimate_f(&w, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ramp_gives_slope() {
        let cfg = EstimatorConfig::default();
        let y = |tau: f64| 2.0 * tau;
        let expected = oracle(0.2, y, |_| 0.0);
        assert!((expected - 2.0).abs() < 1e-6);
        let w = filled(&cfg, 21, y, |_| 0.0);
        assert!((estimate_f(&w, &cfg).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn ramp_with_input_gives_slope_minus_input() {
        let cfg = EstimatorConfig::default();
        let y = |tau: f64| 4.0 + 2.0 * tau;
        let v = |_: f64| 0.7;
        let expected = oracle(0.2, y, v);
        assert!((expected - 1.3).abs() < 1e-6);
        for n in 3..=21 {
            let w = filled(&cfg, n, y, v);
            let f = estimate_f(&w, &cfg).unwrap();
            assert!((f - 1.3).abs() < 1e-9, "n = {n}: {f}");
        }
    }

    #[test]
    fn smooth_signal_matches_oracle() {
        let cfg = EstimatorConfig::default();
        let y = |tau: f64| (3.0 * tau).sin() + tau * tau;
        let v = |tau: f64| (5.0 * tau).cos();
        let w = filled(&cfg, 21, y, v);
        let f = estimate_f(&w, &cfg).unwrap();
        // Simpson error is O(Δt⁴)
        assert!((f - oracle(0.2, y, v)).abs() < 1e-5);
    }

    #[test]
    fn filter_attenuates_noise_better_than_differencing() {
        let cfg = EstimatorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let trials = 2000;
        let mut filt = Vec::with_capacity(trials);
        let mut diff = Vec::with_capacity(trials);
        for _ in 0..trials {
            let ys: Vec<f64> = (0..21)
                .map(|j| 2.0 * j as f64 * cfg.sample_dt + noise.sample(&mut rng))
                .collect();
            let mut w = SignalWindow::new(21);
            ys.iter().for_each(|&y| w.push(y, 0.0));
            filt.push(estimate_f(&w, &cfg).unwrap());
            diff.push((ys[20] - ys[19]) / cfg.sample_dt);
        }
        let std = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
        };
        assert!(std(&filt) < std(&diff), "{} vs {}", std(&filt), std(&diff));
    }

    proptest! {
        #[test]
        fn linear_in_samples(
            a in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 21),
            b in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 21),
            k in -3.0f64..3.0,
        ) {
            let cfg = EstimatorConfig::default();
            let mut wa = SignalWindow::new(21);
            let mut wb = SignalWindow::new(21);
            let mut wc = SignalWindow::new(21);
            for (pa, pb) in a.iter().zip(&b) {
                wa.push(pa.0, pa.1);
                wb.push(pb.0, pb.1);
                wc.push(pa.0 + k * pb.0, pa.1 + k * pb.1);
            }
            let fa = estimate_f(&wa, &cfg).unwrap();
            let fb = estimate_f(&wb, &cfg).unwrap();
            let fc = estimate_f(&wc, &cfg).unwrap();
            prop_assert!((fc - (fa + k * fb)).abs() < 1e-8 * (1.0 + fa.abs() + fb.abs()));
        }

        #[test]
        fn shift_invariant(
            a in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..=21),
            c in -100.0f64..100.0,
        ) {
            let cfg = EstimatorConfig::default();
            let mut w0 = SignalWindow::new(21);
            let mut w1 = SignalWindow::new(21);
            for p in &a {
                w0.push(p.0, p.1);
                w1.push(p.0 + c, p.1);
            }
            let f0 = estimate_f(&w0, &cfg).unwrap();
            let f1 = estimate_f(&w1, &cfg).unwrap();
            prop_assert!((f0 - f1).abs() < 1e-8 * (1.0 + f0.abs() + c.abs() * 100.0));
        }
    }
}
