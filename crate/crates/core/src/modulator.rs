//! Error-feedback ΔΣ loop with `STF(z) = 1`.
//!
//! The quantizer input is `y(n) = u(n) + (h_ef ∗ e)(n)` with `e = x − y` and
//! `H_ef(z) = NTF(z) − 1`, so that `X(z) = U(z) + NTF(z)·E(z)` holds exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntf::TransferFunction;
use crate::signal::ChannelSignal;

/// Samples the quantizer input must stay above threshold before overload is declared.
pub const OVERLOAD_RUN: usize = 16;
/// Loop-state magnitude that marks an unstable run.
pub const STATE_LIMIT: f64 = 100.0;
/// Start-up samples excluded from every metric.
pub const WARMUP: usize = 2048;

/// Strictly-proper feedback filter `H_ef = NTF − 1` in transposed direct form II.
#[derive(Debug, Clone)]
pub struct LoopRealization {
    feedback_num: Vec<f64>,
    feedback_den: Vec<f64>,
    state: Vec<f64>,
    peak_gain: f64,
}

impl LoopRealization {
    pub fn feedback_num(&self) -> &[f64] {
        &self.feedback_num
    }

    pub fn feedback_den(&self) -> &[f64] {
        &self.feedback_den
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn order(&self) -> usize {
        self.state.len()
    }

    /// Peak NTF gain over the unit circle, used to size the overload threshold.
    pub fn peak_gain(&self) -> f64 {
        self.peak_gain
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }

    pub fn set_state(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.state.len() {
            return Err(Error::InvalidSignal(format!(
                "state length {} does not match loop order {}",
                state.len(),
                self.state.len()
            )));
        }
        self.state.copy_from_slice(state);
        Ok(())
    }

    /// Feedback value for the current sample; depends only on past errors.
    #[inline]
    fn feedback(&self) -> f64 {
        self.state.first().copied().unwrap_or(0.0)
    }

    #[inline]
    fn push_error(&mut self, e: f64, fb: f64) {
        let n = self.state.len();
        for k in 0..n.saturating_sub(1) {
            self.state[k] =
                self.state[k + 1] + self.feedback_num[k + 1] * e - self.feedback_den[k + 1] * fb;
        }
        if n > 0 {
            self.state[n - 1] = self.feedback_num[n] * e - self.feedback_den[n] * fb;
        }
    }

    /// Impulse response of `H_ef` obtained by running the recursion on a unit impulse.
    pub fn feedback_impulse_response(&self, len: usize) -> Vec<f64> {
        let mut r = self.clone();
        r.reset();
        (0..len)
            .map(|i| {
                let fb = r.feedback();
                r.push_error(if i == 0 { 1.0 } else { 0.0 }, fb);
                fb
            })
            .collect()
    }
}

/// Builds the error-feedback realization of `ntf`.
pub fn realize(ntf: &TransferFunction) -> Result<LoopRealization> {
    ntf.validate_ntf()?;
    let num = ntf.numerator();
    let den = ntf.denominator();
    if num.len() != den.len() || (num[0] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidTransferFunction(
            "NTF is not biproper with unit leading coefficient".into(),
        ));
    }
    let mut feedback_num: Vec<f64> = num.iter().zip(&den).map(|(n, d)| n - d).collect();
    feedback_num[0] = 0.0;
    let order = den.len() - 1;
    Ok(LoopRealization {
        feedback_num,
        feedback_den: den,
        state: vec![0.0; order],
        peak_gain: ntf.peak_gain(4096).1,
    })
}

/// Mid-rise quantizer over a symmetric level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    levels: Vec<f64>,
    overload_threshold: f64,
}

impl Quantizer {
    pub fn new(levels: Vec<f64>, overload_threshold: f64) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidSpec("quantizer needs at least 2 levels".into()));
        }
        let mut levels = levels;
        levels.sort_by(f64::total_cmp);
        let symmetric = levels
            .iter()
            .zip(levels.iter().rev())
            .all(|(a, b)| (a + b).abs() < 1e-12);
        if !symmetric {
            return Err(Error::InvalidSpec("quantizer levels must be symmetric about 0".into()));
        }
        Ok(Self {
            levels,
            overload_threshold,
        })
    }

    /// Levels ±1 with overload threshold `1 + γ·Δ/2` (Δ = 2).
    pub fn binary(gamma: f64) -> Self {
        Self {
            levels: vec![-1.0, 1.0],
            overload_threshold: 1.0 + gamma,
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn overload_threshold(&self) -> f64 {
        self.overload_threshold
    }

    pub fn is_binary(&self) -> bool {
        self.levels == [-1.0, 1.0]
    }

    /// Nearest level; ties resolve upward so `quantize(0) == +1` for ±1 levels.
    #[inline]
    pub fn quantize(&self, y: f64) -> f64 {
        if self.levels.len() == 2 {
            return if y >= 0.0 { self.levels[1] } else { self.levels[0] };
        }
        let mut best = self.levels[0];
        for &l in &self.levels[1..] {
            if (y - l).abs() <= (y - best).abs() {
                best = l;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    /// Quantizer output, one level per input sample.
    pub output: Vec<f64>,
    pub sample_rate: f64,
    pub overloaded: bool,
    pub max_state_magnitude: f64,
    pub max_quantizer_input: f64,
}

impl SimulationResult {
    pub fn to_bitstream(&self) -> Result<crate::signal::BitStream> {
        crate::signal::BitStream::from_levels(&self.output, self.sample_rate.round() as u32)
    }
}

/// Runs the loop over `u`, continuing from the realization's current state.
pub fn simulate(
    u: &ChannelSignal,
    realization: &mut LoopRealization,
    q: &Quantizer,
) -> Result<SimulationResult> {
    let mut output = Vec::with_capacity(u.len());
    let mut over_run = 0usize;
    let mut overloaded = false;
    let mut max_state = realization.state.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let mut max_y = 0.0f64;
    for (n, &un) in u.samples.iter().enumerate() {
        let fb = realization.feedback();
        let y = un + fb;
        if !y.is_finite() {
            return Err(Error::Diverged { sample: n });
        }
        let x = q.quantize(y);
        realization.push_error(x - y, fb);
        output.push(x);

        let ay = y.abs();
        max_y = max_y.max(ay);
        if ay > q.overload_threshold {
            over_run += 1;
            if over_run >= OVERLOAD_RUN {
                overloaded = true;
            }
        } else {
            over_run = 0;
        }
        for s in &realization.state {
            max_state = max_state.max(s.abs());
        }
        if !max_state.is_finite() {
            return Err(Error::Diverged { sample: n });
        }
    }
    if max_state > STATE_LIMIT {
        overloaded = true;
    }
    Ok(SimulationResult {
        output,
        sample_rate: u.sample_rate,
        overloaded,
        max_state_magnitude: max_state,
        max_quantizer_input: max_y,
    })
}

/// Probe stimulus used by [`find_max_amplitude`]. Frequencies are normalized to `f_Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ToneSpec {
    /// One cosine of amplitude `A`.
    Single { freq: f64 },
    /// Two channels at `A/2` each, the second up-converted by `(−1)ⁿ`;
    /// `A` is then the cumulative amplitude.
    Mux { freq1: f64, freq2: f64 },
}

impl ToneSpec {
    pub fn stimulus(&self, amplitude: f64, len: usize) -> Vec<f64> {
        let w = |f: f64| 2.0 * std::f64::consts::PI * f;
        match *self {
            ToneSpec::Single { freq } => (0..len)
                .map(|n| amplitude * (w(freq) * n as f64).cos())
                .collect(),
            ToneSpec::Mux { freq1, freq2 } => (0..len)
                .map(|n| {
                    let t = n as f64;
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    0.5 * amplitude * ((w(freq1) * t).cos() + sign * (w(freq2) * t).cos())
                })
                .collect(),
        }
    }
}

/// Probe length for the stability search.
pub const PROBE_LEN: usize = 1 << 17;
const COARSE_STEP: f64 = 0.05;
const RESOLUTION: f64 = 0.01;

/// Largest amplitude (0.01 resolution) whose probe run neither overloads nor diverges.
pub fn find_max_amplitude(
    tone: &ToneSpec,
    realization: &LoopRealization,
    q: &Quantizer,
) -> Result<f64> {
    let stable = |amplitude: f64| -> bool {
        let mut r = realization.clone();
        r.reset();
        let u = ChannelSignal {
            samples: tone.stimulus(amplitude, PROBE_LEN + WARMUP),
            sample_rate: 1.0,
        };
        matches!(simulate(&u, &mut r, q), Ok(res) if !res.overloaded)
    };
    let steps = |a: f64| (a / RESOLUTION).round() as i64;

    if !stable(COARSE_STEP) {
        return Err(Error::BrokenNtf {
            amplitude: COARSE_STEP,
        });
    }
    // Ramp in coarse steps to the first failure, then bisect on the 0.01 grid.
    let mut good = steps(COARSE_STEP);
    let mut bad = None;
    let coarse = steps(COARSE_STEP);
    let ceiling = steps(2.0);
    while good + coarse <= ceiling {
        let next = good + coarse;
        if stable(next as f64 * RESOLUTION) {
            good = next;
        } else {
            bad = Some(next);
            break;
        }
    }
    let Some(mut bad) = bad else {
        return Ok(good as f64 * RESOLUTION);
    };
    while bad - good > 1 {
        let mid = (good + bad) / 2;
        if stable(mid as f64 * RESOLUTION) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good as f64 * RESOLUTION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntf::{make_mux_ntf, synthesize_ntf_lp, DesignSpec};
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn feedback_filters_for_simple_ntfs() {
        let first = TransferFunction::ntf(vec![c(1.0)], vec![c(0.0)]).unwrap();
        let r = realize(&first).unwrap();
        assert_eq!(r.feedback_num(), &[0.0, -1.0]);
        assert_eq!(r.feedback_den(), &[1.0, 0.0]);

        let second = make_mux_ntf(&first).unwrap();
        let r = realize(&second).unwrap();
        assert_eq!(r.feedback_num(), &[0.0, 0.0, -1.0]);
        assert_eq!(r.order(), 2);
    }

    #[test]
    fn rejects_non_biproper() {
        let tf = TransferFunction::new(vec![c(1.0)], vec![c(0.0), c(0.5)], 1.0).unwrap();
        assert!(realize(&tf).is_err());
    }

    #[test]
    fn tie_breaks_up() {
        let q = Quantizer::binary(1.5);
        assert_eq!(q.quantize(0.0), 1.0);
        assert_eq!(q.quantize(-1e-300), -1.0);
        let q3 = Quantizer::new(vec![1.0, 0.0, -1.0], 3.0).unwrap();
        assert_eq!(q3.quantize(0.5), 1.0);
        assert_eq!(q3.quantize(-0.2), 0.0);
        assert!(Quantizer::new(vec![-1.0, 2.0], 3.0).is_err());
        assert!(Quantizer::new(vec![1.0], 3.0).is_err());
    }

    #[test]
    fn constant_overrange_input_overloads() {
        let first = TransferFunction::ntf(vec![c(1.0)], vec![c(0.0)]).unwrap();
        let mut r = realize(&first).unwrap();
        let u = ChannelSignal::new(vec![1.5; 4096], 1.0).unwrap();
        let res = simulate(&u, &mut r, &Quantizer::binary(1.5)).unwrap();
        assert!(res.overloaded);
        assert_eq!(res.output.len(), 4096);
    }

    #[test]
    fn continues_from_provided_state() {
        let spec = DesignSpec::new(2, 32.0, 1.5, true).unwrap();
        let ntf = synthesize_ntf_lp(&spec).unwrap();
        let q = Quantizer::binary(1.5);
        let u = ChannelSignal::tone(0.3, 0.001, 1.0, 2000);
        let mut whole = realize(&ntf).unwrap();
        let full = simulate(&u, &mut whole, &q).unwrap();

        let mut split = realize(&ntf).unwrap();
        let a = ChannelSignal::new(u.samples[..700].to_vec(), 1.0).unwrap();
        let b = ChannelSignal::new(u.samples[700..].to_vec(), 1.0).unwrap();
        let mut out = simulate(&a, &mut split, &q).unwrap().output;
        let saved = split.state().to_vec();
        let mut fresh = realize(&ntf).unwrap();
        fresh.set_state(&saved).unwrap();
        out.extend(simulate(&b, &mut fresh, &q).unwrap().output);
        assert_eq!(out, full.output);
    }

    #[test]
    fn mux_stimulus_shape() {
        let s = ToneSpec::Mux {
            freq1: 0.0,
            freq2: 0.0,
        }
        .stimulus(0.5, 4);
        assert_eq!(s, vec![0.5, 0.0, 0.5, 0.0]);
    }
}
