//! Linear-phase reconstruction filter (Kaiser-windowed sinc) and FFT convolution.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// Stopband attenuation the reconstruction filter is designed for, in dB.
/// A few dB above the 120 dB requirement to absorb the Kaiser formula's error.
const DESIGN_ATTENUATION_DB: f64 = 125.0;

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionFilter {
    taps: Vec<f64>,
    cutoff: f64,
    stopband_edge: f64,
}

impl ReconstructionFilter {
    /// Low-pass flat over `[0, B̂]` with the stopband starting at `1.5·B̂`.
    pub fn for_band(normalized_band: f64) -> Result<Self> {
        if !(normalized_band > 0.0 && normalized_band < 0.25) {
            return Err(Error::InvalidSpec(format!(
                "normalized band {normalized_band} must lie in (0, 1/4)"
            )));
        }
        Self::kaiser_lowpass(normalized_band, 1.5 * normalized_band, DESIGN_ATTENUATION_DB)
    }

    /// Kaiser-windowed sinc with transition `[pass_edge, stop_edge]`.
    pub fn kaiser_lowpass(pass_edge: f64, stop_edge: f64, attenuation_db: f64) -> Result<Self> {
        if !(0.0 < pass_edge && pass_edge < stop_edge && stop_edge < 0.5) {
            return Err(Error::InvalidSpec(format!(
                "invalid transition band [{pass_edge}, {stop_edge}]"
            )));
        }
        let width = stop_edge - pass_edge;
        let cutoff = 0.5 * (pass_edge + stop_edge);
        // Odd length keeps an integer group delay.
        let mut len = ((attenuation_db - 7.95) / (14.36 * width)).ceil() as usize + 1;
        if len % 2 == 0 {
            len += 1;
        }
        let beta = kaiser_beta(attenuation_db);
        let mid = (len - 1) as f64 / 2.0;
        let i0_beta = bessel_i0(beta);
        let mut taps: Vec<f64> = (0..len)
            .map(|n| {
                let t = n as f64 - mid;
                let ideal = 2.0 * cutoff * sinc(2.0 * cutoff * t);
                let r = t / mid;
                let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                ideal * w
            })
            .collect();
        let dc: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= dc);
        // Enforce exact symmetry after normalization.
        for n in 0..len / 2 {
            let avg = 0.5 * (taps[n] + taps[len - 1 - n]);
            taps[n] = avg;
            taps[len - 1 - n] = avg;
        }
        Ok(Self {
            taps,
            cutoff,
            stopband_edge: stop_edge,
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn stopband_edge(&self) -> f64 {
        self.stopband_edge
    }

    /// Group delay in samples, `(len − 1) / 2`.
    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn response(&self, fhat: f64) -> f64 {
        let w = 2.0 * PI * fhat;
        let mid = self.group_delay();
        // Zero-phase form of a symmetric odd-length filter.
        let mut acc = self.taps[mid];
        for k in 1..=mid {
            acc += 2.0 * self.taps[mid + k] * (w * k as f64).cos();
        }
        acc.abs()
    }

    /// Causal filtering; output has the input's length and lags by `group_delay`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut full = fft_convolve(x, &self.taps);
        full.truncate(x.len());
        full
    }

    /// Filtering with the group delay removed; the output is aligned with `x`.
    pub fn apply_aligned(&self, x: &[f64]) -> Vec<f64> {
        let d = self.group_delay();
        let full = fft_convolve(x, &self.taps);
        full.into_iter().skip(d).take(x.len()).collect()
    }
}

pub(crate) fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db >= 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Full linear convolution (`len = x.len() + h.len() − 1`) by overlap-add.
pub fn fft_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + h.len() - 1;
    let fft_len = (4 * h.len()).next_power_of_two().max(64);
    let block = fft_len - h.len() + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let mut hf: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    hf.resize(fft_len, Complex64::new(0.0, 0.0));
    fwd.process(&mut hf);

    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    let scale = 1.0 / fft_len as f64;
    for (start, chunk) in x.chunks(block).enumerate().map(|(i, c)| (i * block, c)) {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(chunk) {
            b.re = v;
        }
        fwd.process(&mut buf);
        for (b, hv) in buf.iter_mut().zip(&hf) {
            *b *= hv;
        }
        inv.process(&mut buf);
        let valid = (chunk.len() + h.len() - 1).min(out_len - start);
        for (o, b) in out[start..start + valid].iter_mut().zip(&buf) {
            *o += b.re * scale;
        }
    }
    out
}
