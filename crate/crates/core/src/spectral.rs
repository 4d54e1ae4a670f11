//! Welch power spectral density estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            // Periodic form: integer-bin tones leak only into the adjacent bins.
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Fraction of a segment shared with the next one.
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: 1 << 14,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

impl WelchConfig {
    pub fn with_segment(segment_len: usize) -> Self {
        Self {
            segment_len,
            ..Self::default()
        }
    }

    fn hop(&self) -> usize {
        ((self.segment_len as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    /// Number of segments averaged for an input of `len` samples.
    pub fn averages(&self, len: usize) -> usize {
        if len < self.segment_len {
            0
        } else {
            (len - self.segment_len) / self.hop() + 1
        }
    }
}

/// One-sided PSD on `[0, 1/2]` in power per unit normalized frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
    pub segment_len: usize,
    pub overlap: f64,
    pub window: Window,
    pub averages: usize,
}

impl PsdEstimate {
    /// Bin spacing.
    pub fn resolution(&self) -> f64 {
        1.0 / self.segment_len as f64
    }

    pub fn bin_of(&self, fhat: f64) -> usize {
        ((fhat * self.segment_len as f64).round().max(0.0) as usize).min(self.values.len() - 1)
    }

    /// Rectangle-rule integral over bins whose centres lie in `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let df = self.resolution();
        self.freqs
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo - 1e-15 && **f <= hi + 1e-15)
            .map(|(_, v)| v * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.integrate(0.0, 0.5)
    }
}

pub fn estimate_psd(x: &[f64]) -> Result<PsdEstimate> {
    estimate_psd_with(x, &WelchConfig::default())
}

pub fn estimate_psd_with(x: &[f64], cfg: &WelchConfig) -> Result<PsdEstimate> {
    let seg = cfg.segment_len;
    if seg < 2 || !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::InvalidSpec(format!(
            "invalid Welch configuration: segment {seg}, overlap {}",
            cfg.overlap
        )));
    }
    let needed = 4 * seg;
    if x.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: x.len(),
        });
    }
    let window = cfg.window.coefficients(seg);
    let norm: f64 = window.iter().map(|w| w * w).sum();
    let hop = cfg.hop();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let averages = cfg.averages(x.len());
    for s in 0..averages {
        let segment = &x[s * hop..s * hop + seg];
        for ((b, &v), &w) in buf.iter_mut().zip(segment).zip(&window) {
            *b = Complex64::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (norm * averages as f64);
    let values = acc
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let one_sided = if k == 0 || (seg % 2 == 0 && k == seg / 2) { 1.0 } else { 2.0 };
            v * scale * one_sided
        })
        .collect();
    Ok(PsdEstimate {
        freqs: (0..bins).map(|k| k as f64 / seg as f64).collect(),
        values,
        segment_len: seg,
        overlap: cfg.overlap,
        window: cfg.window,
        averages,
    })
}
