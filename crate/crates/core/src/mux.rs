//! Two-way frequency-division multiplexing with binary carriers.
//!
//! Channel 1 passes through unchanged, channel 2 is up-converted by `(−1)ⁿ`
//! before the modulator. Decoding applies the same `(−1)ⁿ` mix to the stream,
//! which keeps the symbols in {−1, +1}, and a shared low-pass separates the
//! channels.

use std::f64::consts::PI;
use std::ops::Neg;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filter::ReconstructionFilter;
use crate::modulator::{simulate, LoopRealization, Quantizer, SimulationResult};
use crate::signal::{BitStream, ChannelSignal};

/// Periodic carrier with samples in {−1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryCarrier {
    samples: Vec<i8>,
    coeffs: Vec<Complex64>,
}

impl BinaryCarrier {
    pub fn new(samples: Vec<i8>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidCarrier("carrier period must be positive".into()));
        }
        if samples.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidCarrier("carrier samples must be ±1".into()));
        }
        let n = samples.len();
        // r_k = (1/N) Σ r(n) e^{−j2πkn/N}
        let coeffs = (0..n)
            .map(|k| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(m, &s)| {
                        Complex64::from_polar(f64::from(s), -2.0 * PI * (k * m % n) as f64 / n as f64)
                    })
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect();
        Ok(Self { samples, coeffs })
    }

    /// `(−1)ⁿ`, starting at +1 for `n = 0`.
    pub fn alternating() -> Self {
        Self::new(vec![1, -1]).expect("valid carrier")
    }

    pub fn period(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[i8] {
        &self.samples
    }

    pub fn fourier_coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn at(&self, n: usize) -> i8 {
        self.samples[n % self.samples.len()]
    }

    /// Checks the no-overlap conditions for multiplexing a band `[0, B̂]`:
    /// no DC component and `N < 1/B̂`.
    pub fn validate_for_mux(&self, normalized_band: f64) -> Result<()> {
        if self.coeffs[0].norm() > 1e-12 {
            return Err(Error::InvalidCarrier(format!(
                "carrier has a DC component r0 = {}",
                self.coeffs[0]
            )));
        }
        if !((self.period() as f64) < 1.0 / normalized_band) {
            return Err(Error::InvalidCarrier(format!(
                "period {} is not below 1/B̂ = {}",
                self.period(),
                1.0 / normalized_band
            )));
        }
        Ok(())
    }
}

/// `out(n) = x(n)·r(n mod N)`. Any level set symmetric about zero is preserved.
pub fn mix<T: Copy + Neg<Output = T>>(x: &[T], carrier: &BinaryCarrier) -> Vec<T> {
    x.iter()
        .enumerate()
        .map(|(n, &v)| if carrier.at(n) > 0 { v } else { -v })
        .collect()
}

pub fn mix_bits(x: &BitStream, carrier: &BinaryCarrier) -> BitStream {
    BitStream::new(mix(x.symbols(), carrier), x.sample_rate()).expect("mixing preserves ±1")
}

/// The two channels entering the multiplexer.
#[derive(Debug, Clone)]
pub struct MuxFrame {
    pub ch1: ChannelSignal,
    pub ch2: ChannelSignal,
    normalized_band: f64,
}

impl MuxFrame {
    /// `band_hz` is the audio bandwidth `B`; requires `B/f_Φ < 1/4`.
    pub fn new(ch1: ChannelSignal, ch2: ChannelSignal, band_hz: f64) -> Result<Self> {
        if ch1.len() != ch2.len() {
            return Err(Error::InvalidSignal(format!(
                "channel lengths differ: {} vs {}",
                ch1.len(),
                ch2.len()
            )));
        }
        if ch1.sample_rate != ch2.sample_rate {
            return Err(Error::InvalidSignal("channel sample rates differ".into()));
        }
        let normalized_band = band_hz / ch1.sample_rate;
        if !(normalized_band > 0.0 && normalized_band < 0.25) {
            return Err(Error::InvalidSpec(format!(
                "normalized band {normalized_band} must lie in (0, 1/4) so the channel replicas do not overlap"
            )));
        }
        Ok(Self {
            ch1,
            ch2,
            normalized_band,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.ch1.sample_rate
    }

    pub fn normalized_band(&self) -> f64 {
        self.normalized_band
    }

    /// Largest `|ch1(n)| + |ch2(n)|`.
    pub fn cumulative_peak(&self) -> f64 {
        self.ch1
            .samples
            .iter()
            .zip(&self.ch2.samples)
            .map(|(a, b)| a.abs() + b.abs())
            .fold(0.0, f64::max)
    }

    /// True when the cumulative peak exceeds `limit`. Advisory only.
    pub fn exceeds(&self, limit: f64) -> bool {
        self.cumulative_peak() > limit
    }

    /// Modulator input `u₁ + u₂·(−1)ⁿ`.
    pub fn composite(&self) -> ChannelSignal {
        let up = mix(&self.ch2.samples, &BinaryCarrier::alternating());
        ChannelSignal {
            samples: self.ch1.samples.iter().zip(&up).map(|(a, b)| a + b).collect(),
            sample_rate: self.sample_rate(),
        }
    }
}

/// `x = ΔΣ(u₁ + mix(u₂, (−1)ⁿ))`.
pub fn mux_encode(
    frame: &MuxFrame,
    realization: &mut LoopRealization,
    q: &Quantizer,
) -> Result<SimulationResult> {
    simulate(&frame.composite(), realization, q)
}

#[derive(Debug, Clone)]
pub struct Demuxed {
    /// Reconstructed channels, aligned with the stream (filter delay removed).
    pub ch1: ChannelSignal,
    pub ch2: ChannelSignal,
    /// Pre-filter streams: `x` and `x·(−1)ⁿ`. Both remain two-level.
    pub stream1: BitStream,
    pub stream2: BitStream,
}

pub fn demux_decode(x: &BitStream, lp: &ReconstructionFilter) -> Demuxed {
    let stream2 = mix_bits(x, &BinaryCarrier::alternating());
    let fs = f64::from(x.sample_rate());
    let ch1 = ChannelSignal {
        samples: lp.apply_aligned(&x.to_f64()),
        sample_rate: fs,
    };
    let ch2 = ChannelSignal {
        samples: lp.apply_aligned(&stream2.to_f64()),
        sample_rate: fs,
    };
    Demuxed {
        ch1,
        ch2,
        stream1: x.clone(),
        stream2,
    }
}

/// How replica weights are formed from the carrier's Fourier coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicaWeighting {
    /// Weights `r_k` exactly as in the replica sum; rejected unless every
    /// coefficient is real.
    Coefficient,
    /// Weights `|r_k|²`, always non-negative.
    SquaredMagnitude,
}

/// Spectrum of a mixed signal as a sum of shifted input replicas,
/// `Ψ_y(f) = Σ_k w_k Ψ_x(f − k/N)`, on a uniform grid of `[0, 1)`.
pub fn predict_mux_spectrum(
    input_psd: &[f64],
    carrier: &BinaryCarrier,
    weighting: ReplicaWeighting,
) -> Result<Vec<f64>> {
    let grid = input_psd.len();
    let period = carrier.period();
    if grid == 0 || grid % period != 0 {
        return Err(Error::GridNotDivisible { grid, period });
    }
    let weights = carrier
        .fourier_coeffs()
        .iter()
        .map(|r| match weighting {
            ReplicaWeighting::Coefficient if r.im.abs() > 1e-12 => Err(Error::InvalidCarrier(
                format!("coefficient {r} is complex; its replica weight is ambiguous"),
            )),
            ReplicaWeighting::Coefficient => Ok(r.re),
            ReplicaWeighting::SquaredMagnitude => Ok(r.norm_sqr()),
        })
        .collect::<Result<Vec<f64>>>()?;
    let shift = grid / period;
    Ok((0..grid)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * input_psd[(i + grid - k * shift) % grid])
                .sum()
        })
        .collect())
}
