//! Sampled signal containers shared by every stage of the chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-valued sampled waveform. Full scale is the quantizer level set ±1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl ChannelSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    /// `amplitude * cos(2π f n / fs)`.
    pub fn tone(amplitude: f64, freq_hz: f64, sample_rate: f64, len: usize) -> Self {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate;
        Self {
            samples: (0..len).map(|n| amplitude * (w * n as f64).cos()).collect(),
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// Two-level stream with symbols in {−1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    symbols: Vec<i8>,
    sample_rate: u32,
}

impl BitStream {
    pub fn new(symbols: Vec<i8>, sample_rate: u32) -> Result<Self> {
        if let Some(i) = symbols.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSignal(format!(
                "bitstream symbol {} at index {i} is not ±1",
                symbols[i]
            )));
        }
        Ok(Self {
            symbols,
            sample_rate,
        })
    }

    /// Accepts only samples that are exactly ±1.
    pub fn from_levels(levels: &[f64], sample_rate: u32) -> Result<Self> {
        let symbols = levels
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                v if v == 1.0 => Ok(1),
                v if v == -1.0 => Ok(-1),
                _ => Err(Error::InvalidSignal(format!(
                    "level {v} at index {i} is not ±1"
                ))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(Self {
            symbols,
            sample_rate,
        })
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<i8> {
        self.symbols
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.symbols.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn to_signal(&self) -> ChannelSignal {
        ChannelSignal {
            samples: self.to_f64(),
            sample_rate: f64::from(self.sample_rate),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_symbols() {
        assert!(BitStream::new(vec![1, -1, 0], 8).is_err());
        assert!(BitStream::from_levels(&[1.0, 0.5], 8).is_err());
        let b = BitStream::from_levels(&[1.0, -1.0], 8).unwrap();
        assert_eq!(b.symbols(), &[1, -1]);
    }

    #[test]
    fn rejects_bad_rate_and_nan() {
        assert!(ChannelSignal::new(vec![0.0], 0.0).is_err());
        assert!(ChannelSignal::new(vec![f64::NAN], 1.0).is_err());
    }
}
