//! Windowed-sinc sample-rate conversion.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{bessel_i0, sinc};
use crate::signal::ChannelSignal;

/// Zero crossings of the kernel on each side.
const ZERO_CROSSINGS: usize = 32;
/// Table points per zero crossing.
const TABLE_RES: usize = 1024;
const KAISER_BETA: f64 = 9.0;
/// Cutoff as a fraction of the lower Nyquist rate.
const ROLLOFF: f64 = 0.92;

/// Kernel `sinc(u)·w(u/ZC)` sampled on `u ∈ [0, ZC]`.
fn kernel_table() -> Vec<f64> {
    let n = ZERO_CROSSINGS * TABLE_RES;
    let norm = bessel_i0(KAISER_BETA);
    (0..=n + 1)
        .map(|i| {
            let u = i as f64 / TABLE_RES as f64;
            let r = (u / ZERO_CROSSINGS as f64).min(1.0);
            sinc(u) * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
        })
        .collect()
}

/// Resamples `x` to `target_rate`. Output length is `⌊len·target/source⌋`.
pub fn resample(x: &ChannelSignal, target_rate: f64) -> Result<ChannelSignal> {
    let source_rate = x.sample_rate;
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::InvalidSignal(format!("invalid target rate {target_rate}")));
    }
    if target_rate == source_rate {
        return Ok(x.clone());
    }
    let table = kernel_table();
    // Cutoff in cycles per input sample.
    let fc = 0.5 * ROLLOFF * (target_rate / source_rate).min(1.0);
    let half_width = ZERO_CROSSINGS as f64 / (2.0 * fc);
    let step = source_rate / target_rate;
    let out_len = (x.len() as f64 * target_rate / source_rate).floor() as usize;
    let input = &x.samples;
    let last = input.len() as isize - 1;

    let samples = (0..out_len)
        .into_par_iter()
        .map(|n| {
            let t = n as f64 * step;
            let k0 = ((t - half_width).ceil() as isize).max(0);
            let k1 = ((t + half_width).floor() as isize).min(last);
            let mut acc = 0.0;
            for k in k0..=k1 {
                let u = (2.0 * fc * (t - k as f64)).abs() * TABLE_RES as f64;
                let i = u as usize;
                let frac = u - i as f64;
                let g = table[i] + frac * (table[i + 1] - table[i]);
                acc += input[k as usize] * g;
            }
            2.0 * fc * acc
        })
        .collect();
    Ok(ChannelSignal {
        samples,
        sample_rate: target_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_passes_with_unit_gain() {
        let x = ChannelSignal::new(vec![0.25; 2000], 1000.0).unwrap();
        let y = resample(&x, 3300.0).unwrap();
        assert_eq!(y.len(), 6600);
        for v in &y.samples[1000..5600] {
            assert!((v - 0.25).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn downsampling_removes_out_of_band_tone() {
        let fs = 48_000.0;
        let x = ChannelSignal::tone(0.5, 20_000.0, fs, 48_000);
        let y = resample(&x, 16_000.0).unwrap();
        let peak = y.samples[2000..14000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 1e-3, "{peak}");
    }
}
