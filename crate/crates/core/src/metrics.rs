//! Noise-floor prediction, in-band measurements, cross-talk probes and the
//! OSR / Lee-coefficient scaling studies.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntf::{synthesize_ntf_lp, DesignSpec, TransferFunction};
use crate::quad;
use crate::spectral::{estimate_psd, PsdEstimate};

/// Quantization error power `Δ²/12` for levels ±1.
pub const SIGMA2_BINARY: f64 = 1.0 / 3.0;

/// Welch bins excluded on each side of a tone.
pub const TONE_GUARD_BINS: usize = 2;

/// `10·log10(1 V² / 50 Ω / 1 mW)`: dB re unit power to dBm when full scale
/// is read as 1 V across 50 Ω.
pub const DBM_OFFSET_DB: f64 = 13.010_299_956_639_812;

/// Shift of the probe tone in the run that measures the silent channel's floor.
pub const FLOOR_OFFSET_BINS: usize = 16;

/// Leaked power below this fraction of the driven tone power counts as none.
const NUMERIC_FLOOR: f64 = 1e-20;

pub fn db(power: f64) -> f64 {
    10.0 * power.log10()
}

pub fn to_dbm(db_re_unit: f64) -> f64 {
    db_re_unit + DBM_OFFSET_DB
}

/// In-band noise power `σ²·2∫₀^B̂ |NTF(e^{j2πf})|² df`.
pub fn predict_noise_power(ntf: &TransferFunction, bhat: f64, sigma2_eps: f64) -> Result<f64> {
    if !(bhat > 0.0 && bhat < 0.5) {
        return Err(Error::InvalidSpec(format!("band edge {bhat} must lie in (0, 1/2)")));
    }
    if let Some(p) = ntf.poles().iter().find(|p| (p.norm() - 1.0).abs() < 1e-12) {
        return Err(Error::PoleOnUnitCircle(p.arg() / (2.0 * PI)));
    }
    let integral = quad::integrate(
        |f| {
            let m = ntf.magnitude_at(f);
            m * m
        },
        0.0,
        bhat,
        1e-9,
    )?;
    Ok(sigma2_eps * 2.0 * integral)
}

/// Synthesizes the design and returns its predicted floor in dB re unit power.
pub fn predicted_floor_db(spec: &DesignSpec) -> Result<f64> {
    let ntf = synthesize_ntf_lp(spec)?;
    Ok(db(predict_noise_power(&ntf, spec.normalized_band(), SIGMA2_BINARY)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InbandPower {
    pub signal: f64,
    pub noise: f64,
}

impl InbandPower {
    pub fn snr_db(&self) -> f64 {
        db(self.signal / self.noise)
    }

    pub fn noise_db(&self) -> f64 {
        db(self.noise)
    }
}

/// Splits the band `[lo, hi]` into tone power (each tone bin ±2) and noise
/// power (everything else in the band).
pub fn measure_inband(psd: &PsdEstimate, band: (f64, f64), tones: &[f64]) -> Result<InbandPower> {
    let (lo, hi) = band;
    if !(0.0..=0.5).contains(&lo) || !(0.0..=0.5).contains(&hi) || lo > hi {
        return Err(Error::InvalidSpec(format!("band [{lo}, {hi}] must lie within [0, 1/2]")));
    }
    let mut tone_bins = Vec::with_capacity(tones.len());
    for &t in tones {
        if !(t >= lo && t <= hi) {
            return Err(Error::ToneOutsideBand { tone: t, lo, hi });
        }
        tone_bins.push(psd.bin_of(t));
    }
    let near_tone = |k: usize| tone_bins.iter().any(|&b| k.abs_diff(b) <= TONE_GUARD_BINS);
    let df = psd.resolution();
    let mut signal = 0.0;
    let mut noise = 0.0;
    for (k, (&f, &v)) in psd.freqs.iter().zip(&psd.values).enumerate() {
        if near_tone(k) {
            signal += v * df;
        } else if f >= lo - 1e-15 && f <= hi + 1e-15 {
            noise += v * df;
        }
    }
    Ok(InbandPower { signal, noise })
}

/// PSD of `x` restricted to `[lo, hi]` split around `tones`.
pub fn inband_of(x: &[f64], band: (f64, f64), tones: &[f64]) -> Result<InbandPower> {
    measure_inband(&estimate_psd(x)?, band, tones)
}

/// Pearson correlation of `10·log10` PSD against `10·log10 |NTF|²` over
/// bins in `[lo, hi]`.
pub fn ntf_shape_correlation(psd: &PsdEstimate, ntf: &TransferFunction, lo: f64, hi: f64) -> f64 {
    let (a, b): (Vec<f64>, Vec<f64>) = psd
        .freqs
        .iter()
        .zip(&psd.values)
        .filter(|(f, v)| **f >= lo && **f <= hi && **v > 0.0)
        .map(|(&f, &v)| (db(v), 2.0 * db(ntf.magnitude_at(f).max(1e-150))))
        .unzip();
    pearson(&a, &b)
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    One,
    Two,
}

impl Channel {
    pub fn other(self) -> Self {
        match self {
            Channel::One => Channel::Two,
            Channel::Two => Channel::One,
        }
    }
}

/// One direction of a cross-talk measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkProbe {
    pub driven: Channel,
    /// Tone frequency normalized to the stream rate.
    pub tone: f64,
    pub amplitude: f64,
    /// Total stimulus length.
    pub len: usize,
    /// First decoded sample used for analysis.
    pub analysis_start: usize,
    pub analysis_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkResult {
    pub driven: Channel,
    /// Power within ±2 bins of the tone in the silent channel.
    pub leaked_power: f64,
    /// Silent-channel power over the same bins with the tone moved away.
    pub floor_power: f64,
    /// Leaked power relative to the driven tone power, `-inf` when nothing leaks.
    #[serde(with = "finite_or_null")]
    pub crosstalk_db: f64,
    pub below_floor: bool,
}

/// Drives one channel with a cosine and measures what reaches the other.
///
/// `encoder` maps `(ch1, ch2)` to a stream, `decoder` maps the stream back to
/// `(ch1, ch2)`. The silent channel's power around the tone is compared with
/// its power at the same bins in a second run where the tone is moved
/// [`FLOOR_OFFSET_BINS`] bins up. Leakage within 3 dB of that floor is
/// reported as below the floor.
pub fn measure_crosstalk<E, D>(encoder: E, decoder: D, probe: &CrosstalkProbe) -> Result<CrosstalkResult>
where
    E: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
    D: Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
{
    let end = probe.analysis_start + probe.analysis_len;
    if end > probe.len {
        return Err(Error::InvalidSpec("analysis window exceeds the probe length".into()));
    }
    let silent_psd = |tone: f64| -> Result<PsdEstimate> {
        let drive: Vec<f64> = (0..probe.len)
            .map(|n| probe.amplitude * (2.0 * PI * tone * n as f64).cos())
            .collect();
        let silence = vec![0.0; probe.len];
        let stream = match probe.driven {
            Channel::One => encoder(&drive, &silence)?,
            Channel::Two => encoder(&silence, &drive)?,
        };
        let (ch1, ch2) = decoder(&stream)?;
        let silent = match probe.driven {
            Channel::One => ch2,
            Channel::Two => ch1,
        };
        if silent.len() < end {
            return Err(Error::TooShort {
                needed: end,
                got: silent.len(),
            });
        }
        estimate_psd(&silent[probe.analysis_start..end])
    };
    let psd = silent_psd(probe.tone)?;
    let displaced = silent_psd(probe.tone + FLOOR_OFFSET_BINS as f64 * psd.resolution())?;

    let tb = psd.bin_of(probe.tone);
    let bins = tb.saturating_sub(TONE_GUARD_BINS)..=(tb + TONE_GUARD_BINS).min(psd.values.len() - 1);
    let df = psd.resolution();
    let leaked: f64 = bins.clone().map(|k| psd.values[k] * df).sum();
    let floor: f64 = bins.map(|k| displaced.values[k] * df).sum();
    let reference = probe.amplitude * probe.amplitude / 2.0;
    let crosstalk_db = if leaked <= NUMERIC_FLOOR * reference {
        f64::NEG_INFINITY
    } else {
        db(leaked / reference)
    };
    Ok(CrosstalkResult {
        driven: probe.driven,
        leaked_power: leaked,
        floor_power: floor,
        crosstalk_db,
        below_floor: crosstalk_db == f64::NEG_INFINITY || leaked <= 2.0 * floor,
    })
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Osr,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub order: usize,
    pub osr: f64,
    pub gamma: f64,
    pub predicted_noise_db: f64,
    /// Change from the previous row.
    pub delta_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub mode: SweepMode,
    pub optimize_zeros: bool,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.delta_db).collect()
    }
}

fn run_sweep(mode: SweepMode, optimize_zeros: bool, specs: Vec<Result<DesignSpec>>) -> Result<SweepTable> {
    let floors = specs
        .into_par_iter()
        .map(|spec| {
            let spec = spec?;
            predicted_floor_db(&spec)
                .map(|p| (spec, p))
                .map_err(|e| Error::SweepPoint {
                    order: spec.order(),
                    osr: spec.osr(),
                    gamma: spec.gamma(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(floors.len());
    let mut prev: Option<f64> = None;
    for (spec, p) in floors {
        rows.push(SweepRow {
            order: spec.order(),
            osr: spec.osr(),
            gamma: spec.gamma(),
            predicted_noise_db: p,
            delta_db: prev.map(|q| p - q),
        });
        prev = Some(p);
    }
    Ok(SweepTable {
        mode,
        optimize_zeros,
        rows,
    })
}

/// Predicted floor over an ascending list of OSRs.
pub fn sweep_osr(order: usize, gamma: f64, osr_list: &[f64], optimize_zeros: bool) -> Result<SweepTable> {
    if osr_list.is_empty() || osr_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec("OSR list must be non-empty and strictly ascending".into()));
    }
    let specs = osr_list
        .iter()
        .map(|&osr| DesignSpec::new(order, osr, gamma, optimize_zeros))
        .collect();
    run_sweep(SweepMode::Osr, optimize_zeros, specs)
}

/// Predicted floor for `γ₀, √γ₀, γ₀^{1/4}, …` (`roots` square roots).
///
/// `γ₀` may exceed the binary Lee limit since only the prediction is computed.
pub fn sweep_gamma(
    order: usize,
    osr: f64,
    gamma0: f64,
    roots: usize,
    optimize_zeros: bool,
) -> Result<SweepTable> {
    let limit = gamma0.max(DesignSpec::BINARY_LEE_LIMIT) * (1.0 + 1e-9);
    let specs = (0..=roots)
        .map(|k| {
            let gamma = gamma0.powf(0.5f64.powi(k as i32));
            DesignSpec::with_lee_limit(order, osr, gamma, optimize_zeros, limit)
        })
        .collect();
    run_sweep(SweepMode::Gamma, optimize_zeros, specs)
}

/// Measurements for one decoded channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub tone_hz: f64,
    /// Tone as a Welch bin index; the tone sits exactly on this bin.
    pub tone_bin: usize,
    pub nominal_amplitude: f64,
    /// In-band noise at the nominal amplitude, dB re unit power.
    pub noise_floor_db: f64,
    pub noise_floor_dbm: f64,
    pub snr_db: f64,
    /// Per-channel amplitude of the max-SNR run.
    pub max_amplitude: f64,
    /// `None` when the run at the maximum amplitude diverged.
    pub max_snr_db: Option<f64>,
    pub max_run_overloaded: bool,
    /// Leakage of this channel's tone into the other channel.
    pub crosstalk: Option<CrosstalkResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetadata {
    pub order: usize,
    pub osr: f64,
    pub gamma: f64,
    pub optimize_zeros: bool,
    pub multiplexed: bool,
    pub sample_rate_hz: f64,
    pub band_hz: f64,
    pub predicted_noise_floor_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisMetadata {
    pub analysis_len: usize,
    pub warmup: usize,
    pub segment_len: usize,
    pub overlap: f64,
    pub window: String,
    pub averages: usize,
    pub power_reference: String,
    pub snap_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub design: DesignMetadata,
    pub analysis: AnalysisMetadata,
    pub channels: Vec<ChannelMetrics>,
    /// Cumulative `|u₁|+|u₂|` limit when multiplexed, else the smaller
    /// per-channel limit.
    pub max_amplitude: f64,
    pub max_amplitude_cumulative: bool,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    label: &'a str,
    channel: usize,
    order: usize,
    osr: f64,
    gamma: f64,
    optimize_zeros: bool,
    multiplexed: bool,
    sample_rate_hz: f64,
    tone_hz: f64,
    nominal_amplitude: f64,
    noise_floor_db: f64,
    noise_floor_dbm: f64,
    snr_db: f64,
    max_amplitude: f64,
    max_snr_db: Option<f64>,
    crosstalk_db: Option<f64>,
    crosstalk_below_floor: Option<bool>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per channel.
    pub fn write_csv<W: std::io::Write>(reports: &[&MetricsReport], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in reports {
            for (i, c) in r.channels.iter().enumerate() {
                out.serialize(CsvRow {
                    label: &r.label,
                    channel: i + 1,
                    order: r.design.order,
                    osr: r.design.osr,
                    gamma: r.design.gamma,
                    optimize_zeros: r.design.optimize_zeros,
                    multiplexed: r.design.multiplexed,
                    sample_rate_hz: r.design.sample_rate_hz,
                    tone_hz: c.tone_hz,
                    nominal_amplitude: c.nominal_amplitude,
                    noise_floor_db: c.noise_floor_db,
                    noise_floor_dbm: c.noise_floor_dbm,
                    snr_db: c.snr_db,
                    max_amplitude: c.max_amplitude,
                    max_snr_db: c.max_snr_db,
                    crosstalk_db: c.crosstalk.map(|x| x.crosstalk_db).filter(|v| v.is_finite()),
                    crosstalk_below_floor: c.crosstalk.map(|x| x.below_floor),
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
