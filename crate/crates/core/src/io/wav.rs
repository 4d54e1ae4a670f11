use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::signal::ChannelSignal;

const FULL_SCALE: f64 = 32768.0;

/// Left/right pair at a common rate. Mono files load into both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoSignal {
    pub left: ChannelSignal,
    pub right: ChannelSignal,
}

impl StereoSignal {
    pub fn sample_rate(&self) -> f64 {
        self.left.sample_rate
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<StereoSignal> {
    let path = path.as_ref();
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedWav(format!(
            "{}: {}-bit {:?} samples; only 16-bit integer PCM is accepted",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::UnsupportedWav(format!(
            "{}: {} channels; only mono or stereo is accepted",
            path.display(),
            spec.channels
        )));
    }
    let raw = reader.into_samples::<i16>().collect::<std::result::Result<Vec<_>, _>>()?;
    let fs = f64::from(spec.sample_rate);
    let scale = |v: i16| f64::from(v) / FULL_SCALE;
    let (left, right) = if spec.channels == 1 {
        let l: Vec<f64> = raw.iter().map(|&v| scale(v)).collect();
        (l.clone(), l)
    } else {
        raw.chunks_exact(2).map(|f| (scale(f[0]), scale(f[1]))).unzip()
    };
    Ok(StereoSignal {
        left: ChannelSignal::new(left, fs)?,
        right: ChannelSignal::new(right, fs)?,
    })
}

fn quantize(x: f64) -> i16 {
    (x * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes 16-bit stereo PCM, clipping to the representable range.
pub fn write_wav(path: impl AsRef<Path>, audio: &StereoSignal) -> Result<()> {
    if audio.left.len() != audio.right.len() || audio.left.sample_rate != audio.right.sample_rate {
        return Err(Error::InvalidSignal("stereo channels must share length and rate".into()));
    }
    let fs = audio.sample_rate();
    if !(fs >= 1.0 && fs <= f64::from(u32::MAX) && fs.fract() == 0.0) {
        return Err(Error::InvalidSignal(format!("WAV sample rate must be a positive integer, got {fs}")));
    }
    let spec = WavSpec {
        channels: 2,
        sample_rate: fs as u32,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec)?;
    for (&l, &r) in audio.left.samples.iter().zip(&audio.right.samples) {
        w.write_sample(quantize(l))?;
        w.write_sample(quantize(r))?;
    }
    w.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_mapping() {
        assert!((f64::from(i16::MAX) / FULL_SCALE - 0.99997).abs() < 1e-5);
        assert_eq!(quantize(1.5), i16::MAX);
        assert_eq!(quantize(-1.0), i16::MIN);
    }

    #[test]
    fn rejects_24_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(0i32).unwrap();
        w.finalize().unwrap();
        let err = read_wav(&path).unwrap_err();
        assert!(err.to_string().contains("24-bit"), "{err}");
    }

    #[test]
    fn mono_fills_both_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for v in [0i16, 16384, -16384] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let s = read_wav(&path).unwrap();
        assert_eq!(s.left.samples, vec![0.0, 0.5, -0.5]);
        assert_eq!(s.left, s.right);
    }
}
