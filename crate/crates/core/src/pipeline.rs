//! Audio in, one-bit stream out, and back.

use crate::error::{Error, Result};
use crate::filter::ReconstructionFilter;
use crate::io::{resample, StereoSignal};
use crate::modulator::{realize, Quantizer};
use crate::mux::{demux_decode, mux_encode, MuxFrame};
use crate::ntf::{make_mux_ntf, synthesize_ntf_lp, DesignSpec};
use crate::signal::{BitStream, ChannelSignal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    pub band_hz: f64,
    pub osr: f64,
    pub gamma: f64,
    pub order: usize,
    pub optimize_zeros: bool,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            band_hz: 20_000.0,
            osr: 64.0,
            gamma: 1.5,
            order: 4,
            optimize_zeros: true,
        }
    }
}

impl CodecConfig {
    /// Stream rate `f_Φ = 4·OSR·B`.
    pub fn stream_rate(&self) -> f64 {
        4.0 * self.osr * self.band_hz
    }

    pub fn normalized_band(&self) -> f64 {
        self.band_hz / self.stream_rate()
    }

    /// Band implied by a stream rate for this OSR.
    pub fn band_for_rate(&self, stream_rate: f64) -> f64 {
        stream_rate / (4.0 * self.osr)
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub stream: BitStream,
    pub overloaded: bool,
    /// Largest `|u₁|+|u₂|` seen by the modulator.
    pub cumulative_peak: f64,
}

/// Resamples both channels to the stream rate and encodes them into one stream.
pub fn encode_audio(audio: &StereoSignal, cfg: &CodecConfig) -> Result<Encoded> {
    let fs = cfg.stream_rate();
    if fs.fract() != 0.0 || fs > f64::from(u32::MAX) {
        return Err(Error::InvalidSpec(format!("stream rate {fs} Hz is not a 32-bit integer")));
    }
    let (l, r) = rayon::join(|| resample(&audio.left, fs), || resample(&audio.right, fs));
    let frame = MuxFrame::new(l?, r?, cfg.band_hz)?;
    let base = DesignSpec::new(cfg.order, cfg.osr, cfg.gamma, cfg.optimize_zeros)?.mux_baseband()?;
    let ntf = make_mux_ntf(&synthesize_ntf_lp(&base)?)?;
    let mut loop_ = realize(&ntf)?;
    let res = mux_encode(&frame, &mut loop_, &Quantizer::binary(cfg.gamma))?;
    Ok(Encoded {
        stream: res.to_bitstream()?,
        overloaded: res.overloaded,
        cumulative_peak: frame.cumulative_peak(),
    })
}

/// Splits the stream into its two channels at the stream rate.
pub fn decode_channels(stream: &BitStream, cfg: &CodecConfig) -> Result<(ChannelSignal, ChannelSignal)> {
    let fs = f64::from(stream.sample_rate());
    let lp = ReconstructionFilter::for_band(cfg.band_for_rate(fs) / fs)?;
    let d = demux_decode(stream, &lp);
    Ok((d.ch1, d.ch2))
}

/// Decodes to audio at `output_rate`, decimating after the reconstruction
/// filter before the final resampling.
pub fn decode_audio(stream: &BitStream, cfg: &CodecConfig, output_rate: f64) -> Result<StereoSignal> {
    let fs = f64::from(stream.sample_rate());
    let (ch1, ch2) = decode_channels(stream, cfg)?;
    // Aliases of the filtered channels land above the band as long as f_Φ/D ≥ 4·B.
    let factor = ((fs / (4.0 * cfg.band_for_rate(fs))).floor() as usize).max(1);
    let decimate = |c: ChannelSignal| ChannelSignal {
        samples: c.samples.into_iter().step_by(factor).collect(),
        sample_rate: fs / factor as f64,
    };
    let (l, r) = rayon::join(
        || resample(&decimate(ch1), output_rate),
        || resample(&decimate(ch2), output_rate),
    );
    Ok(StereoSignal { left: l?, right: r? })
}
