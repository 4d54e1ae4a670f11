//! File formats: 16-bit PCM WAV and the packed one-bit stream container.

mod resample;
mod stream;
mod wav;

pub use resample::resample;
pub use stream::{read_stream, write_stream, MuxStreamFile, HEADER_LEN, MAGIC, VERSION};
pub use wav::{read_wav, write_wav, StereoSignal};
