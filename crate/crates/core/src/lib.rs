//! Delta-sigma modulation with two-channel frequency-division multiplexing
//! on a single binary stream.
//!
//! The low-pass noise transfer function `L(z)` of a conventional modulator is
//! turned into the band-pass `L(z)·L(−z)`, channel 2 is moved to the top of the
//! spectrum by `(−1)ⁿ`, and the same mixing brings it back at the receiver
//! without leaving the {−1, +1} alphabet.

pub mod bench;
mod error;
pub mod filter;
pub mod io;
pub mod metrics;
pub mod modulator;
pub mod mux;
pub mod ntf;
mod optim;
pub mod pipeline;
pub mod quad;
pub mod signal;
pub mod spectral;

pub use error::{Error, Result};
pub use filter::ReconstructionFilter;
pub use metrics::{measure_inband, predict_noise_power, MetricsReport};
pub use modulator::{find_max_amplitude, realize, simulate, LoopRealization, Quantizer, SimulationResult, ToneSpec};
pub use mux::{demux_decode, mix, mux_encode, predict_mux_spectrum, BinaryCarrier, MuxFrame};
pub use ntf::{evaluate_magnitude, make_mux_ntf, synthesize_ntf_lp, DesignSpec, TransferFunction};
pub use signal::{BitStream, ChannelSignal};
pub use spectral::{estimate_psd, PsdEstimate};
