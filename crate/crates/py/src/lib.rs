//! Python bindings for `dsmux`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dsmux::bench::{run_table1, BenchConfig};
use dsmux::io::{read_stream, write_stream, MuxStreamFile, StereoSignal};
use dsmux::metrics::{sweep_gamma, sweep_osr, SIGMA2_BINARY};
use dsmux::modulator::{realize, Quantizer};
use dsmux::pipeline::{decode_audio, decode_channels, encode_audio, CodecConfig};
use dsmux::spectral::{estimate_psd_with, WelchConfig};
use dsmux::{make_mux_ntf, synthesize_ntf_lp, BinaryCarrier, BitStream, ChannelSignal, DesignSpec, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidSpec(_)
        | Error::LeeCriterion { .. }
        | Error::ToneOutsideBand { .. }
        | Error::InvalidCarrier(_)
        | Error::InvalidSignal(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Noise transfer function in zero/pole/gain form.
#[pyclass(name = "TransferFunction", module = "dsmux", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTransferFunction(dsmux::TransferFunction);

#[pymethods]
impl PyTransferFunction {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        dsmux::TransferFunction::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    #[getter]
    fn zeros(&self) -> Vec<Complex64> {
        self.0.zeros().to_vec()
    }

    #[getter]
    fn poles(&self) -> Vec<Complex64> {
        self.0.poles().to_vec()
    }

    #[getter]
    fn gain(&self) -> f64 {
        self.0.gain()
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    /// `|H|` at normalized frequency `fhat`.
    fn magnitude(&self, fhat: f64) -> PyResult<f64> {
        self.0.magnitude(fhat).map_err(err)
    }

    /// `(fhat, magnitude)` of the peak over `[0, 1/2]`.
    #[pyo3(signature = (grid = 16384))]
    fn peak_gain(&self, grid: usize) -> (f64, f64) {
        self.0.peak_gain(grid)
    }

    fn impulse_response(&self, len: usize) -> Vec<f64> {
        self.0.impulse_response(len)
    }

    /// In-band noise power predicted for a uniform error of variance `sigma2`.
    #[pyo3(signature = (bhat, sigma2 = SIGMA2_BINARY))]
    fn predict_noise_power(&self, bhat: f64, sigma2: f64) -> PyResult<f64> {
        dsmux::predict_noise_power(&self.0, bhat, sigma2).map_err(err)
    }

    /// Runs the error-feedback modulator over `u`. Returns `(output, overloaded)`.
    #[pyo3(signature = (u, gamma = 1.5))]
    fn simulate(&self, py: Python<'_>, u: Vec<f64>, gamma: f64) -> PyResult<(Vec<f64>, bool)> {
        let ntf = self.0.clone();
        py.detach(move || {
            let mut lr = realize(&ntf)?;
            let res = dsmux::simulate(&ChannelSignal::new(u, 1.0)?, &mut lr, &Quantizer::binary(gamma))?;
            Ok((res.output, res.overloaded))
        })
        .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("TransferFunction(order={}, gain={})", self.0.order(), self.0.gain())
    }
}

/// Synthesizes a low-pass NTF, or the dual-channel band-pass one with `mux=True`.
#[pyfunction]
#[pyo3(signature = (order, osr, gamma = 1.5, optimize_zeros = true, mux = false))]
fn design(order: usize, osr: f64, gamma: f64, optimize_zeros: bool, mux: bool) -> PyResult<PyTransferFunction> {
    let build = || -> dsmux::Result<dsmux::TransferFunction> {
        let spec = DesignSpec::new(order, osr, gamma, optimize_zeros)?;
        if mux {
            make_mux_ntf(&synthesize_ntf_lp(&spec.mux_baseband()?)?)
        } else {
            synthesize_ntf_lp(&spec)
        }
    };
    build().map(PyTransferFunction).map_err(err)
}

/// Multiplies `x` by a periodic ±1 carrier, `(−1)ⁿ` by default.
#[pyfunction]
#[pyo3(signature = (x, carrier = None))]
fn mix(x: Vec<f64>, carrier: Option<Vec<i8>>) -> PyResult<Vec<f64>> {
    let c = match carrier {
        Some(c) => BinaryCarrier::new(c).map_err(err)?,
        None => BinaryCarrier::alternating(),
    };
    Ok(dsmux::mix(&x, &c))
}

/// Welch PSD, one-sided. Returns `(freqs, values)` with normalized frequencies.
#[pyfunction]
#[pyo3(signature = (x, segment_len = 16384))]
fn estimate_psd(py: Python<'_>, x: Vec<f64>, segment_len: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    py.detach(|| estimate_psd_with(&x, &WelchConfig::with_segment(segment_len)))
        .map(|p| (p.freqs, p.values))
        .map_err(err)
}

fn codec(band_hz: f64, osr: f64, gamma: f64, order: usize) -> CodecConfig {
    CodecConfig {
        band_hz,
        osr,
        gamma,
        order,
        ..CodecConfig::default()
    }
}

/// Encodes two audio channels into one ±1 stream at `4·osr·band_hz`.
/// Returns `(symbols, stream_rate, overloaded)`.
#[pyfunction]
#[pyo3(signature = (left, right, sample_rate, band_hz = 20_000.0, osr = 64.0, gamma = 1.5, order = 4))]
#[allow(clippy::too_many_arguments)]
fn encode(
    py: Python<'_>,
    left: Vec<f64>,
    right: Vec<f64>,
    sample_rate: f64,
    band_hz: f64,
    osr: f64,
    gamma: f64,
    order: usize,
) -> PyResult<(Vec<i8>, u32, bool)> {
    let cfg = codec(band_hz, osr, gamma, order);
    py.detach(|| {
        let audio = StereoSignal {
            left: ChannelSignal::new(left, sample_rate)?,
            right: ChannelSignal::new(right, sample_rate)?,
        };
        let enc = encode_audio(&audio, &cfg)?;
        let rate = enc.stream.sample_rate();
        Ok((enc.stream.into_symbols(), rate, enc.overloaded))
    })
    .map_err(err)
}

/// Splits a stream into its two channels. With `output_rate` the channels are
/// resampled to it, otherwise they stay at the stream rate.
#[pyfunction]
#[pyo3(signature = (symbols, stream_rate, osr = 64.0, output_rate = None))]
fn decode(
    py: Python<'_>,
    symbols: Vec<i8>,
    stream_rate: u32,
    osr: f64,
    output_rate: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = CodecConfig {
        osr,
        ..CodecConfig::default()
    };
    py.detach(|| {
        let stream = BitStream::new(symbols, stream_rate)?;
        match output_rate {
            Some(r) => decode_audio(&stream, &cfg, r).map(|a| (a.left.samples, a.right.samples)),
            None => decode_channels(&stream, &cfg).map(|(a, b)| (a.samples, b.samples)),
        }
    })
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (path, symbols, stream_rate, multiplexed = true))]
fn write_dsmx(path: &str, symbols: Vec<i8>, stream_rate: u32, multiplexed: bool) -> PyResult<()> {
    let stream = BitStream::new(symbols, stream_rate).map_err(err)?;
    write_stream(path, &MuxStreamFile::new(stream, multiplexed)).map_err(err)
}

/// Returns `(symbols, stream_rate, multiplexed)`.
#[pyfunction]
fn read_dsmx(path: &str) -> PyResult<(Vec<i8>, u32, bool)> {
    let f = read_stream(path).map_err(err)?;
    let rate = f.stream.sample_rate();
    Ok((f.stream.into_symbols(), rate, f.multiplexed))
}

/// Predicted floor against OSR (`mode="osr"`) or successive square roots of
/// `gamma0` (`mode="gamma"`). Returns the table as JSON.
#[pyfunction]
#[pyo3(signature = (mode, order, osr_list = vec![16.0, 32.0, 64.0, 128.0, 256.0], gamma = 1.5, osr = 64.0, gamma0 = 2.25, roots = 3, optimize_zeros = true))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    mode: &str,
    order: usize,
    osr_list: Vec<f64>,
    gamma: f64,
    osr: f64,
    gamma0: f64,
    roots: usize,
    optimize_zeros: bool,
) -> PyResult<String> {
    let table = match mode {
        "osr" => sweep_osr(order, gamma, &osr_list, optimize_zeros),
        "gamma" => sweep_gamma(order, osr, gamma0, roots, optimize_zeros),
        _ => return Err(PyValueError::new_err(format!("mode must be 'osr' or 'gamma', got {mode:?}"))),
    };
    table.and_then(|t| t.to_json()).map_err(err)
}

/// Runs the stereo benchmark and returns its report as JSON.
#[pyfunction]
#[pyo3(signature = (analysis_len = None))]
fn bench_table1(py: Python<'_>, analysis_len: Option<usize>) -> PyResult<String> {
    let mut cfg = BenchConfig::default();
    if let Some(n) = analysis_len {
        cfg.analysis_len = n;
    }
    py.detach(|| run_table1(&cfg).and_then(|r| r.to_json())).map_err(err)
}

#[pymodule]
#[pyo3(name = "dsmux")]
fn dsmux_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTransferFunction>()?;
    m.add_function(wrap_pyfunction!(design, m)?)?;
    m.add_function(wrap_pyfunction!(mix, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_psd, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(write_dsmx, m)?)?;
    m.add_function(wrap_pyfunction!(read_dsmx, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(bench_table1, m)?)?;
    Ok(())
}
