//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by the
//! individual measurements, and exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dsmux::bench::{run_table1, BenchConfig, BenchDesign, Table1Report};
use dsmux::io::{read_stream, read_wav, write_stream, write_wav, MuxStreamFile, StereoSignal};
use dsmux::metrics::{inband_of, ntf_shape_correlation, sweep_gamma, sweep_osr};
use dsmux::modulator::{realize, simulate, Quantizer, WARMUP};
use dsmux::mux::mix_bits;
use dsmux::spectral::{estimate_psd_with, WelchConfig};
use dsmux::{
    evaluate_magnitude, make_mux_ntf, mix, synthesize_ntf_lp, BinaryCarrier, BitStream, ChannelSignal, DesignSpec,
    TransferFunction,
};

// Stereo benchmark targets and tolerances.
const MUX_FLOOR_DBM: [f64; 2] = [-102.0, -101.0];
const FLOOR_ABS_TOL_DB: f64 = 4.0;
const FLOOR_DIFF_TOL_DB: f64 = 2.0;
const MUX_SNR_DB: [f64; 2] = [98.0, 105.0];
const MUX_MAX_SNR_DB: [f64; 2] = [103.0, 103.0];
const REF_SNR_DB: [f64; 2] = [95.0, 101.0];
const REF_MAX_SNR_DB: [f64; 2] = [68.0, 75.0];
const SNR_TOL_DB: f64 = 3.0;
const MIN_MAX_SNR_GAP_DB: f64 = 20.0;
const MUX_MAX_AMPLITUDE: f64 = 0.68;
const REF_MAX_AMPLITUDE: f64 = 0.64;
const AMPLITUDE_TOL: f64 = 0.06;
const FLOOR_DELTA_RANGE_DB: (f64, f64) = (-7.0, -3.0);
const NET_SNR_RANGE_DB: (f64, f64) = (-3.0, 1.0);

// Scaling laws.
const OSR_LIST: [f64; 5] = [16.0, 32.0, 64.0, 128.0, 256.0];
const SWEEP_GAMMA: f64 = 1.5;
const SWEEP_OSR: f64 = 64.0;
const GAMMA0: f64 = 2.25;
const GAMMA_ROOTS: usize = 2;
const SCALING_TOL_DB: f64 = 3.0;

// Property tolerances.
const BIPROPER_TOL: f64 = 1e-12;
const SYMMETRY_REL_TOL: f64 = 1e-9;
const LEE_REL_TOL: f64 = 0.01;
const EQ5_TOL_DB: f64 = 3.0;
const SHAPE_MIN_CORR: f64 = 0.95;

const RUNTIME_BUDGET_S: f64 = 300.0;

struct Criterion {
    id: &'static str,
    title: &'static str,
    lines: Vec<(bool, String)>,
}

impl Criterion {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self {
            id,
            title,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.lines.push((ok, what));
    }

    fn within(&mut self, name: &str, measured: Option<f64>, target: f64, tol: f64) {
        self.range(name, measured, target - tol, target + tol);
    }

    fn range(&mut self, name: &str, measured: Option<f64>, lo: f64, hi: f64) {
        let ok = measured.is_some_and(|m| m >= lo && m <= hi);
        let shown = measured.map_or("n/a".to_string(), |m| format!("{m:.3}"));
        self.check(ok, format!("{name}: {shown} in [{lo:.2}, {hi:.2}]"));
    }

    fn pass(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(|(ok, _)| *ok)
    }

    fn print(&self) {
        let failed = self.lines.iter().filter(|(ok, _)| !ok).count();
        println!(
            "{} {} {} ({}/{} checks)",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.lines.len() - failed,
            self.lines.len()
        );
        for (ok, line) in &self.lines {
            println!("       {} {line}", if *ok { "ok  " } else { "FAIL" });
        }
    }
}

fn design_grid() -> Vec<DesignSpec> {
    let mut out = Vec::new();
    for order in 1..=5 {
        for osr in OSR_LIST {
            for gamma in [1.2, 1.5, 1.9] {
                for opt in [false, true] {
                    if let Ok(spec) = DesignSpec::new(order, osr, gamma, opt) {
                        out.push(spec);
                    }
                }
            }
        }
    }
    out
}

fn table1_noise_floor(r: &Table1Report) -> Criterion {
    let mut c = Criterion::new("C1", "mux noise floor per channel and ch1-ch2 difference");
    let m = &r.mux.channels;
    for k in 0..2 {
        c.within(
            &format!("mux ch{} floor [dBm]", k + 1),
            Some(m[k].noise_floor_dbm),
            MUX_FLOOR_DBM[k],
            FLOOR_ABS_TOL_DB,
        );
    }
    c.within(
        "mux ch1-ch2 floor [dB]",
        Some(m[0].noise_floor_db - m[1].noise_floor_db),
        MUX_FLOOR_DBM[0] - MUX_FLOOR_DBM[1],
        FLOOR_DIFF_TOL_DB,
    );
    c
}

fn table1_snr(r: &Table1Report) -> Criterion {
    let mut c = Criterion::new("C2", "nominal and max SNR, reference max-SNR collapse");
    let (m, rf) = (&r.mux.channels, &r.reference.channels);
    for k in 0..2 {
        let ch = k + 1;
        c.within(&format!("mux ch{ch} SNR [dB]"), Some(m[k].snr_db), MUX_SNR_DB[k], SNR_TOL_DB);
        c.within(&format!("mux ch{ch} max SNR [dB]"), m[k].max_snr_db, MUX_MAX_SNR_DB[k], SNR_TOL_DB);
        c.within(&format!("reference ch{ch} SNR [dB]"), Some(rf[k].snr_db), REF_SNR_DB[k], SNR_TOL_DB);
        c.within(
            &format!("reference ch{ch} max SNR [dB]"),
            rf[k].max_snr_db,
            REF_MAX_SNR_DB[k],
            SNR_TOL_DB,
        );
        let gap = m[k].max_snr_db.zip(rf[k].max_snr_db).map(|(a, b)| a - b);
        c.range(
            &format!("ch{ch} max SNR gap mux-reference [dB]"),
            gap,
            MIN_MAX_SNR_GAP_DB,
            f64::INFINITY,
        );
    }
    c
}

fn table1_amplitudes(r: &Table1Report) -> Criterion {
    let mut c = Criterion::new("C3", "max stable input amplitudes");
    c.within(
        "mux cumulative max amplitude",
        Some(r.mux.max_amplitude),
        MUX_MAX_AMPLITUDE,
        AMPLITUDE_TOL,
    );
    for k in 0..2 {
        c.within(
            &format!("reference ch{} max amplitude", k + 1),
            Some(r.reference.channels[k].max_amplitude),
            REF_MAX_AMPLITUDE,
            AMPLITUDE_TOL,
        );
    }
    c
}

fn table1_crosstalk(r: &Table1Report) -> Criterion {
    let mut c = Criterion::new("C4", "crosstalk below the noise floor in both directions");
    for (k, dir) in ["ch1->ch2", "ch2->ch1"].iter().enumerate() {
        match r.mux.channels[k].crosstalk {
            Some(x) => c.check(
                x.below_floor,
                format!(
                    "{dir}: leaked {:.3e}, floor {:.3e}, below floor = {}",
                    x.leaked_power, x.floor_power, x.below_floor
                ),
            ),
            None => c.check(false, format!("{dir}: not measured")),
        }
    }
    c
}

fn table1_differential(r: &Table1Report) -> Criterion {
    let mut c = Criterion::new("C5", "noise floor improvement and net SNR change");
    c.range(
        "predicted floor mux-reference [dB]",
        Some(r.predicted_floor_delta_db),
        FLOOR_DELTA_RANGE_DB.0,
        FLOOR_DELTA_RANGE_DB.1,
    );
    for k in 0..2 {
        c.range(
            &format!("ch{} net SNR change [dB]", k + 1),
            Some(r.net_snr_change_db[k]),
            NET_SNR_RANGE_DB.0,
            NET_SNR_RANGE_DB.1,
        );
    }
    c
}

fn scaling_laws() -> Criterion {
    let mut c = Criterion::new("C6", "predicted floor scaling with OSR and Lee coefficient");
    for order in 1..=4 {
        let expected = -(3.0 + 6.0 * order as f64);
        match sweep_osr(order, SWEEP_GAMMA, &OSR_LIST, true) {
            Ok(t) => {
                for row in t.rows.iter().filter(|r| r.delta_db.is_some()) {
                    c.within(
                        &format!("order {order}, OSR {} -> {} [dB]", row.osr / 2.0, row.osr),
                        row.delta_db,
                        expected,
                        SCALING_TOL_DB,
                    );
                }
            }
            Err(e) => c.check(false, format!("order {order} OSR sweep: {e}")),
        }
    }
    for order in 2..=4 {
        let expected = -1.0 + 6.0 * order as f64;
        match sweep_gamma(order, SWEEP_OSR, GAMMA0, GAMMA_ROOTS, true) {
            Ok(t) => {
                for w in t.rows.windows(2) {
                    c.within(
                        &format!("order {order}, gamma {:.4} -> {:.4} [dB]", w[0].gamma, w[1].gamma),
                        w[1].delta_db,
                        expected,
                        SCALING_TOL_DB,
                    );
                }
            }
            Err(e) => c.check(false, format!("order {order} gamma sweep: {e}")),
        }
    }
    c
}

/// Zero-input in-band power of each channel of a bench design, against the prediction.
fn eq5_against_simulation(c: &mut Criterion, name: &str, d: &BenchDesign, len: usize) {
    let predicted = match d.predicted_floor_db() {
        Ok(p) => p,
        Err(e) => return c.check(false, format!("{name}: {e}")),
    };
    let mut lr = d.realization.clone();
    lr.reset();
    let res = match simulate(&ChannelSignal::zeros(WARMUP + len, d.sample_rate), &mut lr, &d.quantizer) {
        Ok(r) => r,
        Err(e) => return c.check(false, format!("{name}: {e}")),
    };
    let x = &res.output[WARMUP..];
    let b = d.normalized_band;
    let mut bands = vec![("ch1", (0.0, b))];
    if d.multiplexed {
        bands.push(("ch2", (0.5 - b, 0.5)));
    }
    for (ch, band) in bands {
        match inband_of(x, band, &[]) {
            Ok(p) => {
                let simulated = p.noise_db();
                let ok = (simulated - predicted).abs() <= EQ5_TOL_DB;
                c.check(
                    ok,
                    format!(
                        "{name} {ch}: zero-input simulated {simulated:.2} dB vs predicted {predicted:.2} dB (|diff| <= {EQ5_TOL_DB})"
                    ),
                );
            }
            Err(e) => c.check(false, format!("{name} {ch}: {e}")),
        }
    }
}

fn property_suites(rng: &mut ChaCha8Rng, cfg: &BenchConfig) -> Criterion {
    let mut c = Criterion::new("C7", "property suites");

    let carriers: Vec<BinaryCarrier> = (0..64)
        .map(|_| {
            let period = rng.random_range(1..=16);
            BinaryCarrier::new((0..period).map(|_| if rng.random() { 1 } else { -1 }).collect()).unwrap()
        })
        .collect();

    let mut involution = true;
    for r in &carriers {
        for _ in 0..16 {
            let n = rng.random_range(0..512);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1e6..1e6)).collect();
            involution &= mix(&mix(&x, r), r) == x;
        }
    }
    c.check(involution, format!("mixing involution, {} carriers x 16 vectors, exact", carriers.len()));

    let grid = design_grid();
    let mut alphabet = true;
    let mut runs = 0;
    for spec in grid.iter().step_by(7) {
        let Ok(ntf) = synthesize_ntf_lp(spec) else { continue };
        let mut lr = realize(&ntf).unwrap();
        let f = rng.random_range(0.0..spec.normalized_band());
        let amp = rng.random_range(0.0..0.5);
        let u = ChannelSignal::tone(amp, f, 1.0, 8192);
        let out = simulate(&u, &mut lr, &Quantizer::binary(spec.gamma())).unwrap();
        alphabet &= out.output.iter().all(|&v| v == 1.0 || v == -1.0);
        let bits = out.to_bitstream().unwrap();
        alphabet &= carriers
            .iter()
            .take(8)
            .all(|r| mix_bits(&bits, r).symbols().iter().all(|&s| s == 1 || s == -1));
        runs += 1;
    }
    c.check(alphabet, format!("output alphabet {{-1,+1}} over {runs} simulations and their mixes, exact"));

    let mut worst_h0 = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut worst_lee = 0.0f64;
    let mut synthesized = 0;
    let mut failures = Vec::new();
    for spec in &grid {
        let lp = match synthesize_ntf_lp(spec) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{spec:?}: {e}"));
                continue;
            }
        };
        synthesized += 1;
        let (_, peak) = lp.peak_gain(1 << 16);
        worst_lee = worst_lee.max((peak / spec.gamma() - 1.0).abs());
        worst_h0 = worst_h0.max((lp.impulse_response(1)[0] - 1.0).abs());

        let Ok(base) = spec.mux_baseband() else { continue };
        let Ok(base_lp) = synthesize_ntf_lp(&base) else { continue };
        let mux = make_mux_ntf(&base_lp).unwrap();
        worst_h0 = worst_h0.max((mux.impulse_response(1)[0] - 1.0).abs());
        for i in 0..500 {
            let d = 0.25 * (i as f64 + 0.5) / 500.0;
            let hi = evaluate_magnitude(&mux, 0.25 + d).unwrap();
            let lo = evaluate_magnitude(&mux, 0.25 - d).unwrap();
            worst_sym = worst_sym.max((hi - lo).abs() / hi.max(lo).max(f64::MIN_POSITIVE));
        }
    }
    c.check(failures.is_empty(), format!("synthesis succeeded for {synthesized}/{} designs {failures:?}", grid.len()));
    c.check(worst_h0 <= BIPROPER_TOL, format!("biproper h[0]=1: worst |h[0]-1| = {worst_h0:.2e} (<= {BIPROPER_TOL:e})"));
    c.check(
        worst_sym <= SYMMETRY_REL_TOL,
        format!("mux symmetry about 1/4: worst relative mismatch {worst_sym:.2e} (<= {SYMMETRY_REL_TOL:e})"),
    );
    c.check(worst_lee <= LEE_REL_TOL, format!("Lee peak: worst |peak/gamma - 1| = {worst_lee:.2e} (<= {LEE_REL_TOL})"));

    match (BenchDesign::multiplexed(cfg), BenchDesign::reference(cfg)) {
        (Ok(m), Ok(r)) => {
            eq5_against_simulation(&mut c, "mux 8th order", &m, cfg.analysis_len);
            eq5_against_simulation(&mut c, "reference 4th order", &r, cfg.analysis_len);
        }
        (m, r) => c.check(false, format!("bench designs: {:?} {:?}", m.err(), r.err())),
    }

    let dir = tempfile::tempdir().unwrap();
    let mut streams_ok = true;
    for i in 0..200 {
        let n = rng.random_range(0..1025);
        let bits = BitStream::new((0..n).map(|_| if rng.random() { 1 } else { -1 }).collect(), rng.random()).unwrap();
        let file = MuxStreamFile::new(bits, rng.random());
        streams_ok &= MuxStreamFile::from_bytes(&file.to_bytes()).is_ok_and(|f| f == file);
        if i % 20 == 0 {
            let path = dir.path().join(format!("s{i}.dsmx"));
            streams_ok &= write_stream(&path, &file).is_ok() && read_stream(&path).is_ok_and(|f| f == file);
        }
    }
    c.check(streams_ok, "stream container round trip, 200 random lengths 0..1025, bit exact".into());

    let mut wav_ok = true;
    for i in 0..20 {
        let n = rng.random_range(0..5000);
        let pcm = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-32768i32..32768) as f64 / 32768.0).collect()
        };
        let audio = StereoSignal {
            left: ChannelSignal::new(pcm(rng), 44_100.0).unwrap(),
            right: ChannelSignal::new(pcm(rng), 44_100.0).unwrap(),
        };
        let path = dir.path().join(format!("w{i}.wav"));
        wav_ok &= write_wav(&path, &audio).is_ok() && read_wav(&path).is_ok_and(|a| a == audio);
    }
    c.check(wav_ok, "WAV round trip of 16-bit PCM values, 20 random files, exact".into());
    c
}

fn hand_oracles() -> Criterion {
    let mut c = Criterion::new("C8", "hand-stepped oracles");

    // First-order loop with zero input: y = fb, x = sign(y) with ties to +1, fb' = y - x.
    let mut fb = 0.0f64;
    let mut expected = Vec::new();
    for _ in 0..8 {
        let y = fb;
        let x = if y >= 0.0 { 1.0 } else { -1.0 };
        fb = y - x;
        expected.push(x);
    }
    let first = TransferFunction::ntf(vec![1.0.into()], vec![0.0.into()]).unwrap();
    let got = simulate(&ChannelSignal::zeros(8, 1.0), &mut realize(&first).unwrap(), &Quantizer::binary(1.5))
        .map(|r| r.output)
        .unwrap_or_default();
    c.check(got == expected, format!("first-order zero-input limit cycle {got:?} == {expected:?}"));

    let num = make_mux_ntf(&first).map(|t| t.numerator()).unwrap_or_default();
    c.check(num == [1.0, 0.0, -1.0], format!("mux of 1-z^-1 has numerator {num:?} == [1, 0, -1]"));
    c
}

fn supplementary_shape(cfg: &BenchConfig) -> Criterion {
    let mut c = Criterion::new("S1", "quantization noise spectrum follows |NTF|^2 (log-scale correlation)");
    let d = match BenchDesign::multiplexed(cfg) {
        Ok(d) => d,
        Err(e) => {
            c.check(false, format!("mux design: {e}"));
            return c;
        }
    };
    let len = WARMUP + (1 << 18);
    let w = |bin: f64| 2.0 * PI * bin / 16384.0;
    let u: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            0.2 * (w(3.0) * t).cos() + 0.2 * sign * (w(10.0) * t).cos()
        })
        .collect();
    let welch = WelchConfig::with_segment(1024);
    for (name, input) in [("two-tone input, x-u", u), ("zero input, x", vec![0.0; len])] {
        let mut lr = d.realization.clone();
        lr.reset();
        let res = simulate(&ChannelSignal::new(input.clone(), d.sample_rate).unwrap(), &mut lr, &d.quantizer).unwrap();
        let q: Vec<f64> = res.output.iter().zip(&input).map(|(x, u)| x - u).collect();
        let psd = estimate_psd_with(&q[WARMUP..], &welch).unwrap();
        let corr = ntf_shape_correlation(&psd, &d.ntf, 0.01, 0.49);
        c.check(
            corr >= SHAPE_MIN_CORR,
            format!("mux 8th order, {name}: correlation {corr:.3} (>= {SHAPE_MIN_CORR})"),
        );
    }
    c
}

fn main() -> ExitCode {
    let cfg = BenchConfig::default();
    let start = Instant::now();
    let report = match run_table1(&cfg) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL C1-C5, C9 bench-table1 did not complete: {e}");
            return ExitCode::FAILURE;
        }
    };
    let bench_s = start.elapsed().as_secs_f64();

    let mut runtime = Criterion::new("C9", "bench-table1 runtime");
    runtime.range("wall time [s]", Some(bench_s), 0.0, RUNTIME_BUDGET_S);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let criteria = [
        table1_noise_floor(&report),
        table1_snr(&report),
        table1_amplitudes(&report),
        table1_crosstalk(&report),
        table1_differential(&report),
        scaling_laws(),
        property_suites(&mut rng, &cfg),
        hand_oracles(),
        runtime,
        supplementary_shape(&cfg),
    ];
    for c in &criteria {
        c.print();
    }
    let failed: Vec<&str> = criteria.iter().filter(|c| !c.pass()).map(|c| c.id).collect();
    println!(
        "acceptance: {}/{} passed{}",
        criteria.len() - failed.len(),
        criteria.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failing: {}", failed.join(" "))
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
