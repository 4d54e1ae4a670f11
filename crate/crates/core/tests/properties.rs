use proptest::prelude::*;

use dsmux::io::MuxStreamFile;
use dsmux::modulator::{realize, simulate, Quantizer};
use dsmux::spectral::estimate_psd;
use dsmux::{
    evaluate_magnitude, make_mux_ntf, mix, synthesize_ntf_lp, BinaryCarrier, BitStream, ChannelSignal,
    DesignSpec,
};

fn carrier() -> impl Strategy<Value = BinaryCarrier> {
    prop::collection::vec(prop::bool::ANY, 1..=16)
        .prop_map(|b| BinaryCarrier::new(b.into_iter().map(|v| if v { 1 } else { -1 }).collect()).unwrap())
}

fn design() -> impl Strategy<Value = DesignSpec> {
    (1usize..=5, 16.0f64..256.0, 1.2f64..1.9, prop::bool::ANY)
        .prop_filter_map("feasible", |(order, osr, gamma, opt)| {
            DesignSpec::new(order, osr, gamma, opt).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixing_is_an_involution(x in prop::collection::vec(-1e6f64..1e6, 0..200), r in carrier()) {
        prop_assert_eq!(mix(&mix(&x, &r), &r), x);
    }

    #[test]
    fn mixing_keeps_the_binary_alphabet(bits in prop::collection::vec(prop::bool::ANY, 0..300), r in carrier()) {
        let s: Vec<i8> = bits.into_iter().map(|b| if b { 1 } else { -1 }).collect();
        let m = mix(&s, &r);
        prop_assert!(m.iter().all(|&v| v == 1 || v == -1));
        prop_assert!(BitStream::new(m, 1).is_ok());
    }

    #[test]
    fn carrier_coefficients_are_conjugate_symmetric(r in carrier()) {
        let n = r.period();
        let k = r.fourier_coeffs();
        for i in 1..n {
            prop_assert!((k[n - i] - k[i].conj()).norm() < 1e-12);
        }
        // Inverse DFT reproduces the samples.
        for (m, &s) in r.samples().iter().enumerate() {
            let v: num_complex::Complex64 = k
                .iter()
                .enumerate()
                .map(|(i, c)| c * num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (i * m) as f64 / n as f64))
                .sum();
            prop_assert!((v.re - f64::from(s)).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn stream_file_round_trip(bits in prop::collection::vec(prop::bool::ANY, 0..1025), rate in 1u32.., muxed in prop::bool::ANY) {
        let s = BitStream::new(bits.into_iter().map(|b| if b { 1 } else { -1 }).collect(), rate).unwrap();
        let f = MuxStreamFile::new(s, muxed);
        let bytes = f.to_bytes();
        prop_assert_eq!(bytes.len(), 18 + f.stream.len().div_ceil(8));
        prop_assert_eq!(MuxStreamFile::from_bytes(&bytes).unwrap(), f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lee_bound_holds(spec in design()) {
        let ntf = synthesize_ntf_lp(&spec).unwrap();
        let grid = 1 << 14;
        let peak = (0..=grid)
            .map(|i| evaluate_magnitude(&ntf, 0.5 * i as f64 / grid as f64).unwrap())
            .fold(0.0, f64::max);
        prop_assert!(peak >= 0.99 * spec.gamma() && peak <= 1.01 * spec.gamma(), "{} vs {}", peak, spec.gamma());
    }

    #[test]
    fn synthesized_ntfs_are_biproper_and_delaying(spec in design()) {
        let ntf = synthesize_ntf_lp(&spec).unwrap();
        for tf in [ntf.clone(), make_mux_ntf(&ntf).unwrap()] {
            let h = tf.impulse_response(8);
            prop_assert!((h[0] - 1.0).abs() < 1e-12);
            let lr = realize(&tf).unwrap();
            prop_assert_eq!(lr.feedback_impulse_response(4)[0], 0.0);
            prop_assert!(tf.poles().iter().all(|p| p.norm() < 1.0));
        }
    }

    #[test]
    fn mux_response_is_symmetric_about_quarter(spec in design(), f in 0.0f64..0.5) {
        let mux = make_mux_ntf(&synthesize_ntf_lp(&spec).unwrap()).unwrap();
        let a = evaluate_magnitude(&mux, f).unwrap();
        let b = evaluate_magnitude(&mux, 0.5 - f).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(b).max(1e-300), "{} vs {}", a, b);
    }

    #[test]
    fn product_rule_for_roots(spec in design()) {
        let lp = synthesize_ntf_lp(&spec).unwrap();
        let mux = make_mux_ntf(&lp).unwrap();
        let sorted = |v: Vec<num_complex::Complex64>| {
            let mut v = v;
            v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            v
        };
        let expect_z = sorted(lp.zeros().iter().copied().chain(lp.zeros().iter().map(|z| -z)).collect());
        let expect_p = sorted(lp.poles().iter().copied().chain(lp.poles().iter().map(|z| -z)).collect());
        let got_z = sorted(mux.zeros().to_vec());
        let got_p = sorted(mux.poles().to_vec());
        for (a, b) in got_z.iter().zip(&expect_z).chain(got_p.iter().zip(&expect_p)) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        prop_assert_eq!(mux.order(), 2 * lp.order());
    }
}

fn bench_mux() -> dsmux::TransferFunction {
    let base = DesignSpec::new(4, 64.0, 1.5, true).unwrap().mux_baseband().unwrap();
    make_mux_ntf(&synthesize_ntf_lp(&base).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn output_alphabet_is_binary(amp in 0.0f64..0.6, f in 1e-4f64..0.004, len in 1usize..5000) {
        let ntf = bench_mux();
        let mut lr = realize(&ntf).unwrap();
        let u = ChannelSignal::tone(amp, f, 1.0, len);
        let out = simulate(&u, &mut lr, &Quantizer::binary(1.5)).unwrap();
        prop_assert_eq!(out.output.len(), len);
        prop_assert!(out.output.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn simulation_is_causal(n0 in 10usize..3000, delta in -0.3f64..0.3) {
        let ntf = bench_mux();
        let q = Quantizer::binary(1.5);
        let u = ChannelSignal::tone(0.3, 0.001, 1.0, 4000);
        let mut v = u.clone();
        v.samples[n0] += delta;
        let a = simulate(&u, &mut realize(&ntf).unwrap(), &q).unwrap();
        let b = simulate(&v, &mut realize(&ntf).unwrap(), &q).unwrap();
        prop_assert_eq!(&a.output[..n0], &b.output[..n0]);
    }
}

#[test]
fn simulation_is_deterministic() {
    let ntf = bench_mux();
    let q = Quantizer::binary(1.5);
    let u = ChannelSignal::tone(0.3, 0.001, 1.0, 50_000);
    let a = simulate(&u, &mut realize(&ntf).unwrap(), &q).unwrap();
    let b = simulate(&u, &mut realize(&ntf).unwrap(), &q).unwrap();
    assert_eq!(a.output, b.output);
}

#[test]
fn psd_parseval() {
    let ntf = bench_mux();
    let u = ChannelSignal::tone(0.3, 0.002, 1.0, 1 << 17);
    let x = simulate(&u, &mut realize(&ntf).unwrap(), &Quantizer::binary(1.5)).unwrap().output;
    let psd = estimate_psd(&x).unwrap();
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((psd.total_power() / ms - 1.0).abs() < 0.05, "{} vs {ms}", psd.total_power());
    assert!(psd.values.iter().all(|v| *v >= 0.0));
}
