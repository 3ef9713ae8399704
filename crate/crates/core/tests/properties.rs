use proptest::prelude::*;

use qfb_core::isa::{
    decode_control, decode_measure, deserialize_tag_packet, encode_control, encode_measure, serialize_masked,
    ControlInstruction, MeasureInstruction, Opcode, MAX_ADDRESS,
};
use qfb_core::physics::{bloch_from_rho, rho_from_bloch, BlochVector};
use qfb_core::readout::{demodulate, discriminate, ConfusionMatrix, DemodConfig, IqPoint, Populations};

fn opcode() -> impl Strategy<Value = Opcode> {
    prop_oneof![Just(Opcode::Halt), Just(Opcode::Next), Just(Opcode::Jump), Just(Opcode::Branch)]
}

fn control() -> impl Strategy<Value = ControlInstruction> {
    (opcode(), any::<u8>(), any::<u8>(), 0..=MAX_ADDRESS, 0..=MAX_ADDRESS).prop_map(|(opcode, index0, index1, a, b)| {
        ControlInstruction { opcode, index0, index1, address0: a.min(b), address1: a.max(b) }
    })
}

fn measure() -> impl Strategy<Value = MeasureInstruction> {
    (any::<u8>(), 0u8..16, any::<u16>(), any::<u8>()).prop_map(|(channel_mask, repetition, delay, length)| {
        MeasureInstruction { channel_mask, repetition, delay, length }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn control_words_round_trip(c in control()) {
        let w = encode_control(&c).unwrap();
        prop_assert!(w < 1 << 60);
        prop_assert_eq!(decode_control(w).unwrap(), c);
    }

    #[test]
    fn measure_words_round_trip(m in measure()) {
        let w = encode_measure(&m).unwrap();
        prop_assert!(w < 1 << 36);
        prop_assert_eq!(decode_measure(w).unwrap(), m);
    }
}

proptest! {
    #[test]
    fn masked_packets_carry_measured_channels(tags in any::<u8>(), mask in any::<u8>()) {
        let back = deserialize_tag_packet(&serialize_masked(tags, mask)).unwrap();
        prop_assert_eq!(back & mask, tags & mask);
    }

    #[test]
    fn demodulation_is_linear(
        a in proptest::collection::vec(-1.0f64..1.0, 16),
        b in proptest::collection::vec(-1.0f64..1.0, 16),
        qa in proptest::collection::vec(-1.0f64..1.0, 16),
        qb in proptest::collection::vec(-1.0f64..1.0, 16),
        s in -3.0f64..3.0,
        f in -120.0f64..120.0,
    ) {
        let cfg = DemodConfig { ref_freq_mhz: f, window_cycles: 16, delay_cycles: 0 };
        let sum_i: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let sum_q: Vec<f64> = qa.iter().zip(&qb).map(|(x, y)| x + s * y).collect();
        let lhs = demodulate(&sum_i, &sum_q, &cfg).unwrap();
        let pa = demodulate(&a, &qa, &cfg).unwrap();
        let pb = demodulate(&b, &qb, &cfg).unwrap();
        prop_assert!((lhs.i - (pa.i + s * pb.i)).abs() < 1e-9);
        prop_assert!((lhs.q - (pa.q + s * pb.q)).abs() < 1e-9);
    }

    #[test]
    fn confusion_round_trip(p0 in 0.0f64..=1.0, f0 in 0.55f64..1.0, f1 in 0.55f64..1.0) {
        let cm = ConfusionMatrix { f0, f1 };
        let ideal = Populations::new(p0, 1.0 - p0);
        let measured = cm.forward(ideal);
        prop_assert!((measured.p0 + measured.p1 - 1.0).abs() < 1e-12);
        let back = cm.invert(measured).unwrap();
        prop_assert!((back.p0 - ideal.p0).abs() < 1e-9);
        prop_assert!((back.p1 - ideal.p1).abs() < 1e-9);
    }

    #[test]
    fn discrimination_is_scale_invariant(i in -10.0f64..10.0, q in -10.0f64..10.0, t in -5.0f64..5.0, s in 1e-3f64..1e3) {
        prop_assert_eq!(discriminate(IqPoint::new(i, q), t), discriminate(IqPoint::new(s * i, s * q), s * t));
    }

    #[test]
    fn bloch_round_trip(x in -0.57f64..0.57, y in -0.57f64..0.57, z in -0.57f64..0.57) {
        let r = BlochVector::new(x, y, z).unwrap();
        let rho = rho_from_bloch(&r).unwrap();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let back = bloch_from_rho(&rho);
        prop_assert!((back.x - x).abs() < 1e-12 && (back.y - y).abs() < 1e-12 && (back.z - z).abs() < 1e-12);
    }
}

#[test]
fn every_tag_byte_round_trips() {
    for tags in 0..=255u8 {
        assert_eq!(deserialize_tag_packet(&serialize_masked(tags, 0xFF)).unwrap(), tags);
    }
}
