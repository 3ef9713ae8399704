use std::path::Path;

use qfb_core::engine::{run_feedback_round, run_shot, ScriptedBackend, Stage};
use qfb_core::experiments::programs::{random_walk_plan, reset_plan};
use qfb_core::experiments::{run_batch, ExperimentConfig, Projection, Register};
use qfb_core::isa::{assemble_in, Program};
use qfb_core::physics::ChannelCache;
use qfb_core::readout::IqPoint;

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn reset_program_matches_golden() {
    let plan = reset_plan(&ExperimentConfig::default(), 6).unwrap();
    let sources: std::collections::HashMap<_, _> = plan.sources.iter().cloned().collect();
    assert_eq!(sources["measure"], golden("reset_measure.qasm"));
    assert_eq!(sources["control_signal"], golden("reset_control_signal.qasm"));
    for text in sources.values() {
        let p = assemble_in(text, Path::new(".")).unwrap();
        let mut image = Vec::new();
        p.write_binary(&mut image).unwrap();
        assert_eq!(Program::read_binary(image.as_slice()).unwrap(), p);
    }
}

#[test]
fn reset_windows_by_hand() {
    // prep π ends at the mixer at 40 + 68; each later readout starts when
    // the conditional pulse ends: readout 800 + return 160 + loop 140 + gate 40
    let plan = reset_plan(&ExperimentConfig::default(), 6).unwrap();
    let starts: Vec<u64> = plan.windows.iter().map(|w| w.ro_start).collect();
    let expect: Vec<u64> = (0..7).map(|k| 108 + 1140 * k).collect();
    assert_eq!(starts, expect);
    for w in &plan.windows {
        assert_eq!(w.adc_in, w.ro_start + 960);
        assert_eq!(w.tag_rx, w.adc_in + 16 + 32 + 24);
    }
}

#[test]
fn feedback_round_latency() {
    let cfg = ExperimentConfig::default();
    let plan = reset_plan(&cfg, 1).unwrap();
    let mut backend = ScriptedBackend::new(vec![IqPoint::new(-1.0, 0.0); 2]);
    let round = run_feedback_round(&plan.boards, &cfg.latency, &mut backend).unwrap();
    assert_eq!(round.tag, 1);
    let tl = &round.timeline;
    assert!(tl.is_sorted());
    assert!(tl.tags_consistent(cfg.latency.tau_tag));
    let adc_in = tl.first(Stage::AdcIn).unwrap().t_ns;
    let tag_rx = tl.first(Stage::TagRx).unwrap().t_ns;
    assert_eq!(tag_rx - adc_in, 72);
    // the conditional π lands at the mixer 140 ns after the signal reaches the ADC
    let played: Vec<_> = backend.played.iter().filter(|p| p.2 >= adc_in).collect();
    assert_eq!(played[0].2 - adc_in, 140);
    assert_eq!(played[0].3 - played[0].2, 40);
}

#[test]
fn ground_tag_plays_no_pulse() {
    let cfg = ExperimentConfig::default();
    let plan = reset_plan(&cfg, 1).unwrap();
    let mut backend = ScriptedBackend::new(vec![IqPoint::new(1.0, 0.0); 2]);
    let round = run_feedback_round(&plan.boards, &cfg.latency, &mut backend).unwrap();
    assert_eq!(round.tag, 0);
    let pulses = backend.played.iter().filter(|p| p.1.is_pulse()).count();
    assert_eq!(pulses, 1, "{:?}", backend.played);
}

#[test]
fn shots_are_conserved_and_reproducible() {
    let mut cfg = ExperimentConfig::default();
    cfg.threads = 4;
    let register = Register::new(&cfg, false, true).unwrap();
    let cache = ChannelCache::new();
    let plan = random_walk_plan(&cfg, 3, Projection::XPlus).unwrap();
    let per_shot = plan.boards.readouts_per_shot();
    assert_eq!(per_shot, 4);
    let a = run_batch(&cfg, &plan, &register, &cache, "a", 7, 500).unwrap();
    let b = run_batch(&cfg, &plan, &register, &cache, "a", 7, 500).unwrap();
    assert_eq!(a.table, b.table);
    assert_eq!(a.table.rows.len(), per_shot * 500);
    assert_eq!(a.timeline.count(Stage::RoStart), per_shot);
    let c = run_batch(&cfg, &plan, &register, &cache, "a", 8, 500).unwrap();
    assert_ne!(a.table, c.table);
}

#[test]
fn scripted_shot_reports_every_window() {
    let cfg = ExperimentConfig::default();
    let plan = random_walk_plan(&cfg, 2, Projection::Z).unwrap();
    let pts = vec![IqPoint::new(1.0, 0.0), IqPoint::new(-1.0, 0.0), IqPoint::new(1.0, 0.0)];
    let run = run_shot(&plan.boards, &cfg.latency, &mut ScriptedBackend::new(pts), false).unwrap();
    assert_eq!(run.readouts.len(), 3);
    let ro: Vec<u64> = run.readouts.iter().map(|r| r.ro_start).collect();
    let windows: Vec<u64> = plan.windows.iter().map(|w| w.ro_start).collect();
    assert_eq!(ro, windows);
}
