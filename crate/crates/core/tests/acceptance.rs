//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qfb_core::engine::{loopback_timing_check, run_feedback_round, LatencyModel, ScriptedBackend, Stage};
use qfb_core::experiments::export::{export_random_walk, export_reset, export_stabilization};
use qfb_core::experiments::feedforward::feedforward_prediction;
use qfb_core::experiments::programs::reset_plan;
use qfb_core::experiments::{
    qst_exact, run_feedforward, run_random_walk, run_random_walk_exact, run_reset, run_stabilization,
    ExperimentConfig, RandomWalkResult,
};
use qfb_core::isa::{
    decode_control, decode_measure, deserialize_tag_packet, encode_control, encode_measure, serialize_tag_packet,
    ControlInstruction, MeasureInstruction, Opcode, TagPacket, MAX_ADDRESS,
};
use qfb_core::physics::{
    apply_rotation, bloch_from_rho, evolve_lindblad, rho_from_bloch, Axis, BlochVector, DensityMatrix, LindbladModel,
    PulseGate,
};
use qfb_core::readout::{
    discriminate, fit_two_modes, simulate_readout, ConfusionMatrix, Populations, ReadoutModel,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Latency budget and the base-band loopback decomposition, exact integers.
fn latency_budget() -> Outcome {
    let lat = LatencyModel::default();
    let report = loopback_timing_check(&lat);
    let budget = [lat.tau_adc, lat.tau_proc, lat.tau_tag, lat.tau_dac, lat.tau_tot()];
    let mut ok = budget == [16, 32, 24, 68, 140] && report.ok();
    ok &= report.loopback == 96.0 && report.adc_from_parts == 16.0 && report.proc_from_stages == 32;
    ok &= report.render().contains("total 140 ns");
    // the same numbers fall out of the event timeline of one feedback round
    let cfg = ExperimentConfig::default();
    let plan = reset_plan(&cfg, 1).map_err(fail)?;
    let mut backend = ScriptedBackend::new(vec![qfb_core::readout::IqPoint::new(-1.0, 0.0); 2]);
    let round = run_feedback_round(&plan.boards, &lat, &mut backend).map_err(fail)?;
    let adc_in = round.timeline.first(Stage::AdcIn).map(|e| e.t_ns).unwrap_or(0);
    let tag_rx = round.timeline.first(Stage::TagRx).map(|e| e.t_ns).unwrap_or(0);
    let gate = backend.played.iter().find(|p| p.2 >= adc_in).map(|p| p.2).unwrap_or(0);
    ok &= tag_rx - adc_in == 72 && gate - adc_in == 140;
    check(ok, format!("budget {budget:?}, loopback {} ns, ADC to gate {} ns", report.loopback, gate - adc_in))
}

/// Exhaustive tag packets and 10^4 random instruction round trips.
fn codec_suite() -> Outcome {
    let mut failures = 0;
    for tags in 0..=255u8 {
        let p = serialize_tag_packet(tags);
        if deserialize_tag_packet(&p).ok() != Some(tags) || TagPacket::from_cycles(&p.cycles()).ok() != Some(p) {
            failures += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ops = [Opcode::Halt, Opcode::Next, Opcode::Jump, Opcode::Branch];
    for _ in 0..10_000 {
        let a = rng.random_range(0..=MAX_ADDRESS);
        let b = rng.random_range(0..=MAX_ADDRESS);
        let c = ControlInstruction {
            opcode: ops[rng.random_range(0..4)],
            index0: rng.random(),
            index1: rng.random(),
            address0: a.min(b),
            address1: a.max(b),
        };
        let m = MeasureInstruction {
            channel_mask: rng.random(),
            repetition: rng.random_range(0..16),
            delay: rng.random(),
            length: rng.random(),
        };
        let c_ok = encode_control(&c).and_then(decode_control).map(|x| x == c).unwrap_or(false);
        let m_ok = encode_measure(&m).and_then(decode_measure).map(|x| x == m).unwrap_or(false);
        failures += (!c_ok) as u32 + (!m_ok) as u32;
    }
    check(failures == 0, format!("256 packets, 10000 control + 10000 measure words, {failures} failures"))
}

fn readout_check(label: &str, model: &ReadoutModel, residual: f64, f0: f64, f1: f64, shots: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ground = DensityMatrix::diagonal(residual).map_err(fail)?;
    // a π pulse on the nominal ground state swaps the residual into |0⟩
    let excited = DensityMatrix::diagonal(1.0 - residual).map_err(fail)?;
    let mut zeros = 0usize;
    let mut ones = 0usize;
    let mut values = Vec::with_capacity(2 * shots);
    for _ in 0..shots {
        let s = simulate_readout(&ground, model, &mut rng);
        zeros += (discriminate(s.iq, model.threshold_i) == 0) as usize;
        values.push(s.iq.i);
        let s = simulate_readout(&excited, model, &mut rng);
        ones += (discriminate(s.iq, model.threshold_i) == 1) as usize;
        values.push(s.iq.i);
    }
    let n = shots as f64;
    let (g, e) = (zeros as f64 / n, ones as f64 / n);
    let sg = (f0 * (1.0 - f0) / n).sqrt();
    let se = (f1 * (1.0 - f1) / n).sqrt();
    let fit = fit_two_modes(&values, model.threshold_i).map_err(fail)?;
    let dc0 = (fit.centers[0] - model.center0.i).abs() / fit.center_errors[0];
    let dc1 = (fit.centers[1] - model.center1.i).abs() / fit.center_errors[1];
    let ok = (g - f0).abs() <= 3.0 * sg && (e - f1).abs() <= 3.0 * se && dc0 <= 3.0 && dc1 <= 3.0;
    check(
        ok,
        format!(
            "{label} F0 {:.2}% ({:+.1}σ) F1 {:.2}% ({:+.1}σ), centers off by {dc0:.1}/{dc1:.1} fit errors",
            100.0 * g,
            (g - f0) / sg,
            100.0 * e,
            (e - f1) / se
        ),
    )
}

/// Calibrated readout statistics at 3·10^4 shots.
fn readout_statistics() -> Outcome {
    let cfg = ExperimentConfig::default();
    let shots = 30_000;
    let b = cfg.readout_model(&cfg.readout.target, cfg.qubits.target.residual_excitation).map_err(fail)?;
    let a = cfg.readout_model(&cfg.readout.signal, cfg.qubits.signal.residual_excitation).map_err(fail)?;
    let rb = readout_check("Q_B", &b, cfg.qubits.target.residual_excitation, 0.973, 0.903, shots);
    let ra = readout_check("Q_A", &a, cfg.qubits.signal.residual_excitation, 0.961, 0.931, shots);
    match (rb, ra) {
        (Ok(x), Ok(y)) => Ok(format!("{x}; {y}")),
        (x, y) => Err(format!("{}; {}", x.unwrap_or_else(|e| e), y.unwrap_or_else(|e| e))),
    }
}

/// Reset series and ground population after six rounds.
fn reset_series() -> Outcome {
    let r = run_reset(&ExperimentConfig::default()).map_err(fail)?;
    let pct: Vec<f64> = r.excited.iter().map(|p| 100.0 * p).collect();
    let mut ok = pct.len() == 7;
    for (k, target) in [(0, 93.0), (1, 6.3), (2, 3.5)] {
        ok &= (pct[k] - target).abs() <= 1.5;
    }
    let ground = 100.0 * r.ground[6];
    ok &= (ground - 96.5).abs() <= 1.5;
    let worst = r
        .excited
        .iter()
        .zip(&r.analytic_excited)
        .zip(&r.excited_stderr)
        .map(|((m, a), s)| (m - a).abs() / s.max(1e-12))
        .fold(0.0, f64::max);
    ok &= worst <= 3.0;
    let series: Vec<String> = pct.iter().map(|p| format!("{p:.1}")).collect();
    check(ok, format!("excited % [{}], ground {ground:.1}%, analytic within {worst:.1}σ", series.join(", ")))
}

/// Stabilization at 1.5·10^4 shots per basis over six rounds.
fn stabilization() -> Outcome {
    let r = run_stabilization(&ExperimentConfig::default()).map_err(fail)?;
    let min_f = r.rounds.iter().map(|x| x.fidelity).fold(1.0, f64::min);
    let max_t = r.rounds.iter().map(|x| x.theta_error_deg.abs()).fold(0.0, f64::max);
    let max_p = r.rounds.iter().map(|x| x.phi_error_deg.abs()).fold(0.0, f64::max);
    let ok = r.rounds.len() == 7 && min_f >= 0.96 && max_t < 2.5 && max_p < 1.5;
    check(ok, format!("min fidelity {:.2}%, max |θ err| {max_t:.2}°, max |φ err| {max_p:.2}°", 100.0 * min_f))
}

/// Feed-forward split and the prediction arithmetic.
fn feedforward() -> Outcome {
    let r = run_feedforward(&ExperimentConfig::default()).map_err(fail)?;
    let t = r.target_final;
    let mut ok = (100.0 * t.p0 - 54.9).abs() <= 1.5 && (100.0 * t.p1 - 45.1).abs() <= 1.5;
    let cm = ConfusionMatrix { f0: 0.973, f1: 0.903 };
    let (mix, cal) =
        feedforward_prediction(Populations::new(0.973, 0.027), Populations::new(0.522, 0.478), &cm).map_err(fail)?;
    ok &= (100.0 * mix.p0 - 52.1).abs() <= 0.3 && (100.0 * mix.p1 - 47.9).abs() <= 0.3;
    ok &= (100.0 * cal.p0 - 55.3).abs() <= 0.3 && (100.0 * cal.p1 - 44.7).abs() <= 0.3;
    check(
        ok,
        format!(
            "target {:.1}/{:.1}%, mixture {:.1}/{:.1}%, corrected {:.1}/{:.1}%",
            100.0 * t.p0,
            100.0 * t.p1,
            100.0 * mix.p0,
            100.0 * mix.p1,
            100.0 * cal.p0,
            100.0 * cal.p1
        ),
    )
}

/// Ideal random walk at the density-matrix level.
fn walk_ideal() -> Outcome {
    let cfg = ExperimentConfig::default().idealized();
    let mut worst = 0.0f64;
    let mut ok = true;
    for steps in 1..=3 {
        let r = run_random_walk_exact(&cfg, steps).map_err(fail)?;
        ok &= r.groups.len() == 1 << steps;
        for g in &r.groups {
            let k = g.ideal_deg / 22.5;
            ok &= (k - k.round()).abs() < 1e-12;
            match g.error_deg {
                Some(e) => worst = worst.max(e.abs()),
                None => ok = false,
            }
        }
    }
    ok &= worst < 0.1;
    check(ok, format!("largest deviation from ±k·22.5° is {worst:.2e}°"))
}

fn extremes(r: &RandomWalkResult) -> (f64, f64) {
    let zeros = "0".repeat(r.steps);
    let ones = "1".repeat(r.steps);
    let e = |h: &str| r.group(h).and_then(|g| g.error_deg).unwrap_or(f64::NAN);
    (e(&zeros), e(&ones))
}

/// Decoherence-mode random walk: sign pattern, growth and bracket.
fn walk_decoherence() -> Outcome {
    let cfg = ExperimentConfig::default();
    let mut ok = true;
    let mut prev = (0.0, 0.0);
    let mut parts = Vec::new();
    for steps in 1..=3 {
        let r = run_random_walk_exact(&cfg, steps).map_err(fail)?;
        let (lo, hi) = extremes(&r);
        ok &= lo < 0.0 && hi > 0.0;
        ok &= lo.abs() >= prev.0 && hi.abs() >= prev.1;
        prev = (lo.abs(), hi.abs());
        parts.push(format!("{steps} step: {lo:+.2}°/{hi:+.2}°"));
    }
    ok &= (3.0..=12.0).contains(&prev.0) && (3.0..=12.0).contains(&prev.1);
    check(ok, format!("all-0/all-1 errors {}", parts.join(", ")))
}

/// Closed-form channels, RK4 order and exact tomography.
fn numerical_core() -> Outcome {
    let m = LindbladModel::from_times(19.0, 9.0).map_err(fail)?;
    let t = 2000.0;
    let damp = evolve_lindblad(&DensityMatrix::excited(), &m, None, t, 1.0).map_err(fail)?;
    let p1 = (-m.gamma1 * t * 1e-3).exp();
    let deph = evolve_lindblad(&DensityMatrix::plus(), &m, None, t, 1.0).map_err(fail)?;
    let coh = 0.5 * (-(m.gamma1 + m.gamma_phi) * t * 1e-3 / 2.0).exp();
    let rel_damp = (damp.p1() - p1).abs() / p1;
    let rel_deph = (deph.coherence().norm() - coh).abs() / coh;

    let angle = 6.0 * PI + 0.4;
    let exact = apply_rotation(&DensityMatrix::ground(), &PulseGate::instantaneous(Axis::PlusX, angle)).map_err(fail)?;
    let err = |dt: f64| -> Result<f64, String> {
        let g = PulseGate::new(Axis::PlusX, angle, 120.0).map_err(fail)?;
        let out = evolve_lindblad(&DensityMatrix::ground(), &LindbladModel::closed(), Some(&g), 120.0, dt).map_err(fail)?;
        Ok(out.distance(&exact))
    };
    let ratio = err(3.0)? / err(1.5)?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut qst_worst = 0.0f64;
    for _ in 0..1000 {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let s = rng.random_range(0.0..1.0) / n.max(1.0);
        let r = BlochVector::new(v[0] * s, v[1] * s, v[2] * s).map_err(fail)?;
        let rho = rho_from_bloch(&r).map_err(fail)?;
        let q = qst_exact(&rho).map_err(fail)?;
        let b = bloch_from_rho(&rho);
        qst_worst = qst_worst.max((q.bloch.x - b.x).abs().max((q.bloch.y - b.y).abs()).max((q.bloch.z - b.z).abs()));
    }
    let ok = rel_damp < 1e-5 && rel_deph < 1e-5 && ratio >= 8.0 && qst_worst <= 1e-12;
    check(
        ok,
        format!("damping {rel_damp:.1e}, dephasing {rel_deph:.1e}, RK4 ratio {ratio:.1}, QST {qst_worst:.1e}"),
    )
}

fn summaries(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let mut out = Vec::new();
    for (name, sub) in [("reset", "r"), ("stabilize", "s"), ("randomwalk", "w")] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(fail)?;
        match name {
            "reset" => export_reset(&run_reset(cfg).map_err(fail)?, &d),
            "stabilize" => {
                let mut c = cfg.clone();
                c.rounds = 2;
                c.shots = Some(3000);
                export_stabilization(&run_stabilization(&c).map_err(fail)?, &d)
            }
            _ => {
                let mut c = cfg.clone();
                c.shots = Some(3000);
                export_random_walk(&run_random_walk(&c, 3).map_err(fail)?, &d)
            }
        }
        .map_err(fail)?;
        for f in ["summary.json", "shots.csv"] {
            out.push(std::fs::read(d.join(f)).map_err(fail)?);
        }
    }
    Ok(out)
}

/// Two serial runs and one parallel run give identical bytes.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(fail)?;
    let mut runs = Vec::new();
    for (k, threads) in [1usize, 1, 0].into_iter().enumerate() {
        let mut cfg = ExperimentConfig::default();
        cfg.threads = threads;
        runs.push(summaries(&cfg, &tmp.path().join(k.to_string()))?);
    }
    let same = runs[0] == runs[1] && runs[0] == runs[2];
    let bytes: usize = runs[0].iter().map(|b| b.len()).sum();
    check(same, format!("reset, stabilize and randomwalk artifacts, {bytes} bytes per run"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("latency budget", latency_budget),
        ("codec suite", codec_suite),
        ("readout statistics", readout_statistics),
        ("reset experiment", reset_series),
        ("stabilization", stabilization),
        ("feed-forward", feedforward),
        ("random walk, ideal", walk_ideal),
        ("random walk, decoherence", walk_decoherence),
        ("numerical core", numerical_core),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:2} PASS  {name}: {d} [{secs:.1}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {d} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
