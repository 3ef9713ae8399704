use serde::{Deserialize, Serialize};

/// FPGA data-path clock period, ns.
pub const CLOCK_NS: u64 = 4;
/// Flip-flop stages between the ADC pads and the tag output.
pub const PROC_STAGES: u64 = 8;
/// Pipeline stages from the BRAM to the DAC pads.
pub const DAC_ACTUATE_STAGES: u64 = 6;
/// DAC chip output latency (35 cycles plus a 4-cycle FIFO at 1 ns).
pub const DAC_CHIP_NS: u64 = 39;
/// Latency of the waveform record module (3 cycles).
pub const RECORD_NS: f64 = 12.0;
pub const ADC_PIPELINE_NS: f64 = 8.0;
pub const ADC_OUTPUT_NS: f64 = 2.7;
/// Measured base-band loopback: DAC out, straight back into the recorder.
pub const MEASURED_LOOPBACK_NS: f64 = 96.0;

/// Room-temperature electronics and analog-chain delays, in integer ns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub tau_adc: u64,
    pub tau_proc: u64,
    pub tau_tag: u64,
    pub tau_dac: u64,
    /// Readout pulse launch to signal arrival at the ADC.
    pub tau_ao: u64,
    pub tau_ro: u64,
    pub tau_gt: u64,
    /// Stark-compensation Z pulse.
    pub tau_z: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self { tau_adc: 16, tau_proc: 32, tau_tag: 24, tau_dac: 68, tau_ao: 160, tau_ro: 800, tau_gt: 40, tau_z: 10 }
    }
}

impl LatencyModel {
    /// Electronics-only analog chain, bypassing the cryostat wiring.
    pub const ELECTRONICS_ONLY_AO: u64 = 96;

    pub fn tau_tot(&self) -> u64 {
        self.tau_adc + self.tau_proc + self.tau_tag + self.tau_dac
    }

    /// Wall time of one feedback step: readout, return trip, electronics,
    /// conditional gate and Z compensation.
    pub fn step_period(&self) -> u64 {
        self.tau_ro + self.tau_ao + self.tau_tot() + self.tau_gt + self.tau_z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub latency: LatencyModel,
    pub tau_tot: u64,
    pub proc_from_stages: u64,
    pub dac_actuate: u64,
    /// Remainder of `tau_dac` after the DAC chip and actuate pipeline.
    pub dac_board_remainder: i64,
    /// Off-chip ADC card delay implied by the measured loopback.
    pub adc_off_chip: f64,
    /// `tau_dac + record + ADC pipeline + ADC output + off-chip`.
    pub loopback: f64,
    /// `ADC pipeline + ADC output + off-chip`.
    pub adc_from_parts: f64,
    pub mismatches: Vec<String>,
}

impl TimingReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn render(&self) -> String {
        let l = &self.latency;
        let mut s = String::new();
        s.push_str(&format!("tau_adc  {} ns  (pipeline {} + output {} + off-chip {:.1})\n", l.tau_adc, ADC_PIPELINE_NS, ADC_OUTPUT_NS, self.adc_off_chip));
        s.push_str(&format!("tau_proc {} ns  ({} stages x {} ns = {})\n", l.tau_proc, PROC_STAGES, CLOCK_NS, self.proc_from_stages));
        s.push_str(&format!("tau_tag  {} ns\n", l.tau_tag));
        s.push_str(&format!(
            "tau_dac  {} ns  (chip {} + actuate {} x {} = {} + board {})\n",
            l.tau_dac, DAC_CHIP_NS, DAC_ACTUATE_STAGES, CLOCK_NS, self.dac_actuate, self.dac_board_remainder
        ));
        s.push_str(&format!(
            "loopback {} ns  (dac {} + record {} + adc {} + {} + off-chip {:.1})\n",
            fmt_ns(self.loopback), l.tau_dac, RECORD_NS, ADC_PIPELINE_NS, ADC_OUTPUT_NS, self.adc_off_chip
        ));
        s.push_str(&format!("total {} ns\n", self.tau_tot));
        if self.mismatches.is_empty() {
            s.push_str("decomposition consistent\n");
        } else {
            for m in &self.mismatches {
                s.push_str(&format!("MISMATCH {m}\n"));
            }
        }
        s
    }
}

fn fmt_ns(x: f64) -> String {
    if (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round() as i64)
    } else {
        format!("{x:.1}")
    }
}

/// Recomputes the published latency decomposition from `latency` and flags
/// every constant that no longer adds up.
pub fn loopback_timing_check(latency: &LatencyModel) -> TimingReport {
    let proc_from_stages = PROC_STAGES * CLOCK_NS;
    let dac_actuate = DAC_ACTUATE_STAGES * CLOCK_NS;
    let dac_board_remainder = latency.tau_dac as i64 - DAC_CHIP_NS as i64 - dac_actuate as i64;
    // The off-chip share is fixed by the measured loopback with the
    // published DAC latency.
    let adc_off_chip = MEASURED_LOOPBACK_NS - 68.0 - RECORD_NS - ADC_PIPELINE_NS - ADC_OUTPUT_NS;
    let loopback = latency.tau_dac as f64 + RECORD_NS + ADC_PIPELINE_NS + ADC_OUTPUT_NS + adc_off_chip;
    let adc_from_parts = ADC_PIPELINE_NS + ADC_OUTPUT_NS + adc_off_chip;
    let mut mismatches = Vec::new();
    if latency.tau_proc != proc_from_stages {
        mismatches.push(format!("tau_proc {} != {} stages x {} ns", latency.tau_proc, PROC_STAGES, CLOCK_NS));
    }
    if (loopback - MEASURED_LOOPBACK_NS).abs() > 1e-9 {
        mismatches.push(format!("loopback {} ns != measured {} ns", fmt_ns(loopback), MEASURED_LOOPBACK_NS));
    }
    if dac_board_remainder < 0 {
        mismatches.push(format!("tau_dac {} shorter than chip + actuate", latency.tau_dac));
    }
    if (latency.tau_adc as f64 - adc_from_parts).abs() > 1e-9 {
        mismatches.push(format!("tau_adc {} != {} from ADC parts", latency.tau_adc, fmt_ns(adc_from_parts)));
    }
    if latency.tau_tag < CLOCK_NS {
        mismatches.push(format!("tau_tag {} shorter than the packet head cycle", latency.tau_tag));
    }
    TimingReport {
        latency: *latency,
        tau_tot: latency.tau_tot(),
        proc_from_stages,
        dac_actuate,
        dac_board_remainder,
        adc_off_chip,
        loopback,
        adc_from_parts,
        mismatches,
    }
}
