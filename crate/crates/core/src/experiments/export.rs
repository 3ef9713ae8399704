//! Result artifacts: JSON summaries and CSV tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::feedforward::FeedforwardResult;
use super::qst::QstResult;
use super::randomwalk::RandomWalkResult;
use super::reset::ResetResult;
use super::stabilize::StabilizationResult;
use super::{ExperimentError, ShotTable};
use crate::engine::EventTimeline;
use crate::readout::write_histogram_csv;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, ExperimentError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), ExperimentError> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::other)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_shots_csv<W: Write>(tables: &[ShotTable], mut out: W) -> std::io::Result<()> {
    writeln!(out, "variant,shot,measurement,channel,ro_start_ns,i,q,tag")?;
    for t in tables {
        for r in &t.rows {
            writeln!(out, "{},{},{},{},{},{},{},{}", t.variant, r.shot, r.measurement, r.channel, r.ro_start_ns, r.i, r.q, r.tag)?;
        }
    }
    Ok(())
}

/// One labelled tomography result per line.
pub fn write_bloch_csv<W: Write>(rows: &[(String, QstResult)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "label,x,y,z,theta_deg,phi_deg,projected")?;
    for (label, q) in rows {
        let b = q.bloch;
        writeln!(out, "{label},{},{},{},{},{},{}", b.x, b.y, b.z, q.theta_deg, q.phi_deg, q.projected)?;
    }
    Ok(())
}

fn write_common(
    dir: &Path,
    tables: &[ShotTable],
    timeline: &EventTimeline,
    sources: &[(String, String)],
) -> Result<(), ExperimentError> {
    let mut out = create(dir, "shots.csv")?;
    write_shots_csv(tables, &mut out)?;
    out.flush()?;
    let mut out = create(dir, "timeline.csv")?;
    timeline.write_csv(&mut out)?;
    out.flush()?;
    write_json(dir, "trace.json", &timeline.to_trace_json())?;
    for (stem, text) in sources {
        std::fs::write(dir.join(format!("{stem}.qasm")), text)?;
    }
    Ok(())
}

pub fn export_reset(r: &ResetResult, dir: &Path) -> Result<(), ExperimentError> {
    write_json(dir, "summary.json", r)?;
    for (k, h) in r.histograms.iter().enumerate() {
        let mut out = create(dir, &format!("histogram_m{k}.csv"))?;
        write_histogram_csv(h, &mut out)?;
        out.flush()?;
    }
    write_common(dir, std::slice::from_ref(&r.table), &r.timeline, &r.sources)
}

pub fn export_stabilization(r: &StabilizationResult, dir: &Path) -> Result<(), ExperimentError> {
    write_json(dir, "summary.json", r)?;
    let rows: Vec<_> = r.rounds.iter().map(|x| (format!("round{}", x.round), x.qst)).collect();
    let mut out = create(dir, "bloch.csv")?;
    write_bloch_csv(&rows, &mut out)?;
    out.flush()?;
    write_common(dir, &r.tables, &r.timeline, &r.sources)
}

pub fn export_feedforward(r: &FeedforwardResult, dir: &Path) -> Result<(), ExperimentError> {
    write_json(dir, "summary.json", r)?;
    write_common(dir, &r.tables, &r.timeline, &r.sources)
}

pub fn export_random_walk(r: &RandomWalkResult, dir: &Path) -> Result<(), ExperimentError> {
    write_json(dir, "summary.json", r)?;
    let rows: Vec<_> = r.groups.iter().filter_map(|g| g.qst.map(|q| (g.history.clone(), q))).collect();
    let mut out = create(dir, "bloch.csv")?;
    write_bloch_csv(&rows, &mut out)?;
    out.flush()?;
    write_common(dir, &r.tables, &r.timeline, &r.sources)
}
