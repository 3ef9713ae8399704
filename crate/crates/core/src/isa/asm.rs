//! Line-oriented assembly source.
//!
//! ```text
//! # comment
//! waveform pi file=pi.csv          # integer samples, comma or newline separated
//! waveform wait const=0 len=700
//! threshold 0 0.0
//! tag_select 0
//! measure mask=0x01 rep=1 delay=40 len=200
//! start: play wait then branch ground excited
//! ground: play wait then jump done
//! excited: play pi then next
//! done: halt
//! ```
//!
//! Labels name control instructions. `play <w> then halt` expands to a
//! `next` followed by a bare halt, because a halt word plays nothing.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{ControlInstruction, IsaError, MeasureInstruction, Opcode, Program, CHANNELS, MEMORY_CAPACITY};

enum Flow {
    Next,
    Halt,
    Jump(String),
    Branch(String, String),
}

struct PendingControl {
    line: usize,
    waveform: Option<String>,
    flow: Flow,
}

/// Assembles source text, resolving `file=` waveforms relative to the
/// current directory.
pub fn assemble(text: &str) -> Result<Program, IsaError> {
    assemble_in(text, Path::new("."))
}

pub fn assemble_in(text: &str, base_dir: &Path) -> Result<Program, IsaError> {
    let mut program = Program::default();
    let mut labels: HashMap<String, (usize, usize)> = HashMap::new();
    let mut pending: Vec<PendingControl> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let mut rest = raw.split('#').next().unwrap_or("").trim();
        if let Some((head, tail)) = rest.split_once(':') {
            let label = head.trim();
            if !is_ident(label) {
                return Err(syntax(line, format!("bad label '{label}'")));
            }
            let index = pending.len();
            if labels.insert(label.to_string(), (index, line)).is_some() {
                return Err(IsaError::DuplicateLabel { line, label: label.to_string() });
            }
            rest = tail.trim();
        }
        if rest.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        match tokens[0] {
            "waveform" => {
                let (name, data) = parse_waveform(&tokens, line, base_dir)?;
                program.memory.allocate(name, &data).map_err(|e| at(line, e))?;
            }
            "threshold" => {
                if tokens.len() != 3 {
                    return Err(syntax(line, "expected: threshold <channel> <value>".into()));
                }
                let ch = parse_uint(tokens[1], line)?;
                let ch = ranged(ch, CHANNELS as u64 - 1, "channel", line)? as usize;
                program.thresholds[ch] =
                    tokens[2].parse().map_err(|_| syntax(line, format!("bad threshold '{}'", tokens[2])))?;
            }
            "tag_select" => {
                if tokens.len() != 2 {
                    return Err(syntax(line, "expected: tag_select <channel>".into()));
                }
                let ch = parse_uint(tokens[1], line)?;
                program.tag_select = ranged(ch, CHANNELS as u64 - 1, "tag_select", line)? as u8;
            }
            "measure" => program.measure.push(parse_measure(&tokens, line)?),
            "halt" => {
                if tokens.len() != 1 {
                    return Err(syntax(line, "halt takes no operands".into()));
                }
                pending.push(PendingControl { line, waveform: None, flow: Flow::Halt });
            }
            "play" => {
                let (waveform, flow) = parse_play(&tokens, line)?;
                let halt = matches!(flow, Flow::Halt);
                let flow = if halt { Flow::Next } else { flow };
                pending.push(PendingControl { line, waveform: Some(waveform), flow });
                if halt {
                    pending.push(PendingControl { line, waveform: None, flow: Flow::Halt });
                }
            }
            other => return Err(syntax(line, format!("unknown mnemonic '{other}'"))),
        }
    }

    let count = pending.len();
    let resolve = |label: &str, line: usize| -> Result<u8, IsaError> {
        let &(index, _) =
            labels.get(label).ok_or_else(|| IsaError::UnknownLabel { line, label: label.to_string() })?;
        if index >= count {
            return Err(IsaError::TargetPastEnd { line, label: label.to_string() });
        }
        ranged(index as u64, 0xFF, "instruction index", line).map(|v| v as u8)
    };
    for p in &pending {
        let (address0, address1) = match &p.waveform {
            Some(name) => {
                let seg = program
                    .memory
                    .segment(name)
                    .ok_or_else(|| IsaError::UnknownWaveform { line: p.line, name: name.clone() })?;
                (seg.start, seg.end())
            }
            None => (0, 0),
        };
        let (opcode, index0, index1) = match &p.flow {
            Flow::Halt => (Opcode::Halt, 0, 0),
            Flow::Next => (Opcode::Next, 0, 0),
            Flow::Jump(l) => (Opcode::Jump, resolve(l, p.line)?, 0),
            Flow::Branch(l0, l1) => (Opcode::Branch, resolve(l0, p.line)?, resolve(l1, p.line)?),
        };
        program.control.push(ControlInstruction { opcode, index0, index1, address0, address1 });
    }
    if program.control.len() > 256 {
        return Err(IsaError::RangeOverflow {
            line: pending[256].line,
            field: "instruction index",
            value: program.control.len() as u64 - 1,
        });
    }
    program.validate()?;
    Ok(program)
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !s.starts_with(|c: char| c.is_ascii_digit())
}

fn syntax(line: usize, message: String) -> IsaError {
    IsaError::Syntax { line, message }
}

fn at(line: usize, e: IsaError) -> IsaError {
    syntax(line, e.to_string())
}

fn parse_uint(s: &str, line: usize) -> Result<u64, IsaError> {
    let parsed = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(&hex.replace('_', ""), 16)
    } else {
        s.replace('_', "").parse()
    };
    parsed.map_err(|_| syntax(line, format!("bad number '{s}'")))
}

fn ranged(value: u64, max: u64, field: &'static str, line: usize) -> Result<u64, IsaError> {
    if value > max {
        Err(IsaError::RangeOverflow { line, field, value })
    } else {
        Ok(value)
    }
}

fn key_values<'a>(tokens: &[&'a str], line: usize) -> Result<HashMap<&'a str, &'a str>, IsaError> {
    tokens
        .iter()
        .map(|t| t.split_once('=').ok_or_else(|| syntax(line, format!("expected key=value, got '{t}'"))))
        .collect()
}

fn parse_measure(tokens: &[&str], line: usize) -> Result<MeasureInstruction, IsaError> {
    let kv = key_values(&tokens[1..], line)?;
    let get = |key: &'static str, max: u64| -> Result<u64, IsaError> {
        let v = kv.get(key).ok_or_else(|| syntax(line, format!("measure needs {key}=")))?;
        ranged(parse_uint(v, line)?, max, key, line)
    };
    if let Some(extra) = kv.keys().find(|k| !["mask", "rep", "delay", "len"].contains(k)) {
        return Err(syntax(line, format!("unknown measure field '{extra}'")));
    }
    Ok(MeasureInstruction {
        channel_mask: get("mask", 0xFF)? as u8,
        repetition: get("rep", 0xF)? as u8,
        delay: get("delay", 0xFFFF)? as u16,
        length: get("len", 0xFF)? as u8,
    })
}

fn parse_play(tokens: &[&str], line: usize) -> Result<(String, Flow), IsaError> {
    if tokens.len() < 4 || tokens[2] != "then" {
        return Err(syntax(line, "expected: play <waveform> then <next|halt|jump L|branch L0 L1>".into()));
    }
    let flow = match (tokens[3], &tokens[4..]) {
        ("next", []) => Flow::Next,
        ("halt", []) => Flow::Halt,
        ("jump", [l]) => Flow::Jump(l.to_string()),
        ("branch", [l0, l1]) => Flow::Branch(l0.to_string(), l1.to_string()),
        _ => return Err(syntax(line, format!("bad flow '{}'", tokens[3..].join(" ")))),
    };
    Ok((tokens[1].to_string(), flow))
}

fn parse_waveform<'a>(tokens: &[&'a str], line: usize, base_dir: &Path) -> Result<(&'a str, Vec<i16>), IsaError> {
    if tokens.len() < 3 {
        return Err(syntax(line, "expected: waveform <name> file=<path> | const=<v> len=<n>".into()));
    }
    let name = tokens[1];
    if !is_ident(name) {
        return Err(syntax(line, format!("bad waveform name '{name}'")));
    }
    let kv = key_values(&tokens[2..], line)?;
    let sample = |s: &str| -> Result<i16, IsaError> {
        let v: i64 = s.trim().parse().map_err(|_| syntax(line, format!("bad sample '{}'", s.trim())))?;
        i16::try_from(v).map_err(|_| IsaError::RangeOverflow { line, field: "sample", value: v.unsigned_abs() })
    };
    let data = if let Some(path) = kv.get("file") {
        let full: PathBuf = base_dir.join(path);
        let text = std::fs::read_to_string(&full)
            .map_err(|e| syntax(line, format!("cannot read {}: {e}", full.display())))?;
        text.split(|c: char| c == ',' || c == '\n')
            .filter(|s| !s.trim().is_empty())
            .map(sample)
            .collect::<Result<Vec<_>, _>>()?
    } else if let (Some(v), Some(len)) = (kv.get("const"), kv.get("len")) {
        let len = ranged(parse_uint(len, line)?, MEMORY_CAPACITY as u64, "len", line)?;
        vec![sample(v)?; len as usize]
    } else {
        return Err(syntax(line, "waveform needs file= or const= with len=".into()));
    };
    Ok((name, data))
}

/// Source text for the instruction streams and registers of `program`.
/// Waveforms are emitted as constants of their first sample, so sample
/// data survives only for constant waveforms.
pub fn disassemble(program: &Program) -> String {
    let mut out = String::new();
    let mut segments: Vec<_> = program.memory.segments().collect();
    segments.sort_by_key(|(_, s)| s.start);
    for (name, seg) in segments {
        let first = program.memory.read(seg.start, seg.start).map(|v| v[0]).unwrap_or(0);
        out.push_str(&format!("waveform {name} const={first} len={}\n", seg.len));
    }
    for (ch, t) in program.thresholds.iter().enumerate() {
        if *t != 0.0 {
            out.push_str(&format!("threshold {ch} {t}\n"));
        }
    }
    out.push_str(&format!("tag_select {}\n", program.tag_select));
    for m in &program.measure {
        out.push_str(&format!(
            "measure mask=0x{:02x} rep={} delay={} len={}\n",
            m.channel_mask, m.repetition, m.delay, m.length
        ));
    }
    for (pc, c) in program.control.iter().enumerate() {
        let wf = program.memory.name_of(c.address0, c.address1).unwrap_or("?");
        let flow = match c.opcode {
            Opcode::Halt => {
                out.push_str(&format!("i{pc}: halt\n"));
                continue;
            }
            Opcode::Next => "next".to_string(),
            Opcode::Jump => format!("jump i{}", c.index0),
            Opcode::Branch => format!("branch i{} i{}", c.index0, c.index1),
        };
        out.push_str(&format!("i{pc}: play {wf} then {flow}\n"));
    }
    out
}
