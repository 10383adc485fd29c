//! Tab-delimited trace and report files.
//!
//! Every file starts with `#` header lines: the tool version, any extra lines
//! supplied by the caller (the resolved run configuration), and for traces the
//! metadata needed to read them back. Floats are written with 17 significant
//! digits so files round-trip exactly.

use std::io::Write;

use crate::analysis::{AbundanceEstimate, InterferenceEvent, PeriodEstimate, ResolvedPeak};
use crate::control::SelectivityReport;
use crate::ensemble::SignalTrace;
use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header<W: Write>(out: &mut W, echo: &str) -> std::io::Result<()> {
    writeln!(out, "# isorot {VERSION}")?;
    for line in echo.lines() {
        writeln!(out, "# config: {line}")?;
    }
    Ok(())
}

/// Columns `time_ps`, `chi_<species>`…, `signal`.
pub fn write_trace<W: Write>(mut out: W, trace: &SignalTrace, echo: &str) -> std::io::Result<()> {
    header(&mut out, echo)?;
    let fractions: Vec<String> = trace.fractions.iter().map(|f| num(*f)).collect();
    writeln!(out, "# fractions\t{}", fractions.join("\t"))?;
    writeln!(
        out,
        "# decay_tau\t{}",
        trace.decay_tau.map_or("none".to_string(), num)
    )?;
    writeln!(out, "# reference_peak\t{}", num(trace.reference_peak))?;
    let mut cols = vec!["time_ps".to_string()];
    cols.extend(trace.species.iter().map(|s| format!("chi_{s}")));
    cols.push("signal".into());
    writeln!(out, "{}", cols.join("\t"))?;
    for (i, t) in trace.times.iter().enumerate() {
        let mut row = vec![num(*t)];
        row.extend(trace.chi.iter().map(|c| num(c[i])));
        row.push(num(trace.signal[i]));
        writeln!(out, "{}", row.join("\t"))?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`]. Only the `time_ps` and `signal`
/// columns are required.
pub fn read_trace(text: &str) -> Result<SignalTrace> {
    let mut fractions: Option<Vec<f64>> = None;
    let mut decay_tau = None;
    let mut reference_peak = 1.0;
    let mut columns: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let parse = |line: usize, s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad number `{s}`")))
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut parts = meta.trim().split('\t');
            match parts.next() {
                Some("fractions") => {
                    fractions = Some(parts.map(|p| parse(lineno, p)).collect::<Result<_>>()?);
                }
                Some("decay_tau") => {
                    decay_tau = match parts.next() {
                        Some("none") | None => None,
                        Some(v) => Some(parse(lineno, v)?),
                    };
                }
                Some("reference_peak") => {
                    if let Some(v) = parts.next() {
                        reference_peak = parse(lineno, v)?;
                    }
                }
                _ => {}
            }
            continue;
        }
        match &columns {
            None => columns = Some(line.split('\t').map(str::to_string).collect()),
            Some(cols) => {
                let row: Vec<f64> = line.split('\t').map(|v| parse(lineno, v)).collect::<Result<_>>()?;
                if row.len() != cols.len() {
                    return Err(Error::parse(
                        lineno,
                        format!("expected {} columns, found {}", cols.len(), row.len()),
                    ));
                }
                rows.push(row);
            }
        }
    }

    let cols = columns.ok_or_else(|| Error::parse(0, "trace has no column header"))?;
    let time_col = cols
        .iter()
        .position(|c| c == "time_ps")
        .ok_or_else(|| Error::parse(0, "missing `time_ps` column"))?;
    let signal_col = cols
        .iter()
        .position(|c| c == "signal")
        .ok_or_else(|| Error::parse(0, "missing `signal` column"))?;
    let chi_cols: Vec<(usize, String)> = cols
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.strip_prefix("chi_").map(|n| (i, n.to_string())))
        .collect();
    let fractions = match fractions {
        Some(f) if f.len() == chi_cols.len() => f,
        _ => vec![1.0 / chi_cols.len().max(1) as f64; chi_cols.len()],
    };
    Ok(SignalTrace {
        times: rows.iter().map(|r| r[time_col]).collect(),
        species: chi_cols.iter().map(|c| c.1.clone()).collect(),
        fractions,
        chi: chi_cols
            .iter()
            .map(|(i, _)| rows.iter().map(|r| r[*i]).collect())
            .collect(),
        signal: rows.iter().map(|r| r[signal_col]).collect(),
        decay_tau,
        reference_peak,
    })
}

/// Columns `delay_ps`, `rms_<s>`…, `dE_<s>`…, `selectivity`, then the
/// single-pulse references `rms1_<s>`…, `dE1_<s>`….
pub fn write_reports<W: Write>(mut out: W, reports: &[SelectivityReport], echo: &str) -> std::io::Result<()> {
    header(&mut out, echo)?;
    let Some(first) = reports.first() else {
        return Ok(());
    };
    if first.degenerate {
        writeln!(out, "# selectivity undefined for a single species; reported as 1")?;
    }
    let mut cols = vec!["delay_ps".to_string()];
    for prefix in ["rms", "dE"] {
        cols.extend(first.species.iter().map(|s| format!("{prefix}_{s}")));
    }
    cols.push("selectivity".into());
    for prefix in ["rms1", "dE1"] {
        cols.extend(first.species.iter().map(|s| format!("{prefix}_{s}")));
    }
    writeln!(out, "{}", cols.join("\t"))?;
    for r in reports {
        let mut row = vec![num(r.delay)];
        row.extend(r.rms.iter().map(|x| num(*x)));
        row.extend(r.energy_gain.iter().map(|x| num(*x)));
        row.push(num(r.selectivity));
        row.extend(r.single_rms.iter().map(|x| num(*x)));
        row.extend(r.single_energy_gain.iter().map(|x| num(*x)));
        writeln!(out, "{}", row.join("\t"))?;
    }
    Ok(())
}

pub fn write_interference<W: Write>(
    mut out: W,
    species: (&str, &str),
    events: &[InterferenceEvent],
    echo: &str,
) -> std::io::Result<()> {
    header(&mut out, echo)?;
    writeln!(
        out,
        "time_ps\tkind\torder_{}\torder_{}\tmismatch_ps",
        species.0, species.1
    )?;
    for e in events {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            num(e.time),
            e.kind.as_str(),
            num(e.order_a),
            num(e.order_b),
            num(e.mismatch)
        )?;
    }
    Ok(())
}

/// Analysis results as `key: value` lines.
#[derive(Debug, Clone, Default)]
pub struct AnalysisReport {
    pub period: Option<PeriodEstimate>,
    pub order: Option<f64>,
    pub peaks: Vec<ResolvedPeak>,
    pub abundances: Option<AbundanceEstimate>,
}

pub fn write_analysis<W: Write>(mut out: W, report: &AnalysisReport, echo: &str) -> std::io::Result<()> {
    header(&mut out, echo)?;
    if let Some(p) = &report.period {
        writeln!(out, "period_ps: {}", num(p.period))?;
        writeln!(out, "period_uncertainty_ps: {}", num(p.uncertainty))?;
        writeln!(out, "period_contrast: {}", num(p.contrast))?;
    }
    if let Some(order) = report.order {
        writeln!(out, "revival_order: {}", num(order))?;
    }
    for p in &report.peaks {
        writeln!(out, "peak_time_ps.{}: {}", p.species, num(p.time))?;
        writeln!(out, "peak_centroid_ps.{}: {}", p.species, num(p.centroid))?;
        writeln!(out, "peak_amplitude.{}: {}", p.species, num(p.amplitude))?;
    }
    if let Some(a) = &report.abundances {
        for (p, f) in report.peaks.iter().zip(&a.fractions) {
            writeln!(out, "abundance.{}: {}", p.species, num(*f))?;
        }
        for &i in &a.excluded {
            if let Some(p) = report.peaks.get(i) {
                writeln!(out, "excluded: {}", p.species)?;
            }
        }
    }
    Ok(())
}
