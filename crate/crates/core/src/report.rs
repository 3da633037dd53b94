//! Serialization boundaries: QBER time-series CSV (with lossless
//! round-trip), the key=value run-summary block, and the CSV tables for
//! emitted states, encoder comparisons, and sweeps.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which is
//! enough for every `f64` to survive a parse bit for bit.  Absent values
//! (bins without sifted events) serialize as empty cells, never as zero.

use crate::error::{Result, SimError};
use crate::harness::{EncoderComparison, QberSample, RunOutput, RunSummary, StateRow};

/// Header of the QBER time-series CSV.
pub const QBER_CSV_HEADER: &str = "bin_start_s,sifted,errors,qber,qber_std";

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_sci(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

/// Serializes the per-bin QBER series.
pub fn write_qber_csv(samples: &[QberSample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str(QBER_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&sci(s.bin_start_s));
        out.push(',');
        out.push_str(&s.sifted.to_string());
        out.push(',');
        out.push_str(&s.errors.to_string());
        out.push(',');
        out.push_str(&opt_sci(s.qber));
        out.push(',');
        out.push_str(&opt_sci(s.qber_std));
        out.push('\n');
    }
    out
}

fn parse_f64(field: &str, line: usize, name: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        SimError::ReportParse(format!("line {line}: {name} is not a number: '{field}'"))
    })
}

fn parse_u64(field: &str, line: usize, name: &str) -> Result<u64> {
    field.parse::<u64>().map_err(|_| {
        SimError::ReportParse(format!("line {line}: {name} is not a count: '{field}'"))
    })
}

fn parse_opt_f64(field: &str, line: usize, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line, name).map(Some)
    }
}

/// Parses a QBER CSV back into samples; every field round-trips exactly.
pub fn parse_qber_csv(text: &str) -> Result<Vec<QberSample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == QBER_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(SimError::ReportParse(format!(
                "unexpected header '{header}' (wanted '{QBER_CSV_HEADER}')"
            )))
        }
        None => return Err(SimError::ReportParse("empty input".into())),
    }
    let mut samples = Vec::new();
    for (idx, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 5 {
            return Err(SimError::ReportParse(format!(
                "line {lineno}: expected 5 fields, got {}",
                fields.len()
            )));
        }
        let sample = QberSample {
            bin_start_s: parse_f64(fields[0], lineno, "bin_start_s")?,
            sifted: parse_u64(fields[1], lineno, "sifted")?,
            errors: parse_u64(fields[2], lineno, "errors")?,
            qber: parse_opt_f64(fields[3], lineno, "qber")?,
            qber_std: parse_opt_f64(fields[4], lineno, "qber_std")?,
        };
        if sample.errors > sample.sifted {
            return Err(SimError::ReportParse(format!(
                "line {lineno}: errors {} exceed sifted {}",
                sample.errors, sample.sifted
            )));
        }
        samples.push(sample);
    }
    Ok(samples)
}

fn push_kv(out: &mut String, key: &str, value: &str) {
    out.push_str(key);
    out.push_str(" = ");
    out.push_str(value);
    out.push('\n');
}

/// The run summary as a key=value block; absent statistics print as
/// `absent`.  Config keys are echoed with a `config.` prefix, so the block
/// both documents the run and replays as overrides if needed.
pub fn write_summary(summary: &RunSummary) -> String {
    let opt = |v: Option<f64>| v.map(sci).unwrap_or_else(|| "absent".into());
    let mut out = String::new();
    push_kv(&mut out, "basis", summary.basis.as_str());
    push_kv(&mut out, "total_sifted", &summary.total_sifted.to_string());
    push_kv(&mut out, "total_errors", &summary.total_errors.to_string());
    push_kv(&mut out, "mean_qber", &opt(summary.mean_qber));
    push_kv(&mut out, "qber_std_bins", &opt(summary.qber_std_bins));
    push_kv(&mut out, "pooled_qber", &opt(summary.pooled_qber));
    push_kv(&mut out, "pooled_qber_std", &opt(summary.pooled_qber_std));
    push_kv(
        &mut out,
        "trend_slope_per_hour",
        &opt(summary.trend_slope_per_hour),
    );
    push_kv(
        &mut out,
        "trend_slope_std_per_hour",
        &opt(summary.trend_slope_std),
    );
    push_kv(&mut out, "seed", &summary.seed.to_string());
    for (k, v) in &summary.config_echo {
        push_kv(&mut out, &format!("config.{k}"), v);
    }
    out
}

/// CSV plus summary in one string, CSV first, blank line, then the block.
pub fn write_run_report(out: &RunOutput) -> String {
    format!(
        "{}\n{}",
        write_qber_csv(&out.samples),
        write_summary(&out.summary)
    )
}

/// Header of the emitted-states CSV.
pub const STATES_CSV_HEADER: &str =
    "index,target,a_h_re,a_h_im,a_v_re,a_v_im,s0,s1,s2,s3,dop";

/// Serializes emitted states: canonical Jones amplitudes (empty cells when
/// the state is partially polarized) plus Stokes components and DOP.
pub fn write_states_csv(rows: &[StateRow]) -> String {
    let mut out = String::new();
    out.push_str(STATES_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let jones = match &r.jones {
            Some(j) => format!(
                "{},{},{},{}",
                sci(j.a_h.re),
                sci(j.a_h.im),
                sci(j.a_v.re),
                sci(j.a_v.im)
            ),
            None => ",,,".into(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.index,
            r.target,
            jones,
            sci(r.stokes.s0),
            sci(r.stokes.s1),
            sci(r.stokes.s2),
            sci(r.stokes.s3),
            sci(r.dop)
        ));
    }
    out
}

/// Header of the encoder-comparison CSV.
pub const COMPARE_CSV_HEADER: &str = "encoder,mean_qber,mean_dop";

/// Serializes the encoder comparison table.
pub fn write_compare_csv(rows: &[EncoderComparison]) -> String {
    let mut out = String::new();
    out.push_str(COMPARE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.encoder,
            opt_sci(r.mean_qber),
            sci(r.mean_dop)
        ));
    }
    out
}

/// Header of the sweep CSV.
pub const SWEEP_CSV_HEADER: &str =
    "sweep_value,mean_qber,pooled_qber,pooled_qber_std,total_sifted,total_errors";

/// Serializes one row per sweep point.
pub fn write_sweep_csv(rows: &[(f64, RunOutput)]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for (value, run) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sci(*value),
            opt_sci(run.summary.mean_qber),
            opt_sci(run.summary.pooled_qber),
            opt_sci(run.summary.pooled_qber_std),
            run.summary.total_sifted,
            run.summary.total_errors
        ));
    }
    out
}
