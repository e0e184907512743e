//! Trajectory CSV output.
//!
//! Columns: `step`, then `mu_{y}`, then `q_{x}_{a}` in row-major order, then
//! `local_{x}_{a}_{y}`. Values are written in `{:.16e}` form (17 significant
//! digits), which round-trips every `f64`.

use std::io::Write;

use mfcg_core::{SpaceDims, TraceRow, TraceSink};

pub fn header(dims: SpaceDims) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((0..dims.n_states).map(|y| format!("mu_{y}")));
    for x in 0..dims.n_states {
        for a in 0..dims.n_actions {
            h.push(format!("q_{x}_{a}"));
        }
    }
    for x in 0..dims.n_states {
        for a in 0..dims.n_actions {
            h.extend((0..dims.n_states).map(|y| format!("local_{x}_{a}_{y}")));
        }
    }
    h
}

pub fn column_count(dims: SpaceDims) -> usize {
    let (nx, na) = (dims.n_states, dims.n_actions);
    1 + nx + nx * na + nx * nx * na
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_row(row: &TraceRow) -> Vec<String> {
    let mut out =
        Vec::with_capacity(1 + row.mu.len() + row.q.len() + row.locals.len() * row.mu.len());
    out.push(row.step.to_string());
    out.extend(row.mu.iter().copied().map(fmt_value));
    out.extend(row.q.iter().copied().map(fmt_value));
    out.extend(row.locals.iter().flatten().copied().map(fmt_value));
    out
}

/// Streams rows to a CSV writer, checking each row's width against the header.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    width: usize,
    rows: u64,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W, dims: SpaceDims) -> csv::Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(header(dims))?;
        Ok(CsvSink {
            writer,
            width: column_count(dims),
            rows: 0,
        })
    }

    pub fn rows_written(&self) -> u64 {
        self.rows
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.writer.flush()
    }

    pub fn into_inner(self) -> Result<W, String> {
        self.writer.into_inner().map_err(|e| e.to_string())
    }
}

impl<W: Write> TraceSink for CsvSink<W> {
    fn record(&mut self, row: TraceRow) -> Result<(), String> {
        let fields = format_row(&row);
        if fields.len() != self.width {
            return Err(format!(
                "row has {} columns, header has {}",
                fields.len(),
                self.width
            ));
        }
        self.writer
            .write_record(&fields)
            .map_err(|e| e.to_string())?;
        self.rows += 1;
        Ok(())
    }
}
