use std::io::Write;

use super::sim::TraceRow;
use crate::tsc::csv_err;
use crate::Result;

/// Writes per-step section rows as CSV with a header.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
