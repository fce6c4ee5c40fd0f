//! CSV rendering of a corrected trace alongside its log form.

use std::io::Write;

use votdr_core::analysis::{LogTrace, Trace};

/// Writes one row per bin. Float columns carry nine significant digits;
/// the `log5_db` cell is left empty where the bin has no usable value
/// (no counts, or saturated during correction).
pub fn emit_trace_csv(
    trace: &Trace,
    log: &LogTrace,
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(
        out,
        "bin_start_ns,distance_m,counts,prob_per_pulse,corrected_prob,log5_db"
    )?;
    for (k, bin) in trace.bins.iter().enumerate() {
        let value_db = log.values_db[k];
        let log_cell = if value_db.is_finite() {
            format!("{value_db:.9}")
        } else {
            String::new()
        };
        writeln!(
            out,
            "{:.3},{},{},{},{},{}",
            trace.bin_start_s(k) * 1e9,
            sig9(log.distance_m(k)),
            bin.counts,
            sig9(bin.prob_per_pulse),
            sig9(bin.corrected_prob),
            log_cell,
        )?;
    }
    Ok(())
}

/// Nine significant digits, locale-independent.
fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}
