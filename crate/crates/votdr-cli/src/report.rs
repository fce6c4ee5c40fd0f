//! The analysis report document and its console rendering.

use serde::{Deserialize, Serialize};
use votdr_core::analysis::{AnalysisReport, DetectedEvent, EventKind};

use crate::pipeline::StitchSummary;

/// What `analyze` writes and `report` reads: the fit and noise summary,
/// detected events, and enough bookkeeping to interpret them.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub bin_width_ps: u64,
    pub n_pulses: u64,
    pub slope_db_per_km: f64,
    pub intercept_db: f64,
    pub rms_noise_db: f64,
    pub dynamic_range_db: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stitch: Option<StitchSummary>,
    #[serde(default)]
    pub events: Vec<DetectedEvent>,
}

impl ReportDoc {
    pub fn new(
        report: &AnalysisReport,
        stitch: Option<StitchSummary>,
        bin_width_ps: u64,
        n_pulses: u64,
    ) -> Self {
        Self {
            bin_width_ps,
            n_pulses,
            slope_db_per_km: report.slope_db_per_km,
            intercept_db: report.intercept_db,
            rms_noise_db: report.rms_noise_db,
            dynamic_range_db: report.dynamic_range_db,
            stitch,
            events: report.events.clone(),
        }
    }
}

/// Human-readable summary. The dynamic range is recomputed from the
/// intercept and noise floor so a hand-edited document stays consistent.
pub fn print_report(doc: &ReportDoc, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "pulses:        {}", doc.n_pulses)?;
    writeln!(out, "bin width:     {:.3} ns", doc.bin_width_ps as f64 * 1e-3)?;
    writeln!(out, "slope:         {:.4} dB/km", doc.slope_db_per_km)?;
    writeln!(out, "intercept:     {:.2} dB", doc.intercept_db)?;
    writeln!(out, "rms noise:     {:.2} dB", doc.rms_noise_db)?;
    writeln!(
        out,
        "dynamic range: {:.2} dB",
        doc.intercept_db - doc.rms_noise_db
    )?;
    if let Some(st) = &doc.stitch {
        writeln!(
            out,
            "stitch:        scale {:.6}, splice at {:.1} m",
            st.scale, st.splice_position_m
        )?;
    }
    writeln!(out, "events:        {}", doc.events.len())?;
    for ev in &doc.events {
        let kind = match ev.kind {
            EventKind::Reflective => "reflective",
            EventKind::Lossy => "lossy",
        };
        writeln!(
            out,
            "  {kind} at {:.2} m, {:.2} dB",
            ev.position_m, ev.magnitude_db
        )?;
    }
    Ok(())
}
