//! CSV output.
//!
//! Column order is fixed. Real numbers are written in scientific notation with 12
//! significant digits; counts and seeds are plain integers. An empty `analytic_bep` means no
//! closed form was evaluated (binary baseline rows, or a failed quadrature).

use std::io::Write;

use tnoisemod::{BerRecord, LinkConfig};

pub const SIMULATION_HEADER: [&str; 12] = [
    "scheme",
    "N",
    "mu",
    "alpha",
    "delta_db",
    "analytic_bep",
    "simulated_ber",
    "bit_errors",
    "total_bits",
    "ci_halfwidth",
    "seed",
    "status",
];

pub const ANALYSIS_HEADER: [&str; 6] = ["scheme", "N", "mu", "alpha", "delta_db", "analytic_bep"];

/// 12 significant digits.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        // inf / -inf / NaN, spelled the way most CSV readers accept.
        format!("{x}")
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn link_columns(cfg: &LinkConfig) -> [String; 4] {
    [
        cfg.n().to_string(),
        real(cfg.mu()),
        real(cfg.alpha()),
        real(cfg.delta_db()),
    ]
}

pub fn write_simulation<W: Write>(out: W, records: &[BerRecord]) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(SIMULATION_HEADER)?;
    for r in records {
        let [n, mu, alpha, delta] = link_columns(&r.config);
        w.write_record([
            r.scheme.as_str().to_string(),
            n,
            mu,
            alpha,
            delta,
            r.analytic_bep.map(real).unwrap_or_default(),
            real(r.simulated_ber()),
            r.bit_errors.to_string(),
            r.total_bits.to_string(),
            real(r.ci_halfwidth),
            r.seed.to_string(),
            r.error.clone().unwrap_or_else(|| "ok".into()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One analytic evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRow {
    pub config: LinkConfig,
    pub bep: f64,
}

pub fn write_analysis<W: Write>(out: W, rows: &[AnalyticRow]) -> csv::Result<()> {
    let mut w = writer(out);
    w.write_record(ANALYSIS_HEADER)?;
    for row in rows {
        let [n, mu, alpha, delta] = link_columns(&row.config);
        w.write_record(["ternary".to_string(), n, mu, alpha, delta, real(row.bep)])?;
    }
    w.flush()?;
    Ok(())
}
