//! Diagnostics CSV and run summary.
//!
//! Units are code units: `v` velocity, `t` time, `B` the kernel scale.
//! Floating-point cells use Rust's shortest round-trip exponent format.

use std::fmt::Write as _;
use std::io::Write;

use crate::diagnostics::{loglog_slope, DiagnosticsConfig, DiagnosticsRecord, DiagnosticsReport, EnvelopeFit};
use crate::error::{Error, Result};

fn lambda_tag(l: f64) -> String {
    format!("{l}")
}

/// Column names with units, in output order.
pub fn csv_header(config: &DiagnosticsConfig) -> Vec<String> {
    let mut h: Vec<String> = [
        "step",
        "time [t]",
        "mass [v^2]",
        "momentum1 [v^3]",
        "momentum2 [v^3]",
        "energy [v^4]",
        "entropy [v^2]",
        "entropy_production [v^2/t]",
        "bony [B v^6]",
        "bony_integral [B v^6 t]",
        "sup_density [v^2]",
        "max_f [1]",
        "min_f [1]",
        "picard_residual [v^2]",
        "raw_defect [1]",
        "projection_l1 [v^2]",
        "projection_scale [1]",
        "moment_drift [1]",
        "momentum_at_0 [v^3]",
        "momentum_flux_at_0 [v^4]",
        "momentum_integral [v^3 t]",
        "momentum_flux_integral [v^4 t]",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if config.window.is_some() {
        h.push("windowed_sup_density [v^2]".into());
    }
    for &l in &config.lambdas {
        h.push(format!("tail_{} [v^2]", lambda_tag(l)));
        h.push(format!("tail_weighted_{} [v^3]", lambda_tag(l)));
    }
    h
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn csv_row(r: &DiagnosticsRecord) -> Vec<String> {
    let mut row = vec![
        r.step.to_string(),
        num(r.time),
        num(r.moments.mass),
        num(r.moments.momentum1),
        num(r.moments.momentum2),
        num(r.moments.energy),
        num(r.entropy),
        num(r.entropy_production),
        num(r.bony),
        num(r.bony_integral),
        num(r.sup_density),
        num(r.max_f),
        num(r.min_f),
        num(r.picard_residual),
        num(r.raw_defect),
        num(r.projection_l1),
        num(r.projection_scale),
        num(r.moment_drift),
        num(r.flux.momentum),
        num(r.flux.momentum_flux),
        num(r.momentum_integral),
        num(r.momentum_flux_integral),
    ];
    if let Some(w) = r.windowed_sup_density {
        row.push(num(w));
    }
    for t in &r.tails {
        row.push(num(t.plain));
        row.push(num(t.weighted));
    }
    row
}

/// CSV sink writing one row per recorded step.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W, config: &DiagnosticsConfig) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(csv_header(config)).map_err(csv_err)?;
        Ok(Self { writer })
    }

    pub fn push(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        self.writer.write_record(csv_row(r)).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush().map_err(|e| Error::Shape(format!("csv flush: {e}")))?;
        self.writer
            .into_inner()
            .map_err(|e| Error::Shape(format!("csv flush: {e}")))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Shape(format!("csv: {e}"))
}

/// Tolerance on the per-run relative moment drift with projection on.
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Tolerance on the per-step discrete entropy production.
pub const ENTROPY_TOL: f64 = 1e-8;

/// Plain-text summary: fitted constants, maxima and verdicts, then the config echo.
pub fn summary_text(
    report: &DiagnosticsReport,
    alpha: f64,
    projection: bool,
    stationarity: f64,
    config_echo: &str,
    band: f64,
) -> String {
    let mut s = String::new();
    let recs = &report.records;
    let last = recs.last();
    let _ = writeln!(s, "steps = {}", last.map_or(0, |r| r.step));
    let _ = writeln!(s, "final_time = {:e}", last.map_or(0.0, |r| r.time));
    let _ = writeln!(s, "range_held = true");
    let _ = writeln!(
        s,
        "max_f = {:e}",
        recs.iter().map(|r| r.max_f).fold(0.0, f64::max)
    );
    let _ = writeln!(
        s,
        "min_f = {:e}",
        recs.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min)
    );
    let drift = report.max_moment_drift();
    let _ = writeln!(s, "max_moment_drift = {drift:e}");
    let _ = writeln!(
        s,
        "max_raw_defect = {:e}",
        recs.iter().map(|r| r.raw_defect).fold(0.0, f64::max)
    );
    let _ = writeln!(
        s,
        "min_projection_scale = {:e}",
        recs.iter().map(|r| r.projection_scale).fold(1.0, f64::min)
    );
    let ent = report.max_entropy_production();
    let _ = writeln!(s, "max_entropy_production = {ent:e}");
    let _ = writeln!(s, "stationarity_residual = {stationarity:e}");
    if let Some(fit) = report.bony_fit() {
        let _ = writeln!(
            s,
            "bony_fit = slope {:e}, intercept {:e}, rel_residual {:e}",
            fit.slope, fit.intercept, fit.rel_residual
        );
    }
    match report.envelope_fit(alpha, band) {
        EnvelopeFit::Fitted {
            b1_hat,
            t_m_hat,
            window,
        } => {
            let tm = t_m_hat.map_or("not reached".to_string(), |t| format!("{t:e}"));
            let _ = writeln!(s, "envelope = b1_hat {b1_hat:e}, t_m_hat {tm}, window {window}");
        }
        EnvelopeFit::NotApplicable => {
            let _ = writeln!(s, "envelope = not applicable");
        }
    }
    if let Some(r) = last {
        let ls: Vec<f64> = r.tails.iter().map(|t| t.lambda).collect();
        let plain: Vec<f64> = r.tails.iter().map(|t| t.plain).collect();
        let weighted: Vec<f64> = r.tails.iter().map(|t| t.weighted).collect();
        if let (Some(a), Some(b)) = (loglog_slope(&ls, &plain), loglog_slope(&ls, &weighted)) {
            let _ = writeln!(s, "tail_slopes = plain {a:e}, weighted {b:e}");
        }
    }
    let verdict = |ok: bool| if ok { "pass" } else { "fail" };
    if projection {
        let _ = writeln!(
            s,
            "verdict.conservation = {} (drift < {CONSERVATION_TOL:e})",
            verdict(drift < CONSERVATION_TOL)
        );
    } else {
        let _ = writeln!(s, "verdict.conservation = reported only (projection off)");
    }
    let _ = writeln!(
        s,
        "verdict.entropy = {} (production <= {ENTROPY_TOL:e})",
        verdict(recs.len() < 2 || ent <= ENTROPY_TOL)
    );
    let _ = writeln!(s, "verdict.range = pass");
    let _ = writeln!(s, "\n# config\n{config_echo}");
    s
}
