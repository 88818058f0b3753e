//! CSV tables. Headers are fixed; floats use the shortest round-trip form,
//! failed values are written as `NaN`.

use std::io::Write;

use crate::channel::TwoQubitChannel;
use crate::dressed::effective_model;
use crate::error::{Error, Result};
use crate::floquet::FloquetSpectrum;
use crate::optimize::GateTimeRow;
use crate::params::ProtocolParams;
use crate::propagator::TrajectoryRow;
use crate::scan::ScanRow;

fn io(e: csv::Error) -> Error {
    Error::Precondition(format!("csv output: {e}"))
}

fn table<W: Write, I>(w: W, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(io)?;
    for r in rows {
        out.write_record(&r).map_err(io)?;
    }
    out.flush().map_err(|e| io(e.into()))
}

fn s(v: f64) -> String {
    v.to_string()
}

pub const DETUNING_HEADER: [&str; 3] = ["omega_d", "delta_12_prime", "signed_detuning"];

/// `Δ'_12` against drive frequency.
pub fn detuning_csv<W: Write>(w: W, p: &ProtocolParams, omega_d: &[f64]) -> Result<()> {
    table(
        w,
        &DETUNING_HEADER,
        omega_d.iter().map(|&wd| {
            let m = effective_model(p, wd);
            vec![s(wd), s(m.delta_12_prime), s(m.signed_detuning)]
        }),
    )
}

pub fn trajectory_csv<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<()> {
    table(
        w,
        &TrajectoryRow::HEADER,
        rows.iter().map(|r| r.values().into_iter().map(s).collect()),
    )
}

pub const SPECTRUM_HEADER: [&str; 7] = [
    "value",
    "branch",
    "label",
    "quasienergy",
    "modulator_weight",
    "continuity",
    "crossing_window",
];

/// Long format: one row per (sweep point, branch).
pub fn spectrum_csv<W: Write>(w: W, spec: &FloquetSpectrum) -> Result<()> {
    let rows = spec.sweep_values.iter().enumerate().flat_map(|(k, &v)| {
        spec.labels.iter().enumerate().map(move |(b, l)| {
            vec![
                s(v),
                b.to_string(),
                l.key(),
                s(spec.quasienergies[k][b]),
                s(spec.modulator_weight[k][b]),
                s(spec.continuity[k]),
                spec.crossing_window[k].to_string(),
            ]
        })
    });
    table(w, &SPECTRUM_HEADER, rows)
}

pub const CHOI_HEADER: [&str; 4] = ["row", "col", "re", "im"];

/// Choi matrix entries, index `4i + a` (output `i`, input `a`).
pub fn choi_csv<W: Write>(w: W, ch: &TwoQubitChannel) -> Result<()> {
    let c = ch.choi();
    let rows = (0..c.nrows()).flat_map(|i| {
        (0..c.ncols()).map(move |j| vec![i.to_string(), j.to_string(), s(c[(i, j)].re), s(c[(i, j)].im)])
    });
    table(w, &CHOI_HEADER, rows)
}

pub fn scan_csv<W: Write>(w: W, rows: &[ScanRow]) -> Result<()> {
    table(
        w,
        &ScanRow::HEADER,
        rows.iter().map(|r| {
            vec![
                s(r.value),
                s(r.infidelity_on),
                s(r.off_ratio),
                s(r.omega_d_on),
                s(r.t_gate),
                r.status.clone(),
            ]
        }),
    )
}

pub fn sweep_csv<W: Write>(w: W, rows: &[GateTimeRow]) -> Result<()> {
    table(
        w,
        &GateTimeRow::HEADER,
        rows.iter().map(|r| {
            vec![
                s(r.j_12),
                s(r.t_gate),
                s(r.infidelity_on),
                s(r.off_ratio),
                s(r.j_m1),
                s(r.drive_amp),
                s(r.omega_2),
                r.evaluations.to_string(),
                r.converged.to_string(),
                r.status.clone(),
            ]
        }),
    )
}
