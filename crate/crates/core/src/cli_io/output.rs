//! CSV emission. Numbers use the shortest round-trip representation, so
//! identical results give identical bytes.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{DensityReport, ErgodicityReport, InvariantGapReport, WeakErrorReport};
use crate::integrator::TrajectoryRecord;

pub const WEAK_ERROR_HEADER: [&str; 5] = ["phi", "tau", "error", "stderr", "n_samples"];
pub const RATES_HEADER: [&str; 4] = ["phi", "slope", "band_lo", "band_hi"];
pub const ERGODICITY_HEADER: [&str; 4] = ["initial_id", "t", "mean", "stderr"];
pub const MOMENTS_HEADER: [&str; 6] = ["initial_id", "t", "mean_V_p", "stderr_V_p", "mean_H_p", "stderr_H_p"];
pub const DENSITY_HEADER: [&str; 3] = ["bin_lo", "bin_hi", "mass"];
pub const INVARIANT_HEADER: [&str; 6] = ["level", "tau", "steps", "mean", "stderr", "blow_ups"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn to_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_rows(std::fs::File::create(path)?, header, rows)
}

pub fn write_weak_errors(path: &Path, report: &WeakErrorReport) -> Result<()> {
    to_file(
        path,
        &WEAK_ERROR_HEADER,
        report.rows.iter().map(|r| {
            vec![
                r.phi.to_string(),
                num(r.tau),
                num(r.error),
                num(r.stderr),
                r.n_samples.to_string(),
            ]
        }),
    )
}

pub fn write_rates(path: &Path, report: &WeakErrorReport) -> Result<()> {
    to_file(
        path,
        &RATES_HEADER,
        report.rates.iter().map(|r| {
            let (lo, hi) = r.band.unwrap_or((f64::NAN, f64::NAN));
            vec![r.phi.to_string(), num(r.slope), num(lo), num(hi)]
        }),
    )
}

pub fn write_ergodicity(path: &Path, report: &ErgodicityReport) -> Result<()> {
    to_file(
        path,
        &ERGODICITY_HEADER,
        report.series.iter().enumerate().flat_map(|(id, s)| {
            (0..s.times.len()).map(move |c| {
                vec![id.to_string(), num(s.times[c]), num(s.mean[c]), num(s.stderr[c])]
            })
        }),
    )
}

pub fn write_moments(path: &Path, report: &ErgodicityReport) -> Result<()> {
    to_file(
        path,
        &MOMENTS_HEADER,
        report.series.iter().enumerate().flat_map(|(id, s)| {
            let m = &s.moments;
            (0..m.times.len()).map(move |c| {
                vec![
                    id.to_string(),
                    num(m.times[c]),
                    num(m.mean_v[c]),
                    num(m.stderr_v[c]),
                    num(m.mean_h[c]),
                    num(m.stderr_h[c]),
                ]
            })
        }),
    )
}

pub fn write_density(path: &Path, report: &DensityReport) -> Result<()> {
    to_file(
        path,
        &DENSITY_HEADER,
        report.histogram.bins().map(|(lo, hi, m)| vec![num(lo), num(hi), num(m)]),
    )
}

pub fn write_invariant(path: &Path, report: &InvariantGapReport) -> Result<()> {
    to_file(
        path,
        &INVARIANT_HEADER,
        report.levels.iter().enumerate().map(|(k, l)| {
            vec![
                k.to_string(),
                num(l.tau),
                l.steps.to_string(),
                num(l.mean),
                num(l.stderr),
                l.blow_ups.to_string(),
            ]
        }),
    )
}

/// Header `t,H_norm,V_norm,obs_1..obs_k,sample_id`.
pub fn trajectory_header(observables: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "H_norm".into(), "V_norm".into()];
    h.extend((1..=observables).map(|k| format!("obs_{k}")));
    h.push("sample_id".into());
    h
}

pub fn write_trajectories<W: Write>(out: W, records: &[TrajectoryRecord], observables: usize) -> Result<()> {
    let header = trajectory_header(observables);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        out,
        &header,
        records.iter().flat_map(|r| {
            (0..r.times.len()).map(move |c| {
                let mut row = vec![num(r.times[c]), num(r.h_norm[c]), num(r.v_norm[c])];
                row.extend(r.observables[c].iter().map(|&v| num(v)));
                row.push(r.sample_id.to_string());
                row
            })
        }),
    )
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
