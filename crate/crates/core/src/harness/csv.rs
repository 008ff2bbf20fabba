//! CSV emission and parse-back for harness outputs.
//!
//! Floats are rounded to 9 significant digits and printed in their shortest
//! exact form, so a written row parses back to the identical value.

use std::io::{Read, Write};

use super::config::{NTrain, RunMethod};
use super::run::{round9, ResultRow};
use crate::error::{Error, Result};
use crate::eval::GapReport;
use crate::objectives::ModelKind;
use crate::oracle::{corollary1_ratios, generalization_bounds, theorem1_table};
use crate::synthdata::ProblemParams;

pub const RESULT_HEADER: [&str; 16] = [
    "method",
    "model_kind",
    "gamma",
    "p_c",
    "eta",
    "sigma",
    "n_train",
    "fraction",
    "seed",
    "acc_c1",
    "acc_c2",
    "balanced",
    "worst",
    "train_steps",
    "wall_ms",
    "status",
];

pub const GAP_HEADER: [&str; 8] = ["method", "context", "n", "p_c", "seed", "train_loss", "test_loss", "gap"];

pub fn fmt_f64(x: f64) -> String {
    let r = round9(x);
    let a = r.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e9).contains(&a) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::parse("<csv>", 0, format!("{other:?}")),
    }
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.model_kind.name().to_string(),
            fmt_f64(r.gamma),
            fmt_f64(r.p_c),
            fmt_f64(r.eta),
            fmt_f64(r.sigma),
            r.n_train.to_string(),
            fmt_f64(r.fraction),
            r.seed.to_string(),
            fmt_f64(r.acc_c1),
            fmt_f64(r.acc_c2),
            fmt_f64(r.balanced),
            fmt_f64(r.worst),
            r.train_steps.to_string(),
            r.wall_ms.to_string(),
            r.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn results_to_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_results(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::parse("<csv>", line, format!("bad {} value `{raw}`", RESULT_HEADER[i])))
}

/// Parses CSV written by [`write_results`].
pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RESULT_HEADER.iter().copied()) {
        return Err(Error::parse("<csv>", 1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        let text = |i: usize| rec.get(i).unwrap_or("");
        let method = RunMethod::from_name(text(0))
            .ok_or_else(|| Error::parse("<csv>", line, format!("unknown method `{}`", text(0))))?;
        let model_kind = ModelKind::from_name(text(1))
            .ok_or_else(|| Error::parse("<csv>", line, format!("unknown model kind `{}`", text(1))))?;
        let n_train = NTrain::parse(text(6))
            .ok_or_else(|| Error::parse("<csv>", line, format!("bad n_train `{}`", text(6))))?;
        rows.push(ResultRow {
            method,
            model_kind,
            gamma: field(&rec, 2, line)?,
            p_c: field(&rec, 3, line)?,
            eta: field(&rec, 4, line)?,
            sigma: field(&rec, 5, line)?,
            n_train,
            fraction: field(&rec, 7, line)?,
            seed: field(&rec, 8, line)?,
            acc_c1: field(&rec, 9, line)?,
            acc_c2: field(&rec, 10, line)?,
            balanced: field(&rec, 11, line)?,
            worst: field(&rec, 12, line)?,
            train_steps: field(&rec, 13, line)?,
            wall_ms: field(&rec, 14, line)?,
            status: text(15).to_string(),
        });
    }
    Ok(rows)
}

pub fn write_gaps<W: Write>(out: W, rows: &[GapReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAP_HEADER).map_err(csv_err)?;
    for g in rows {
        let method = if g.method == crate::objectives::Method::Icc { "icc" } else { "enp" };
        w.write_record([
            method.to_string(),
            g.context.to_string(),
            g.n.to_string(),
            fmt_f64(g.p_c),
            g.seed.to_string(),
            fmt_f64(g.train_loss),
            fmt_f64(g.test_loss),
            fmt_f64(g.gap),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an arbitrary table with a header, used for summaries.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Closed-form accuracies per method followed by the generalization bounds
/// at `n` samples and confidence `1 - delta`.
pub fn write_oracle<W: Write>(out: W, params: &ProblemParams, n: usize, delta: f64) -> Result<()> {
    let mut rows: Vec<Vec<String>> = theorem1_table(params)
        .into_iter()
        .map(|t| {
            vec![
                "accuracy".to_string(),
                t.method.name().to_string(),
                fmt_f64(t.acc_c1),
                fmt_f64(t.acc_c2),
            ]
        })
        .collect();
    let (r1, r2) = corollary1_ratios(params);
    rows.push(vec!["ratio".into(), "enp_vs_optimal".into(), fmt_f64(r1), fmt_f64(r2)]);
    if params.p_c < 1.0 {
        let b = generalization_bounds(params, n, delta)?;
        for (name, v) in [
            ("c0", b.c0),
            ("radius", b.radius),
            ("log_lipschitz", b.log_lipschitz),
            ("icc_bound", b.icc_bound),
            ("enp_bound", b.enp_bound),
            ("icc_over_enp", b.ratio()),
        ] {
            rows.push(vec!["bound".into(), name.into(), fmt_f64(v), String::new()]);
        }
    }
    write_table(out, &["kind", "name", "c1", "c2"], &rows)
}
