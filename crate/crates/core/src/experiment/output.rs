use std::io::Write;

use super::sweep::{BoundRow, CellError, SweepRow};
use crate::error::Result;
use crate::metrics::BOUND_CSV_HEADER;

pub const CORR_SWEEP_FILE: &str = "corr_sweep.v1.csv";
pub const N_SWEEP_FILE: &str = "n_sweep.v1.csv";
pub const BOUNDS_FILE: &str = "bounds.v1.csv";
pub const ERRORS_FILE: &str = "errors.v1.csv";

const SWEEP_HEADER: [&str; 13] = [
    "method",
    "lambda",
    "param",
    "mi_lo",
    "mi_hi",
    "mi_achieved",
    "n",
    "rep",
    "seed",
    "ood_acc",
    "ood_se",
    "id_acc",
    "bayes_acc",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Missing values (NaN) are written as empty fields.
fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub fn write_sweep<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            opt(r.lambda),
            opt(r.param),
            num(r.mi_lo),
            num(r.mi_hi),
            num(r.mi_achieved),
            r.n.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.ood_acc.to_string(),
            num(r.ood_se),
            r.id_acc.to_string(),
            num(r.bayes_acc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Context columns followed by the bound report columns, one row per variant.
pub fn write_bounds<W: Write>(writer: W, rows: &[BoundRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec![
        "method",
        "method_lambda",
        "mi_lo",
        "mi_hi",
        "mi_achieved",
        "rep",
        "ood_risk",
        "ood_se",
    ];
    header.extend(BOUND_CSV_HEADER);
    w.write_record(&header)?;
    for r in rows {
        for rec in r.report.csv_records() {
            let mut line = vec![
                r.method.clone(),
                opt(r.lambda),
                num(r.mi_lo),
                num(r.mi_hi),
                num(r.mi_achieved),
                r.rep.to_string(),
                num(r.ood_risk),
                num(r.ood_se),
            ];
            line.extend(rec);
            w.write_record(&line)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_errors<W: Write>(writer: W, errors: &[CellError]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["stage", "method", "n", "mi_lo", "mi_hi", "rep", "message"])?;
    for e in errors {
        w.write_record([
            e.stage.clone(),
            e.method.clone(),
            e.n.to_string(),
            e.mi_lo.to_string(),
            e.mi_hi.to_string(),
            e.rep.to_string(),
            e.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
