//! CSV serialization of experiment results.
//!
//! Floats are written with 17 significant digits so the text round-trips
//! to the same bits.

use std::io::Write;

use super::sweep::SweepTable;
use super::track::{MethodOutcome, RunRecord};
use crate::error::Result;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_sweep_csv<W: Write>(out: W, table: &SweepTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "delta", "method", "E_x", "E_X", "n_fail"])?;
    for r in &table.rows {
        w.write_record([
            fmt_f64(r.alpha),
            fmt_f64(r.delta),
            r.method.name().to_string(),
            fmt_f64(r.e_x),
            fmt_f64(r.e_extent),
            r.n_fail.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per run and method; failed runs carry NaN values.
pub fn write_track_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "method", "E_x", "E_X", "cycle_mean_s"])?;
    for rec in records {
        for o in &rec.outcomes {
            let (e_x, e_extent, cycle) = match o {
                MethodOutcome::Ok(r) => (r.e_x, r.e_extent, r.cycle_mean_s),
                MethodOutcome::Failed { .. } => (f64::NAN, f64::NAN, f64::NAN),
            };
            w.write_record([
                rec.run_id.to_string(),
                o.method().name().to_string(),
                fmt_f64(e_x),
                fmt_f64(e_extent),
                fmt_f64(cycle),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randmat::Method;
    use crate::sim::sweep::SweepRow;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 12345.678901234567, 5e-300] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let table = SweepTable {
            rows: vec![SweepRow { alpha: 1.0, delta: 2.0, method: Method::Ull, e_x: 0.5, e_extent: 2.0, n_fail: 3 }],
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("alpha,delta,method,E_x,E_X,n_fail"));
        assert_eq!(
            lines.next(),
            Some("1.0000000000000000e0,2.0000000000000000e0,ULL,5.0000000000000000e-1,2.0000000000000000e0,3")
        );
    }
}
