use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::Array2;

use crate::assessment::AssessmentReport;
use crate::error::{Error, Result};
use crate::pipelines::{Combine, PredictionSet};

/// Column order of the long-format report.
pub const REPORT_HEADER: [&str; 6] = ["method", "k", "horizon", "stratum", "metric", "value"];

fn ser(e: impl std::fmt::Display) -> Error {
    Error::Serialization(e.to_string())
}

/// Long-format CSV; undefined statistics are written as empty cells.
pub fn write_report_csv<W: Write>(writer: W, report: &AssessmentReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER).map_err(ser)?;
    for r in &report.rows {
        w.write_record([
            r.method.clone(),
            r.k.to_string(),
            r.horizon.to_string(),
            r.stratum.as_str().to_string(),
            r.metric.as_str().to_string(),
            r.value.map_or_else(String::new, |v| v.to_string()),
        ])
        .map_err(ser)?;
    }
    w.flush().map_err(ser)?;
    Ok(())
}

pub fn write_report_json<W: Write>(mut writer: W, report: &AssessmentReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, report).map_err(ser)?;
    writer.write_all(b"\n").map_err(ser)
}

/// One row per (replicate, horizon, subject): the combined prediction
/// followed by the K constituents.
pub fn write_predictions_csv<W: Write>(writer: W, replicates: &[PredictionSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let k = replicates.first().map_or(0, PredictionSet::k);
    let mut header: Vec<String> = ["replicate", "horizon", "subject", "had_missing", "combined"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=k).map(|i| format!("imp_{i}")));
    w.write_record(&header).map_err(ser)?;
    for (r, set) in replicates.iter().enumerate() {
        for (h, t) in set.horizons().iter().enumerate() {
            let c = set.constituents(h);
            for i in 0..set.n() {
                let mut rec = vec![
                    r.to_string(),
                    t.to_string(),
                    i.to_string(),
                    (set.had_missing()[i] as u8).to_string(),
                    set.combined(h)[i].to_string(),
                ];
                rec.extend(c.row(i).iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(ser)?;
            }
        }
    }
    w.flush().map_err(ser)?;
    Ok(())
}

/// Reads a file written by [`write_predictions_csv`], one set per replicate.
pub fn read_predictions_csv<R: Read>(reader: R, combine: Combine) -> Result<Vec<PredictionSet>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(ser)?.clone();
    let k = header.len().saturating_sub(5);
    if k == 0 || header.iter().take(5).ne(["replicate", "horizon", "subject", "had_missing", "combined"]) {
        return Err(Error::Validation("not a predictions file".into()));
    }
    // replicate -> horizon bits -> subject -> (had_missing, values)
    type Rows = BTreeMap<usize, (bool, Vec<f64>)>;
    let mut data: BTreeMap<usize, Vec<(f64, Rows)>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(ser)?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |c: usize| Error::Parse {
            row: line + 1,
            column: header.get(c).unwrap_or("").to_string(),
            message: format!("`{}` is not valid", field(c)),
        };
        let num = |c: usize| field(c).parse::<f64>().map_err(|_| parse_err(c));
        let idx = |c: usize| field(c).parse::<usize>().map_err(|_| parse_err(c));
        let (r, t, i) = (idx(0)?, num(1)?, idx(2)?);
        let had = field(3) == "1";
        let values = (5..5 + k).map(num).collect::<Result<Vec<_>>>()?;
        let horizons = data.entry(r).or_default();
        let slot = match horizons.iter().position(|(h, _)| *h == t) {
            Some(p) => p,
            None => {
                horizons.push((t, Rows::new()));
                horizons.len() - 1
            }
        };
        horizons[slot].1.insert(i, (had, values));
    }
    data.into_values()
        .map(|horizons| {
            let n = horizons.first().map_or(0, |(_, rows)| rows.len());
            let had_missing: Vec<bool> = horizons
                .first()
                .map(|(_, rows)| rows.values().map(|(m, _)| *m).collect())
                .unwrap_or_default();
            let mut ts = Vec::new();
            let mut mats = Vec::new();
            for (t, rows) in horizons {
                if rows.len() != n || rows.keys().copied().ne(0..n) {
                    return Err(Error::Validation(format!("incomplete predictions at horizon {t}")));
                }
                let flat: Vec<f64> = rows.into_values().flat_map(|(_, v)| v).collect();
                mats.push(Array2::from_shape_vec((n, k), flat).expect("k values per row"));
                ts.push(t);
            }
            PredictionSet::new(ts, mats, had_missing, vec![false; n], combine)
        })
        .collect()
}
