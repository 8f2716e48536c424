//! CSV traces: one header line of column names, then one row per step.
//!
//! Numbers are written with Rust's `{}` formatting, the shortest decimal
//! string that parses back to the same `f64`, so a trace round-trips exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::engine::TimeSeries;
use crate::error::{Result, SimError};

pub fn write<W: Write>(series: &TimeSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&series.columns)?;
    let mut row = Vec::with_capacity(series.columns.len());
    for k in 0..series.len() {
        row.clear();
        row.extend(series.data.iter().map(|col| col[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read<R: Read>(input: R) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_reader(input);
    let columns: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if columns.first().map(String::as_str) != Some("t") {
        return Err(SimError::Parse("trace must start with a 't' column".into()));
    }
    let mut data = vec![Vec::new(); columns.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (col, field) in data.iter_mut().zip(rec.iter()) {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|e| SimError::Parse(format!("row {}: '{field}': {e}", line + 2)))?;
            col.push(v);
        }
    }
    let h = match data[0].as_slice() {
        [t0, t1, ..] => t1 - t0,
        _ => return Err(SimError::Parse("trace needs at least two rows".into())),
    };
    Ok(TimeSeries { h, columns, data })
}

pub fn save(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    write(series, std::io::BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<TimeSeries> {
    read(std::io::BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut s = TimeSeries::new(1e-4, vec!["t".into(), "v_a".into()]);
        for k in 0..5 {
            let t = k as f64 * 1e-4;
            s.push_row(&[t, (t * 1234.5).sin() / 3.0]);
        }
        let mut buf = Vec::new();
        write(&s, &mut buf).unwrap();
        let back = read(buf.as_slice()).unwrap();
        assert_eq!(back.columns, s.columns);
        assert_eq!(back.data, s.data);
    }

    #[test]
    fn header_only_is_rejected() {
        assert!(read("t,v_a\n".as_bytes()).is_err());
        assert!(read("x,v_a\n0,1\n1,2\n".as_bytes()).is_err());
    }
}
