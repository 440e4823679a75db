//! CSV ingestion and emission for arrival series.
//!
//! Arrivals: header `date,calls`, ISO dates, nonnegative integer calls.
//! Closing days: one ISO date per line.

use std::collections::BTreeSet;
use std::io::{BufRead, Read, Write};

use chrono::NaiveDate;

use super::ArrivalSeries;
use crate::error::{Error, Result};

pub fn read_calls<R: Read>(reader: R) -> Result<Vec<(NaiveDate, u64)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "calls" {
        return Err(Error::Parse(format!("expected header `date,calls`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date: NaiveDate = rec[0]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad date `{}`: {e}", line + 2, &rec[0])))?;
        let calls: u64 = rec[1]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad count `{}`: {e}", line + 2, &rec[1])))?;
        out.push((date, calls));
    }
    Ok(out)
}

pub fn read_closing_days<R: BufRead>(reader: R) -> Result<BTreeSet<NaiveDate>> {
    let mut set = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let d: NaiveDate = s.parse().map_err(|e| Error::Parse(format!("closing days line {}: `{s}`: {e}", i + 1)))?;
        set.insert(d);
    }
    Ok(set)
}

/// Writes the series as `date,calls`, with zeros on closing days.
pub fn write_calls<W: Write>(s: &ArrivalSeries, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["date", "calls"])?;
    for t in 0..s.len() {
        let c = s.observed(t) as u64;
        w.write_record([s.dates()[t].to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_closing_days<W: Write>(days: &BTreeSet<NaiveDate>, mut writer: W) -> Result<()> {
    for d in days {
        writeln!(writer, "{d}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_calls_and_closing_days() {
        let data = "date,calls\n2024-01-01,10\n2024-01-02, 12\n";
        let rows = read_calls(data.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].1, 12);
        let days = read_closing_days("2024-12-25\n\n2025-01-01\n".as_bytes()).unwrap();
        assert_eq!(days.len(), 2);
    }

    #[test]
    fn rejects_bad_header_and_values() {
        assert!(read_calls("day,calls\n2024-01-01,1\n".as_bytes()).is_err());
        assert!(read_calls("date,calls\n2024-01-01,-1\n".as_bytes()).is_err());
        assert!(read_calls("date,calls\n01/01/2024,1\n".as_bytes()).is_err());
    }
}
