use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One matrix-completion observation `(i, j, y)`, zero-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub y: f64,
}

/// A feature vector with a real response or a `±1` label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<O> {
    pub observations: Vec<O>,
    pub seed: u64,
}

impl<O> Dataset<O> {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Flat CSV representation of an observation.
pub trait CsvRecord: Sized {
    fn header(sample: Option<&Self>) -> Vec<String>;
    fn to_row(&self) -> Vec<String>;
    fn from_row(header: &[String], row: &[String]) -> Result<Self>;
}

impl CsvRecord for Entry {
    fn header(_: Option<&Self>) -> Vec<String> {
        vec!["i".into(), "j".into(), "y".into()]
    }

    fn to_row(&self) -> Vec<String> {
        vec![self.i.to_string(), self.j.to_string(), self.y.to_string()]
    }

    fn from_row(header: &[String], row: &[String]) -> Result<Self> {
        if header != ["i", "j", "y"] {
            return Err(Error::InvalidArgument(format!("expected header i,j,y, got {}", header.join(","))));
        }
        let parse_idx = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::InvalidArgument(format!("bad index {s:?}: {e}")));
        Ok(Entry {
            i: parse_idx(&row[0])?,
            j: parse_idx(&row[1])?,
            y: parse_f64(&row[2])?,
        })
    }
}

impl CsvRecord for Point {
    fn header(sample: Option<&Self>) -> Vec<String> {
        let k = sample.map_or(0, |p| p.x.len());
        (0..k).map(|i| format!("x{i}")).chain(std::iter::once("y".to_string())).collect()
    }

    fn to_row(&self) -> Vec<String> {
        self.x.iter().map(f64::to_string).chain(std::iter::once(self.y.to_string())).collect()
    }

    fn from_row(header: &[String], row: &[String]) -> Result<Self> {
        let k = header.len().saturating_sub(1);
        let well_formed = header.last().map(String::as_str) == Some("y")
            && header[..k].iter().enumerate().all(|(i, h)| *h == format!("x{i}"));
        if !well_formed {
            return Err(Error::InvalidArgument(format!("expected header x0..xk,y, got {}", header.join(","))));
        }
        let x = row[..k].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
        Ok(Point { x, y: parse_f64(&row[k])? })
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))
}

impl<O: CsvRecord> Dataset<O> {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(O::header(self.observations.first()))?;
        for obs in &self.observations {
            w.write_record(obs.to_row())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a dataset written by [`Dataset::write_csv`]. The seed is not part
    /// of the file and must be supplied.
    pub fn read_csv<R: Read>(reader: R, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut observations = Vec::new();
        for record in r.records() {
            let row: Vec<String> = record?.iter().map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::DimensionMismatch { context: "csv row", expected: header.len(), got: row.len() });
            }
            observations.push(O::from_row(&header, &row)?);
        }
        Ok(Dataset { observations, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn entry_csv_round_trip(rows in proptest::collection::vec((0usize..9, 0usize..9, -1e6f64..1e6), 0..40)) {
            let data = Dataset { observations: rows.iter().map(|&(i, j, y)| Entry { i, j, y }).collect(), seed: 3 };
            let mut buf = Vec::new();
            data.write_csv(&mut buf).unwrap();
            prop_assert!(buf.starts_with(b"i,j,y\n"));
            let back = Dataset::<Entry>::read_csv(buf.as_slice(), 3).unwrap();
            prop_assert_eq!(back, data);
        }
    }

    #[test]
    fn point_header_and_round_trip() {
        let data = Dataset {
            observations: vec![Point { x: vec![0.5, -1.0], y: 1.0 }, Point { x: vec![0.25, 2.0], y: -1.0 }],
            seed: 0,
        };
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x0,x1,y\n"));
        assert_eq!(Dataset::<Point>::read_csv(buf.as_slice(), 0).unwrap(), data);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "a,b,y\n1,2,3\n";
        assert!(Dataset::<Entry>::read_csv(text.as_bytes(), 0).is_err());
    }
}
