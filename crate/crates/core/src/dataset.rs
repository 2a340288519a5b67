//! Tabular data: feature rows, the continuous target and its binary label.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const Y_COLUMN: &str = "__y";
pub const LABEL_COLUMN: &str = "__label";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self { feature_names, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64, label: u8) {
        debug_assert_eq!(x.len(), self.feature_names.len());
        self.x.push(x);
        self.y.push(y);
        self.labels.push(label);
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut out = Dataset::new(self.feature_names.clone());
        for &i in idx {
            out.push(self.x[i].clone(), self.y[i], self.labels[i]);
        }
        out
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.feature_names != self.feature_names {
            return Err(Error::SizeMismatch(format!(
                "feature columns differ: {:?} vs {:?}",
                self.feature_names, other.feature_names
            )));
        }
        self.x.extend(other.x.iter().cloned());
        self.y.extend(&other.y);
        self.labels.extend(&other.labels);
        Ok(())
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&l| f64::from(l)).sum::<f64>() / self.len() as f64
    }

    /// CSV with one column per feature followed by `__y` and `__label`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = self.feature_names.clone();
        header.push(Y_COLUMN.into());
        header.push(LABEL_COLUMN.into());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x[i].iter().map(|v| v.to_string()).collect();
            rec.push(self.y[i].to_string());
            rec.push(self.labels[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let y_col = header.iter().position(|h| h == Y_COLUMN);
        let l_col = header.iter().position(|h| h == LABEL_COLUMN);
        let (Some(y_col), Some(l_col)) = (y_col, l_col) else {
            return Err(Error::InvalidDataset(format!(
                "missing '{Y_COLUMN}' or '{LABEL_COLUMN}' column"
            )));
        };
        let feat_cols: Vec<usize> = (0..header.len()).filter(|&i| i != y_col && i != l_col).collect();
        let mut ds = Dataset::new(feat_cols.iter().map(|&i| header[i].clone()).collect());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidDataset(format!("row {}: column '{}' is not numeric", row + 1, header[i])))
            };
            let x = feat_cols.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
            let label = num(l_col)?;
            if label != 0.0 && label != 1.0 {
                return Err(Error::InvalidDataset(format!("row {}: label must be 0 or 1", row + 1)));
            }
            ds.push(x, num(y_col)?, label as u8);
        }
        Ok(ds)
    }
}
