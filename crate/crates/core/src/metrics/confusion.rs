use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Square count matrix, rows = true class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::shape("confusion matrix rows must form a square"));
        }
        Ok(Self {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::Range(format!(
                "label pair ({truth}, {predicted}) outside {} classes",
                self.classes
            )));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape(format!(
                "cannot add {}-class and {}-class confusion matrices",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// CSV grid with a header row of class codes and one row per true class.
    pub fn to_csv(&self, codes: &[&str]) -> Result<String> {
        if codes.len() != self.classes {
            return Err(Error::shape(format!(
                "{} class codes for a {}-class matrix",
                codes.len(),
                self.classes
            )));
        }
        let mut out = codes.join(",");
        out.push('\n');
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path, codes: &[&str]) -> Result<()> {
        std::fs::write(path, self.to_csv(codes)?).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |msg: String| Error::Ingest {
            path: path.to_path_buf(),
            message: msg,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let classes = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').count();
        let rows = lines
            .enumerate()
            .map(|(r, line)| {
                line.split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<u64>()
                            .map_err(|_| bad(format!("row {}: bad count '{c}'", r + 2)))
                    })
                    .collect::<Result<Vec<u64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != classes {
            return Err(bad(format!("{} rows for {classes} classes", rows.len())));
        }
        Self::from_rows(&rows).map_err(|e| bad(e.to_string()))
    }
}

/// Counts `(truth, prediction)` pairs.
pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::shape(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.record(t, p)?;
    }
    Ok(cm)
}
