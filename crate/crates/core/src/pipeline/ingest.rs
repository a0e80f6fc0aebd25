use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sensor columns of a recording CSV, in file order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Accel1,
    Audio,
    Accel2,
    Accel3,
}

pub const SENSOR_COLUMNS: usize = 4;

impl Channel {
    pub const ALL: [Channel; SENSOR_COLUMNS] =
        [Channel::Accel1, Channel::Audio, Channel::Accel2, Channel::Accel3];

    pub fn column(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Accel1 => "accel1",
            Channel::Audio => "audio",
            Channel::Accel2 => "accel2",
            Channel::Accel3 => "accel3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown channel '{s}' (accel1, audio, accel2, accel3)")))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn ingest_err(path: &Path, message: String) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        message,
    }
}

/// Reads one sensor column from a recording CSV.
///
/// Rows need at least the four sensor columns; anything after them is
/// ignored. A first row whose sensor cells are not all numeric is taken to
/// be a header. Row numbers in errors are 1-based file lines.
pub fn ingest_recording(path: &Path, channel: Channel) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => ingest_err(path, format!("{other:?}")),
        })?;

    let mut samples = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(ingest_err(path, format!("row {}: {e}", row + 1))),
        }
        row += 1;
        if record.len() < SENSOR_COLUMNS {
            return Err(ingest_err(
                path,
                format!(
                    "row {row}: expected at least {SENSOR_COLUMNS} columns (accel1, audio, accel2, accel3), found {}",
                    record.len()
                ),
            ));
        }
        let parsed: Vec<Option<f64>> = record
            .iter()
            .take(SENSOR_COLUMNS)
            .map(|cell| cell.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if row == 1 && parsed.iter().all(Option::is_none) {
            continue;
        }
        match parsed[channel.column()] {
            Some(v) => samples.push(v),
            None => {
                return Err(ingest_err(
                    path,
                    format!(
                        "row {row}: non-numeric {} cell '{}'",
                        channel,
                        &record[channel.column()]
                    ),
                ))
            }
        }
    }
    if samples.is_empty() {
        return Err(ingest_err(path, "no sample rows".into()));
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn selects_columns() {
        let f = file("1,2,3,4\n5,6,7,8\n");
        assert_eq!(ingest_recording(f.path(), Channel::Audio).unwrap(), vec![2.0, 6.0]);
        assert_eq!(ingest_recording(f.path(), Channel::Accel3).unwrap(), vec![4.0, 8.0]);
    }

    #[test]
    fn ignores_extra_columns_and_header() {
        let f = file("accel1,audio,accel2,accel3,temp,speed\n0.5,-1e-3,2,3,40.1,1800\n1.5,0,0,0,40.2,1801\n");
        assert_eq!(ingest_recording(f.path(), Channel::Accel1).unwrap(), vec![0.5, 1.5]);
        assert_eq!(ingest_recording(f.path(), Channel::Audio).unwrap(), vec![-1e-3, 0.0]);
    }

    #[test]
    fn too_few_columns() {
        let f = file("1,2,3\n");
        let err = ingest_recording(f.path(), Channel::Accel1).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("found 3"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let f = file("a,b,c,d\n1,2,3,4\n1,x,3,4\n");
        let err = ingest_recording(f.path(), Channel::Audio).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        // Only the first row may be a header.
        let f = file("1,2,3,4\na,b,c,d\n");
        assert!(ingest_recording(f.path(), Channel::Accel1).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = ingest_recording(Path::new("/nonexistent/x.csv"), Channel::Audio).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err:?}");
    }

    #[test]
    fn channel_names() {
        for c in Channel::ALL {
            assert_eq!(Channel::parse(c.name()).unwrap(), c);
        }
        assert!(Channel::parse("temperature").is_err());
    }
}
