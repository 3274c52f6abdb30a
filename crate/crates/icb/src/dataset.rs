//! Where benchmark readings come from: a REDD low-frequency text file or the
//! deterministic synthetic generator.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use icb_core::record::parse_redd_line;
use icb_core::{Reading, RecordError, Synthetic};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Record { path: PathBuf, source: RecordError },
    #[error("{0}: dataset has no readings")]
    Empty(String),
}

/// A dataset description; loading it always yields the same readings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Dataset {
    /// REDD low-frequency channel file, `<timestamp> <watts>` per line.
    File { path: PathBuf },
    /// Synthetic appliance channel with the default profile.
    Synthetic { seed: u64, count: usize },
}

impl Dataset {
    /// Reads every reading, in source order.
    pub fn load(&self) -> Result<Vec<Reading>, DatasetError> {
        let readings = match self {
            Dataset::File { path } => read_redd_file(path)?,
            Dataset::Synthetic { seed, count } => Synthetic::new(*seed, *count).readings(),
        };
        if readings.is_empty() {
            return Err(DatasetError::Empty(self.to_string()));
        }
        Ok(readings)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dataset::File { path } => write!(f, "file:{}", path.display()),
            Dataset::Synthetic { seed, count } => write!(f, "synthetic:seed={seed},count={count}"),
        }
    }
}

/// Parses a REDD text stream. Blank lines are skipped; any other bad line
/// stops parsing with its 1-based line number.
pub fn read_redd(reader: impl BufRead) -> Result<Vec<Reading>, ReadError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(ReadError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_redd_line(&line, i + 1).map_err(ReadError::Record)?);
    }
    Ok(out)
}

#[derive(Debug)]
pub enum ReadError {
    Io(io::Error),
    Record(RecordError),
}

pub fn read_redd_file(path: &Path) -> Result<Vec<Reading>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    read_redd(BufReader::new(file)).map_err(|e| match e {
        ReadError::Io(source) => io_err(source),
        ReadError::Record(source) => DatasetError::Record {
            path: path.to_path_buf(),
            source,
        },
    })
}

/// Writes readings as REDD text. Powers use the shortest decimal form that
/// parses back to the same double.
pub fn write_redd(readings: &[Reading], writer: impl Write) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    for r in readings {
        writeln!(w, "{} {:?}", r.timestamp(), r.power())?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redd_text_roundtrip() {
        let readings = Synthetic::new(7, 500).readings();
        let mut text = Vec::new();
        write_redd(&readings, &mut text).unwrap();
        assert_eq!(read_redd(&text[..]).unwrap(), readings);
    }

    #[test]
    fn shortest_float_forms() {
        let rs = [
            Reading::new(1303132930, 245.0).unwrap(),
            Reading::new(0, 0.0).unwrap(),
            Reading::new(5, 0.1).unwrap(),
            Reading::new(6, 1e-7).unwrap(),
            Reading::new(7, -0.0).unwrap(),
        ];
        let mut text = Vec::new();
        write_redd(&rs, &mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert!(text.starts_with("1303132930 245.0\n0 0.0\n5 0.1\n"), "{text}");
        assert_eq!(read_redd(text.as_bytes()).unwrap(), rs);
    }

    #[test]
    fn bad_line_is_positioned() {
        let text = "1 2.0\n\n3 4.5\n12ab 5.0\n";
        match read_redd(text.as_bytes()) {
            Err(ReadError::Record(RecordError::Malformed { line })) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match read_redd("1 2\n2 NaN\n".as_bytes()) {
            Err(ReadError::Record(RecordError::NonFinite { line })) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn synthetic_loads_count() {
        let d = Dataset::Synthetic { seed: 7, count: 1234 };
        assert_eq!(d.load().unwrap().len(), 1234);
        assert!(matches!(
            Dataset::Synthetic { seed: 7, count: 0 }.load(),
            Err(DatasetError::Empty(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let d = Dataset::File {
            path: "/nonexistent/redd.dat".into(),
        };
        assert!(matches!(d.load(), Err(DatasetError::Io { .. })));
    }

    #[test]
    fn config_form() {
        let d = Dataset::Synthetic { seed: 1, count: 2 };
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"source":"synthetic","seed":1,"count":2}"#);
        assert_eq!(serde_json::from_str::<Dataset>(&json).unwrap(), d);
    }
}
