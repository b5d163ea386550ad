//! Subject-level CSV ingestion and emission.
//!
//! Expected header: `subtrial,treatment,baseline,y_continuous,y_binary`.
//! Subtrial labels may be arbitrary strings; they are mapped to contiguous
//! 1-based indices in order of first appearance and the mapping is echoed
//! into the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

use augbin_core::models::SubjectRecord;

use crate::errors::{CliError, CliResult};

pub const DATASET_HEADER: [&str; 5] =
    ["subtrial", "treatment", "baseline", "y_continuous", "y_binary"];

/// Parsed records plus the label-to-index mapping.
#[derive(Debug)]
pub struct LoadedDataset {
    pub records: Vec<SubjectRecord>,
    /// Subtrial label for each contiguous index, position 0 = subtrial 1.
    pub labels: Vec<String>,
}

pub fn read_dataset(path: &Path) -> CliResult<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::malformed(format!("{}: {e}", path.display())))?;

    // Structural checks fail fast.
    let headers = reader
        .headers()
        .map_err(|e| CliError::malformed(format!("{}: {e}", path.display())))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != DATASET_HEADER {
        return Err(CliError::malformed(format!(
            "{}: header must be `{}`, got `{}`",
            path.display(),
            DATASET_HEADER.join(","),
            got.join(",")
        )));
    }

    let mut labels: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut records = Vec::new();
    let mut problems: Vec<String> = Vec::new();

    for (i, row) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let row = row.map_err(|e| CliError::malformed(format!("row {line}: {e}")))?;
        if row.len() != 5 {
            return Err(CliError::malformed(format!(
                "row {line}: expected 5 fields, got {}",
                row.len()
            )));
        }
        let mut fail = |field: &str, msg: String| {
            problems.push(format!("row {line}, {field}: {msg}"));
        };

        let label = row[0].to_string();
        if label.is_empty() {
            fail("subtrial", "label must be non-empty".into());
        }
        let treatment = match row[1].parse::<i64>() {
            Ok(0) => 0u8,
            Ok(1) => 1u8,
            Ok(v) => {
                fail("treatment", format!("must be 0 or 1, got {v}"));
                0
            }
            Err(_) => {
                fail("treatment", format!("must be 0 or 1, got `{}`", &row[1]));
                0
            }
        };
        let baseline = match row[2].parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => v,
            Ok(v) => {
                fail("baseline", format!("baseline must be positive, got {v}"));
                1.0
            }
            Err(_) => {
                fail("baseline", format!("not a number: `{}`", &row[2]));
                1.0
            }
        };
        let y_continuous = match row[3].parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            Ok(v) => {
                fail("y_continuous", format!("must be finite, got {v}"));
                0.0
            }
            Err(_) => {
                fail("y_continuous", format!("not a number: `{}`", &row[3]));
                0.0
            }
        };
        let y_binary = match row[4].parse::<i64>() {
            Ok(0) => 0u8,
            Ok(1) => 1u8,
            Ok(v) => {
                fail("y_binary", format!("must be 0 or 1, got {v}"));
                0
            }
            Err(_) => {
                fail("y_binary", format!("must be 0 or 1, got `{}`", &row[4]));
                0
            }
        };

        let next = labels.len();
        let subtrial = *index.entry(label.clone()).or_insert_with(|| {
            labels.push(label);
            next
        }) + 1;
        records.push(SubjectRecord {
            subtrial,
            treatment,
            baseline,
            y_continuous,
            y_binary,
        });
    }

    if !problems.is_empty() {
        let shown = problems.len().min(20);
        let mut msg = format!(
            "{}: {} invalid value(s):\n  {}",
            path.display(),
            problems.len(),
            problems[..shown].join("\n  ")
        );
        if problems.len() > shown {
            msg.push_str("\n  ...");
        }
        return Err(CliError::malformed(msg));
    }
    if records.is_empty() {
        return Err(CliError::malformed(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(LoadedDataset { records, labels })
}

#[cfg(test)]
pub fn write_dataset(path: &Path, records: &[SubjectRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(DATASET_HEADER)?;
    for r in records {
        w.write_record(&[
            r.subtrial.to_string(),
            r.treatment.to_string(),
            format!("{}", r.baseline),
            format!("{}", r.y_continuous),
            r.y_binary.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn golden_five_row_file() {
        let f = write_tmp(
            "subtrial,treatment,baseline,y_continuous,y_binary\n\
             ra,0,1.5,2.99,0\n\
             ra,1,2.25,3.4,1\n\
             psa,0,0.5,1.2,0\n\
             psa,1,3.75,2.0,0\n\
             ra,1,1.0,-0.5,1\n",
        );
        let loaded = read_dataset(f.path()).unwrap();
        assert_eq!(loaded.labels, vec!["ra", "psa"]);
        assert_eq!(loaded.records.len(), 5);
        let r = &loaded.records[3];
        assert_eq!(
            (r.subtrial, r.treatment, r.baseline, r.y_continuous, r.y_binary),
            (2, 1, 3.75, 2.0, 0)
        );
        assert_eq!(loaded.records[4].y_continuous, -0.5);
    }

    #[test]
    fn zero_baseline_names_the_row() {
        let f = write_tmp(
            "subtrial,treatment,baseline,y_continuous,y_binary\n\
             1,0,1.5,2.99,0\n\
             1,1,0,3.4,0\n",
        );
        let err = read_dataset(f.path()).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("row 3"), "{}", err.message);
        assert!(err.message.contains("baseline must be positive"));
    }

    #[test]
    fn treatment_two_is_a_value_error() {
        let f = write_tmp(
            "subtrial,treatment,baseline,y_continuous,y_binary\n\
             1,2,1.5,2.99,0\n",
        );
        let err = read_dataset(f.path()).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("row 2"));
        assert!(err.message.contains("treatment"));
    }

    #[test]
    fn wrong_header_is_structural() {
        let f = write_tmp("subtrial,treatment,baseline,y_continuous,y_binary,extra\n1,0,1,0,0,9\n");
        let err = read_dataset(f.path()).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("header"));

        let f = write_tmp("subtrial,baseline,treatment,y_continuous,y_binary\n");
        assert!(read_dataset(f.path()).unwrap_err().message.contains("header"));
    }

    #[test]
    fn value_errors_are_batched() {
        let f = write_tmp(
            "subtrial,treatment,baseline,y_continuous,y_binary\n\
             1,0,-1,2.99,0\n\
             1,5,1.5,abc,0\n",
        );
        let err = read_dataset(f.path()).unwrap_err();
        assert!(err.message.contains("3 invalid value(s)"), "{}", err.message);
    }

    #[test]
    fn round_trip_preserves_records() {
        let f = write_tmp(
            "subtrial,treatment,baseline,y_continuous,y_binary\n\
             1,0,1.5,2.9900000000000002,0\n\
             2,1,0.1,-3.25,1\n",
        );
        let loaded = read_dataset(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_dataset(out.path(), &loaded.records).unwrap();
        let re = read_dataset(out.path()).unwrap();
        assert_eq!(loaded.records, re.records);
    }
}
