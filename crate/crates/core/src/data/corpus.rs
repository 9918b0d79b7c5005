use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// One labelled text; `label` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "jsonl" | "json" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn check_record(path: &Path, line: usize, rec: &CorpusRecord, classes: usize) -> Result<()> {
    if rec.text.trim().is_empty() {
        return Err(parse_error(path, line, "empty text"));
    }
    if rec.label == 0 || rec.label > classes {
        return Err(parse_error(
            path,
            line,
            format!("label {} outside 1..={classes}", rec.label),
        ));
    }
    Ok(())
}

/// Reads records in file order, validating labels against `num_classes`.
pub fn load_corpus(path: &Path, format: CorpusFormat, num_classes: usize) -> Result<Vec<CorpusRecord>> {
    let records = match format {
        CorpusFormat::Jsonl => {
            let text = fs::read_to_string(path)?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CorpusRecord = serde_json::from_str(line)
                    .map_err(|e| parse_error(path, i + 1, e.to_string()))?;
                check_record(path, i + 1, &rec, num_classes)?;
                out.push(rec);
            }
            out
        }
        CorpusFormat::Csv => {
            let mut reader = csv::Reader::from_path(path)?;
            let headers = reader.headers()?.clone();
            if headers.iter().collect::<Vec<_>>() != ["text", "label"] {
                return Err(parse_error(path, 1, "expected header `text,label`"));
            }
            let mut out = Vec::new();
            for (i, row) in reader.deserialize::<CorpusRecord>().enumerate() {
                // Header is line 1.
                let line = i + 2;
                let rec = row.map_err(|e| parse_error(path, line, e.to_string()))?;
                check_record(path, line, &rec, num_classes)?;
                out.push(rec);
            }
            out
        }
    };
    if records.is_empty() {
        return Err(domain(format!("{} holds no records", path.display())));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_jsonl() {
        let f = write("{\"text\": \"good movie\", \"label\": 2}\n", ".jsonl");
        let recs = load_corpus(f.path(), CorpusFormat::Jsonl, 2).unwrap();
        assert_eq!(
            recs,
            vec![CorpusRecord {
                text: "good movie".into(),
                label: 2
            }]
        );
    }

    #[test]
    fn rejects_zero_label_with_line_number() {
        let f = write(
            "{\"text\": \"a\", \"label\": 1}\n{\"text\": \"b\", \"label\": 0}\n",
            ".jsonl",
        );
        let err = load_corpus(f.path(), CorpusFormat::Jsonl, 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_malformed_json() {
        let f = write("{\"text\": \"a\", \"label\": 1}\nnot json\n", ".jsonl");
        let err = load_corpus(f.path(), CorpusFormat::Jsonl, 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn empty_file_is_a_domain_error() {
        let f = write("", ".jsonl");
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Jsonl, 2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn reads_csv_in_order() {
        let f = write("text,label\nfirst one,1\n\"second, quoted\",2\n", ".csv");
        let recs = load_corpus(f.path(), CorpusFormat::Csv, 2).unwrap();
        assert_eq!(recs[0].text, "first one");
        assert_eq!(recs[1].text, "second, quoted");
        let bad = write("text,label\nx,3\n", ".csv");
        assert!(matches!(
            load_corpus(bad.path(), CorpusFormat::Csv, 2),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(CorpusFormat::from_path(Path::new("a.csv")), Some(CorpusFormat::Csv));
        assert_eq!(CorpusFormat::from_path(Path::new("a.jsonl")), Some(CorpusFormat::Jsonl));
        assert_eq!(CorpusFormat::from_path(Path::new("a.txt")), None);
    }
}
