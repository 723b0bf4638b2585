use super::{AnnotationRecord, CorpusError};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text)
}

/// Parses line-delimited records; blank lines are skipped, line numbers are
/// 1-based.
pub fn parse_corpus(text: &str) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let violation = |message: String| CorpusError::SchemaViolation { line: i + 1, message };
        let record: AnnotationRecord = serde_json::from_str(line).map_err(|e| violation(e.to_string()))?;
        record.validate().map_err(violation)?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_corpus(records: &[AnnotationRecord], out: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes the records to a sibling temporary file and renames it into place,
/// so readers never observe a partial file.
pub fn save_corpus(records: &[AnnotationRecord], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io = |source| CorpusError::IoFailure {
        path: path.to_path_buf(),
        source,
    };
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut out = BufWriter::new(fs::File::create(&tmp)?);
        write_corpus(records, &mut out)?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}
