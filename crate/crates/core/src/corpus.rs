//! JSON-Lines corpus files: one [`QAExample`] object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::QAExample;

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<QAExample>> {
    let file = File::open(path.as_ref())?;
    parse_jsonl(BufReader::new(file))
}

/// Parses a JSONL stream, skipping blank lines. Errors carry the 1-based line.
pub fn parse_jsonl(reader: impl BufRead) -> Result<Vec<QAExample>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let example = serde_json::from_str(&line)
            .map_err(|e| Error::invalid(format!("line {}: {e}", idx + 1)))?;
        out.push(example);
    }
    Ok(out)
}

pub fn write_jsonl(path: impl AsRef<Path>, examples: &[QAExample]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path.as_ref())?);
    for example in examples {
        serde_json::to_writer(&mut writer, example)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines_and_reports_bad_line_number() {
        let text = "{\"question\":\"q\",\"reference_answer\":\"a\",\"gold_labels\":[\"neurology\"]}\n\n{\"question\":\"\",\"reference_answer\":\"a\",\"gold_labels\":[\"neurology\"]}\n";
        let err = parse_jsonl(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let ok = parse_jsonl(text.lines().next().unwrap().as_bytes()).unwrap();
        assert_eq!(ok.len(), 1);
    }
}
