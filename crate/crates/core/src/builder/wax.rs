use std::io::Read;
use std::path::Path;

use super::BuilderError;
use crate::model::{AssociationRecord, Relation};

pub fn load_wax(path: &Path) -> Result<Vec<AssociationRecord>, BuilderError> {
    let file = std::fs::File::open(path)
        .map_err(|source| BuilderError::Io { path: path.display().to_string(), source })?;
    read_wax(file, &path.display().to_string())
}

/// Parse association records from CSV with header
/// `cue,association,relation,explanation`. Words are lowercased; unknown
/// relation labels become [`Relation::Unknown`].
pub fn read_wax<R: Read>(reader: R, source_name: &str) -> Result<Vec<AssociationRecord>, BuilderError> {
    let parse_err = |line: u64, reason: String| BuilderError::Parse {
        source_name: source_name.to_string(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(1, format!("missing `{name}` column")))
    };
    let (cue, assoc) = (col("cue")?, col("association")?);
    let relation = headers.iter().position(|h| h.eq_ignore_ascii_case("relation"));
    let explanation = headers.iter().position(|h| h.eq_ignore_ascii_case("explanation"));

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            parse_err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: Option<usize>| i.and_then(|i| record.get(i)).unwrap_or("");
        let rec = AssociationRecord {
            cue: get(Some(cue)).to_lowercase(),
            association: get(Some(assoc)).to_lowercase(),
            relation: relation.map_or(Relation::Unknown, |_| Relation::parse_label(get(relation))),
            explanation: get(explanation).to_string(),
        };
        if rec.cue.is_empty() || rec.association.is_empty() {
            return Err(parse_err(line, "empty cue or association".into()));
        }
        out.push(rec);
    }
    Ok(out)
}
