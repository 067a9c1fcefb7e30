use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::{BuildWarning, BuilderError};
use crate::model::{PosTag, WordEntry};

/// Case-insensitive AoA lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, WordEntry>,
}

impl Lexicon {
    pub fn from_entries(entries: impl IntoIterator<Item = WordEntry>) -> Self {
        let mut lex = Lexicon::default();
        for e in entries {
            lex.insert(e);
        }
        lex
    }

    /// Insert, keeping the lower AoA on a clash. Returns true on a clash.
    pub fn insert(&mut self, entry: WordEntry) -> bool {
        let key = entry.lemma.to_lowercase();
        match self.entries.get_mut(&key) {
            Some(existing) => {
                if entry.aoa_years < existing.aoa_years {
                    *existing = entry;
                }
                true
            }
            None => {
                self.entries.insert(key, entry);
                false
            }
        }
    }

    pub fn get(&self, word: &str) -> Option<&WordEntry> {
        self.entries.get(&word.trim().to_lowercase())
    }

    pub fn aoa(&self, word: &str) -> Option<f64> {
        self.get(word).map(|e| e.aoa_years)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lemma order.
    pub fn entries(&self) -> impl Iterator<Item = &WordEntry> {
        self.entries.values()
    }
}

/// Larger of the two words' AoA.
pub fn pair_aoa(w1: &str, w2: &str, lexicon: &Lexicon) -> Result<f64, BuilderError> {
    let a = lexicon.aoa(w1).ok_or_else(|| BuilderError::UnknownAoa(w1.to_string()))?;
    let b = lexicon.aoa(w2).ok_or_else(|| BuilderError::UnknownAoa(w2.to_string()))?;
    Ok(a.max(b))
}

pub fn load_aoa_lexicon(path: &Path) -> Result<(Lexicon, Vec<BuildWarning>), BuilderError> {
    let file = std::fs::File::open(path)
        .map_err(|source| BuilderError::Io { path: path.display().to_string(), source })?;
    read_aoa_lexicon(file, &path.display().to_string())
}

/// Parse a lexicon CSV with header `word,aoa_years` and optional
/// `morph_count`, `pos` and `definition` columns.
pub fn read_aoa_lexicon<R: Read>(reader: R, source_name: &str) -> Result<(Lexicon, Vec<BuildWarning>), BuilderError> {
    let parse_err = |line: u64, reason: String| BuilderError::Parse {
        source_name: source_name.to_string(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let word_col = col("word").ok_or_else(|| parse_err(1, "missing `word` column".into()))?;
    let aoa_col = col("aoa_years").ok_or_else(|| parse_err(1, "missing `aoa_years` column".into()))?;
    let morph_col = col("morph_count");
    let pos_col = col("pos");
    let def_col = col("definition");

    let mut lex = Lexicon::default();
    let mut warnings = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: Option<usize>| i.and_then(|i| record.get(i)).filter(|s| !s.is_empty());
        let word = field(Some(word_col)).ok_or_else(|| parse_err(line, "empty word".into()))?;
        let aoa_text = field(Some(aoa_col)).ok_or_else(|| parse_err(line, "empty aoa_years".into()))?;
        let aoa: f64 = aoa_text
            .parse()
            .map_err(|_| parse_err(line, format!("aoa_years {aoa_text:?} is not a number")))?;
        let mut entry = WordEntry::new(word, aoa).map_err(|e| parse_err(line, e.to_string()))?;
        if let Some(m) = field(morph_col) {
            entry.morph_feature_count =
                Some(m.parse().map_err(|_| parse_err(line, format!("morph_count {m:?} is not a count")))?);
        }
        if let Some(p) = field(pos_col) {
            entry.pos_hint = Some(p.parse::<PosTag>().map_err(|e| parse_err(line, e.to_string()))?);
        }
        entry.definition = field(def_col).map(str::to_owned);
        let lemma = entry.lemma.clone();
        if lex.insert(entry) {
            let kept = lex.aoa(&lemma).expect("just inserted");
            warnings.push(BuildWarning::DuplicateLemma { lemma, kept_aoa: kept.to_string() });
        }
    }
    for w in &warnings {
        log::warn!("{source_name}: {w}");
    }
    Ok((lex, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(Lexicon, Vec<BuildWarning>), BuilderError> {
        read_aoa_lexicon(text.as_bytes(), "lex.csv")
    }

    #[test]
    fn direct_parse_and_case_fold() {
        let (lex, w) = parse("word,aoa_years\nDog,4.0\ncat,5.5\n").unwrap();
        assert!(w.is_empty());
        assert_eq!(lex.get("dog").unwrap().aoa_years, 4.0);
        assert_eq!(lex.aoa("DOG"), Some(4.0));
        assert_eq!(lex.len(), 2);
    }

    #[test]
    fn duplicate_keeps_lowest() {
        let (lex, w) = parse("word,aoa_years\ndog,6.0\nDog,4.0\ndog,7.0\n").unwrap();
        assert_eq!(lex.aoa("dog"), Some(4.0));
        assert_eq!(w.len(), 2);
        assert!(matches!(&w[0], BuildWarning::DuplicateLemma { lemma, .. } if lemma == "dog"));
    }

    #[test]
    fn optional_columns() {
        let (lex, _) =
            parse("word,aoa_years,morph_count,pos,definition\nquickly,9,3,ADV,\"in a fast way\"\nrun,4,,,\n")
                .unwrap();
        let q = lex.get("quickly").unwrap();
        assert_eq!(q.morph_feature_count, Some(3));
        assert_eq!(q.pos_hint, Some(PosTag::Adv));
        assert_eq!(q.definition.as_deref(), Some("in a fast way"));
        assert_eq!(lex.get("run").unwrap().definition, None);
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = parse("word,aoa_years\ndog,4\ncat,old\n").unwrap_err();
        assert!(matches!(err, BuilderError::Parse { line: 3, .. }), "{err}");
        let err = parse("word,aoa_years\ndog,-1\n").unwrap_err();
        assert!(matches!(err, BuilderError::Parse { line: 2, .. }));
        assert!(parse("lemma,aoa\ndog,4\n").is_err());
    }

    #[test]
    fn pair_aoa_is_max() {
        let (lex, _) = parse("word,aoa_years\na,6\nb,9\nc,7\n").unwrap();
        assert_eq!(pair_aoa("a", "b", &lex).unwrap(), 9.0);
        assert_eq!(pair_aoa("b", "a", &lex).unwrap(), 9.0);
        assert_eq!(pair_aoa("c", "c", &lex).unwrap(), 7.0);
        assert!(matches!(pair_aoa("a", "zzz", &lex), Err(BuilderError::UnknownAoa(w)) if w == "zzz"));
    }
}
