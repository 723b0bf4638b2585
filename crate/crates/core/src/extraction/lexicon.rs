use super::ExtractionError;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

const BUNDLED: &str = include_str!("../../data/verbs.txt");

/// Verb inventory: lemmas, their inflected forms and synonym lemmas.
///
/// File format, one lemma per line:
///
/// ```text
/// lemma<TAB>form1,form2,...[<TAB>synonym1,synonym2,...]
/// ```
///
/// Blank lines and lines starting with `#` are ignored. The lemma itself is
/// always one of its forms.
#[derive(Debug, Clone, Default)]
pub struct VerbLexicon {
    lemmas: BTreeMap<String, LemmaEntry>,
    forms: HashMap<String, String>,
}

#[derive(Debug, Clone, Default)]
struct LemmaEntry {
    forms: Vec<String>,
    synonyms: BTreeSet<String>,
}

impl VerbLexicon {
    /// The lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled lexicon is well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExtractionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExtractionError::LexiconUnavailable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ExtractionError> {
        let mut lexicon = VerbLexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let lemma = cols.next().unwrap_or_default().trim().to_lowercase();
            if lemma.is_empty() || lemma.contains(char::is_whitespace) {
                return Err(ExtractionError::LexiconFormat {
                    line: i + 1,
                    message: format!("invalid lemma {lemma:?}"),
                });
            }
            let list = |col: Option<&str>| -> Vec<String> {
                col.unwrap_or_default()
                    .split(',')
                    .map(|s| s.trim().to_lowercase())
                    .filter(|s| !s.is_empty())
                    .collect()
            };
            let forms = list(cols.next());
            let synonyms = list(cols.next());
            if cols.next().is_some() {
                return Err(ExtractionError::LexiconFormat {
                    line: i + 1,
                    message: "too many columns".into(),
                });
            }
            lexicon.insert(&lemma, forms, synonyms);
        }
        if lexicon.lemmas.is_empty() {
            return Err(ExtractionError::LexiconUnavailable("lexicon holds no lemmas".into()));
        }
        Ok(lexicon)
    }

    fn insert(&mut self, lemma: &str, forms: Vec<String>, synonyms: Vec<String>) {
        let entry = self.lemmas.entry(lemma.to_string()).or_default();
        for form in std::iter::once(lemma.to_string()).chain(forms) {
            if !entry.forms.contains(&form) {
                entry.forms.push(form.clone());
            }
            self.forms.entry(form).or_insert_with(|| lemma.to_string());
        }
        entry.synonyms.extend(synonyms.into_iter().filter(|s| s != lemma));
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    /// Lemma for an inflected form (case-insensitive).
    pub fn lemma_of(&self, form: &str) -> Option<&str> {
        self.forms.get(&form.to_lowercase()).map(String::as_str)
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.lemmas.contains_key(lemma)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.lemmas.keys().map(String::as_str)
    }

    /// True when either lemma lists the other as a synonym.
    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        let listed = |x: &str, y: &str| self.lemmas.get(x).is_some_and(|e| e.synonyms.contains(y));
        a != b && (listed(a, b) || listed(b, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_has_chess_verbs_without_auxiliaries() {
        let lex = VerbLexicon::bundled();
        assert_eq!(lex.lemma_of("plays"), Some("play"));
        assert_eq!(lex.lemma_of("Captures"), Some("capture"));
        assert_eq!(lex.lemma_of("took"), Some("take"));
        for aux in ["will", "may", "is", "has", "can", "would"] {
            assert_eq!(lex.lemma_of(aux), None, "{aux}");
        }
        assert!(lex.are_synonyms("attack", "assault"));
        assert!(lex.are_synonyms("assault", "attack"));
        assert!(!lex.are_synonyms("attack", "defend"));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(VerbLexicon::parse("# only comments\n"), Err(ExtractionError::LexiconUnavailable(_))));
        assert!(matches!(
            VerbLexicon::parse("play\tplays\tmove\textra\n"),
            Err(ExtractionError::LexiconFormat { line: 1, .. })
        ));
        assert!(matches!(VerbLexicon::load("/nonexistent/verbs.txt"), Err(ExtractionError::LexiconUnavailable(_))));
    }

    #[test]
    fn lemma_without_forms_matches_itself() {
        let lex = VerbLexicon::parse("castle\n").unwrap();
        assert_eq!(lex.lemma_of("castle"), Some("castle"));
        assert_eq!(lex.len(), 1);
    }
}
