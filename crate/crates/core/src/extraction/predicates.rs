use super::entities::san_tokens;
use super::{ExtractionError, PredicateMention, Span, VerbLexicon};
use regex::Regex;
use std::sync::LazyLock;

static WORD_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z]+(?:['’][A-Za-z]+)?").expect("word pattern compiles"));

// A verb form right after one of these is read as a noun ("the move", "his play").
const NOUN_MARKERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "his", "her", "its", "their", "my", "your", "our", "every", "each",
    "another", "whose",
];

/// Finds every verb occurrence in `text` that the lexicon knows.
///
/// Tokens inside SAN moves never count, nor do forms directly preceded by a
/// determiner or possessive.
pub fn find_predicates(text: &str, lexicon: &VerbLexicon) -> Result<Vec<PredicateMention>, ExtractionError> {
    if lexicon.is_empty() {
        return Err(ExtractionError::LexiconUnavailable("lexicon holds no lemmas".into()));
    }
    let moves: Vec<_> = san_tokens(text).into_iter().map(|(r, _)| r).collect();
    let mut previous: Option<&str> = None;
    let mut found = Vec::new();
    for word in WORD_RE.find_iter(text) {
        let inside_move = moves.iter().any(|r| r.start < word.end() && word.start() < r.end);
        let noun_context = previous.is_some_and(|p| {
            let p = p.to_lowercase();
            NOUN_MARKERS.contains(&p.as_str()) || p.ends_with("'s") || p.ends_with("’s")
        });
        previous = Some(word.as_str());
        if inside_move || noun_context {
            continue;
        }
        if let Some(lemma) = lexicon.lemma_of(word.as_str()) {
            found.push(PredicateMention {
                span: Span::from_bytes(text, word.range()),
                lemma: lemma.to_string(),
                surface: word.as_str().to_string(),
            });
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemmas(text: &str) -> Vec<String> {
        find_predicates(text, &VerbLexicon::bundled())
            .unwrap()
            .into_iter()
            .map(|p| p.lemma)
            .collect()
    }

    #[test]
    fn capture_sentence() {
        let found = find_predicates("White captures Bishop with his Rook", &VerbLexicon::bundled()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].lemma, "capture");
        assert_eq!(found[0].surface, "captures");
        assert_eq!(found[0].span, Span::new(6, 14));
    }

    #[test]
    fn two_plays() {
        let text = "it has become usual for White not to play c4 at once, but to play Nf3 as a preliminary";
        let plays = lemmas(text).into_iter().filter(|l| l == "play").count();
        assert_eq!(plays, 2);
    }

    #[test]
    fn bare_moves_have_no_predicates() {
        assert!(lemmas("e4 e5 Nf3").is_empty());
    }

    #[test]
    fn nouns_after_determiners_are_skipped() {
        assert_eq!(lemmas("It is Black's move, and we will suppose he wishes to play e5"), vec!["suppose", "wish", "play"]);
        assert_eq!(lemmas("the move was a check"), Vec::<String>::new());
    }

    #[test]
    fn empty_lexicon_is_unavailable() {
        assert!(matches!(
            find_predicates("play", &VerbLexicon::default()),
            Err(ExtractionError::LexiconUnavailable(_))
        ));
    }
}
