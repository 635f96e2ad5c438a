//! Grammar parsers for premise and rule sentences.
//!
//! The surface grammar is deliberately rigid:
//!
//! ```text
//! premise ::= ENTITY "is" ATTRIBUTE
//! rule    ::= "If a person is" ATTRIBUTE ["and" ATTRIBUTE]
//!             "then this person is" ATTRIBUTE
//! ```
//!
//! A single trailing period and surrounding whitespace are tolerated on both
//! forms. Anything else — extra words, a third antecedent, a miscased
//! keyword — is an error carrying the byte offset where parsing failed, so
//! dataset validation can point at the exact spot in a malformed document.

use thiserror::Error;

use super::{Attribute, Entity, Fact, Rule};

/// A sentence failed to parse. `position` is a byte offset into `text`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed premise at byte {position}: {reason} (in {text:?})")]
    MalformedPremise { text: String, position: usize, reason: String },
    #[error("malformed rule at byte {position}: {reason} (in {text:?})")]
    MalformedRule { text: String, position: usize, reason: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::MalformedPremise { position, .. } => *position,
            ParseError::MalformedRule { position, .. } => *position,
        }
    }
}

/// Surface irregularities the rule parser normalized away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuleParseFlags {
    /// The sentence repeated an antecedent ("creative and creative").
    pub duplicate_antecedents: bool,
    /// The parsed rule's consequent repeats an antecedent.
    pub tautology: bool,
}

/// A word plus its byte offset in the original sentence.
struct Token<'a> {
    text: &'a str,
    start: usize,
}

/// Splits on whitespace, stripping at most one trailing period from the
/// sentence. `end` is the offset just past the last content character, where
/// "missing word" errors should point.
struct Words<'a> {
    tokens: Vec<Token<'a>>,
    end: usize,
}

fn tokenize(text: &str) -> Words<'_> {
    let trimmed_end = text.trim_end();
    let body = trimmed_end.strip_suffix('.').unwrap_or(trimmed_end);
    let mut tokens = Vec::new();
    let mut offset = 0;
    for piece in body.split_whitespace() {
        // split_whitespace loses offsets; recover them by searching forward.
        let start = body[offset..].find(piece).expect("piece came from body") + offset;
        offset = start + piece.len();
        tokens.push(Token { text: piece, start });
    }
    Words { tokens, end: body.len() }
}

/// Token stream over one rule sentence; every failure becomes a
/// `MalformedRule` anchored to the offending byte.
struct RuleCursor<'a> {
    text: &'a str,
    words: Words<'a>,
    pos: usize,
}

impl<'a> RuleCursor<'a> {
    fn err(&self, position: usize, reason: impl Into<String>) -> ParseError {
        ParseError::MalformedRule {
            text: self.text.to_string(),
            position,
            reason: reason.into(),
        }
    }

    fn expect(&mut self, want: &str) -> Result<(), ParseError> {
        match self.words.tokens.get(self.pos) {
            Some(tok) if tok.text == want => {}
            Some(tok) => return Err(self.err(tok.start, format!("expected {want:?}"))),
            None => return Err(self.err(self.words.end, format!("expected {want:?}"))),
        }
        self.pos += 1;
        Ok(())
    }

    fn attribute(&mut self) -> Result<(Attribute, usize), ParseError> {
        let (text, start) = match self.words.tokens.get(self.pos) {
            Some(tok) => (tok.text, tok.start),
            None => return Err(self.err(self.words.end, "expected an attribute")),
        };
        let attr = Attribute::new(text)
            .map_err(|_| self.err(start, "expected a lowercase attribute"))?;
        self.pos += 1;
        Ok((attr, start))
    }

    fn peek_is(&self, word: &str) -> bool {
        self.words.tokens.get(self.pos).map(|t| t.text) == Some(word)
    }
}

/// Parses `ENTITY "is" ATTRIBUTE` with an optional trailing period.
pub fn parse_premise(text: &str) -> Result<Fact, ParseError> {
    let err = |position: usize, reason: &str| ParseError::MalformedPremise {
        text: text.to_string(),
        position,
        reason: reason.to_string(),
    };
    let words = tokenize(text);
    let mut iter = words.tokens.iter();

    let entity_tok = iter.next().ok_or_else(|| err(words.end, "expected an entity name"))?;
    let entity = Entity::new(entity_tok.text)
        .map_err(|_| err(entity_tok.start, "expected a capitalized entity name"))?;

    let is_tok = iter.next().ok_or_else(|| err(words.end, "expected \"is\""))?;
    if is_tok.text != "is" {
        return Err(err(is_tok.start, "expected \"is\""));
    }

    let attr_tok = iter.next().ok_or_else(|| err(words.end, "expected an attribute"))?;
    let attribute = Attribute::new(attr_tok.text)
        .map_err(|_| err(attr_tok.start, "expected a lowercase attribute"))?;

    if let Some(extra) = iter.next() {
        return Err(err(extra.start, "unexpected trailing words"));
    }
    Ok(Fact::new(entity, attribute))
}

/// Parses a rule sentence. Duplicate antecedents are collapsed silently; use
/// [`parse_rule_detailed`] when the caller needs to know.
pub fn parse_rule(text: &str) -> Result<Rule, ParseError> {
    parse_rule_detailed(text).map(|(rule, _)| rule)
}

/// Parses a rule sentence and reports which normalizations applied.
pub fn parse_rule_detailed(text: &str) -> Result<(Rule, RuleParseFlags), ParseError> {
    let mut cur = RuleCursor { text, words: tokenize(text), pos: 0 };

    for word in ["If", "a", "person", "is"] {
        cur.expect(word)?;
    }
    let (first, first_at) = cur.attribute()?;
    let mut surface = vec![first];
    while cur.peek_is("and") {
        cur.pos += 1;
        let (attr, _) = cur.attribute()?;
        surface.push(attr);
    }
    for word in ["then", "this", "person", "is"] {
        cur.expect(word)?;
    }
    let (consequent, _) = cur.attribute()?;
    if let Some(extra) = cur.words.tokens.get(cur.pos) {
        return Err(cur.err(extra.start, "unexpected trailing words"));
    }

    // Three or more *surface* antecedents are out of grammar even when they
    // would collapse to fewer distinct attributes.
    if surface.len() > 2 {
        return Err(cur.err(first_at, "more than two antecedents"));
    }
    let surface_len = surface.len();
    let rule = Rule::new(surface, consequent)
        .map_err(|e| cur.err(first_at, e.to_string()))?;
    let flags = RuleParseFlags {
        duplicate_antecedents: rule.antecedents().len() < surface_len,
        tautology: rule.is_tautology(),
    };
    Ok((rule, flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn premise_round_trip() {
        let f = parse_premise("Anne is excited").unwrap();
        assert_eq!(f.to_string(), "Anne is excited");
        // Trailing period and padding are tolerated but not re-emitted.
        let g = parse_premise("  Anne is excited. ").unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn premise_errors_carry_positions() {
        let e = parse_premise("anne is excited").unwrap_err();
        assert_eq!(e.position(), 0);
        let e = parse_premise("Anne was excited").unwrap_err();
        assert_eq!(e.position(), 5);
        let e = parse_premise("Anne is Excited").unwrap_err();
        assert_eq!(e.position(), 8);
        let e = parse_premise("Anne is excited indeed").unwrap_err();
        assert_eq!(e.position(), 16);
        let e = parse_premise("Anne is").unwrap_err();
        assert_eq!(e.position(), "Anne is".len());
    }

    #[test]
    fn rule_round_trip_unary_and_binary() {
        for text in [
            "If a person is lazy then this person is beautiful.",
            "If a person is enthusiastic and happy then this person is lazy.",
        ] {
            let r = parse_rule(text).unwrap();
            assert_eq!(r.to_string(), text);
        }
    }

    #[test]
    fn rule_period_is_optional_when_parsing() {
        let with = parse_rule("If a person is lazy then this person is beautiful.").unwrap();
        let without = parse_rule("If a person is lazy then this person is beautiful").unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn rule_duplicate_antecedents_collapse_and_are_reported() {
        let (r, flags) =
            parse_rule_detailed("If a person is creative and creative then this person is shy.")
                .unwrap();
        assert_eq!(r.to_string(), "If a person is creative then this person is shy.");
        assert!(flags.duplicate_antecedents);
        assert!(!flags.tautology);
    }

    #[test]
    fn rule_tautology_is_parsed_but_flagged() {
        let (r, flags) =
            parse_rule_detailed("If a person is shy then this person is shy.").unwrap();
        assert!(r.is_tautology());
        assert!(flags.tautology);
    }

    #[test]
    fn rule_rejects_three_antecedents() {
        let e = parse_rule("If a person is a and b and c then this person is d.").unwrap_err();
        assert_eq!(e.position(), 15); // points at the antecedent list
    }

    #[test]
    fn rule_rejects_miscased_keywords() {
        assert!(parse_rule("if a person is lazy then this person is shy.").is_err());
        assert!(parse_rule("If a person is lazy then This person is shy.").is_err());
    }

    #[test]
    fn rule_rejects_extra_words() {
        let e = parse_rule("If a person is lazy then this person is shy always.").unwrap_err();
        assert!(matches!(e, ParseError::MalformedRule { .. }));
    }

    #[test]
    fn rule_missing_tail_points_past_content() {
        let text = "If a person is lazy then this person is";
        let e = parse_rule(text).unwrap_err();
        assert_eq!(e.position(), text.len());
    }
}
