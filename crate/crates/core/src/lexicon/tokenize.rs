use crate::lexicon::dictionary::CategoryDictionary;
use crate::lexicon::schema::FeatureSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Term,
    Latin,
    Url,
    Number,
    Punctuation,
    Other,
}

impl TokenClass {
    /// Classes counted as words (and therefore as exposure).
    pub fn is_word(self) -> bool {
        matches!(
            self,
            TokenClass::Term | TokenClass::Latin | TokenClass::Number | TokenClass::Other
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token<'a> {
    pub class: TokenClass,
    pub text: &'a str,
    /// Category rows hit by this token (dictionary terms and dictionary-listed latin words).
    pub categories: &'a [usize],
    /// Punctuation feature row, for punctuation tokens.
    pub punctuation: Option<usize>,
}

/// Greedy tokenizer: URLs, then latin runs, then numbers, then longest dictionary
/// match, then a single-character fallback. Whitespace separates and is dropped.
pub struct Tokenizer<'d> {
    schema: &'d FeatureSchema,
    dictionary: &'d CategoryDictionary,
}

impl<'d> Tokenizer<'d> {
    pub fn new(schema: &'d FeatureSchema, dictionary: &'d CategoryDictionary) -> Self {
        Self { schema, dictionary }
    }

    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<Token<'a>>
    where
        'd: 'a,
    {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let end_of = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let (start, ch) = chars[i];
            if ch.is_whitespace() {
                i += 1;
                continue;
            }

            if let Some(next) = url_end(&chars, i) {
                tokens.push(Token {
                    class: TokenClass::Url,
                    text: &text[start..end_of(next)],
                    categories: &[],
                    punctuation: None,
                });
                i = next;
                continue;
            }

            if is_latin_letter(ch) {
                let mut j = i + 1;
                while j < chars.len() && is_latin_letter(chars[j].1) {
                    j += 1;
                }
                let word = &text[start..end_of(j)];
                let categories = self
                    .dictionary
                    .categories(&word.to_lowercase())
                    .unwrap_or(&[]);
                tokens.push(Token {
                    class: TokenClass::Latin,
                    text: word,
                    categories,
                    punctuation: None,
                });
                i = j;
                continue;
            }

            if ch.is_ascii_digit() {
                let mut j = i + 1;
                while j < chars.len() {
                    let c = chars[j].1;
                    let decimal = (c == '.' || c == ',')
                        && chars.get(j + 1).is_some_and(|&(_, d)| d.is_ascii_digit());
                    if c.is_ascii_digit() || decimal {
                        j += 1;
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    class: TokenClass::Number,
                    text: &text[start..end_of(j)],
                    categories: &[],
                    punctuation: None,
                });
                i = j;
                continue;
            }

            let longest = self.dictionary.max_term_chars().min(chars.len() - i);
            let matched = (1..=longest).rev().find_map(|len| {
                let candidate = &text[start..end_of(i + len)];
                self.dictionary
                    .categories(candidate)
                    .map(|c| (len, candidate, c))
            });
            if let Some((len, term, categories)) = matched {
                tokens.push(Token {
                    class: TokenClass::Term,
                    text: term,
                    categories,
                    punctuation: None,
                });
                i += len;
                continue;
            }

            let text_of = &text[start..end_of(i + 1)];
            match self.schema.punctuation_class(ch) {
                Some(row) => tokens.push(Token {
                    class: TokenClass::Punctuation,
                    text: text_of,
                    categories: &[],
                    punctuation: Some(row),
                }),
                None => tokens.push(Token {
                    class: TokenClass::Other,
                    text: text_of,
                    categories: &[],
                    punctuation: None,
                }),
            }
            i += 1;
        }
        tokens
    }
}

fn is_latin_letter(ch: char) -> bool {
    ch.is_ascii_alphabetic() || (matches!(ch as u32, 0x00C0..=0x024F) && ch != '×' && ch != '÷')
}

/// End index (exclusive) of a `scheme://rest` run starting at `i`.
fn url_end(chars: &[(usize, char)], i: usize) -> Option<usize> {
    if !chars[i].1.is_ascii_alphabetic() {
        return None;
    }
    let mut j = i + 1;
    while j < chars.len() {
        let c = chars[j].1;
        if c.is_ascii_alphanumeric() || matches!(c, '+' | '.' | '-') {
            j += 1;
        } else {
            break;
        }
    }
    let sep = chars.get(j..j + 3)?;
    if sep.iter().map(|&(_, c)| c).ne("://".chars()) {
        return None;
    }
    let mut k = j + 3;
    while k < chars.len() && !chars[k].1.is_whitespace() {
        k += 1;
    }
    (k > j + 3).then_some(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixtures() -> (FeatureSchema, CategoryDictionary) {
        let schema = FeatureSchema::default_schema();
        let dict = CategoryDictionary::demo(&schema);
        (schema, dict)
    }

    fn classes(tokens: &[Token<'_>]) -> Vec<TokenClass> {
        tokens.iter().map(|t| t.class).collect()
    }

    #[test]
    fn empty_text_has_no_tokens() {
        let (s, d) = fixtures();
        assert!(Tokenizer::new(&s, &d).tokenize("").is_empty());
    }

    #[test]
    fn double_parenthesis() {
        let (s, d) = fixtures();
        let parenth = s.index_of("punctuation_parenth").unwrap();
        let tokens = Tokenizer::new(&s, &d).tokenize("((");
        assert_eq!(tokens.len(), 2);
        assert!(tokens
            .iter()
            .all(|t| t.class == TokenClass::Punctuation && t.punctuation == Some(parenth)));
    }

    #[test]
    fn url_takes_precedence_over_latin() {
        let (s, d) = fixtures();
        let tokens = Tokenizer::new(&s, &d).tokenize("see http://a.b now");
        assert_eq!(
            classes(&tokens),
            [TokenClass::Latin, TokenClass::Url, TokenClass::Latin]
        );
        assert_eq!(tokens[1].text, "http://a.b");
    }

    #[test]
    fn bare_scheme_is_not_a_url() {
        let (s, d) = fixtures();
        let tokens = Tokenizer::new(&s, &d).tokenize("http:// x");
        assert_eq!(tokens[0].class, TokenClass::Latin);
    }

    #[test]
    fn longest_dictionary_match_wins() {
        let (s, d) = fixtures();
        let tokens = Tokenizer::new(&s, &d).tokenize("一定心脏");
        let texts: Vec<_> = tokens.iter().map(|t| t.text).collect();
        assert_eq!(texts, ["一定", "心脏"]);
        assert!(tokens.iter().all(|t| t.class == TokenClass::Term));
    }

    #[test]
    fn fallback_numbers_and_latin_lookup() {
        let (s, d) = fixtures();
        let tokens = Tokenizer::new(&s, &d).tokenize("嗷 3.14 Happy");
        assert_eq!(
            classes(&tokens),
            [TokenClass::Other, TokenClass::Number, TokenClass::Latin]
        );
        let posemo = s.index_of("textmind_posemo").unwrap();
        assert_eq!(tokens[2].categories, [posemo]);
    }
}
