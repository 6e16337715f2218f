use unicode_general_category::{get_general_category, GeneralCategory};

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

fn is_latin(c: char) -> bool {
    c.is_ascii_alphabetic()
        || ('\u{00C0}'..='\u{024F}').contains(&c)
        || ('\u{1E00}'..='\u{1EFF}').contains(&c)
}

/// Splits on whitespace and punctuation, lowercasing Latin letters only.
///
/// Combining marks (Bangla and Devanagari vowel signs, viramas) are kept
/// inside their word; characters of caseless scripts pass through untouched.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() || is_punctuation(c) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if is_latin(c) {
            current.extend(c.to_lowercase());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin_is_lowercased_and_punctuation_split() {
        assert_eq!(
            word_tokens("She is NOT a sane person...She wants"),
            ["she", "is", "not", "a", "sane", "person", "she", "wants"]
        );
        assert_eq!(word_tokens("Café, déjà-vu!"), ["café", "déjà", "vu"]);
        assert!(word_tokens("  ...!? ").is_empty());
    }

    #[test]
    fn indic_words_keep_their_vowel_signs() {
        assert_eq!(
            word_tokens("এক কথায় ও একটা অসভ্য নোংরা মহিলা।"),
            ["এক", "কথায়", "ও", "একটা", "অসভ্য", "নোংরা", "মহিলা"]
        );
        assert_eq!(word_tokens("भाई तेरी... गोडसे"), ["भाई", "तेरी", "गोडसे"]);
    }
}
