/// Abbreviations that never end a sentence. Single capital-letter initials
/// ("J.", "O.") are guarded separately.
pub const ABBREVIATIONS: &[&str] = &["Mr.", "Mrs.", "Dr.", "J.", "v.", "No.", "U.S."];

const TERMINALS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

fn is_guarded_word(word: &str) -> bool {
    let word = word.trim_start_matches(OPENERS);
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    let mut chars = word.chars();
    matches!(
        (chars.next(), chars.next(), chars.next()),
        (Some(c), Some('.'), None) if c.is_uppercase()
    )
}

/// Splits utterance text into sentences on `.`, `!` and `?` followed by
/// whitespace. Trailing quotes and brackets stay with their sentence.
///
/// No split happens after a guarded abbreviation or initial, or when the
/// next word starts in lowercase.
pub fn sentence_split(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        if !TERMINALS.contains(&chars[i].1) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && TERMINALS.contains(&chars[i].1) {
            i += 1;
        }
        let run_end = i;
        while i < chars.len() && CLOSERS.contains(&chars[i].1) {
            i += 1;
        }
        let end_byte = chars.get(i).map_or(text.len(), |&(b, _)| b);
        if i < chars.len() && !chars[i].1.is_whitespace() {
            continue;
        }

        let next_word = chars[i..].iter().map(|&(_, c)| c).find(|c| !c.is_whitespace());
        if next_word.is_some_and(char::is_lowercase) {
            continue;
        }
        if run_end - run_start == 1 && chars[run_start].1 == '.' {
            let word_start = text[start..chars[run_start].0]
                .rfind(char::is_whitespace)
                .map_or(start, |p| start + p + 1);
            let word_end = chars[run_start].0 + 1;
            if is_guarded_word(&text[word_start..word_end]) {
                continue;
            }
        }

        let sentence = text[start..end_byte].trim();
        if !sentence.is_empty() {
            sentences.push(sentence.to_string());
        }
        start = end_byte;
    }

    let rest = text[start..].trim();
    if !rest.is_empty() {
        sentences.push(rest.to_string());
    }
    sentences
}
