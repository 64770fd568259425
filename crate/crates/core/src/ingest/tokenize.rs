/// Splits lyric text into lowercase word tokens.
///
/// Characters other than letters, digits, `_` and `'` act as separators.
/// Tokens without any letter or digit (a lone `'`) are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' || c == '\'' {
                c
            } else {
                ' '
            }
        })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
        .collect()
}
