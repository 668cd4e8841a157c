use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Number(f64),
    Str(String),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
    Eof,
}

impl Token {
    pub(crate) fn describe(&self) -> String {
        match self {
            Token::Number(n) => format!("number `{n}`"),
            Token::Str(s) => format!("string '{s}'"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Comma => "`,`".into(),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::EqEq => "`==`".into(),
            Token::NotEq => "`!=`".into(),
            Token::Lt => "`<`".into(),
            Token::Le => "`<=`".into(),
            Token::Gt => "`>`".into(),
            Token::Ge => "`>=`".into(),
            Token::And => "`and`".into(),
            Token::Or => "`or`".into(),
            Token::Not => "`not`".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub token: Token,
    pub offset: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = |t: Token| Spanned { token: t, offset: start };
        match c {
            b'(' => {
                out.push(single(Token::LParen));
                i += 1;
            }
            b')' => {
                out.push(single(Token::RParen));
                i += 1;
            }
            b',' => {
                out.push(single(Token::Comma));
                i += 1;
            }
            b'+' => {
                out.push(single(Token::Plus));
                i += 1;
            }
            b'-' => {
                out.push(single(Token::Minus));
                i += 1;
            }
            b'*' => {
                out.push(single(Token::Star));
                i += 1;
            }
            b'/' => {
                out.push(single(Token::Slash));
                i += 1;
            }
            b'=' | b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push(single(if c == b'=' { Token::EqEq } else { Token::NotEq }));
                    i += 2;
                } else {
                    return Err(ParseError::new(
                        start,
                        vec![if c == b'=' { "`==`" } else { "`!=`" }.to_string()],
                        format!("`{}`", c as char),
                    ));
                }
            }
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let tok = match (c, eq) {
                    (b'<', false) => Token::Lt,
                    (b'<', true) => Token::Le,
                    (_, false) => Token::Gt,
                    (_, true) => Token::Ge,
                };
                out.push(single(tok));
                i += if eq { 2 } else { 1 };
            }
            b'\'' | b'"' => {
                let (s, next) = lex_string(src, i)?;
                out.push(single(Token::Str(s)));
                i = next;
            }
            b'0'..=b'9' | b'.' => {
                let next = scan_number(bytes, i);
                let text = &src[i..next];
                let value: f64 = text.parse().map_err(|_| {
                    ParseError::new(start, vec!["number".into()], format!("`{text}`"))
                })?;
                out.push(single(Token::Number(value)));
                i = next;
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j] == b'_' || bytes[j].is_ascii_alphanumeric()) {
                    j += 1;
                }
                let word = &src[i..j];
                let tok = match word {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "not" => Token::Not,
                    _ => Token::Ident(word.to_string()),
                };
                out.push(single(tok));
                i = j;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(
                    start,
                    vec!["expression".into()],
                    format!("unexpected character `{ch}`"),
                ));
            }
        }
    }
    out.push(Spanned {
        token: Token::Eof,
        offset: src.len(),
    });
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

/// Backslash escapes only the quote characters and itself; any other
/// backslash sequence is kept verbatim so regex classes like `\s` survive.
fn lex_string(src: &str, start: usize) -> Result<(String, usize), ParseError> {
    let quote = src.as_bytes()[start] as char;
    let mut out = String::new();
    let mut chars = src[start + 1..].char_indices();
    while let Some((off, ch)) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some((_, esc @ ('\\' | '\'' | '"'))) => out.push(esc),
                Some((_, other)) => {
                    out.push('\\');
                    out.push(other);
                }
                None => break,
            },
            c if c == quote => return Ok((out, start + 1 + off + 1)),
            c => out.push(c),
        }
    }
    Err(ParseError::new(
        src.len(),
        vec![format!("closing `{quote}`")],
        "end of input".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Token> {
        tokenize(src).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn operators_and_keywords() {
        assert_eq!(
            kinds("a<=b and not c != 'x'"),
            vec![
                Token::Ident("a".into()),
                Token::Le,
                Token::Ident("b".into()),
                Token::And,
                Token::Not,
                Token::Ident("c".into()),
                Token::NotEq,
                Token::Str("x".into()),
                Token::Eof
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("1.5e3 .25 7"), vec![
            Token::Number(1500.0),
            Token::Number(0.25),
            Token::Number(7.0),
            Token::Eof
        ]);
    }

    #[test]
    fn string_escapes_keep_regex_classes() {
        assert_eq!(kinds(r"'[0-9]+\\s*quart'"), vec![Token::Str(r"[0-9]+\s*quart".into()), Token::Eof]);
        assert_eq!(kinds(r"'[0-9]+\s*quart'"), vec![Token::Str(r"[0-9]+\s*quart".into()), Token::Eof]);
        assert_eq!(kinds(r#"'it\'s'"#), vec![Token::Str("it's".into()), Token::Eof]);
    }

    #[test]
    fn unterminated_string() {
        let err = tokenize("'abc").unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn single_equals_is_rejected() {
        let err = tokenize("a = 1").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.contains(&"`==`".to_string()));
    }
}
