use super::{CmpOp, ExprError};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Int(i64),
    Dec(f64),
    Str(String),
    True,
    False,
    And,
    Or,
    Not,
    LParen,
    RParen,
    Cmp(CmpOp),
    Eof,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Dec(d) => format!("number {d:?}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::True => "'true'".into(),
            Tok::False => "'false'".into(),
            Tok::And => "'and'".into(),
            Tok::Or => "'or'".into(),
            Tok::Not => "'not'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Cmp(op) => format!("'{}'", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

/// Token plus its 1-based character column.
pub(super) type Spanned = (Tok, usize);

pub(super) fn tokenize(src: &str) -> Result<Vec<Spanned>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: String| ExprError::Syntax {
        position: pos + 1,
        message: msg,
    };

    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => {
                out.push((Tok::LParen, start + 1));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, start + 1));
                i += 1;
            }
            '>' | '<' | '=' | '!' => {
                let next = chars.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    ('>', Some('=')) => (CmpOp::Ge, 2),
                    ('>', _) => (CmpOp::Gt, 1),
                    ('<', Some('=')) => (CmpOp::Le, 2),
                    ('<', _) => (CmpOp::Lt, 1),
                    ('=', Some('=')) => (CmpOp::Eq, 2),
                    ('!', Some('=')) => (CmpOp::Ne, 2),
                    ('=', _) => return Err(err(start, "single '=' is not an operator; use '=='".into())),
                    _ => return Err(err(start, "'!' must be followed by '='; use 'not'".into())),
                };
                out.push((Tok::Cmp(op), start + 1));
                i += len;
            }
            '"' | '\'' => {
                let quote = c;
                let mut text = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(start, "unterminated string".into())),
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(e @ ('\\' | '"' | '\'')) => text.push(*e),
                                Some('n') => text.push('\n'),
                                Some('t') => text.push('\t'),
                                _ => return Err(err(i, "invalid escape".into())),
                            }
                            i += 2;
                        }
                        Some(ch) if *ch == quote => {
                            i += 1;
                            break;
                        }
                        Some(ch) => {
                            text.push(*ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Str(text), start + 1));
            }
            c if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                i += 1;
                while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                let mut decimal = false;
                if chars.get(i) == Some(&'.') {
                    decimal = true;
                    i += 1;
                    if !chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        return Err(err(i, "expected digits after '.'".into()));
                    }
                    while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    decimal = true;
                    i += 1;
                    if matches!(chars.get(i), Some('+' | '-')) {
                        i += 1;
                    }
                    if !chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        return Err(err(i, "expected exponent digits".into()));
                    }
                    while chars.get(i).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let tok = if decimal {
                    text.parse::<f64>()
                        .ok()
                        .filter(|d| d.is_finite())
                        .map(Tok::Dec)
                        .ok_or_else(|| err(start, format!("invalid number '{text}'")))?
                } else {
                    text.parse::<i64>()
                        .map(Tok::Int)
                        .map_err(|_| err(start, format!("integer '{text}' out of range")))?
                };
                if chars.get(i).is_some_and(|d| d.is_alphabetic() || *d == '_') {
                    return Err(err(i, "identifier cannot start with a digit".into()));
                }
                out.push((tok, start + 1));
            }
            c if c.is_alphabetic() || c == '_' => {
                while chars
                    .get(i)
                    .is_some_and(|d| d.is_alphanumeric() || *d == '_' || *d == '.')
                {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word),
                };
                out.push((tok, start + 1));
            }
            other => return Err(err(start, format!("unexpected character '{other}'"))),
        }
    }
    out.push((Tok::Eof, chars.len() + 1));
    Ok(out)
}
