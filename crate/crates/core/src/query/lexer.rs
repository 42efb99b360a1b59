use super::QueryError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Int(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Dash,
    Arrow,
    LeftArrow,
    Eq,
    Neq,
    Star,
    Semicolon,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    /// Source text of the token, for error messages.
    pub text: String,
    pub line: usize,
    pub column: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let (start_line, start_col, start) = (line, col, i);
        let peek = chars.get(i + 1).copied();
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '=' => Tok::Eq,
            '*' => Tok::Star,
            ';' => Tok::Semicolon,
            '-' if peek == Some('>') => {
                i += 1;
                Tok::Arrow
            }
            '-' => Tok::Dash,
            '<' if peek == Some('-') => {
                i += 1;
                Tok::LeftArrow
            }
            '<' if peek == Some('>') => {
                i += 1;
                Tok::Neq
            }
            '"' | '\'' => {
                let quote = c;
                let mut value = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(QueryError::Syntax {
                                line: start_line,
                                column: start_col,
                                token: chars[start..i].iter().collect(),
                                message: "unterminated string".into(),
                            })
                        }
                        Some(&ch) if ch == quote => break,
                        Some('\\') => {
                            let escaped = match chars.get(i + 1) {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some(&other) => other,
                                None => '\\',
                            };
                            value.push(escaped);
                            i += 2;
                        }
                        Some(&ch) => {
                            value.push(ch);
                            i += 1;
                        }
                    }
                }
                Tok::Str(value)
            }
            c if c.is_ascii_digit() => {
                while chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    i += 1;
                }
                Tok::Int(chars[start..=i].iter().collect())
            }
            c if c.is_alphabetic() || c == '_' => {
                while chars.get(i + 1).is_some_and(|d| d.is_alphanumeric() || *d == '_') {
                    i += 1;
                }
                Tok::Ident(chars[start..=i].iter().collect())
            }
            '`' => {
                let close = chars[i + 1..].iter().position(|&ch| ch == '`').ok_or_else(|| QueryError::Syntax {
                    line,
                    column: col,
                    token: "`".into(),
                    message: "unterminated quoted identifier".into(),
                })?;
                i += close + 1;
                Tok::Ident(chars[start + 1..i].iter().collect())
            }
            other => {
                return Err(QueryError::Syntax {
                    line,
                    column: col,
                    token: other.to_string(),
                    message: "unexpected character".into(),
                })
            }
        };
        i += 1;
        col += i - start;
        out.push(Token {
            tok,
            text: chars[start..i].iter().collect(),
            line: start_line,
            column: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        text: "end of input".into(),
        line,
        column: col,
    });
    Ok(out)
}
