use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    String(String),
    /// A template chunk. `tail` is true when the chunk ends with a backtick,
    /// false when it ends with `${`.
    Template {
        cooked: String,
        tail: bool,
    },
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokenKind,
    pub start: u32,
    pub end: u32,
    pub newline_before: bool,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokenKind::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, name: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(n) if n == name)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Ident(n) => format!("`{n}`"),
            TokenKind::Number(n) => format!("number {n}"),
            TokenKind::String(_) => "string literal".to_string(),
            TokenKind::Template { .. } => "template literal".to_string(),
            TokenKind::Punct(p) => format!("`{p}`"),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

// Longest first so that maximal munch works with a simple prefix scan.
const PUNCTUATORS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "=>", "==", "!=", "<=", ">=", "&&",
    "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "**",
    "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^", "!",
    "~", "?", ":", "=", ".", "@", "#",
];

#[derive(Clone)]
pub struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    pub fn source(&self) -> &'a str {
        self.src
    }

    pub fn error_at(&self, offset: usize, expected: &str, found: &str) -> SyntaxError {
        SyntaxError::at(self.src, offset, expected, found)
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_char_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    /// Skips whitespace and comments; returns whether a line break was seen.
    fn skip_trivia(&mut self) -> Result<bool, SyntaxError> {
        let mut newline = false;
        loop {
            match self.peek_char() {
                Some('\n' | '\r' | '\u{2028}' | '\u{2029}') => {
                    newline = true;
                    self.bump();
                }
                Some(c) if c.is_whitespace() || c == '\u{feff}' => {
                    self.bump();
                }
                Some('/') if self.peek_char_at(1) == Some('/') => {
                    while let Some(c) = self.peek_char() {
                        if c == '\n' || c == '\r' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some('/') if self.peek_char_at(1) == Some('*') => {
                    let start = self.pos;
                    self.pos += 2;
                    match self.src[self.pos..].find("*/") {
                        Some(end) => {
                            if self.src[self.pos..self.pos + end].contains('\n') {
                                newline = true;
                            }
                            self.pos += end + 2;
                        }
                        None => {
                            return Err(self.error_at(start, "`*/`", "end of input"));
                        }
                    }
                }
                _ => return Ok(newline),
            }
        }
    }

    pub fn next_token(&mut self) -> Result<Token, SyntaxError> {
        let newline_before = self.skip_trivia()?;
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok(Token {
                kind: TokenKind::Eof,
                start: start as u32,
                end: start as u32,
                newline_before,
            });
        };
        let kind = if is_ident_start(c) {
            self.lex_ident()?
        } else if c.is_ascii_digit()
            || (c == '.' && self.peek_char_at(1).is_some_and(|d| d.is_ascii_digit()))
        {
            self.lex_number()?
        } else if c == '"' || c == '\'' {
            self.lex_string(c)?
        } else if c == '`' {
            self.bump();
            self.lex_template_chunk(start)?
        } else {
            let rest = &self.src[self.pos..];
            match PUNCTUATORS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    self.pos += p.len();
                    TokenKind::Punct(p)
                }
                None => {
                    return Err(self.error_at(start, "a token", &format!("`{c}`")));
                }
            }
        };
        Ok(Token {
            kind,
            start: start as u32,
            end: self.pos as u32,
            newline_before,
        })
    }

    /// Resumes a template literal after the `}` closing a substitution.
    /// `resume_at` is the byte offset just past that `}`.
    pub fn continue_template(&mut self, resume_at: usize) -> Result<Token, SyntaxError> {
        self.pos = resume_at;
        let start = self.pos;
        let kind = self.lex_template_chunk(start)?;
        Ok(Token {
            kind,
            start: start as u32,
            end: self.pos as u32,
            newline_before: false,
        })
    }

    fn lex_ident(&mut self) -> Result<TokenKind, SyntaxError> {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if c == '\\' {
                return Err(self.error_at(self.pos, "identifier character", "unicode escape"));
            }
            if !is_ident_part(c) {
                break;
            }
            self.bump();
        }
        Ok(TokenKind::Ident(self.src[start..self.pos].to_string()))
    }

    fn lex_number(&mut self) -> Result<TokenKind, SyntaxError> {
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let radix = if rest.len() > 1 && rest.as_bytes()[0] == b'0' {
            match rest.as_bytes()[1] {
                b'x' | b'X' => Some(16),
                b'o' | b'O' => Some(8),
                b'b' | b'B' => Some(2),
                b'0'..=b'9' => {
                    return Err(self.error_at(start, "decimal literal", "legacy octal literal"));
                }
                _ => None,
            }
        } else {
            None
        };
        let value = if let Some(radix) = radix {
            self.pos += 2;
            let digits_start = self.pos;
            while self.peek_char().is_some_and(|c| c.is_digit(radix)) {
                self.bump();
            }
            let digits = &self.src[digits_start..self.pos];
            if digits.is_empty() {
                return Err(self.error_at(self.pos, "digits", "end of number"));
            }
            digits.chars().fold(0f64, |acc, d| {
                acc * radix as f64 + d.to_digit(radix).unwrap() as f64
            })
        } else {
            while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            if self.peek_char() == Some('.') {
                self.bump();
                while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
            if matches!(self.peek_char(), Some('e' | 'E')) {
                let save = self.pos;
                self.bump();
                if matches!(self.peek_char(), Some('+' | '-')) {
                    self.bump();
                }
                if self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                    while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                        self.bump();
                    }
                } else {
                    self.pos = save;
                    return Err(self.error_at(save, "exponent digits", "`e`"));
                }
            }
            self.src[start..self.pos]
                .parse::<f64>()
                .map_err(|_| self.error_at(start, "number", "malformed number"))?
        };
        if let Some(c) = self.peek_char() {
            if c == 'n' {
                return Err(self.error_at(self.pos, "number", "BigInt literal"));
            }
            if is_ident_start(c) || c.is_ascii_digit() {
                return Err(self.error_at(self.pos, "end of number", &format!("`{c}`")));
            }
        }
        Ok(TokenKind::Number(value))
    }

    fn lex_escape(&mut self, out: &mut String) -> Result<(), SyntaxError> {
        let at = self.pos;
        let Some(c) = self.bump() else {
            return Err(self.error_at(at, "escape sequence", "end of input"));
        };
        match c {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            'b' => out.push('\u{8}'),
            'f' => out.push('\u{c}'),
            'v' => out.push('\u{b}'),
            '0' if !self.peek_char().is_some_and(|d| d.is_ascii_digit()) => out.push('\0'),
            'x' => {
                let v = self.hex_digits(2)?;
                out.push(char::from_u32(v).unwrap());
            }
            'u' => {
                let v = if self.peek_char() == Some('{') {
                    self.bump();
                    let start = self.pos;
                    while self.peek_char().is_some_and(|d| d.is_ascii_hexdigit()) {
                        self.bump();
                    }
                    let v = u32::from_str_radix(&self.src[start..self.pos], 16)
                        .map_err(|_| self.error_at(start, "hex digits", "malformed escape"))?;
                    if self.bump() != Some('}') {
                        return Err(self.error_at(self.pos, "`}`", "malformed escape"));
                    }
                    v
                } else {
                    let hi = self.hex_digits(4)?;
                    // Combine surrogate pairs written as two escapes.
                    if (0xD800..0xDC00).contains(&hi) && self.src[self.pos..].starts_with("\\u") {
                        let save = self.pos;
                        self.pos += 2;
                        match self.hex_digits(4) {
                            Ok(lo) if (0xDC00..0xE000).contains(&lo) => {
                                0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                            }
                            _ => {
                                self.pos = save;
                                hi
                            }
                        }
                    } else {
                        hi
                    }
                };
                out.push(char::from_u32(v).unwrap_or('\u{FFFD}'));
            }
            '\r' => {
                if self.peek_char() == Some('\n') {
                    self.bump();
                }
            }
            '\n' | '\u{2028}' | '\u{2029}' => {}
            '1'..='9' => {
                return Err(self.error_at(at, "escape sequence", "octal escape"));
            }
            other => out.push(other),
        }
        Ok(())
    }

    fn hex_digits(&mut self, n: usize) -> Result<u32, SyntaxError> {
        let start = self.pos;
        for _ in 0..n {
            match self.peek_char() {
                Some(c) if c.is_ascii_hexdigit() => {
                    self.bump();
                }
                _ => return Err(self.error_at(self.pos, "hex digit", "malformed escape")),
            }
        }
        Ok(u32::from_str_radix(&self.src[start..self.pos], 16).unwrap())
    }

    fn lex_string(&mut self, quote: char) -> Result<TokenKind, SyntaxError> {
        let start = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') | Some('\r') => {
                    return Err(self.error_at(start, "closing quote", "unterminated string"));
                }
                Some('\\') => self.lex_escape(&mut out)?,
                Some(c) if c == quote => break,
                Some(c) => out.push(c),
            }
        }
        Ok(TokenKind::String(out))
    }

    fn lex_template_chunk(&mut self, start: usize) -> Result<TokenKind, SyntaxError> {
        let mut cooked = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(self.error_at(start, "closing backtick", "unterminated template"));
                }
                Some('`') => return Ok(TokenKind::Template { cooked, tail: true }),
                Some('$') if self.peek_char() == Some('{') => {
                    self.bump();
                    return Ok(TokenKind::Template {
                        cooked,
                        tail: false,
                    });
                }
                Some('\\') => self.lex_escape(&mut cooked)?,
                Some('\r') => {
                    if self.peek_char() == Some('\n') {
                        self.bump();
                    }
                    cooked.push('\n');
                }
                Some(c) => cooked.push(c),
            }
        }
    }
}

pub fn is_ident_start(c: char) -> bool {
    c == '$' || c == '_' || c.is_alphabetic()
}

pub fn is_ident_part(c: char) -> bool {
    c == '$' || c == '_' || c.is_alphanumeric() || c == '\u{200c}' || c == '\u{200d}'
}
