use super::{ParseError, ParseErrorKind, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Punct(&'static str),
    /// Text following `#pragma` up to the end of the line.
    Pragma(String),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

const PUNCTS: &[&str] = &[
    "++", "+=", "-=", "*=", "/=", "%=", "<=", ">=", "==", "!=", "--", "&&", "||", "+", "-", "*", "/", "%", "<", ">",
    "=", "?", ":", ";", ",", "(", ")", "[", "]", "{", "}", "!", "&", "|",
];

pub(crate) struct Lexer<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(text: &'a str) -> Self {
        Self::at(text, 1, 1)
    }

    /// Lexer whose spans start at the given position (used for pragma text).
    pub fn at(text: &'a str, line: usize, col: usize) -> Self {
        Lexer { src: text.as_bytes(), text, pos: 0, line, col }
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, line: usize, col: usize, start: usize) -> SourceSpan {
        SourceSpan::new(line, col, self.text[start..self.pos].chars().count())
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia()?;
            let (line, col, start) = (self.line, self.col, self.pos);
            let Some(c) = self.peek(0) else {
                out.push(Token { tok: Tok::Eof, span: SourceSpan::new(line, col, 0) });
                return Ok(out);
            };
            let tok = if c.is_ascii_alphabetic() || c == b'_' {
                while self.peek(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                    self.bump();
                }
                Tok::Ident(self.text[start..self.pos].to_owned())
            } else if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) {
                self.number(line, col, start)?
            } else if c == b'#' {
                self.directive(line, col, start)?
            } else if let Some(p) = PUNCTS.iter().find(|p| self.text[self.pos..].starts_with(**p)) {
                for _ in 0..p.len() {
                    self.bump();
                }
                Tok::Punct(p)
            } else {
                let ch = self.text[self.pos..].chars().next().unwrap_or('?');
                return Err(ParseError::new(
                    ParseErrorKind::Lex,
                    SourceSpan::new(line, col, 1),
                    format!("unexpected character `{ch}`"),
                ));
            };
            out.push(Token { tok, span: self.span_from(line, col, start) });
        }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                (Some(b'/'), Some(b'/')) => {
                    while self.peek(0).is_some_and(|c| c != b'\n') {
                        self.bump();
                    }
                }
                (Some(b'/'), Some(b'*')) => {
                    let (line, col) = (self.line, self.col);
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some(b'*'), Some(b'/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => {
                                return Err(ParseError::new(
                                    ParseErrorKind::Lex,
                                    SourceSpan::new(line, col, 2),
                                    "unterminated block comment",
                                ))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn number(&mut self, line: usize, col: usize, start: usize) -> Result<Tok, ParseError> {
        let mut is_float = false;
        while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek(0) == Some(b'.') {
            is_float = true;
            self.bump();
            while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(0), Some(b'e' | b'E')) {
            let sign = usize::from(matches!(self.peek(1), Some(b'+' | b'-')));
            if self.peek(1 + sign).is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                for _ in 0..=sign {
                    self.bump();
                }
                while self.peek(0).is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let digits = &self.text[start..self.pos];
        if is_float && matches!(self.peek(0), Some(b'f' | b'F')) {
            self.bump();
        }
        if self.peek(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
            return Err(ParseError::new(
                ParseErrorKind::Lex,
                self.span_from(line, col, start),
                format!("malformed number `{}`", &self.text[start..=self.pos]),
            ));
        }
        let span = self.span_from(line, col, start);
        if is_float {
            digits
                .parse::<f64>()
                .map(Tok::Float)
                .map_err(|_| ParseError::new(ParseErrorKind::Lex, span, format!("malformed number `{digits}`")))
        } else {
            digits.parse::<i64>().map(Tok::Int).map_err(|_| {
                ParseError::new(ParseErrorKind::Lex, span, format!("integer literal `{digits}` out of range"))
            })
        }
    }

    fn directive(&mut self, line: usize, col: usize, start: usize) -> Result<Tok, ParseError> {
        self.bump();
        while matches!(self.peek(0), Some(b' ' | b'\t')) {
            self.bump();
        }
        let word_start = self.pos;
        while self.peek(0).is_some_and(|c| c.is_ascii_alphabetic()) {
            self.bump();
        }
        let word = &self.text[word_start..self.pos];
        if word != "pragma" {
            return Err(ParseError::new(
                ParseErrorKind::UnsupportedConstruct,
                self.span_from(line, col, start),
                format!("preprocessor directive `#{word}` is not supported"),
            ));
        }
        let body_start = self.pos;
        while self.peek(0).is_some_and(|c| c != b'\n') {
            self.bump();
        }
        Ok(Tok::Pragma(self.text[body_start..self.pos].to_owned()))
    }
}
