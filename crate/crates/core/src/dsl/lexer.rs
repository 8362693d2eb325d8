use thiserror::Error;

use super::ast::Comparator;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct DslError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl DslError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Self {
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Double(f64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Arrow,
    DotDot,
    At,
    Cmp(Comparator),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Double(d) => format!("number {d}"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Colon => "':'".into(),
            Tok::Semi => "';'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::DotDot => "'..'".into(),
            Tok::At => "'@'".into(),
            Tok::Cmp(c) => format!("'{}'", c.as_str()),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|(_, c)| *c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn offset(&mut self) -> usize {
        self.chars.peek().map(|(i, _)| *i).unwrap_or(self.src.len())
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek2() == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, DslError> {
        let start = self.offset();
        if self.peek() == Some('-') {
            self.bump();
        }
        let mut is_double = false;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            is_double = true;
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let next = self.peek2();
            if next.is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+') {
                is_double = true;
                self.bump();
                if matches!(self.peek(), Some('-' | '+')) {
                    self.bump();
                }
                if !self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    return Err(DslError::new(pos, "malformed exponent"));
                }
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = &self.src[start..self.offset()];
        if is_double {
            text.parse()
                .map(Tok::Double)
                .map_err(|_| DslError::new(pos, format!("invalid number '{text}'")))
        } else {
            text.parse()
                .map(Tok::Int)
                .map_err(|_| DslError::new(pos, format!("integer out of range '{text}'")))
        }
    }

    fn string(&mut self, pos: Pos) -> Result<Tok, DslError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(DslError::new(pos, "unterminated string")),
                Some('"') => return Ok(Tok::Str(out)),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    _ => return Err(DslError::new(self.pos(), "unknown escape")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, DslError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(c) = self.peek() else {
            return Ok(Token { tok: Tok::Eof, pos });
        };
        let single = |lx: &mut Self, tok| {
            lx.bump();
            Ok(tok)
        };
        let tok = match c {
            '(' => single(self, Tok::LParen),
            ')' => single(self, Tok::RParen),
            '{' => single(self, Tok::LBrace),
            '}' => single(self, Tok::RBrace),
            '[' => single(self, Tok::LBracket),
            ']' => single(self, Tok::RBracket),
            ',' => single(self, Tok::Comma),
            ':' => single(self, Tok::Colon),
            ';' => single(self, Tok::Semi),
            '@' => single(self, Tok::At),
            '=' => single(self, Tok::Cmp(Comparator::Eq)),
            '"' => self.string(pos),
            '.' if self.peek2() == Some('.') => {
                self.bump();
                single(self, Tok::DotDot)
            }
            '-' if self.peek2() == Some('>') => {
                self.bump();
                single(self, Tok::Arrow)
            }
            '-' if self.peek2().is_some_and(|c| c.is_ascii_digit()) => self.number(pos),
            '!' if self.peek2() == Some('=') => {
                self.bump();
                single(self, Tok::Cmp(Comparator::Ne))
            }
            '<' | '>' => {
                self.bump();
                let eq = self.peek() == Some('=');
                if eq {
                    self.bump();
                }
                Ok(Tok::Cmp(match (c, eq) {
                    ('<', false) => Comparator::Lt,
                    ('<', true) => Comparator::Le,
                    ('>', false) => Comparator::Gt,
                    _ => Comparator::Ge,
                }))
            }
            c if c.is_ascii_digit() => self.number(pos),
            c if c.is_alphabetic() || c == '_' => {
                let start = self.offset();
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.bump();
                }
                Ok(Tok::Ident(self.src[start..self.offset()].to_string()))
            }
            other => Err(DslError::new(pos, format!("unexpected character '{other}'"))),
        }?;
        Ok(Token { tok, pos })
    }
}

/// Splits source text into tokens, ending with `Tok::Eof`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, DslError> {
    let mut lx = Lexer {
        chars: src.char_indices().peekable(),
        src,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        let t = lx.next_token()?;
        let end = t.tok == Tok::Eof;
        out.push(t);
        if end {
            return Ok(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn arrow_and_negative_numbers() {
        assert_eq!(
            toks("e->Name = -2.5"),
            vec![
                Tok::Ident("e".into()),
                Tok::Arrow,
                Tok::Ident("Name".into()),
                Tok::Cmp(Comparator::Eq),
                Tok::Double(-2.5),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn interval_literal_is_not_a_double() {
        assert_eq!(
            toks("[3..5]"),
            vec![Tok::LBracket, Tok::Int(3), Tok::DotDot, Tok::Int(5), Tok::RBracket, Tok::Eof]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("// header\n  class").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("class".into()));
        assert_eq!(t[0].pos, Pos { line: 2, column: 3 });
    }

    #[test]
    fn comparators() {
        assert_eq!(
            toks("< <= > >= != ="),
            vec![
                Tok::Cmp(Comparator::Lt),
                Tok::Cmp(Comparator::Le),
                Tok::Cmp(Comparator::Gt),
                Tok::Cmp(Comparator::Ge),
                Tok::Cmp(Comparator::Ne),
                Tok::Cmp(Comparator::Eq),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn exponents() {
        assert_eq!(toks("1e20 2.5E-3"), vec![Tok::Double(1e20), Tok::Double(2.5e-3), Tok::Eof]);
    }

    #[test]
    fn errors_carry_position() {
        let e = tokenize("class\n  $").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert!(tokenize("\"open").is_err());
    }
}
