//! Lexical pass over TeX source.
//!
//! The tokenizer is total: every byte of the input lands in exactly one
//! token, so joining the lexemes in order gives back the source. Structural
//! problems (unbalanced braces, stray `$`) are left for the tree builder.

use std::borrow::Cow;
use std::ops::Range;

/// Environments whose bodies are passed through as a single opaque text token.
const VERBATIM_ENVS: &[&str] = &["verbatim", "verbatim*", "comment", "lstlisting", "Verbatim"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// `\name` or `\c` for a single non-letter `c`. `\verb` carries its
    /// delimited body in the same token.
    Command(String),
    BraceOpen,
    BraceClose,
    BracketOpen,
    BracketClose,
    /// `$` or `$$`.
    MathDelim,
    EnvBegin(String),
    EnvEnd(String),
    Comment,
    Text,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TexToken {
    pub kind: TokenKind,
    pub span: Range<usize>,
    pub lexeme: String,
}

impl TexToken {
    pub fn is_display_delim(&self) -> bool {
        self.kind == TokenKind::MathDelim && self.lexeme == "$$"
    }
}

/// Decodes raw source bytes, replacing invalid UTF-8 with U+FFFD.
///
/// Returns the decoded text and the number of replacement sites, so callers
/// can log files that carried stray Latin-1 bytes.
pub fn decode_source(bytes: &[u8]) -> (String, usize) {
    match String::from_utf8_lossy(bytes) {
        Cow::Borrowed(s) => (s.to_owned(), 0),
        Cow::Owned(s) => {
            let replaced = count_invalid_sequences(bytes);
            log::warn!("replaced {replaced} invalid UTF-8 sequence(s) with U+FFFD");
            (s, replaced)
        }
    }
}

fn count_invalid_sequences(mut bytes: &[u8]) -> usize {
    let mut n = 0;
    loop {
        match std::str::from_utf8(bytes) {
            Ok(_) => return n,
            Err(e) => {
                n += 1;
                let skip = e.valid_up_to() + e.error_len().unwrap_or(bytes.len() - e.valid_up_to());
                bytes = &bytes[skip..];
            }
        }
    }
}

fn is_special(c: char) -> bool {
    matches!(c, '\\' | '{' | '}' | '[' | ']' | '$' | '%')
}

/// Splits `source` into tokens covering every byte.
pub fn tokenize(source: &str) -> Vec<TexToken> {
    Lexer { src: source, pos: 0, out: Vec::new() }.run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    out: Vec<TexToken>,
}

impl<'a> Lexer<'a> {
    fn run(mut self) -> Vec<TexToken> {
        while let Some(c) = self.peek() {
            match c {
                '\\' => self.command(),
                '{' => self.single(TokenKind::BraceOpen),
                '}' => self.single(TokenKind::BraceClose),
                '[' => self.single(TokenKind::BracketOpen),
                ']' => self.single(TokenKind::BracketClose),
                '$' => {
                    let len = if self.rest().starts_with("$$") { 2 } else { 1 };
                    self.emit(TokenKind::MathDelim, self.pos + len);
                }
                '%' => {
                    let end = self.rest().find('\n').map_or(self.src.len(), |i| self.pos + i);
                    self.emit(TokenKind::Comment, end);
                }
                c if c.is_whitespace() => {
                    let end = self.scan_while(|c| c.is_whitespace());
                    self.emit(TokenKind::Whitespace, end);
                }
                _ => {
                    let end = self.scan_while(|c| !c.is_whitespace() && !is_special(c));
                    self.emit(TokenKind::Text, end);
                }
            }
        }
        self.out
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn scan_while(&self, pred: impl Fn(char) -> bool) -> usize {
        self.rest()
            .char_indices()
            .find(|&(_, c)| !pred(c))
            .map_or(self.src.len(), |(i, _)| self.pos + i)
    }

    fn single(&mut self, kind: TokenKind) {
        self.emit(kind, self.pos + 1);
    }

    fn emit(&mut self, kind: TokenKind, end: usize) {
        let span = self.pos..end;
        self.out.push(TexToken { kind, lexeme: self.src[span.clone()].to_owned(), span });
        self.pos = end;
    }

    fn command(&mut self) {
        let start = self.pos;
        let after = &self.src[start + 1..];
        let name_len = after.bytes().take_while(u8::is_ascii_alphabetic).count();
        let (name, mut end) = if name_len > 0 {
            (&after[..name_len], start + 1 + name_len)
        } else if let Some(c) = after.chars().next() {
            (&after[..c.len_utf8()], start + 1 + c.len_utf8())
        } else {
            // lone trailing backslash
            ("", start + 1)
        };

        match name {
            "begin" | "end" => {
                if let Some((env, close)) = env_name(&self.src[end..]) {
                    let env = env.to_owned();
                    end += close;
                    if name == "begin" {
                        self.emit(TokenKind::EnvBegin(env.clone()), end);
                        if VERBATIM_ENVS.contains(&env.as_str()) {
                            self.verbatim_body(&env);
                        }
                    } else {
                        self.emit(TokenKind::EnvEnd(env), end);
                    }
                    return;
                }
            }
            "verb" => {
                let mut body = &self.src[end..];
                if body.starts_with('*') {
                    end += 1;
                    body = &body[1..];
                }
                if let Some(delim) = body.chars().next().filter(|c| !c.is_alphabetic() && !c.is_whitespace()) {
                    let inner = &body[delim.len_utf8()..];
                    if let Some(close) = inner.find(|c| c == delim || c == '\n').filter(|&i| inner[i..].starts_with(delim)) {
                        end += delim.len_utf8() + close + delim.len_utf8();
                    }
                }
            }
            _ => {}
        }
        self.emit(TokenKind::Command(name.to_owned()), end);
    }

    fn verbatim_body(&mut self, env: &str) {
        let closer = format!("\\end{{{env}}}");
        let end = self.rest().find(&closer).map_or(self.src.len(), |i| self.pos + i);
        if end > self.pos {
            self.emit(TokenKind::Text, end);
        }
    }
}

/// Parses `{name}` at the start of `s`, returning the name and the byte
/// length consumed.
fn env_name(s: &str) -> Option<(&str, usize)> {
    let inner = s.strip_prefix('{')?;
    let close = inner.find(|c: char| matches!(c, '}' | '{' | '\\' | '%' | '$' | '\n'))?;
    if !inner[close..].starts_with('}') || close == 0 {
        return None;
    }
    Some((&inner[..close], close + 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).into_iter().map(|t| (t.kind, t.lexeme)).collect()
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn inline_math_sentence() {
        use TokenKind::*;
        assert_eq!(
            kinds("a $x$ b"),
            vec![
                (Text, "a".into()),
                (Whitespace, " ".into()),
                (MathDelim, "$".into()),
                (Text, "x".into()),
                (MathDelim, "$".into()),
                (Whitespace, " ".into()),
                (Text, "b".into()),
            ]
        );
    }

    #[test]
    fn environments_fuse() {
        use TokenKind::*;
        assert_eq!(
            kinds(r"\begin{document}Hi\end{document}"),
            vec![
                (EnvBegin("document".into()), r"\begin{document}".into()),
                (Text, "Hi".into()),
                (EnvEnd("document".into()), r"\end{document}".into()),
            ]
        );
    }

    #[test]
    fn escaped_percent_is_not_a_comment() {
        let toks = kinds(r"50\% done % note");
        assert_eq!(toks[1], (TokenKind::Command("%".into()), r"\%".into()));
        assert_eq!(toks.last().unwrap(), &(TokenKind::Comment, "% note".into()));
    }

    #[test]
    fn comment_stops_before_newline() {
        let toks = kinds("% c\nx");
        assert_eq!(toks[0].1, "% c");
        assert_eq!(toks[1].0, TokenKind::Whitespace);
    }

    #[test]
    fn display_delimiter() {
        let toks = tokenize("$$x$$");
        assert!(toks[0].is_display_delim());
        assert_eq!(toks.len(), 3);
    }

    #[test]
    fn verbatim_body_is_opaque() {
        let toks = kinds("\\begin{verbatim}{ $ %\\end{verbatim}");
        assert_eq!(toks[1], (TokenKind::Text, "{ $ %".into()));
        assert_eq!(toks[2].0, TokenKind::EnvEnd("verbatim".into()));
    }

    #[test]
    fn verb_command_swallows_body() {
        let toks = kinds(r"\verb|{$|x");
        assert_eq!(toks[0], (TokenKind::Command("verb".into()), r"\verb|{$|".into()));
    }

    #[test]
    fn malformed_begin_is_plain_command() {
        let toks = kinds(r"\begin x");
        assert_eq!(toks[0].0, TokenKind::Command("begin".into()));
    }

    #[test]
    fn trailing_backslash() {
        let toks = kinds("a\\");
        assert_eq!(toks[1], (TokenKind::Command(String::new()), "\\".into()));
    }

    #[test]
    fn multibyte_symbol_command() {
        let toks = kinds("\\é");
        assert_eq!(toks[0].1, "\\é");
    }

    #[test]
    fn decode_replaces_invalid_bytes() {
        let (s, n) = decode_source(b"caf\xe9 ok");
        assert_eq!(n, 1);
        assert_eq!(s, "caf\u{FFFD} ok");
        assert_eq!(decode_source(b"plain").1, 0);
    }
}
