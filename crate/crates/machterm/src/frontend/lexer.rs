//! Hand-written lexer. Tracks line/column for diagnostics.

use super::ast::Loc;
use super::Diagnostic;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    Ident(String),
    Num(u64),
    // keywords
    Void,
    Int,
    Char,
    Signed,
    Unsigned,
    If,
    Else,
    While,
    For,
    Return,
    Assume,
    Assert,
    Nondet,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Question,
    Colon,
    Assign,
    PlusAssign,
    MinusAssign,
    StarAssign,
    PlusPlus,
    MinusMinus,
    Plus,
    Minus,
    Star,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    NotEq,
    Amp,
    Caret,
    Pipe,
    AmpAmp,
    PipePipe,
    Bang,
    Tilde,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::Num(n) => return write!(f, "number `{n}`"),
            Tok::Void => "void",
            Tok::Int => "int",
            Tok::Char => "char",
            Tok::Signed => "signed",
            Tok::Unsigned => "unsigned",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::For => "for",
            Tok::Return => "return",
            Tok::Assume => "assume",
            Tok::Assert => "assert",
            Tok::Nondet => "nondet",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::Question => "?",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::PlusAssign => "+=",
            Tok::MinusAssign => "-=",
            Tok::StarAssign => "*=",
            Tok::PlusPlus => "++",
            Tok::MinusMinus => "--",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Shl => "<<",
            Tok::Shr => ">>",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Amp => "&",
            Tok::Caret => "^",
            Tok::Pipe => "|",
            Tok::AmpAmp => "&&",
            Tok::PipePipe => "||",
            Tok::Bang => "!",
            Tok::Tilde => "~",
            Tok::Eof => "end of input",
        };
        write!(f, "`{s}`")
    }
}

pub fn tokenize(file: &str, src: &str) -> Result<Vec<(Tok, Loc)>, Diagnostic> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let loc = Loc { line, col };
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => {
                out.push((Tok::Eof, loc));
                return Ok(out);
            }
        };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' {
            // comments: // and /* */
            let mut ahead = chars.clone();
            ahead.next();
            match ahead.peek() {
                Some('/') => {
                    while let Some(c) = chars.peek() {
                        if *c == '\n' {
                            break;
                        }
                        bump!();
                    }
                    continue;
                }
                Some('*') => {
                    bump!();
                    bump!();
                    let mut prev = ' ';
                    loop {
                        match bump!() {
                            None => {
                                return Err(Diagnostic::new(file, loc, "unterminated comment"))
                            }
                            Some('/') if prev == '*' => break,
                            Some(c) => prev = c,
                        }
                    }
                    continue;
                }
                _ => return Err(Diagnostic::new(file, loc, "unexpected character `/`")),
            }
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            while let Some(c) = chars.peek() {
                if c.is_ascii_alphanumeric() {
                    text.push(*c);
                    bump!();
                } else {
                    break;
                }
            }
            let parsed = if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                u64::from_str_radix(hex, 16)
            } else {
                text.parse::<u64>()
            };
            match parsed {
                Ok(n) => out.push((Tok::Num(n), loc)),
                Err(_) => {
                    return Err(Diagnostic::new(file, loc, &format!("bad number literal `{text}`")))
                }
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(c) = chars.peek() {
                if c.is_ascii_alphanumeric() || *c == '_' {
                    text.push(*c);
                    bump!();
                } else {
                    break;
                }
            }
            let tok = match text.as_str() {
                "void" => Tok::Void,
                "int" => Tok::Int,
                "char" => Tok::Char,
                "signed" => Tok::Signed,
                "unsigned" => Tok::Unsigned,
                "if" => Tok::If,
                "else" => Tok::Else,
                "while" => Tok::While,
                "for" => Tok::For,
                "return" => Tok::Return,
                "assume" => Tok::Assume,
                "assert" => Tok::Assert,
                "nondet" => Tok::Nondet,
                _ => Tok::Ident(text),
            };
            out.push((tok, loc));
            continue;
        }
        bump!();
        let two = |chars: &mut std::iter::Peekable<std::str::Chars>, want: char| {
            chars.peek() == Some(&want)
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '?' => Tok::Question,
            ':' => Tok::Colon,
            '~' => Tok::Tilde,
            '^' => Tok::Caret,
            '*' => {
                if two(&mut chars, '=') {
                    bump!();
                    Tok::StarAssign
                } else {
                    Tok::Star
                }
            }
            '+' => {
                if two(&mut chars, '+') {
                    bump!();
                    Tok::PlusPlus
                } else if two(&mut chars, '=') {
                    bump!();
                    Tok::PlusAssign
                } else {
                    Tok::Plus
                }
            }
            '-' => {
                if two(&mut chars, '-') {
                    bump!();
                    Tok::MinusMinus
                } else if two(&mut chars, '=') {
                    bump!();
                    Tok::MinusAssign
                } else {
                    Tok::Minus
                }
            }
            '<' => {
                if two(&mut chars, '<') {
                    bump!();
                    Tok::Shl
                } else if two(&mut chars, '=') {
                    bump!();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            '>' => {
                if two(&mut chars, '>') {
                    bump!();
                    Tok::Shr
                } else if two(&mut chars, '=') {
                    bump!();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            '=' => {
                if two(&mut chars, '=') {
                    bump!();
                    Tok::EqEq
                } else {
                    Tok::Assign
                }
            }
            '!' => {
                if two(&mut chars, '=') {
                    bump!();
                    Tok::NotEq
                } else {
                    Tok::Bang
                }
            }
            '&' => {
                if two(&mut chars, '&') {
                    bump!();
                    Tok::AmpAmp
                } else {
                    Tok::Amp
                }
            }
            '|' => {
                if two(&mut chars, '|') {
                    bump!();
                    Tok::PipePipe
                } else {
                    Tok::Pipe
                }
            }
            other => {
                return Err(Diagnostic::new(file, loc, &format!("unexpected character `{other}`")))
            }
        };
        out.push((tok, loc));
    }
}
