use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::Rat;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(Rat),
    Assign,
    Semi,
    Comma,
    Colon,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Plus,
    Minus,
    Star,
    Times,
    Slash,
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Not,
    And,
    Or,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut adv = 1;
        let tok = match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => None,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let mut frac = String::new();
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        frac.push(chars[j]);
                        j += 1;
                    }
                }
                let int: String = chars[start..j].iter().take_while(|c| c.is_ascii_digit()).collect();
                adv = j - i;
                let digits = format!("{int}{frac}");
                let n: BigInt = digits.parse().expect("digits");
                let d = BigInt::from(10).pow(frac.len() as u32);
                Some(Tok::Num(Rat::new(n, d)))
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '\'') {
                    j += 1;
                }
                adv = j - i;
                let word: String = chars[i..j].iter().collect();
                Some(match word.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(word),
                })
            }
            _ => {
                let next = chars.get(i + 1).copied();
                let mut two = |t| {
                    adv = 2;
                    Some(t)
                };
                match (c, next) {
                    (':', Some('=')) => two(Tok::Assign),
                    ('<', Some('=')) => two(Tok::Le),
                    ('>', Some('=')) => two(Tok::Ge),
                    ('=', Some('=')) => two(Tok::Eq),
                    ('&', Some('&')) => two(Tok::And),
                    ('|', Some('|')) => two(Tok::Or),
                    (':', _) => Some(Tok::Colon),
                    (';', _) => Some(Tok::Semi),
                    (',', _) => Some(Tok::Comma),
                    ('(', _) => Some(Tok::LParen),
                    (')', _) => Some(Tok::RParen),
                    ('{', _) => Some(Tok::LBrace),
                    ('}', _) => Some(Tok::RBrace),
                    ('+', _) => Some(Tok::Plus),
                    ('-' | '−', _) => Some(Tok::Minus),
                    ('*' | '⋆', _) => Some(Tok::Star),
                    ('×' | '·', _) => Some(Tok::Times),
                    ('/', _) => Some(Tok::Slash),
                    ('<', _) => Some(Tok::Lt),
                    ('>', _) => Some(Tok::Gt),
                    ('=', _) => Some(Tok::Eq),
                    ('≤', _) => Some(Tok::Le),
                    ('≥', _) => Some(Tok::Ge),
                    ('¬' | '!', _) => Some(Tok::Not),
                    ('∧' | '&', _) => Some(Tok::And),
                    ('∨' | '|', _) => Some(Tok::Or),
                    _ => {
                        return Err(Error::Syntax {
                            line: tl,
                            col: tc,
                            msg: format!("unexpected character {c:?}"),
                        })
                    }
                }
            }
        };
        if let Some(tok) = tok {
            out.push(Token { tok, line: tl, col: tc });
        }
        i += adv;
        col += adv;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
