//! American Soundex with a configurable code length.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_CODE_LENGTH: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhoneticError {
    #[error("{0:?} contains no letters to encode")]
    NoLetters(String),
    #[error("code length must be at least 4, got {0}")]
    Length(usize),
}

/// One uppercase letter followed by `length - 1` digits in `0..=6`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SoundexCode(String);

impl SoundexCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SoundexCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn digit(c: char) -> Option<u8> {
    match c {
        'B' | 'F' | 'P' | 'V' => Some(b'1'),
        'C' | 'G' | 'J' | 'K' | 'Q' | 'S' | 'X' | 'Z' => Some(b'2'),
        'D' | 'T' => Some(b'3'),
        'L' => Some(b'4'),
        'M' | 'N' => Some(b'5'),
        'R' => Some(b'6'),
        _ => None,
    }
}

/// Uppercase ASCII letters of `word` after stripping diacritics.
fn fold(word: &str) -> Vec<char> {
    word.nfd()
        .filter(char::is_ascii_alphabetic)
        .map(|c| c.to_ascii_uppercase())
        .collect()
}

pub fn soundex(word: &str, length: usize) -> Result<SoundexCode, PhoneticError> {
    if length < 4 {
        return Err(PhoneticError::Length(length));
    }
    let letters = fold(word);
    let Some(&first) = letters.first() else {
        return Err(PhoneticError::NoLetters(word.to_string()));
    };
    let mut code = String::with_capacity(length);
    code.push(first);
    let mut last = digit(first);
    for &c in &letters[1..] {
        if code.len() == length {
            break;
        }
        match c {
            // h and w do not separate equal codes
            'H' | 'W' => {}
            'A' | 'E' | 'I' | 'O' | 'U' | 'Y' => last = None,
            _ => {
                let d = digit(c);
                if d != last {
                    if let Some(d) = d {
                        code.push(d as char);
                    }
                }
                last = d;
            }
        }
    }
    while code.len() < length {
        code.push('0');
    }
    Ok(SoundexCode(code))
}

/// Encodes each term; terms without letters (numbers, section ids) are kept
/// as they are.
pub fn encode_terms<S: AsRef<str>>(terms: &[S], length: usize) -> Vec<String> {
    terms
        .iter()
        .map(|t| match soundex(t.as_ref(), length) {
            Ok(code) => code.0,
            Err(_) => t.as_ref().to_string(),
        })
        .collect()
}
