//! Substitution ciphers and their cryptanalysis.

pub mod analysis;
pub mod ciphers;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{
    crack_vigenere, frequency_crack, kasiski, recover_keyword, CrackResult, FrequencyProfile, KasiskiResult,
    KeywordRecovery, VigenereCrack,
};
pub use ciphers::{caesar, caesar_with, vigenere, vigenere_with};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("symbol {0:?} is not in the alphabet")]
    ForeignSymbol(char),
    #[error("keyword is empty")]
    EmptyKeyword,
    #[error("alphabet needs at least two distinct symbols")]
    BadAlphabet,
    #[error("text has {got} symbols, at least {need} required")]
    TextTooShort { got: usize, need: usize },
    #[error("no repeated sequences: key length is inconclusive")]
    Inconclusive,
    #[error("frequency profile: {0}")]
    BadProfile(String),
}

pub type Result<T> = std::result::Result<T, ClassicalError>;

pub const ITALIAN_21: &str = "ABCDEFGHILMNOPQRSTUVZ";
pub const ENGLISH_26: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: &str) -> Result<Self> {
        let symbols: Vec<char> = symbols.chars().collect();
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(ClassicalError::BadAlphabet);
            }
        }
        if symbols.len() < 2 {
            return Err(ClassicalError::BadAlphabet);
        }
        Ok(Self { symbols })
    }

    pub fn english() -> Self {
        Self::new(ENGLISH_26).expect("static alphabet")
    }

    pub fn italian() -> Self {
        Self::new(ITALIAN_21).expect("static alphabet")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn symbol(&self, i: usize) -> char {
        self.symbols[i % self.symbols.len()]
    }

    pub fn as_string(&self) -> String {
        self.symbols.iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Encrypt,
    Decrypt,
}

impl Direction {
    fn sign(self) -> i64 {
        match self {
            Direction::Encrypt => 1,
            Direction::Decrypt => -1,
        }
    }
}

/// How symbols outside the alphabet are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMode {
    /// Any foreign symbol is an error.
    #[default]
    Strict,
    /// Uppercase, fold accents, drop everything else.
    Strip,
    /// Uppercase and fold accents; other characters pass through unchanged
    /// and do not advance the keyword.
    Preserve,
}

fn fold(c: char) -> char {
    match c {
        'à' | 'á' | 'â' | 'ä' | 'À' | 'Á' | 'Â' | 'Ä' => 'A',
        'è' | 'é' | 'ê' | 'ë' | 'È' | 'É' | 'Ê' | 'Ë' => 'E',
        'ì' | 'í' | 'î' | 'ï' | 'Ì' | 'Í' | 'Î' | 'Ï' => 'I',
        'ò' | 'ó' | 'ô' | 'ö' | 'Ò' | 'Ó' | 'Ô' | 'Ö' => 'O',
        'ù' | 'ú' | 'û' | 'ü' | 'Ù' | 'Ú' | 'Û' | 'Ü' => 'U',
        'ç' | 'Ç' => 'C',
        'ñ' | 'Ñ' => 'N',
        _ => c.to_uppercase().next().unwrap_or(c),
    }
}

/// Uppercases, folds accents and keeps only alphabet symbols.
pub fn normalize(text: &str, alphabet: &Alphabet) -> String {
    text.chars()
        .map(fold)
        .filter(|&c| alphabet.index_of(c).is_some())
        .collect()
}

/// A token of processed text: either an alphabet index or a passthrough char.
pub(crate) enum Token {
    Sym(usize),
    Other(char),
}

pub(crate) fn tokenize(text: &str, alphabet: &Alphabet, mode: TextMode) -> Result<Vec<Token>> {
    let mut out = Vec::with_capacity(text.len());
    for c in text.chars() {
        let c2 = if mode == TextMode::Strict { c } else { fold(c) };
        match (alphabet.index_of(c2), mode) {
            (Some(i), _) => out.push(Token::Sym(i)),
            (None, TextMode::Strict) => return Err(ClassicalError::ForeignSymbol(c)),
            (None, TextMode::Strip) => {}
            (None, TextMode::Preserve) => out.push(Token::Other(c)),
        }
    }
    Ok(out)
}
