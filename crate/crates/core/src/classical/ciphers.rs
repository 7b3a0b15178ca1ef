//! Shift and polyalphabetic-shift ciphers.

use super::{tokenize, Alphabet, ClassicalError, Direction, Result, TextMode, Token};

fn shift_index(i: usize, shift: i64, n: usize) -> usize {
    (i as i64 + shift).rem_euclid(n as i64) as usize
}

/// Shifts each symbol by `shift` positions (forward to encrypt).
pub fn caesar(text: &str, shift: i64, alphabet: &Alphabet, direction: Direction) -> Result<String> {
    caesar_with(text, shift, alphabet, direction, TextMode::Strict)
}

pub fn caesar_with(
    text: &str,
    shift: i64,
    alphabet: &Alphabet,
    direction: Direction,
    mode: TextMode,
) -> Result<String> {
    let n = alphabet.len();
    let s = shift * direction.sign();
    Ok(tokenize(text, alphabet, mode)?
        .into_iter()
        .map(|t| match t {
            Token::Sym(i) => alphabet.symbol(shift_index(i, s, n)),
            Token::Other(c) => c,
        })
        .collect())
}

/// Shifts symbol `k` by the alphabet index of keyword symbol `k mod len`.
pub fn vigenere(text: &str, keyword: &str, alphabet: &Alphabet, direction: Direction) -> Result<String> {
    vigenere_with(text, keyword, alphabet, direction, TextMode::Strict)
}

pub fn vigenere_with(
    text: &str,
    keyword: &str,
    alphabet: &Alphabet,
    direction: Direction,
    mode: TextMode,
) -> Result<String> {
    let key: Vec<usize> = keyword
        .chars()
        .map(|c| alphabet.index_of(c).ok_or(ClassicalError::ForeignSymbol(c)))
        .collect::<Result<_>>()?;
    if key.is_empty() {
        return Err(ClassicalError::EmptyKeyword);
    }
    let n = alphabet.len();
    let sign = direction.sign();
    let mut k = 0usize;
    Ok(tokenize(text, alphabet, mode)?
        .into_iter()
        .map(|t| match t {
            Token::Sym(i) => {
                let c = alphabet.symbol(shift_index(i, sign * key[k % key.len()] as i64, n));
                k += 1;
                c
            }
            Token::Other(c) => c,
        })
        .collect())
}
