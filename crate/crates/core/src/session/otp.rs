//! One-time pad over a bit key with single-use enforcement.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OtpError {
    #[error("key has {available} unused bits from offset {offset}, message needs {needed}")]
    KeyTooShort {
        offset: usize,
        available: usize,
        needed: usize,
    },
    #[error("key bits {start}..{end} were already used")]
    KeyReuse { start: usize, end: usize },
}

/// XORs `message` with `key`, most significant bit of each byte first.
pub fn otp_encrypt(key: &[bool], message: &[u8]) -> Result<Vec<u8>, OtpError> {
    let needed = message.len() * 8;
    if key.len() < needed {
        return Err(OtpError::KeyTooShort {
            offset: 0,
            available: key.len(),
            needed,
        });
    }
    Ok(message
        .iter()
        .zip(key.chunks(8))
        .map(|(&m, k)| m ^ pack(k))
        .collect())
}

pub fn otp_decrypt(key: &[bool], ciphertext: &[u8]) -> Result<Vec<u8>, OtpError> {
    otp_encrypt(key, ciphertext)
}

fn pack(bits: &[bool]) -> u8 {
    bits.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8)
}

/// Unpacks bytes into bits, most significant first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
        .collect()
}

pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| {
            let mut b = pack(c);
            b <<= 8 - c.len();
            b
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtpCiphertext {
    /// First key bit used.
    pub offset: usize,
    pub bytes: Vec<u8>,
}

/// A key together with the bit ranges already spent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPad {
    bits: Vec<bool>,
    consumed: Vec<Range<usize>>,
}

impl KeyPad {
    pub fn new(bits: Vec<bool>) -> Self {
        Self {
            bits,
            consumed: Vec::new(),
        }
    }

    pub fn with_consumed(bits: Vec<bool>, consumed: Vec<Range<usize>>) -> Self {
        let mut pad = Self::new(bits);
        for r in consumed {
            pad.mark(r);
        }
        pad
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Spent ranges, sorted and merged.
    pub fn consumed(&self) -> &[Range<usize>] {
        &self.consumed
    }

    pub fn consumed_bits(&self) -> usize {
        self.consumed.iter().map(|r| r.len()).sum()
    }

    /// First bit after the last spent range.
    pub fn next_free(&self) -> usize {
        self.consumed.last().map_or(0, |r| r.end)
    }

    fn mark(&mut self, range: Range<usize>) {
        if range.is_empty() {
            return;
        }
        self.consumed.push(range);
        self.consumed.sort_by_key(|r| r.start);
        let mut merged: Vec<Range<usize>> = Vec::with_capacity(self.consumed.len());
        for r in self.consumed.drain(..) {
            match merged.last_mut() {
                Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
                _ => merged.push(r),
            }
        }
        self.consumed = merged;
    }

    fn take(&mut self, offset: usize, needed: usize) -> Result<&[bool], OtpError> {
        let end = offset + needed;
        if end > self.bits.len() {
            return Err(OtpError::KeyTooShort {
                offset,
                available: self.bits.len().saturating_sub(offset),
                needed,
            });
        }
        if let Some(r) = self.consumed.iter().find(|r| r.start < end && offset < r.end) {
            return Err(OtpError::KeyReuse {
                start: r.start.max(offset),
                end: r.end.min(end),
            });
        }
        self.mark(offset..end);
        Ok(&self.bits[offset..end])
    }

    /// Encrypts with the next unused key bits.
    pub fn encrypt(&mut self, message: &[u8]) -> Result<OtpCiphertext, OtpError> {
        let offset = self.next_free();
        self.encrypt_at(offset, message)
    }

    pub fn encrypt_at(&mut self, offset: usize, message: &[u8]) -> Result<OtpCiphertext, OtpError> {
        let key = self.take(offset, message.len() * 8)?;
        Ok(OtpCiphertext {
            offset,
            bytes: otp_encrypt(key, message)?,
        })
    }

    /// Decrypts with the key segment named in the ciphertext, spending it on
    /// this pad.
    pub fn decrypt(&mut self, ct: &OtpCiphertext) -> Result<Vec<u8>, OtpError> {
        let key = self.take(ct.offset, ct.bytes.len() * 8)?;
        otp_decrypt(key, &ct.bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_key_is_identity() {
        let msg = b"attack at dawn";
        assert_eq!(otp_encrypt(&vec![false; msg.len() * 8], msg).unwrap(), msg.to_vec());
    }

    #[test]
    fn short_key_is_rejected() {
        assert!(matches!(otp_encrypt(&[true; 7], b"x"), Err(OtpError::KeyTooShort { .. })));
    }

    #[test]
    fn pad_refuses_reuse() {
        let bits = bytes_to_bits(&[0xA5, 0x3C, 0xFF, 0x00]);
        let mut alice = KeyPad::new(bits.clone());
        let mut bob = KeyPad::new(bits);
        let ct = alice.encrypt(b"hi").unwrap();
        assert_eq!(bob.decrypt(&ct).unwrap(), b"hi".to_vec());
        assert!(matches!(bob.decrypt(&ct), Err(OtpError::KeyReuse { .. })));
        assert!(matches!(alice.encrypt_at(0, b"x"), Err(OtpError::KeyReuse { .. })));
        let ct2 = alice.encrypt(b"yo").unwrap();
        assert_eq!(ct2.offset, 16);
        assert!(matches!(alice.encrypt(b"z"), Err(OtpError::KeyTooShort { .. })));
        assert_eq!(alice.consumed(), std::slice::from_ref(&(0..32)));
    }

    #[test]
    fn bit_packing_round_trip() {
        let bytes = vec![0x01, 0x80, 0x7E];
        assert_eq!(bits_to_bytes(&bytes_to_bits(&bytes)), bytes);
    }
}
