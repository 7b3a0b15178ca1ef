//! Public-discussion steps shared by the protocols: basis sifting, sacrifice of
//! test bits, and use of the final key.

pub mod bb84;
pub mod messages;
pub mod otp;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{rng_from_seed, stream_seed, Stream};
use crate::stats::{binomial_rate, Estimate};

pub use bb84::{bb84_session, Bb84Config, Bb84Session};
pub use messages::{Basis, ClassicalChannel, Envelope, Party, PublicMessage};
pub use otp::{bits_to_bytes, bytes_to_bits, otp_decrypt, otp_encrypt, KeyPad, OtpCiphertext, OtpError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("key has {0} bits; at least two are needed to sacrifice some and keep some")]
    EmptyKey(usize),
    #[error("sacrifice fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("sacrifice position {0} is outside the key")]
    BadPosition(usize),
    #[error("round count must be positive")]
    NoRounds,
    #[error(transparent)]
    Attack(#[from] crate::adversary::AttackError),
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
}

pub type Result<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Bb84,
    Gv,
    N09,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftedKey {
    pub bits: Vec<bool>,
    pub source_protocol: Protocol,
    pub sacrificed_fraction: f64,
}

/// Rounds kept after basis reconciliation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BasisSift {
    /// Zero-based round indices.
    pub indices: Vec<usize>,
    /// Bob's results at those rounds.
    pub bits: Vec<bool>,
}

/// Keeps the rounds where both bases agree and Bob registered a result.
pub fn sift_bases(alice_bases: &[Basis], bob_bases: &[Basis], bob_results: &[Option<bool>]) -> Result<BasisSift> {
    if alice_bases.len() != bob_bases.len() {
        return Err(SessionError::LengthMismatch(alice_bases.len(), bob_bases.len()));
    }
    if alice_bases.len() != bob_results.len() {
        return Err(SessionError::LengthMismatch(alice_bases.len(), bob_results.len()));
    }
    let mut out = BasisSift::default();
    for (i, ((a, b), r)) in alice_bases.iter().zip(bob_bases).zip(bob_results).enumerate() {
        if let (true, Some(bit)) = (a == b, r) {
            out.indices.push(i);
            out.bits.push(*bit);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacrificeOutcome {
    pub qber_estimate: Estimate,
    /// Positions (into the input keys) that were compared and removed.
    pub positions: Vec<usize>,
    pub remaining_a: Vec<bool>,
    pub remaining_b: Vec<bool>,
}

/// Publicly compares the bits at `positions` and removes them from both keys.
pub fn sacrifice_at(key_a: &[bool], key_b: &[bool], positions: &[usize]) -> Result<SacrificeOutcome> {
    if key_a.len() != key_b.len() {
        return Err(SessionError::LengthMismatch(key_a.len(), key_b.len()));
    }
    let mut mask = vec![false; key_a.len()];
    for &p in positions {
        *mask.get_mut(p).ok_or(SessionError::BadPosition(p))? = true;
    }
    let mut sorted: Vec<usize> = (0..key_a.len()).filter(|&i| mask[i]).collect();
    sorted.dedup();
    let mismatches = sorted.iter().filter(|&&i| key_a[i] != key_b[i]).count() as u64;
    let qber_estimate =
        binomial_rate(mismatches, sorted.len() as u64).ok_or(SessionError::EmptyKey(key_a.len()))?;
    let keep = |k: &[bool]| -> Vec<bool> {
        k.iter().zip(&mask).filter(|(_, &m)| !m).map(|(b, _)| *b).collect()
    };
    Ok(SacrificeOutcome {
        qber_estimate,
        positions: sorted,
        remaining_a: keep(key_a),
        remaining_b: keep(key_b),
    })
}

/// Sacrifices a random `fraction` of positions (at least one, leaving at
/// least one).
pub fn sacrifice_and_estimate(key_a: &[bool], key_b: &[bool], fraction: f64, seed: u64) -> Result<SacrificeOutcome> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SessionError::InvalidFraction(fraction));
    }
    if key_a.len() != key_b.len() {
        return Err(SessionError::LengthMismatch(key_a.len(), key_b.len()));
    }
    let n = key_a.len();
    if n < 2 {
        return Err(SessionError::EmptyKey(n));
    }
    let k = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = rng_from_seed(stream_seed(seed, Stream::Sacrifice));
    let mut positions = index::sample(&mut rng, n, k).into_vec();
    positions.sort_unstable();
    sacrifice_at(key_a, key_b, &positions)
}
