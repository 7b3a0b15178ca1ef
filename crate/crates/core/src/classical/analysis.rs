//! Frequency analysis, Kasiski examination and keyword recovery.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{normalize, Alphabet, ClassicalError, Result};

const ENGLISH_CSV: &str = include_str!("../../data/english.csv");
const ITALIAN_CSV: &str = include_str!("../../data/italian.csv");

/// Reference frequencies below this value are raised to it when scoring, so
/// absent letters never divide by zero.
const FREQ_FLOOR: f64 = 1e-6;

pub const DEFAULT_MIN_LENGTH: usize = 200;

/// Confidence below which a frequency crack is flagged as unreliable.
pub const LOW_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    alphabet: Alphabet,
    freqs: Vec<f64>,
}

impl FrequencyProfile {
    /// Relative frequencies from raw weights; weights must be non-negative
    /// with a positive sum.
    pub fn from_weights(alphabet: Alphabet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != alphabet.len() {
            return Err(ClassicalError::BadProfile(format!(
                "{} weights for {} symbols",
                weights.len(),
                alphabet.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ClassicalError::BadProfile("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ClassicalError::BadProfile("weights sum to zero".into()));
        }
        Ok(Self {
            alphabet,
            freqs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Parses `symbol,frequency` lines. A header line and `#` comments are
    /// skipped; the alphabet is the symbols in file order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut symbols = String::new();
        let mut weights = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(sym), Some(val)) = (parts.next(), parts.next()) else {
                return Err(ClassicalError::BadProfile(format!("line {}: expected symbol,frequency", n + 1)));
            };
            let Ok(w) = val.trim().parse::<f64>() else {
                if n == 0 {
                    continue;
                }
                return Err(ClassicalError::BadProfile(format!("line {}: bad number {val:?}", n + 1)));
            };
            let mut chars = sym.trim().chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => symbols.push(c.to_ascii_uppercase()),
                _ => return Err(ClassicalError::BadProfile(format!("line {}: bad symbol {sym:?}", n + 1))),
            }
            weights.push(w);
        }
        Self::from_weights(Alphabet::new(&symbols)?, weights)
    }

    pub fn english() -> Self {
        Self::from_csv(ENGLISH_CSV).expect("bundled profile")
    }

    pub fn italian() -> Self {
        Self::from_csv(ITALIAN_CSV).expect("bundled profile")
    }

    /// Profile of the alphabet symbols in `text` (others ignored).
    pub fn from_text(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let counts = counts(&indices(text, alphabet), alphabet.len());
        Self::from_weights(alphabet.clone(), counts.into_iter().map(|c| c as f64).collect())
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub fn frequency(&self, c: char) -> Option<f64> {
        self.alphabet.index_of(c).map(|i| self.freqs[i])
    }
}

fn indices(text: &str, alphabet: &Alphabet) -> Vec<usize> {
    normalize(text, alphabet)
        .chars()
        .filter_map(|c| alphabet.index_of(c))
        .collect()
}

fn counts(idx: &[usize], n: usize) -> Vec<u64> {
    let mut c = vec![0u64; n];
    for &i in idx {
        c[i] += 1;
    }
    c
}

/// Chi-squared distance of the text decrypted with `shift` from `reference`.
fn chi_squared(counts: &[u64], total: f64, reference: &[f64], shift: usize) -> f64 {
    let n = reference.len();
    (0..n)
        .map(|i| {
            let observed = counts[(i + shift) % n] as f64;
            let expected = total * reference[i].max(FREQ_FLOOR);
            (observed - expected).powi(2) / expected
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftScore {
    pub shift: usize,
    pub chi_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackResult {
    /// All shifts, best (lowest chi-squared) first.
    pub ranking: Vec<ShiftScore>,
    /// `1 − best / median(other scores)`: near 1 when one shift stands out,
    /// near 0 when all shifts look alike.
    pub confidence: f64,
    pub low_confidence: bool,
}

impl CrackResult {
    pub fn best_shift(&self) -> usize {
        self.ranking[0].shift
    }
}

fn rank_shifts(idx: &[usize], reference: &FrequencyProfile) -> CrackResult {
    let n = reference.alphabet.len();
    let c = counts(idx, n);
    let total = idx.len() as f64;
    let mut ranking: Vec<ShiftScore> = (0..n)
        .map(|shift| ShiftScore {
            shift,
            chi_squared: chi_squared(&c, total, &reference.freqs, shift),
        })
        .collect();
    ranking.sort_by(|a, b| a.chi_squared.total_cmp(&b.chi_squared).then(a.shift.cmp(&b.shift)));
    let mut others: Vec<f64> = ranking[1..].iter().map(|s| s.chi_squared).collect();
    others.sort_by(|a, b| a.total_cmp(b));
    let median = others.get(others.len() / 2).copied().unwrap_or(0.0);
    let confidence = if median > 0.0 {
        (1.0 - ranking[0].chi_squared / median).clamp(0.0, 1.0)
    } else {
        0.0
    };
    CrackResult {
        ranking,
        confidence,
        low_confidence: confidence < LOW_CONFIDENCE,
    }
}

/// Ranks every shift by the chi-squared distance between the decrypted text
/// and `reference`. Text is normalized to the reference alphabet first.
pub fn frequency_crack(ciphertext: &str, reference: &FrequencyProfile, min_length: usize) -> Result<CrackResult> {
    let idx = indices(ciphertext, &reference.alphabet);
    if idx.len() < min_length.max(1) {
        return Err(ClassicalError::TextTooShort {
            got: idx.len(),
            need: min_length.max(1),
        });
    }
    Ok(rank_shifts(&idx, reference))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLengthCandidate {
    pub length: usize,
    /// Repeat distances divisible by this length.
    pub divides: usize,
    /// Standard score of `divides` against chance (a distance is divisible by
    /// `L` with probability `1/L`). Length 1 gets a fixed baseline.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KasiskiResult {
    pub distances: Vec<usize>,
    /// Best first; empty when nothing repeats.
    pub candidates: Vec<KeyLengthCandidate>,
}

impl KasiskiResult {
    pub fn is_inconclusive(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn best(&self) -> Option<usize> {
        self.candidates.first().map(|c| c.length)
    }
}

/// Score given to length 1, which trivially divides every distance.
pub const KASISKI_BASELINE: f64 = 4.0;
pub const KASISKI_MAX_LENGTH: usize = 30;

/// Collects distances between consecutive occurrences of every repeated
/// n-gram (length ≥ `min_ngram`) and ranks key lengths.
pub fn kasiski(ciphertext: &str, alphabet: &Alphabet, min_ngram: usize) -> Result<KasiskiResult> {
    let min_ngram = min_ngram.max(2);
    let idx = indices(ciphertext, alphabet);
    if idx.len() < 3 * min_ngram {
        return Err(ClassicalError::TextTooShort {
            got: idx.len(),
            need: 3 * min_ngram,
        });
    }
    let mut last_seen: HashMap<&[usize], usize> = HashMap::new();
    let mut distances = Vec::new();
    for start in 0..=idx.len() - min_ngram {
        let gram = &idx[start..start + min_ngram];
        if let Some(prev) = last_seen.insert(gram, start) {
            distances.push(start - prev);
        }
    }
    if distances.is_empty() {
        return Ok(KasiskiResult {
            distances,
            candidates: Vec::new(),
        });
    }
    let n = distances.len() as f64;
    let max_len = KASISKI_MAX_LENGTH.min(*distances.iter().max().unwrap_or(&1));
    let mut candidates = vec![KeyLengthCandidate {
        length: 1,
        divides: distances.len(),
        score: KASISKI_BASELINE,
    }];
    for len in 2..=max_len {
        let k = distances.iter().filter(|&&d| d % len == 0).count();
        let p = 1.0 / len as f64;
        let z = (k as f64 - n * p) / (n * p * (1.0 - p)).sqrt();
        if z > 0.0 {
            candidates.push(KeyLengthCandidate {
                length: len,
                divides: k,
                score: z,
            });
        }
    }
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.length.cmp(&b.length)));
    Ok(KasiskiResult { distances, candidates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnResult {
    pub symbol: char,
    pub shift: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordRecovery {
    pub keyword: String,
    pub columns: Vec<ColumnResult>,
}

impl KeywordRecovery {
    /// The keyword with columns below `threshold` confidence shown as `*`.
    pub fn masked(&self, threshold: f64) -> String {
        self.columns
            .iter()
            .map(|c| if c.confidence >= threshold { c.symbol } else { '*' })
            .collect()
    }

    pub fn mean_confidence(&self) -> f64 {
        if self.columns.is_empty() {
            return 0.0;
        }
        self.columns.iter().map(|c| c.confidence).sum::<f64>() / self.columns.len() as f64
    }
}

/// Splits the ciphertext into `key_length` columns and cracks each as a shift
/// cipher.
pub fn recover_keyword(ciphertext: &str, key_length: usize, reference: &FrequencyProfile) -> Result<KeywordRecovery> {
    if key_length == 0 {
        return Err(ClassicalError::EmptyKeyword);
    }
    let idx = indices(ciphertext, &reference.alphabet);
    if idx.len() < key_length {
        return Err(ClassicalError::TextTooShort {
            got: idx.len(),
            need: key_length,
        });
    }
    let columns: Vec<ColumnResult> = (0..key_length)
        .map(|col| {
            let column: Vec<usize> = idx.iter().skip(col).step_by(key_length).copied().collect();
            let r = rank_shifts(&column, reference);
            ColumnResult {
                symbol: reference.alphabet.symbol(r.best_shift()),
                shift: r.best_shift(),
                confidence: r.confidence,
            }
        })
        .collect();
    Ok(KeywordRecovery {
        keyword: columns.iter().map(|c| c.symbol).collect(),
        columns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VigenereCrack {
    pub kasiski: KasiskiResult,
    pub key_length: usize,
    pub recovery: KeywordRecovery,
}

/// Kasiski examination followed by per-column frequency analysis at the
/// top-ranked key length.
pub fn crack_vigenere(ciphertext: &str, reference: &FrequencyProfile, min_ngram: usize) -> Result<VigenereCrack> {
    let k = kasiski(ciphertext, &reference.alphabet, min_ngram)?;
    let key_length = k.best().ok_or(ClassicalError::Inconclusive)?;
    let recovery = recover_keyword(ciphertext, key_length, reference)?;
    Ok(VigenereCrack {
        kasiski: k,
        key_length,
        recovery,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_profiles_are_normalized() {
        for p in [FrequencyProfile::english(), FrequencyProfile::italian()] {
            let s: f64 = p.frequencies().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(p.frequencies().iter().all(|&f| f >= 0.0));
        }
        assert_eq!(FrequencyProfile::italian().alphabet().len(), 21);
        assert!(FrequencyProfile::english().frequency('E').unwrap() > 0.1);
    }

    #[test]
    fn csv_errors() {
        assert!(FrequencyProfile::from_csv("A,1\nB,x\n").is_err());
        assert!(FrequencyProfile::from_csv("symbol,frequency\nA,1\nB,3\n").is_ok());
        assert!(FrequencyProfile::from_csv("A,0\nB,0\n").is_err());
    }

    #[test]
    fn short_text_rejected() {
        let r = frequency_crack("ABC", &FrequencyProfile::english(), DEFAULT_MIN_LENGTH);
        assert!(matches!(r, Err(ClassicalError::TextTooShort { got: 3, .. })));
    }

    #[test]
    fn degenerate_single_symbol_text() {
        let text = "Q".repeat(300);
        let r = frequency_crack(&text, &FrequencyProfile::english(), DEFAULT_MIN_LENGTH).unwrap();
        assert!(r.ranking.iter().all(|s| s.chi_squared.is_finite()));
        // the lone symbol is read as the most common English letter
        assert_eq!(Alphabet::english().symbol((16 + 26 - r.best_shift()) % 26), 'E');
    }

    #[test]
    fn no_repeats_is_inconclusive() {
        let k = kasiski("ABCDEFGHIJKLMNOPQRSTUVWXYZ", &Alphabet::english(), 3).unwrap();
        assert!(k.is_inconclusive());
        assert!(kasiski("ABCDEFG", &Alphabet::english(), 3).is_err());
    }

    #[test]
    fn masking() {
        let r = KeywordRecovery {
            keyword: "GREEN".into(),
            columns: "GREEN"
                .chars()
                .zip([0.9, 0.1, 0.8, 0.7, 0.2])
                .map(|(c, conf)| ColumnResult {
                    symbol: c,
                    shift: 0,
                    confidence: conf,
                })
                .collect(),
        };
        assert_eq!(r.masked(0.5), "G*EE*");
    }
}
