//! Classical cipher tools and the one-time pad.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use orthokey::classical::analysis::LOW_CONFIDENCE;
use orthokey::classical::{
    caesar_with, crack_vigenere, frequency_crack, vigenere_with, Alphabet, Direction, FrequencyProfile, TextMode,
};
use orthokey::session::{KeyPad, OtpCiphertext};

use crate::error::{CliError, Result};
use crate::output::SCHEMA_VERSION;

/// File contents, or standard input for `None` and `-`.
pub fn read_input(path: Option<&Path>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match path {
        Some(p) if p != Path::new("-") => {
            buf = std::fs::read(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
        }
        _ => {
            std::io::stdin().read_to_end(&mut buf)?;
        }
    }
    Ok(buf)
}

pub fn read_text(path: Option<&Path>) -> Result<String> {
    String::from_utf8(read_input(path)?).map_err(|_| CliError::config("input is not UTF-8 text"))
}

/// Bundled profile for `lang`, or one loaded from a `symbol,frequency` CSV.
pub fn profile(lang: &str, csv: Option<&Path>) -> Result<FrequencyProfile> {
    if let Some(p) = csv {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
        return Ok(FrequencyProfile::from_csv(&text)?);
    }
    match lang {
        "en" => Ok(FrequencyProfile::english()),
        "it" => Ok(FrequencyProfile::italian()),
        other => Err(CliError::config(format!("language {other:?} is not en or it"))),
    }
}

fn doc(command: &str, config: Value, result: Value) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "command": command, "config": config, "result": result })
}

/// Frequency attack on a shift cipher. Returns the summary document and a
/// human-readable report.
pub fn crack_caesar(text: &str, reference: &FrequencyProfile, min_length: usize, config: Value) -> Result<(Value, String)> {
    let r = frequency_crack(text, reference, min_length)?;
    let alphabet = reference.alphabet();
    let shift = r.best_shift();
    let plaintext = caesar_with(text, shift as i64, alphabet, Direction::Decrypt, TextMode::Preserve)?;
    let top: Vec<Value> = r
        .ranking
        .iter()
        .take(5)
        .map(|s| json!({ "shift": s.shift, "chi_squared": s.chi_squared }))
        .collect();
    let mut human = format!(
        "shift: {shift} (key {})\nconfidence: {:.4}\n",
        alphabet.symbol(shift),
        r.confidence
    );
    if r.low_confidence {
        human.push_str("warning: low confidence\n");
    }
    human.push_str(&format!("plaintext:\n{plaintext}\n"));
    let result = json!({
        "shift": shift,
        "key": alphabet.symbol(shift).to_string(),
        "confidence": r.confidence,
        "low_confidence": r.low_confidence,
        "ranking": top,
        "plaintext": plaintext,
    });
    Ok((doc("crack caesar", config, result), human))
}

/// Kasiski examination plus column-wise frequency analysis.
pub fn crack_vig(text: &str, reference: &FrequencyProfile, min_ngram: usize, config: Value) -> Result<(Value, String)> {
    let c = crack_vigenere(text, reference, min_ngram)?;
    let keyword = &c.recovery.keyword;
    let plaintext = vigenere_with(text, keyword, reference.alphabet(), Direction::Decrypt, TextMode::Preserve)?;
    let masked = c.recovery.masked(LOW_CONFIDENCE);
    let confidence = c.recovery.mean_confidence();
    let mut human = format!(
        "key length: {}\nkeyword: {keyword}\nconfident letters: {masked}\nconfidence: {confidence:.4}\n",
        c.key_length
    );
    if confidence < LOW_CONFIDENCE {
        human.push_str("warning: low confidence\n");
    }
    human.push_str(&format!("plaintext:\n{plaintext}\n"));
    let result = json!({
        "key_length": c.key_length,
        "keyword": keyword,
        "masked_keyword": masked,
        "confidence": confidence,
        "columns": c.recovery.columns,
        "key_length_candidates": c.kasiski.candidates,
        "plaintext": plaintext,
    });
    Ok((doc("crack vigenere", config, result), human))
}

/// Shift as a number or as the key letter.
pub fn parse_shift(key: &str, alphabet: &Alphabet) -> Result<i64> {
    if let Ok(n) = key.parse::<i64>() {
        return Ok(n);
    }
    let mut chars = key.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => alphabet
            .index_of(c.to_ascii_uppercase())
            .map(|i| i as i64)
            .ok_or_else(|| CliError::config(format!("key {key:?} is not in the alphabet"))),
        _ => Err(CliError::config(format!("caesar key {key:?} is neither a number nor a letter"))),
    }
}

// ---------------------------------------------------------------- one-time pad

/// Reads a key written as `0`/`1` characters; whitespace is ignored.
pub fn read_key(path: &Path) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CliError::config(format!("key file contains {other:?}"))),
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CipherFile {
    pub schema_version: u32,
    pub offset: usize,
    pub hex: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct PadState {
    schema_version: u32,
    /// Spent key ranges as `[start, end)`.
    consumed: Vec<[usize; 2]>,
}

fn load_pad(key: Vec<bool>, state: Option<&Path>) -> Result<KeyPad> {
    let ranges = match state {
        Some(p) if p.exists() => {
            let st: PadState = serde_json::from_str(&std::fs::read_to_string(p)?)
                .map_err(|e| CliError::config(format!("pad state {}: {e}", p.display())))?;
            st.consumed.iter().map(|[a, b]| *a..*b).collect()
        }
        _ => Vec::new(),
    };
    Ok(KeyPad::with_consumed(key, ranges))
}

fn save_pad(pad: &KeyPad, state: Option<&Path>) -> Result<()> {
    if let Some(p) = state {
        let st = PadState {
            schema_version: SCHEMA_VERSION,
            consumed: pad.consumed().iter().map(|r| [r.start, r.end]).collect(),
        };
        std::fs::write(p, serde_json::to_string_pretty(&st)? + "\n")?;
    }
    Ok(())
}

/// Encrypts with the next unused key bits, recording them in `state`.
pub fn otp_encrypt_file(key: &Path, message: &[u8], output: &Path, state: Option<&Path>) -> Result<String> {
    let mut pad = load_pad(read_key(key)?, state)?;
    let ct = pad.encrypt(message)?;
    let file = CipherFile {
        schema_version: SCHEMA_VERSION,
        offset: ct.offset,
        hex: hex::encode(&ct.bytes),
    };
    std::fs::write(output, serde_json::to_string_pretty(&file)? + "\n")?;
    save_pad(&pad, state)?;
    Ok(format!(
        "encrypted {} bytes with key bits {}..{} ({} of {} bits spent)\n",
        message.len(),
        ct.offset,
        ct.offset + 8 * message.len(),
        pad.consumed_bits(),
        pad.len()
    ))
}

pub fn otp_decrypt_file(key: &Path, ciphertext: &[u8], state: Option<&Path>) -> Result<Vec<u8>> {
    let file: CipherFile =
        serde_json::from_slice(ciphertext).map_err(|e| CliError::config(format!("ciphertext file: {e}")))?;
    let bytes = hex::decode(&file.hex).map_err(|e| CliError::config(format!("ciphertext hex: {e}")))?;
    let mut pad = load_pad(read_key(key)?, state)?;
    let plain = pad.decrypt(&OtpCiphertext {
        offset: file.offset,
        bytes,
    })?;
    save_pad(&pad, state)?;
    Ok(plain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_parsing() {
        let en = Alphabet::english();
        assert_eq!(parse_shift("3", &en).unwrap(), 3);
        assert_eq!(parse_shift("d", &en).unwrap(), 3);
        assert!(parse_shift("DD", &en).is_err());
    }
}
