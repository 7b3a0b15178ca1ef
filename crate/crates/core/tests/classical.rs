use orthokey::classical::{
    caesar, caesar_with, crack_vigenere, frequency_crack, kasiski, recover_keyword, vigenere, Alphabet,
    ClassicalError, Direction, FrequencyProfile, TextMode,
};

const ENGLISH: &str = include_str!("data/declaration.txt");
const ITALIAN: &str = include_str!("data/inferno.txt");

fn strip(text: &str, a: &Alphabet) -> String {
    caesar_with(text, 0, a, Direction::Encrypt, TextMode::Strip).unwrap()
}

#[test]
fn printed_examples_decrypt_back() {
    let it = Alphabet::italian();
    assert_eq!(caesar("QRFZHDGRUZN", 3, &it, Direction::Decrypt).unwrap(), "NOCTEADORTI");
    let en = Alphabet::english();
    assert_eq!(
        vigenere("QZPPXOEKXBSFVVBCDMHAOXLX", "GREEN", &en, Direction::Decrypt).unwrap(),
        "KILLKINGTOMORROWMIDNIGHT"
    );
}

#[test]
fn italian_shift_is_recovered() {
    let it = Alphabet::italian();
    let plain = strip(ITALIAN, &it);
    assert!(plain.len() >= 200);
    for shift in [1, 3, 10, 20] {
        let ct = caesar(&plain, shift, &it, Direction::Encrypt).unwrap();
        let r = frequency_crack(&ct, &FrequencyProfile::italian(), 200).unwrap();
        assert_eq!(r.best_shift(), shift as usize);
        assert!(!r.low_confidence, "shift {shift}: {}", r.confidence);
    }
}

#[test]
fn every_english_shift_is_recovered() {
    let en = Alphabet::english();
    let plain = strip(ENGLISH, &en);
    for shift in 0..26 {
        let ct = caesar(&plain, shift, &en, Direction::Encrypt).unwrap();
        let r = frequency_crack(&ct, &FrequencyProfile::english(), 200).unwrap();
        assert_eq!(r.best_shift(), shift as usize);
        assert_eq!(r.ranking.len(), 26);
    }
}

#[test]
fn keyword_recovery_reports_column_confidence() {
    let en = Alphabet::english();
    let plain = strip(ENGLISH, &en);
    let ct = vigenere(&plain, "GREEN", &en, Direction::Encrypt).unwrap();
    let crack = crack_vigenere(&ct, &FrequencyProfile::english(), 3).unwrap();
    assert_eq!(crack.key_length, 5);
    assert_eq!(crack.recovery.masked(0.5), "GREEN");
    assert!(crack.recovery.columns.iter().all(|c| c.confidence > 0.5));
    assert_eq!(crack.kasiski.best(), Some(5));

    // a short prefix leaves some columns uncertain
    let short: String = ct.chars().take(60).collect();
    let weak = recover_keyword(&short, 5, &FrequencyProfile::english()).unwrap();
    assert!(weak.mean_confidence() < crack.recovery.mean_confidence());
}

#[test]
fn longer_keys_and_accented_text() {
    let en = Alphabet::english();
    let plain = strip(ENGLISH, &en);
    let ct = vigenere(&plain, "LIBERTY", &en, Direction::Encrypt).unwrap();
    let crack = crack_vigenere(&ct, &FrequencyProfile::english(), 3).unwrap();
    assert_eq!(crack.recovery.keyword, "LIBERTY");

    let it = Alphabet::italian();
    let plain = strip(ITALIAN, &it);
    let ct = vigenere(&plain, "DUE", &it, Direction::Encrypt).unwrap();
    let r = recover_keyword(&ct, 3, &FrequencyProfile::italian()).unwrap();
    assert_eq!(r.keyword, "DUE");
}

#[test]
fn kasiski_edge_cases() {
    let en = Alphabet::english();
    assert!(matches!(
        kasiski("ABCAB", &en, 3),
        Err(ClassicalError::TextTooShort { .. })
    ));
    let k = kasiski("ABCDEFGHIJKLMNOPQRSTUVWXYZ", &en, 3).unwrap();
    assert!(k.is_inconclusive());
    assert!(matches!(
        crack_vigenere("ABCDEFGHIJKLMNOPQRSTUVWXYZ", &FrequencyProfile::english(), 3),
        Err(ClassicalError::Inconclusive)
    ));
    // every distance is a multiple of 4 here
    let k = kasiski("QWERQWERQWERQWERQWER", &en, 3).unwrap();
    assert!(k.candidates.iter().any(|c| c.length == 4));
    assert!(k.distances.iter().all(|d| d % 4 == 0));
}

#[test]
fn profiles_from_files_and_text() {
    let p = FrequencyProfile::from_csv("symbol,frequency\nX,1\nY,1\nZ,2\n").unwrap();
    assert_eq!(p.alphabet().as_string(), "XYZ");
    assert_eq!(p.frequencies(), &[0.25, 0.25, 0.5]);
    let t = FrequencyProfile::from_text("aab!", &Alphabet::new("AB").unwrap()).unwrap();
    assert!((t.frequency('A').unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(FrequencyProfile::from_text("!!!", &Alphabet::english()).is_err());
}
