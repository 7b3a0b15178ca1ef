//! `orthokey`: run key-distribution experiments and classical cipher tools
//! from the command line.
//!
//! Simulation subcommands resolve a flat key = value configuration (built-in
//! defaults, then `--config FILE`, then `--set KEY=VALUE` and dedicated
//! flags) and write `rounds.csv`, `summary.json` and `table.txt` into the
//! output directory. Failures print one JSON line on stderr and exit with 2
//! for configuration errors, 3 for insufficient data.

mod commands;
mod config;
mod error;
mod experiment;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use orthokey::classical::{caesar_with, vigenere_with, Direction, TextMode};

use commands::crypto;
use config::{parse_assignment, Settings, KEYS};
use error::{CliError, Result};
use output::Artifacts;

#[derive(Parser)]
#[command(name = "orthokey", version, about = "Orthogonal-state and counterfactual QKD simulator")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    /// Directory for the output artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// none | intercept | tap | time-shift | store-forward
    #[arg(long)]
    attack: Option<String>,
    #[arg(long, value_name = "RATE")]
    attack_rate: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-state orthogonal protocol with delay-line timing checks.
    Gv {
        #[command(flatten)]
        run: RunArgs,
        /// ideal | table1 | default
        #[arg(long)]
        preset: Option<String>,
        /// Phase noise giving this fringe visibility.
        #[arg(long, value_name = "V")]
        visibility_target: Option<String>,
    },
    /// Counterfactual protocol with random angle choices.
    N09 {
        #[command(flatten)]
        run: RunArgs,
        /// Shorthand for --preset ideal.
        #[arg(long, conflicts_with = "preset")]
        ideal: bool,
        /// ideal | fitted | default
        #[arg(long)]
        preset: Option<String>,
    },
    /// Four-state prepare-and-measure baseline; also writes key.txt and
    /// transcript.jsonl.
    Bb84 {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Interaction-free bomb testing; --rounds is the number of bombs.
    Bomb {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "F")]
        usable_fraction: Option<String>,
        #[arg(long, value_name = "N")]
        max_repeats: Option<String>,
    },
    /// Runs a protocol with and without the configured attack.
    AttackEval {
        #[command(flatten)]
        run: RunArgs,
        /// gv | n09 | bb84
        #[arg(long)]
        protocol: Option<String>,
    },
    /// Phase scan; writes fringe.csv instead of rounds.csv.
    FringeScan {
        #[command(flatten)]
        run: RunArgs,
        /// gv | n09
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        points: Option<String>,
        #[arg(long, value_name = "N")]
        rounds_per_point: Option<String>,
        /// N09 angle pair, e.g. 0,pi/2
        #[arg(long)]
        angles: Option<String>,
        /// GV source bit
        #[arg(long)]
        bit: Option<String>,
        /// Shorthand for --set gv.preset=ideal / n09.preset=ideal.
        #[arg(long)]
        ideal: bool,
    },
    /// Recover the key of a Caesar or Vigenère ciphertext.
    Crack {
        #[command(subcommand)]
        cipher: CrackCommand,
    },
    /// Encrypt or decrypt with a Caesar or Vigenère key.
    Cipher {
        #[command(subcommand)]
        cipher: CipherCommand,
    },
    /// One-time pad with a key file of 0/1 characters.
    Otp {
        #[command(subcommand)]
        op: OtpCommand,
    },
    /// List configuration keys with their defaults.
    Keys,
}

#[derive(Args)]
struct TextArgs {
    /// Input file; standard input when absent or "-".
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// en | it
    #[arg(long, default_value = "en")]
    lang: String,
}

#[derive(Subcommand)]
enum CrackCommand {
    Caesar {
        #[command(flatten)]
        text: TextArgs,
        /// symbol,frequency CSV replacing the bundled profile.
        #[arg(long, value_name = "CSV")]
        profile: Option<PathBuf>,
        /// Fewest alphabet symbols accepted.
        #[arg(long, default_value_t = orthokey::classical::analysis::DEFAULT_MIN_LENGTH)]
        min_length: usize,
        /// Print the JSON summary instead of text.
        #[arg(long)]
        json: bool,
    },
    Vigenere {
        #[command(flatten)]
        text: TextArgs,
        #[arg(long, value_name = "CSV")]
        profile: Option<PathBuf>,
        /// Shortest repeated sequence counted by the Kasiski examination.
        #[arg(long, default_value_t = 3)]
        min_ngram: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum CipherCommand {
    Caesar {
        #[command(flatten)]
        text: TextArgs,
        /// Shift as a number or letter.
        #[arg(long)]
        key: String,
        #[arg(long)]
        decrypt: bool,
    },
    Vigenere {
        #[command(flatten)]
        text: TextArgs,
        #[arg(long)]
        key: String,
        #[arg(long)]
        decrypt: bool,
    },
}

#[derive(Subcommand)]
enum OtpCommand {
    Encrypt {
        #[arg(long, value_name = "FILE")]
        key: PathBuf,
        #[arg(long = "in", value_name = "FILE")]
        input: Option<PathBuf>,
        /// Ciphertext file (JSON).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Records spent key bits across invocations.
        #[arg(long, value_name = "FILE")]
        state: Option<PathBuf>,
    },
    Decrypt {
        #[arg(long, value_name = "FILE")]
        key: PathBuf,
        #[arg(long = "in", value_name = "FILE")]
        input: Option<PathBuf>,
        /// Plaintext destination; standard output when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        state: Option<PathBuf>,
    },
}

/// Settings from defaults, the config file, `--set` and then the dedicated
/// flags in `extra`.
fn settings(run: &RunArgs, extra: Vec<(&str, Option<String>)>) -> Result<Settings> {
    let mut overrides = Vec::new();
    for a in &run.set {
        overrides.push(parse_assignment(a)?);
    }
    let flags = [
        ("seed", run.seed.clone()),
        ("rounds", run.rounds.clone()),
        ("attack.kind", run.attack.clone()),
        ("attack.rate", run.attack_rate.clone()),
    ];
    for (key, value) in flags.into_iter().chain(extra) {
        if let Some(v) = value {
            overrides.push((key.to_string(), v));
        }
    }
    let mut s = Settings::resolve(run.config.as_deref(), &overrides)?;
    let seed = s.seed()?;
    if s.get("attack.seed").is_none() {
        s.set("attack.seed", &seed.to_string())?;
    }
    s.rounds()?;
    Ok(s)
}

type Runner = fn(&Settings, &Artifacts) -> Result<String>;

fn simulate(run: &RunArgs, extra: Vec<(&str, Option<String>)>, runner: Runner) -> Result<()> {
    let s = settings(run, extra)?;
    let out = Artifacts::create(&run.out)?;
    let table = runner(&s, &out)?;
    print!("{table}");
    Ok(())
}

fn write_stdout(bytes: &[u8]) -> Result<()> {
    let mut o = std::io::stdout().lock();
    o.write_all(bytes)?;
    o.flush()?;
    Ok(())
}

fn alphabet_of(lang: &str) -> Result<orthokey::classical::Alphabet> {
    Ok(crypto::profile(lang, None)?.alphabet().clone())
}

fn dispatch(command: Command) -> Result<()> {
    use commands::{protocols, scan};
    match command {
        Command::Gv {
            run,
            preset,
            visibility_target,
        } => simulate(
            &run,
            vec![("gv.preset", preset), ("gv.visibility_target", visibility_target)],
            protocols::gv,
        ),
        Command::N09 { run, ideal, preset } => {
            let preset = if ideal { Some("ideal".into()) } else { preset };
            simulate(&run, vec![("n09.preset", preset)], protocols::n09)
        }
        Command::Bb84 { run } => simulate(&run, vec![], protocols::bb84),
        Command::Bomb {
            run,
            usable_fraction,
            max_repeats,
        } => simulate(
            &run,
            vec![("bomb.usable_fraction", usable_fraction), ("bomb.max_repeats", max_repeats)],
            protocols::bomb,
        ),
        Command::AttackEval { run, protocol } => {
            simulate(&run, vec![("eval.protocol", protocol)], protocols::attack_eval)
        }
        Command::FringeScan {
            run,
            protocol,
            points,
            rounds_per_point,
            angles,
            bit,
            ideal,
        } => {
            let ideal = ideal.then(|| "ideal".to_string());
            simulate(
                &run,
                vec![
                    ("gv.preset", ideal.clone()),
                    ("n09.preset", ideal),
                    ("scan.protocol", protocol),
                    ("scan.points", points),
                    ("scan.rounds_per_point", rounds_per_point),
                    ("scan.angles", angles),
                    ("scan.bit", bit),
                ],
                scan::fringe_scan,
            )
        }
        Command::Crack { cipher } => {
            let (doc, human, json_out) = match cipher {
                CrackCommand::Caesar {
                    text,
                    profile,
                    min_length,
                    json,
                } => {
                    let reference = crypto::profile(&text.lang, profile.as_deref())?;
                    let config = json!({ "lang": text.lang, "profile": profile, "min_length": min_length });
                    let (d, h) = crypto::crack_caesar(&crypto::read_text(text.input.as_deref())?, &reference, min_length, config)?;
                    (d, h, json)
                }
                CrackCommand::Vigenere {
                    text,
                    profile,
                    min_ngram,
                    json,
                } => {
                    let reference = crypto::profile(&text.lang, profile.as_deref())?;
                    let config = json!({ "lang": text.lang, "profile": profile, "min_ngram": min_ngram });
                    let (d, h) = crypto::crack_vig(&crypto::read_text(text.input.as_deref())?, &reference, min_ngram, config)?;
                    (d, h, json)
                }
            };
            if json_out {
                write_stdout((serde_json::to_string_pretty(&doc)? + "\n").as_bytes())
            } else {
                write_stdout(human.as_bytes())
            }
        }
        Command::Cipher { cipher } => {
            let out = match cipher {
                CipherCommand::Caesar { text, key, decrypt } => {
                    let alphabet = alphabet_of(&text.lang)?;
                    let shift = crypto::parse_shift(&key, &alphabet)?;
                    let dir = if decrypt { Direction::Decrypt } else { Direction::Encrypt };
                    caesar_with(&crypto::read_text(text.input.as_deref())?, shift, &alphabet, dir, TextMode::Preserve)?
                }
                CipherCommand::Vigenere { text, key, decrypt } => {
                    let alphabet = alphabet_of(&text.lang)?;
                    let dir = if decrypt { Direction::Decrypt } else { Direction::Encrypt };
                    vigenere_with(
                        &crypto::read_text(text.input.as_deref())?,
                        &key.to_uppercase(),
                        &alphabet,
                        dir,
                        TextMode::Preserve,
                    )?
                }
            };
            write_stdout(out.as_bytes())
        }
        Command::Otp { op } => match op {
            OtpCommand::Encrypt { key, input, out, state } => {
                let msg = crypto::read_input(input.as_deref())?;
                let note = crypto::otp_encrypt_file(&key, &msg, &out, state.as_deref())?;
                eprint!("{note}");
                Ok(())
            }
            OtpCommand::Decrypt { key, input, out, state } => {
                let ct = crypto::read_input(input.as_deref())?;
                let plain = crypto::otp_decrypt_file(&key, &ct, state.as_deref())?;
                match out {
                    Some(p) => Ok(std::fs::write(p, plain)?),
                    None => write_stdout(&plain),
                }
            }
        },
        Command::Keys => {
            let mut text = String::new();
            for k in KEYS {
                text.push_str(&format!("{:<28} {:<20} {}\n", k.key, k.default.unwrap_or("-"), k.help));
            }
            write_stdout(text.as_bytes())
        }
    }
}

fn init_threads(threads: Option<&str>) -> Result<()> {
    let Some(t) = threads else { return Ok(()) };
    let n: usize = t
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("--threads {t:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads(cli.threads.as_deref()).and_then(|()| dispatch(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.category.exit_code())
        }
    }
}
