//! Flat `key = value` settings with layered resolution: built-in defaults,
//! then a config file, then command-line overrides.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, Result};

pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn k(key: &'static str, default: Option<&'static str>, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

/// Every recognised key. Keys without a default only take effect when given.
pub const KEYS: &[KeySpec] = &[
    k("seed", None, "master seed, required by every simulation"),
    k("rounds", Some("100000"), "rounds (or bombs) to simulate"),
    k("window_s", Some("20"), "acquisition window for reported counts, seconds"),
    k("source.herald_rate", None, "heralded pairs per second"),
    k("source.p_multi", None, "two-photon emission probability"),
    k("source.coupling_efficiency", None, "fiber coupling efficiency"),
    k("source.herald_window", None, "coincidence window, seconds"),
    k("d0.efficiency", None, "D0 detection efficiency"),
    k("d0.dark_rate", None, "D0 dark counts per second"),
    k("d0.jitter_sigma", None, "D0 timing jitter, seconds"),
    k("d0.gate_window", None, "D0 gate length, seconds"),
    k("d1.efficiency", None, "D1 detection efficiency"),
    k("d1.dark_rate", None, "D1 dark counts per second"),
    k("d1.jitter_sigma", None, "D1 timing jitter, seconds"),
    k("d1.gate_window", None, "D1 gate length, seconds"),
    k("d2.efficiency", None, "D2 detection efficiency"),
    k("d2.dark_rate", None, "D2 dark counts per second"),
    k("d2.jitter_sigma", None, "D2 timing jitter, seconds"),
    k("d2.gate_window", None, "D2 gate length, seconds"),
    k("gv.preset", Some("ideal"), "ideal | table1 | default"),
    k("gv.visibility_target", None, "phase noise tuned to this fringe visibility"),
    k("gv.tau", None, "delay-line storage time, seconds"),
    k("gv.channel_time", None, "channel travel time, seconds"),
    k("gv.phase_offset", None, "interferometer phase, radians"),
    k("gv.phase_noise_sigma", None, "Gaussian phase noise, radians"),
    k("gv.timing_tolerance", None, "arrival-time acceptance half-width, seconds"),
    k("n09.preset", Some("fitted"), "ideal | fitted | default"),
    k("n09.fit.qber", Some("0.12"), "raw QBER the fitted preset reproduces"),
    k("n09.fit.qber_corrected", Some("0.07"), "dark-subtracted QBER the fitted preset reproduces"),
    k("n09.fit.eta", Some("0.6"), "detector efficiency of the fitted preset"),
    k("n09.alice_p_half_pi", None, "probability Alice picks pi/2"),
    k("n09.bob_p_half_pi", None, "probability Bob picks pi/2"),
    k("n09.phase_offset", None, "interferometer phase, radians"),
    k("n09.phase_noise_sigma", None, "Gaussian phase noise, radians"),
    k("n09.polarizer_check", None, "true | false"),
    k("n09.wrong_polarization_prob", None, "probability a D1 click has the wrong polarization"),
    k("n09.channel_time", None, "channel travel time, seconds"),
    k("n09.gamma", None, "override for gamma in the security report"),
    k("n09.eta", None, "override for eta in the security report"),
    k("bb84.sacrifice_fraction", Some("0.5"), "share of sifted bits compared publicly"),
    k("bb84.efficiency", Some("1"), "Bob's detection efficiency"),
    k("bomb.usable_fraction", Some("0.5"), "share of live bombs"),
    k("bomb.max_repeats", Some("1"), "passes per bomb before giving up"),
    k("attack.kind", Some("none"), "none | intercept | tap | time-shift | store-forward"),
    k("attack.rate", Some("1"), "fraction of rounds Eve acts on"),
    k("attack.basis", Some("random"), "intercept basis: random | rectilinear | diagonal"),
    k("attack.reflectivity", Some("0.5"), "tap beam-splitter reflectivity"),
    k("attack.eta_shift", Some("1,1,1"), "time-shift efficiency multipliers for D0,D1,D2"),
    k("attack.hold_bins", Some("1"), "store-and-forward hold, timebins"),
    k("attack.seed", None, "Eve's seed; defaults to the master seed"),
    k("eval.protocol", Some("n09"), "protocol under attack: gv | n09 | bb84"),
    k("scan.protocol", Some("gv"), "gv | n09"),
    k("scan.points", Some("36"), "phase points"),
    k("scan.span", Some("6.283185307179586"), "scanned phase range, radians"),
    k("scan.rounds_per_point", Some("10000"), "rounds at each phase"),
    k("scan.bit", Some("0"), "GV source bit"),
    k("scan.angles", Some("0,0"), "N09 angle pair, each 0 or pi/2"),
];

fn spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|s| s.key == key)
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_flat(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("line {}: expected key = value", n + 1)))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `--set key=value` argument.
pub fn parse_assignment(arg: &str) -> Result<(String, String)> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override {arg:?} is not key=value")))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Defaults, then `file`, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut s = Self::default();
        for spec in KEYS {
            if let Some(d) = spec.default {
                s.values.insert(spec.key.to_string(), d.to_string());
            }
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            for (key, value) in parse_flat(&text)? {
                s.set(&key, &value)?;
            }
        }
        for (key, value) in overrides {
            s.set(key, value)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if spec(key).is_none() {
            return Err(CliError::config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Resolved value of every key that has one.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(spec(key).is_some(), "unregistered key {key}");
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| CliError::config(format!("{key} is required")))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(|v| parse_f64(key, v)).transpose()
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(key, self.require(key)?)
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::config(format!("{key} = {v:?} is not a non-negative integer")))
            })
            .transpose()
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.u64_opt(key)?
            .ok_or_else(|| CliError::config(format!("{key} is required")))
    }

    pub fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(CliError::config(format!("{key} = {v:?} is not a boolean"))),
            })
            .transpose()
    }

    /// The master seed.
    pub fn seed(&self) -> Result<u64> {
        self.u64_opt("seed")?
            .ok_or_else(|| CliError::config("seed is required (use --seed or seed = N)"))
    }

    /// Round count, at least one.
    pub fn rounds(&self) -> Result<u64> {
        match self.u64("rounds")? {
            0 => Err(CliError::config("rounds must be at least 1")),
            n => Ok(n),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::config(format!("{key} = {v:?} is not a finite number")))
}

/// Parses a list such as `1,0.5,1`.
pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| parse_f64(key, x.trim())).collect()
}

/// Angle written as `0`, `pi/2` or radians.
pub fn parse_angle(key: &str, v: &str) -> Result<f64> {
    match v.trim() {
        "0" => Ok(0.0),
        "pi/2" | "π/2" => Ok(std::f64::consts::FRAC_PI_2),
        other => parse_f64(key, other),
    }
}
