//! Interaction-free bomb testing in a balanced Mach-Zehnder interferometer.
//!
//! A live bomb in arm `b` absorbs the photon if it goes that way (and
//! explodes); a dud is transparent. With no bomb the photon always leaves
//! through the bright port, so a click at the dark port proves a live bomb
//! without the photon having touched it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{ModeLabel, ModeRegistry, OpticsError, PathId, PhotonState, Polarization};
use crate::seed::{round_rng, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BombError {
    #[error("fraction_usable = {0} is not in [0, 1]")]
    InvalidFraction(f64),
    #[error("max_repeats must be at least 1")]
    NoRepeats,
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BombReport {
    pub usable: u64,
    pub duds: u64,
    /// Live bombs seen at the dark port.
    pub identified: u64,
    pub detonated: u64,
    /// Live bombs still undecided after the last pass.
    pub inconclusive: u64,
    /// Duds: never explode, never reach the dark port.
    pub duds_inconclusive: u64,
    pub passes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pass {
    Exploded,
    DarkPort,
    BrightPort,
}

struct Interferometer {
    registry: std::sync::Arc<ModeRegistry>,
    a: PathId,
    b: PathId,
}

impl Interferometer {
    fn new() -> Result<Self, BombError> {
        let registry = ModeRegistry::new(["a", "b"], 1)?;
        Ok(Self {
            a: registry.path("a")?,
            b: registry.path("b")?,
            registry,
        })
    }

    fn pass(&self, live: bool, rng: &mut SimRng) -> Result<Pass, BombError> {
        let mut s = PhotonState::single(&self.registry, ModeLabel::new(self.a, Polarization::H, 0))?
            .apply_beamsplitter(self.a, self.b)?;
        if live {
            s = s.apply_loss(self.b, 0.0)?;
        }
        let s = s.apply_beamsplitter(self.a, self.b)?;
        Ok(match s.sample(rng) {
            None => Pass::Exploded,
            Some(m) if m.path == self.a => Pass::DarkPort,
            Some(_) => Pass::BrightPort,
        })
    }
}

/// How testing one bomb ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BombVerdict {
    Identified,
    Detonated,
    Inconclusive,
}

impl BombVerdict {
    pub fn label(self) -> &'static str {
        match self {
            BombVerdict::Identified => "identified",
            BombVerdict::Detonated => "detonated",
            BombVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BombTrial {
    pub index: u64,
    pub live: bool,
    pub passes: u32,
    pub verdict: BombVerdict,
}

/// Per-bomb records of a test run. The first `round(n_bombs · fraction_usable)`
/// bombs are live. Bombs that only ever send the photon to the bright port are
/// retested up to `max_repeats` passes in total.
pub fn bomb_trials(
    n_bombs: u64,
    fraction_usable: f64,
    max_repeats: u32,
    seed: u64,
) -> Result<Vec<BombTrial>, BombError> {
    if !(0.0..=1.0).contains(&fraction_usable) {
        return Err(BombError::InvalidFraction(fraction_usable));
    }
    if max_repeats == 0 {
        return Err(BombError::NoRepeats);
    }
    let mzi = Interferometer::new()?;
    let usable = (n_bombs as f64 * fraction_usable).round() as u64;
    (0..n_bombs)
        .into_par_iter()
        .map(|index| {
            let mut rng = round_rng(seed, index);
            let live = index < usable;
            let mut verdict = BombVerdict::Inconclusive;
            let mut passes = 0;
            while passes < max_repeats {
                passes += 1;
                match mzi.pass(live, &mut rng)? {
                    Pass::Exploded => verdict = BombVerdict::Detonated,
                    Pass::DarkPort => verdict = BombVerdict::Identified,
                    Pass::BrightPort => continue,
                }
                break;
            }
            Ok(BombTrial {
                index,
                live,
                passes,
                verdict,
            })
        })
        .collect()
}

/// Totals of [`bomb_trials`].
pub fn bomb_report(trials: &[BombTrial]) -> BombReport {
    let mut r = BombReport::default();
    for t in trials {
        if t.live {
            r.usable += 1;
        } else {
            r.duds += 1;
        }
        r.passes += t.passes as u64;
        match (t.verdict, t.live) {
            (BombVerdict::Identified, _) => r.identified += 1,
            (BombVerdict::Detonated, _) => r.detonated += 1,
            (BombVerdict::Inconclusive, true) => r.inconclusive += 1,
            (BombVerdict::Inconclusive, false) => r.duds_inconclusive += 1,
        }
    }
    r
}

/// Aggregate outcome of [`bomb_trials`].
pub fn bomb_tester(
    n_bombs: u64,
    fraction_usable: f64,
    max_repeats: u32,
    seed: u64,
) -> Result<BombReport, BombError> {
    Ok(bomb_report(&bomb_trials(n_bombs, fraction_usable, max_repeats, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duds_never_explode_or_identify() {
        let r = bomb_tester(2000, 0.0, 5, 3).unwrap();
        assert_eq!(r.detonated, 0);
        assert_eq!(r.identified, 0);
        assert_eq!(r.duds_inconclusive, 2000);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(bomb_tester(1, 1.5, 1, 0), Err(BombError::InvalidFraction(_))));
        assert!(matches!(bomb_tester(1, 1.0, 0, 0), Err(BombError::NoRepeats)));
    }

    #[test]
    fn live_pass_probabilities_are_exact_in_the_optics() {
        let mzi = Interferometer::new().unwrap();
        let s = PhotonState::single(&mzi.registry, ModeLabel::new(mzi.a, Polarization::H, 0))
            .unwrap()
            .apply_beamsplitter(mzi.a, mzi.b)
            .unwrap()
            .apply_loss(mzi.b, 0.0)
            .unwrap()
            .apply_beamsplitter(mzi.a, mzi.b)
            .unwrap();
        assert!((s.loss_weight() - 0.5).abs() < 1e-12);
        assert!((s.path_weight(mzi.a) - 0.25).abs() < 1e-12);
        assert!((s.path_weight(mzi.b) - 0.25).abs() < 1e-12);
    }
}
