//! Four-state prepare-and-measure baseline.
//!
//! Bits are encoded in photon polarization: rectilinear `0 → H`, `1 → V`;
//! diagonal `0 → +45°`, `1 → −45°`. Bob rotates his chosen basis onto H/V
//! and reads a polarizing beam splitter.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::messages::{Basis, ClassicalChannel, Envelope, Party, PublicMessage};
use super::{sacrifice_and_estimate, sift_bases, Result, SessionError};
use crate::adversary::{self, AttackKind, AttackStrategy};
use crate::optics::{ModeLabel, ModeRegistry, PathId, PhotonState, Polarization};
use crate::seed::{round_rng, SimRng};
use crate::stats::{binomial_rate, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bb84Config {
    pub sacrifice_fraction: f64,
    /// Bob's detection efficiency.
    pub efficiency: f64,
}

impl Default for Bb84Config {
    fn default() -> Self {
        Self {
            sacrifice_fraction: 0.5,
            efficiency: 1.0,
        }
    }
}

struct Bb84Optics {
    registry: Arc<ModeRegistry>,
    q: PathId,
    t: PathId,
    r: PathId,
}

impl Bb84Optics {
    fn new() -> Result<Self> {
        let registry = ModeRegistry::new(["q", "t", "r"], 1)?;
        Ok(Self {
            q: registry.path("q")?,
            t: registry.path("t")?,
            r: registry.path("r")?,
            registry,
        })
    }

    fn encode(&self, bit: bool, basis: Basis) -> Result<PhotonState> {
        let theta = match (basis, bit) {
            (Basis::Rectilinear, false) => 0.0,
            (Basis::Rectilinear, true) => std::f64::consts::FRAC_PI_2,
            (Basis::Diagonal, false) => FRAC_PI_4,
            (Basis::Diagonal, true) => -FRAC_PI_4,
        };
        let h = PhotonState::single(&self.registry, ModeLabel::new(self.q, Polarization::H, 0))?;
        Ok(h.apply_hwp(self.q, theta)?)
    }

    fn measure(&self, state: &PhotonState, basis: Basis, rng: &mut SimRng) -> Result<Option<bool>> {
        // diagonal: +45° ↦ H, −45° ↦ V under a −45° rotation
        let back = match basis {
            Basis::Rectilinear => 0.0,
            Basis::Diagonal => -FRAC_PI_4,
        };
        let out = state.apply_hwp(self.q, back)?.apply_pbs(self.q, self.t, self.r)?;
        Ok(out.sample(rng).map(|m| m.path == self.r))
    }
}

fn basis_from(b: bool) -> Basis {
    if b {
        Basis::Diagonal
    } else {
        Basis::Rectilinear
    }
}

/// Per-round record of the quantum phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bb84Round {
    pub alice_bit: bool,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    pub bob_result: Option<bool>,
    pub eve_interacted: bool,
    /// Eve's basis matched Alice's, so her outcome equals the bit.
    pub eve_knows_bit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bb84Session {
    pub rounds: Vec<Bb84Round>,
    /// Zero-based rounds that survived sifting and sacrifice.
    pub key_indices: Vec<u64>,
    pub alice_key: Vec<bool>,
    pub bob_key: Vec<bool>,
    pub sifted_len: usize,
    /// Mismatch rate over the whole sifted key (simulation truth).
    pub sifted_qber: Option<Estimate>,
    /// Mismatch rate on the publicly compared subset.
    pub qber_estimate: Option<Estimate>,
    /// Bits per sifted round that Eve holds with certainty.
    pub eve_information: f64,
    pub transcript: Vec<Envelope>,
}

fn quantum_round(
    optics: &Bb84Optics,
    config: &Bb84Config,
    rng: &mut SimRng,
    attack: Option<(&AttackStrategy, &mut SimRng)>,
) -> Result<Bb84Round> {
    let alice_bit: bool = rng.random();
    let alice_basis = basis_from(rng.random());
    let bob_basis = basis_from(rng.random());
    let mut state = optics.encode(alice_bit, alice_basis)?;
    let (mut eve_interacted, mut eve_knows_bit) = (false, false);
    if let Some((s, erng)) = attack {
        if s.interacts(erng) {
            eve_interacted = true;
            match s.kind {
                AttackKind::InterceptResend { basis } => {
                    let diagonal = basis.choose(erng);
                    let (_, resent) = adversary::measure_polarization(&state, optics.q, diagonal, erng)?;
                    eve_knows_bit = basis_from(diagonal) == alice_basis;
                    state = resent;
                }
                AttackKind::BeamSplitterTap { reflectivity } => {
                    let (captured, post) = adversary::partial_tap(&state, optics.q, reflectivity, erng)?;
                    eve_knows_bit = captured;
                    state = post;
                }
                _ => {}
            }
        }
    }
    let mut bob_result = optics.measure(&state, bob_basis, rng)?;
    if rng.random::<f64>() >= config.efficiency {
        bob_result = None;
    }
    Ok(Bb84Round {
        alice_bit,
        alice_basis,
        bob_basis,
        bob_result,
        eve_interacted,
        eve_knows_bit,
    })
}

/// Runs preparation, measurement, basis reconciliation and sacrifice.
pub fn bb84_session(
    config: &Bb84Config,
    n_rounds: u64,
    seed: u64,
    attack: Option<&AttackStrategy>,
) -> Result<Bb84Session> {
    if n_rounds == 0 {
        return Err(SessionError::NoRounds);
    }
    if !(config.sacrifice_fraction > 0.0 && config.sacrifice_fraction < 1.0) {
        return Err(SessionError::InvalidFraction(config.sacrifice_fraction));
    }
    if let Some(a) = attack {
        a.validate()?;
    }
    let optics = Bb84Optics::new()?;
    let rounds: Vec<Bb84Round> = (0..n_rounds)
        .into_par_iter()
        .map(|i| {
            let mut rng = round_rng(seed, i);
            let mut eve_rng = attack.map(|a| a.round_rng(i));
            quantum_round(&optics, config, &mut rng, attack.zip(eve_rng.as_mut()))
        })
        .collect::<Result<_>>()?;
    run_discussion(rounds, config, seed)
}

/// Public discussion over the recorded quantum phase.
pub fn run_discussion(rounds: Vec<Bb84Round>, config: &Bb84Config, seed: u64) -> Result<Bb84Session> {
    let mut channel = ClassicalChannel::new();
    let all: Vec<u64> = (0..rounds.len() as u64).collect();
    let detected: Vec<u64> = all
        .iter()
        .copied()
        .filter(|&i| rounds[i as usize].bob_result.is_some())
        .collect();

    channel.send(Party::Bob, PublicMessage::DetectionReport { indices: detected.clone() });
    channel.send(
        Party::Bob,
        PublicMessage::BasesAnnouncement {
            party: Party::Bob,
            indices: detected.clone(),
            bases: detected.iter().map(|&i| rounds[i as usize].bob_basis).collect(),
        },
    );
    channel.send(
        Party::Alice,
        PublicMessage::BasesAnnouncement {
            party: Party::Alice,
            indices: detected.clone(),
            bases: detected.iter().map(|&i| rounds[i as usize].alice_basis).collect(),
        },
    );
    while channel.receive().is_some() {}

    let a_bases: Vec<Basis> = rounds.iter().map(|r| r.alice_basis).collect();
    let b_bases: Vec<Basis> = rounds.iter().map(|r| r.bob_basis).collect();
    let results: Vec<Option<bool>> = rounds.iter().map(|r| r.bob_result).collect();
    let sift = sift_bases(&a_bases, &b_bases, &results)?;
    let alice_sifted: Vec<bool> = sift.indices.iter().map(|&i| rounds[i].alice_bit).collect();
    let bob_sifted = sift.bits.clone();

    let errors = alice_sifted.iter().zip(&bob_sifted).filter(|(a, b)| a != b).count() as u64;
    let sifted_qber = binomial_rate(errors, alice_sifted.len() as u64);
    let eve_information = if sift.indices.is_empty() {
        0.0
    } else {
        sift.indices.iter().filter(|&&i| rounds[i].eve_knows_bit).count() as f64 / sift.indices.len() as f64
    };

    let (qber_estimate, key_positions, alice_key, bob_key) =
        match sacrifice_and_estimate(&alice_sifted, &bob_sifted, config.sacrifice_fraction, seed) {
            Ok(s) => {
                let sacrificed: Vec<u64> = s.positions.iter().map(|&p| sift.indices[p] as u64).collect();
                channel.send(Party::Alice, PublicMessage::SacrificeIndices { indices: sacrificed.clone() });
                channel.send(
                    Party::Alice,
                    PublicMessage::SacrificeValues {
                        party: Party::Alice,
                        indices: sacrificed.clone(),
                        values: s.positions.iter().map(|&p| alice_sifted[p]).collect(),
                    },
                );
                channel.send(
                    Party::Bob,
                    PublicMessage::SacrificeValues {
                        party: Party::Bob,
                        indices: sacrificed,
                        values: s.positions.iter().map(|&p| bob_sifted[p]).collect(),
                    },
                );
                let kept: Vec<u64> = (0..sift.indices.len())
                    .filter(|p| s.positions.binary_search(p).is_err())
                    .map(|p| sift.indices[p] as u64)
                    .collect();
                (Some(s.qber_estimate), kept, s.remaining_a, s.remaining_b)
            }
            Err(SessionError::EmptyKey(_)) => (
                None,
                sift.indices.iter().map(|&i| i as u64).collect(),
                alice_sifted.clone(),
                bob_sifted.clone(),
            ),
            Err(e) => return Err(e),
        };
    while channel.receive().is_some() {}

    Ok(Bb84Session {
        sifted_len: sift.indices.len(),
        rounds,
        key_indices: key_positions,
        alice_key,
        bob_key,
        sifted_qber,
        qber_estimate,
        eve_information,
        transcript: channel.transcript().to_vec(),
    })
}
