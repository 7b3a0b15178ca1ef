//! Eavesdropper strategies applied to the simulated quantum channel.
//!
//! An [`AttackStrategy`] is an immutable configuration. Protocol drivers ask
//! it, once per round, whether Eve interacts (probability `interaction_rate`)
//! using a generator seeded from the strategy's own seed, so a strategy of kind
//! [`AttackKind::None`] leaves every other random draw untouched.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{OpticsError, PathId, PhotonState, Polarization};
use crate::seed::{rng_from_seed, round_seed, splitmix64, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("{name} = {value} is outside its valid range")]
    OutOfDomain { name: &'static str, value: f64 },
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

pub type Result<T> = std::result::Result<T, AttackError>;

/// Measurement basis choice for intercept-resend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisPolicy {
    Random,
    Rectilinear,
    Diagonal,
}

impl BasisPolicy {
    /// `true` for the diagonal basis.
    pub fn choose<R: Rng + ?Sized>(self, rng: &mut R) -> bool {
        match self {
            BasisPolicy::Random => rng.random(),
            BasisPolicy::Rectilinear => false,
            BasisPolicy::Diagonal => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    None,
    InterceptResend { basis: BasisPolicy },
    BeamSplitterTap { reflectivity: f64 },
    /// Per-detector efficiency multipliers for D0, D1, D2.
    TimeShift { eta_shift: [f64; 3] },
    GvStoreAndForward { hold_bins: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackStrategy {
    #[serde(flatten)]
    pub kind: AttackKind,
    /// Fraction of rounds Eve acts on.
    pub interaction_rate: f64,
    pub seed: u64,
}

impl Default for AttackStrategy {
    fn default() -> Self {
        Self::none()
    }
}

impl AttackStrategy {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            interaction_rate: 0.0,
            seed: 0,
        }
    }

    pub fn new(kind: AttackKind, interaction_rate: f64, seed: u64) -> Self {
        Self {
            kind,
            interaction_rate,
            seed,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, AttackKind::None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.interaction_rate) {
            return Err(AttackError::OutOfDomain {
                name: "interaction_rate",
                value: self.interaction_rate,
            });
        }
        match self.kind {
            AttackKind::BeamSplitterTap { reflectivity } if !(0.0..=1.0).contains(&reflectivity) => {
                Err(AttackError::OutOfDomain {
                    name: "reflectivity",
                    value: reflectivity,
                })
            }
            AttackKind::TimeShift { eta_shift } => {
                for s in eta_shift {
                    if !(s > 0.0 && s <= 1.0) {
                        return Err(AttackError::OutOfDomain {
                            name: "eta_shift",
                            value: s,
                        });
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Eve's private generator for round `index`.
    pub fn round_rng(&self, index: u64) -> SimRng {
        rng_from_seed(round_seed(splitmix64(self.seed), index))
    }

    /// Eve's generator for a stand-alone round driven by `seed`.
    pub fn single_rng(&self, seed: u64) -> SimRng {
        rng_from_seed(splitmix64(self.seed ^ splitmix64(seed)))
    }

    /// Draws whether Eve acts on this round.
    pub fn interacts<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        !self.is_none() && rng.random::<f64>() < self.interaction_rate
    }

    /// Efficiency multiplier for detector slot 0..3 (D0, D1, D2).
    pub fn eta_factor(&self, slot: usize) -> f64 {
        match self.kind {
            AttackKind::TimeShift { eta_shift } => eta_shift.get(slot).copied().unwrap_or(1.0),
            _ => 1.0,
        }
    }
}

/// What Eve did and learned in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EveRecord {
    pub interacted: bool,
    /// Photons removed from the channel.
    pub captured: u8,
    /// Eve's value for the key bit, when her measurement determines it.
    pub learned_bit: Option<bool>,
    /// Result of a which-path probe, when one was made.
    pub found_photon: Option<bool>,
}

impl EveRecord {
    pub fn merge(&mut self, other: EveRecord) {
        self.interacted |= other.interacted;
        self.captured = self.captured.saturating_add(other.captured);
        if self.learned_bit.is_none() {
            self.learned_bit = other.learned_bit;
        }
        if self.found_photon.is_none() {
            self.found_photon = other.found_photon;
        }
    }
}

/// Which-path probe on `path`: returns whether the photon was found there and
/// the collapsed state. A photon that has already been lost is never found.
pub fn which_path<R: Rng + ?Sized>(
    state: &PhotonState,
    path: PathId,
    rng: &mut R,
) -> (bool, PhotonState) {
    let lost = state.loss_weight();
    let proj = state.project(|m| m.path == path);
    let p_found = proj.probability * (1.0 - lost);
    let u = rng.random::<f64>();
    if u < p_found {
        if let Some(s) = proj.inside {
            return (true, s);
        }
    } else if u < 1.0 - lost {
        if let Some(s) = proj.outside {
            return (false, s);
        }
    }
    (false, PhotonState::lost(state.registry()))
}

/// Polarization measurement of a photon known to be on `path`, in the
/// rectilinear (`diagonal = false`) or diagonal basis. Returns the outcome
/// (`false` = H or +45°) and the resent eigenstate on the same path/timebin.
pub fn measure_polarization<R: Rng + ?Sized>(
    state: &PhotonState,
    path: PathId,
    diagonal: bool,
    rng: &mut R,
) -> std::result::Result<(bool, PhotonState), OpticsError> {
    let angle = if diagonal { std::f64::consts::FRAC_PI_4 } else { 0.0 };
    // rotate so the measured basis becomes H/V, project on V, rotate back
    let rotated = state.apply_hwp(path, -angle)?;
    let proj = rotated.project(|m| m.path == path && m.polarization == Polarization::V);
    let outcome = rng.random::<f64>() < proj.probability;
    let branch = if outcome { proj.inside } else { proj.outside };
    let branch = branch.unwrap_or_else(|| rotated.clone());
    Ok((outcome, branch.apply_hwp(path, angle)?))
}

/// Moves every amplitude on `paths` `bins` timebins later: Eve holding the
/// photon in her own delay line before releasing it.
pub fn hold(
    state: &PhotonState,
    paths: &[PathId],
    bins: u32,
) -> std::result::Result<PhotonState, OpticsError> {
    let mut s = state.clone();
    for &p in paths {
        s = s.apply_delay(p, bins)?;
    }
    Ok(s)
}

/// Coherent tap of reflectivity `r` on `path`: Eve captures the photon with
/// probability `r · weight(path)`; otherwise the photon continues in the
/// renormalized post-tap state.
pub fn partial_tap<R: Rng + ?Sized>(
    state: &PhotonState,
    path: PathId,
    reflectivity: f64,
    rng: &mut R,
) -> std::result::Result<(bool, PhotonState), OpticsError> {
    let tapped = state.apply_loss(path, 1.0 - reflectivity)?;
    let p_capture = tapped.loss_weight() - state.loss_weight();
    if rng.random::<f64>() < p_capture {
        return Ok((true, PhotonState::lost(state.registry())));
    }
    let kept = tapped
        .project(|_| true)
        .inside
        .unwrap_or_else(|| PhotonState::lost(state.registry()));
    Ok((false, kept))
}

/// Fate of one emission passing Eve's tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TapOutcome {
    pub captured: u8,
    pub passed: u8,
    /// Eve holds at least one photon.
    pub eve_learns: bool,
    /// Eve learns while Bob still receives a photon.
    pub undetected: bool,
}

/// Each photon is reflected to Eve independently with probability
/// `reflectivity`; she reads the bit from any photon she captures.
pub fn beam_splitter_tap<R: Rng + ?Sized>(n_photons: u8, reflectivity: f64, rng: &mut R) -> TapOutcome {
    let captured = (0..n_photons)
        .filter(|_| rng.random::<f64>() < reflectivity)
        .count() as u8;
    let passed = n_photons - captured;
    TapOutcome {
        captured,
        passed,
        eve_learns: captured > 0,
        undetected: captured > 0 && passed > 0,
    }
}

/// Per-emission probabilities `(eve_learns, eve_learns_undetected)` of the tap
/// for a source emitting two photons with probability `p_multi`.
pub fn tap_rates(p_multi: f64, reflectivity: f64) -> (f64, f64) {
    let r = reflectivity;
    let learn = (1.0 - p_multi) * r + p_multi * (1.0 - (1.0 - r) * (1.0 - r));
    let undetected = p_multi * 2.0 * r * (1.0 - r);
    (learn, undetected)
}

/// Detector set after a time-shift attack together with the inputs of the
/// information-increment term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeShiftInputs {
    pub etas: Vec<f64>,
    /// Efficiency entering the information increment: the weakest detector.
    pub eta: f64,
    pub p_d2: f64,
    pub p_e2: f64,
    pub delta_i_ae: f64,
}

/// Applies per-detector efficiency multipliers and evaluates
/// `ΔI_AE = (1 − η)/(2η) · (P_D2 − P_e2)` at the resulting efficiency.
pub fn time_shift(
    detector_etas: &[f64],
    eta_shift: &[f64],
    p_d2: f64,
    p_e2: f64,
) -> Result<TimeShiftInputs> {
    let mut etas = Vec::with_capacity(detector_etas.len());
    for (i, &eta) in detector_etas.iter().enumerate() {
        let s = eta_shift.get(i).copied().unwrap_or(1.0);
        let e = eta * s;
        if !(e > 0.0 && e <= 1.0) {
            return Err(AttackError::OutOfDomain {
                name: "eta",
                value: e,
            });
        }
        etas.push(e);
    }
    let eta = etas.iter().copied().fold(1.0, f64::min);
    let delta_i_ae = crate::n09::security::delta_i_ae(eta, p_d2, p_e2).map_err(|_| {
        AttackError::OutOfDomain {
            name: "p_e2",
            value: p_e2,
        }
    })?;
    Ok(TimeShiftInputs {
        etas,
        eta,
        p_d2,
        p_e2,
        delta_i_ae,
    })
}

/// Intercept-resend on BB84 with interaction rate `r` and random bases:
/// `(sifted QBER, Eve's information in bits per sifted bit)`.
pub fn bb84_intercept_tradeoff(r: f64) -> (f64, f64) {
    (r / 4.0, r / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{ModeLabel, ModeRegistry};
    use num_complex::Complex64;

    #[test]
    fn none_never_interacts() {
        let s = AttackStrategy::none();
        let mut rng = s.round_rng(0);
        assert!((0..1000).all(|_| !s.interacts(&mut rng)));
    }

    #[test]
    fn zero_reflectivity_is_identity() {
        let mut rng = rng_from_seed(1);
        for n in 0..3 {
            let t = beam_splitter_tap(n, 0.0, &mut rng);
            assert_eq!(t.passed, n);
            assert!(!t.eve_learns);
        }
    }

    #[test]
    fn validation() {
        assert!(AttackStrategy::new(AttackKind::BeamSplitterTap { reflectivity: 1.5 }, 1.0, 0)
            .validate()
            .is_err());
        assert!(AttackStrategy::new(AttackKind::None, 2.0, 0).validate().is_err());
        assert!(AttackStrategy::new(AttackKind::TimeShift { eta_shift: [1.0, 0.0, 1.0] }, 1.0, 0)
            .validate()
            .is_err());
    }

    #[test]
    fn time_shift_formula() {
        let t = time_shift(&[1.0, 1.0], &[0.6, 1.0], 0.5, 0.2).unwrap();
        assert!((t.eta - 0.6).abs() < 1e-15);
        assert!((t.delta_i_ae - 0.1).abs() < 1e-12);
        let ideal = time_shift(&[1.0], &[], 0.5, 0.2).unwrap();
        assert_eq!(ideal.delta_i_ae, 0.0);
        assert!(time_shift(&[0.5], &[0.0], 0.5, 0.2).is_err());
    }

    #[test]
    fn which_path_collapses() {
        let r = ModeRegistry::new(["a", "b"], 1).unwrap();
        let (a, b) = (r.path("a").unwrap(), r.path("b").unwrap());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = PhotonState::from_amplitudes(
            &r,
            [
                (ModeLabel::new(a, Polarization::H, 0), Complex64::new(h, 0.0)),
                (ModeLabel::new(b, Polarization::H, 0), Complex64::new(h, 0.0)),
            ],
            0.0,
        )
        .unwrap();
        let mut rng = rng_from_seed(5);
        let mut found = 0;
        for _ in 0..10_000 {
            let (f, post) = which_path(&s, a, &mut rng);
            let w = post.path_weight(if f { a } else { b });
            assert!((w - 1.0).abs() < 1e-12);
            found += f as u32;
        }
        assert!((found as f64 / 10_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn polarization_measurement_in_own_basis_is_certain() {
        let r = ModeRegistry::new(["a"], 1).unwrap();
        let a = r.path("a").unwrap();
        let v = PhotonState::single(&r, ModeLabel::new(a, Polarization::V, 0)).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let (o, post) = measure_polarization(&v, a, false, &mut rng).unwrap();
            assert!(o);
            assert!((post.inner_product(&v).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }
}
