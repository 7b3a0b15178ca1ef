//! Counterfactual key distribution on a Mach-Zehnder interferometer.
//!
//! Alice rotates the photon polarization by `θ_A ∈ {0, π/2}` and sends it into
//! a beam splitter whose arm `b` is the channel to Bob. Bob rotates by `θ_B`
//! and lets a polarizing beam splitter send `V` to his detector D2 and `H`
//! back to Alice, undoing the rotation on the way. Equal angles restore the
//! interferometer (D0 always fires); complementary angles block arm `b`, and
//! a click at D1 then carries Alice's bit without the photon having used the
//! channel.

pub mod bomb;
pub mod security;

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{self, AttackError, AttackKind, AttackStrategy, EveRecord};
use crate::hardware::{Detector, DetectorModel, HardwareError, SourceModel};
use crate::optics::{ModeLabel, ModeRegistry, OpticsError, PathId, PhotonState, Polarization};
use crate::seed::{rng_from_seed, round_rng, round_seed, stream_seed, SimRng, Stream};
use crate::session::messages::PublicMessage;
use crate::stats::{binomial_rate, fit_sinusoid, ratio_of_rates, Estimate, SinusoidFit};

pub use security::{binary_entropy, compute_m_ir, compute_m_ts, delta_i_ae, SecurityError};

/// Wrong-polarization probability at D1 measured with a crossed polarizer.
pub const DEFAULT_WRONG_POLARIZATION: f64 = 4e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum N09Error {
    #[error("angle {0} rad is neither 0 nor π/2")]
    InvalidAngle(f64),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("attack kind not applicable to this protocol")]
    UnsupportedAttack,
    #[error("no D1 clicks to analyse")]
    NoData,
    #[error("phase grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

pub type Result<T> = std::result::Result<T, N09Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Angle {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "pi/2")]
    HalfPi,
}

impl Angle {
    pub fn from_radians(theta: f64) -> Result<Self> {
        if theta.abs() < 1e-9 {
            Ok(Angle::Zero)
        } else if (theta - FRAC_PI_2).abs() < 1e-9 {
            Ok(Angle::HalfPi)
        } else {
            Err(N09Error::InvalidAngle(theta))
        }
    }

    pub fn radians(self) -> f64 {
        match self {
            Angle::Zero => 0.0,
            Angle::HalfPi => FRAC_PI_2,
        }
    }

    pub fn bit(self) -> bool {
        self == Angle::HalfPi
    }

    /// Polarization of an initially horizontal photon after this rotation.
    pub fn polarization(self) -> Polarization {
        match self {
            Angle::Zero => Polarization::H,
            Angle::HalfPi => Polarization::V,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Angle::Zero => "0",
            Angle::HalfPi => "pi/2",
        }
    }
}

/// The four angle settings in table order.
pub const ANGLE_PAIRS: [(Angle, Angle); 4] = [
    (Angle::Zero, Angle::Zero),
    (Angle::Zero, Angle::HalfPi),
    (Angle::HalfPi, Angle::HalfPi),
    (Angle::HalfPi, Angle::Zero),
];

fn pair_slot(a: Angle, b: Angle) -> usize {
    ANGLE_PAIRS
        .iter()
        .position(|&p| p == (a, b))
        .expect("all pairs listed")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N09Config {
    /// Probability that Alice rotates by π/2.
    pub alice_p_half_pi: f64,
    /// Probability that Bob rotates by π/2.
    pub bob_p_half_pi: f64,
    pub d0: DetectorModel,
    /// Total dark rate is split evenly between the H and V detectors behind
    /// the D1 polarizing beam splitter.
    pub d1: DetectorModel,
    pub d2: DetectorModel,
    pub source: SourceModel,
    pub phase_offset: f64,
    pub phase_noise_sigma: f64,
    pub polarizer_check: bool,
    /// Chance that a photon reaching D1 is registered with the orthogonal
    /// polarization.
    pub wrong_polarization_prob: f64,
    /// One-way channel time.
    pub channel_time: f64,
}

impl Default for N09Config {
    fn default() -> Self {
        Self {
            alice_p_half_pi: 0.5,
            bob_p_half_pi: 0.5,
            d0: DetectorModel::default(),
            d1: DetectorModel::default(),
            d2: DetectorModel::default(),
            source: SourceModel::default(),
            phase_offset: 0.0,
            phase_noise_sigma: 0.0,
            polarizer_check: true,
            wrong_polarization_prob: 0.0,
            channel_time: 1e-9,
        }
    }
}

impl N09Config {
    /// Unit efficiency, no darks, no noise, no polarization errors.
    pub fn ideal() -> Self {
        Self {
            d0: DetectorModel::ideal(),
            d1: DetectorModel::ideal(),
            d2: DetectorModel::ideal(),
            ..Self::default()
        }
    }

    /// Noise model reproducing a raw and a dark-subtracted QBER at detector
    /// efficiency `eta`.
    ///
    /// Phase noise alone leaves a D1 probability `e` in equal-angle rounds;
    /// with `q'` the dark-free QBER, `q' = e / (e + 1/4)`. Every detector gets
    /// the same per-gate dark probability `2s` (so `s` at the D1 output that
    /// passes the polarizer), and `s` is solved numerically so that the
    /// earliest-click key rates of [`fitted_key_rates`] give the raw QBER.
    pub fn fitted(qber_raw: f64, qber_corrected: f64, eta: f64) -> Result<Self> {
        let (q, qc) = (qber_raw, qber_corrected);
        if !(0.0 < qc && qc < q && q < 0.5) || !(eta > 0.0 && eta <= 1.0) {
            return Err(N09Error::ConfigInvalid(format!(
                "cannot fit qber {q} / {qc} at efficiency {eta}"
            )));
        }
        let e = qc / (4.0 * (1.0 - qc));
        let sigma = (-2.0 * (1.0 - 2.0 * e).ln()).sqrt();
        let raw = |s: f64| {
            let (int, nint) = fitted_key_rates(e, eta, s);
            int / (int + nint)
        };
        let (mut lo, mut hi) = (0.0, 0.25);
        if raw(hi) < q {
            return Err(N09Error::ConfigInvalid(format!("no dark rate reaches qber {q}")));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if raw(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        let det = DetectorModel {
            efficiency: eta,
            ..DetectorModel::default()
        }
        .with_dark_probability(2.0 * s);
        Ok(Self {
            d0: det,
            d1: det,
            d2: det,
            phase_noise_sigma: sigma,
            wrong_polarization_prob: DEFAULT_WRONG_POLARIZATION,
            ..Self::default()
        })
    }

    /// Laboratory-scale preset: 12% raw and 7% dark-subtracted QBER at 60%
    /// detection efficiency.
    pub fn paper_noise() -> Self {
        Self::fitted(0.12, 0.07, 0.6).expect("constants are in range")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(N09Error::ConfigInvalid(m));
        for (name, p) in [
            ("alice_p_half_pi", self.alice_p_half_pi),
            ("bob_p_half_pi", self.bob_p_half_pi),
            ("wrong_polarization_prob", self.wrong_polarization_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !self.phase_offset.is_finite() {
            return bad("phase_offset must be finite".into());
        }
        if !(self.phase_noise_sigma >= 0.0 && self.phase_noise_sigma.is_finite()) {
            return bad(format!("phase_noise_sigma = {}", self.phase_noise_sigma));
        }
        if !(self.channel_time >= 0.0 && self.channel_time.is_finite()) {
            return bad(format!("channel_time = {}", self.channel_time));
        }
        self.d0.validate()?;
        self.d1.validate()?;
        self.d2.validate()?;
        self.source.validate()?;
        Ok(())
    }

    pub fn min_efficiency(&self) -> f64 {
        self.d0.efficiency.min(self.d1.efficiency).min(self.d2.efficiency)
    }
}

/// Key-click probability per round in the equal-angle and complementary
/// classes, for equal-angle D1 leakage `e`, efficiency `eta` and dark
/// probability `2s` at each of D0, D2 and `s` at each D1 polarization output.
///
/// Dark clicks land uniformly in the gate and the signal at its centre; the
/// round is keyed when the accepted D1 output clicks first.
pub fn fitted_key_rates(e: f64, eta: f64, s: f64) -> (f64, f64) {
    let others = [2.0 * s, s, 2.0 * s];
    let survive = |t: f64| others.iter().map(|p| 1.0 - p * t).product::<f64>();
    // ∫₀ᶜ s·Π(1 − pᵢt) dt; the integrand is cubic, so Simpson's rule is exact
    let first_dark = |c: f64| c / 6.0 * s * (survive(0.0) + 4.0 * survive(c / 2.0) + survive(c));
    let (at_centre, whole_gate) = (first_dark(0.5), first_dark(1.0));
    let signal_wins = survive(0.5);
    let int = eta * e * signal_wins + eta * (1.0 - e) * at_centre + (1.0 - eta) * whole_gate;
    let nint = eta / 4.0 * signal_wins + eta * 0.75 * at_centre + (1.0 - eta) * whole_gate;
    (int, nint)
}

/// Paths of the interferometer.
#[derive(Debug, Clone)]
pub struct N09Optics {
    pub registry: Arc<ModeRegistry>,
    pub a: PathId,
    pub b: PathId,
    pub d0: PathId,
    pub d1h: PathId,
    pub d1v: PathId,
    pub d2: PathId,
}

impl N09Optics {
    pub fn new() -> Result<Self> {
        let registry = ModeRegistry::new(["a", "b", "d0", "d1h", "d1v", "d2"], 1)?;
        Ok(Self {
            a: registry.path("a")?,
            b: registry.path("b")?,
            d0: registry.path("d0")?,
            d1h: registry.path("d1h")?,
            d1v: registry.path("d1v")?,
            d2: registry.path("d2")?,
            registry,
        })
    }

    /// Alice's half: rotation and the first beam splitter.
    pub fn send(&self, theta_a: Angle) -> Result<PhotonState> {
        Ok(PhotonState::single(&self.registry, ModeLabel::new(self.b, Polarization::H, 0))?
            .apply_hwp(self.b, theta_a.radians())?
            .apply_beamsplitter(self.a, self.b)?)
    }

    /// Bob's station. Returns the state after the photon comes back and the
    /// probability mass left on the channel arm right after his PBS.
    pub fn bob(&self, state: &PhotonState, theta_b: Angle) -> Result<(PhotonState, f64)> {
        let s = state
            .apply_hwp(self.b, theta_b.radians())?
            .apply_pbs(self.b, self.b, self.d2)?;
        let returned = s.path_weight(self.b);
        Ok((s.apply_hwp(self.b, -theta_b.radians())?, returned))
    }

    /// Recombination at Alice's beam splitter and the D1 polarization split.
    pub fn recombine(&self, state: &PhotonState, phi: f64) -> Result<PhotonState> {
        Ok(state
            .apply_phase(self.a, phi)?
            .apply_beamsplitter(self.a, self.b)?
            .apply_mirror(self.a, self.d0)?
            .apply_pbs(self.b, self.d1h, self.d1v)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    D0,
    D1,
    D2,
    None,
}

impl Outcome {
    fn from_detector(d: Detector) -> Self {
        match d {
            Detector::D0 => Outcome::D0,
            Detector::D1 => Outcome::D1,
            Detector::D2 => Outcome::D2,
            _ => Outcome::None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::D0 => "D0",
            Outcome::D1 => "D1",
            Outcome::D2 => "D2",
            Outcome::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N09Round {
    pub index: u64,
    pub theta_a: Angle,
    pub theta_b: Angle,
    /// Earliest click.
    pub outcome: Outcome,
    pub d1_polarization: Option<Polarization>,
    /// `None` when the polarizer check is disabled or D1 did not fire.
    pub d1_polarization_ok: Option<bool>,
    /// Alice's bit, for rounds usable as key.
    pub key_bit: Option<bool>,
    pub t_s: f64,
    pub t_r: Option<f64>,
    pub multi_click: bool,
    /// Simulation truth for the recorded click.
    pub is_dark: bool,
    /// Photon probability on the channel arm right after Bob's PBS; zero means
    /// nothing travels back to Alice.
    pub channel_return_weight: f64,
    pub photons: u8,
    pub eve: EveRecord,
}

impl N09Round {
    pub fn interfering(&self) -> bool {
        self.theta_a == self.theta_b
    }

    pub fn alice_bit(&self) -> bool {
        self.theta_a.bit()
    }

    /// Bob assumes Alice chose the rotation complementary to his own.
    pub fn bob_bit(&self) -> bool {
        !self.theta_b.bit()
    }
}

struct RoundInputs {
    index: u64,
    t_s: f64,
    angles: Option<(Angle, Angle)>,
}

fn draw_angle<R: Rng + ?Sized>(p_half_pi: f64, rng: &mut R) -> Angle {
    if rng.random::<f64>() < p_half_pi {
        Angle::HalfPi
    } else {
        Angle::Zero
    }
}

fn check_attack(attack: Option<&AttackStrategy>) -> Result<()> {
    if let Some(a) = attack {
        a.validate()?;
        if matches!(a.kind, AttackKind::GvStoreAndForward { .. }) {
            return Err(N09Error::UnsupportedAttack);
        }
    }
    Ok(())
}

fn simulate(
    config: &N09Config,
    optics: &N09Optics,
    inputs: RoundInputs,
    rng: &mut SimRng,
    attack: Option<(&AttackStrategy, &mut SimRng)>,
) -> Result<N09Round> {
    let (theta_a, theta_b) = match inputs.angles {
        Some(p) => p,
        None => {
            let a = draw_angle(config.alice_p_half_pi, rng);
            (a, draw_angle(config.bob_p_half_pi, rng))
        }
    };
    let photons = config.source.sample_photons(rng);
    let noise = if config.phase_noise_sigma > 0.0 {
        Normal::new(0.0, config.phase_noise_sigma)
            .map_err(|e| N09Error::ConfigInvalid(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    let phi = config.phase_offset + noise;

    let (strategy, mut eve_rng) = match attack {
        Some((s, r)) => (Some(s), Some(r)),
        None => (None, None),
    };
    let interacts = match (strategy, eve_rng.as_deref_mut()) {
        (Some(s), Some(r)) => s.interacts(r),
        _ => false,
    };
    let mut eve = EveRecord {
        interacted: interacts,
        ..EveRecord::default()
    };

    let t_gate = inputs.t_s + 2.0 * config.channel_time;
    // slots: D0, D1H, D1V, D2
    let mut hits = [0u32; 4];
    let mut return_weight: f64 = 0.0;
    for _ in 0..photons {
        let mut state = optics.send(theta_a)?;
        if interacts {
            let (s, r) = (strategy.expect("set"), eve_rng.as_deref_mut().expect("set"));
            match s.kind {
                AttackKind::InterceptResend { basis } => {
                    let (found, post) = adversary::which_path(&state, optics.b, r);
                    eve.found_photon.get_or_insert(found);
                    state = post;
                    if found {
                        let diagonal = basis.choose(r);
                        let (v, resent) = adversary::measure_polarization(&state, optics.b, diagonal, r)?;
                        if !diagonal {
                            eve.learned_bit.get_or_insert(v);
                        }
                        state = resent;
                    }
                }
                AttackKind::BeamSplitterTap { reflectivity } => {
                    let (captured, post) = adversary::partial_tap(&state, optics.b, reflectivity, r)?;
                    if captured {
                        eve.captured += 1;
                        eve.learned_bit.get_or_insert(theta_a.bit());
                        continue;
                    }
                    state = post;
                }
                AttackKind::TimeShift { .. } | AttackKind::None | AttackKind::GvStoreAndForward { .. } => {}
            }
        }
        let (back, returned) = optics.bob(&state, theta_b)?;
        return_weight = return_weight.max(returned);
        let out = optics.recombine(&back, phi)?;
        let Some(mode) = out.sample(rng) else { continue };
        let mut slot = if mode.path == optics.d0 {
            0
        } else if mode.path == optics.d1h {
            1
        } else if mode.path == optics.d1v {
            2
        } else if mode.path == optics.d2 {
            3
        } else {
            continue;
        };
        if (slot == 1 || slot == 2) && rng.random::<f64>() < config.wrong_polarization_prob {
            slot = 3 - slot;
        }
        hits[slot] += 1;
    }

    let half_dark = |m: DetectorModel| DetectorModel {
        dark_rate: m.dark_rate / 2.0,
        ..m
    };
    let factor = |slot: usize| strategy.map_or(1.0, |s| s.eta_factor(slot));
    let scaled = |m: DetectorModel, f: f64| DetectorModel {
        efficiency: m.efficiency * f,
        ..m
    };
    let detectors = [
        (Detector::D0, scaled(config.d0, factor(0)), None),
        (Detector::D1, scaled(half_dark(config.d1), factor(1)), Some(Polarization::H)),
        (Detector::D1, scaled(half_dark(config.d1), factor(1)), Some(Polarization::V)),
        (Detector::D2, scaled(config.d2, factor(2)), None),
    ];
    let mut clicks = Vec::with_capacity(4);
    for (slot, (id, model, pol)) in detectors.into_iter().enumerate() {
        if let Some(ev) = model.respond(id, hits[slot], t_gate, rng) {
            clicks.push((ev, pol));
        }
    }
    let first = clicks
        .iter()
        .min_by(|x, y| x.0.time_tag.total_cmp(&y.0.time_tag))
        .copied();

    let outcome = first.map_or(Outcome::None, |(e, _)| Outcome::from_detector(e.detector));
    let d1_polarization = first.and_then(|(_, p)| p);
    let d1_polarization_ok = match (outcome, config.polarizer_check) {
        (Outcome::D1, true) => d1_polarization.map(|p| p == theta_a.polarization()),
        _ => None,
    };
    let key_bit = (outcome == Outcome::D1 && d1_polarization_ok != Some(false)).then(|| theta_a.bit());

    Ok(N09Round {
        index: inputs.index,
        theta_a,
        theta_b,
        outcome,
        d1_polarization,
        d1_polarization_ok,
        key_bit,
        t_s: inputs.t_s,
        t_r: first.map(|(e, _)| e.time_tag),
        multi_click: clicks.len() > 1,
        is_dark: first.is_some_and(|(e, _)| e.is_dark),
        channel_return_weight: return_weight,
        photons,
        eve,
    })
}

/// One stand-alone round with fixed angles.
pub fn run_n09_round(
    config: &N09Config,
    theta_a: f64,
    theta_b: f64,
    seed: u64,
    attack: Option<&AttackStrategy>,
) -> Result<N09Round> {
    let angles = (Angle::from_radians(theta_a)?, Angle::from_radians(theta_b)?);
    config.validate()?;
    check_attack(attack)?;
    let optics = N09Optics::new()?;
    let mut rng = rng_from_seed(seed);
    let mut eve_rng = attack.map(|a| a.single_rng(seed));
    simulate(
        config,
        &optics,
        RoundInputs {
            index: 0,
            t_s: 0.0,
            angles: Some(angles),
        },
        &mut rng,
        attack.zip(eve_rng.as_mut()),
    )
}

fn herald_times(source: &SourceModel, rounds: u64, seed: u64) -> Result<Vec<f64>> {
    let exp = Exp::new(source.herald_rate)
        .map_err(|e| N09Error::ConfigInvalid(format!("herald_rate: {e}")))?;
    let mut rng = rng_from_seed(stream_seed(seed, Stream::Heralds));
    let mut t = 0.0;
    Ok((0..rounds)
        .map(|_| {
            t += exp.sample(&mut rng);
            t
        })
        .collect())
}

/// Runs `rounds` rounds; `angles = None` draws them from the config's angle
/// policy. Output is ordered by round index and independent of thread count.
pub fn run_n09_batch(
    config: &N09Config,
    rounds: u64,
    master_seed: u64,
    angles: Option<(Angle, Angle)>,
    attack: Option<&AttackStrategy>,
) -> Result<Vec<N09Round>> {
    config.validate()?;
    check_attack(attack)?;
    let optics = N09Optics::new()?;
    let times = herald_times(&config.source, rounds, master_seed)?;
    times
        .into_par_iter()
        .enumerate()
        .map(|(i, t_s)| {
            let index = i as u64;
            let mut rng = round_rng(master_seed, index);
            let mut eve_rng = attack.map(|a| a.round_rng(index));
            simulate(
                config,
                &optics,
                RoundInputs { index, t_s, angles },
                &mut rng,
                attack.zip(eve_rng.as_mut()),
            )
        })
        .collect()
}

/// Result of the public discussion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct N09Sifted {
    pub indices: Vec<u64>,
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    pub messages: Vec<PublicMessage>,
}

impl N09Sifted {
    pub fn errors(&self) -> usize {
        self.alice_bits
            .iter()
            .zip(&self.bob_bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Keeps D1 rounds whose polarization matches Alice's preparation. Alice's
/// bit is her rotation; Bob's is the complement of his. An equal-angle D1
/// click cannot be told apart by either party and so enters the key as a
/// mismatched bit. D0/D2 rounds, and D1 rounds that fail the check, are
/// disclosed publicly.
pub fn sift_n09(rounds: &[N09Round]) -> N09Sifted {
    let mut out = N09Sifted::default();
    for r in rounds {
        match r.outcome {
            Outcome::D1 if r.key_bit.is_some() => {
                out.indices.push(r.index);
                out.alice_bits.push(r.alice_bit());
                out.bob_bits.push(r.bob_bit());
            }
            Outcome::D0 | Outcome::D1 | Outcome::D2 => {
                let detector = match r.outcome {
                    Outcome::D0 => Detector::D0,
                    Outcome::D1 => Detector::D1,
                    _ => Detector::D2,
                };
                let detected = match r.outcome {
                    Outcome::D1 => r.d1_polarization,
                    // D2 only receives V after Bob's rotation
                    Outcome::D2 => Some(if r.theta_b.bit() { Polarization::H } else { Polarization::V }),
                    _ => None,
                };
                out.messages.push(PublicMessage::PolarizationDisclosure {
                    index: r.index,
                    detector,
                    detected,
                    initial: r.theta_a.polarization(),
                });
            }
            Outcome::None => {}
        }
    }
    out
}

/// Raw and dark-subtracted QBER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N09Qber {
    pub raw: Estimate,
    pub corrected: Option<Estimate>,
}

fn class_rates(rounds: &[N09Round], include_dark: bool) -> (Estimate, Estimate, u64) {
    let (mut n_int, mut n_nint, mut c_int, mut c_nint) = (0u64, 0u64, 0u64, 0u64);
    for r in rounds {
        let click = r.key_bit.is_some() && (include_dark || !r.is_dark);
        if r.interfering() {
            n_int += 1;
            c_int += click as u64;
        } else {
            n_nint += 1;
            c_nint += click as u64;
        }
    }
    let p_int = binomial_rate(c_int, n_int).unwrap_or(Estimate::exact(0.0));
    let p_nint = binomial_rate(c_nint, n_nint).unwrap_or(Estimate::exact(0.0));
    (p_int, p_nint, c_int + c_nint)
}

/// `P_D1,int / (P_D1,int + P_D1,nint)`, each probability normalized to the
/// rounds of its own angle class. Only D1 clicks that pass the polarizer
/// check count.
pub fn n09_qber(rounds: &[N09Round]) -> Result<N09Qber> {
    let (p_int, p_nint, clicks) = class_rates(rounds, true);
    if clicks == 0 {
        return Err(N09Error::NoData);
    }
    let raw = ratio_of_rates(p_int, p_nint).ok_or(N09Error::NoData)?;
    let (c_int, c_nint, c) = class_rates(rounds, false);
    let corrected = if c > 0 { ratio_of_rates(c_int, c_nint) } else { None };
    Ok(N09Qber { raw, corrected })
}

/// Outcome counts per angle pair in [`ANGLE_PAIRS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub rounds: u64,
    pub d0: u64,
    pub d1: u64,
    pub d2: u64,
    pub none: u64,
    pub d1_key: u64,
}

pub fn counts_by_pair(rounds: &[N09Round]) -> [PairCounts; 4] {
    let mut out = [PairCounts::default(); 4];
    for r in rounds {
        let c = &mut out[pair_slot(r.theta_a, r.theta_b)];
        c.rounds += 1;
        match r.outcome {
            Outcome::D0 => c.d0 += 1,
            Outcome::D1 => c.d1 += 1,
            Outcome::D2 => c.d2 += 1,
            Outcome::None => c.none += 1,
        }
        c.d1_key += r.key_bit.is_some() as u64;
    }
    out
}

/// Optional overrides for [`security_report`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SecurityOptions {
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub qber: Estimate,
    pub qber_corrected: Option<Estimate>,
    pub p_d1: Estimate,
    pub p_e1: Estimate,
    pub p_d2: Estimate,
    pub p_e2: Estimate,
    pub gamma: f64,
    pub eta: f64,
    pub delta_i_ae: f64,
    pub m_ir: Estimate,
    pub m_ts: Estimate,
    pub counts: [PairCounts; 4],
    pub key_length: u64,
}

impl SecurityReport {
    pub fn secure(&self) -> bool {
        self.m_ir.value > 0.0 && self.m_ts.value > 0.0
    }
}

/// Security margins from a batch of rounds.
///
/// * `P_D1`: share of D1 among the D0/D1 clicks of complementary rounds.
/// * `P_e1`: `QBER · P_D1` plus the wrong-polarization probability.
/// * `P_D2`, `P_e2`: D2 clicks of complementary / equal-angle rounds over all
///   recorded clicks.
/// * `γ`: `P_D1` times the share of key clicks explained by dark counts:
///   per-gate dark probability passing the polarizer, divided by the key
///   clicks per round.
/// * `η`: the smallest detector efficiency.
pub fn security_report(
    rounds: &[N09Round],
    config: &N09Config,
    options: SecurityOptions,
) -> Result<SecurityReport> {
    let q = n09_qber(rounds)?;
    let counts = counts_by_pair(rounds);
    let nint = |f: fn(&PairCounts) -> u64| f(&counts[1]) + f(&counts[3]);
    let int = |f: fn(&PairCounts) -> u64| f(&counts[0]) + f(&counts[2]);
    let d0_n = nint(|c| c.d0) as f64;
    let d1_n = nint(|c| c.d1_key) as f64;
    let d2_n = nint(|c| c.d2) as f64;
    let d2_i = int(|c| c.d2) as f64;
    let all: f64 = counts.iter().map(|c| (c.d0 + c.d1 + c.d2) as f64).sum();
    if d0_n + d1_n <= 0.0 || all <= 0.0 {
        return Err(N09Error::NoData);
    }

    let p_d1_v = d1_n / (d0_n + d1_n);
    let p_d1 = Estimate::new(p_d1_v, (p_d1_v * (1.0 - p_d1_v) / (d0_n + d1_n)).sqrt());
    let wrong = config.wrong_polarization_prob;
    let p_e1_v = (q.raw.value * p_d1_v + wrong).min(p_d1_v);
    let p_e1 = Estimate::new(
        p_e1_v,
        ((q.raw.std_err * p_d1_v).powi(2) + (q.raw.value * p_d1.std_err).powi(2)).sqrt(),
    );
    let rate = |k: f64| Estimate::new(k / all, (k.max(1.0)).sqrt() / all);
    let p_d2 = rate(d2_n);
    let p_e2 = rate(d2_i);

    let n_rounds = rounds.len() as f64;
    let key_clicks: f64 = counts.iter().map(|c| c.d1_key as f64).sum();
    let pass = if config.polarizer_check { 0.5 } else { 1.0 };
    let gamma = match options.gamma {
        Some(g) => g,
        None => {
            let dark = config.d1.dark_probability() * pass;
            if key_clicks > 0.0 {
                p_d1_v * dark * n_rounds / key_clicks
            } else {
                0.0
            }
        }
    };
    let eta = options.eta.unwrap_or_else(|| config.min_efficiency());

    let m_ir_v = compute_m_ir(p_d1_v, p_e1_v)?;
    let dia = delta_i_ae(eta, p_d2.value, p_e2.value.min(p_d2.value))?;
    let m_ts_v = compute_m_ts(m_ir_v, gamma, eta, p_d2.value, p_e2.value.min(p_d2.value))?;

    // first-order propagation through P_D1 and the QBER
    let h = 1e-6;
    let m_at = |pd1: f64, qb: f64| {
        let pe1 = (qb * pd1 + wrong).clamp(0.0, pd1);
        compute_m_ir(pd1.clamp(1e-12, 1.0), pe1).unwrap_or(m_ir_v)
    };
    let d_pd1 = (m_at(p_d1_v + h, q.raw.value) - m_at(p_d1_v - h, q.raw.value)) / (2.0 * h);
    let d_q = (m_at(p_d1_v, q.raw.value + h) - m_at(p_d1_v, q.raw.value - h)) / (2.0 * h);
    let m_ir_err = ((d_pd1 * p_d1.std_err).powi(2) + (d_q * q.raw.std_err).powi(2)).sqrt();
    let k = (1.0 - eta) / (2.0 * eta);
    let m_ts_err = (m_ir_err.powi(2) + (k * p_d2.std_err).powi(2) + (k * p_e2.std_err).powi(2)).sqrt();

    Ok(SecurityReport {
        qber: q.raw,
        qber_corrected: q.corrected,
        p_d1,
        p_e1,
        p_d2,
        p_e2,
        gamma,
        eta,
        delta_i_ae: dia,
        m_ir: Estimate::new(m_ir_v, m_ir_err),
        m_ts: Estimate::new(m_ts_v, m_ts_err),
        counts,
        key_length: key_clicks as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N09FringePoint {
    pub phase: f64,
    pub counts_d0: u64,
    pub counts_d1: u64,
    pub counts_d2: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N09FringeScan {
    pub theta_a: Angle,
    pub theta_b: Angle,
    pub points: Vec<N09FringePoint>,
    pub fit_d0: SinusoidFit,
    pub fit_d1: SinusoidFit,
    /// Fits to the clicks not caused by dark counts.
    pub signal_fit_d0: SinusoidFit,
    pub signal_fit_d1: SinusoidFit,
}

/// Phase scan at a fixed angle pair, counting the earliest click per round.
pub fn n09_fringe_scan(
    config: &N09Config,
    angles: (Angle, Angle),
    phase_grid: &[f64],
    rounds_per_point: u64,
    seed: u64,
) -> Result<N09FringeScan> {
    if phase_grid.is_empty() {
        return Err(N09Error::EmptyGrid);
    }
    let scan_seed = stream_seed(seed, Stream::Scan);
    let mut points = Vec::with_capacity(phase_grid.len());
    let mut signal_counts = Vec::with_capacity(phase_grid.len());
    for (k, &phase) in phase_grid.iter().enumerate() {
        let cfg = N09Config {
            phase_offset: config.phase_offset + phase,
            ..*config
        };
        let rounds = run_n09_batch(&cfg, rounds_per_point, round_seed(scan_seed, k as u64), Some(angles), None)?;
        let slot = pair_slot(angles.0, angles.1);
        let c = counts_by_pair(&rounds)[slot];
        let signal: Vec<N09Round> = rounds.into_iter().filter(|r| !r.is_dark).collect();
        signal_counts.push(counts_by_pair(&signal)[slot]);
        points.push(N09FringePoint {
            phase,
            counts_d0: c.d0,
            counts_d1: c.d1,
            counts_d2: c.d2,
        });
    }
    let phases: Vec<f64> = points.iter().map(|p| p.phase).collect();
    let fit = |y: Vec<u64>| {
        let y: Vec<f64> = y.into_iter().map(|k| k as f64).collect();
        fit_sinusoid(&phases, &y).ok_or(N09Error::NoData)
    };
    Ok(N09FringeScan {
        theta_a: angles.0,
        theta_b: angles.1,
        fit_d0: fit(points.iter().map(|p| p.counts_d0).collect())?,
        fit_d1: fit(points.iter().map(|p| p.counts_d1).collect())?,
        signal_fit_d0: fit(signal_counts.iter().map(|c| c.d0).collect())?,
        signal_fit_d1: fit(signal_counts.iter().map(|c| c.d1).collect())?,
        points,
    })
}
