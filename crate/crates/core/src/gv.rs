//! Orthogonal-state key distribution with two time-separated wave-packets.
//!
//! Alice prepares `(|a⟩ ± |b⟩)/√2`. Packet `b` waits in the first delay line
//! (OD1) while `a` crosses the channel; `b` then follows and `a` waits in the
//! second delay line (OD2), so the two packets meet again at Bob's beam
//! splitter one delay quantum `τ` after emission. Only clicks at
//! `t_r = t_s + τ + T` are kept.

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
use crate::stats::{binomial_rate, fit_sinusoid, Estimate, SinusoidFit};

/// Longest store-and-forward hold the optics registry can represent.
pub const MAX_HOLD_BINS: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GvError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("no accepted clicks to analyse")]
    NoData,
    #[error("phase grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Hardware(#[from] HardwareError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

pub type Result<T> = std::result::Result<T, GvError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvConfig {
    /// Delay-line storage time.
    pub tau: f64,
    /// Channel travel time.
    pub channel_time: f64,
    pub phase_offset: f64,
    pub phase_noise_sigma: f64,
    pub d0: DetectorModel,
    pub d1: DetectorModel,
    pub source: SourceModel,
    pub timing_tolerance: f64,
}

impl Default for GvConfig {
    fn default() -> Self {
        Self {
            tau: 2e-9,
            channel_time: 1e-9,
            phase_offset: 0.0,
            phase_noise_sigma: 0.0,
            d0: DetectorModel::default(),
            d1: DetectorModel::default(),
            source: SourceModel::default(),
            timing_tolerance: 1e-9,
        }
    }
}

/// Fringe visibility left by Gaussian phase noise of width `sigma`.
pub fn visibility_for_sigma(sigma: f64) -> f64 {
    (-sigma * sigma / 2.0).exp()
}

/// Inverse of [`visibility_for_sigma`].
pub fn sigma_for_visibility(v: f64) -> Option<f64> {
    (v > 0.0 && v <= 1.0).then(|| (-2.0 * v.ln()).sqrt())
}

impl GvConfig {
    /// Unit-efficiency detectors without jitter or dark counts, no phase
    /// noise.
    pub fn ideal() -> Self {
        Self {
            d0: DetectorModel::ideal(),
            d1: DetectorModel::ideal(),
            ..Self::default()
        }
    }

    /// Ideal hardware with pure phase noise tuned to visibility `v`.
    pub fn with_visibility(v: f64) -> Result<Self> {
        let sigma = sigma_for_visibility(v)
            .ok_or_else(|| GvError::ConfigInvalid(format!("visibility {v} not in (0, 1]")))?;
        Ok(Self {
            phase_noise_sigma: sigma,
            ..Self::ideal()
        })
    }

    /// Asymmetric detectors with residual dark counts: 90% intrinsic fringe
    /// contrast, 60% / 44% efficiency, dark probabilities per gate chosen so
    /// that the two ports show about 89% and 82% visibility for source S0.
    pub fn table1() -> Self {
        let gate = 2e-9;
        let d0 = DetectorModel {
            efficiency: 0.6,
            gate_window: gate,
            ..DetectorModel::default()
        }
        .with_dark_probability(0.003_37);
        let d1 = DetectorModel {
            efficiency: 0.436_8,
            gate_window: gate,
            ..DetectorModel::default()
        }
        .with_dark_probability(0.021_3);
        Self {
            phase_noise_sigma: sigma_for_visibility(0.9).unwrap_or(0.0),
            d0,
            d1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GvError::ConfigInvalid(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.channel_time >= 0.0 && self.channel_time < self.tau) {
            return bad(format!(
                "tau ({}) must exceed the channel time ({})",
                self.tau, self.channel_time
            ));
        }
        if !self.phase_offset.is_finite() {
            return bad("phase_offset must be finite".into());
        }
        if !(self.phase_noise_sigma >= 0.0 && self.phase_noise_sigma.is_finite()) {
            return bad(format!("phase_noise_sigma = {}", self.phase_noise_sigma));
        }
        self.d0.validate()?;
        self.d1.validate()?;
        self.source.validate()?;
        let jitter = self.d0.jitter_sigma.max(self.d1.jitter_sigma);
        if self.timing_tolerance < 3.0 * jitter {
            return bad(format!(
                "timing_tolerance ({}) below three jitter sigmas ({})",
                self.timing_tolerance,
                3.0 * jitter
            ));
        }
        if self.timing_tolerance >= self.tau {
            return bad(format!(
                "timing_tolerance ({}) must be shorter than tau ({})",
                self.timing_tolerance, self.tau
            ));
        }
        Ok(())
    }

    /// Time at which a photon leaving the interferometer normally clicks.
    pub fn expected_arrival(&self, t_s: f64) -> f64 {
        t_s + self.tau + self.channel_time
    }

    /// Inclusive at the boundary; the relative slack absorbs rounding in
    /// `t_s + T + tol`.
    pub fn within_window(&self, t_s: f64, t_r: f64) -> bool {
        (t_r - self.expected_arrival(t_s)).abs() <= self.timing_tolerance * (1.0 + 1e-9)
    }
}

/// Paths of the interferometer: the two arms and the two detector ports.
#[derive(Debug, Clone)]
pub struct GvOptics {
    pub registry: Arc<ModeRegistry>,
    pub a: PathId,
    pub b: PathId,
    pub d0: PathId,
    pub d1: PathId,
}

impl GvOptics {
    /// Registry wide enough for an eavesdropper holding packets for
    /// `extra_bins` timebins.
    pub fn new(extra_bins: u32) -> Result<Self> {
        if extra_bins > MAX_HOLD_BINS {
            return Err(GvError::ConfigInvalid(format!(
                "hold_bins {extra_bins} exceeds {MAX_HOLD_BINS}"
            )));
        }
        let registry = ModeRegistry::new(["a", "b", "d0", "d1"], 2 + extra_bins)?;
        Ok(Self {
            a: registry.path("a")?,
            b: registry.path("b")?,
            d0: registry.path("d0")?,
            d1: registry.path("d1")?,
            registry,
        })
    }

    /// `(|a⟩ + (−1)^bit |b⟩)/√2` at timebin 0.
    pub fn prepare(&self, bit: bool) -> PhotonState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if bit { -s } else { s };
        PhotonState::from_amplitudes(
            &self.registry,
            [
                (ModeLabel::new(self.a, Polarization::H, 0), num_complex::Complex64::new(s, 0.0)),
                (ModeLabel::new(self.b, Polarization::H, 0), num_complex::Complex64::new(sign, 0.0)),
            ],
            0.0,
        )
        .expect("normalized by construction")
    }

    /// Bob's half: OD2 on `a`, compensating phase on `b`, beam splitter, and
    /// the mirrors onto the detector ports.
    pub fn receive(&self, state: &PhotonState, phi: f64) -> Result<PhotonState> {
        Ok(state
            .apply_delay(self.a, 1)?
            .apply_phase(self.b, FRAC_PI_2 + phi)?
            .apply_beamsplitter(self.a, self.b)?
            .apply_mirror(self.b, self.d0)?
            .apply_mirror(self.a, self.d1)?)
    }
}

/// Prepared state for `bit` over the standard interferometer registry.
pub fn prepare_gv_state(bit: bool) -> PhotonState {
    GvOptics::new(0).expect("static registry").prepare(bit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvRound {
    pub index: u64,
    pub bit_sent: bool,
    pub t_s: f64,
    pub t_r: Option<f64>,
    /// Earliest detector to click.
    pub detector_fired: Option<Detector>,
    pub double_click: bool,
    pub accepted: bool,
    /// Simulation truth for the recorded click.
    pub is_dark: bool,
    pub photons: u8,
    pub eve: EveRecord,
}

impl GvRound {
    /// Bob's bit from the recorded click: D0 → 0, D1 → 1.
    pub fn bob_bit(&self) -> Option<bool> {
        match self.detector_fired {
            Some(Detector::D0) => Some(false),
            Some(Detector::D1) => Some(true),
            _ => None,
        }
    }

    pub fn is_error(&self) -> Option<bool> {
        self.bob_bit().map(|b| b != self.bit_sent)
    }
}

struct RoundInputs {
    index: u64,
    t_s: f64,
    bit: Option<bool>,
}

fn optics_for(attack: Option<&AttackStrategy>) -> Result<GvOptics> {
    let extra = match attack.map(|a| a.kind) {
        Some(AttackKind::GvStoreAndForward { hold_bins }) => hold_bins,
        _ => 0,
    };
    GvOptics::new(extra)
}

fn simulate(
    config: &GvConfig,
    optics: &GvOptics,
    inputs: RoundInputs,
    rng: &mut SimRng,
    attack: Option<(&AttackStrategy, &mut SimRng)>,
) -> Result<GvRound> {
    let bit = match inputs.bit {
        Some(b) => b,
        None => rng.random::<bool>(),
    };
    let photons = config.source.sample_photons(rng);
    let noise = if config.phase_noise_sigma > 0.0 {
        Normal::new(0.0, config.phase_noise_sigma)
            .map_err(|e| GvError::ConfigInvalid(e.to_string()))?
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

    let expected = config.expected_arrival(inputs.t_s);
    // photons per detector and earliest arrival
    let mut hits = [(0u32, f64::INFINITY); 2];
    for _ in 0..photons {
        let mut state = optics.prepare(bit).apply_delay(optics.b, 1)?;
        if interacts {
            let (s, r) = (strategy.expect("set"), eve_rng.as_deref_mut().expect("set"));
            match s.kind {
                AttackKind::InterceptResend { .. } => {
                    let (found, post) = adversary::which_path(&state, optics.a, r);
                    eve.found_photon.get_or_insert(found);
                    state = post;
                }
                AttackKind::GvStoreAndForward { hold_bins } => {
                    state = adversary::hold(&state, &[optics.a, optics.b], hold_bins)?;
                    if hold_bins >= 1 {
                        eve.learned_bit = Some(bit);
                    }
                }
                AttackKind::BeamSplitterTap { reflectivity } => {
                    let tap = adversary::beam_splitter_tap(1, reflectivity, r);
                    if tap.captured > 0 {
                        eve.captured += 1;
                        eve.learned_bit = Some(bit);
                        continue;
                    }
                }
                AttackKind::TimeShift { .. } | AttackKind::None => {}
            }
        }
        let out = optics.receive(&state, phi)?;
        if let Some(mode) = out.sample(rng) {
            let slot = if mode.path == optics.d0 {
                0
            } else if mode.path == optics.d1 {
                1
            } else {
                continue;
            };
            let t = inputs.t_s + config.channel_time + mode.timebin as f64 * config.tau;
            hits[slot].0 += 1;
            hits[slot].1 = hits[slot].1.min(t);
        }
    }

    let detectors = [
        (Detector::D0, config.d0, strategy.map_or(1.0, |s| s.eta_factor(0))),
        (Detector::D1, config.d1, strategy.map_or(1.0, |s| s.eta_factor(1))),
    ];
    let mut clicks = Vec::with_capacity(2);
    for (slot, (id, model, factor)) in detectors.into_iter().enumerate() {
        let model = DetectorModel {
            efficiency: model.efficiency * factor,
            ..model
        };
        let (k, t) = hits[slot];
        let t = if k > 0 { t } else { expected };
        if let Some(ev) = model.respond(id, k, t, rng) {
            clicks.push(ev);
        }
    }
    let first = clicks
        .iter()
        .min_by(|x, y| x.time_tag.total_cmp(&y.time_tag))
        .copied();
    let t_r = first.map(|e| e.time_tag);
    Ok(GvRound {
        index: inputs.index,
        bit_sent: bit,
        t_s: inputs.t_s,
        t_r,
        detector_fired: first.map(|e| e.detector),
        double_click: clicks.len() > 1,
        accepted: t_r.is_some_and(|t| config.within_window(inputs.t_s, t)),
        is_dark: first.is_some_and(|e| e.is_dark),
        photons,
        eve,
    })
}

/// One stand-alone round for `bit`, sent at t = 0.
pub fn run_gv_round(
    config: &GvConfig,
    bit: bool,
    seed: u64,
    attack: Option<&AttackStrategy>,
) -> Result<GvRound> {
    config.validate()?;
    if let Some(a) = attack {
        a.validate()?;
    }
    let optics = optics_for(attack)?;
    let mut rng = rng_from_seed(seed);
    let mut eve_rng = attack.map(|a| a.single_rng(seed));
    simulate(
        config,
        &optics,
        RoundInputs {
            index: 0,
            t_s: 0.0,
            bit: Some(bit),
        },
        &mut rng,
        attack.zip(eve_rng.as_mut()),
    )
}

/// Which bit Alice sends in each round of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitChoice {
    Random,
    Fixed(bool),
}

/// Herald times of a batch: cumulative exponential interarrivals.
pub fn herald_times(source: &SourceModel, rounds: u64, master_seed: u64) -> Result<Vec<f64>> {
    source.validate()?;
    let exp = Exp::new(source.herald_rate)
        .map_err(|e| GvError::ConfigInvalid(format!("herald_rate: {e}")))?;
    let mut rng = rng_from_seed(stream_seed(master_seed, Stream::Heralds));
    let mut t = 0.0;
    Ok((0..rounds)
        .map(|_| {
            t += exp.sample(&mut rng);
            t
        })
        .collect())
}

/// Runs `rounds` independent rounds. Round `i` uses generator
/// `round_rng(master_seed, i)`; the output is ordered by index and does not
/// depend on the thread count.
pub fn run_gv_batch(
    config: &GvConfig,
    rounds: u64,
    master_seed: u64,
    bits: BitChoice,
    attack: Option<&AttackStrategy>,
) -> Result<Vec<GvRound>> {
    config.validate()?;
    if let Some(a) = attack {
        a.validate()?;
    }
    let optics = optics_for(attack)?;
    let times = herald_times(&config.source, rounds, master_seed)?;
    times
        .into_par_iter()
        .enumerate()
        .map(|(i, t_s)| {
            let index = i as u64;
            let mut rng = round_rng(master_seed, index);
            let mut eve_rng = attack.map(|a| a.round_rng(index));
            let bit = match bits {
                BitChoice::Random => None,
                BitChoice::Fixed(b) => Some(b),
            };
            simulate(
                config,
                &optics,
                RoundInputs { index, t_s, bit },
                &mut rng,
                attack.zip(eve_rng.as_mut()),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingPartition {
    pub accepted: Vec<GvRound>,
    /// Clicks outside the window: potential eavesdropping evidence.
    pub discarded: Vec<GvRound>,
}

/// Splits clicked rounds by `|t_r − t_s − τ − T| ≤ tolerance`. Rounds without
/// a click belong to neither side.
pub fn timing_filter(rounds: &[GvRound], config: &GvConfig) -> TimingPartition {
    let mut out = TimingPartition::default();
    for r in rounds {
        if let Some(t_r) = r.t_r {
            if config.within_window(r.t_s, t_r) {
                out.accepted.push(*r);
            } else {
                out.discarded.push(*r);
            }
        }
    }
    out
}

/// Wrong-detector clicks over all clicks among the given rounds.
pub fn gv_qber(rounds: &[GvRound]) -> Result<Estimate> {
    let (mut wrong, mut total) = (0u64, 0u64);
    for r in rounds {
        if let Some(e) = r.is_error() {
            total += 1;
            wrong += e as u64;
        }
    }
    binomial_rate(wrong, total).ok_or(GvError::NoData)
}

/// Aggregate counters of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvStats {
    pub rounds: u64,
    pub clicks: u64,
    pub accepted: u64,
    pub discarded: u64,
    pub double_clicks: u64,
    /// Accepted clicks per (source bit, detector): `[[S0→D0, S0→D1], [S1→D0, S1→D1]]`.
    pub counts: [[u64; 2]; 2],
    pub qber: Option<Estimate>,
    pub eve_interactions: u64,
    pub eve_learned: u64,
}

pub fn gv_stats(rounds: &[GvRound], config: &GvConfig) -> GvStats {
    let part = timing_filter(rounds, config);
    let mut counts = [[0u64; 2]; 2];
    for r in &part.accepted {
        if let Some(b) = r.bob_bit() {
            counts[r.bit_sent as usize][b as usize] += 1;
        }
    }
    GvStats {
        rounds: rounds.len() as u64,
        clicks: (part.accepted.len() + part.discarded.len()) as u64,
        accepted: part.accepted.len() as u64,
        discarded: part.discarded.len() as u64,
        double_clicks: rounds.iter().filter(|r| r.double_click).count() as u64,
        counts,
        qber: gv_qber(&part.accepted).ok(),
        eve_interactions: rounds.iter().filter(|r| r.eve.interacted).count() as u64,
        eve_learned: part
            .accepted
            .iter()
            .filter(|r| r.eve.learned_bit.is_some())
            .count() as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phase: f64,
    pub counts_d0: u64,
    pub counts_d1: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub bit: bool,
    pub points: Vec<FringePoint>,
    pub fit_d0: SinusoidFit,
    pub fit_d1: SinusoidFit,
}

impl FringeScan {
    pub fn visibility_d0(&self) -> Estimate {
        self.fit_d0.visibility
    }

    pub fn visibility_d1(&self) -> Estimate {
        self.fit_d1.visibility
    }
}

/// Evenly spaced grid of `points` phases over `[0, span)`.
pub fn phase_grid(points: usize, span: f64) -> Vec<f64> {
    (0..points).map(|i| span * i as f64 / points as f64).collect()
}

/// Scans the interferometer phase for source S0 and fits a sinusoid to the
/// accepted counts of each detector.
pub fn fringe_scan(
    config: &GvConfig,
    phase_grid: &[f64],
    rounds_per_point: u64,
    seed: u64,
) -> Result<FringeScan> {
    fringe_scan_source(config, false, phase_grid, rounds_per_point, seed)
}

pub fn fringe_scan_source(
    config: &GvConfig,
    bit: bool,
    phase_grid: &[f64],
    rounds_per_point: u64,
    seed: u64,
) -> Result<FringeScan> {
    if phase_grid.is_empty() {
        return Err(GvError::EmptyGrid);
    }
    let scan_seed = stream_seed(seed, Stream::Scan);
    let mut points = Vec::with_capacity(phase_grid.len());
    for (k, &phase) in phase_grid.iter().enumerate() {
        let cfg = GvConfig {
            phase_offset: config.phase_offset + phase,
            ..*config
        };
        let rounds = run_gv_batch(
            &cfg,
            rounds_per_point,
            round_seed(scan_seed, k as u64),
            BitChoice::Fixed(bit),
            None,
        )?;
        let mut c = [0u64; 2];
        for r in rounds.iter().filter(|r| r.accepted) {
            match r.detector_fired {
                Some(Detector::D0) => c[0] += 1,
                Some(Detector::D1) => c[1] += 1,
                _ => {}
            }
        }
        points.push(FringePoint {
            phase,
            counts_d0: c[0],
            counts_d1: c[1],
        });
    }
    let phases: Vec<f64> = points.iter().map(|p| p.phase).collect();
    let y0: Vec<f64> = points.iter().map(|p| p.counts_d0 as f64).collect();
    let y1: Vec<f64> = points.iter().map(|p| p.counts_d1 as f64).collect();
    let fit_d0 = fit_sinusoid(&phases, &y0).ok_or(GvError::NoData)?;
    let fit_d1 = fit_sinusoid(&phases, &y1).ok_or(GvError::NoData)?;
    Ok(FringeScan {
        bit,
        points,
        fit_d0,
        fit_d1,
    })
}
