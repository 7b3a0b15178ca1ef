//! Single-photon states over labelled optical modes and the linear optical
//! elements that act on them.
//!
//! A mode is a (path, polarization, timebin) triple. Paths come from a
//! [`ModeRegistry`] declared per experiment; the registry also fixes how many
//! timebins (in units of the protocol delay) the state can occupy. States are
//! stored densely, one complex amplitude per mode, with at most [`MAX_MODES`]
//! modes.
//!
//! Beam-splitter convention: transmission keeps the path label with amplitude
//! `1/√2`, reflection swaps it with amplitude `i/√2`, i.e. the matrix
//! `[[1, i], [i, 1]] / √2`. Every element in this module uses that single
//! convention; the polarizing beam splitter reflects `V` with the same `i`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_MODES: usize = 64;

/// Amplitude-squared mass tolerated in a destination mode before a routing
/// element reports a collision.
const COLLISION_EPS: f64 = 1e-18;

/// Tolerance on `Σ|a|² + loss_weight = 1` when building a state by hand.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("unknown path `{0}`")]
    UnknownPath(String),
    #[error("beam splitter ports must be distinct (got `{0}` twice)")]
    IdenticalPorts(String),
    #[error("states are defined over different mode registries")]
    RegistryMismatch,
    #[error("path `{0}` declared twice")]
    DuplicatePath(String),
    #[error("registry would hold {0} modes (limit {MAX_MODES})")]
    TooManyModes(usize),
    #[error("registry needs at least one path and one timebin")]
    EmptyRegistry,
    #[error("amplitude on path `{path}` would leave the timebin horizon")]
    TimebinOverflow { path: String },
    #[error("routing into occupied mode on path `{path}`")]
    ModeCollision { path: String },
    #[error("parameter must be finite, got {0}")]
    NotFinite(f64),
    #[error("transmission must lie in [0, 1], got {0}")]
    InvalidTransmission(f64),
    #[error("total probability {0} differs from 1")]
    NotNormalized(f64),
    #[error("loss elements have no inverse")]
    NotInvertible,
}

pub type Result<T> = std::result::Result<T, OpticsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

/// Index of a path inside its registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId(u8);

impl PathId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub path: PathId,
    pub polarization: Polarization,
    pub timebin: u32,
}

impl ModeLabel {
    pub fn new(path: PathId, polarization: Polarization, timebin: u32) -> Self {
        Self {
            path,
            polarization,
            timebin,
        }
    }
}

/// The finite set of paths (and the timebin horizon) an experiment uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegistry {
    paths: Vec<String>,
    timebins: u32,
}

impl ModeRegistry {
    pub fn new<I, S>(paths: I, timebins: u32) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = Vec::new();
        for p in paths {
            let p = p.into();
            if names.contains(&p) {
                return Err(OpticsError::DuplicatePath(p));
            }
            names.push(p);
        }
        if names.is_empty() || timebins == 0 {
            return Err(OpticsError::EmptyRegistry);
        }
        let modes = names.len() * 2 * timebins as usize;
        if modes > MAX_MODES {
            return Err(OpticsError::TooManyModes(modes));
        }
        Ok(Arc::new(Self {
            paths: names,
            timebins,
        }))
    }

    pub fn path(&self, name: &str) -> Result<PathId> {
        self.paths
            .iter()
            .position(|p| p == name)
            .map(|i| PathId(i as u8))
            .ok_or_else(|| OpticsError::UnknownPath(name.to_string()))
    }

    pub fn path_name(&self, id: PathId) -> &str {
        self.paths.get(id.index()).map(String::as_str).unwrap_or("?")
    }

    pub fn paths(&self) -> impl Iterator<Item = (PathId, &str)> {
        self.paths
            .iter()
            .enumerate()
            .map(|(i, p)| (PathId(i as u8), p.as_str()))
    }

    pub fn timebins(&self) -> u32 {
        self.timebins
    }

    pub fn mode_count(&self) -> usize {
        self.paths.len() * 2 * self.timebins as usize
    }

    fn check(&self, id: PathId) -> Result<()> {
        if id.index() < self.paths.len() {
            Ok(())
        } else {
            Err(OpticsError::UnknownPath(format!("#{}", id.0)))
        }
    }

    fn check_mode(&self, mode: ModeLabel) -> Result<()> {
        self.check(mode.path)?;
        if mode.timebin >= self.timebins {
            return Err(OpticsError::TimebinOverflow {
                path: self.path_name(mode.path).to_string(),
            });
        }
        Ok(())
    }

    fn index(&self, path: PathId, pol: Polarization, timebin: u32) -> usize {
        (path.index() * 2 + pol.index()) * self.timebins as usize + timebin as usize
    }

    fn label(&self, idx: usize) -> ModeLabel {
        let t = self.timebins as usize;
        let timebin = (idx % t) as u32;
        let rest = idx / t;
        let polarization = if rest.is_multiple_of(2) {
            Polarization::H
        } else {
            Polarization::V
        };
        ModeLabel::new(PathId((rest / 2) as u8), polarization, timebin)
    }
}

/// A single-excitation state: one complex amplitude per registered mode plus
/// the probability mass already absorbed by loss elements.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState {
    registry: Arc<ModeRegistry>,
    amplitudes: Vec<Complex64>,
    loss_weight: f64,
}

/// Outcome of a projective "is the photon in this set of modes" measurement.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Probability of finding the photon inside the selected modes, conditioned
    /// on the photon not having been lost.
    pub probability: f64,
    pub inside: Option<PhotonState>,
    pub outside: Option<PhotonState>,
}

impl PhotonState {
    /// Amplitude 1 on `mode`.
    pub fn single(registry: &Arc<ModeRegistry>, mode: ModeLabel) -> Result<Self> {
        registry.check_mode(mode)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); registry.mode_count()];
        amplitudes[registry.index(mode.path, mode.polarization, mode.timebin)] =
            Complex64::new(1.0, 0.0);
        Ok(Self {
            registry: Arc::clone(registry),
            amplitudes,
            loss_weight: 0.0,
        })
    }

    /// All probability already absorbed; no amplitude left anywhere.
    pub fn lost(registry: &Arc<ModeRegistry>) -> Self {
        Self {
            registry: Arc::clone(registry),
            amplitudes: vec![Complex64::new(0.0, 0.0); registry.mode_count()],
            loss_weight: 1.0,
        }
    }

    /// Builds a state from explicit amplitudes. Repeated modes add. The result
    /// must satisfy `Σ|a|² + loss_weight = 1` within [`NORM_TOLERANCE`].
    pub fn from_amplitudes<I>(
        registry: &Arc<ModeRegistry>,
        amplitudes: I,
        loss_weight: f64,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (ModeLabel, Complex64)>,
    {
        let mut amps = vec![Complex64::new(0.0, 0.0); registry.mode_count()];
        for (mode, a) in amplitudes {
            registry.check_mode(mode)?;
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(OpticsError::NotFinite(a.norm()));
            }
            amps[registry.index(mode.path, mode.polarization, mode.timebin)] += a;
        }
        let state = Self {
            registry: Arc::clone(registry),
            amplitudes: amps,
            loss_weight,
        };
        let total = state.total_probability();
        if !(0.0..=1.0).contains(&loss_weight) || (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(OpticsError::NotNormalized(total));
        }
        Ok(state)
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn amplitude(&self, mode: ModeLabel) -> Complex64 {
        if self.registry.check_mode(mode).is_err() {
            return Complex64::new(0.0, 0.0);
        }
        self.amplitudes[self
            .registry
            .index(mode.path, mode.polarization, mode.timebin)]
    }

    /// Dense amplitude vector in registry order.
    pub fn raw_amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Non-zero amplitudes with their mode labels.
    pub fn nonzero(&self) -> impl Iterator<Item = (ModeLabel, Complex64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, &a)| (self.registry.label(i), a))
    }

    pub fn loss_weight(&self) -> f64 {
        self.loss_weight
    }

    /// `Σ |amplitude|²` over all modes.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `Σ |amplitude|² + loss_weight`; 1 for every valid state.
    pub fn total_probability(&self) -> f64 {
        self.norm_sqr() + self.loss_weight
    }

    /// Probability mass currently on `path` (all polarizations and timebins).
    pub fn path_weight(&self, path: PathId) -> f64 {
        if self.registry.check(path).is_err() {
            return 0.0;
        }
        self.modes_on(path).map(|i| self.amplitudes[i].norm_sqr()).sum()
    }

    fn modes_on(&self, path: PathId) -> impl Iterator<Item = usize> + '_ {
        let t = self.registry.timebins;
        [Polarization::H, Polarization::V]
            .into_iter()
            .flat_map(move |pol| (0..t).map(move |bin| (pol, bin)))
            .map(move |(pol, bin)| self.registry.index(path, pol, bin))
    }

    fn map_pairs<F>(&self, p: PathId, q: PathId, f: F) -> Self
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let mut out = self.clone();
        for pol in [Polarization::H, Polarization::V] {
            for bin in 0..self.registry.timebins {
                let i = self.registry.index(p, pol, bin);
                let j = self.registry.index(q, pol, bin);
                let (x, y) = f(self.amplitudes[i], self.amplitudes[j]);
                out.amplitudes[i] = x;
                out.amplitudes[j] = y;
            }
        }
        out
    }

    /// 50:50 beam splitter mixing `in1` and `in2` mode-by-mode with the
    /// `[[1, i], [i, 1]] / √2` convention.
    pub fn apply_beamsplitter(&self, in1: PathId, in2: PathId) -> Result<Self> {
        self.check_pair(in1, in2)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::i();
        Ok(self.map_pairs(in1, in2, |a, b| ((a + i * b) * s, (i * a + b) * s)))
    }

    /// Adjoint of [`apply_beamsplitter`](Self::apply_beamsplitter).
    pub fn apply_beamsplitter_adjoint(&self, in1: PathId, in2: PathId) -> Result<Self> {
        self.check_pair(in1, in2)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::i();
        Ok(self.map_pairs(in1, in2, |a, b| ((a - i * b) * s, (-i * a + b) * s)))
    }

    fn check_pair(&self, in1: PathId, in2: PathId) -> Result<()> {
        self.registry.check(in1)?;
        self.registry.check(in2)?;
        if in1 == in2 {
            return Err(OpticsError::IdenticalPorts(
                self.registry.path_name(in1).to_string(),
            ));
        }
        Ok(())
    }

    /// Moves amplitude between modes. Each move takes every timebin of
    /// `(src, pol)` to `(dst, pol)` scaled by `factor`. Destinations must be
    /// empty once all sources have been vacated.
    fn route(&self, moves: &[(PathId, Polarization, PathId, Complex64)]) -> Result<Self> {
        let mut out = self.clone();
        let mut pending = Vec::with_capacity(moves.len() * self.registry.timebins as usize);
        for &(src, pol, dst, factor) in moves {
            self.registry.check(src)?;
            self.registry.check(dst)?;
            for bin in 0..self.registry.timebins {
                let i = self.registry.index(src, pol, bin);
                pending.push((self.registry.index(dst, pol, bin), out.amplitudes[i] * factor, dst));
                out.amplitudes[i] = Complex64::new(0.0, 0.0);
            }
        }
        for (j, a, dst) in pending {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            if out.amplitudes[j].norm_sqr() > COLLISION_EPS {
                return Err(OpticsError::ModeCollision {
                    path: self.registry.path_name(dst).to_string(),
                });
            }
            out.amplitudes[j] += a;
        }
        Ok(out)
    }

    /// Polarizing beam splitter: `H` on `input` continues to `transmit`, `V`
    /// goes to `reflect` with phase `i`.
    pub fn apply_pbs(&self, input: PathId, transmit: PathId, reflect: PathId) -> Result<Self> {
        self.route(&[
            (input, Polarization::H, transmit, Complex64::new(1.0, 0.0)),
            (input, Polarization::V, reflect, Complex64::i()),
        ])
    }

    /// Inverse of [`apply_pbs`](Self::apply_pbs): recombines `transmit` (H)
    /// and `reflect` (V) back onto `input`.
    pub fn apply_pbs_inverse(&self, input: PathId, transmit: PathId, reflect: PathId) -> Result<Self> {
        self.route(&[
            (transmit, Polarization::H, input, Complex64::new(1.0, 0.0)),
            (reflect, Polarization::V, input, -Complex64::i()),
        ])
    }

    /// Rotates the (H, V) amplitudes on `path` by `[[cos θ, -sin θ], [sin θ, cos θ]]`.
    pub fn apply_hwp(&self, path: PathId, theta: f64) -> Result<Self> {
        self.registry.check(path)?;
        if !theta.is_finite() {
            return Err(OpticsError::NotFinite(theta));
        }
        let (s, c) = theta.sin_cos();
        let mut out = self.clone();
        for bin in 0..self.registry.timebins {
            let ih = self.registry.index(path, Polarization::H, bin);
            let iv = self.registry.index(path, Polarization::V, bin);
            let (h, v) = (self.amplitudes[ih], self.amplitudes[iv]);
            out.amplitudes[ih] = h * c - v * s;
            out.amplitudes[iv] = h * s + v * c;
        }
        Ok(out)
    }

    /// Shifts every amplitude on `path` forward by `bins` timebins.
    pub fn apply_delay(&self, path: PathId, bins: u32) -> Result<Self> {
        self.registry.check(path)?;
        if bins == 0 {
            return Ok(self.clone());
        }
        let t = self.registry.timebins;
        let mut out = self.clone();
        for pol in [Polarization::H, Polarization::V] {
            for bin in 0..t {
                out.amplitudes[self.registry.index(path, pol, bin)] = Complex64::new(0.0, 0.0);
            }
            for bin in 0..t {
                let a = self.amplitudes[self.registry.index(path, pol, bin)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let target = bin.checked_add(bins).filter(|&b| b < t).ok_or_else(|| {
                    OpticsError::TimebinOverflow {
                        path: self.registry.path_name(path).to_string(),
                    }
                })?;
                out.amplitudes[self.registry.index(path, pol, target)] = a;
            }
        }
        Ok(out)
    }

    /// Shifts every amplitude on `path` back by `bins` timebins.
    pub fn apply_advance(&self, path: PathId, bins: u32) -> Result<Self> {
        self.registry.check(path)?;
        let t = self.registry.timebins;
        let mut out = self.clone();
        for pol in [Polarization::H, Polarization::V] {
            for bin in 0..t {
                out.amplitudes[self.registry.index(path, pol, bin)] = Complex64::new(0.0, 0.0);
            }
            for bin in 0..t {
                let a = self.amplitudes[self.registry.index(path, pol, bin)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let target = bin.checked_sub(bins).ok_or_else(|| OpticsError::TimebinOverflow {
                    path: self.registry.path_name(path).to_string(),
                })?;
                out.amplitudes[self.registry.index(path, pol, target)] = a;
            }
        }
        Ok(out)
    }

    /// Multiplies every amplitude on `path` by `e^{iφ}`.
    pub fn apply_phase(&self, path: PathId, phi: f64) -> Result<Self> {
        self.registry.check(path)?;
        if !phi.is_finite() {
            return Err(OpticsError::NotFinite(phi));
        }
        let factor = Complex64::from_polar(1.0, phi);
        let mut out = self.clone();
        for i in self.modes_on(path).collect::<Vec<_>>() {
            out.amplitudes[i] *= factor;
        }
        Ok(out)
    }

    /// Moves everything on `from` to `to` unchanged.
    pub fn apply_mirror(&self, from: PathId, to: PathId) -> Result<Self> {
        if from == to {
            self.registry.check(from)?;
            return Ok(self.clone());
        }
        let one = Complex64::new(1.0, 0.0);
        self.route(&[
            (from, Polarization::H, to, one),
            (from, Polarization::V, to, one),
        ])
    }

    /// Partial absorber on `path`: amplitudes scale by `√transmission`, the
    /// removed mass is added to `loss_weight`.
    pub fn apply_loss(&self, path: PathId, transmission: f64) -> Result<Self> {
        self.registry.check(path)?;
        if !(0.0..=1.0).contains(&transmission) {
            return Err(OpticsError::InvalidTransmission(transmission));
        }
        let scale = transmission.sqrt();
        let mut out = self.clone();
        let mut absorbed = 0.0;
        for i in self.modes_on(path).collect::<Vec<_>>() {
            absorbed += self.amplitudes[i].norm_sqr() * (1.0 - transmission);
            out.amplitudes[i] *= scale;
        }
        out.loss_weight = (self.loss_weight + absorbed).min(1.0);
        Ok(out)
    }

    /// Hermitian inner product `⟨self|other⟩`; loss weight is not part of it.
    pub fn inner_product(&self, other: &PhotonState) -> Result<Complex64> {
        if !Arc::ptr_eq(&self.registry, &other.registry) && self.registry != other.registry {
            return Err(OpticsError::RegistryMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Born-rule sample of where the photon is found; `None` if it was lost.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<ModeLabel> {
        let total = self.total_probability();
        let mut u = rng.random::<f64>() * total;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            if u < p {
                return Some(self.registry.label(i));
            }
            u -= p;
        }
        None
    }

    /// Projects onto the modes selected by `inside`. Both branches are
    /// renormalized and carry no loss weight.
    pub fn project<F>(&self, inside: F) -> Projection
    where
        F: Fn(ModeLabel) -> bool,
    {
        let norm = self.norm_sqr();
        let mut a_in = self.amplitudes.clone();
        let mut a_out = self.amplitudes.clone();
        let mut p_in = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if inside(self.registry.label(i)) {
                p_in += a.norm_sqr();
                a_out[i] = Complex64::new(0.0, 0.0);
            } else {
                a_in[i] = Complex64::new(0.0, 0.0);
            }
        }
        let p_out = norm - p_in;
        let make = |mut amps: Vec<Complex64>, p: f64| {
            if p <= 0.0 {
                return None;
            }
            let s = 1.0 / p.sqrt();
            amps.iter_mut().for_each(|a| *a *= s);
            Some(PhotonState {
                registry: Arc::clone(&self.registry),
                amplitudes: amps,
                loss_weight: 0.0,
            })
        };
        Projection {
            probability: if norm > 0.0 { p_in / norm } else { 0.0 },
            inside: make(a_in, p_in),
            outside: make(a_out, p_out.max(0.0)),
        }
    }
}

impl fmt::Display for PhotonState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (mode, a) in self.nonzero() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(
                f,
                "({:.4}{:+.4}i)|{},{:?},t{}⟩",
                a.re,
                a.im,
                self.registry.path_name(mode.path),
                mode.polarization,
                mode.timebin
            )?;
        }
        if first {
            write!(f, "0")?;
        }
        if self.loss_weight > 0.0 {
            write!(f, " [lost {:.4}]", self.loss_weight)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    BeamSplitter,
    PolarizingBs,
    HalfWavePlate,
    Delay,
    PhaseShift,
    Mirror,
    Loss,
}

/// One optical element together with the paths it acts on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpticalElement {
    BeamSplitter { a: PathId, b: PathId },
    PolarizingBs { input: PathId, transmit: PathId, reflect: PathId },
    HalfWavePlate { path: PathId, theta: f64 },
    Delay { path: PathId, bins: u32 },
    PhaseShift { path: PathId, phi: f64 },
    Mirror { from: PathId, to: PathId },
    Loss { path: PathId, transmission: f64 },
}

impl OpticalElement {
    pub fn kind(&self) -> ElementKind {
        match self {
            OpticalElement::BeamSplitter { .. } => ElementKind::BeamSplitter,
            OpticalElement::PolarizingBs { .. } => ElementKind::PolarizingBs,
            OpticalElement::HalfWavePlate { .. } => ElementKind::HalfWavePlate,
            OpticalElement::Delay { .. } => ElementKind::Delay,
            OpticalElement::PhaseShift { .. } => ElementKind::PhaseShift,
            OpticalElement::Mirror { .. } => ElementKind::Mirror,
            OpticalElement::Loss { .. } => ElementKind::Loss,
        }
    }

    pub fn is_norm_preserving(&self) -> bool {
        !matches!(self, OpticalElement::Loss { .. })
    }

    pub fn acted_paths(&self) -> Vec<PathId> {
        match *self {
            OpticalElement::BeamSplitter { a, b } => vec![a, b],
            OpticalElement::PolarizingBs {
                input,
                transmit,
                reflect,
            } => vec![input, transmit, reflect],
            OpticalElement::HalfWavePlate { path, .. }
            | OpticalElement::Delay { path, .. }
            | OpticalElement::PhaseShift { path, .. }
            | OpticalElement::Loss { path, .. } => vec![path],
            OpticalElement::Mirror { from, to } => vec![from, to],
        }
    }

    pub fn apply(&self, state: &PhotonState) -> Result<PhotonState> {
        match *self {
            OpticalElement::BeamSplitter { a, b } => state.apply_beamsplitter(a, b),
            OpticalElement::PolarizingBs {
                input,
                transmit,
                reflect,
            } => state.apply_pbs(input, transmit, reflect),
            OpticalElement::HalfWavePlate { path, theta } => state.apply_hwp(path, theta),
            OpticalElement::Delay { path, bins } => state.apply_delay(path, bins),
            OpticalElement::PhaseShift { path, phi } => state.apply_phase(path, phi),
            OpticalElement::Mirror { from, to } => state.apply_mirror(from, to),
            OpticalElement::Loss { path, transmission } => state.apply_loss(path, transmission),
        }
    }

    /// Applies the analytic inverse of the element.
    pub fn apply_inverse(&self, state: &PhotonState) -> Result<PhotonState> {
        match *self {
            OpticalElement::BeamSplitter { a, b } => state.apply_beamsplitter_adjoint(a, b),
            OpticalElement::PolarizingBs {
                input,
                transmit,
                reflect,
            } => state.apply_pbs_inverse(input, transmit, reflect),
            OpticalElement::HalfWavePlate { path, theta } => state.apply_hwp(path, -theta),
            OpticalElement::Delay { path, bins } => state.apply_advance(path, bins),
            OpticalElement::PhaseShift { path, phi } => state.apply_phase(path, -phi),
            OpticalElement::Mirror { from, to } => state.apply_mirror(to, from),
            OpticalElement::Loss { .. } => Err(OpticsError::NotInvertible),
        }
    }
}

/// The fixed-point condition behind the no-cloning argument: a cloning unitary
/// for two states with overlap `x` requires `x = x²`.
pub fn cloning_consistent(overlap: Complex64, tol: f64) -> bool {
    (overlap - overlap * overlap).norm() <= tol
}

/// Whether some unitary could clone both `a` and `b`: true only when the states
/// are identical (overlap 1) or orthogonal (overlap 0).
pub fn clonable_pair(a: &PhotonState, b: &PhotonState, tol: f64) -> Result<bool> {
    Ok(cloning_consistent(a.inner_product(b)?, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn reg() -> Arc<ModeRegistry> {
        ModeRegistry::new(["a", "b", "t", "r"], 3).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(x: Complex64, y: Complex64) -> bool {
        (x - y).norm() < 1e-12
    }

    #[test]
    fn beamsplitter_convention() {
        let r = reg();
        let (a, b) = (r.path("a").unwrap(), r.path("b").unwrap());
        let s = PhotonState::single(&r, ModeLabel::new(b, Polarization::H, 0)).unwrap();
        let out = s.apply_beamsplitter(b, a).unwrap();
        assert!(close(out.amplitude(ModeLabel::new(b, Polarization::H, 0)), c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(out.amplitude(ModeLabel::new(a, Polarization::H, 0)), c(0.0, FRAC_1_SQRT_2)));
    }

    #[test]
    fn beamsplitter_on_lost_state_is_unchanged() {
        let r = reg();
        let (a, b) = (r.path("a").unwrap(), r.path("b").unwrap());
        let s = PhotonState::lost(&r);
        assert_eq!(s.apply_beamsplitter(a, b).unwrap(), s);
    }

    #[test]
    fn beamsplitter_squared_is_i_times_swap() {
        // [[1,i],[i,1]]/√2 squared = [[0,i],[i,0]]
        let m = [[c(1.0, 0.0), c(0.0, 1.0)], [c(0.0, 1.0), c(1.0, 0.0)]];
        let mut m2 = [[c(0.0, 0.0); 2]; 2];
        for (i, row) in m.iter().enumerate() {
            for j in 0..2 {
                m2[i][j] = (row[0] * m[0][j] + row[1] * m[1][j]) * 0.5;
            }
        }
        assert!(close(m2[0][0], c(0.0, 0.0)) && close(m2[1][1], c(0.0, 0.0)));
        assert!(close(m2[0][1], c(0.0, 1.0)) && close(m2[1][0], c(0.0, 1.0)));

        let r = reg();
        let (a, b) = (r.path("a").unwrap(), r.path("b").unwrap());
        let s = PhotonState::from_amplitudes(
            &r,
            [
                (ModeLabel::new(a, Polarization::H, 0), c(0.6, 0.0)),
                (ModeLabel::new(b, Polarization::H, 0), c(0.0, 0.8)),
            ],
            0.0,
        )
        .unwrap();
        let twice = s.apply_beamsplitter(a, b).unwrap().apply_beamsplitter(a, b).unwrap();
        let i = Complex64::i();
        assert!(close(twice.amplitude(ModeLabel::new(a, Polarization::H, 0)), i * c(0.0, 0.8)));
        assert!(close(twice.amplitude(ModeLabel::new(b, Polarization::H, 0)), i * c(0.6, 0.0)));
    }

    #[test]
    fn beamsplitter_errors() {
        let r = reg();
        let a = r.path("a").unwrap();
        let s = PhotonState::single(&r, ModeLabel::new(a, Polarization::H, 0)).unwrap();
        assert!(matches!(s.apply_beamsplitter(a, a), Err(OpticsError::IdenticalPorts(_))));
        assert!(matches!(r.path("zz"), Err(OpticsError::UnknownPath(_))));
        let other = ModeRegistry::new(["a", "b", "c", "d", "e", "f", "g"], 1).unwrap();
        let foreign = other.path("g").unwrap();
        assert!(matches!(s.apply_beamsplitter(a, foreign), Err(OpticsError::UnknownPath(_))));
    }

    #[test]
    fn pbs_routes_by_polarization() {
        let r = reg();
        let (input, t, rf) = (r.path("a").unwrap(), r.path("t").unwrap(), r.path("r").unwrap());
        let h = PhotonState::single(&r, ModeLabel::new(input, Polarization::H, 0)).unwrap();
        let out = h.apply_pbs(input, t, rf).unwrap();
        assert!(close(out.amplitude(ModeLabel::new(t, Polarization::H, 0)), c(1.0, 0.0)));

        let v = PhotonState::single(&r, ModeLabel::new(input, Polarization::V, 0)).unwrap();
        let out = v.apply_pbs(input, t, rf).unwrap();
        assert!(close(out.amplitude(ModeLabel::new(rf, Polarization::V, 0)), c(0.0, 1.0)));

        let d = PhotonState::from_amplitudes(
            &r,
            [
                (ModeLabel::new(input, Polarization::H, 0), c(FRAC_1_SQRT_2, 0.0)),
                (ModeLabel::new(input, Polarization::V, 0), c(FRAC_1_SQRT_2, 0.0)),
            ],
            0.0,
        )
        .unwrap();
        let out = d.apply_pbs(input, t, rf).unwrap();
        assert!(close(out.amplitude(ModeLabel::new(t, Polarization::H, 0)), c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(out.amplitude(ModeLabel::new(rf, Polarization::V, 0)), c(0.0, FRAC_1_SQRT_2)));
        assert!((out.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pbs_reports_collisions() {
        let r = reg();
        let (a, t, rf) = (r.path("a").unwrap(), r.path("t").unwrap(), r.path("r").unwrap());
        let s = PhotonState::from_amplitudes(
            &r,
            [
                (ModeLabel::new(a, Polarization::H, 0), c(FRAC_1_SQRT_2, 0.0)),
                (ModeLabel::new(t, Polarization::H, 0), c(FRAC_1_SQRT_2, 0.0)),
            ],
            0.0,
        )
        .unwrap();
        assert!(matches!(s.apply_pbs(a, t, rf), Err(OpticsError::ModeCollision { .. })));
    }

    #[test]
    fn hwp_rotations() {
        let r = reg();
        let p = r.path("a").unwrap();
        let h = PhotonState::single(&r, ModeLabel::new(p, Polarization::H, 0)).unwrap();
        assert_eq!(h.apply_hwp(p, 0.0).unwrap(), h);
        let v = h.apply_hwp(p, FRAC_PI_2).unwrap();
        assert!(close(v.amplitude(ModeLabel::new(p, Polarization::V, 0)), c(1.0, 0.0)));
        assert!(v.amplitude(ModeLabel::new(p, Polarization::H, 0)).norm() < 1e-12);
        let d = h.apply_hwp(p, FRAC_PI_4).unwrap();
        assert!(close(d.amplitude(ModeLabel::new(p, Polarization::H, 0)), c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(d.amplitude(ModeLabel::new(p, Polarization::V, 0)), c(FRAC_1_SQRT_2, 0.0)));
        assert!(matches!(h.apply_hwp(p, f64::NAN), Err(OpticsError::NotFinite(_))));
    }

    #[test]
    fn delay_shifts_timebin() {
        let r = reg();
        let a = r.path("a").unwrap();
        let s = PhotonState::single(&r, ModeLabel::new(a, Polarization::H, 0)).unwrap();
        assert_eq!(s.apply_delay(a, 0).unwrap(), s);
        let d = s.apply_delay(a, 1).unwrap();
        assert!(close(d.amplitude(ModeLabel::new(a, Polarization::H, 1)), c(1.0, 0.0)));
        assert!(matches!(d.apply_delay(a, 2), Err(OpticsError::TimebinOverflow { .. })));
        assert_eq!(d.apply_advance(a, 1).unwrap(), s);
    }

    #[test]
    fn gv_packets_meet_after_both_delays() {
        // |b⟩ held by the first delay line, |a⟩ by the second: both arrive in bin 1.
        let r = reg();
        let (a, b) = (r.path("a").unwrap(), r.path("b").unwrap());
        let s = PhotonState::from_amplitudes(
            &r,
            [
                (ModeLabel::new(a, Polarization::H, 0), c(FRAC_1_SQRT_2, 0.0)),
                (ModeLabel::new(b, Polarization::H, 0), c(FRAC_1_SQRT_2, 0.0)),
            ],
            0.0,
        )
        .unwrap();
        let s = s.apply_delay(b, 1).unwrap().apply_delay(a, 1).unwrap();
        let s = s.apply_phase(b, FRAC_PI_2).unwrap().apply_beamsplitter(a, b).unwrap();
        // Full interference: the photon leaves through a single port.
        let pb = s.amplitude(ModeLabel::new(b, Polarization::H, 1)).norm_sqr();
        let pa = s.amplitude(ModeLabel::new(a, Polarization::H, 1)).norm_sqr();
        assert!((pb - 1.0).abs() < 1e-12 && pa < 1e-12);

        // Without the second delay the packets sit in different bins: no interference.
        let s2 = PhotonState::from_amplitudes(
            &r,
            [
                (ModeLabel::new(a, Polarization::H, 0), c(FRAC_1_SQRT_2, 0.0)),
                (ModeLabel::new(b, Polarization::H, 0), c(FRAC_1_SQRT_2, 0.0)),
            ],
            0.0,
        )
        .unwrap()
        .apply_delay(b, 1)
        .unwrap()
        .apply_phase(b, FRAC_PI_2)
        .unwrap()
        .apply_beamsplitter(a, b)
        .unwrap();
        let pb0 = s2.amplitude(ModeLabel::new(b, Polarization::H, 0)).norm_sqr();
        assert!((pb0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn phase_flip_switches_output_port() {
        let r = reg();
        let (a, b) = (r.path("a").unwrap(), r.path("b").unwrap());
        let port = |phi: f64| {
            let s = PhotonState::single(&r, ModeLabel::new(a, Polarization::H, 0))
                .unwrap()
                .apply_beamsplitter(a, b)
                .unwrap()
                .apply_phase(a, phi)
                .unwrap()
                .apply_beamsplitter(a, b)
                .unwrap();
            (
                s.amplitude(ModeLabel::new(a, Polarization::H, 0)).norm_sqr(),
                s.amplitude(ModeLabel::new(b, Polarization::H, 0)).norm_sqr(),
            )
        };
        let (a0, b0) = port(0.0);
        let (api, bpi) = port(PI);
        assert!(a0 < 1e-12 && (b0 - 1.0).abs() < 1e-12);
        assert!((api - 1.0).abs() < 1e-12 && bpi < 1e-12);
        assert_eq!(
            PhotonState::lost(&r).apply_phase(a, 0.0).unwrap(),
            PhotonState::lost(&r)
        );
    }

    #[test]
    fn loss_moves_mass_to_loss_weight() {
        let r = reg();
        let a = r.path("a").unwrap();
        let s = PhotonState::single(&r, ModeLabel::new(a, Polarization::H, 0)).unwrap();
        let l = s.apply_loss(a, 0.25).unwrap();
        assert!((l.loss_weight() - 0.75).abs() < 1e-12);
        assert!((l.total_probability() - 1.0).abs() < 1e-12);
        assert!(matches!(s.apply_loss(a, 1.5), Err(OpticsError::InvalidTransmission(_))));
        let e = OpticalElement::Loss { path: a, transmission: 0.5 };
        assert!(!e.is_norm_preserving());
        assert!(matches!(e.apply_inverse(&s), Err(OpticsError::NotInvertible)));
    }

    #[test]
    fn inner_product_needs_same_registry() {
        let r1 = reg();
        let r2 = ModeRegistry::new(["x"], 1).unwrap();
        let s1 = PhotonState::single(&r1, ModeLabel::new(r1.path("a").unwrap(), Polarization::H, 0)).unwrap();
        let s2 = PhotonState::single(&r2, ModeLabel::new(r2.path("x").unwrap(), Polarization::H, 0)).unwrap();
        assert!(matches!(s1.inner_product(&s2), Err(OpticsError::RegistryMismatch)));
        assert!(close(s1.inner_product(&s1).unwrap(), c(1.0, 0.0)));
    }

    #[test]
    fn registry_limits() {
        assert!(matches!(ModeRegistry::new(["a", "a"], 1), Err(OpticsError::DuplicatePath(_))));
        assert!(matches!(ModeRegistry::new(["a"; 0], 1), Err(OpticsError::EmptyRegistry)));
        let many: Vec<String> = (0..17).map(|i| format!("p{i}")).collect();
        assert!(matches!(ModeRegistry::new(many, 2), Err(OpticsError::TooManyModes(68))));
    }

    #[test]
    fn cloning_fixed_points() {
        assert!(cloning_consistent(c(0.0, 0.0), 1e-12));
        assert!(cloning_consistent(c(1.0, 0.0), 1e-12));
        for x in [0.1, 0.5, 0.9, -1.0] {
            assert!(!cloning_consistent(c(x, 0.0), 1e-12));
        }
        assert!(!cloning_consistent(c(0.0, 1.0), 1e-12));
    }

    #[test]
    fn projection_splits_probability() {
        let r = reg();
        let (a, b) = (r.path("a").unwrap(), r.path("b").unwrap());
        let s = PhotonState::single(&r, ModeLabel::new(a, Polarization::H, 0))
            .unwrap()
            .apply_beamsplitter(a, b)
            .unwrap();
        let p = s.project(|m| m.path == a);
        assert!((p.probability - 0.5).abs() < 1e-12);
        let inside = p.inside.unwrap();
        assert!((inside.path_weight(a) - 1.0).abs() < 1e-12);
        assert!((p.outside.unwrap().path_weight(b) - 1.0).abs() < 1e-12);
    }
}
