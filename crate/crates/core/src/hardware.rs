//! Heralded single-photon source and single-photon avalanche detector models.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{rng_from_seed, round_rng, SimRng};
use crate::stats::Estimate;

/// Largest multi-photon probability for which the independent-pair model is
/// considered valid.
pub const MAX_P_MULTI: f64 = 0.1;

/// Default detector timing jitter (300 ps).
pub const DEFAULT_JITTER: f64 = 300e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HardwareError {
    #[error("{name} = {value} is outside its valid range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("arrival probability {0} is not in [0, 1]")]
    InvalidProbability(f64),
    #[error("coincidence counts too low for a g2 estimate (n_c1 = {n_c1}, n_c2 = {n_c2})")]
    InsufficientCounts { n_c1: u64, n_c2: u64 },
}

pub type Result<T> = std::result::Result<T, HardwareError>;

fn check(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(HardwareError::InvalidParameter { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Heralded pairs per second.
    pub herald_rate: f64,
    /// Probability that an emission carries two photons.
    pub p_multi: f64,
    pub coupling_efficiency: f64,
    /// Coincidence window around each herald, in seconds.
    pub herald_window: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            herald_rate: 1.0e4,
            p_multi: 0.0,
            coupling_efficiency: 1.0,
            herald_window: 10e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionEvent {
    /// Photons that survived coupling into the signal arm.
    pub n_photons: u8,
    pub herald_time: f64,
}

impl SourceModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        check("herald_rate", self.herald_rate, f64::MIN_POSITIVE, f64::MAX)?;
        check("p_multi", self.p_multi, 0.0, MAX_P_MULTI)?;
        check("coupling_efficiency", self.coupling_efficiency, 0.0, 1.0)?;
        check("herald_window", self.herald_window, 0.0, f64::MAX)
    }

    /// Photon number of one heralded emission after coupling loss.
    pub fn sample_photons<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let emitted = if rng.random::<f64>() < self.p_multi { 2 } else { 1 };
        (0..emitted)
            .filter(|_| rng.random::<f64>() < self.coupling_efficiency)
            .count() as u8
    }

    /// Infinite stream of heralded emissions with exponential interarrival
    /// times, starting at t = 0.
    pub fn heralds(&self, seed: u64) -> Result<HeraldedSource> {
        self.validate()?;
        Ok(HeraldedSource {
            model: *self,
            interarrival: Exp::new(self.herald_rate)
                .map_err(|_| HardwareError::InvalidParameter {
                    name: "herald_rate",
                    value: self.herald_rate,
                })?,
            rng: rng_from_seed(seed),
            now: 0.0,
        })
    }
}

/// One emission drawn from a fresh generator seeded with `seed`.
pub fn emit(source: &SourceModel, seed: u64) -> Result<EmissionEvent> {
    source
        .heralds(seed)?
        .next()
        .ok_or(HardwareError::InvalidParameter {
            name: "herald_rate",
            value: source.herald_rate,
        })
}

pub struct HeraldedSource {
    model: SourceModel,
    interarrival: Exp<f64>,
    rng: SimRng,
    now: f64,
}

impl Iterator for HeraldedSource {
    type Item = EmissionEvent;

    fn next(&mut self) -> Option<EmissionEvent> {
        self.now += self.interarrival.sample(&mut self.rng);
        let n_photons = self.model.sample_photons(&mut self.rng);
        Some(EmissionEvent {
            n_photons,
            herald_time: self.now,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    D0,
    D1,
    D2,
    C1,
    C2,
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Detector::D0 => "D0",
            Detector::D1 => "D1",
            Detector::D2 => "D2",
            Detector::C1 => "C1",
            Detector::C2 => "C2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    pub jitter_sigma: f64,
    /// Gate length in seconds; a dark count lands anywhere inside it.
    pub gate_window: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            jitter_sigma: DEFAULT_JITTER,
            gate_window: 10e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub detector: Detector,
    pub time_tag: f64,
    /// Simulation truth. Protocol logic must not look at this.
    pub is_dark: bool,
}

/// Both click channels of one gate, sampled independently.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClickSample {
    pub signal: Option<f64>,
    pub dark: Option<f64>,
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            jitter_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn with_efficiency(efficiency: f64) -> Self {
        Self {
            efficiency,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check("efficiency", self.efficiency, 0.0, 1.0)?;
        check("dark_rate", self.dark_rate, 0.0, f64::MAX)?;
        check("jitter_sigma", self.jitter_sigma, 0.0, f64::MAX)?;
        check("gate_window", self.gate_window, 0.0, f64::MAX)
    }

    /// Dark-click probability per gate.
    pub fn dark_probability(&self) -> f64 {
        (self.dark_rate * self.gate_window).clamp(0.0, 1.0)
    }

    /// Sets `dark_rate` so that the per-gate dark probability equals `p`.
    pub fn with_dark_probability(mut self, p: f64) -> Self {
        self.dark_rate = if self.gate_window > 0.0 {
            p / self.gate_window
        } else {
            0.0
        };
        self
    }

    fn jittered<R: Rng + ?Sized>(&self, true_time: f64, rng: &mut R) -> f64 {
        let t = if self.jitter_sigma > 0.0 {
            let n = Normal::new(0.0, self.jitter_sigma).expect("validated jitter");
            true_time + n.sample(rng)
        } else {
            true_time
        };
        t.max(0.0)
    }

    fn dark_time<R: Rng + ?Sized>(&self, true_time: f64, rng: &mut R) -> f64 {
        let offset = (rng.random::<f64>() - 0.5) * self.gate_window;
        (true_time + offset).max(0.0)
    }

    /// Samples the signal and dark channels of one gate independently.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        arrival_probability: f64,
        true_time: f64,
        rng: &mut R,
    ) -> Result<ClickSample> {
        if !(0.0..=1.0).contains(&arrival_probability) {
            return Err(HardwareError::InvalidProbability(arrival_probability));
        }
        let signal_hit = rng.random::<f64>() < self.efficiency * arrival_probability;
        let dark_hit = rng.random::<f64>() < self.dark_probability();
        Ok(ClickSample {
            signal: signal_hit.then(|| self.jittered(true_time, rng)),
            dark: dark_hit.then(|| self.dark_time(true_time, rng)),
        })
    }

    /// A single detector response for a gate. A signal click takes precedence
    /// over a simultaneous dark click (the detector fires once).
    pub fn detect<R: Rng + ?Sized>(
        &self,
        detector: Detector,
        arrival_probability: f64,
        true_time: f64,
        rng: &mut R,
    ) -> Result<Option<DetectionEvent>> {
        let s = self.sample(arrival_probability, true_time, rng)?;
        Ok(to_event(detector, s))
    }

    /// Response to `photons` photons that all reached the detector.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        detector: Detector,
        photons: u32,
        true_time: f64,
        rng: &mut R,
    ) -> Option<DetectionEvent> {
        let p = 1.0 - (1.0 - self.efficiency).powi(photons as i32);
        let signal_hit = rng.random::<f64>() < p;
        let dark_hit = rng.random::<f64>() < self.dark_probability();
        let s = ClickSample {
            signal: signal_hit.then(|| self.jittered(true_time, rng)),
            dark: dark_hit.then(|| self.dark_time(true_time, rng)),
        };
        to_event(detector, s)
    }
}

fn to_event(detector: Detector, s: ClickSample) -> Option<DetectionEvent> {
    match (s.signal, s.dark) {
        (Some(t), _) => Some(DetectionEvent {
            detector,
            time_tag: t,
            is_dark: false,
        }),
        (None, Some(t)) => Some(DetectionEvent {
            detector,
            time_tag: t,
            is_dark: true,
        }),
        (None, None) => None,
    }
}

/// Free-function form of [`DetectorModel::detect`] with its own generator.
pub fn detect(
    arrival_probability: f64,
    true_time: f64,
    model: &DetectorModel,
    seed: u64,
) -> Result<Option<DetectionEvent>> {
    let mut rng = rng_from_seed(seed);
    model.detect(Detector::D0, arrival_probability, true_time, &mut rng)
}

/// Heralded coincidence estimator `n_triple · n_herald / (n_c1 · n_c2)` with a
/// Poissonian standard error.
pub fn estimate_g2(n_herald: u64, n_c1: u64, n_c2: u64, n_triple: u64) -> Result<Estimate> {
    if n_c1 == 0 || n_c2 == 0 || n_herald == 0 {
        return Err(HardwareError::InsufficientCounts { n_c1, n_c2 });
    }
    let (h, c1, c2) = (n_herald as f64, n_c1 as f64, n_c2 as f64);
    let g2 = n_triple as f64 * h / (c1 * c2);
    let err = if n_triple == 0 {
        // one-count upper scale
        h / (c1 * c2)
    } else {
        g2 * (1.0 / n_triple as f64 + 1.0 / c1 + 1.0 / c2 + 1.0 / h).sqrt()
    };
    Ok(Estimate::new(g2, err))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HbtCounts {
    pub n_herald: u64,
    pub n_c1: u64,
    pub n_c2: u64,
    pub n_triple: u64,
}

impl HbtCounts {
    pub fn g2(&self) -> Result<Estimate> {
        estimate_g2(self.n_herald, self.n_c1, self.n_c2, self.n_triple)
    }
}

/// Hanbury Brown–Twiss measurement on the heralded arm: each surviving photon
/// picks one of two detectors at random; counts are herald-conditioned.
pub fn simulate_hbt(
    source: &SourceModel,
    det1: &DetectorModel,
    det2: &DetectorModel,
    emissions: u64,
    seed: u64,
) -> Result<HbtCounts> {
    source.validate()?;
    det1.validate()?;
    det2.validate()?;
    let mut counts = HbtCounts::default();
    for i in 0..emissions {
        let mut rng = round_rng(seed, i);
        let n = source.sample_photons(&mut rng);
        let (mut k1, mut k2) = (0u32, 0u32);
        for _ in 0..n {
            if rng.random::<bool>() {
                k1 += 1;
            } else {
                k2 += 1;
            }
        }
        let c1 = det1.respond(Detector::C1, k1, 0.0, &mut rng).is_some();
        let c2 = det2.respond(Detector::C2, k2, 0.0, &mut rng).is_some();
        counts.n_herald += 1;
        counts.n_c1 += c1 as u64;
        counts.n_c2 += c2 as u64;
        counts.n_triple += (c1 && c2) as u64;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        let s = SourceModel {
            p_multi: 0.2,
            ..SourceModel::default()
        };
        assert!(s.validate().is_err());
        let d = DetectorModel {
            efficiency: 1.5,
            ..DetectorModel::default()
        };
        assert!(d.validate().is_err());
        assert!(matches!(
            detect(1.2, 0.0, &DetectorModel::default(), 1),
            Err(HardwareError::InvalidProbability(_))
        ));
    }

    #[test]
    fn single_photon_source_never_emits_pairs() {
        let src = SourceModel::ideal();
        assert!(src.heralds(3).unwrap().take(10_000).all(|e| e.n_photons == 1));
    }

    #[test]
    fn zero_coupling_emits_nothing() {
        let src = SourceModel {
            coupling_efficiency: 0.0,
            p_multi: 0.1,
            ..SourceModel::default()
        };
        assert!(src.heralds(3).unwrap().take(10_000).all(|e| e.n_photons == 0));
    }

    #[test]
    fn herald_times_increase() {
        let src = SourceModel::default();
        let times: Vec<f64> = src.heralds(9).unwrap().take(1000).map(|e| e.herald_time).collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        let mean = times[999] / 1000.0;
        assert!((mean * src.herald_rate - 1.0).abs() < 0.15);
    }

    #[test]
    fn ideal_detector_clicks_on_time() {
        let e = detect(1.0, 5e-9, &DetectorModel::ideal(), 4).unwrap().unwrap();
        assert_eq!(e.time_tag, 5e-9);
        assert!(!e.is_dark);
    }

    #[test]
    fn zero_triples_give_zero_g2() {
        assert_eq!(estimate_g2(1000, 10, 10, 0).unwrap().value, 0.0);
        assert!(matches!(
            estimate_g2(1000, 0, 10, 0),
            Err(HardwareError::InsufficientCounts { .. })
        ));
    }

    #[test]
    fn multi_photon_response() {
        let d = DetectorModel {
            efficiency: 0.5,
            ..DetectorModel::ideal()
        };
        let mut rng = rng_from_seed(1);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| d.respond(Detector::D0, 2, 0.0, &mut rng).is_some())
            .count() as f64
            / n as f64;
        assert!((hits - 0.75).abs() < 3.0 * crate::stats::binomial_sigma(0.75, n));
    }
}
