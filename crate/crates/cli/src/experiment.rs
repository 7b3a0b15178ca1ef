//! Model configurations built from resolved settings.

use orthokey::adversary::{AttackKind, AttackStrategy, BasisPolicy};
use orthokey::gv::{sigma_for_visibility, GvConfig};
use orthokey::hardware::{DetectorModel, SourceModel};
use orthokey::n09::N09Config;
use orthokey::session::Bb84Config;

use crate::config::{parse_list, Settings};
use crate::error::{CliError, Result};

fn override_f64(s: &Settings, key: &str, slot: &mut f64) -> Result<()> {
    if let Some(v) = s.f64_opt(key)? {
        *slot = v;
    }
    Ok(())
}

pub fn source(s: &Settings, mut m: SourceModel) -> Result<SourceModel> {
    override_f64(s, "source.herald_rate", &mut m.herald_rate)?;
    override_f64(s, "source.p_multi", &mut m.p_multi)?;
    override_f64(s, "source.coupling_efficiency", &mut m.coupling_efficiency)?;
    override_f64(s, "source.herald_window", &mut m.herald_window)?;
    Ok(m)
}

pub fn detector(s: &Settings, name: &str, mut d: DetectorModel) -> Result<DetectorModel> {
    override_f64(s, &format!("{name}.efficiency"), &mut d.efficiency)?;
    override_f64(s, &format!("{name}.dark_rate"), &mut d.dark_rate)?;
    override_f64(s, &format!("{name}.jitter_sigma"), &mut d.jitter_sigma)?;
    override_f64(s, &format!("{name}.gate_window"), &mut d.gate_window)?;
    Ok(d)
}

pub fn gv_config(s: &Settings) -> Result<GvConfig> {
    let mut c = match s.require("gv.preset")? {
        "ideal" => GvConfig::ideal(),
        "table1" => GvConfig::table1(),
        "default" => GvConfig::default(),
        other => return Err(CliError::config(format!("gv.preset {other:?} is not ideal, table1 or default"))),
    };
    if let Some(v) = s.f64_opt("gv.visibility_target")? {
        c.phase_noise_sigma = sigma_for_visibility(v)
            .ok_or_else(|| CliError::config(format!("gv.visibility_target {v} is not in (0, 1]")))?;
    }
    override_f64(s, "gv.tau", &mut c.tau)?;
    override_f64(s, "gv.channel_time", &mut c.channel_time)?;
    override_f64(s, "gv.phase_offset", &mut c.phase_offset)?;
    override_f64(s, "gv.phase_noise_sigma", &mut c.phase_noise_sigma)?;
    override_f64(s, "gv.timing_tolerance", &mut c.timing_tolerance)?;
    c.source = source(s, c.source)?;
    c.d0 = detector(s, "d0", c.d0)?;
    c.d1 = detector(s, "d1", c.d1)?;
    c.validate()?;
    Ok(c)
}

pub fn n09_config(s: &Settings) -> Result<N09Config> {
    let mut c = match s.require("n09.preset")? {
        "ideal" => N09Config::ideal(),
        "default" => N09Config::default(),
        "fitted" => N09Config::fitted(
            s.f64("n09.fit.qber")?,
            s.f64("n09.fit.qber_corrected")?,
            s.f64("n09.fit.eta")?,
        )?,
        other => return Err(CliError::config(format!("n09.preset {other:?} is not ideal, fitted or default"))),
    };
    override_f64(s, "n09.alice_p_half_pi", &mut c.alice_p_half_pi)?;
    override_f64(s, "n09.bob_p_half_pi", &mut c.bob_p_half_pi)?;
    override_f64(s, "n09.phase_offset", &mut c.phase_offset)?;
    override_f64(s, "n09.phase_noise_sigma", &mut c.phase_noise_sigma)?;
    override_f64(s, "n09.wrong_polarization_prob", &mut c.wrong_polarization_prob)?;
    override_f64(s, "n09.channel_time", &mut c.channel_time)?;
    if let Some(b) = s.bool_opt("n09.polarizer_check")? {
        c.polarizer_check = b;
    }
    c.source = source(s, c.source)?;
    c.d0 = detector(s, "d0", c.d0)?;
    c.d1 = detector(s, "d1", c.d1)?;
    c.d2 = detector(s, "d2", c.d2)?;
    c.validate()?;
    Ok(c)
}

pub fn bb84_config(s: &Settings) -> Result<Bb84Config> {
    Ok(Bb84Config {
        sacrifice_fraction: s.f64("bb84.sacrifice_fraction")?,
        efficiency: s.f64("bb84.efficiency")?,
    })
}

/// The configured attack, or `None` for `attack.kind = none`. Eve's seed
/// falls back to the master seed.
pub fn attack(s: &Settings) -> Result<Option<AttackStrategy>> {
    let kind = match s.require("attack.kind")? {
        "none" => return Ok(None),
        "intercept" => AttackKind::InterceptResend {
            basis: match s.require("attack.basis")? {
                "random" => BasisPolicy::Random,
                "rectilinear" => BasisPolicy::Rectilinear,
                "diagonal" => BasisPolicy::Diagonal,
                other => return Err(CliError::config(format!("attack.basis {other:?} is not a basis policy"))),
            },
        },
        "tap" => AttackKind::BeamSplitterTap {
            reflectivity: s.f64("attack.reflectivity")?,
        },
        "time-shift" => {
            let v = parse_list("attack.eta_shift", s.require("attack.eta_shift")?)?;
            let eta_shift: [f64; 3] = v
                .try_into()
                .map_err(|_| CliError::config("attack.eta_shift needs three values"))?;
            AttackKind::TimeShift { eta_shift }
        }
        "store-forward" => {
            let bins = s.u64("attack.hold_bins")?;
            AttackKind::GvStoreAndForward {
                hold_bins: u32::try_from(bins)
                    .map_err(|_| CliError::config(format!("attack.hold_bins {bins} is too large")))?,
            }
        }
        other => return Err(CliError::config(format!("attack.kind {other:?} is not recognised"))),
    };
    let seed = match s.u64_opt("attack.seed")? {
        Some(v) => v,
        None => s.seed()?,
    };
    let a = AttackStrategy::new(kind, s.f64("attack.rate")?, seed);
    a.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(Some(a))
}
