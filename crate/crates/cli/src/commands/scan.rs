use serde::Serialize;
use serde_json::json;

use orthokey::gv::{fringe_scan_source, phase_grid};
use orthokey::n09::{n09_fringe_scan, Angle};
use orthokey::stats::SinusoidFit;

use crate::config::{parse_angle, Settings};
use crate::error::{CliError, Result};
use crate::experiment::{gv_config, n09_config};
use crate::output::{f, render_table, summary, Artifacts, SUMMARY_JSON, TABLE_TXT};

pub const FRINGE_CSV: &str = "fringe.csv";

#[derive(Serialize)]
struct Point2 {
    phase_rad: f64,
    #[serde(rename = "counts_D0")]
    d0: u64,
    #[serde(rename = "counts_D1")]
    d1: u64,
}

#[derive(Serialize)]
struct Point3 {
    phase_rad: f64,
    #[serde(rename = "counts_D0")]
    d0: u64,
    #[serde(rename = "counts_D1")]
    d1: u64,
    #[serde(rename = "counts_D2")]
    d2: u64,
}

fn angles(s: &Settings) -> Result<(Angle, Angle)> {
    let raw = s.require("scan.angles")?;
    let parts: Vec<&str> = raw.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(CliError::config(format!("scan.angles {raw:?} needs two angles")));
    };
    let angle = |v: &str| -> Result<Angle> { Ok(Angle::from_radians(parse_angle("scan.angles", v)?)?) };
    Ok((angle(a)?, angle(b)?))
}

fn visibility_rows(d0: &SinusoidFit, d1: &SinusoidFit) -> Vec<Vec<String>> {
    [("D0", d0), ("D1", d1)]
        .iter()
        .map(|(name, fit)| {
            vec![
                name.to_string(),
                f(fit.visibility.value, 4),
                f(fit.visibility.std_err, 4),
                f(fit.offset, 1),
                f(fit.amplitude, 1),
                f(fit.phi0, 4),
            ]
        })
        .collect()
}

const FIT_HEADERS: [&str; 6] = ["port", "visibility", "std err", "offset", "amplitude", "phi0"];

/// Phase scan of the chosen interferometer; writes `fringe.csv`,
/// `summary.json` and `table.txt`.
pub fn fringe_scan(s: &Settings, out: &Artifacts) -> Result<String> {
    let seed = s.seed()?;
    let points = usize::try_from(s.u64("scan.points")?).map_err(|_| CliError::config("scan.points is too large"))?;
    let span = s.f64("scan.span")?;
    if points < 3 || span <= 0.0 {
        return Err(CliError::config("a scan needs at least 3 points over a positive span"));
    }
    let per_point = s.u64("scan.rounds_per_point")?;
    if per_point == 0 {
        return Err(CliError::config("scan.rounds_per_point must be at least 1"));
    }
    let grid = phase_grid(points, span);
    let protocol = s.require("scan.protocol")?.to_string();
    let (effective, fits, signal_fits, header) = match protocol.as_str() {
        "gv" => {
            let cfg = gv_config(s)?;
            let bit = match s.u64("scan.bit")? {
                0 => false,
                1 => true,
                b => return Err(CliError::config(format!("scan.bit {b} is not 0 or 1"))),
            };
            let scan = fringe_scan_source(&cfg, bit, &grid, per_point, seed)?;
            out.csv(
                FRINGE_CSV,
                scan.points.iter().map(|p| Point2 {
                    phase_rad: p.phase,
                    d0: p.counts_d0,
                    d1: p.counts_d1,
                }),
            )?;
            (
                json!({ "gv": cfg, "bit": bit }),
                (scan.fit_d0, scan.fit_d1),
                None,
                format!("GV fringe scan, source S{}", bit as u8),
            )
        }
        "n09" => {
            let cfg = n09_config(s)?;
            let pair = angles(s)?;
            let scan = n09_fringe_scan(&cfg, pair, &grid, per_point, seed)?;
            out.csv(
                FRINGE_CSV,
                scan.points.iter().map(|p| Point3 {
                    phase_rad: p.phase,
                    d0: p.counts_d0,
                    d1: p.counts_d1,
                    d2: p.counts_d2,
                }),
            )?;
            let d2_total: u64 = scan.points.iter().map(|p| p.counts_d2).sum();
            (
                json!({ "n09": cfg, "angles": [pair.0.label(), pair.1.label()] }),
                (scan.fit_d0, scan.fit_d1),
                Some((scan.signal_fit_d0, scan.signal_fit_d1, d2_total)),
                format!("N09 fringe scan, angles ({}, {}); D2 total {d2_total}", pair.0.label(), pair.1.label()),
            )
        }
        other => return Err(CliError::config(format!("scan.protocol {other:?} is not gv or n09"))),
    };
    let mut result = json!({
        "points": points,
        "rounds_per_point": per_point,
        "visibility": { "D0": fits.0.visibility, "D1": fits.1.visibility },
        "fit": { "D0": fits.0, "D1": fits.1 },
    });
    let mut table = format!(
        "{header}: {points} points x {per_point} rounds\n{}",
        render_table(&FIT_HEADERS, &visibility_rows(&fits.0, &fits.1))
    );
    if let Some((d0, d1, d2_total)) = signal_fits {
        result["counts_D2_total"] = json!(d2_total);
        result["visibility_without_darks"] = json!({ "D0": d0.visibility, "D1": d1.visibility });
        result["fit_without_darks"] = json!({ "D0": d0, "D1": d1 });
        table.push_str(&format!(
            "without dark counts\n{}",
            render_table(&FIT_HEADERS, &visibility_rows(&d0, &d1))
        ));
    }
    out.json(SUMMARY_JSON, &summary("fringe-scan", s, effective, result))?;
    out.text(TABLE_TXT, &table)?;
    Ok(table)
}
