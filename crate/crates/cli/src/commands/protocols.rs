//! Simulation subcommands: each writes `rounds.csv`, `summary.json` and
//! `table.txt` and returns the table for the terminal.

use serde::Serialize;
use serde_json::{json, Value};

use orthokey::adversary::{AttackKind, AttackStrategy};
use orthokey::gv::{gv_stats, run_gv_batch, BitChoice, GvConfig, GvRound, GvStats};
use orthokey::n09::bomb::{bomb_report, bomb_trials, BombTrial};
use orthokey::n09::{
    run_n09_batch, security_report, sift_n09, N09Config, N09Round, SecurityOptions, SecurityReport, ANGLE_PAIRS,
};
use orthokey::session::messages::export_jsonl;
use orthokey::session::{bb84_session, Basis, Bb84Session};
use orthokey::stats::Estimate;

use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::experiment::{attack, bb84_config, gv_config, n09_config};
use crate::output::{f, render_table, summary, Acquisition, Artifacts, ROUNDS_CSV, SUMMARY_JSON, TABLE_TXT};

fn window(s: &Settings) -> Result<f64> {
    match s.f64("window_s")? {
        w if w > 0.0 => Ok(w),
        w => Err(CliError::config(format!("window_s = {w} must be positive"))),
    }
}

fn est(e: &Estimate) -> String {
    format!("{:.4} ± {:.4}", e.value, e.std_err)
}

fn opt_est(e: &Option<Estimate>) -> String {
    e.as_ref().map_or_else(|| "n/a".to_string(), est)
}

fn finish(out: &Artifacts, command: &str, s: &Settings, effective: Value, result: Value, table: String) -> Result<String> {
    out.json(SUMMARY_JSON, &summary(command, s, effective, result))?;
    out.text(TABLE_TXT, &table)?;
    Ok(table)
}

// ---------------------------------------------------------------- GV

#[derive(Serialize)]
struct GvRow {
    index: u64,
    bit_sent: u8,
    t_s: f64,
    t_r: Option<f64>,
    detector: Option<String>,
    double_click: bool,
    accepted: bool,
    is_dark: bool,
    photons: u8,
    eve_interacted: bool,
    eve_captured: u8,
    eve_learned_bit: Option<u8>,
}

impl From<&GvRound> for GvRow {
    fn from(r: &GvRound) -> Self {
        Self {
            index: r.index,
            bit_sent: r.bit_sent as u8,
            t_s: r.t_s,
            t_r: r.t_r,
            detector: r.detector_fired.map(|d| d.to_string()),
            double_click: r.double_click,
            accepted: r.accepted,
            is_dark: r.is_dark,
            photons: r.photons,
            eve_interacted: r.eve.interacted,
            eve_captured: r.eve.captured,
            eve_learned_bit: r.eve.learned_bit.map(u8::from),
        }
    }
}

fn acquisition_of(last_t_s: Option<f64>, s: &Settings) -> Result<Acquisition> {
    Ok(Acquisition::new(last_t_s.unwrap_or(0.0), window(s)?))
}

/// `(right − wrong) / (right + wrong)` for each source bit.
fn source_contrast(counts: &[[u64; 2]; 2]) -> [Option<f64>; 2] {
    [0, 1].map(|b| {
        let (right, wrong) = (counts[b][b] as f64, counts[b][1 - b] as f64);
        (right + wrong > 0.0).then(|| (right - wrong) / (right + wrong))
    })
}

fn gv_result(stats: &GvStats, acq: &Acquisition) -> Value {
    let c = stats.counts;
    json!({
        "stats": stats,
        "acquisition": acq,
        "counts_per_window": c.map(|row| row.map(|k| acq.per_window(k))),
        "accepted_rate_hz": acq.rate_hz(stats.accepted),
        "discard_fraction": if stats.clicks > 0 { stats.discarded as f64 / stats.clicks as f64 } else { 0.0 },
        "source_contrast": source_contrast(&c),
    })
}

fn gv_table(stats: &GvStats, acq: &Acquisition) -> String {
    let c = stats.counts;
    let contrast = source_contrast(&c);
    let rows: Vec<Vec<String>> = (0..2)
        .map(|b| {
            vec![
                format!("S{b}"),
                f(acq.per_window(c[b][0]), 1),
                f(acq.per_window(c[b][1]), 1),
                contrast[b].map_or("n/a".into(), |v| f(v, 4)),
            ]
        })
        .collect();
    let mut t = format!(
        "GV: accepted clicks per {} s window ({} windows, {} s simulated)\n",
        acq.window_s,
        f(acq.windows, 3),
        f(acq.duration_s, 3)
    );
    t.push_str(&render_table(&["source", "D0", "D1", "contrast"], &rows));
    t.push_str(&format!("QBER        {}\n", opt_est(&stats.qber)));
    t.push_str(&format!(
        "rounds {}  clicks {}  accepted {}  discarded {}  double clicks {}\n",
        stats.rounds, stats.clicks, stats.accepted, stats.discarded, stats.double_clicks
    ));
    if stats.eve_interactions > 0 {
        t.push_str(&format!(
            "Eve acted on {} rounds and holds {} accepted bits\n",
            stats.eve_interactions, stats.eve_learned
        ));
    }
    t
}

fn gv_batch(s: &Settings, cfg: &GvConfig, a: Option<&AttackStrategy>) -> Result<(Vec<GvRound>, GvStats, Acquisition)> {
    let rounds = run_gv_batch(cfg, s.rounds()?, s.seed()?, BitChoice::Random, a)?;
    let stats = gv_stats(&rounds, cfg);
    let acq = acquisition_of(rounds.last().map(|r| r.t_s), s)?;
    Ok((rounds, stats, acq))
}

pub fn gv(s: &Settings, out: &Artifacts) -> Result<String> {
    let cfg = gv_config(s)?;
    let a = attack(s)?;
    let (rounds, stats, acq) = gv_batch(s, &cfg, a.as_ref())?;
    if stats.qber.is_none() {
        return Err(CliError::no_data("no accepted clicks in the timing window"));
    }
    out.csv(ROUNDS_CSV, rounds.iter().map(GvRow::from))?;
    finish(
        out,
        "gv",
        s,
        json!({ "gv": cfg, "attack": a }),
        gv_result(&stats, &acq),
        gv_table(&stats, &acq),
    )
}

// ---------------------------------------------------------------- N09

#[derive(Serialize)]
struct N09Row {
    index: u64,
    theta_a: &'static str,
    theta_b: &'static str,
    outcome: &'static str,
    d1_polarization: Option<String>,
    d1_polarization_ok: Option<bool>,
    key_bit: Option<u8>,
    t_s: f64,
    t_r: Option<f64>,
    multi_click: bool,
    is_dark: bool,
    photons: u8,
    eve_interacted: bool,
    eve_learned_bit: Option<u8>,
}

impl From<&N09Round> for N09Row {
    fn from(r: &N09Round) -> Self {
        Self {
            index: r.index,
            theta_a: r.theta_a.label(),
            theta_b: r.theta_b.label(),
            outcome: r.outcome.label(),
            d1_polarization: r.d1_polarization.map(|p| format!("{p:?}")),
            d1_polarization_ok: r.d1_polarization_ok,
            key_bit: r.key_bit.map(u8::from),
            t_s: r.t_s,
            t_r: r.t_r,
            multi_click: r.multi_click,
            is_dark: r.is_dark,
            photons: r.photons,
            eve_interacted: r.eve.interacted,
            eve_learned_bit: r.eve.learned_bit.map(u8::from),
        }
    }
}

/// Security options from the settings; under a time-shift attack the
/// efficiency entering the report is the weakest shifted detector.
fn security_options(s: &Settings, cfg: &N09Config, a: Option<&AttackStrategy>) -> Result<SecurityOptions> {
    let shifted = a
        .filter(|a| matches!(a.kind, AttackKind::TimeShift { .. }))
        .map(|a| {
            [cfg.d0.efficiency, cfg.d1.efficiency, cfg.d2.efficiency]
                .iter()
                .enumerate()
                .map(|(i, e)| e * a.eta_factor(i))
                .fold(1.0, f64::min)
        });
    Ok(SecurityOptions {
        gamma: s.f64_opt("n09.gamma")?,
        eta: s.f64_opt("n09.eta")?.or(shifted),
    })
}

struct N09Outcome {
    rounds: Vec<N09Round>,
    report: SecurityReport,
    sifted_errors: usize,
    acq: Acquisition,
}

fn n09_batch(s: &Settings, cfg: &N09Config, a: Option<&AttackStrategy>) -> Result<N09Outcome> {
    let rounds = run_n09_batch(cfg, s.rounds()?, s.seed()?, None, a)?;
    let report = security_report(&rounds, cfg, security_options(s, cfg, a)?)?;
    let sifted_errors = sift_n09(&rounds).errors();
    let acq = acquisition_of(rounds.last().map(|r| r.t_s), s)?;
    Ok(N09Outcome {
        rounds,
        report,
        sifted_errors,
        acq,
    })
}

fn n09_result(o: &N09Outcome) -> Value {
    let pairs: Vec<Value> = ANGLE_PAIRS
        .iter()
        .zip(&o.report.counts)
        .map(|((a, b), c)| {
            let p = |k: u64| if c.rounds > 0 { k as f64 / c.rounds as f64 } else { 0.0 };
            json!({
                "theta_a": a.label(),
                "theta_b": b.label(),
                "counts": c,
                "probabilities": { "d0": p(c.d0), "d1": p(c.d1), "d2": p(c.d2), "none": p(c.none) },
                "per_window": {
                    "d0": o.acq.per_window(c.d0),
                    "d1": o.acq.per_window(c.d1),
                    "d2": o.acq.per_window(c.d2),
                },
            })
        })
        .collect();
    json!({
        "security": o.report,
        "secure": o.report.secure(),
        "sifted_errors": o.sifted_errors,
        "acquisition": o.acq,
        "key_rate_hz": o.acq.rate_hz(o.report.key_length),
        "angle_pairs": pairs,
    })
}

fn n09_table(o: &N09Outcome) -> String {
    let r = &o.report;
    let rows: Vec<Vec<String>> = ANGLE_PAIRS
        .iter()
        .zip(&r.counts)
        .map(|((a, b), c)| {
            let p = |k: u64| if c.rounds > 0 { f(k as f64 / c.rounds as f64, 4) } else { "n/a".into() };
            vec![
                format!("{}, {}", a.label(), b.label()),
                c.rounds.to_string(),
                p(c.d0),
                p(c.d1),
                p(c.d2),
                f(o.acq.per_window(c.d0), 1),
                f(o.acq.per_window(c.d1), 1),
                f(o.acq.per_window(c.d2), 1),
                c.d1_key.to_string(),
            ]
        })
        .collect();
    let mut t = format!(
        "N09: outcomes per angle pair; counts per {} s window ({} windows)\n",
        o.acq.window_s,
        f(o.acq.windows, 3)
    );
    t.push_str(&render_table(
        &["A, B", "rounds", "P(D0)", "P(D1)", "P(D2)", "D0/win", "D1/win", "D2/win", "key"],
        &rows,
    ));
    t.push_str(&format!("QBER            {}\n", est(&r.qber)));
    t.push_str(&format!("QBER (no darks) {}\n", opt_est(&r.qber_corrected)));
    t.push_str(&format!("P_D1 {}  P_e1 {}  P_D2 {}  P_e2 {}\n", est(&r.p_d1), est(&r.p_e1), est(&r.p_d2), est(&r.p_e2)));
    t.push_str(&format!(
        "gamma {:.4}  eta {:.4}  dI_AE {:.4}\n",
        r.gamma, r.eta, r.delta_i_ae
    ));
    t.push_str(&format!("m_IR {}  m_TS {}  secure {}\n", est(&r.m_ir), est(&r.m_ts), r.secure()));
    t.push_str(&format!("key bits {} ({} errors)\n", r.key_length, o.sifted_errors));
    t
}

pub fn n09(s: &Settings, out: &Artifacts) -> Result<String> {
    let cfg = n09_config(s)?;
    let a = attack(s)?;
    let o = n09_batch(s, &cfg, a.as_ref())?;
    out.csv(ROUNDS_CSV, o.rounds.iter().map(N09Row::from))?;
    finish(out, "n09", s, json!({ "n09": cfg, "attack": a }), n09_result(&o), n09_table(&o))
}

// ---------------------------------------------------------------- BB84

#[derive(Serialize)]
struct Bb84Row {
    index: u64,
    alice_bit: u8,
    alice_basis: &'static str,
    bob_basis: &'static str,
    bob_result: Option<u8>,
    in_key: bool,
    eve_interacted: bool,
    eve_knows_bit: bool,
}

fn basis_label(b: Basis) -> &'static str {
    match b {
        Basis::Rectilinear => "rectilinear",
        Basis::Diagonal => "diagonal",
    }
}

fn bb84_rows(session: &Bb84Session) -> Vec<Bb84Row> {
    let mut in_key = vec![false; session.rounds.len()];
    for &i in &session.key_indices {
        in_key[i as usize] = true;
    }
    session
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| Bb84Row {
            index: i as u64,
            alice_bit: r.alice_bit as u8,
            alice_basis: basis_label(r.alice_basis),
            bob_basis: basis_label(r.bob_basis),
            bob_result: r.bob_result.map(u8::from),
            in_key: in_key[i],
            eve_interacted: r.eve_interacted,
            eve_knows_bit: r.eve_knows_bit,
        })
        .collect()
}

fn bb84_run(s: &Settings, a: Option<&AttackStrategy>) -> Result<Bb84Session> {
    if let Some(a) = a {
        if !matches!(a.kind, AttackKind::InterceptResend { .. } | AttackKind::BeamSplitterTap { .. }) {
            return Err(CliError::config("bb84 supports only the intercept and tap attacks"));
        }
    }
    Ok(bb84_session(&bb84_config(s)?, s.rounds()?, s.seed()?, a)?)
}

fn bb84_result(session: &Bb84Session) -> Value {
    json!({
        "rounds": session.rounds.len(),
        "detected": session.rounds.iter().filter(|r| r.bob_result.is_some()).count(),
        "sifted_len": session.sifted_len,
        "key_length": session.alice_key.len(),
        "keys_agree": session.alice_key == session.bob_key,
        "sifted_qber": session.sifted_qber,
        "qber_estimate": session.qber_estimate,
        "eve_information": session.eve_information,
    })
}

fn bb84_table(session: &Bb84Session) -> String {
    let detected = session.rounds.iter().filter(|r| r.bob_result.is_some()).count();
    let rows = vec![
        vec!["rounds".into(), session.rounds.len().to_string()],
        vec!["detected".into(), detected.to_string()],
        vec!["sifted".into(), session.sifted_len.to_string()],
        vec!["final key".into(), session.alice_key.len().to_string()],
        vec!["sifted QBER".into(), opt_est(&session.sifted_qber)],
        vec!["estimated QBER".into(), opt_est(&session.qber_estimate)],
        vec!["Eve information".into(), f(session.eve_information, 4)],
    ];
    format!("BB84 session\n{}", render_table(&["quantity", "value"], &rows))
}

fn key_text(bits: &[bool]) -> String {
    let mut s: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
    s.push('\n');
    s
}

pub fn bb84(s: &Settings, out: &Artifacts) -> Result<String> {
    let a = attack(s)?;
    let session = bb84_run(s, a.as_ref())?;
    out.csv(ROUNDS_CSV, bb84_rows(&session))?;
    out.text("key.txt", &key_text(&session.alice_key))?;
    let mut jsonl = Vec::new();
    export_jsonl(&session.transcript, &mut jsonl).map_err(|e| CliError::io(e.to_string()))?;
    out.text("transcript.jsonl", &String::from_utf8_lossy(&jsonl))?;
    finish(
        out,
        "bb84",
        s,
        json!({ "bb84": bb84_config(s)?, "attack": a }),
        bb84_result(&session),
        bb84_table(&session),
    )
}

// ---------------------------------------------------------------- bomb tester

#[derive(Serialize)]
struct BombRow {
    index: u64,
    live: bool,
    passes: u32,
    verdict: &'static str,
}

impl From<&BombTrial> for BombRow {
    fn from(t: &BombTrial) -> Self {
        Self {
            index: t.index,
            live: t.live,
            passes: t.passes,
            verdict: t.verdict.label(),
        }
    }
}

pub fn bomb(s: &Settings, out: &Artifacts) -> Result<String> {
    let repeats = s.u64("bomb.max_repeats")?;
    let repeats = u32::try_from(repeats).map_err(|_| CliError::config("bomb.max_repeats is too large"))?;
    let fraction = s.f64("bomb.usable_fraction")?;
    let trials = bomb_trials(s.rounds()?, fraction, repeats, s.seed()?)?;
    let r = bomb_report(&trials);
    let share = |k: u64| if r.usable > 0 { k as f64 / r.usable as f64 } else { 0.0 };
    let result = json!({
        "report": r,
        "identified_fraction": share(r.identified),
        "detonated_fraction": share(r.detonated),
        "inconclusive_fraction": share(r.inconclusive),
    });
    let rows = vec![
        vec!["live".into(), r.usable.to_string(), r.identified.to_string(), r.detonated.to_string(), r.inconclusive.to_string()],
        vec!["dud".into(), r.duds.to_string(), "0".into(), "0".into(), r.duds_inconclusive.to_string()],
        vec![
            "live share".into(),
            f(1.0, 4),
            f(share(r.identified), 4),
            f(share(r.detonated), 4),
            f(share(r.inconclusive), 4),
        ],
    ];
    let table = format!(
        "Bomb tester: {} passes at most per bomb\n{}",
        repeats,
        render_table(&["bombs", "total", "identified", "detonated", "inconclusive"], &rows)
    );
    out.csv(ROUNDS_CSV, trials.iter().map(BombRow::from))?;
    finish(
        out,
        "bomb",
        s,
        json!({ "usable_fraction": fraction, "max_repeats": repeats }),
        result,
        table,
    )
}

// ---------------------------------------------------------------- attack evaluation

/// `attacked − honest` exceeds three combined standard errors.
fn raised(honest: &Estimate, attacked: &Estimate) -> bool {
    let sigma = (honest.std_err.powi(2) + attacked.std_err.powi(2)).sqrt();
    attacked.value - honest.value > 3.0 * sigma.max(1e-12)
}

fn rate(k: u64, n: u64) -> Estimate {
    orthokey::stats::binomial_rate(k, n).unwrap_or(Estimate::exact(0.0))
}

fn comparison_table(title: &str, rows: Vec<Vec<String>>, detected: bool) -> String {
    format!(
        "{title}\n{}attack detected: {detected}\n",
        render_table(&["metric", "honest", "attacked"], &rows)
    )
}

pub fn attack_eval(s: &Settings, out: &Artifacts) -> Result<String> {
    let a = attack(s)?.ok_or_else(|| CliError::config("attack-eval needs attack.kind other than none"))?;
    let protocol = s.require("eval.protocol")?.to_string();
    let (effective, result, table) = match protocol.as_str() {
        "gv" => {
            let cfg = gv_config(s)?;
            let (_, honest, _) = gv_batch(s, &cfg, None)?;
            let (rounds, attacked, _) = gv_batch(s, &cfg, Some(&a))?;
            out.csv(ROUNDS_CSV, rounds.iter().map(GvRow::from))?;
            let qh = honest
                .qber
                .ok_or_else(|| CliError::no_data("no accepted clicks without the attack"))?;
            let qa = attacked.qber;
            let (dh, da) = (rate(honest.discarded, honest.clicks), rate(attacked.discarded, attacked.clicks));
            let detected = qa.is_some_and(|qa| raised(&qh, &qa)) || raised(&dh, &da);
            let learned = |st: &GvStats| if st.accepted > 0 { st.eve_learned as f64 / st.accepted as f64 } else { 0.0 };
            let rows = vec![
                vec!["QBER".into(), est(&qh), opt_est(&qa)],
                vec!["discarded share".into(), est(&dh), est(&da)],
                vec!["accepted".into(), honest.accepted.to_string(), attacked.accepted.to_string()],
                vec!["Eve bits / accepted".into(), f(learned(&honest), 4), f(learned(&attacked), 4)],
            ];
            (
                json!({ "gv": cfg, "attack": a }),
                json!({
                    "honest": honest,
                    "attacked": attacked,
                    "discard_fraction": { "honest": dh, "attacked": da },
                    "eve_information": learned(&attacked),
                    "detected": detected,
                }),
                comparison_table("Attack evaluation (GV)", rows, detected),
            )
        }
        "n09" => {
            let cfg = n09_config(s)?;
            let honest = n09_batch(s, &cfg, None)?;
            let attacked = n09_batch(s, &cfg, Some(&a))?;
            out.csv(ROUNDS_CSV, attacked.rounds.iter().map(N09Row::from))?;
            let (h, t) = (&honest.report, &attacked.report);
            let detected = raised(&h.qber, &t.qber) || raised(&h.p_e2, &t.p_e2);
            let eve_bits = attacked
                .rounds
                .iter()
                .filter(|r| r.key_bit.is_some() && r.eve.learned_bit.is_some())
                .count();
            let rows = vec![
                vec!["QBER".into(), est(&h.qber), est(&t.qber)],
                vec!["P_D2".into(), est(&h.p_d2), est(&t.p_d2)],
                vec!["P_e2".into(), est(&h.p_e2), est(&t.p_e2)],
                vec!["eta".into(), f(h.eta, 4), f(t.eta, 4)],
                vec!["dI_AE".into(), f(h.delta_i_ae, 4), f(t.delta_i_ae, 4)],
                vec!["m_IR".into(), est(&h.m_ir), est(&t.m_ir)],
                vec!["m_TS".into(), est(&h.m_ts), est(&t.m_ts)],
                vec!["key bits".into(), h.key_length.to_string(), t.key_length.to_string()],
                vec!["Eve key bits".into(), "0".into(), eve_bits.to_string()],
            ];
            (
                json!({ "n09": cfg, "attack": a }),
                json!({
                    "honest": h,
                    "attacked": t,
                    "eve_key_bits": eve_bits,
                    "secure": { "honest": h.secure(), "attacked": t.secure() },
                    "detected": detected,
                }),
                comparison_table("Attack evaluation (N09)", rows, detected),
            )
        }
        "bb84" => {
            let honest = bb84_run(s, None)?;
            let attacked = bb84_run(s, Some(&a))?;
            out.csv(ROUNDS_CSV, bb84_rows(&attacked))?;
            let zero = Estimate::exact(0.0);
            let (qh, qa) = (honest.sifted_qber.unwrap_or(zero), attacked.sifted_qber.unwrap_or(zero));
            let detected = raised(&qh, &qa);
            let rows = vec![
                vec!["sifted QBER".into(), est(&qh), est(&qa)],
                vec!["estimated QBER".into(), opt_est(&honest.qber_estimate), opt_est(&attacked.qber_estimate)],
                vec!["Eve information".into(), f(honest.eve_information, 4), f(attacked.eve_information, 4)],
                vec!["final key".into(), honest.alice_key.len().to_string(), attacked.alice_key.len().to_string()],
            ];
            (
                json!({ "bb84": bb84_config(s)?, "attack": a }),
                json!({
                    "honest": bb84_result(&honest),
                    "attacked": bb84_result(&attacked),
                    "detected": detected,
                }),
                comparison_table("Attack evaluation (BB84)", rows, detected),
            )
        }
        other => return Err(CliError::config(format!("eval.protocol {other:?} is not gv, n09 or bb84"))),
    };
    finish(out, "attack-eval", s, effective, result, table)
}
