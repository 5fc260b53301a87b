//! Experiment runners behind `qpir-lab`. Every runner returns flat rows,
//! one assertion (or informational value) each.

use std::fmt;
use std::path::Path;

use qpir_core::adversary::{
    measure_speciousness, standard_inputs, Adversary, AdversaryName, InputSet,
};
use qpir_core::bounds::{
    chain_rule_check, extraction_attack, nayak_bound, reconstruction_bound, Coherence,
};
use qpir_core::privacy::{
    honest_simulator_error, privacy_lower_bound, verify_theorem_bound, PrivacyMode, THEOREM_TOLERANCE, TOLERANCE,
};
use qpir_core::protocols::kerenidis::{self, KerenidisOptions};
use qpir_core::protocols::{build, db_from_label, DatabaseMode, IndexMode, ProtocolKind, QpirInstance};
use qpir_core::runtime::execute::{execute_pure, Retention};
use qpir_core::{QpirError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Decode probability every correctness row is held to.
pub const CORRECTNESS_TOLERANCE: f64 = 1e-9;
/// View distance the purification attack must exceed.
pub const PURIFICATION_THRESHOLD: f64 = 0.05;
/// Random databases drawn for `n = 8` correctness.
pub const N8_DATABASES: usize = 64;
pub const DEFAULT_THETAS: [f64; 4] = [0.1, 0.4, 1.0, std::f64::consts::FRAC_PI_2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "==")]
    Equals,
    #[serde(rename = "info")]
    Info,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
            Relation::Equals => "==",
            Relation::Info => "info",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub command: String,
    pub protocol: String,
    pub n: usize,
    pub case: String,
    pub quantity: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Row {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        command: &str,
        protocol: &str,
        n: usize,
        case: impl Into<String>,
        quantity: &str,
        value: f64,
        relation: Relation,
        threshold: f64,
        tolerance: f64,
    ) -> Row {
        let pass = match relation {
            Relation::AtMost => value <= threshold + tolerance,
            Relation::AtLeast => value >= threshold - tolerance,
            Relation::Above => value > threshold + tolerance,
            Relation::Equals => (value - threshold).abs() <= tolerance,
            Relation::Info => true,
        };
        Row {
            command: command.into(),
            protocol: protocol.into(),
            n,
            case: case.into(),
            quantity: quantity.into(),
            value,
            relation,
            threshold,
            tolerance,
            pass,
        }
    }

    pub fn info(command: &str, protocol: &str, n: usize, case: impl Into<String>, quantity: &str, value: f64) -> Row {
        Row::new(command, protocol, n, case, quantity, value, Relation::Info, f64::NAN, 0.0)
    }
}

pub fn all_pass(rows: &[Row]) -> bool {
    rows.iter().all(|r| r.pass)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = QpirError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(QpirError::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

pub fn render(rows: &[Row], format: Format) -> Result<String> {
    match format {
        Format::Json => serde_json::to_string_pretty(rows)
            .map(|s| s + "\n")
            .map_err(|e| QpirError::Parse(e.to_string())),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| QpirError::Parse(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| QpirError::Parse(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| QpirError::Parse(e.to_string()))
        }
    }
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`.
pub fn write_reports(rows: &[Row], dir: &Path, stem: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let to_io = |e: QpirError| std::io::Error::other(e.to_string());
    std::fs::write(dir.join(format!("{stem}.json")), render(rows, Format::Json).map_err(to_io)?)?;
    std::fs::write(dir.join(format!("{stem}.csv")), render(rows, Format::Csv).map_err(to_io)?)?;
    Ok(())
}

fn decode_row(inst: &QpirInstance, db: &[bool], i: usize) -> Result<Row> {
    let t = execute_pure(&inst.spec, &inst.input(db, i)?, Retention::FinalOnly)?;
    let d = inst.decode(&t)?;
    let p = if d.bit == db[i - 1] { d.probability } else { 1.0 - d.probability };
    let label: String = db.iter().map(|&b| if b { '1' } else { '0' }).collect();
    Ok(Row::new(
        "correctness",
        &inst.spec.name,
        inst.n,
        format!("x={label},i={i}"),
        "decode_probability",
        p,
        Relation::AtLeast,
        1.0,
        CORRECTNESS_TOLERANCE,
    ))
}

/// Exhaustive over databases and indices; the coherent `n = 8` Kerenidis
/// build exceeds the qubit cap, so it runs the classical-input build on
/// seeded random databases.
pub fn correctness(kind: ProtocolKind, n: usize, cleanup: bool, seed: u64) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    if kind == ProtocolKind::Kerenidis && n >= 8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..N8_DATABASES {
            let db: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            for i in 1..=n {
                let inst = kerenidis::build(&KerenidisOptions {
                    database: DatabaseMode::Classical(db.clone()),
                    index: IndexMode::Classical(i),
                    ..KerenidisOptions::coherent(n, cleanup)
                })?;
                rows.push(decode_row(&inst, &db, i)?);
            }
        }
        return Ok(rows);
    }
    let inst = build(kind, n, cleanup)?;
    for label in 0..1usize << n {
        let db = db_from_label(label, n);
        for i in 1..=n {
            rows.push(decode_row(&inst, &db, i)?);
        }
    }
    Ok(rows)
}

pub fn communication(kind: ProtocolKind, n: usize, cleanup: bool) -> Result<Vec<Row>> {
    let inst = if kind == ProtocolKind::Kerenidis {
        kerenidis::build(&KerenidisOptions {
            database: DatabaseMode::Classical(vec![false; n]),
            index: IndexMode::Classical(1),
            ..KerenidisOptions::coherent(n, cleanup)
        })?
    } else {
        build(kind, n, cleanup)?
    };
    let c = inst.spec.communication()?;
    let name = build_name(kind, n, cleanup);
    let mut rows = vec![
        Row::info("communication", &name, n, "server", "m_a", c.m_a as f64),
        Row::info("communication", &name, n, "client", "m_b", c.m_b as f64),
    ];
    if kind == ProtocolKind::Kerenidis {
        let ell = inst.ell;
        let k = if cleanup { 2.0 } else { 1.0 };
        let closed = |v: usize, quantity: &str, expect: f64| {
            Row::new("communication", &name, n, "closed form", quantity, v as f64, Relation::Equals, expect, 0.0)
        };
        rows.push(closed(c.total, "total_qubits", k * (4 * ell + 1) as f64));
        rows.push(closed(c.rounds, "rounds", k * (2 * ell + 1) as f64));
    } else {
        rows.push(Row::info("communication", &name, n, "", "total_qubits", c.total as f64));
        rows.push(Row::info("communication", &name, n, "", "rounds", c.rounds as f64));
    }
    Ok(rows)
}

fn build_name(kind: ProtocolKind, n: usize, cleanup: bool) -> String {
    format!("{kind}-n{n}{}", if cleanup { "-cleanup" } else { "" })
}

fn input_set(mode: PrivacyMode) -> InputSet {
    match mode {
        PrivacyMode::Anchored => InputSet::anchored(),
        PrivacyMode::Full => InputSet::full(),
    }
}

/// Pairwise view distances, `ε_lower`, and for the honest server the
/// simulator's upper bound; `γ̂` for any other adversary.
pub fn privacy(
    kind: ProtocolKind,
    n: usize,
    cleanup: bool,
    mode: PrivacyMode,
    adversary: AdversaryName,
    target: f64,
) -> Result<Vec<Row>> {
    let inst = build(kind, n, cleanup)?;
    let adv = adversary.build(&inst)?;
    let inputs = standard_inputs(&inst, &input_set(mode))?;
    let report = privacy_lower_bound(&adv, mode, &inputs, target)?;
    let name = &inst.spec.name;
    let case = |s: &str| format!("{adversary}/{mode}/{s}");
    let mut rows = Vec::new();
    for v in &report.rows {
        let label = format!("{} vs {} @t={}", v.left, v.right, v.step);
        rows.push(if v.checkpoint {
            Row::new("privacy", name, n, case(&label), "view_distance", v.distance, Relation::AtMost, 2.0 * target, 2.0 * TOLERANCE)
        } else {
            Row::info("privacy", name, n, case(&label), "view_distance", v.distance)
        });
    }
    rows.push(Row::info("privacy", name, n, case("all steps"), "eps_lower", report.eps_lower_all_steps));
    rows.push(Row::new(
        "privacy",
        name,
        n,
        case("checkpoints"),
        "eps_lower",
        report.eps_lower,
        Relation::AtMost,
        target,
        report.tolerance,
    ));
    if adversary == AdversaryName::Honest {
        if mode == PrivacyMode::Anchored {
            let sim = honest_simulator_error(&inst, &inputs)?;
            rows.push(Row::new("privacy", name, n, case("simulator"), "eps_upper", sim.eps_upper, Relation::AtMost, target, TOLERANCE));
        }
    } else {
        let g = measure_speciousness(&inst.spec, &adv, &inputs)?;
        rows.push(Row::info("privacy", name, n, case("speciousness"), "gamma_hat", g.gamma_hat));
    }
    Ok(rows)
}

/// The purified-database server: for each basis database, the largest
/// checkpoint view distance between `i = 1` and every other index.
pub fn attack_purify(kind: ProtocolKind, n: usize, cleanup: bool) -> Result<Vec<Row>> {
    let inst = build(kind, n, cleanup)?;
    let adv = AdversaryName::PurifyDb.build(&inst)?;
    let inputs = standard_inputs(&inst, &InputSet::classical_only())?;
    let report = privacy_lower_bound(&adv, PrivacyMode::Anchored, &inputs, 0.0)?;
    let name = &inst.spec.name;
    let mut rows = Vec::new();
    for x in 0..1usize << n {
        let bits: String = db_from_label(x, n).iter().map(|&b| if b { '1' } else { '0' }).collect();
        let left = format!("x={bits},i=1");
        for j in 2..=n {
            let right = format!("x={bits},i={j}");
            let d = report
                .rows
                .iter()
                .filter(|r| r.checkpoint && r.left == left && r.right == right)
                .map(|r| r.distance)
                .fold(0.0, f64::max);
            rows.push(Row::new(
                "attack purify",
                name,
                n,
                format!("{left} vs {right}"),
                "view_distance",
                d,
                Relation::Above,
                PURIFICATION_THRESHOLD,
                0.0,
            ));
        }
    }
    rows.push(Row::info("attack purify", name, n, "checkpoints", "eps_lower", report.eps_lower));
    let g = measure_speciousness(&inst.spec, &adv, &inputs)?;
    rows.push(Row::info("attack purify", name, n, "classical inputs", "gamma_hat", g.gamma_hat));
    Ok(rows)
}

pub fn attack_reconstruct(kind: ProtocolKind, n: usize, cleanup: bool, coherence: Coherence) -> Result<Vec<Row>> {
    let inst = build(kind, n, cleanup)?;
    let t = extraction_attack(&inst, coherence)?;
    let name = &inst.spec.name;
    let cmd = "attack reconstruct";
    let mode = match coherence {
        Coherence::ClassicalPerA => "classical-per-a",
        Coherence::CoherentReference => "coherent-reference",
    };
    let case = |s: String| format!("{mode}/{s}");
    let mut rows = vec![
        Row::info(cmd, name, n, case("premise".into()), "delta", t.delta),
        Row::info(cmd, name, n, case("premise".into()), "epsilon", t.epsilon),
        Row::info(cmd, name, n, case("premise".into()), "eps_prime", t.eps_prime),
        Row::info(cmd, name, n, case("premise".into()), "premise_holds", t.premise_holds as u8 as f64),
        Row::info(cmd, name, n, case("client".into()), "client_executable", t.client_executable as u8 as f64),
    ];
    for b in &t.bits {
        rows.push(Row::info(cmd, name, n, case(format!("bit {}", b.bit)), "success", b.success));
        rows.push(if t.premise_holds {
            Row::new(cmd, name, n, case(format!("bit {}", b.bit)), "drift", b.drift, Relation::AtMost, b.drift_bound, 1e-8)
        } else {
            Row::info(cmd, name, n, case(format!("bit {}", b.bit)), "drift", b.drift)
        });
    }
    for (k, g) in t.bit_guessing.iter().enumerate() {
        let c = case(format!("bit {}", k + 1));
        rows.push(Row::info(cmd, name, n, c.clone(), "guess_lower", g.p_lower));
        rows.push(Row::new(cmd, name, n, c, "guess_upper", g.p_upper, Relation::AtLeast, g.p_lower, 1e-9));
    }
    rows.push(Row::info(cmd, name, n, case("overall".into()), "success", t.overall_success));
    if t.premise_holds {
        rows.push(Row::new(
            cmd,
            name,
            n,
            case("overall".into()),
            "success_vs_bound",
            t.overall_success,
            Relation::AtLeast,
            t.lower_bound,
            1e-6,
        ));
    }
    rows.extend(chain_rows(&inst, &t, cmd, mode)?);
    Ok(rows)
}

fn chain_rows(inst: &QpirInstance, t: &qpir_core::bounds::ReconstructionTrace, cmd: &str, mode: &str) -> Result<Vec<Row>> {
    let c = chain_rule_check(inst, t)?;
    let name = &inst.spec.name;
    let case = |s: &str| format!("{mode}/{s}");
    Ok(vec![
        Row::info(cmd, name, inst.n, case("communication"), "m_a", c.m_a as f64),
        Row::info(cmd, name, inst.n, case("communication"), "m_b", c.m_b as f64),
        Row::new(cmd, name, inst.n, case("chain rule"), "attack_success", c.attack_success, Relation::AtMost, c.ceiling, c.tolerance),
        Row::new(cmd, name, inst.n, case("chain rule"), "pgm_success", c.pgm_success, Relation::AtMost, c.ceiling, c.tolerance),
    ])
}

pub fn bounds_nayak(delta: f64, eps: f64, n: f64) -> Vec<Row> {
    let b = nayak_bound(delta, eps, n);
    let case = format!("delta={delta},eps={eps}");
    vec![
        Row::info("bounds nayak", "", n as usize, case.clone(), "nayak_bound", b.value),
        Row::info("bounds nayak", "", n as usize, case, "in_domain", b.in_domain as u8 as f64),
    ]
}

pub fn bounds_reconstruction(delta: f64, eps: f64, n: usize) -> Vec<Row> {
    vec![Row::info(
        "bounds reconstruction",
        "",
        n,
        format!("delta={delta},eps={eps}"),
        "reconstruction_bound",
        reconstruction_bound(n, delta, eps),
    )]
}

pub fn bounds_chain_rule(kind: ProtocolKind, n: usize, cleanup: bool, coherence: Coherence) -> Result<Vec<Row>> {
    let inst = build(kind, n, cleanup)?;
    let t = extraction_attack(&inst, coherence)?;
    let mode = match coherence {
        Coherence::ClassicalPerA => "classical-per-a",
        Coherence::CoherentReference => "coherent-reference",
    };
    chain_rows(&inst, &t, "bounds chain-rule", mode)
}

/// `ε̂ ≤ ε_honest + 3√(2γ̂)` for the γ-family grid on anchored inputs.
pub fn bounds_theorem(n: usize, thetas: &[f64], lossy: bool) -> Result<Vec<Row>> {
    let inst = build(ProtocolKind::Kerenidis, n, false)?;
    let inputs = standard_inputs(&inst, &InputSet::anchored())?;
    let advs = thetas
        .iter()
        .map(|&t| {
            if lossy {
                AdversaryName::GammaLossy(t)
            } else {
                AdversaryName::Gamma(t)
            }
            .build(&inst)
        })
        .collect::<Result<Vec<Adversary>>>()?;
    let rep = verify_theorem_bound(&inst, &advs, &inputs)?;
    let name = &inst.spec.name;
    let cmd = "bounds theorem32";
    let mut rows = Vec::new();
    for r in &rep.rows {
        rows.push(Row::info(cmd, name, n, r.adversary.clone(), "gamma_hat", r.gamma_hat));
        rows.push(Row::info(cmd, name, n, r.adversary.clone(), "eps_honest", r.eps_honest));
        rows.push(Row::info(cmd, name, n, r.adversary.clone(), "anchor_spread", r.anchor_spread));
        rows.push(Row::new(cmd, name, n, r.adversary.clone(), "eps_hat", r.eps_hat, Relation::AtMost, r.bound, r.tolerance));
        rows.push(Row::new(cmd, name, n, r.adversary.clone(), "eps_lower", r.eps_lower, Relation::AtMost, r.eps_hat, THEOREM_TOLERANCE));
    }
    Ok(rows)
}

/// The measure-then-run protocol: private against the honest server, not
/// against its purified (and perfectly specious) version.
pub fn separation(n: usize) -> Result<Vec<Row>> {
    let inst = build(ProtocolKind::Counterexample, n, false)?;
    let inputs = standard_inputs(&inst, &InputSet::anchored())?;
    let name = &inst.spec.name;
    let cmd = "counterexample";
    let honest = privacy_lower_bound(&Adversary::honest(&inst.spec), PrivacyMode::Anchored, &inputs, 0.0)?;
    let adv = AdversaryName::HonestPurified.build(&inst)?;
    let gamma = measure_speciousness(&inst.spec, &adv, &inputs)?.gamma_hat;
    let purified = privacy_lower_bound(&adv, PrivacyMode::Anchored, &inputs, 0.0)?;
    Ok(vec![
        Row::new(cmd, name, n, "honest", "eps_lower", honest.eps_lower, Relation::AtMost, 0.0, TOLERANCE),
        Row::new(cmd, name, n, "honest-purified", "gamma_hat", gamma, Relation::AtMost, 0.0, TOLERANCE),
        Row::new(cmd, name, n, "honest-purified", "eps_lower", purified.eps_lower, Relation::Above, PURIFICATION_THRESHOLD, 0.0),
    ])
}

/// Every experiment at desk scale.
pub fn suite_all(seed: u64) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for n in [1usize, 2, 4] {
        rows.extend(correctness(ProtocolKind::Kerenidis, n, false, seed)?);
    }
    rows.extend(correctness(ProtocolKind::Kerenidis, 8, false, seed)?);
    for n in [2usize, 4, 8] {
        for cleanup in [false, true] {
            rows.extend(communication(ProtocolKind::Kerenidis, n, cleanup)?);
        }
    }
    for n in [2usize, 4] {
        rows.extend(privacy(ProtocolKind::Kerenidis, n, false, PrivacyMode::Anchored, AdversaryName::Honest, 0.0)?);
    }
    rows.extend(attack_purify(ProtocolKind::Kerenidis, 2, false)?);
    for n in [1usize, 2] {
        rows.extend(bounds_theorem(n, &DEFAULT_THETAS, true)?);
    }
    rows.extend(separation(2)?);
    for kind in [ProtocolKind::SendDb, ProtocolKind::SendIndex, ProtocolKind::Kerenidis] {
        rows.extend(attack_reconstruct(kind, 2, false, Coherence::CoherentReference)?);
    }
    rows.extend(attack_reconstruct(ProtocolKind::Kerenidis, 2, false, Coherence::ClassicalPerA)?);
    rows.extend(bounds_nayak(0.0, 0.0, 16.0));
    rows.extend(bounds_reconstruction(1e-6, 1e-10, 10));
    Ok(rows)
}
