//! Communication lower-bound machinery: gentle measurement, state
//! discrimination brackets, the sequential database-reconstruction attack,
//! the leakage chain-rule check and closed-form bound evaluators.

use serde::{Deserialize, Serialize};

use crate::adversary::inputs::DB_REFERENCE;
use crate::error::{QpirError, Result};
use crate::protocols::{db_from_label, QpirInstance};
use crate::quantum::density::{trace_distance, DensityOperator};
use crate::quantum::gates::MatrixData;
use crate::quantum::layout::RegisterLayout;
use crate::quantum::linalg::{eigh, eigvalsh, psd_sqrt, real_trace, CMatrix, C64, ZERO};
use crate::quantum::ops::uhlmann_unitary;
use crate::quantum::state::{Ensemble, PureState};
use crate::runtime::execute::{execute, Retention};
use crate::runtime::spec::Side;

/// `H(p) = −p log₂ p − (1−p) log₂(1−p)`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NayakBound {
    pub value: f64,
    pub argument: f64,
    pub in_domain: bool,
}

/// `(1 − H(1 − δ − 2√(ε(2−ε)))) n`; zero with `in_domain = false` when the
/// argument of `H` leaves `[0, 1]`.
pub fn nayak_bound(delta: f64, eps: f64, n: f64) -> NayakBound {
    let argument = 1.0 - delta - 2.0 * (eps * (2.0 - eps)).max(0.0).sqrt();
    if !(0.0..=1.0).contains(&argument) {
        return NayakBound {
            value: 0.0,
            argument,
            in_domain: false,
        };
    }
    NayakBound {
        value: (1.0 - binary_entropy(argument)) * n,
        argument,
        in_domain: true,
    }
}

/// `ε′ = 2√(ε(1−ε))`.
pub fn eps_prime(eps: f64) -> f64 {
    2.0 * (eps * (1.0 - eps)).max(0.0).sqrt()
}

/// `√(ε(2−ε))`, the purified distance bound for marginals `ε` apart.
pub fn uhlmann_bound(eps: f64) -> f64 {
    (eps * (2.0 - eps)).max(0.0).sqrt()
}

/// `max(0, 1 − n²√(δ + ε′))`.
pub fn reconstruction_bound(n: usize, delta: f64, eps: f64) -> f64 {
    let n = n as f64;
    (1.0 - n * n * (delta + eps_prime(eps)).sqrt()).max(0.0)
}

#[derive(Clone, Debug)]
pub struct GentleOutcome {
    pub success: f64,
    pub post: DensityOperator,
    /// `√(1 − tr(Λρ))`.
    pub certificate: f64,
    pub distance: f64,
}

/// Measures `Λ` on `ρ` and keeps the accepted branch
/// `√Λ ρ √Λ / tr(Λρ)`.
pub fn gentle_measure(rho: &DensityOperator, lambda: &CMatrix) -> Result<GentleOutcome> {
    if lambda.nrows() != rho.dim() || lambda.ncols() != rho.dim() {
        return Err(QpirError::DimensionMismatch {
            expected: rho.dim(),
            found: lambda.nrows(),
        });
    }
    let herm = (lambda - lambda.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eig = eigvalsh(lambda);
    let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if herm > 1e-10 || lo < -1e-10 || hi > 1.0 + 1e-10 {
        return Err(QpirError::InvalidOperator("measurement operator must satisfy 0 <= Λ <= I".into()));
    }
    let success = rho.expectation(lambda).clamp(0.0, 1.0);
    if success <= 1e-14 {
        return Err(QpirError::ZeroProbability);
    }
    let root = psd_sqrt(lambda);
    let post = &root * rho.matrix() * &root / C64::new(success, 0.0);
    let post = DensityOperator::with_tolerance(post, 1e-8)?;
    let certificate = (1.0 - success).max(0.0).sqrt();
    let distance = trace_distance(&post, rho)?;
    if distance > certificate + 1e-8 {
        return Err(QpirError::InvalidArgument(format!(
            "gentle-measurement certificate violated: {distance} > {certificate}"
        )));
    }
    Ok(GentleOutcome {
        success,
        post,
        certificate,
        distance,
    })
}

/// Guessing-probability bracket, with the implied min-entropy range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessingBracket {
    pub hypotheses: usize,
    pub max_prior: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    pub h_min_lower: f64,
    pub h_min_upper: f64,
}

impl GuessingBracket {
    pub fn is_consistent(&self, tol: f64) -> bool {
        self.max_prior <= self.p_lower + tol && self.p_lower <= self.p_upper + tol && self.p_upper <= 1.0 + tol
    }

    fn new(hypotheses: usize, max_prior: f64, p_lower: f64, p_upper: f64) -> Self {
        let p_upper = p_upper.min(1.0);
        let p_lower = p_lower.max(max_prior);
        GuessingBracket {
            hypotheses,
            max_prior,
            p_lower,
            p_upper,
            h_min_lower: -p_upper.log2(),
            h_min_upper: -p_lower.log2(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Helstrom {
    pub bracket: GuessingBracket,
    /// Projectors guessing hypothesis 0 and 1.
    pub measurement: [CMatrix; 2],
}

/// Optimal binary discrimination: `1/2 + Δ(p0 ρ0, p1 ρ1)` in the halved
/// trace norm.
pub fn helstrom(p0: f64, rho0: &DensityOperator, p1: f64, rho1: &DensityOperator) -> Result<Helstrom> {
    if rho0.dim() != rho1.dim() {
        return Err(QpirError::DimensionMismatch {
            expected: rho0.dim(),
            found: rho1.dim(),
        });
    }
    if (p0 + p1 - 1.0).abs() > 1e-10 || p0 < 0.0 || p1 < 0.0 {
        return Err(QpirError::InvalidArgument(format!("priors {p0}, {p1} do not sum to 1")));
    }
    let gamma = rho0.matrix() * C64::new(p0, 0.0) - rho1.matrix() * C64::new(p1, 0.0);
    let (vals, vecs) = eigh(&gamma);
    let d = rho0.dim();
    let mut proj = CMatrix::zeros(d, d);
    for (k, v) in vals.iter().enumerate() {
        if *v > 0.0 {
            let col = vecs.column(k);
            proj += col * col.adjoint();
        }
    }
    let other = CMatrix::identity(d, d) - &proj;
    let norm: f64 = vals.iter().map(|v| v.abs()).sum();
    let p = (0.5 + 0.5 * norm).min(1.0);
    Ok(Helstrom {
        bracket: GuessingBracket::new(2, p0.max(p1), p, p),
        measurement: [proj, other],
    })
}

/// Pretty-good measurement success as the lower end; the upper end is
/// `min(1, d · max_a λ_max(p_a ρ_a))`, replaced by the exact Helstrom value
/// for two hypotheses.
pub fn pgm(ensemble: &[(f64, DensityOperator)]) -> Result<GuessingBracket> {
    let first = ensemble
        .first()
        .ok_or_else(|| QpirError::InvalidArgument("empty ensemble".into()))?;
    let d = first.1.dim();
    let total: f64 = ensemble.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(QpirError::InvalidArgument(format!("priors sum to {total}")));
    }
    let mut avg = CMatrix::zeros(d, d);
    for (p, r) in ensemble {
        if r.dim() != d {
            return Err(QpirError::DimensionMismatch { expected: d, found: r.dim() });
        }
        avg += r.matrix() * C64::new(*p, 0.0);
    }
    let inv = crate::quantum::linalg::psd_pinv_sqrt(&avg, 1e-12);
    let mut lower = 0.0;
    let mut top: f64 = 0.0;
    for (p, r) in ensemble {
        let weighted = r.matrix() * C64::new(*p, 0.0);
        let e = &inv * &weighted * &inv;
        lower += real_trace(&(e * &weighted));
        top = top.max(eigvalsh(&weighted).into_iter().fold(0.0, f64::max));
    }
    let max_prior = ensemble.iter().map(|(p, _)| *p).fold(0.0, f64::max);
    let upper = if ensemble.len() == 2 {
        helstrom(ensemble[0].0, &ensemble[0].1, ensemble[1].0, &ensemble[1].1)?
            .bracket
            .p_upper
    } else {
        (d as f64 * top).min(1.0)
    };
    Ok(GuessingBracket::new(ensemble.len(), max_prior, lower, upper))
}

/// How the database is held while the attack's unitaries are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coherence {
    /// One set of unitaries per database; not executable by a client.
    ClassicalPerA,
    /// The database is entangled with a reference; one set of unitaries.
    CoherentReference,
}

impl std::str::FromStr for Coherence {
    type Err = QpirError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical-per-a" => Ok(Coherence::ClassicalPerA),
            "coherent-reference" => Ok(Coherence::CoherentReference),
            other => Err(QpirError::InvalidArgument(format!("unknown coherence mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitRecord {
    /// 1-based database position.
    pub bit: usize,
    /// Probability of reading the bit correctly given earlier successes.
    pub success: f64,
    /// `Δ(σ̃_B^k, σ_B^1)` after the bit is read.
    pub drift: f64,
    /// `k √(δ + ε′)`.
    pub drift_bound: f64,
    /// Largest gentle-measurement disturbance certificate used.
    pub certificate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionTrace {
    pub protocol: String,
    pub n: usize,
    pub mode: Coherence,
    pub client_executable: bool,
    pub delta: f64,
    pub epsilon: f64,
    pub eps_prime: f64,
    pub premise_holds: bool,
    pub premise_note: String,
    pub bits: Vec<BitRecord>,
    pub overall_success: f64,
    pub lower_bound: f64,
    pub lower_bound_holds: Option<bool>,
    /// Helstrom bracket for each database bit from the client's state
    /// after an honest run with `i = 1`.
    pub bit_guessing: Vec<GuessingBracket>,
    /// Pretty-good-measurement bracket for the whole database.
    pub database_guessing: GuessingBracket,
    /// `U_B^{1→i}` in coherent mode.
    #[serde(skip)]
    pub unitaries: Vec<MatrixData>,
}

impl ReconstructionTrace {
    /// Drift invariants; only claimed while the premise holds.
    pub fn drift_consistent(&self) -> bool {
        if !self.premise_holds {
            return true;
        }
        let step = (self.delta + self.eps_prime).sqrt();
        self.bits.iter().all(|b| b.drift <= b.drift_bound + 1e-8)
            && self
                .bits
                .windows(2)
                .all(|w| w[1].drift <= w[0].drift + step + 1e-8)
    }
}

struct Runs {
    client: Vec<String>,
    others: Vec<String>,
    /// `[i - 1]` final pure states.
    states: Vec<PureState>,
}

fn final_pure(e: &Ensemble) -> Result<PureState> {
    match e.branches() {
        [(_, s)] => Ok(s.clone()),
        _ => Err(QpirError::Unsupported("extraction needs pure final states".into())),
    }
}

fn run_all_indices(inst: &QpirInstance, input_for: &dyn Fn(usize) -> Result<PureState>) -> Result<Runs> {
    let mut states = Vec::with_capacity(inst.n);
    let mut client = Vec::new();
    let mut others = Vec::new();
    for i in 1..=inst.n {
        let tr = execute(&inst.spec, &Ensemble::pure(input_for(i)?), Retention::FinalOnly)?;
        let t = tr.steps();
        if i == 1 {
            client = tr.registers_on(t, &[Side::B, Side::ToB])?;
            let layout = tr.final_state().layout();
            others = layout
                .names()
                .into_iter()
                .filter(|n| !client.iter().any(|c| c == n))
                .map(str::to_string)
                .collect();
        }
        states.push(final_pure(tr.final_state())?);
    }
    Ok(Runs {
        client,
        others,
        states,
    })
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Probability mass where the output register equals `target(index)`.
fn project(state: &PureState, output: &str, target: &dyn Fn(usize) -> usize) -> Result<(f64, Vec<C64>)> {
    let layout = state.layout();
    let mut amps = state.amplitudes().to_vec();
    let mut p = 0.0;
    for (k, a) in amps.iter_mut().enumerate() {
        if layout.extract(k, output)? == target(k) {
            p += a.norm_sqr();
        } else {
            *a = ZERO;
        }
    }
    Ok((p, amps))
}

struct Sequential {
    successes: Vec<f64>,
    drifts: Vec<f64>,
    certificates: Vec<f64>,
}

/// Measures every bit in turn, conjugating the output readout by
/// `U^{1→k}` and keeping the accepted branch.
fn sequential(
    runs: &Runs,
    unitaries: &[CMatrix],
    output: &str,
    target: &dyn Fn(usize, usize) -> usize,
) -> Result<Sequential> {
    let client = strs(&runs.client);
    let start = &runs.states[0];
    let base = start.reduce(&client)?;
    let mut state = start.clone();
    let mut out = Sequential {
        successes: Vec::new(),
        drifts: Vec::new(),
        certificates: Vec::new(),
    };
    for (k, u) in unitaries.iter().enumerate() {
        let mut turned = state.clone();
        turned.apply_operator(&client, u)?;
        let (p, amps) = project(&turned, output, &|idx| target(k, idx))?;
        if p <= 1e-14 {
            out.successes.push(0.0);
            out.drifts.push(1.0);
            out.certificates.push(1.0);
            break;
        }
        let mut next = PureState::normalized(turned.layout().clone(), amps)?;
        next.apply_operator(&client, &u.adjoint())?;
        let certificate = (1.0 - p).max(0.0).sqrt();
        let moved = state.distance(&next)?;
        if moved > certificate + 1e-8 {
            return Err(QpirError::InvalidArgument(format!(
                "gentle-measurement certificate violated at bit {}: {moved} > {certificate}",
                k + 1
            )));
        }
        state = next;
        out.successes.push(p.min(1.0));
        out.drifts.push(state.reduce(&client)?.trace_distance(&base)?);
        out.certificates.push(certificate);
    }
    Ok(out)
}

fn bit_of(label: usize, n: usize, k: usize) -> usize {
    (label >> (n - 1 - k)) & 1
}

fn attack_unitaries(runs: &Runs) -> Result<Vec<CMatrix>> {
    let client = strs(&runs.client);
    let dim = runs.states[0].layout().select(&client)?.dim();
    runs.states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if k == 0 {
                Ok(CMatrix::identity(dim, dim))
            } else {
                uhlmann_unitary(s, &runs.states[0], &client)
            }
        })
        .collect()
}

/// `(δ, ε)`: worst readout error and half the worst distance of the
/// non-client marginals from the `i = 1` run.
fn premise(runs: &Runs, output: &str, target: &dyn Fn(usize, usize) -> usize) -> Result<(f64, f64)> {
    let others = strs(&runs.others);
    let base = runs.states[0].reduce(&others)?;
    let mut delta: f64 = 0.0;
    let mut dist: f64 = 0.0;
    for (k, s) in runs.states.iter().enumerate() {
        let (p, _) = project(s, output, &|idx| target(k, idx))?;
        delta = delta.max(1.0 - p);
        if k > 0 {
            dist = dist.max(s.reduce(&others)?.trace_distance(&base)?);
        }
    }
    Ok((delta.max(0.0), dist / 2.0))
}

/// Sequential measure-and-recover attack run by a client with index 1.
pub fn extraction_attack(inst: &QpirInstance, coherence: Coherence) -> Result<ReconstructionTrace> {
    let n = inst.n;
    if n > 4 {
        return Err(QpirError::Unsupported(format!("extraction attack supports n <= 4, got {n}")));
    }
    if !inst.spec.is_measurement_free() {
        return Err(QpirError::Unsupported("extraction needs a measurement-free protocol".into()));
    }
    let db = inst
        .db_register()
        .ok_or_else(|| QpirError::Unsupported("database is baked into this build".into()))?
        .to_string();
    let output = inst.output.as_str();

    // client states of the i = 1 run per database
    let mut client_states = Vec::with_capacity(1 << n);
    let mut per_a = Vec::with_capacity(1 << n);
    for a in 0..1usize << n {
        let bits = db_from_label(a, n);
        let runs = run_all_indices(inst, &|i| inst.input(&bits, i))?;
        client_states.push(runs.states[0].partial_trace(&strs(&runs.client))?);
        per_a.push(runs);
    }
    let weight = 1.0 / (1usize << n) as f64;
    let mut bit_guessing = Vec::with_capacity(n);
    for k in 0..n {
        let mut parts = [CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)];
        for (a, rho) in client_states.iter().enumerate() {
            let v = bit_of(a, n, k);
            let m = rho.matrix() * C64::new(2.0 * weight, 0.0);
            parts[v] = if parts[v].is_empty() { m } else { &parts[v] + m };
        }
        let [r0, r1] = parts;
        let h = helstrom(
            0.5,
            &DensityOperator::with_tolerance(r0, 1e-8)?,
            0.5,
            &DensityOperator::with_tolerance(r1, 1e-8)?,
        )?;
        bit_guessing.push(h.bracket);
    }
    let database_guessing = pgm(&client_states
        .iter()
        .map(|r| (weight, r.clone()))
        .collect::<Vec<_>>())?;

    let (delta, epsilon, bits, overall, unitaries, executable) = match coherence {
        Coherence::ClassicalPerA => {
            let mut delta: f64 = 0.0;
            let mut epsilon: f64 = 0.0;
            let mut success = vec![0.0; n];
            let mut drift = vec![0.0f64; n];
            let mut cert = vec![0.0f64; n];
            let mut overall = 0.0;
            for (a, runs) in per_a.iter().enumerate() {
                let target = |k: usize, _: usize| bit_of(a, n, k);
                let (d, e) = premise(runs, output, &target)?;
                delta = delta.max(d);
                epsilon = epsilon.max(e);
                let us = attack_unitaries(runs)?;
                let seq = sequential(runs, &us, output, &target)?;
                for (k, p) in seq.successes.iter().enumerate() {
                    success[k] += weight * p;
                    drift[k] = drift[k].max(seq.drifts[k]);
                    cert[k] = cert[k].max(seq.certificates[k]);
                }
                if seq.successes.len() == n {
                    overall += weight * seq.successes.iter().product::<f64>();
                }
            }
            let bits: Vec<(f64, f64, f64)> = (0..n).map(|k| (success[k], drift[k], cert[k])).collect();
            (delta, epsilon, bits, overall, vec![], false)
        }
        Coherence::CoherentReference => {
            let dim = 1usize << n;
            let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
            let joint = RegisterLayout::from_pairs(&[(DB_REFERENCE, n), (db.as_str(), n)])?;
            let mut amps = vec![ZERO; dim * dim];
            for a in 0..dim {
                amps[a * dim + a] = amp;
            }
            let purified = PureState::new(joint, amps)?;
            let runs = run_all_indices(inst, &|i| {
                let idx = inst.index_state(&{
                    let mut c = vec![ZERO; n];
                    c[i - 1] = C64::new(1.0, 0.0);
                    c
                })?;
                purified.tensor(&idx)
            })?;
            let layout = runs.states[0].layout().clone();
            let target = |k: usize, idx: usize| {
                bit_of(layout.extract(idx, DB_REFERENCE).expect("reference register"), n, k)
            };
            let (delta, epsilon) = premise(&runs, output, &target)?;
            let us = attack_unitaries(&runs)?;
            let seq = sequential(&runs, &us, output, &target)?;
            let mut bits: Vec<(f64, f64, f64)> = (0..seq.successes.len())
                .map(|k| (seq.successes[k], seq.drifts[k], seq.certificates[k]))
                .collect();
            bits.resize(n, (0.0, 1.0, 1.0));
            let overall = bits.iter().map(|b| b.0).product::<f64>();
            let mats = us.iter().map(MatrixData::from_matrix).collect();
            (delta, epsilon, bits, overall, mats, true)
        }
    };
    let ep = eps_prime(epsilon);
    let step = (delta + ep).sqrt();
    let lower_bound = reconstruction_bound(n, delta, epsilon);
    let premise_holds = lower_bound > 0.0;
    let premise_note = if premise_holds {
        format!("premise holds: 1 - n^2 sqrt(delta + eps') = {lower_bound:.6}")
    } else {
        format!(
            "privacy premise fails: delta = {delta:.3e}, eps = {epsilon:.6} (eps' = {ep:.6}) leave no reconstruction guarantee"
        )
    };
    let bits: Vec<BitRecord> = bits
        .into_iter()
        .enumerate()
        .map(|(k, (success, drift, certificate))| BitRecord {
            bit: k + 1,
            success,
            drift,
            drift_bound: (k + 1) as f64 * step,
            certificate,
        })
        .collect();
    Ok(ReconstructionTrace {
        protocol: inst.spec.name.clone(),
        n,
        mode: coherence,
        client_executable: executable,
        delta,
        epsilon,
        eps_prime: ep,
        premise_holds,
        premise_note,
        bits,
        overall_success: overall,
        lower_bound,
        lower_bound_holds: premise_holds.then_some(overall >= lower_bound - 1e-6),
        bit_guessing,
        database_guessing,
        unitaries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleReport {
    pub protocol: String,
    pub n: usize,
    pub m_a: usize,
    pub m_b: usize,
    /// `min{m_A + m_B, 2 m_A}`.
    pub leakage: usize,
    /// `2^{−(n − leakage)}`, capped at 1.
    pub ceiling: f64,
    pub attack_success: f64,
    pub pgm_success: f64,
    pub tolerance: f64,
    pub consistent: bool,
}

/// No strategy may guess the uniformly random database with probability
/// above the chain-rule ceiling of the setup-free protocol.
pub fn chain_rule_check(inst: &QpirInstance, trace: &ReconstructionTrace) -> Result<ChainRuleReport> {
    let comm = inst.spec.fold_setup_into_messages().communication()?;
    let leakage = (comm.m_a + comm.m_b).min(2 * comm.m_a);
    let exponent = inst.n as i64 - leakage as i64;
    let ceiling = if exponent <= 0 { 1.0 } else { 2f64.powi(-(exponent as i32)) };
    let tolerance = 1e-9;
    let attack_success = if trace.client_executable { trace.overall_success } else { 0.0 };
    let pgm_success = trace.database_guessing.p_lower;
    Ok(ChainRuleReport {
        protocol: inst.spec.name.clone(),
        n: inst.n,
        m_a: comm.m_a,
        m_b: comm.m_b,
        leakage,
        ceiling,
        attack_success,
        pgm_success,
        tolerance,
        consistent: attack_success <= ceiling + tolerance && pgm_success <= ceiling + tolerance,
    })
}
