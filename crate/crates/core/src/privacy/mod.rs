//! Privacy checks against a server: lower bounds from view
//! distinguishability, the honest simulator, and the anchored simulator
//! built from a specious adversary's recovery maps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{measure_speciousness, Adversary, TestInput};
use crate::error::{QpirError, Result};
use crate::protocols::QpirInstance;
use crate::quantum::density::ReducedState;
use crate::quantum::layout::RegisterLayout;
use crate::quantum::ops::trace_in_extraction;
use crate::quantum::state::{Ensemble, PureState};
use crate::runtime::execute::{execute, ExecutionTranscript, Retention};
use crate::runtime::spec::{ProtocolSpec, Side};

pub const TOLERANCE: f64 = 1e-9;
pub const THEOREM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrivacyMode {
    Anchored,
    Full,
}

impl std::str::FromStr for PrivacyMode {
    type Err = QpirError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anchored" => Ok(PrivacyMode::Anchored),
            "full" => Ok(PrivacyMode::Full),
            other => Err(QpirError::InvalidArgument(format!("unknown privacy mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for PrivacyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PrivacyMode::Anchored => "anchored",
            PrivacyMode::Full => "full",
        })
    }
}

impl PrivacyMode {
    pub fn admits(&self, input: &TestInput) -> bool {
        match self {
            PrivacyMode::Anchored => input.is_anchored(),
            PrivacyMode::Full => true,
        }
    }
}

/// Server-side registers (owned, in transit, reference) at step `t`,
/// sorted by name so views of different runs line up.
pub fn view_registers(transcript: &ExecutionTranscript, t: usize) -> Result<Vec<String>> {
    let mut names = transcript.registers_on(t, &[Side::A, Side::ToA, Side::ToB, Side::Reference])?;
    names.sort();
    Ok(names)
}

fn reduce_to(state: &Ensemble, names: &[String]) -> Result<ReducedState> {
    let keep: Vec<&str> = names.iter().map(String::as_str).collect();
    state.reduce(&keep)
}

/// One pairwise comparison of server views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRow {
    pub step: usize,
    pub checkpoint: bool,
    pub left: String,
    pub right: String,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub protocol: String,
    pub adversary: String,
    pub mode: PrivacyMode,
    pub inputs: Vec<String>,
    pub rows: Vec<ViewRow>,
    /// Half the largest distance at checkpoint steps.
    pub eps_lower: f64,
    /// Same quantity over every step, informational.
    pub eps_lower_all_steps: f64,
    pub eps_upper: Option<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Runs `spec` on every input and collects the server view at each step
/// (index `t`, `0..=T`).
fn views(spec: &ProtocolSpec, inputs: &[&TestInput]) -> Result<Vec<Vec<(Vec<String>, ReducedState)>>> {
    inputs
        .iter()
        .map(|inp| {
            let tr = execute(spec, &inp.state, Retention::All)?;
            (0..=tr.steps())
                .map(|t| {
                    let names = view_registers(&tr, t)?;
                    let v = reduce_to(tr.state(t)?, &names)?;
                    Ok((names, v))
                })
                .collect()
        })
        .collect()
}

/// Certified lower bound on the privacy error: any simulator is within
/// `ε` of each view, so two views of inputs with the same server marginal
/// are within `2ε` of each other.
pub fn privacy_lower_bound(
    adversary: &Adversary,
    mode: PrivacyMode,
    inputs: &[TestInput],
    target: f64,
) -> Result<PrivacyReport> {
    let chosen: Vec<&TestInput> = inputs.iter().filter(|i| mode.admits(i)).collect();
    let all = views(&adversary.spec, &chosen)?;
    let checkpoints = adversary.spec.checkpoint_steps();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, inp) in chosen.iter().enumerate() {
        groups.entry(inp.group.as_str()).or_default().push(k);
    }
    let mut rows = Vec::new();
    for members in groups.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                for t in 1..=adversary.spec.steps() {
                    let (ni, vi) = &all[i][t];
                    let (nj, vj) = &all[j][t];
                    if ni != nj {
                        return Err(QpirError::step(t, "views of one group differ in registers"));
                    }
                    rows.push(ViewRow {
                        step: t,
                        checkpoint: checkpoints.contains(&t),
                        left: chosen[i].label.clone(),
                        right: chosen[j].label.clone(),
                        distance: vi.trace_distance(vj)?,
                    });
                }
            }
        }
    }
    let max_over = |pred: &dyn Fn(&ViewRow) -> bool| {
        rows.iter()
            .filter(|r| pred(r))
            .map(|r| r.distance)
            .fold(0.0, f64::max)
            / 2.0
    };
    let eps_lower = max_over(&|r| r.checkpoint);
    let eps_lower_all_steps = max_over(&|_| true);
    Ok(PrivacyReport {
        protocol: adversary.spec.name.clone(),
        adversary: adversary.name.clone(),
        mode,
        inputs: chosen.iter().map(|i| i.label.clone()).collect(),
        rows,
        eps_lower,
        eps_lower_all_steps,
        eps_upper: None,
        target,
        tolerance: TOLERANCE,
        pass: eps_lower <= target + TOLERANCE,
    })
}

/// `𝓘_t`: runs the honest protocol with the client's index fixed to
/// `i = 1` on the server-side part of the input.
#[derive(Clone, Debug)]
pub struct HonestSimulator {
    spec: ProtocolSpec,
    index: Option<(String, usize)>,
}

impl HonestSimulator {
    pub fn new(inst: &QpirInstance) -> Self {
        HonestSimulator {
            spec: inst.spec.clone(),
            index: inst
                .index_register()
                .map(|r| (r.to_string(), inst.index_width())),
        }
    }

    /// Input with the client's registers replaced by `|i = 1⟩`.
    pub fn simulator_input(&self, input: &Ensemble) -> Result<Ensemble> {
        let Some((idx, w)) = &self.index else {
            return Ok(input.clone());
        };
        let keep = input.layout().complement(&[idx.as_str()]);
        let fixed = PureState::basis(RegisterLayout::from_pairs(&[(idx, *w)])?, &[(idx, 0)])?;
        if keep.is_empty() {
            return Ok(Ensemble::pure(fixed));
        }
        let marginal = if input.is_pure_branch() && is_product(input, &keep)? {
            Ensemble::pure(project_out(&input.branches()[0].1, &keep)?)
        } else {
            let rho = input.partial_trace(&keep)?;
            Ensemble::from_density(input.layout().select(&keep)?, &rho)?
        };
        marginal.tensor_pure(&fixed)
    }

    pub fn run(&self, input: &Ensemble) -> Result<ExecutionTranscript> {
        execute(&self.spec, &self.simulator_input(input)?, Retention::All)
    }
}

/// True when `keep` is unentangled with the rest of a pure input.
fn is_product(input: &Ensemble, keep: &[&str]) -> Result<bool> {
    let s = &input.branches()[0].1;
    let rest = s.layout().complement(keep);
    let m = s.bipartite(keep, &rest)?;
    let sv = m.singular_values();
    Ok(sv.iter().filter(|v| **v > 1e-12).count() == 1)
}

fn project_out(s: &PureState, keep: &[&str]) -> Result<PureState> {
    let rest = s.layout().complement(keep);
    let m = s.bipartite(keep, &rest)?;
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested U");
    let col: Vec<_> = u.column(0).iter().copied().collect();
    PureState::normalized(s.layout().select(keep)?, col)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatorRow {
    pub input: String,
    pub step: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatorReport {
    pub protocol: String,
    pub adversary: String,
    pub simulator: String,
    pub rows: Vec<SimulatorRow>,
    pub eps_upper: f64,
    pub inputs: Vec<String>,
}

/// `ε_upper` of the honest simulator against the honest server.
pub fn honest_simulator_error(inst: &QpirInstance, inputs: &[TestInput]) -> Result<SimulatorReport> {
    let sim = HonestSimulator::new(inst);
    let checkpoints = inst.spec.checkpoint_steps();
    let mut rows = Vec::new();
    for inp in inputs {
        let actual = execute(&inst.spec, &inp.state, Retention::All)?;
        let simulated = sim.run(&inp.state)?;
        for &t in &checkpoints {
            let names = view_registers(&actual, t)?;
            let a = reduce_to(actual.state(t)?, &names)?;
            let s = reduce_to(simulated.state(t)?, &names)?;
            rows.push(SimulatorRow {
                input: inp.label.clone(),
                step: t,
                distance: a.trace_distance(&s)?,
            });
        }
    }
    Ok(SimulatorReport {
        protocol: inst.spec.name.clone(),
        adversary: "honest".into(),
        simulator: "honest".into(),
        eps_upper: rows.iter().map(|r| r.distance).fold(0.0, f64::max),
        rows,
        inputs: inputs.iter().map(|i| i.label.clone()).collect(),
    })
}

/// Anchor extracted at one checkpoint.
#[derive(Clone, Debug)]
pub struct Anchor {
    pub step: usize,
    /// `None` when the recovery discards nothing.
    pub state: Option<PureState>,
    pub epsilon: f64,
    pub p0: f64,
}

/// `Ĩ_t = F̂_t† ∘ (|σ⟩⟨σ| ⊗ 𝓘_t)` for a specious server with purified
/// recovery, anchored at a basis database `x0` and index `i = 1`.
#[derive(Clone, Debug)]
pub struct TheoremSimulator {
    pub x0: usize,
    pub anchors: BTreeMap<usize, Anchor>,
    honest: HonestSimulator,
    adversary: Adversary,
    db_register: String,
}

/// Basis label of the database register when it is classical in `input`.
fn input_db(input: &Ensemble, db: &str) -> Result<Option<usize>> {
    let p = input.distribution(&[db])?;
    Ok(p.iter().position(|v| (v - 1.0).abs() < 1e-12))
}

fn single_branch(e: &Ensemble, what: &str) -> Result<PureState> {
    match e.branches() {
        [(_, s)] => Ok(s.clone()),
        _ => Err(QpirError::Unsupported(format!("{what} is not pure"))),
    }
}

/// Anchor for one pure input: the junk state left after projecting the
/// recovered adversarial state onto the honest one.
pub fn extract_anchor(
    honest: &ProtocolSpec,
    adversary: &Adversary,
    input: &PureState,
    t: usize,
) -> Result<Anchor> {
    let h = execute(honest, &Ensemble::pure(input.clone()), Retention::Steps(vec![t]))?;
    let a = execute(&adversary.spec, &Ensemble::pure(input.clone()), Retention::Steps(vec![t]))?;
    let phi = single_branch(h.state(t)?, "honest state")?;
    let alpha = single_branch(&adversary.recover(t, a.state(t)?)?, "adversarial state")?;
    let junk = &adversary.recovery_at(t)?.junk;
    if junk.is_empty() {
        return Ok(Anchor {
            step: t,
            state: None,
            epsilon: 0.0,
            p0: 1.0,
        });
    }
    let ti = trace_in_extraction(&alpha, &phi)?;
    Ok(Anchor {
        step: t,
        state: Some(ti.beta),
        epsilon: ti.epsilon,
        p0: ti.p0,
    })
}

pub fn theorem_simulator(inst: &QpirInstance, adversary: &Adversary, x0: usize) -> Result<TheoremSimulator> {
    if !inst.spec.is_measurement_free() || !adversary.is_measurement_free() {
        return Err(QpirError::Unsupported(
            "the anchored simulator needs measurement-free protocol and adversary".into(),
        ));
    }
    let db_register = inst
        .db_register()
        .ok_or_else(|| QpirError::Unsupported("database is baked into this build".into()))?
        .to_string();
    let db = crate::protocols::db_from_label(x0, inst.n);
    let input = inst.input(&db, 1)?;
    let mut anchors = BTreeMap::new();
    for t in inst.spec.checkpoint_steps() {
        anchors.insert(t, extract_anchor(&inst.spec, adversary, &input, t)?);
    }
    Ok(TheoremSimulator {
        x0,
        anchors,
        honest: HonestSimulator::new(inst),
        adversary: adversary.clone(),
        db_register,
    })
}

impl TheoremSimulator {
    /// Simulated global state at checkpoint `t` (client registers of the
    /// simulated run included; trace them out to get the view).
    pub fn simulate(&self, t: usize, input: &Ensemble) -> Result<Ensemble> {
        if input_db(input, &self.db_register)? != Some(self.x0) {
            return Err(QpirError::InvalidArgument(format!(
                "simulator is anchored at database {}",
                self.x0
            )));
        }
        let anchor = self
            .anchors
            .get(&t)
            .ok_or_else(|| QpirError::InvalidArgument(format!("step {t} is not a checkpoint")))?;
        let run = self.honest.run(input)?;
        let mut state = run.state(t)?.clone();
        if let Some(sigma) = &anchor.state {
            state = state.tensor_pure(sigma)?;
        }
        self.adversary.unrecover(t, &state)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremRow {
    pub adversary: String,
    pub gamma_hat: f64,
    pub eps_honest: f64,
    pub eps_lower: f64,
    pub eps_hat: f64,
    pub bound: f64,
    pub anchor_epsilon: f64,
    /// Largest distance between an anchor and the anchors re-extracted
    /// from other pure inputs with the same database.
    pub anchor_spread: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub protocol: String,
    pub inputs: Vec<String>,
    pub rows: Vec<TheoremRow>,
    pub pass: bool,
}

/// Measures `γ̂`, builds `Ĩ_t` (one anchor per basis database) and checks `ε̂ ≤ ε_honest + 3√(2γ̂)` on the
/// anchored inputs, for every adversary of the grid.
pub fn verify_theorem_bound(
    inst: &QpirInstance,
    adversaries: &[Adversary],
    inputs: &[TestInput],
) -> Result<TheoremReport> {
    let anchored: Vec<TestInput> = inputs.iter().filter(|i| i.is_anchored()).cloned().collect();
    let eps_honest = honest_simulator_error(inst, &anchored)?.eps_upper;
    let checkpoints = inst.spec.checkpoint_steps();
    let mut rows = Vec::new();
    for adv in adversaries {
        let gamma_hat = measure_speciousness(&inst.spec, adv, &anchored)?.gamma_hat;
        let eps_lower = privacy_lower_bound(adv, PrivacyMode::Anchored, &anchored, 0.0)?.eps_lower;
        let mut sims: BTreeMap<usize, TheoremSimulator> = BTreeMap::new();
        let mut eps_hat: f64 = 0.0;
        let mut spread: f64 = 0.0;
        for inp in &anchored {
            let x = inp.db.expect("anchored input");
            let sim = match sims.entry(x) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => e.insert(theorem_simulator(inst, adv, x)?),
            };
            let actual = execute(&adv.spec, &inp.state, Retention::All)?;
            for &t in &checkpoints {
                let names = view_registers(&actual, t)?;
                let a = reduce_to(actual.state(t)?, &names)?;
                let s = reduce_to(&sim.simulate(t, &inp.state)?, &names)?;
                eps_hat = eps_hat.max(a.trace_distance(&s)?);
                if let (Some(reference), [(_, pure)]) = (&sim.anchors[&t].state, inp.state.branches()) {
                    if let Some(other) = extract_anchor(&inst.spec, adv, pure, t)?.state {
                        spread = spread.max(reference.distance(&other)?);
                    }
                }
            }
        }
        let anchor_epsilon = sims
            .values()
            .flat_map(|s| s.anchors.values())
            .map(|a| a.epsilon)
            .fold(0.0, f64::max);
        let bound = eps_honest + 3.0 * (2.0 * gamma_hat).sqrt();
        rows.push(TheoremRow {
            adversary: adv.name.clone(),
            gamma_hat,
            eps_honest,
            eps_lower,
            eps_hat,
            bound,
            anchor_epsilon,
            anchor_spread: spread,
            tolerance: THEOREM_TOLERANCE,
            pass: eps_hat <= bound + THEOREM_TOLERANCE && eps_lower <= eps_hat + THEOREM_TOLERANCE,
        });
    }
    Ok(TheoremReport {
        protocol: inst.spec.name.clone(),
        inputs: anchored.iter().map(|i| i.label.clone()).collect(),
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}
