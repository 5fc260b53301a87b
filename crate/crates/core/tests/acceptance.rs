//! End-to-end acceptance suite: one line per criterion.

use std::f64::consts::FRAC_PI_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use qpir_core::adversary::*;
use qpir_core::bounds::*;
use qpir_core::privacy::*;
use qpir_core::protocols::kerenidis::{self, KerenidisOptions};
use qpir_core::protocols::*;
use qpir_core::quantum::density::{pure_trace_distance, trace_distance, DensityOperator};
use qpir_core::quantum::layout::RegisterLayout;
use qpir_core::quantum::linalg::{nuclear_norm, CMatrix, C64};
use qpir_core::quantum::ops::{trace_in_extraction, uhlmann_unitary};
use qpir_core::quantum::random::{random_density, random_effect, random_state, random_unitary};
use qpir_core::quantum::state::PureState;
use qpir_core::runtime::execute::{execute_pure, Retention};
use qpir_core::runtime::spec::Party;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

fn correctness() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    let mut worst: f64 = 1.0;
    for n in [1usize, 2, 4] {
        let inst = build_kerenidis(n, false).map_err(e)?;
        for label in 0..1usize << n {
            let db = db_from_label(label, n);
            for i in 1..=n {
                let t = execute_pure(&inst.spec, &inst.input(&db, i).map_err(e)?, Retention::FinalOnly).map_err(e)?;
                let d = inst.decode(&t).map_err(e)?;
                check(d.bit == db[i - 1], || format!("n={n} db={label:b} i={i}: wrong bit"))?;
                worst = worst.min(d.probability);
                runs += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..64 {
        let db: Vec<bool> = (0..8).map(|_| rng.random()).collect();
        for i in 1..=8 {
            let inst = kerenidis::build(&KerenidisOptions {
                database: DatabaseMode::Classical(db.clone()),
                index: IndexMode::Classical(i),
                ..KerenidisOptions::coherent(8, false)
            })
            .map_err(e)?;
            let t = execute_pure(&inst.spec, &inst.input(&db, i).map_err(e)?, Retention::FinalOnly).map_err(e)?;
            let d = inst.decode(&t).map_err(e)?;
            check(d.bit == db[i - 1], || format!("n=8 i={i}: wrong bit"))?;
            worst = worst.min(d.probability);
            runs += 1;
        }
    }
    check(worst >= 1.0 - 1e-9, || format!("min decode probability {worst}"))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{runs} runs, min decode probability {worst:.12}, {secs:.1}s"))
}

fn communication() -> Outcome {
    let mut seen = Vec::new();
    for n in [2usize, 4, 8] {
        let ell = n.trailing_zeros() as usize;
        for cleanup in [false, true] {
            let inst = kerenidis::build(&KerenidisOptions {
                database: DatabaseMode::Classical(vec![false; n]),
                index: IndexMode::Classical(1),
                ..KerenidisOptions::coherent(n, cleanup)
            })
            .map_err(e)?;
            let c = inst.spec.communication().map_err(e)?;
            let k = if cleanup { 2 } else { 1 };
            check(c.total == k * (4 * ell + 1) && c.rounds == k * (2 * ell + 1), || {
                format!("n={n} cleanup={cleanup}: {} qubits, {} rounds", c.total, c.rounds)
            })?;
            if n < 8 {
                let coherent = build_kerenidis(n, cleanup).map_err(e)?.spec.communication().map_err(e)?;
                check(coherent == c, || format!("n={n}: coherent build differs"))?;
            }
            seen.push(format!("n={n}{}:{}/{}", if cleanup { "+c" } else { "" }, c.total, c.rounds));
        }
    }
    Ok(seen.join(" "))
}

fn honest_privacy() -> Outcome {
    let mut parts = Vec::new();
    for n in [2usize, 4] {
        let inst = build_kerenidis(n, false).map_err(e)?;
        let steps = inst.spec.steps();
        let even: Vec<usize> = (2..=steps).step_by(2).collect();
        check(inst.spec.checkpoint_steps() == even, || format!("n={n}: checkpoints are not the even steps"))?;
        let inputs = standard_inputs(&inst, &InputSet::anchored()).map_err(e)?;
        for kind in ["i=+", "i~ref", "ref=mixed"] {
            check(inputs.iter().any(|i| i.label.contains(kind)), || format!("missing {kind} inputs"))?;
        }
        let r = privacy_lower_bound(&Adversary::honest(&inst.spec), PrivacyMode::Anchored, &inputs, 0.0).map_err(e)?;
        check(r.eps_lower <= 1e-9, || format!("n={n}: eps_lower {}", r.eps_lower))?;
        parts.push(format!("n={n}: eps_lower={:.1e} over {} inputs", r.eps_lower, r.inputs.len()));
    }
    Ok(parts.join("; "))
}

/// `½‖M_1 − M_2‖₁ / 4` with `M_b[x, x'] = [x_b = x'_b]` on two-bit databases.
fn purified_view_oracle() -> f64 {
    let m = |b: usize| {
        CMatrix::from_fn(4, 4, |x, y| {
            let bit = |v: usize| (v >> (1 - b)) & 1;
            C64::new(if bit(x) == bit(y) { 0.25 } else { 0.0 }, 0.0)
        })
    };
    0.5 * nuclear_norm(&(m(0) - m(1)))
}

fn purification() -> Outcome {
    let inst = build_kerenidis(2, false).map_err(e)?;
    let adv = purification_attack(&inst).map_err(e)?;
    let inputs = standard_inputs(&inst, &InputSet::classical_only()).map_err(e)?;
    let r = privacy_lower_bound(&adv, PrivacyMode::Anchored, &inputs, 0.0).map_err(e)?;
    let view = r
        .rows
        .iter()
        .filter(|row| row.checkpoint && row.left.ends_with("i=1") && row.right.ends_with("i=2"))
        .map(|row| row.distance)
        .fold(f64::INFINITY, f64::min);
    let oracle = purified_view_oracle();
    check(view > 0.05, || format!("view distance {view}"))?;
    check((view - oracle).abs() < 1e-9, || format!("view distance {view}, oracle {oracle}"))?;
    Ok(format!("view distance i=1 vs i=2 = {view:.6} (oracle {oracle:.6}), eps_lower = {:.6}", r.eps_lower))
}

fn theorem() -> Outcome {
    let inst = build_kerenidis(2, false).map_err(e)?;
    let inputs = standard_inputs(&inst, &InputSet::anchored()).map_err(e)?;
    let grid = [0.1, 0.4, 1.0, FRAC_PI_2];
    let advs = grid
        .iter()
        .map(|&t| gamma_family(&inst, t, true))
        .collect::<qpir_core::Result<Vec<_>>>()
        .map_err(e)?;
    let rep = verify_theorem_bound(&inst, &advs, &inputs).map_err(e)?;
    let mut parts = Vec::new();
    for row in &rep.rows {
        check(row.eps_hat <= row.eps_honest + 3.0 * (2.0 * row.gamma_hat).sqrt() + 1e-6, || {
            format!("{}: eps_hat {} > bound {}", row.adversary, row.eps_hat, row.bound)
        })?;
        check(row.gamma_hat > 0.0, || format!("{}: zero gamma", row.adversary))?;
        parts.push(format!("{}: {:.4} <= {:.4}", row.adversary, row.eps_hat, row.bound));
    }
    check(rep.pass, || "report failed".into())?;
    Ok(parts.join("; "))
}

fn counterexample() -> Outcome {
    let inst = build_counterexample(2).map_err(e)?;
    let inputs = standard_inputs(&inst, &InputSet::anchored()).map_err(e)?;
    let honest = privacy_lower_bound(&Adversary::honest(&inst.spec), PrivacyMode::Anchored, &inputs, 0.0).map_err(e)?;
    check(honest.eps_lower <= 1e-9, || format!("honest eps_lower {}", honest.eps_lower))?;
    let adv = purified_honest(&inst.spec, Party::A).map_err(e)?;
    let gamma = measure_speciousness(&inst.spec, &adv, &inputs).map_err(e)?.gamma_hat;
    check(gamma <= 1e-9, || format!("purified server gamma {gamma}"))?;
    let r = privacy_lower_bound(&adv, PrivacyMode::Anchored, &inputs, 0.0).map_err(e)?;
    let threshold = 0.1;
    let oracle = purified_view_oracle() / 2.0;
    check(r.eps_lower > threshold, || format!("eps_lower {} <= {threshold}", r.eps_lower))?;
    check((r.eps_lower - oracle).abs() < 1e-9, || format!("eps_lower {}, oracle {oracle}", r.eps_lower))?;
    Ok(format!(
        "honest eps_lower={:.1e}; purified server gamma={gamma:.1e}, eps_lower={:.6} > {threshold}",
        honest.eps_lower, r.eps_lower
    ))
}

fn nudge(r: &mut ChaCha8Rng, psi: &PureState, t: f64) -> PureState {
    let noise = random_state(r, psi.layout()).unwrap();
    let amps = psi
        .amplitudes()
        .iter()
        .zip(noise.amplitudes())
        .map(|(a, b)| a + b * C64::new(t, 0.0))
        .collect();
    PureState::normalized(psi.layout().clone(), amps).unwrap()
}

fn lemmas() -> Outcome {
    const TRIALS: usize = 250;
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let mut violations = [0usize; 4];
    let ab = RegisterLayout::from_pairs(&[("a", 2), ("b", 2)]).map_err(e)?;
    let x = RegisterLayout::from_pairs(&[("x", 2)]).map_err(e)?;
    let y = RegisterLayout::from_pairs(&[("y", 2)]).map_err(e)?;
    for _ in 0..TRIALS {
        let dim = 1usize << r.random_range(1..=3);
        let rank = r.random_range(1..=dim);
        let rho = random_density(&mut r, dim, rank);
        let lo = r.random_range(0.5..0.99);
        let lambda = random_effect(&mut r, dim, lo);
        let g = gentle_measure(&rho, &lambda).map_err(e)?;
        if g.distance > (1.0 - g.success).sqrt() + 1e-8 {
            violations[0] += 1;
        }

        let psi = random_state(&mut r, &ab).map_err(e)?;
        let t = r.random_range(0.0..1.5);
        let mut phi = nudge(&mut r, &psi, t);
        phi.apply_operator(&["b"], &random_unitary(&mut r, 4)).map_err(e)?;
        let eps = trace_distance(&psi.partial_trace(&["a"]).map_err(e)?, &phi.partial_trace(&["a"]).map_err(e)?)
            .map_err(e)?;
        let u = uhlmann_unitary(&psi, &phi, &["b"]).map_err(e)?;
        phi.apply_operator(&["b"], &u).map_err(e)?;
        if psi.distance(&phi).map_err(e)? > (eps * (2.0 - eps)).sqrt() + 1e-9 {
            violations[1] += 1;
        }

        let xs = random_state(&mut r, &x).map_err(e)?;
        let ys = random_state(&mut r, &y).map_err(e)?;
        let t = r.random_range(0.0..1.0);
        let alpha = nudge(&mut r, &xs.tensor(&ys).map_err(e)?, t);
        let ti = trace_in_extraction(&alpha, &xs).map_err(e)?;
        let marginal = alpha.partial_trace(&["x"]).map_err(e)?;
        let eps = trace_distance(&marginal, &DensityOperator::from_pure(xs.amplitudes()).map_err(e)?).map_err(e)?;
        let d = alpha.distance(&xs.tensor(&ti.beta).map_err(e)?).map_err(e)?;
        let purity = ti.beta.partial_trace(&["y"]).map_err(e)?.purity();
        if d > eps.sqrt() + 1e-9 || (purity - 1.0).abs() > 1e-9 {
            violations[2] += 1;
        }

        let a = random_state(&mut r, &ab).map_err(e)?;
        let t = r.random_range(0.0..2.0);
        let b = nudge(&mut r, &a, t);
        let closed = (1.0 - a.inner(&b).map_err(e)?.norm_sqr()).max(0.0).sqrt();
        let stable = pure_trace_distance(a.amplitudes(), b.amplitudes()).map_err(e)?;
        let dense = trace_distance(
            &DensityOperator::from_pure(a.amplitudes()).map_err(e)?,
            &DensityOperator::from_pure(b.amplitudes()).map_err(e)?,
        )
        .map_err(e)?;
        if (closed - stable).abs() > 1e-7 || (dense - stable).abs() > 1e-7 {
            violations[3] += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(violations == [0; 4], || format!("violations {violations:?}"))?;
    check(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{TRIALS} trials x 4 suites, 0 violations, {secs:.1}s"))
}

fn reconstruction() -> Outcome {
    let mut parts = Vec::new();
    for (kind, expected) in [(BaselineKind::SendDb, 1.0), (BaselineKind::SendIndex, 0.5)] {
        let inst = build_baseline(kind, 2).map_err(e)?;
        let t = extraction_attack(&inst, Coherence::CoherentReference).map_err(e)?;
        let c = chain_rule_check(&inst, &t).map_err(e)?;
        check((t.overall_success - expected).abs() < 1e-9, || {
            format!("{}: success {}", inst.spec.name, t.overall_success)
        })?;
        check(c.consistent && t.overall_success <= c.ceiling + 1e-9, || format!("{}: above ceiling", inst.spec.name))?;
        parts.push(format!("{} success {:.3} <= {:.3}", inst.spec.name, t.overall_success, c.ceiling));
    }
    let inst = build_kerenidis(2, false).map_err(e)?;
    let t = extraction_attack(&inst, Coherence::CoherentReference).map_err(e)?;
    let c = chain_rule_check(&inst, &t).map_err(e)?;
    let guess = t.bit_guessing[1];
    check((guess.p_lower - 0.5).abs() < 1e-9 && (guess.p_upper - 0.5).abs() < 1e-9, || {
        format!("unqueried bit guess {guess:?}")
    })?;
    check(c.consistent, || "kerenidis above ceiling".into())?;
    parts.push(format!(
        "kerenidis-n2 unqueried bit guess {:.9}, premise holds: {}",
        guess.p_lower, t.premise_holds
    ));
    Ok(parts.join("; "))
}

fn formulas() -> Outcome {
    for n in [1.0, 2.0, 16.0, 100.0] {
        check(nayak_bound(0.0, 0.0, n).value == n, || format!("nayak(0,0,{n})"))?;
    }
    let nf = 10.0f64;
    let r = reconstruction_bound(10, nf.powi(-4) / 100.0, nf.powi(-8) / 100.0);
    check(r > 0.5, || format!("reconstruction bound {r}"))?;
    let mut worst: f64 = 0.0;
    for k in 0..=500 {
        let eps = k as f64 / 1000.0;
        worst = worst.max((eps_prime(eps) - uhlmann_bound(2.0 * eps)).abs());
    }
    check(worst <= 1e-12, || format!("eps' deviation {worst}"))?;
    Ok(format!("reconstruction bound at n=10 premise = {r:.6}; eps' deviation {worst:.1e}"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("perfect correctness", correctness),
        ("communication closed forms", communication),
        ("anchored privacy against honest servers", honest_privacy),
        ("purification attack", purification),
        ("specious privacy certificate", theorem),
        ("counterexample separation", counterexample),
        ("lemma suites", lemmas),
        ("reconstruction and chain rule", reconstruction),
        ("formula evaluators", formulas),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", k + 1),
            Err(why) => {
                println!("criterion {} FAIL {name}: {why}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
