//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `--nocapture`). Scaled stand-ins replace
//! full-size experiments; every tolerance is pinned here.
//!
//! Run with:
//! `cargo test -p algforge --test acceptance -- --nocapture --test-threads=1`

use std::time::Instant;

use algforge::commands::{cmd_train, TrainCommand};
use algforge::config::Overrides;
use algforge::exec::PoolExecutor;
use algforge_core::baselines::{as_program, ga_grid_search, run_handcoded, BaselineKind};
use algforge_core::interpreter::{run, RunParams};
use algforge_core::ir::{parse_tokens, Program};
use algforge_core::landscape::{compute_factors, dispersion_features, random_walk_sample};
use algforge_core::policy::{
    masked_probs, sample_sequence, sequence_logprob_var, ParamVars, PolicyHyper, PolicyParams,
    Tape,
};
use algforge_core::problems::{instance_from_key, BitString, Family, Objective, ProblemInstance};
use algforge_core::seeds::{self, tag};
use algforge_core::trainer::{
    evaluate_reward, infer, ppo_objective_term, train, train_continual, Adam, BatchItem,
    EwcState, TaskSpec, TrainConfig,
};
use algforge_core::vocab::{GrammarState, TokenId, Vocabulary};

/// Seed-stream tags local to this suite.
const T_TEST: u64 = 1001;
const T_CMP: u64 = 1002;
const T_GRID: u64 = 1003;
const T_RETAIN: u64 = 2001;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

/// Scaled training configuration used by criteria 5, 6 and 11. The
/// criterion pins epochs, batch, budget and runs; the learning rate is
/// scaled up so that total parameter movement over 150 optimizer steps
/// matches what the default schedule reaches over its full 8000 steps.
fn scaled_cfg(master_seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 30,
        batch: 8,
        budget: 1000,
        runs_per_instance: 3,
        pop_size: 50,
        lr0: 1e-3,
        lr_min: 1e-4,
        master_seed,
        ..Default::default()
    }
}

/// Criterion 1: 10,000 policy-sampled sequences all parse and execute.
#[test]
fn criterion_01_grammar_closure() {
    let started = Instant::now();
    let vocab = Vocabulary::new();
    let params = PolicyParams::init(PolicyHyper::default(), 1);
    let inst = ProblemInstance::new(Family::OneMax, 20, vec![], 1).unwrap();
    let mut rng = seeds::rng_from(2);
    let mut parsed = 0usize;
    let mut executed = 0usize;
    let total = 10_000;
    for i in 0..total {
        let (tokens, log_prob) = sample_sequence(&params, &vocab, None, false, &mut rng);
        assert!(log_prob.is_finite());
        let program = parse_tokens(&vocab, &tokens).expect("sampled sequence parses");
        parsed += 1;
        let run_params = RunParams {
            budget: 500,
            pop_size: 50,
            seed: i as u64,
            trace: false,
        };
        let rep = run(&program, &inst, &run_params, None).expect("sampled program executes");
        assert!(rep.fe_used <= 500);
        executed += 1;
    }
    let elapsed = started.elapsed();
    report(
        "criterion 1 (grammar closure)",
        parsed == total && executed == total && elapsed.as_secs() <= 120,
        &format!("{parsed}/{total} parsed, {executed}/{total} executed in {elapsed:.2?}"),
    );
}

/// Criterion 2: hand-coded and interpreted baselines produce identical
/// per-pass best-fitness traces.
#[test]
fn criterion_02_interpreter_oracle_equivalence() {
    let started = Instant::now();
    let kinds = [
        BaselineKind::Ils,
        BaselineKind::Sa,
        BaselineKind::Ts,
        BaselineKind::Ga {
            eta_c: 0.5,
            eta_m: 0.1,
        },
    ];
    let mut checked = 0usize;
    for family in [Family::OneMax, Family::LeadingOnes] {
        for d in [10usize, 20] {
            let inst = ProblemInstance::new(family, d, vec![], 1).unwrap();
            for kind in kinds {
                for seed in 1..=3u64 {
                    let params = RunParams {
                        budget: 2000,
                        pop_size: 50,
                        seed,
                        trace: true,
                    };
                    let oracle = run_handcoded(kind, &inst, &params).unwrap();
                    let ir = run(&as_program(kind), &inst, &params, None).unwrap();
                    assert_eq!(
                        oracle.trace,
                        ir.trace,
                        "{kind:?} {} d={d} seed={seed}",
                        family.name()
                    );
                    assert_eq!(oracle.best_fitness, ir.best_fitness);
                    assert_eq!(oracle.fe_used, ir.fe_used);
                    checked += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    report(
        "criterion 2 (interpreter-oracle equivalence)",
        checked == 48 && elapsed.as_secs() <= 60,
        &format!("{checked} exact trace matches in {elapsed:.2?}"),
    );
}

/// Criterion 3: analytic gradients match central differences on the
/// reduced model.
#[test]
fn criterion_03_gradient_correctness() {
    let started = Instant::now();
    let hyper = PolicyHyper {
        d_model: 8,
        heads: 2,
        blocks: 1,
        ffn_hidden: 16,
        vocab: 20,
        factor_dim: 4,
        max_len: 16,
    };
    let params = PolicyParams::init(hyper, 3);
    let tokens: Vec<u16> = vec![4, 12, 9, 19, 2];
    let masks: Vec<Vec<bool>> = (0..tokens.len())
        .map(|j| (0..20).map(|i| (i + j) % 3 != 0 || i == tokens[j] as usize).collect())
        .collect();
    let factor = [0.4, -0.1, 0.8, 0.2];
    let loss_of = |p: &PolicyParams| {
        let mut tape = Tape::new();
        let pv = ParamVars::register(&mut tape, p);
        let lp = sequence_logprob_var(&mut tape, &pv, &p.hyper, 0, &tokens, &masks, Some(&factor));
        let shifted = tape.sub_const(lp, -4.0);
        let ratio = tape.exp(shifted);
        let unclipped = tape.mul_const(ratio, 0.6);
        let clipped_ratio = tape.clamp(ratio, 0.8, 1.2);
        let clipped = tape.mul_const(clipped_ratio, 0.6);
        let m = tape.min(unclipped, clipped);
        let loss = tape.mul_const(m, -1.0);
        (tape, pv, loss)
    };
    let (tape, pv, loss) = loss_of(&params);
    let grads = tape.backward(loss);
    let leaves = pv.ordered();
    let named = params.named_tensors();
    let mut rng = seeds::rng_from(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let which = rand::Rng::random_range(&mut rng, 0..named.len());
        let idx = rand::Rng::random_range(&mut rng, 0..named[which].1.len());
        let analytic = grads.get(leaves[which], named[which].1).data[idx];
        let h = 1e-4;
        let eval_at = |delta: f64| {
            let mut p2 = params.clone();
            p2.named_tensors_mut()[which].1.data[idx] += delta;
            let (tape, _, loss) = loss_of(&p2);
            tape.scalar(loss)
        };
        let numeric = (eval_at(h) - eval_at(-h)) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    let elapsed = started.elapsed();
    report(
        "criterion 3 (gradient correctness)",
        worst < 1e-4 && elapsed.as_secs() <= 60,
        &format!("max relative error {worst:.2e} over 200 coordinates in {elapsed:.2?}"),
    );
}

/// Criterion 4: the three forced clipped-surrogate cases hold exactly.
#[test]
fn criterion_04_ppo_clip_arithmetic() {
    let a = ppo_objective_term(1.5, 1.0, 0.2);
    let b = ppo_objective_term(0.5, -1.0, 0.2);
    let adv = 0.731;
    let c = ppo_objective_term(1.0, adv, 0.2);
    report(
        "criterion 4 (ppo clip arithmetic)",
        a == 1.2 && b == -0.8 && c == adv,
        &format!("h=1.5/A=+1 -> {a}; h=0.5/A=-1 -> {b}; h=1 -> {c}"),
    );
}

/// Criterion 5: scaled training on OneMax d=50; the inferred algorithm
/// reaches the optimum in at least 24/30 test runs within 5000 FEs and
/// beats every baseline's mean best fitness at 2000 FEs.
#[test]
fn criterion_05_scaled_training_efficacy() {
    let started = Instant::now();
    let master = 7u64;
    let cfg = scaled_cfg(master);
    let task = TaskSpec::one_off(
        "onemax:50",
        vec![instance_from_key("onemax:50", 1).unwrap()],
    );
    let exec = PoolExecutor::new(4);
    let (params, log) = train(&task, &cfg, &exec);
    assert_eq!(log.rows.len(), cfg.epochs);
    let result = infer(
        &params,
        &task,
        &cfg,
        &exec,
        seeds::derive(master, &[tag::INFER_SAMPLE]),
    );
    let test_inst = instance_from_key("onemax:50", 1).unwrap();

    let mut reached = 0;
    for r in 0..30u64 {
        let p = RunParams {
            budget: 5000,
            pop_size: 50,
            seed: seeds::derive(master, &[T_TEST, r]),
            trace: false,
        };
        if run(&result.program, &test_inst, &p, None).unwrap().best_fitness == 50.0 {
            reached += 1;
        }
    }

    let mean_at_2000 = |program: &Program| -> f64 {
        let mut sum = 0.0;
        for r in 0..30u64 {
            let p = RunParams {
                budget: 2000,
                pop_size: 50,
                seed: seeds::derive(master, &[T_CMP, r]),
                trace: false,
            };
            sum += run(program, &test_inst, &p, None).unwrap().best_fitness;
        }
        sum / 30.0
    };
    let ours = mean_at_2000(&result.program);

    let ga = ga_grid_search(&test_inst, 2000, 50, seeds::derive(master, &[T_GRID]));
    let mut baselines = Vec::new();
    for kind in [BaselineKind::Ils, BaselineKind::Sa, BaselineKind::Ts, ga] {
        let mut sum = 0.0;
        for r in 0..30u64 {
            let p = RunParams {
                budget: 2000,
                pop_size: 50,
                seed: seeds::derive(master, &[T_CMP, r]),
                trace: false,
            };
            sum += run_handcoded(kind, &test_inst, &p).unwrap().best_fitness;
        }
        baselines.push((kind.name(), sum / 30.0));
    }
    let beats_all = baselines.iter().all(|&(_, m)| ours > m);
    let elapsed = started.elapsed();
    report(
        "criterion 5 (scaled training efficacy)",
        reached >= 24 && beats_all && elapsed.as_secs() <= 900,
        &format!(
            "reached optimum {reached}/30; mean@2000 {ours:.3} vs {baselines:?} in {elapsed:.2?}"
        ),
    );
}

/// Criterion 6: after training on LeadingOnes d=50, the inferred algorithm
/// beats at least 3 of 4 baselines on d=100 over 30 runs of 5000 FEs.
#[test]
fn criterion_06_scaled_outperformance_leadingones() {
    let started = Instant::now();
    let master = 7u64;
    let cfg = scaled_cfg(master);
    let task = TaskSpec::one_off(
        "leadingones:50",
        vec![instance_from_key("leadingones:50", 1).unwrap()],
    );
    let exec = PoolExecutor::new(4);
    let (params, _) = train(&task, &cfg, &exec);
    let result = infer(
        &params,
        &task,
        &cfg,
        &exec,
        seeds::derive(master, &[tag::INFER_SAMPLE]),
    );
    let test_inst = instance_from_key("leadingones:100", 1).unwrap();

    let mean_of = |f: &dyn Fn(u64) -> f64| -> f64 {
        (0..30u64).map(f).sum::<f64>() / 30.0
    };
    let ours = mean_of(&|r| {
        let p = RunParams {
            budget: 5000,
            pop_size: 50,
            seed: seeds::derive(master, &[T_CMP, r]),
            trace: false,
        };
        run(&result.program, &test_inst, &p, None).unwrap().best_fitness
    });
    let ga = ga_grid_search(&test_inst, 5000, 50, seeds::derive(master, &[T_GRID]));
    let mut beaten = 0;
    let mut detail = format!("ours {ours:.2}");
    for kind in [BaselineKind::Ils, BaselineKind::Sa, BaselineKind::Ts, ga] {
        let m = mean_of(&|r| {
            let p = RunParams {
                budget: 5000,
                pop_size: 50,
                seed: seeds::derive(master, &[T_CMP, r]),
                trace: false,
            };
            run_handcoded(kind, &test_inst, &p).unwrap().best_fitness
        });
        if ours > m {
            beaten += 1;
        }
        detail.push_str(&format!(" {}={m:.2}", kind.name()));
    }
    let elapsed = started.elapsed();
    report(
        "criterion 6 (scaled outperformance on leadingones)",
        beaten >= 3 && elapsed.as_secs() <= 1200,
        &format!("{detail}; beaten {beaten}/4 in {elapsed:.2?}"),
    );
}

/// Criterion 7: benchmark identities and exhaustive small-dimension optima.
#[test]
fn criterion_07_benchmark_identities() {
    let onemax = ProblemInstance::new(Family::OneMax, 625, vec![], 1).unwrap();
    let harmonic = ProblemInstance::new(Family::Harmonic, 625, vec![], 1).unwrap();
    let ok_identities = onemax.evaluate(&BitString::ones(625)) == 625.0
        && harmonic.evaluate(&BitString::ones(625)) == 195_625.0;

    // LABS merit factor at N=3 against brute force
    let labs = ProblemInstance::new(Family::Labs, 3, vec![], 1).unwrap();
    let x110 = BitString::from_binary_str("110").unwrap();
    let mut labs_best = f64::MIN;
    for v in 0..8u32 {
        let bits: Vec<bool> = (0..3).map(|i| (v >> i) & 1 == 1).collect();
        labs_best = labs_best.max(labs.evaluate(&BitString::from_bits(&bits)));
    }
    let ok_labs = labs.evaluate(&x110) == 4.5 && labs_best == 4.5;

    // exhaustive optimum checks across families for d <= 12
    use algforge_core::problems::WModelLayer;
    let instances = vec![
        ProblemInstance::new(Family::OneMax, 12, vec![], 1).unwrap(),
        ProblemInstance::new(Family::LeadingOnes, 12, vec![], 1).unwrap(),
        ProblemInstance::new(Family::Harmonic, 11, vec![], 1).unwrap(),
        ProblemInstance::new(Family::IsingRing, 10, vec![], 1).unwrap(),
        ProblemInstance::new(Family::IsingTorus, 9, vec![], 1).unwrap(),
        ProblemInstance::new(Family::NQueens, 16, vec![], 1).unwrap(),
        ProblemInstance::new(Family::OneMax, 12, vec![WModelLayer::Neutrality(3)], 2).unwrap(),
        ProblemInstance::new(Family::OneMax, 12, vec![WModelLayer::Dummy(9)], 3).unwrap(),
        ProblemInstance::new(Family::OneMax, 12, vec![WModelLayer::Epistasis(4)], 4).unwrap(),
        ProblemInstance::new(Family::OneMax, 12, vec![WModelLayer::Ruggedness(2)], 5).unwrap(),
        ProblemInstance::new(Family::LeadingOnes, 12, vec![WModelLayer::Epistasis(3)], 6).unwrap(),
    ];
    let mut ok_exhaustive = true;
    for inst in &instances {
        let Some(opt) = inst.known_optimum() else {
            continue;
        };
        let d = inst.dim();
        let mut best = f64::MIN;
        for v in 0..(1u64 << d) {
            let bits: Vec<bool> = (0..d).map(|i| (v >> i) & 1 == 1).collect();
            let f = inst.evaluate(&BitString::from_bits(&bits));
            if f > opt {
                ok_exhaustive = false;
            }
            best = best.max(f);
        }
        if best != opt {
            ok_exhaustive = false;
        }
    }
    report(
        "criterion 7 (benchmark identities)",
        ok_identities && ok_labs && ok_exhaustive,
        &format!(
            "onemax/harmonic@625 {ok_identities}, labs {ok_labs}, exhaustive {ok_exhaustive}"
        ),
    );
}

/// Criterion 8: consolidation behavior on a two-task sequence. The bitwise
/// sub-check (lambda 0 equals plain clipped policy gradient) is exact; the
/// retention direction is asserted as specified over five seeds.
///
/// Expected to FAIL the retention direction at this scale: the two pinned
/// tasks transfer positively, so sequential fine-tuning does not forget and
/// consolidation has nothing to protect (measured effect over ten seeds is
/// -0.01 +/- 2.2 reward points, indistinguishable from zero).
#[test]
fn criterion_08_ewc_retention() {
    let started = Instant::now();
    // bitwise sub-check: lambda = 0 equals plain clipped policy gradient
    let vocab = Vocabulary::new();
    let params0 = PolicyParams::init(PolicyHyper::default(), 23);
    let anchor: Vec<_> = params0
        .named_tensors()
        .into_iter()
        .map(|(_, t)| t.clone())
        .collect();
    let fisher: Vec<_> = anchor
        .iter()
        .map(|t| algforge_core::policy::Tensor::from_fn(t.rows, t.cols, |_, _| 1.0))
        .collect();
    let mut rng = seeds::rng_from(25);
    let batch: Vec<BatchItem> = (0..4)
        .map(|i| {
            let (tokens, lp) = sample_sequence(&params0, &vocab, None, false, &mut rng);
            BatchItem {
                tokens,
                old_logprob: lp,
                normalized_reward: 0.2 + 0.15 * i as f64,
            }
        })
        .collect();
    let cfg_small = TrainConfig::default();
    let run_update = |ewc: Option<&EwcState>| {
        let mut p = params0.clone();
        let mut adam = Adam::new(&p);
        let (loss, _) = algforge_core::trainer::ppo_update(
            &mut p, &mut adam, &vocab, &batch, 0.5, &cfg_small, None, ewc, 1e-3,
        );
        (loss, p)
    };
    let zero = EwcState {
        lambda: 0.0,
        fisher,
        anchor,
    };
    let (loss_plain, p_plain) = run_update(None);
    let (loss_zero, p_zero) = run_update(Some(&zero));
    let bitwise_ok = loss_plain.to_bits() == loss_zero.to_bits() && p_plain == p_zero;

    // retention direction over five seeds
    let exec = PoolExecutor::new(4);
    let mut with_sum = 0.0;
    let mut without_sum = 0.0;
    for seed in 1u64..=5 {
        let mk_cfg = |lambda: f64| TrainConfig {
            epochs: 60,
            batch: 8,
            budget: 1000,
            runs_per_instance: 3,
            pop_size: 50,
            lr0: 2e-3,
            lr_min: 2e-4,
            ewc_lambda: lambda,
            master_seed: seed,
            ..Default::default()
        };
        let t1 = TaskSpec::continual(
            "onemax:50",
            vec![instance_from_key("onemax:50", 1).unwrap()],
            seeds::derive(seed, &[tag::ELA_TRIAL, 0]),
        );
        let t2 = TaskSpec::continual(
            "leadingones:50",
            vec![instance_from_key("leadingones:50", 1).unwrap()],
            seeds::derive(seed, &[tag::ELA_TRIAL, 1]),
        );
        let tasks = vec![t1, t2];
        for (lambda, acc) in [(200.0, &mut with_sum), (0.0, &mut without_sum)] {
            let cfg = mk_cfg(lambda);
            let (p, _) = train_continual(&tasks, &cfg, &exec);
            // post-task-2 reward on task 1: mean reward of 32 sampled
            // programs under the task-1 factor, fixed evaluation streams
            let eval_cfg = TrainConfig {
                runs_per_instance: 6,
                ..cfg.clone()
            };
            let factor = tasks[0].factor.clone().unwrap();
            let mut q = 0.0;
            for i in 0..32u64 {
                let mut srng = seeds::rng(seed, &[T_RETAIN, i]);
                let (tokens, _) =
                    sample_sequence(&p, &vocab, Some(factor.as_slice()), false, &mut srng);
                let program = parse_tokens(&vocab, &tokens).unwrap();
                q += evaluate_reward(
                    &program,
                    &tasks[0],
                    &eval_cfg,
                    &exec,
                    seeds::derive(seed, &[T_RETAIN, i, 1]),
                );
            }
            *acc += q / 32.0;
        }
    }
    let with_mean = with_sum / 5.0;
    let without_mean = without_sum / 5.0;
    let retention_ok = with_mean >= without_mean;
    let elapsed = started.elapsed();
    report(
        "criterion 8 (ewc retention)",
        bitwise_ok && retention_ok && elapsed.as_secs() <= 2400,
        &format!(
            "bitwise lambda-0 equality {bitwise_ok}; retention lambda200 {with_mean:.3} vs \
             lambda0 {without_mean:.3} in {elapsed:.2?}"
        ),
    );
}

/// Criterion 9: masked softmax zero/one guarantees.
#[test]
fn criterion_09_masked_softmax() {
    let vocab = Vocabulary::new();
    let mut rng = seeds::rng_from(9);
    let mut ok = true;
    for _ in 0..10_000 {
        let logits: Vec<f64> = (0..vocab.len())
            .map(|_| rand::Rng::random::<f64>(&mut rng) * 20.0 - 10.0)
            .collect();
        // random reachable grammar state gives a real mask
        let mut state = GrammarState::new(rand::Rng::random::<bool>(&mut rng));
        let steps = rand::Rng::random_range(&mut rng, 0..8);
        for _ in 0..steps {
            let mask = vocab.next_mask(&state).unwrap();
            let allowed: Vec<TokenId> = mask.iter_allowed().collect();
            let pick = allowed[rand::Rng::random_range(&mut rng, 0..allowed.len())];
            state = vocab.advance(state, pick).unwrap();
            if state.is_done() {
                state = GrammarState::new(false);
            }
        }
        let mask = vocab.next_mask(&state).unwrap();
        let probs = masked_probs(&logits, &mask);
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            ok = false;
        }
        for (i, &p) in probs.iter().enumerate() {
            if !mask.allows(TokenId(i as u16)) && p != 0.0 {
                ok = false;
            }
        }
    }
    report(
        "criterion 9 (masked softmax)",
        ok,
        "forbidden probability exactly 0, sums within 1e-9 over 10^4 draws",
    );
}

/// Criterion 10: landscape-embedding sanity.
#[test]
fn criterion_10_ela_embedding_sanity() {
    struct Flat;
    impl Objective for Flat {
        fn dim(&self) -> usize {
            20
        }
        fn evaluate(&self, _x: &BitString) -> f64 {
            1.0
        }
    }
    struct RandomFitness;
    impl Objective for RandomFitness {
        fn dim(&self) -> usize {
            25
        }
        fn evaluate(&self, x: &BitString) -> f64 {
            (x.stable_hash() % 100_000) as f64 / 100_000.0
        }
    }

    let onemax = ProblemInstance::new(Family::OneMax, 25, vec![], 1).unwrap();
    let a = compute_factors(&onemax, 77);
    let b = compute_factors(&onemax, 77);
    let deterministic = a == b;

    let r2 = a.get("ela_meta.lin_simple.adj_r2").unwrap();
    let linear_ok = r2 > 0.99;

    let flat_sample = random_walk_sample(&Flat, 5);
    let disp = dispersion_features(&flat_sample);
    let flat_ok = disp[..8].iter().all(|v| (v - 1.0).abs() <= 0.05);

    let rf = compute_factors(&RandomFitness, 77);
    let separated =
        (r2 - rf.get("ela_meta.lin_simple.adj_r2").unwrap()).abs() > 0.5;

    report(
        "criterion 10 (ela embedding sanity)",
        deterministic && linear_ok && flat_ok && separated,
        &format!(
            "deterministic {deterministic}, onemax adj_r2 {r2:.4}, flat ratios ok {flat_ok}, \
             separation {separated}"
        ),
    );
}

/// Criterion 11: two invocations of the criterion-5 pipeline produce
/// byte-identical train_log.csv and algorithms.json.
#[test]
fn criterion_11_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |name: &str| -> (Vec<u8>, Vec<u8>) {
        let out = dir.path().join(name);
        let args = TrainCommand {
            problem: Some("onemax".into()),
            dims: vec![50],
            config: None,
            out: Some(out.clone()),
            workers: 4,
            instance_seed: 1,
            overrides: Overrides {
                epochs: Some(30),
                batch: Some(8),
                budget: Some(1000),
                runs_per_instance: Some(3),
                pop_size: Some(50),
                lr0: Some(1e-3),
                seed: Some(7),
                ..Default::default()
            },
        };
        cmd_train(&args).unwrap();
        (
            std::fs::read(out.join("train_log.csv")).unwrap(),
            std::fs::read(out.join("algorithms.json")).unwrap(),
        )
    };
    let (log_a, alg_a) = run_once("a");
    let (log_b, alg_b) = run_once("b");
    report(
        "criterion 11 (end-to-end determinism)",
        log_a == log_b && alg_a == alg_b,
        &format!(
            "train_log.csv identical: {}, algorithms.json identical: {}",
            log_a == log_b,
            alg_a == alg_b
        ),
    );
}
