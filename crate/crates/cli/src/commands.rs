//! Command implementations. Each command writes deterministic artifacts
//! (the `wall_ms` column of run records is the one timing-dependent field)
//! and reports failures through `anyhow` errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use algforge_core::baselines::{ga_grid_search, run_handcoded, BaselineKind};
use algforge_core::interpreter::{run, RunParams};
use algforge_core::ir::{to_text, Program};
use algforge_core::landscape::compute_factors;
use algforge_core::problems::{instance_from_key, ProblemInstance};
use algforge_core::seeds::{self, tag};
use algforge_core::trainer::{
    infer, train, train_continual, InferResult, TaskSpec, TrainConfig, TrainLog,
};
use algforge_core::vocab::Vocabulary;
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::{resolve_out_dir, resolve_train_config, FileConfig, Overrides, TaskConfig};
use crate::exec::executor_for;
use crate::formats::{
    self, features_csv, features_json, program_to_json, run_records_csv, train_log_csv,
    vocab_export, RunRecord,
};
use crate::stats;

/// Shared arguments of the training-style commands.
pub struct TrainCommand {
    pub problem: Option<String>,
    pub dims: Vec<usize>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub instance_seed: u64,
    pub overrides: Overrides,
}

fn instances_from_spec(
    problem: &str,
    dims: &[usize],
    instance_seed: u64,
) -> Result<Vec<ProblemInstance>> {
    if problem.contains(':') {
        return Ok(vec![instance_from_key(problem, instance_seed)?]);
    }
    if dims.is_empty() {
        bail!("problem `{problem}` needs --dims");
    }
    dims.iter()
        .map(|d| Ok(instance_from_key(&format!("{problem}:{d}"), instance_seed)?))
        .collect()
}

fn instances_from_task(task: &TaskConfig, instance_seed: u64) -> Result<Vec<ProblemInstance>> {
    if task.problems.is_empty() {
        bail!("task without problems");
    }
    task.problems
        .iter()
        .map(|key| Ok(instance_from_key(key, instance_seed)?))
        .collect()
}

fn config_echo(cfg: &TrainConfig) -> BTreeMap<String, String> {
    let mut echo = BTreeMap::new();
    echo.insert("epochs".into(), cfg.epochs.to_string());
    echo.insert("batch".into(), cfg.batch.to_string());
    echo.insert("ppo_iters".into(), cfg.ppo_iters.to_string());
    echo.insert("clip".into(), cfg.clip.to_string());
    echo.insert("runs_per_instance".into(), cfg.runs_per_instance.to_string());
    echo.insert("budget".into(), cfg.budget.to_string());
    echo.insert("pop_size".into(), cfg.pop_size.to_string());
    echo.insert("lr0".into(), cfg.lr0.to_string());
    echo.insert("lr_min".into(), cfg.lr_min.to_string());
    echo.insert("ewc_lambda".into(), cfg.ewc_lambda.to_string());
    echo.insert("baseline_decay".into(), cfg.baseline_decay.to_string());
    echo.insert("master_seed".into(), cfg.master_seed.to_string());
    echo.insert("allow_events".into(), cfg.allow_events.to_string());
    echo.insert("k_infer".into(), cfg.k_infer.to_string());
    echo.insert("fisher_samples".into(), cfg.fisher_samples.to_string());
    echo
}

fn algorithms_entry(vocab: &Vocabulary, task_name: &str, result: &InferResult) -> serde_json::Value {
    let tokens: Vec<u16> = result
        .program
        .encode_tokens(vocab)
        .map(|ts| ts.iter().map(|t| t.0).collect())
        .unwrap_or_default();
    let mut entry = serde_json::Map::new();
    entry.insert("task".into(), json!(task_name));
    entry.insert(
        "program".into(),
        serde_json::to_value(program_to_json(&result.program)).unwrap(),
    );
    entry.insert("tokens".into(), json!(tokens));
    entry.insert("reward".into(), json!(result.reward));
    entry.insert("candidate_rewards".into(), json!(result.candidate_rewards));
    serde_json::Value::Object(entry)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// `train`: one-off training on a single task, then best-of-K inference.
/// Writes `train_log.csv`, `checkpoint.json` and `algorithms.json`.
pub fn cmd_train(args: &TrainCommand) -> Result<PathBuf> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let cfg = resolve_train_config(&file, &args.overrides);
    let out = resolve_out_dir(args.out.clone(), &file)?;
    std::fs::create_dir_all(&out)?;
    let problem = args
        .problem
        .clone()
        .or_else(|| file.task.first().map(|t| t.problems[0].clone()))
        .context("no problem given (flag --problem or a [[task]] entry)")?;
    let instances = instances_from_spec(&problem, &args.dims, args.instance_seed)?;
    let task_name = problem.clone();
    let task = TaskSpec::one_off(&task_name, instances);
    let exec = executor_for(args.workers);

    let (params, log) = train(&task, &cfg, exec.as_ref());
    let result = infer(
        &params,
        &task,
        &cfg,
        exec.as_ref(),
        seeds::derive(cfg.master_seed, &[tag::INFER_SAMPLE]),
    );

    write_train_artifacts(&out, &cfg, &params, false, &[(task_name, log, result)])?;
    Ok(out)
}

/// `continual`: ordered tasks from the config file, consolidation enabled.
pub fn cmd_continual(args: &TrainCommand) -> Result<PathBuf> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => bail!("continual training needs --config with [[task]] entries"),
    };
    if file.task.len() < 2 {
        bail!("continual training needs at least two [[task]] entries");
    }
    let cfg = resolve_train_config(&file, &args.overrides);
    let out = resolve_out_dir(args.out.clone(), &file)?;
    std::fs::create_dir_all(&out)?;
    let exec = executor_for(args.workers);

    let mut tasks = Vec::new();
    for (t, tc) in file.task.iter().enumerate() {
        let name = tc
            .name
            .clone()
            .unwrap_or_else(|| tc.problems.join("+"));
        let instances = instances_from_task(tc, args.instance_seed)?;
        tasks.push(TaskSpec::continual(
            &name,
            instances,
            seeds::derive(cfg.master_seed, &[tag::ELA_TRIAL, t as u64]),
        ));
    }
    let (params, logs) = train_continual(&tasks, &cfg, exec.as_ref());

    let mut entries = Vec::new();
    for (t, (task, log)) in tasks.iter().zip(logs).enumerate() {
        let result = infer(
            &params,
            task,
            &cfg,
            exec.as_ref(),
            seeds::derive(cfg.master_seed, &[tag::INFER_SAMPLE, t as u64]),
        );
        entries.push((task.name.clone(), log, result));
    }
    write_train_artifacts(&out, &cfg, &params, true, &entries)?;
    Ok(out)
}

fn write_train_artifacts(
    out: &Path,
    cfg: &TrainConfig,
    params: &algforge_core::policy::PolicyParams,
    continual: bool,
    entries: &[(String, TrainLog, InferResult)],
) -> Result<()> {
    let vocab = Vocabulary::new();
    if entries.len() == 1 {
        write_atomic(&out.join("train_log.csv"), train_log_csv(&entries[0].1).as_bytes())?;
    } else {
        for (t, (_, log, _)) in entries.iter().enumerate() {
            write_atomic(
                &out.join(format!("train_log_task{t}.csv")),
                train_log_csv(log).as_bytes(),
            )?;
        }
    }
    let ck = Checkpoint::from_params(params, continual, config_echo(cfg));
    ck.save(&out.join("checkpoint.json"))?;
    let programs: Vec<serde_json::Value> = entries
        .iter()
        .map(|(name, _, result)| algorithms_entry(&vocab, name, result))
        .collect();
    let algorithms = json!({ "programs": programs });
    write_atomic(
        &out.join("algorithms.json"),
        serde_json::to_string_pretty(&algorithms)?.as_bytes(),
    )?;
    // inferred programs in plain text, one file per task
    for (t, (_, _, result)) in entries.iter().enumerate() {
        let name = if entries.len() == 1 {
            "best_program.ir".to_string()
        } else {
            format!("best_program_task{t}.ir")
        };
        write_atomic(&out.join(name), to_text(&result.program).as_bytes())?;
    }
    Ok(())
}

pub struct InferCommand {
    pub checkpoint: PathBuf,
    pub problem: String,
    pub dims: Vec<usize>,
    pub instance_seed: u64,
    pub seed: u64,
    pub workers: usize,
    pub k_infer: usize,
    pub runs_per_instance: usize,
    pub budget: usize,
    pub pop_size: usize,
    pub save: Option<PathBuf>,
}

/// `infer`: sample candidates from a checkpoint and print the best program.
pub fn cmd_infer(args: &InferCommand) -> Result<Program> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let params = ck.to_params()?;
    let instances = instances_from_spec(&args.problem, &args.dims, args.instance_seed)?;
    let task = if ck.continual {
        TaskSpec::continual(&args.problem, instances, args.seed)
    } else {
        TaskSpec::one_off(&args.problem, instances)
    };
    let cfg = TrainConfig {
        k_infer: args.k_infer,
        runs_per_instance: args.runs_per_instance,
        budget: args.budget,
        pop_size: args.pop_size,
        master_seed: args.seed,
        ..Default::default()
    };
    let exec = executor_for(args.workers);
    let result = infer(&params, &task, &cfg, exec.as_ref(), args.seed);
    println!("{}", to_text(&result.program));
    println!("# reward {}", result.reward);
    if let Some(path) = &args.save {
        write_atomic(path, to_text(&result.program).as_bytes())?;
    }
    Ok(result.program)
}

pub struct EvalCommand {
    pub program: PathBuf,
    pub problem: String,
    pub runs: usize,
    pub budget: usize,
    pub pop_size: usize,
    pub seed: u64,
    pub instance_seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
}

/// `eval`: repeated runs of one program on one instance, CSV report.
pub fn cmd_eval(args: &EvalCommand) -> Result<String> {
    let program = formats::load_program(&args.program)?;
    let instance = instance_from_key(&args.problem, args.instance_seed)?;
    let program_id = args
        .program
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".into());
    let records = evaluate_program_runs(
        &program,
        &program_id,
        &args.problem,
        &instance,
        args.runs,
        args.budget,
        args.pop_size,
        args.seed,
        args.workers,
    );
    let csv = run_records_csv(&records);
    match &args.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(csv)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_program_runs(
    program: &Program,
    program_id: &str,
    problem_key: &str,
    instance: &ProblemInstance,
    runs: usize,
    budget: usize,
    pop_size: usize,
    seed: u64,
    workers: usize,
) -> Vec<RunRecord> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let started = Instant::now();
                let params = RunParams {
                    budget,
                    pop_size,
                    seed: seeds::derive(seed, &[tag::BENCH, r as u64]),
                    trace: false,
                };
                let report = run(program, instance, &params, None).expect("valid run");
                RunRecord {
                    program_id: program_id.to_string(),
                    problem: problem_key.to_string(),
                    run: r,
                    best_fitness: report.best_fitness,
                    fe_used: report.fe_used,
                    wall_ms: started.elapsed().as_secs_f64() * 1e3,
                }
            })
            .collect()
    })
}

pub struct BenchCommand {
    pub problem: String,
    pub runs: usize,
    pub budget: usize,
    pub pop_size: usize,
    pub seed: u64,
    pub instance_seed: u64,
    pub workers: usize,
    pub program: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// `bench`: the four baselines plus an optional program on one instance;
/// the table carries a rank-sum significance flag against the program.
pub fn cmd_bench(args: &BenchCommand) -> Result<String> {
    let instance = instance_from_key(&args.problem, args.instance_seed)?;
    let ga = ga_grid_search(
        &instance,
        args.budget,
        args.pop_size,
        seeds::derive(args.seed, &[tag::GRID_SEARCH]),
    );
    let kinds = [BaselineKind::Ils, BaselineKind::Sa, BaselineKind::Ts, ga];

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.max(1))
        .build()
        .expect("thread pool");
    let baseline_results: Vec<(String, Vec<f64>)> = kinds
        .iter()
        .map(|&kind| {
            let fits: Vec<f64> = pool.install(|| {
                (0..args.runs)
                    .into_par_iter()
                    .map(|r| {
                        let params = RunParams {
                            budget: args.budget,
                            pop_size: args.pop_size,
                            seed: seeds::derive(args.seed, &[tag::BENCH, r as u64]),
                            trace: false,
                        };
                        run_handcoded(kind, &instance, &params)
                            .expect("valid run")
                            .best_fitness
                    })
                    .collect()
            });
            (kind.name().to_string(), fits)
        })
        .collect();

    let program_results: Option<Vec<f64>> = match &args.program {
        Some(path) => {
            let program = formats::load_program(path)?;
            Some(
                evaluate_program_runs(
                    &program,
                    "program",
                    &args.problem,
                    &instance,
                    args.runs,
                    args.budget,
                    args.pop_size,
                    args.seed,
                    args.workers,
                )
                .into_iter()
                .map(|r| r.best_fitness)
                .collect(),
            )
        }
        None => None,
    };

    let mut csv = String::from("algorithm,problem,runs,mean,std,vs_program\n");
    let mut push_row = |name: &str, fits: &[f64]| {
        let flag = match &program_results {
            Some(p) => stats::rank_sum_flag(p, fits),
            None => ' ',
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            name,
            args.problem,
            args.runs,
            stats::mean(fits),
            stats::std_dev(fits),
            flag
        ));
    };
    if let Some(p) = &program_results {
        push_row("program", p);
    }
    for (name, fits) in &baseline_results {
        push_row(name, fits);
    }
    match &args.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(csv)
}

pub struct FeaturesCommand {
    pub problem: String,
    pub seed: u64,
    pub instance_seed: u64,
    pub csv: bool,
    pub out: Option<PathBuf>,
}

/// `features`: the 32-factor embedding of one instance.
pub fn cmd_features(args: &FeaturesCommand) -> Result<String> {
    let instance = instance_from_key(&args.problem, args.instance_seed)?;
    let fv = compute_factors(&instance, args.seed);
    let text = if args.csv {
        features_csv(&args.problem, args.seed, &fv)
    } else {
        let mut s = serde_json::to_string_pretty(&features_json(&args.problem, args.seed, &fv))?;
        s.push('\n');
        s
    };
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(text)
}

pub struct ExportCommand {
    pub vocab: bool,
    pub out: Option<PathBuf>,
}

/// `export --vocab`: the token table as JSON.
pub fn cmd_export(args: &ExportCommand) -> Result<String> {
    if !args.vocab {
        bail!("nothing to export: pass --vocab");
    }
    let vocab = Vocabulary::new();
    let mut text = serde_json::to_string_pretty(&vocab_export(&vocab))?;
    text.push('\n');
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_writes_expected_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run1");
        let args = TrainCommand {
            problem: Some("onemax".into()),
            dims: vec![12],
            config: None,
            out: Some(out.clone()),
            workers: 1,
            instance_seed: 1,
            overrides: Overrides {
                epochs: Some(2),
                batch: Some(3),
                budget: Some(120),
                runs_per_instance: Some(1),
                seed: Some(42),
                k_infer: Some(2),
                ..Default::default()
            },
        };
        // pop size default 50 exceeds the budget; shrink via config file
        let cfg_path = dir.path().join("cfg.toml");
        std::fs::write(&cfg_path, "pop_size = 10\n").unwrap();
        let args = TrainCommand {
            config: Some(cfg_path),
            ..args
        };
        cmd_train(&args).unwrap();
        let log = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
        assert_eq!(log.lines().count(), 3); // header + 2 epochs
        assert!(out.join("checkpoint.json").exists());
        assert!(out.join("algorithms.json").exists());
        assert!(out.join("best_program.ir").exists());
        let algorithms: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("algorithms.json")).unwrap())
                .unwrap();
        assert_eq!(algorithms["programs"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn eval_produces_one_row_per_run() {
        let dir = tempfile::tempdir().unwrap();
        let prog = dir.path().join("alg.ir");
        std::fs::write(&prog, "reinitialize | forward | once\n").unwrap();
        let args = EvalCommand {
            program: prog,
            problem: "onemax:15".into(),
            runs: 4,
            budget: 100,
            pop_size: 10,
            seed: 7,
            instance_seed: 1,
            workers: 2,
            out: None,
        };
        let csv = cmd_eval(&args).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("program_id,problem,run,"));
    }

    #[test]
    fn unknown_problem_key_fails() {
        let dir = tempfile::tempdir().unwrap();
        let prog = dir.path().join("alg.ir");
        std::fs::write(&prog, "reinitialize | forward | once\n").unwrap();
        let args = EvalCommand {
            program: prog,
            problem: "mystery:10".into(),
            runs: 1,
            budget: 100,
            pop_size: 10,
            seed: 7,
            instance_seed: 1,
            workers: 1,
            out: None,
        };
        assert!(cmd_eval(&args).is_err());
    }
}
