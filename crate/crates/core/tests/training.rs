//! Scaled end-to-end training checks (seconds, not minutes).

use algforge_core::problems::{instance_from_key, Objective};
use algforge_core::trainer::{train, SerialExecutor, TaskSpec, TrainConfig};

/// Training improves the batch-mean reward between the first and the last
/// epoch on a problem where the reward signal is strong.
#[test]
fn mean_reward_rises_over_training() {
    let cfg = TrainConfig {
        epochs: 30,
        batch: 8,
        budget: 1000,
        runs_per_instance: 3,
        pop_size: 50,
        lr0: 2e-3,
        lr_min: 2e-4,
        master_seed: 2,
        ..Default::default()
    };
    let instance = instance_from_key("onemax:50", 1).unwrap();
    let optimum = instance.known_optimum().unwrap();
    let task = TaskSpec::one_off("onemax:50", vec![instance]);
    let (_params, log) = train(&task, &cfg, &SerialExecutor);
    assert_eq!(log.rows.len(), cfg.epochs);
    let first = log.rows.first().unwrap().mean_reward;
    let last = log.rows.last().unwrap().mean_reward;
    assert!(
        last > first,
        "mean reward did not rise: {first} -> {last}"
    );
    assert!(log.rows.iter().all(|r| r.max_reward <= optimum));
}
