use std::fs;
use std::path::Path;

use mahc_cli::commands::{compare, evaluate, run_episodes, sweep_batch, train, with_batch_size};
use mahc_cli::config::{parse_config, ExperimentConfig};
use mahc_core::allocators::Scheme;

fn small() -> ExperimentConfig {
    parse_config(
        r#"
preset = "desk"
[scenario]
tasks = 3
seed = 11
[train]
max_iterations = 4
episodes_per_iteration = 2
batch_size = 8
hidden_width = 8
"#,
    )
    .unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().skip(2).collect()
}

#[test]
fn evaluate_writes_metadata_rows_and_aggregate() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let rep = evaluate(&cfg, Scheme::Uniform, 20, None, dir.path()).unwrap();
    let text = read(&rep.csv);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# config_hash={} seed=11", cfg.hash())
    );
    assert_eq!(
        lines.next().unwrap(),
        "scenario,scheme,seed,episode,total_time_s,mean_task_time_s,infeasible_count,total_time_std_s"
    );
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 21);
    assert!(rows[20].contains(",mean,"));
    assert_eq!(rep.records.len(), 20);
    let jsonl = read(&dir.path().join("episodes_uniform.jsonl"));
    assert_eq!(jsonl.lines().count(), 20);
}

#[test]
fn comparing_a_scheme_with_itself_gives_identical_columns() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let rep = compare(
        &cfg,
        &[Scheme::Hcmm, Scheme::Hcmm],
        6,
        None,
        dir.path(),
        false,
    )
    .unwrap();
    assert_eq!(rep.totals[0], rep.totals[1]);
    assert_eq!(rep.diffs[1].mean, 0.0);
    assert_eq!(rep.diffs[1].std, 0.0);
    assert!(dir.path().join("compare.csv").exists());
    assert!(dir.path().join("compare_summary.csv").exists());
}

#[test]
fn sweep_single_size_and_full_batch_matches_unbatched() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep_batch(&cfg, Scheme::Uniform, &[1], 4, None, dir.path(), false).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(
        data_lines(&read(&dir.path().join("sweep_batch.csv"))).len(),
        1
    );

    let p = cfg.scenario.rows;
    let full = with_batch_size(&cfg.scenario, Scheme::LoadBalanced, p);
    let a = run_episodes(&full, Scheme::LoadBalanced, None, 4, &cfg.train.reward).unwrap();
    let b = run_episodes(
        &cfg.scenario,
        Scheme::LoadBalanced,
        None,
        4,
        &cfg.train.reward,
    )
    .unwrap();
    let ta: Vec<f64> = a.iter().map(|r| r.total_time).collect();
    let tb: Vec<f64> = b.iter().map(|r| r.total_time).collect();
    assert_eq!(ta, tb);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small();
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    for dir in [one.path(), two.path()] {
        let rep = train(&cfg, dir, false, false).unwrap();
        let policy = rep.outcome.policy();
        compare(
            &cfg,
            &[Scheme::Uniform, Scheme::Marl],
            5,
            Some(&policy),
            dir,
            true,
        )
        .unwrap();
    }
    for name in [
        "checkpoint.json",
        "learning_curve.csv",
        "compare.csv",
        "compare_summary.csv",
        "compare.svg",
        "episodes_marl.jsonl",
    ] {
        assert_eq!(
            read(&one.path().join(name)),
            read(&two.path().join(name)),
            "{name}"
        );
    }
    let curve = read(&one.path().join("learning_curve.csv"));
    assert_eq!(data_lines(&curve).len(), cfg.train.max_iterations);
}

#[test]
fn marl_without_policy_is_an_error() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let Err(err) = evaluate(&cfg, Scheme::Marl, 2, None, dir.path()) else {
        panic!("marl evaluated without a policy");
    };
    assert!(format!("{err:#}").contains("checkpoint"), "{err:#}");
}
