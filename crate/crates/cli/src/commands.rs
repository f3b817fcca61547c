//! Experiment drivers behind the `mahc` subcommands.
//!
//! Every driver derives episode `e` from `(seed, e)` alone, so runs are
//! reproducible and different schemes see the same environment draws.
//! Episodes run in parallel; results are always kept in episode order.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mahc_core::allocators::{PolicyAllocator, Scheme};
use mahc_core::marl::{train as train_maddpg, Checkpoint, TrainOutcome, TrainedPolicy};
use mahc_core::numerics::RngStream;
use mahc_core::scenario::ScenarioConfig;
use mahc_core::simcore::{episode_stream, run_episode, Allocator, EpisodeRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{
    bar_chart, header, line_chart, num, paired_differences, summarize, write_csv, Meta, Summary,
};

fn meta(cfg: &ExperimentConfig) -> Meta {
    Meta {
        config_hash: cfg.hash(),
        seed: cfg.scenario.seed,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn allocator_for(scheme: Scheme, policy: Option<&TrainedPolicy>) -> Result<Box<dyn Allocator>> {
    if let Some(a) = scheme.baseline() {
        return Ok(a);
    }
    match policy {
        Some(p) => Ok(Box::new(PolicyAllocator::greedy(p.clone()))),
        None => bail!("scheme `marl` needs a trained policy; pass --checkpoint"),
    }
}

pub fn load_policy(path: &Path, scenario: &ScenarioConfig) -> Result<TrainedPolicy> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ck = Checkpoint::from_json(&text)?;
    if ck.workers != scenario.workers {
        bail!(
            "checkpoint was trained for {} workers but the scenario has {}",
            ck.workers,
            scenario.workers
        );
    }
    Ok(ck.policy())
}

/// Episodes `0..episodes` of one scheme, in episode order.
pub fn run_episodes(
    scenario: &ScenarioConfig,
    scheme: Scheme,
    policy: Option<&TrainedPolicy>,
    episodes: usize,
    reward: &mahc_core::scenario::RewardConfig,
) -> Result<Vec<EpisodeRecord>> {
    let alloc = allocator_for(scheme, policy)?;
    let alloc = alloc.as_ref();
    (0..episodes)
        .into_par_iter()
        .map(|e| {
            run_episode(
                scenario,
                alloc,
                reward,
                e,
                &episode_stream(scenario.seed, e),
            )
        })
        .collect::<mahc_core::Result<Vec<_>>>()
        .map_err(Into::into)
}

pub struct TrainReport {
    pub outcome: TrainOutcome,
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
}

/// Trains MADDPG and writes `checkpoint.json` and `learning_curve.csv`.
pub fn train(cfg: &ExperimentConfig, out: &Path, svg: bool, verbose: bool) -> Result<TrainReport> {
    cfg.validate()?;
    ensure_dir(out)?;
    let total = cfg.train.max_iterations;
    let outcome = train_maddpg(
        &cfg.scenario,
        &cfg.train,
        &RngStream::new(cfg.scenario.seed, 0),
        |it, r| {
            if verbose && ((it + 1) % 25 == 0 || it + 1 == total) {
                eprintln!("iteration {}/{total}: mean total reward {r:.4}", it + 1);
            }
        },
    )?;

    let checkpoint = out.join("checkpoint.json");
    let ck = Checkpoint::from_outcome(&outcome, &cfg.scenario);
    fs::write(&checkpoint, ck.to_json()?)
        .with_context(|| format!("writing {}", checkpoint.display()))?;

    let curve = out.join("learning_curve.csv");
    let rows: Vec<Vec<String>> = outcome
        .curve
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), num(*r)])
        .collect();
    write_csv(
        &curve,
        &meta(cfg),
        &header(&["iteration", "mean_total_reward"]),
        &rows,
    )?;
    if svg {
        let xs: Vec<f64> = (0..outcome.curve.len()).map(|i| i as f64).collect();
        fs::write(
            out.join("learning_curve.svg"),
            line_chart("mean total reward per iteration", &xs, &outcome.curve),
        )?;
    }
    Ok(TrainReport {
        outcome,
        checkpoint,
        curve,
    })
}

/// One line of the per-episode JSONL log.
#[derive(Serialize)]
struct EpisodeLog<'a> {
    scenario: &'a str,
    scheme: &'a str,
    seed: u64,
    episode: usize,
    batch_size: usize,
    total_time_s: f64,
    infeasible_count: usize,
    straggler: Option<usize>,
    betas: Vec<f64>,
    worker_positions: Vec<[f64; 2]>,
    master_position: [f64; 2],
    task_times_s: Vec<f64>,
    loads: Vec<&'a [usize]>,
}

fn episode_log(rec: &EpisodeRecord) -> EpisodeLog<'_> {
    EpisodeLog {
        scenario: &rec.scenario,
        scheme: &rec.scheme,
        seed: rec.seed,
        episode: rec.episode,
        batch_size: rec.batch_size,
        total_time_s: rec.total_time,
        infeasible_count: rec.infeasible_count(),
        straggler: rec.straggler,
        betas: rec
            .initial_world
            .workers
            .iter()
            .map(|w| w.profile.beta)
            .collect(),
        worker_positions: rec
            .initial_world
            .workers
            .iter()
            .map(|w| w.kinematics.position)
            .collect(),
        master_position: rec.initial_world.master.position,
        task_times_s: rec.tasks.iter().map(|t| t.completion_time).collect(),
        loads: rec.steps.iter().map(|s| s.loads.as_slice()).collect(),
    }
}

fn write_jsonl(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(&episode_log(r))?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub struct EvaluateReport {
    pub records: Vec<EpisodeRecord>,
    pub summary: Summary,
    pub csv: PathBuf,
}

/// Writes `evaluate_<scheme>.csv` (one row per episode plus an aggregate
/// row) and `episodes_<scheme>.jsonl`.
pub fn evaluate(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    episodes: usize,
    policy: Option<&TrainedPolicy>,
    out: &Path,
) -> Result<EvaluateReport> {
    cfg.validate()?;
    if episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    ensure_dir(out)?;
    let records = run_episodes(&cfg.scenario, scheme, policy, episodes, &cfg.train.reward)?;
    let totals: Vec<f64> = records.iter().map(|r| r.total_time).collect();
    let summary = summarize(&totals);

    let s = &cfg.scenario;
    let mut rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                s.name.clone(),
                scheme.to_string(),
                s.seed.to_string(),
                r.episode.to_string(),
                num(r.total_time),
                num(r.mean_task_time()),
                r.infeasible_count().to_string(),
                String::new(),
            ]
        })
        .collect();
    let mean_task = records.iter().map(|r| r.mean_task_time()).sum::<f64>() / records.len() as f64;
    rows.push(vec![
        s.name.clone(),
        scheme.to_string(),
        s.seed.to_string(),
        "mean".into(),
        num(summary.mean),
        num(mean_task),
        records
            .iter()
            .map(|r| r.infeasible_count())
            .sum::<usize>()
            .to_string(),
        num(summary.std),
    ]);
    let csv = out.join(format!("evaluate_{scheme}.csv"));
    write_csv(
        &csv,
        &meta(cfg),
        &header(&[
            "scenario",
            "scheme",
            "seed",
            "episode",
            "total_time_s",
            "mean_task_time_s",
            "infeasible_count",
            "total_time_std_s",
        ]),
        &rows,
    )?;
    write_jsonl(&out.join(format!("episodes_{scheme}.jsonl")), &records)?;
    Ok(EvaluateReport {
        records,
        summary,
        csv,
    })
}

pub struct CompareReport {
    pub schemes: Vec<Scheme>,
    /// Per scheme, total time of each episode.
    pub totals: Vec<Vec<f64>>,
    pub summaries: Vec<Summary>,
    /// Per scheme, paired difference to the first scheme (`this - first`).
    pub diffs: Vec<Summary>,
    pub records: Vec<Vec<EpisodeRecord>>,
}

/// Paired comparison. Writes `compare.csv` (one column per scheme),
/// `compare_summary.csv`, `compare_plot.csv` and the episode logs.
pub fn compare(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
    episodes: usize,
    policy: Option<&TrainedPolicy>,
    out: &Path,
    svg: bool,
) -> Result<CompareReport> {
    cfg.validate()?;
    if schemes.len() < 2 {
        bail!("compare needs at least two schemes");
    }
    if episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    ensure_dir(out)?;
    let records = schemes
        .iter()
        .map(|&s| run_episodes(&cfg.scenario, s, policy, episodes, &cfg.train.reward))
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<Vec<f64>> = records
        .iter()
        .map(|rs| rs.iter().map(|r| r.total_time).collect())
        .collect();
    let summaries: Vec<Summary> = totals.iter().map(|t| summarize(t)).collect();
    let diffs: Vec<Summary> = totals
        .iter()
        .map(|t| summarize(&paired_differences(t, &totals[0])))
        .collect();

    let m = meta(cfg);
    let mut cols = vec!["episode".to_string()];
    cols.extend(schemes.iter().map(|s| format!("{s}_total_time_s")));
    let rows: Vec<Vec<String>> = (0..episodes)
        .map(|e| {
            let mut row = vec![e.to_string()];
            row.extend(totals.iter().map(|t| num(t[e])));
            row
        })
        .collect();
    write_csv(&out.join("compare.csv"), &m, &cols, &rows)?;

    let reference = schemes[0];
    let rows: Vec<Vec<String>> = schemes
        .iter()
        .zip(summaries.iter().zip(&diffs))
        .map(|(s, (sum, d))| {
            vec![
                s.to_string(),
                sum.n.to_string(),
                num(sum.mean),
                num(sum.std),
                num(sum.ci95_low),
                num(sum.ci95_high),
                num(d.mean),
                num(d.ci95_low),
                num(d.ci95_high),
            ]
        })
        .collect();
    let diff_cols = [
        format!("diff_vs_{reference}_mean_s"),
        format!("diff_vs_{reference}_ci95_low_s"),
        format!("diff_vs_{reference}_ci95_high_s"),
    ];
    let mut summary_cols = header(&[
        "scheme",
        "episodes",
        "mean_total_time_s",
        "std_total_time_s",
        "ci95_low_s",
        "ci95_high_s",
    ]);
    summary_cols.extend(diff_cols);
    write_csv(&out.join("compare_summary.csv"), &m, &summary_cols, &rows)?;

    let plot_rows: Vec<Vec<String>> = schemes
        .iter()
        .zip(&summaries)
        .map(|(s, sum)| vec![s.to_string(), num(sum.mean)])
        .collect();
    write_csv(
        &out.join("compare_plot.csv"),
        &m,
        &header(&["scheme", "mean_time"]),
        &plot_rows,
    )?;
    if svg {
        let labels: Vec<String> = schemes.iter().map(|s| s.to_string()).collect();
        let means: Vec<f64> = summaries.iter().map(|s| s.mean).collect();
        fs::write(
            out.join("compare.svg"),
            bar_chart("mean total completion time (s)", &labels, &means),
        )?;
    }
    for (s, rs) in schemes.iter().zip(&records) {
        write_jsonl(&out.join(format!("episodes_{s}.jsonl")), rs)?;
    }

    Ok(CompareReport {
        schemes: schemes.to_vec(),
        totals,
        summaries,
        diffs,
        records,
    })
}

/// Scenario in which `scheme` runs with batch size `b`.
pub fn with_batch_size(scenario: &ScenarioConfig, scheme: Scheme, b: usize) -> ScenarioConfig {
    let mut s = scenario.clone();
    if scheme == Scheme::Marl {
        s.batch_size = b;
    } else {
        s.baseline_batch_size = Some(b);
    }
    s
}

pub struct SweepRow {
    pub batch_size: usize,
    pub summary: Summary,
    pub totals: Vec<f64>,
}

/// Writes `sweep_batch.csv`, one row per batch size.
pub fn sweep_batch(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    batch_sizes: &[usize],
    episodes: usize,
    policy: Option<&TrainedPolicy>,
    out: &Path,
    svg: bool,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if batch_sizes.is_empty() || batch_sizes.contains(&0) {
        bail!("batch sizes must be a non-empty list of positive integers");
    }
    if episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    ensure_dir(out)?;
    let mut result = Vec::with_capacity(batch_sizes.len());
    for &b in batch_sizes {
        let scenario = with_batch_size(&cfg.scenario, scheme, b);
        let records = run_episodes(&scenario, scheme, policy, episodes, &cfg.train.reward)?;
        let totals: Vec<f64> = records.iter().map(|r| r.total_time).collect();
        result.push(SweepRow {
            batch_size: b,
            summary: summarize(&totals),
            totals,
        });
    }
    let rows: Vec<Vec<String>> = result
        .iter()
        .map(|r| {
            vec![
                scheme.to_string(),
                r.batch_size.to_string(),
                r.summary.n.to_string(),
                num(r.summary.mean),
                num(r.summary.std),
                num(r.summary.ci95_low),
                num(r.summary.ci95_high),
            ]
        })
        .collect();
    write_csv(
        &out.join("sweep_batch.csv"),
        &meta(cfg),
        &header(&[
            "scheme",
            "batch_size",
            "episodes",
            "mean_total_time_s",
            "std_total_time_s",
            "ci95_low_s",
            "ci95_high_s",
        ]),
        &rows,
    )?;
    if svg {
        let xs: Vec<f64> = result.iter().map(|r| r.batch_size as f64).collect();
        let ys: Vec<f64> = result.iter().map(|r| r.summary.mean).collect();
        fs::write(
            out.join("sweep_batch.svg"),
            line_chart("mean total completion time (s) vs batch size", &xs, &ys),
        )?;
    }
    Ok(result)
}
