use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agents::PolicyKind;
use crate::exec;
use crate::mac_env::{efficiency_ratio, pooled_efficiency_ratio, SlotOutcome};
use crate::mano::{run_scenario, write_event_log, Scenario};
use crate::oracle::{optimal_trace, Objective};
use crate::semantic_kb::{accuracy, gen_classes, Federation, RoundConfig};

use super::config::{ExperimentConfig, FederationSchedule};
use super::{simulate, HarnessError};

pub const SUMMARY_HEADER: &str = "policy,seed,window_start,window_slots,mean_sum_throughput,mean_optimal,mean_efficiency_ratio,final_efficiency_ratio,final_pooled_efficiency_ratio";
pub const FEDERATION_HEADER: &str = "seed,round,version,trained_at,global_accuracy,mean_local_accuracy,mean_unseen_accuracy";

/// Header of the per-slot metrics table for `n_users` users.
pub fn metrics_header(n_users: usize) -> String {
    let mut h = String::from("slot,seed,policy,sum_throughput");
    for u in 0..n_users {
        write!(h, ",throughput_u{u}").unwrap();
    }
    for u in 0..n_users {
        write!(h, ",assisted_u{u}").unwrap();
    }
    h.push_str(",efficiency_ratio,optimal");
    h
}

/// Final-window statistics of one (seed, policy) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub seed: u64,
    pub window_start: u64,
    pub window_slots: u64,
    pub mean_sum_throughput: f64,
    pub mean_optimal: f64,
    pub mean_efficiency_ratio: f64,
    pub final_efficiency_ratio: f64,
    pub final_pooled_efficiency_ratio: f64,
    /// Slots where the policy beat the per-slot optimum.
    pub dominance_violations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationRow {
    pub seed: u64,
    pub round: u64,
    pub version: u64,
    pub trained_at: u64,
    pub global_accuracy: f64,
    pub mean_local_accuracy: f64,
    pub mean_unseen_accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub runs: Vec<RunSummary>,
    pub federation: Vec<FederationRow>,
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    /// Seed-averaged final-window throughput of `policy`.
    pub fn mean_throughput(&self, policy: PolicyKind) -> Option<f64> {
        let runs: Vec<&RunSummary> = self.runs.iter().filter(|r| r.policy == policy).collect();
        (!runs.is_empty())
            .then(|| runs.iter().map(|r| r.mean_sum_throughput).sum::<f64>() / runs.len() as f64)
    }

    pub fn mean_optimal(&self) -> Option<f64> {
        (!self.runs.is_empty())
            .then(|| self.runs.iter().map(|r| r.mean_optimal).sum::<f64>() / self.runs.len() as f64)
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

fn achieved(outcome: &SlotOutcome, objective: Objective) -> u32 {
    match objective {
        Objective::MaxTransmissions => outcome.slot_sum_throughput,
        Objective::MaxDistinctSemantics => outcome.delivered_semantics.len() as u32,
    }
}

struct Job {
    seed: u64,
    policy: PolicyKind,
}

fn run_job(
    config: &ExperimentConfig,
    job: &Job,
    optimal: &[u32],
) -> Result<(String, RunSummary), HarnessError> {
    let horizon = config.env.horizon;
    let window = config.final_window.min(horizon);
    let window_start = horizon - window;
    let n = config.env.n_users;
    let mut rows = String::new();
    let mut thr = vec![0u64; n];
    let mut ast = vec![0u64; n];
    let mut sum_window = 0.0;
    let mut ratio_window = 0.0;
    let mut violations = 0;
    simulate(&config.env, job.policy, &config.agent, job.seed, |o| {
        for u in 0..n {
            thr[u] += o.per_user_success[u] as u64;
            ast[u] += o.per_user_assisted[u] as u64;
        }
        let ratio = efficiency_ratio(&thr, &ast);
        let opt = optimal[o.slot as usize];
        if achieved(o, config.objective) > opt {
            violations += 1;
        }
        if o.slot >= window_start {
            sum_window += o.slot_sum_throughput as f64;
            ratio_window += ratio;
        }
        write!(rows, "{},{},{},{}", o.slot, job.seed, job.policy, o.slot_sum_throughput).unwrap();
        for &s in &o.per_user_success {
            write!(rows, ",{}", s as u8).unwrap();
        }
        for &a in &o.per_user_assisted {
            write!(rows, ",{a}").unwrap();
        }
        writeln!(rows, ",{ratio},{opt}").unwrap();
    })?;
    let w = window.max(1) as f64;
    let summary = RunSummary {
        policy: job.policy,
        seed: job.seed,
        window_start,
        window_slots: window,
        mean_sum_throughput: if window == 0 { 0.0 } else { sum_window / w },
        mean_optimal: mean(optimal[window_start as usize..].iter().map(|&v| v as f64)),
        mean_efficiency_ratio: if window == 0 { 0.0 } else { ratio_window / w },
        final_efficiency_ratio: efficiency_ratio(&thr, &ast),
        final_pooled_efficiency_ratio: pooled_efficiency_ratio(&thr, &ast),
        dominance_violations: violations,
    };
    Ok((rows, summary))
}

fn summary_row(policy: &str, seed: &str, r: &RunSummary) -> String {
    format!(
        "{policy},{seed},{},{},{},{},{},{},{}",
        r.window_start,
        r.window_slots,
        r.mean_sum_throughput,
        r.mean_optimal,
        r.mean_efficiency_ratio,
        r.final_efficiency_ratio,
        r.final_pooled_efficiency_ratio
    )
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Round 0 holds isolated local training with the whole local budget of the
/// schedule; rows 1.. follow the federated rounds.
pub fn run_federation(schedule: &FederationSchedule, seed: u64, config: &ExperimentConfig) -> Result<Vec<FederationRow>, HarnessError> {
    let d = schedule.dim;
    let k = schedule.clusters;
    let owned: Vec<Vec<usize>> = (0..schedule.users).map(|u| schedule.clusters_of(u)).collect();
    let data: Vec<_> = owned
        .iter()
        .enumerate()
        .map(|(u, cl)| gen_classes(cl, d, schedule.samples_per_class, schedule.spread, seed.wrapping_add(u as u64 + 1)))
        .collect();
    let all: Vec<usize> = (0..k).collect();
    let test = gen_classes(&all, d, schedule.samples_per_class, schedule.spread, seed ^ 0x7E57);
    let unseen = |u: usize| -> Vec<_> {
        test.iter()
            .filter(|i| !owned[u].contains(&i.true_semantic))
            .cloned()
            .collect()
    };
    let mut fed = Federation::new("semantic-classifier", d, k, schedule.learner.clone(), data, seed)?
        .with_execution(config.execution);
    let participants: Vec<usize> = (0..schedule.users).collect();

    let mut local = fed.clone();
    local.train_locally(&participants, schedule.local_steps * schedule.rounds as usize)?;
    let mut rows = vec![FederationRow {
        seed,
        round: 0,
        version: 0,
        trained_at: 0,
        global_accuracy: accuracy(&fed.users()[0].classifier, &test),
        mean_local_accuracy: mean(local.users().iter().map(|u| accuracy(&u.classifier, &test))),
        mean_unseen_accuracy: mean(
            local.users().iter().map(|u| accuracy(&u.classifier, &unseen(u.id))),
        ),
    }];
    for r in 1..=schedule.rounds {
        let (round, kb) = fed.round(&RoundConfig {
            participants: participants.clone(),
            local_steps: schedule.local_steps,
            slot: r * schedule.round_interval,
        })?;
        let global = fed.users()[0].classifier.clone();
        rows.push(FederationRow {
            seed,
            round: round.index,
            version: kb.version,
            trained_at: kb.trained_at,
            global_accuracy: accuracy(&global, &test),
            mean_local_accuracy: mean(fed.users().iter().map(|u| accuracy(&u.classifier, &test))),
            mean_unseen_accuracy: mean(
                fed.users().iter().map(|u| accuracy(&u.classifier, &unseen(u.id))),
            ),
        });
    }
    Ok(rows)
}

/// Runs every (seed, policy) pair, the optional federation schedule and the
/// optional orchestration scenario, and writes the CSV artifacts into
/// `config.out_dir` when set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let horizon = config.env.horizon;
    let mut report = ExperimentReport::default();

    let optimal = exec::try_map(config.execution, config.seeds.clone(), |seed| {
        let mut env = config.env.clone();
        env.seed = seed;
        optimal_trace(&env, horizon, config.objective, crate::exec::Execution::Sequential)
    })?;
    let jobs: Vec<(usize, Job)> = config
        .seeds
        .iter()
        .enumerate()
        .flat_map(|(si, &seed)| config.policies.iter().map(move |&policy| (si, Job { seed, policy })))
        .collect();
    let results = exec::try_map(config.execution, jobs, |(si, job)| run_job(config, &job, &optimal[si]))?;

    let mut metrics = metrics_header(config.env.n_users);
    metrics.push('\n');
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for (rows, s) in results {
        metrics.push_str(&rows);
        summary.push_str(&summary_row(s.policy.name(), &s.seed.to_string(), &s));
        summary.push('\n');
        report.runs.push(s);
    }
    for &policy in &config.policies {
        let runs: Vec<&RunSummary> = report.runs.iter().filter(|r| r.policy == policy).collect();
        let avg = |f: fn(&RunSummary) -> f64| mean(runs.iter().map(|r| f(r)));
        let agg = RunSummary {
            policy,
            seed: 0,
            window_start: runs[0].window_start,
            window_slots: runs[0].window_slots,
            mean_sum_throughput: avg(|r| r.mean_sum_throughput),
            mean_optimal: avg(|r| r.mean_optimal),
            mean_efficiency_ratio: avg(|r| r.mean_efficiency_ratio),
            final_efficiency_ratio: avg(|r| r.final_efficiency_ratio),
            final_pooled_efficiency_ratio: avg(|r| r.final_pooled_efficiency_ratio),
            dominance_violations: runs.iter().map(|r| r.dominance_violations).sum(),
        };
        summary.push_str(&summary_row(policy.name(), "mean", &agg));
        summary.push('\n');
    }

    let mut federation = None;
    if let Some(schedule) = &config.federation {
        let per_seed = exec::try_map(config.execution, config.seeds.clone(), |seed| {
            run_federation(schedule, seed, config)
        })?;
        let mut csv = String::from(FEDERATION_HEADER);
        csv.push('\n');
        for r in per_seed.into_iter().flatten() {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                r.seed, r.round, r.version, r.trained_at, r.global_accuracy, r.mean_local_accuracy, r.mean_unseen_accuracy
            )
            .unwrap();
            report.federation.push(r);
        }
        federation = Some(csv);
    }

    let mut events = None;
    if let Some(path) = &config.kbmano_scenario {
        let scenario = Scenario::load(path)?;
        let mut buf = Vec::new();
        write_event_log(&mut buf, &run_scenario(&scenario)?).expect("in-memory write");
        events = Some(String::from_utf8(buf).expect("ascii log"));
    }

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut emit = |suffix: &str, contents: &str| -> Result<(), HarnessError> {
            let path = dir.join(format!("{}_{suffix}.csv", config.name));
            write_file(&path, contents)?;
            report.files.push(path);
            Ok(())
        };
        emit("metrics", &metrics)?;
        emit("summary", &summary)?;
        if let Some(f) = &federation {
            emit("federation", f)?;
        }
        if let Some(e) = &events {
            emit("kbmano_events", e)?;
        }
    }
    Ok(report)
}
