//! The four experiments, their in-memory results, run comparison and the
//! artifact files they are written to.
//!
//! Each experiment fans one master seed out with [`SeedStreams`]: shared
//! state (datasets, the world model) draws from the master streams, and run
//! `i` of a bundle from `child(i)`. Runs execute on the rayon pool and are
//! collected in seed order, so results do not depend on scheduling.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ReplayProtocol, RunConfig};
use crate::dynaq::{run_schedule, AgentConfig, QBank, RunLog, Schedule};
use crate::galmo::{ExpertEnsemble, GalmoConfig, GalmoError};
use crate::maze::{Action, Maze, MazeError, TaskId};
use crate::replay::ReplaySummary;
use crate::rng::{SeedStreams, STREAM_ENV, STREAM_GALMO, STREAM_NETS, STREAM_SOFTMAX};
use crate::state::DecodedState;
use crate::world_model::{
    behavioral_stream, collect_dataset, multi_predecessor_pairs, partition, true_predecessor_sets, DatasetMode,
    EnsembleLog, TransitionSample, WorldModel,
};

/// Largest per-sample error of a converged ensemble.
pub const CONVERGED_ERROR: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Maze(#[from] MazeError),
    #[error(transparent)]
    Galmo(#[from] GalmoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed run log: {0}")]
    Json(#[from] serde_json::Error),
    #[error("run logs have schema versions {0} and {1}")]
    SchemaMismatch(u32, u32),
    #[error("no run logs to compare")]
    NoRuns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    GalmoGrowth,
    WorldModelOnlineVsOffline,
    QLearningVsDynaQ,
    ReplayStats,
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown experiment {0:?}")]
pub struct UnknownExperiment(pub String);

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::GalmoGrowth,
        ExperimentKind::WorldModelOnlineVsOffline,
        ExperimentKind::QLearningVsDynaQ,
        ExperimentKind::ReplayStats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GalmoGrowth => "galmo-growth",
            ExperimentKind::WorldModelOnlineVsOffline => "worldmodel-online-vs-offline",
            ExperimentKind::QLearningVsDynaQ => "qlearning-vs-dynaq",
            ExperimentKind::ReplayStats => "replay-stats",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = UnknownExperiment;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| UnknownExperiment(s.into()))
    }
}

pub fn load_maze(config: &RunConfig) -> Result<Maze, MazeError> {
    match &config.maze {
        Some(path) => Maze::load(path),
        None => Ok(Maze::default_layout()),
    }
}

/// Training set over all five tasks, drawn from the master env stream.
pub fn world_dataset(maze: &Maze, config: &RunConfig) -> Result<Vec<TransitionSample>, MazeError> {
    let mut rng = SeedStreams::new(config.seed).stream(STREAM_ENV);
    collect_dataset(maze, &TaskId::ALL, config.dataset, config.agent.reward_magnitude, &mut rng)
}

/// The off-line (shuffled) world model every agent of an experiment shares.
pub fn train_world_model(maze: &Maze, config: &RunConfig) -> Result<(WorldModel, Vec<EnsembleLog>), ExperimentError> {
    let data = world_dataset(maze, config)?;
    let mut rng = SeedStreams::new(config.seed).stream(STREAM_GALMO);
    Ok(WorldModel::learn(&data, &config.world, &mut rng)?)
}

impl ExperimentError {
    /// The ensemble left behind by an aborted runaway growth.
    pub fn runaway_checkpoint(&self) -> Option<&ExpertEnsemble> {
        match self {
            ExperimentError::Galmo(GalmoError::RunawayGrowth { checkpoint, .. }) => Some(checkpoint),
            _ => None,
        }
    }
}

/// Writes the runaway checkpoint of `err`, if any, as JSON under `dir`.
pub fn dump_checkpoint(dir: &Path, err: &ExperimentError) -> Result<Option<PathBuf>, ExperimentError> {
    let Some(ens) = err.runaway_checkpoint() else {
        return Ok(None);
    };
    std::fs::create_dir_all(dir)?;
    let path = dir.join("runaway_checkpoint.json");
    std::fs::write(&path, serde_json::to_string(ens)?)?;
    Ok(Some(path))
}

// ---------------------------------------------------------------------------
// GALMO growth

/// One predecessor ensemble trained on the alternation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRun {
    pub run: usize,
    pub seed: u64,
    pub action: Action,
    pub experts: usize,
    /// Largest final per-sample error.
    pub max_error: f64,
    /// Epochs (from 1) at which the ensemble grew.
    pub growth_epochs: Vec<usize>,
}

impl GrowthRun {
    pub fn converged(&self) -> bool {
        self.max_error < CONVERGED_ERROR
    }
}

pub fn galmo_growth(maze: &Maze, config: &RunConfig) -> Result<Vec<GrowthRun>, ExperimentError> {
    let master = SeedStreams::new(config.seed);
    let data = collect_dataset(
        maze,
        &[TaskId::Alternation],
        config.dataset,
        config.agent.reward_magnitude,
        &mut master.stream(STREAM_ENV),
    )?;
    let (preds, _) = partition(&data, config.world.reward_input);
    let dim = maze.state_dim();
    let runs: Vec<Vec<GrowthRun>> = (0..config.seeds)
        .into_par_iter()
        .map(|run| {
            let streams = master.child(run as u64);
            let mut rng = streams.stream(STREAM_GALMO);
            let w = &config.world;
            Action::ALL
                .into_iter()
                .map(|action| {
                    let mut ens = ExpertEnsemble::new(w.predecessor_net, w.gate_net, dim, dim, &mut rng);
                    let report = ens.train(&preds[action.index()], &w.galmo, &mut rng)?;
                    let growth_epochs = report
                        .expert_history
                        .iter()
                        .enumerate()
                        .filter(|&(i, &n)| n > if i == 0 { 1 } else { report.expert_history[i - 1] })
                        .map(|(i, _)| i + 1)
                        .collect();
                    Ok(GrowthRun {
                        run,
                        seed: streams.master(),
                        action,
                        experts: ens.len(),
                        max_error: report.final_errors.iter().copied().fold(0.0, f64::max),
                        growth_epochs,
                    })
                })
                .collect::<Result<Vec<_>, GalmoError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(runs.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// Off-line vs on-line world model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRewardError {
    pub task: TaskId,
    /// Max |predicted − true| reward over the task's states and actions.
    pub offline: f64,
    pub online: f64,
}

/// Predicted vs true predecessor set of one multi-predecessor pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPredecessorCheck {
    pub successor: Option<DecodedState>,
    pub action: Action,
    pub expected: BTreeSet<DecodedState>,
    /// Distinct true predecessor vectors. Can exceed the decoded set: a
    /// blocked arm changes geodesic distances, hence the place code of a
    /// cell, so one decoded predecessor may have one vector per task.
    pub distinct_vectors: usize,
    /// Decoded predictions; `None` marks an undecodable output.
    pub predicted: Vec<Option<DecodedState>>,
}

impl MultiPredecessorCheck {
    /// One prediction per true vector, and the decoded sets equal.
    pub fn exact(&self) -> bool {
        let decoded: Option<BTreeSet<DecodedState>> = self.predicted.iter().copied().collect();
        self.predicted.len() == self.distinct_vectors && decoded.as_ref() == Some(&self.expected)
    }

    /// More than one decoded predecessor, not just several encodings of one.
    pub fn is_decoded_multi(&self) -> bool {
        self.expected.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModelReport {
    pub tasks: Vec<TaskRewardError>,
    pub multi_predecessors: Vec<MultiPredecessorCheck>,
    /// (ensemble kind, action, experts) of the off-line model.
    pub offline_experts: Vec<(String, Action, usize)>,
}

impl WorldModelReport {
    pub fn max_offline(&self) -> f64 {
        self.tasks.iter().map(|t| t.offline).fold(0.0, f64::max)
    }
}

/// Max reward-prediction error over every (state, action) reward target
/// the samples define.
pub fn max_reward_error(wm: &WorldModel, samples: &[TransitionSample]) -> f64 {
    let (_, rewards) = partition(samples, wm.reward_input());
    let mut worst = 0.0f64;
    for a in Action::ALL {
        for s in &rewards[a.index()] {
            let state = crate::state::StateVector::new(s.input.clone());
            worst = worst.max((wm.predict_reward(&state, a) - s.output[0]).abs());
        }
    }
    worst
}

/// Checks every multi-predecessor pair of `samples` against the model.
pub fn check_multi_predecessors(wm: &WorldModel, samples: &[TransitionSample]) -> Vec<MultiPredecessorCheck> {
    let truth = true_predecessor_sets(samples);
    multi_predecessor_pairs(samples)
        .into_iter()
        .map(|(succ, action, distinct_vectors)| {
            let expected = truth
                .iter()
                .find(|(s, a, _)| *s == succ && *a == action)
                .map(|(_, _, set)| set.clone())
                .unwrap_or_default();
            let predicted = wm.predict_predecessors(&succ, action).iter().map(DecodedState::of).collect();
            MultiPredecessorCheck { successor: DecodedState::of(&succ), action, expected, distinct_vectors, predicted }
        })
        .collect()
}

/// Off-line model against a control that sees the lap-ordered behavioural
/// stream once, in order, with no reshuffling.
pub fn worldmodel_online_vs_offline(maze: &Maze, config: &RunConfig) -> Result<WorldModelReport, ExperimentError> {
    let (offline, logs) = train_world_model(maze, config)?;
    compare_with_online(maze, config, &offline, &logs)
}

/// [`worldmodel_online_vs_offline`] for an already trained off-line model.
pub fn compare_with_online(
    maze: &Maze,
    config: &RunConfig,
    offline: &WorldModel,
    logs: &[EnsembleLog],
) -> Result<WorldModelReport, ExperimentError> {
    let master = SeedStreams::new(config.seed);
    let schedule: Schedule = TaskId::ALL.iter().map(|&t| (t, config.control_laps)).collect();
    let mut env = master.child(u64::MAX).stream(STREAM_ENV);
    let stream = behavioral_stream(maze, &schedule, config.agent.reward_magnitude, &mut env)?;
    let online_config = crate::world_model::WorldModelConfig {
        galmo: GalmoConfig { reshuffle: false, max_epoch: 1, ..config.world.galmo },
        ..config.world
    };
    let (online, _) = WorldModel::learn(&stream, &online_config, &mut master.child(u64::MAX).stream(STREAM_GALMO))?;

    let truth = collect_dataset(maze, &TaskId::ALL, DatasetMode::Exhaustive, config.agent.reward_magnitude, &mut env)?;
    let tasks = TaskId::ALL
        .iter()
        .map(|&task| {
            let samples: Vec<TransitionSample> = truth.iter().filter(|s| s.task == task).cloned().collect();
            TaskRewardError {
                task,
                offline: max_reward_error(offline, &samples),
                online: max_reward_error(&online, &samples),
            }
        })
        .collect();
    Ok(WorldModelReport {
        tasks,
        multi_predecessors: check_multi_predecessors(offline, &truth),
        offline_experts: logs
            .iter()
            .map(|l| (l.kind.clone(), l.action, *l.report.expert_history.last().unwrap_or(&1)))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Learning speed

/// Per-trial mean and sample standard deviation over equally long curves.
pub fn mean_std(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let n = curves.len() as f64;
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for t in 0..len {
        let m = curves.iter().map(|c| c[t]).sum::<f64>() / n;
        mean[t] = m;
        if curves.len() > 1 {
            std[t] = (curves.iter().map(|c| (c[t] - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        }
    }
    (mean, std)
}

/// Centred moving average, the window truncated at both ends.
pub fn centered_moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(xs.len() - 1);
            xs[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// First trial (counting from 1) at which the curve is at most `threshold`.
pub fn trials_to_threshold(curve: &[f64], threshold: f64) -> Option<usize> {
    curve.iter().position(|&e| e <= threshold).map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedArm {
    pub budget: usize,
    pub logs: Vec<RunLog>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub trials_to_threshold: Option<usize>,
}

impl SpeedArm {
    fn new(budget: usize, logs: Vec<RunLog>, window: usize, threshold: f64) -> SpeedArm {
        let curves: Vec<Vec<f64>> = logs.iter().map(RunLog::t2_errors).collect();
        let (mean, std) = mean_std(&curves);
        let smoothed = centered_moving_average(&mean, window);
        let trials_to_threshold = trials_to_threshold(&smoothed, threshold);
        SpeedArm { budget, logs, mean, std, smoothed, trials_to_threshold }
    }

    /// Smoothed mean error at a trial (counting from 1).
    pub fn smoothed_at(&self, trial: usize) -> Option<f64> {
        self.smoothed.get(trial.checked_sub(1)?).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedReport {
    pub qlearning: SpeedArm,
    pub dynaq: SpeedArm,
}

impl SpeedReport {
    /// Q-learning trials-to-threshold over Dyna-Q's, when both got there.
    pub fn speedup(&self) -> Option<f64> {
        Some(self.qlearning.trials_to_threshold? as f64 / self.dynaq.trials_to_threshold? as f64)
    }
}

/// Runs a bundle of agents on one schedule, run `i` seeded from `child(i)`.
pub fn run_agents(
    maze: &Maze,
    schedule: &[(TaskId, usize)],
    agent: &AgentConfig,
    world: Option<&WorldModel>,
    config: &RunConfig,
) -> Result<Vec<RunLog>, MazeError> {
    let master = SeedStreams::new(config.seed);
    (0..config.seeds)
        .into_par_iter()
        .map(|i| {
            let streams = master.child(i as u64);
            let mut q = QBank::new(agent.q_net, maze.state_dim(), &mut streams.stream(STREAM_NETS));
            let mut rng = streams.stream(STREAM_SOFTMAX);
            run_schedule(maze, schedule, agent, &mut q, world, streams.master(), &mut rng)
        })
        .collect()
}

pub fn qlearning_vs_dynaq(
    maze: &Maze,
    config: &RunConfig,
    world: &WorldModel,
) -> Result<SpeedReport, ExperimentError> {
    let sp = config.speed;
    let schedule = [(sp.task, sp.trials)];
    let ql = AgentConfig { budget: 0, ..config.agent };
    let ql_logs = run_agents(maze, &schedule, &ql, None, config)?;
    let dq_logs = run_agents(maze, &schedule, &config.agent, Some(world), config)?;
    Ok(SpeedReport {
        qlearning: SpeedArm::new(0, ql_logs, sp.window, sp.threshold),
        dynaq: SpeedArm::new(config.agent.budget, dq_logs, sp.window, sp.threshold),
    })
}

// ---------------------------------------------------------------------------
// Replay statistics

/// Task blocks of the recording protocol, and the trial index at which the
/// recorded sessions begin.
pub fn replay_schedule(p: &ReplayProtocol) -> (Schedule, usize) {
    let mut schedule: Schedule = p.opening.clone();
    let cycle = [TaskId::Right, TaskId::Left, TaskId::Alternation];
    for day in 0..p.pretrain_days {
        schedule.push((cycle[day % cycle.len()], p.day_trials));
    }
    let recorded_from = schedule.iter().map(|(_, n)| n).sum();
    let before = (p.session_trials as f64 * p.switch_fraction).round() as usize;
    for &(first, second) in &p.sessions {
        schedule.push((first, before));
        schedule.push((second, p.session_trials - before));
    }
    schedule.retain(|&(_, n)| n > 0);
    (schedule, recorded_from)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    /// Runs with replay events restricted to the recorded sessions.
    pub logs: Vec<RunLog>,
    pub recorded_from: usize,
    pub summary: ReplaySummary,
}

pub fn replay_stats(maze: &Maze, config: &RunConfig, world: &WorldModel) -> Result<ReplayReport, ExperimentError> {
    let (schedule, recorded_from) = replay_schedule(&config.replay);
    let mut logs = run_agents(maze, &schedule, &config.agent, Some(world), config)?;
    for log in &mut logs {
        log.events.retain(|e| e.trial >= recorded_from);
    }
    let summary = ReplaySummary::of_runs(logs.iter().map(|l| l.events.as_slice()), maze);
    Ok(ReplayReport { logs, recorded_from, summary })
}

// ---------------------------------------------------------------------------
// Dispatch and artifacts

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Growth(Vec<GrowthRun>),
    WorldModel(WorldModelReport),
    Speed(SpeedReport),
    Replay(ReplayReport),
}

pub fn run_experiment(kind: ExperimentKind, config: &RunConfig) -> Result<ExperimentOutput, ExperimentError> {
    let maze = load_maze(config)?;
    Ok(match kind {
        ExperimentKind::GalmoGrowth => ExperimentOutput::Growth(galmo_growth(&maze, config)?),
        ExperimentKind::WorldModelOnlineVsOffline => {
            ExperimentOutput::WorldModel(worldmodel_online_vs_offline(&maze, config)?)
        }
        ExperimentKind::QLearningVsDynaQ => {
            let (wm, _) = train_world_model(&maze, config)?;
            ExperimentOutput::Speed(qlearning_vs_dynaq(&maze, config, &wm)?)
        }
        ExperimentKind::ReplayStats => {
            let (wm, _) = train_world_model(&maze, config)?;
            ExperimentOutput::Replay(replay_stats(&maze, config, &wm)?)
        }
    })
}

/// One JSON object per line.
pub fn logs_to_jsonl(logs: &[RunLog]) -> String {
    let mut out = String::new();
    for log in logs {
        out.push_str(&serde_json::to_string(log).expect("run logs serialize"));
        out.push('\n');
    }
    out
}

pub fn read_logs(text: &str) -> Result<Vec<RunLog>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

fn decoded_name(d: &Option<DecodedState>) -> String {
    match d {
        Some(d) => format!("{}/{}/{}", d.cell.0, d.mem_l_halves, d.mem_r_halves),
        None => "null".into(),
    }
}

fn opt(n: Option<usize>) -> String {
    n.map_or("none".into(), |n| n.to_string())
}

impl ExperimentOutput {
    /// Artifact files as (name, contents).
    pub fn files(&self) -> Vec<(&'static str, String)> {
        match self {
            ExperimentOutput::Growth(runs) => {
                let mut csv = String::from("run,seed,action,experts,max_error,converged,growth_epochs\n");
                for r in runs {
                    let epochs: Vec<String> = r.growth_epochs.iter().map(usize::to_string).collect();
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{}",
                        r.run,
                        r.seed,
                        r.action,
                        r.experts,
                        r.max_error,
                        r.converged(),
                        epochs.join(" ")
                    );
                }
                vec![("growth.csv", csv)]
            }
            ExperimentOutput::WorldModel(r) => {
                let mut errors = String::from("task,offline_max_error,online_max_error\n");
                for t in &r.tasks {
                    let _ = writeln!(errors, "{},{},{}", t.task.number(), t.offline, t.online);
                }
                let mut multi = String::from("successor,action,expected,distinct_vectors,predicted,exact\n");
                for m in &r.multi_predecessors {
                    let expected: Vec<String> = m.expected.iter().map(|d| decoded_name(&Some(*d))).collect();
                    let predicted: Vec<String> = m.predicted.iter().map(decoded_name).collect();
                    let _ = writeln!(
                        multi,
                        "{},{},{},{},{},{}",
                        decoded_name(&m.successor),
                        m.action,
                        expected.join(" "),
                        m.distinct_vectors,
                        predicted.join(" "),
                        m.exact()
                    );
                }
                let mut experts = String::from("kind,action,experts\n");
                for (kind, action, n) in &r.offline_experts {
                    let _ = writeln!(experts, "{kind},{action},{n}");
                }
                vec![("reward_errors.csv", errors), ("multi_predecessors.csv", multi), ("experts.csv", experts)]
            }
            ExperimentOutput::Speed(r) => {
                let mut curves =
                    String::from("trial,qlearning_mean,qlearning_std,qlearning_smoothed,dynaq_mean,dynaq_std,dynaq_smoothed\n");
                let (q, d) = (&r.qlearning, &r.dynaq);
                for t in 0..q.mean.len().min(d.mean.len()) {
                    let _ = writeln!(
                        curves,
                        "{},{},{},{},{},{},{}",
                        t + 1,
                        q.mean[t],
                        q.std[t],
                        q.smoothed[t],
                        d.mean[t],
                        d.std[t],
                        d.smoothed[t]
                    );
                }
                let mut summary = String::from("agent,budget,trials_to_threshold\n");
                let _ = writeln!(summary, "qlearning,{},{}", q.budget, opt(q.trials_to_threshold));
                let _ = writeln!(summary, "dynaq,{},{}", d.budget, opt(d.trials_to_threshold));
                vec![
                    ("curves.csv", curves),
                    ("summary.csv", summary),
                    ("qlearning.jsonl", logs_to_jsonl(&q.logs)),
                    ("dynaq.jsonl", logs_to_jsonl(&d.logs)),
                ]
            }
            ExperimentOutput::Replay(r) => {
                vec![("replay_summary.csv", r.summary.to_csv()), ("runs.jsonl", logs_to_jsonl(&r.logs))]
            }
        }
    }

    /// Short human-readable result lines.
    pub fn summary_lines(&self) -> Vec<String> {
        match self {
            ExperimentOutput::Growth(runs) => runs
                .iter()
                .map(|r| {
                    format!("run {} action {}: {} experts, max error {:.4}", r.run, r.action, r.experts, r.max_error)
                })
                .collect(),
            ExperimentOutput::WorldModel(r) => {
                let mut lines: Vec<String> = r
                    .tasks
                    .iter()
                    .map(|t| {
                        format!(
                            "task {}: max reward error off-line {:.4}, on-line {:.4}",
                            t.task.number(),
                            t.offline,
                            t.online
                        )
                    })
                    .collect();
                let exact = r.multi_predecessors.iter().filter(|m| m.exact()).count();
                lines.push(format!("multi-predecessor pairs predicted exactly: {exact}/{}", r.multi_predecessors.len()));
                lines
            }
            ExperimentOutput::Speed(r) => vec![
                format!("q-learning trials to threshold: {}", opt(r.qlearning.trials_to_threshold)),
                format!("dyna-q trials to threshold: {}", opt(r.dynaq.trials_to_threshold)),
            ],
            ExperimentOutput::Replay(r) => r
                .summary
                .tasks
                .iter()
                .map(|(task, t)| {
                    format!(
                        "task {}: {} events, random {:.3}, backward {:.3}, forward {:.3}",
                        task.number(),
                        t.total,
                        t.random_fraction(),
                        t.direction_fraction(crate::replay::Direction::Backward),
                        t.direction_fraction(crate::replay::Direction::Forward)
                    )
                })
                .collect(),
        }
    }
}

/// Writes the artifacts and the effective configuration into `dir`.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput, config: &RunConfig) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), config.dump())?;
    for (name, contents) in output.files() {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Run comparison

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub mean_a: Vec<f64>,
    pub std_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub std_b: Vec<f64>,
    /// Area under each mean T2-error curve.
    pub auc_a: f64,
    pub auc_b: f64,
    /// Trials (from 1) whose mean errors differ.
    pub differing: Vec<usize>,
}

impl Comparison {
    pub fn is_identical(&self) -> bool {
        self.differing.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,mean_a,std_a,mean_b,std_b,diff\n");
        for t in 0..self.mean_a.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t + 1,
                self.mean_a[t],
                self.std_a[t],
                self.mean_b[t],
                self.std_b[t],
                self.mean_b[t] - self.mean_a[t]
            );
        }
        out
    }
}

/// Trial-aligned T2-error comparison of two run bundles, over the trials
/// every run has.
pub fn compare_runs(a: &[RunLog], b: &[RunLog]) -> Result<Comparison, ExperimentError> {
    let first = a.first().or(b.first()).ok_or(ExperimentError::NoRuns)?.schema;
    if a.is_empty() || b.is_empty() {
        return Err(ExperimentError::NoRuns);
    }
    if let Some(other) = a.iter().chain(b).find(|l| l.schema != first) {
        return Err(ExperimentError::SchemaMismatch(first, other.schema));
    }
    let len = a.iter().chain(b).map(|l| l.trials.len()).min().unwrap_or(0);
    let curves = |logs: &[RunLog]| -> Vec<Vec<f64>> {
        logs.iter()
            .map(|l| {
                let mut c = l.t2_errors();
                c.truncate(len);
                c
            })
            .collect()
    };
    let (mean_a, std_a) = mean_std(&curves(a));
    let (mean_b, std_b) = mean_std(&curves(b));
    let differing = (0..len).filter(|&t| mean_a[t] != mean_b[t]).map(|t| t + 1).collect();
    Ok(Comparison {
        auc_a: mean_a.iter().sum(),
        auc_b: mean_b.iter().sum(),
        mean_a,
        std_a,
        mean_b,
        std_b,
        differing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_truncates_at_edges() {
        let xs = [1.0, 0.0, 0.0, 0.0, 1.0];
        let m = centered_moving_average(&xs, 3);
        assert_eq!(m, vec![0.5, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.5]);
        assert_eq!(centered_moving_average(&xs, 1), xs.to_vec());
    }

    #[test]
    fn threshold_crossing_is_one_based() {
        assert_eq!(trials_to_threshold(&[0.9, 0.5, 0.2, 0.1], 0.2), Some(3));
        assert_eq!(trials_to_threshold(&[0.9, 0.5], 0.2), None);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(m, vec![0.5, 0.0]);
        assert!((s[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn protocol_schedule() {
        let p = RunConfig::default().replay;
        let (schedule, from) = replay_schedule(&p);
        assert_eq!(from, 80 + 18 * 40);
        assert_eq!(schedule.len(), 2 + 18 + 12);
        assert_eq!(schedule[2], (TaskId::Right, 40));
        assert_eq!(schedule[4], (TaskId::Alternation, 40));
        assert_eq!(&schedule[20..22], &[(TaskId::Right, 20), (TaskId::Left, 20)]);
    }

    #[test]
    fn experiment_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>(), Ok(k));
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
    }
}
