//! Flat `key = value` run configuration.
//!
//! Every key has a default; with no overrides the network bundles, epoch
//! count, outlier gain and replay budget are the published parameter table.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::dynaq::{AgentConfig, BetaAnneal, ReplayTargets};
use crate::maze::TaskId;
use crate::net::{Loss, NetParams};
use crate::world_model::{DatasetMode, RewardInput, WorldModelConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
}

/// Learning-speed comparison settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedConfig {
    pub task: TaskId,
    pub trials: usize,
    /// Error level the smoothed mean curve must reach.
    pub threshold: f64,
    /// Width of the centred moving average applied to the mean curve.
    pub window: usize,
}

/// Recording-protocol settings for the replay statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayProtocol {
    /// Opening days on the blocked-arm tasks, as (task, trials).
    pub opening: Vec<(TaskId, usize)>,
    /// Days cycling through tasks 3, 4, 5 before recording.
    pub pretrain_days: usize,
    pub day_trials: usize,
    /// Recording sessions as (first task, task after the switch).
    pub sessions: Vec<(TaskId, TaskId)>,
    pub session_trials: usize,
    /// Position of the contingency switch within a session, as a fraction.
    pub switch_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Maze layout file; the built-in layout when absent.
    pub maze: Option<PathBuf>,
    pub seed: u64,
    pub seeds: usize,
    pub agent: AgentConfig,
    pub world: WorldModelConfig,
    /// How the world model's training set is gathered.
    pub dataset: DatasetMode,
    /// Laps per task of the lap-ordered stream the on-line control learns from.
    pub control_laps: usize,
    pub speed: SpeedConfig,
    pub replay: ReplayProtocol,
}

impl Default for RunConfig {
    fn default() -> Self {
        use TaskId::*;
        RunConfig {
            maze: None,
            seed: 1,
            seeds: 10,
            agent: AgentConfig::default(),
            world: WorldModelConfig::default(),
            dataset: DatasetMode::Exhaustive,
            control_laps: 40,
            speed: SpeedConfig { task: Alternation, trials: 1500, threshold: 0.2, window: 51 },
            replay: ReplayProtocol {
                opening: vec![(RightBlocked, 40), (LeftBlocked, 40)],
                pretrain_days: 18,
                day_trials: 40,
                sessions: vec![
                    (Right, Left),
                    (Left, Alternation),
                    (Alternation, Right),
                    (Left, Right),
                    (Alternation, Left),
                    (Right, Alternation),
                ],
                session_trials: 40,
                switch_fraction: 0.5,
            },
        }
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.into() }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| bad(key, value, e.to_string()))
}

fn flag(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn optional_count(key: &str, value: &str) -> Result<Option<usize>, ConfigError> {
    if value == "none" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn task(key: &str, value: &str) -> Result<TaskId, ConfigError> {
    num::<u8>(key, value).ok().and_then(TaskId::from_number).ok_or_else(|| bad(key, value, "expected a task number 1-5"))
}

fn loss_name(l: Loss) -> &'static str {
    match l {
        Loss::Squared => "squared",
        Loss::CrossEntropy => "cross-entropy",
    }
}

fn set_net(p: &mut NetParams, field: &str, key: &str, value: &str) -> Result<(), ConfigError> {
    match field {
        "hidden" => p.hidden = num(key, value)?,
        "init_bound" => p.init_bound = num(key, value)?,
        "learning_rate" => p.learning_rate = num(key, value)?,
        "hidden_slope" => p.hidden_slope = num(key, value)?,
        "output_slope" => p.output_slope = num(key, value)?,
        "loss" => {
            p.loss = match value {
                "squared" => Loss::Squared,
                "cross-entropy" => Loss::CrossEntropy,
                _ => return Err(bad(key, value, "expected squared or cross-entropy")),
            }
        }
        _ => return Err(ConfigError::UnknownKey(key.into())),
    }
    Ok(())
}

fn dump_net(out: &mut String, prefix: &str, p: &NetParams) {
    let _ = writeln!(out, "{prefix}.hidden = {}", p.hidden);
    let _ = writeln!(out, "{prefix}.init_bound = {}", p.init_bound);
    let _ = writeln!(out, "{prefix}.learning_rate = {}", p.learning_rate);
    let _ = writeln!(out, "{prefix}.hidden_slope = {}", p.hidden_slope);
    let _ = writeln!(out, "{prefix}.output_slope = {}", p.output_slope);
    let _ = writeln!(out, "{prefix}.loss = {}", loss_name(p.loss));
}

fn task_pairs(key: &str, value: &str, sep: char) -> Result<Vec<(TaskId, String)>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (a, b) = item.split_once(sep).ok_or_else(|| bad(key, value, format!("expected items like 3{sep}4")))?;
            Ok((task(key, a.trim())?, b.trim().to_string()))
        })
        .collect()
}

impl RunConfig {
    /// Defaults overridden by every `key = value` line of `text`. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: line.into() })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 0, text: pair.into() })?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let a = &mut self.agent;
        let g = &mut self.world.galmo;
        match key {
            "maze" => self.maze = if value == "builtin" { None } else { Some(PathBuf::from(value)) },
            "seed" => self.seed = num(key, value)?,
            "seeds" => self.seeds = num(key, value)?,
            "gamma" => a.gamma = num(key, value)?,
            "beta" => a.beta = num(key, value)?,
            "beta_anneal" => {
                a.beta_anneal = if value == "none" {
                    None
                } else {
                    let (s, t) = value.split_once(':').ok_or_else(|| bad(key, value, "expected start:trials or none"))?;
                    Some(BetaAnneal { start: num(key, s.trim())?, trials: num(key, t.trim())? })
                }
            }
            "budget" => a.budget = num(key, value)?,
            "reward_magnitude" => a.reward_magnitude = num(key, value)?,
            "replay_targets" => {
                a.replay_targets = match value {
                    "matching" => ReplayTargets::Matching,
                    "all-actions" => ReplayTargets::AllActions,
                    _ => return Err(bad(key, value, "expected matching or all-actions")),
                }
            }
            "coalesce" => a.coalesce = flag(key, value)?,
            "snap" => a.snap = flag(key, value)?,
            "galmo.w" => g.w = num(key, value)?,
            "galmo.max_epoch" => g.max_epoch = num(key, value)?,
            "galmo.gate_threshold" => g.gate_threshold = num(key, value)?,
            "galmo.reshuffle" => g.reshuffle = flag(key, value)?,
            "galmo.max_experts" => g.max_experts = optional_count(key, value)?,
            "galmo.warmup_fraction" => g.warmup_fraction = num(key, value)?,
            "galmo.settle_epochs" => g.settle_epochs = num(key, value)?,
            "galmo.min_outlier_error" => g.min_outlier_error = num(key, value)?,
            "galmo.single_growth" => g.single_growth = flag(key, value)?,
            "world.reward_input" => {
                self.world.reward_input = match value {
                    "arrival" => RewardInput::Arrival,
                    "departure" => RewardInput::Departure,
                    _ => return Err(bad(key, value, "expected arrival or departure")),
                }
            }
            "world.epsilon" => self.world.epsilon = num(key, value)?,
            "world.reward_max_experts" => self.world.reward_max_experts = optional_count(key, value)?,
            "dataset" => {
                self.dataset = match value {
                    "exhaustive" => DatasetMode::Exhaustive,
                    _ => match value.strip_prefix("behavioral:") {
                        Some(laps) => DatasetMode::Behavioral { laps: num(key, laps)? },
                        None => return Err(bad(key, value, "expected exhaustive or behavioral:<laps>")),
                    },
                }
            }
            "control.laps" => self.control_laps = num(key, value)?,
            "speed.task" => self.speed.task = task(key, value)?,
            "speed.trials" => self.speed.trials = num(key, value)?,
            "speed.threshold" => self.speed.threshold = num(key, value)?,
            "speed.window" => self.speed.window = num(key, value)?,
            "replay.opening" => {
                self.replay.opening = task_pairs(key, value, ':')?
                    .into_iter()
                    .map(|(t, n)| Ok((t, num(key, &n)?)))
                    .collect::<Result<_, ConfigError>>()?
            }
            "replay.pretrain_days" => self.replay.pretrain_days = num(key, value)?,
            "replay.day_trials" => self.replay.day_trials = num(key, value)?,
            "replay.sessions" => {
                self.replay.sessions = task_pairs(key, value, '-')?
                    .into_iter()
                    .map(|(t, b)| Ok((t, task(key, &b)?)))
                    .collect::<Result<_, ConfigError>>()?
            }
            "replay.session_trials" => self.replay.session_trials = num(key, value)?,
            "replay.switch_fraction" => self.replay.switch_fraction = num(key, value)?,
            _ => {
                let (prefix, field) = key.split_once('.').ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
                let p = match prefix {
                    "q" => &mut self.agent.q_net,
                    "p" => &mut self.world.predecessor_net,
                    "r" => &mut self.world.reward_net,
                    "g" => &mut self.world.gate_net,
                    _ => return Err(ConfigError::UnknownKey(key.into())),
                };
                set_net(p, field, key, value)?;
            }
        }
        self.validate_key(key, value)
    }

    fn validate_key(&self, key: &str, value: &str) -> Result<(), ConfigError> {
        let a = &self.agent;
        let ok = match key {
            "gamma" => (0.0..1.0).contains(&a.gamma),
            "seeds" => self.seeds > 0,
            "galmo.gate_threshold" => (0.0..1.0).contains(&self.world.galmo.gate_threshold),
            "galmo.warmup_fraction" => (0.0..=1.0).contains(&self.world.galmo.warmup_fraction),
            "replay.switch_fraction" => (0.0..=1.0).contains(&self.replay.switch_fraction),
            "speed.window" => self.speed.window > 0,
            k if k.ends_with(".hidden") => value != "0",
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(bad(key, value, "out of range"))
        }
    }

    /// Every key with its effective value, in a fixed order; parsing the
    /// dump reproduces the configuration.
    pub fn dump(&self) -> String {
        let a = &self.agent;
        let g = &self.world.galmo;
        let mut out = String::new();
        let maze = self.maze.as_ref().map_or("builtin".to_string(), |p| p.display().to_string());
        let _ = writeln!(out, "maze = {maze}");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "seeds = {}", self.seeds);
        let _ = writeln!(out, "gamma = {}", a.gamma);
        let _ = writeln!(out, "beta = {}", a.beta);
        match a.beta_anneal {
            Some(b) => writeln!(out, "beta_anneal = {}:{}", b.start, b.trials),
            None => writeln!(out, "beta_anneal = none"),
        }
        .ok();
        let _ = writeln!(out, "budget = {}", a.budget);
        let _ = writeln!(out, "reward_magnitude = {}", a.reward_magnitude);
        let targets = match a.replay_targets {
            ReplayTargets::Matching => "matching",
            ReplayTargets::AllActions => "all-actions",
        };
        let _ = writeln!(out, "replay_targets = {targets}");
        let _ = writeln!(out, "coalesce = {}", a.coalesce);
        let _ = writeln!(out, "snap = {}", a.snap);
        dump_net(&mut out, "q", &a.q_net);
        dump_net(&mut out, "p", &self.world.predecessor_net);
        dump_net(&mut out, "r", &self.world.reward_net);
        dump_net(&mut out, "g", &self.world.gate_net);
        let _ = writeln!(out, "galmo.w = {}", g.w);
        let _ = writeln!(out, "galmo.max_epoch = {}", g.max_epoch);
        let _ = writeln!(out, "galmo.gate_threshold = {}", g.gate_threshold);
        let _ = writeln!(out, "galmo.reshuffle = {}", g.reshuffle);
        let _ = writeln!(out, "galmo.max_experts = {}", g.max_experts.map_or("none".into(), |n| n.to_string()));
        let _ = writeln!(out, "galmo.warmup_fraction = {}", g.warmup_fraction);
        let _ = writeln!(out, "galmo.settle_epochs = {}", g.settle_epochs);
        let _ = writeln!(out, "galmo.min_outlier_error = {}", g.min_outlier_error);
        let _ = writeln!(out, "galmo.single_growth = {}", g.single_growth);
        let input = match self.world.reward_input {
            RewardInput::Arrival => "arrival",
            RewardInput::Departure => "departure",
        };
        let _ = writeln!(out, "world.reward_input = {input}");
        let _ = writeln!(out, "world.epsilon = {}", self.world.epsilon);
        let cap = self.world.reward_max_experts.map_or("none".into(), |n| n.to_string());
        let _ = writeln!(out, "world.reward_max_experts = {cap}");
        match self.dataset {
            DatasetMode::Exhaustive => writeln!(out, "dataset = exhaustive"),
            DatasetMode::Behavioral { laps } => writeln!(out, "dataset = behavioral:{laps}"),
        }
        .ok();
        let _ = writeln!(out, "control.laps = {}", self.control_laps);
        let _ = writeln!(out, "speed.task = {}", self.speed.task.number());
        let _ = writeln!(out, "speed.trials = {}", self.speed.trials);
        let _ = writeln!(out, "speed.threshold = {}", self.speed.threshold);
        let _ = writeln!(out, "speed.window = {}", self.speed.window);
        let r = &self.replay;
        let opening: Vec<String> = r.opening.iter().map(|(t, n)| format!("{}:{n}", t.number())).collect();
        let _ = writeln!(out, "replay.opening = {}", opening.join(","));
        let _ = writeln!(out, "replay.pretrain_days = {}", r.pretrain_days);
        let _ = writeln!(out, "replay.day_trials = {}", r.day_trials);
        let sessions: Vec<String> = r.sessions.iter().map(|(a, b)| format!("{}-{}", a.number(), b.number())).collect();
        let _ = writeln!(out, "replay.sessions = {}", sessions.join(","));
        let _ = writeln!(out, "replay.session_trials = {}", r.session_trials);
        let _ = writeln!(out, "replay.switch_fraction = {}", r.switch_fraction);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("q.loss", "cross-entropy").unwrap();
        cfg.set("galmo.max_experts", "5").unwrap();
        cfg.set("dataset", "behavioral:12").unwrap();
        cfg.set("replay.sessions", "3-5,5-4").unwrap();
        cfg.set("beta_anneal", "2:100").unwrap();
        assert_eq!(RunConfig::parse(&cfg.dump()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("nonsense"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse("q.width = 3"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::parse("gamma = 1.5"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("speed.task = 9"), Err(ConfigError::BadValue { .. })));
        assert!(RunConfig::parse("# comment\n\nbudget = 5").is_ok());
    }
}
