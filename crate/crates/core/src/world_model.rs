//! Learned predecessor and reward models, one gated ensemble per action and
//! model type, trained off-line on stored transitions.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::galmo::{ExpertEnsemble, GalmoConfig, GalmoError, Sample, TrainReport};
use crate::maze::{Action, CellId, Maze, MazeError, Side, TaskId};
use crate::net::{NetKind, NetParams};
use crate::state::{DecodedState, RewardMemory, StateVector};

/// One observed (or enumerated) move: `pred --action--> succ` paying `reward`.
/// A null transition has an all-zero `pred`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSample {
    pub succ: StateVector,
    pub pred: StateVector,
    pub action: Action,
    pub reward: f64,
    pub task: TaskId,
}

impl TransitionSample {
    pub fn is_null(&self) -> bool {
        self.pred.is_null()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetMode {
    /// Every reachable (position, memory) state of every task, every action
    /// into it, with null transitions where no predecessor exists.
    Exhaustive,
    /// Transitions logged along `laps` randomly chosen laps per task.
    Behavioral { laps: usize },
}

/// Which state the reward networks are trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardInput {
    /// The state reached by the action.
    Arrival,
    /// The state the action is taken from.
    Departure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldModelConfig {
    pub galmo: GalmoConfig,
    pub predecessor_net: NetParams,
    pub reward_net: NetParams,
    pub gate_net: NetParams,
    pub reward_input: RewardInput,
    /// Predictions with L1 norm at or below this are treated as "no predecessor".
    pub epsilon: f64,
    /// Expert cap for the reward ensembles. Rewards are single-valued, so
    /// growth there only ever splits a slowly converging sample off to a
    /// clone whose gate can misroute it.
    pub reward_max_experts: Option<usize>,
}

impl Default for WorldModelConfig {
    fn default() -> Self {
        WorldModelConfig {
            galmo: GalmoConfig::default(),
            predecessor_net: NetKind::P.default_params(),
            reward_net: NetKind::R.default_params(),
            gate_net: NetKind::G.default_params(),
            reward_input: RewardInput::Departure,
            epsilon: 0.5,
            reward_max_experts: Some(1),
        }
    }
}

/// Memory configurations a task settles into after two rewarded laps, closed
/// under that task's own transitions.
pub fn task_memories(task: TaskId) -> Vec<RewardMemory> {
    use Side::*;
    let seeds: Vec<[Side; 2]> = match task {
        TaskId::RightBlocked | TaskId::Right => vec![[Right, Right]],
        TaskId::LeftBlocked | TaskId::Left => vec![[Left, Left]],
        TaskId::Alternation => vec![[Right, Left], [Left, Right]],
    };
    let mut set: BTreeSet<RewardMemory> = seeds
        .iter()
        .map(|[a, b]| RewardMemory::default().update(Some(*a)).update(Some(*b)))
        .collect();
    let open_sides: Vec<Side> = [Left, Right].into_iter().filter(|&s| task.blocked_side() != Some(s)).collect();
    loop {
        let mut next = set.clone();
        for m in &set {
            for &side in &open_sides {
                let m2 = if task.rewards(side, m) { m.update(Some(side)) } else { *m };
                next.insert(m2);
            }
        }
        if next.len() == set.len() {
            return set.into_iter().collect();
        }
        set = next;
    }
}

fn bits(v: &StateVector) -> Vec<u64> {
    v.as_slice().iter().map(|x| x.to_bits()).collect()
}

/// Drops exact duplicates (same vectors, action and reward), keeping first
/// occurrences in order.
pub fn dedup_samples(samples: Vec<TransitionSample>) -> Vec<TransitionSample> {
    let mut seen = BTreeSet::new();
    samples
        .into_iter()
        .filter(|s| seen.insert((bits(&s.succ), bits(&s.pred), s.action.index(), s.reward.to_bits())))
        .collect()
}

/// Builds the transition dataset for `tasks`.
pub fn collect_dataset<R: Rng + ?Sized>(
    maze: &Maze,
    tasks: &[TaskId],
    mode: DatasetMode,
    reward_magnitude: f64,
    rng: &mut R,
) -> Result<Vec<TransitionSample>, MazeError> {
    match mode {
        DatasetMode::Exhaustive => exhaustive_dataset(maze, tasks, reward_magnitude),
        DatasetMode::Behavioral { laps } => {
            let schedule: Vec<(TaskId, usize)> = tasks.iter().map(|&t| (t, laps)).collect();
            let stream = behavioral_stream(maze, &schedule, reward_magnitude, rng)?;
            let mut out = dedup_samples(stream);
            // Geometric null transitions for every visited state.
            let mut nulls = Vec::new();
            let mut seen = BTreeSet::new();
            for s in &out {
                let m = maze.for_task(s.task)?;
                let Some(cell) = crate::state::decode_position(&s.succ) else { continue };
                for a in Action::ALL {
                    if m.predecessor(cell, a).is_none() && seen.insert((bits(&s.succ), a.index())) {
                        nulls.push(TransitionSample {
                            succ: s.succ.clone(),
                            pred: StateVector::zeros(m.state_dim()),
                            action: a,
                            reward: 0.0,
                            task: s.task,
                        });
                    }
                }
            }
            out.extend(nulls);
            Ok(dedup_samples(out))
        }
    }
}

fn exhaustive_dataset(maze: &Maze, tasks: &[TaskId], reward_magnitude: f64) -> Result<Vec<TransitionSample>, MazeError> {
    let mut out = Vec::new();
    for &task in tasks {
        let m = maze.for_task(task)?;
        let memories = task_memories(task);
        let reach = m.reachable_from_start();
        let cells: Vec<CellId> = m.open_cells().filter(|c| reach[c.0]).collect();
        for &cell in &cells {
            for mem in &memories {
                let succ = m.encode_state(cell, mem)?;
                for a in Action::ALL {
                    let mut any = false;
                    if let Some(from) = m.predecessor(cell, a).filter(|c| reach[c.0]) {
                        for prev_mem in &memories {
                            let step = m.step(task, prev_mem, from, None, a, reward_magnitude)?;
                            debug_assert_eq!(step.next, cell);
                            if prev_mem.update(step.rewarded_side).levels() == mem.levels() {
                                out.push(TransitionSample {
                                    succ: succ.clone(),
                                    pred: m.encode_state(from, prev_mem)?,
                                    action: a,
                                    reward: step.reward,
                                    task,
                                });
                                any = true;
                            }
                        }
                    }
                    if !any {
                        out.push(TransitionSample {
                            succ: succ.clone(),
                            pred: StateVector::zeros(m.state_dim()),
                            action: a,
                            reward: 0.0,
                            task,
                        });
                    }
                }
            }
        }
    }
    Ok(dedup_samples(out))
}

/// Transitions in the order experienced along randomly chosen laps, one
/// block of laps per schedule entry, reward memory carried across blocks.
pub fn behavioral_stream<R: Rng + ?Sized>(
    maze: &Maze,
    schedule: &[(TaskId, usize)],
    reward_magnitude: f64,
    rng: &mut R,
) -> Result<Vec<TransitionSample>, MazeError> {
    let mut out = Vec::new();
    let mut memory = RewardMemory::default();
    for &(task, laps) in schedule {
        let m = maze.for_task(task)?;
        let mut cell = m.start();
        let mut prev = None;
        let mut done = 0;
        while done < laps {
            let actions = m.valid_actions(cell, prev);
            let a = *actions.choose(rng).expect("valid actions never empty");
            let step = m.step(task, &memory, cell, prev, a, reward_magnitude)?;
            let pred = m.encode_state(cell, &memory)?;
            memory = memory.update(step.rewarded_side);
            let succ = m.encode_state(step.next, &memory)?;
            out.push(TransitionSample { succ, pred, action: a, reward: step.reward, task });
            prev = Some(cell);
            cell = step.next;
            if m.site_side(cell).is_some() {
                done += 1;
            }
        }
    }
    Ok(out)
}

/// Per-action predecessor and reward training pairs.
pub fn partition(samples: &[TransitionSample], reward_input: RewardInput) -> ([Vec<Sample>; 4], [Vec<Sample>; 4]) {
    let mut preds: [Vec<Sample>; 4] = Default::default();
    let mut rewards: [Vec<Sample>; 4] = Default::default();
    for s in samples {
        preds[s.action.index()].push(Sample::new(s.succ.as_slice().to_vec(), s.pred.as_slice().to_vec()));
        if reward_input == RewardInput::Arrival {
            rewards[s.action.index()].push(Sample::new(s.succ.as_slice().to_vec(), vec![s.reward]));
        }
    }
    if reward_input == RewardInput::Departure {
        // Legal moves carry their reward; any state with no recorded move
        // for an action earns nothing for it.
        let mut states: BTreeMap<Vec<u64>, &StateVector> = BTreeMap::new();
        for s in samples {
            states.entry(bits(&s.succ)).or_insert(&s.succ);
        }
        for a in Action::ALL {
            let mut covered = BTreeSet::new();
            for s in samples.iter().filter(|s| s.action == a && !s.is_null()) {
                if covered.insert(bits(&s.pred)) {
                    rewards[a.index()].push(Sample::new(s.pred.as_slice().to_vec(), vec![s.reward]));
                }
            }
            for (key, st) in &states {
                if !covered.contains(key) {
                    rewards[a.index()].push(Sample::new(st.as_slice().to_vec(), vec![0.0]));
                }
            }
        }
    }
    (preds, rewards)
}

/// Error trace of one ensemble's training, for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleLog {
    pub kind: String,
    pub action: Action,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    predecessors: Vec<ExpertEnsemble>,
    rewards: Vec<ExpertEnsemble>,
    gate_threshold: f64,
    epsilon: f64,
    reward_input: RewardInput,
}

impl WorldModelConfig {
    /// Defaults with a 0.5 reward-network step: at 0.1 the memory-dependent
    /// rewards of the alternation task are still off by ~0.4 after the full
    /// epoch budget.
    pub fn calibrated() -> Self {
        WorldModelConfig {
            reward_net: NetParams { learning_rate: 0.5, ..NetKind::R.default_params() },
            ..Default::default()
        }
    }
}

impl WorldModel {
    /// Untrained model: one expert per ensemble.
    pub fn untrained<R: Rng + ?Sized>(dim: usize, config: &WorldModelConfig, rng: &mut R) -> WorldModel {
        let predecessors = (0..4)
            .map(|_| ExpertEnsemble::new(config.predecessor_net, config.gate_net, dim, dim, rng))
            .collect();
        let rewards = (0..4).map(|_| ExpertEnsemble::new(config.reward_net, config.gate_net, dim, 1, rng)).collect();
        WorldModel {
            predecessors,
            rewards,
            gate_threshold: config.galmo.gate_threshold,
            epsilon: config.epsilon,
            reward_input: config.reward_input,
        }
    }

    /// Trains all eight ensembles on `samples` (presentation order as
    /// configured: reshuffled per epoch, or dataset order).
    pub fn learn<R: Rng + ?Sized>(
        samples: &[TransitionSample],
        config: &WorldModelConfig,
        rng: &mut R,
    ) -> Result<(WorldModel, Vec<EnsembleLog>), GalmoError> {
        let dim = samples.first().map_or(34, |s| s.succ.len());
        let mut wm = WorldModel::untrained(dim, config, rng);
        let (pred_sets, reward_sets) = partition(samples, config.reward_input);
        let mut logs = Vec::new();
        for a in Action::ALL {
            let report = wm.predecessors[a.index()].train(&pred_sets[a.index()], &config.galmo, rng)?;
            logs.push(EnsembleLog { kind: "predecessor".into(), action: a, report });
            let reward_galmo = GalmoConfig { max_experts: config.reward_max_experts, ..config.galmo };
            let report = wm.rewards[a.index()].train(&reward_sets[a.index()], &reward_galmo, rng)?;
            logs.push(EnsembleLog { kind: "reward".into(), action: a, report });
        }
        Ok((wm, logs))
    }

    pub fn predecessor_ensemble(&self, action: Action) -> &ExpertEnsemble {
        &self.predecessors[action.index()]
    }

    pub fn reward_ensemble(&self, action: Action) -> &ExpertEnsemble {
        &self.rewards[action.index()]
    }

    pub fn gate_threshold(&self) -> f64 {
        self.gate_threshold
    }

    pub fn set_gate_threshold(&mut self, threshold: f64) {
        self.gate_threshold = threshold;
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn reward_input(&self) -> RewardInput {
        self.reward_input
    }

    /// Predicted predecessors of `state` under `action`, null predictions removed.
    pub fn predict_predecessors(&self, state: &StateVector, action: Action) -> Vec<StateVector> {
        self.predecessors[action.index()]
            .predict_all(state.as_slice(), self.gate_threshold)
            .expect("state dimension matches the model")
            .into_iter()
            .map(|p| StateVector::new(p.output))
            .filter(|p| p.l1_norm() > self.epsilon)
            .collect()
    }

    /// Reward predicted for taking `action` in `state`, from the expert with
    /// the strongest gate.
    pub fn predict_reward(&self, state: &StateVector, action: Action) -> f64 {
        self.rewards[action.index()]
            .predict_best(state.as_slice())
            .expect("state dimension matches the model")
            .output[0]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<WorldModel, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Ground truth per exact (successor vector, action): the decoded
/// predecessors, empty when only a null transition leads there.
pub fn true_predecessor_sets(samples: &[TransitionSample]) -> Vec<(StateVector, Action, BTreeSet<DecodedState>)> {
    let mut map: BTreeMap<(Vec<u64>, usize), (StateVector, BTreeSet<DecodedState>)> = BTreeMap::new();
    for s in samples {
        let entry =
            map.entry((bits(&s.succ), s.action.index())).or_insert_with(|| (s.succ.clone(), BTreeSet::new()));
        if let Some(p) = DecodedState::of(&s.pred) {
            entry.1.insert(p);
        }
    }
    map.into_iter().map(|((_, a), (succ, preds))| (succ, Action::from_index(a).unwrap(), preds)).collect()
}

/// Exact bit patterns of a state vector, usable as a map key.
type StateKey = Vec<u64>;

/// (successor, action) pairs with more than one distinct predecessor vector.
pub fn multi_predecessor_pairs(samples: &[TransitionSample]) -> Vec<(StateVector, Action, usize)> {
    let mut map: BTreeMap<(StateKey, usize), (StateVector, BTreeSet<StateKey>)> = BTreeMap::new();
    for s in samples.iter().filter(|s| !s.is_null()) {
        map.entry((bits(&s.succ), s.action.index()))
            .or_insert_with(|| (s.succ.clone(), BTreeSet::new()))
            .1
            .insert(bits(&s.pred));
    }
    map.into_iter()
        .filter(|(_, (_, preds))| preds.len() > 1)
        .map(|((_, a), (succ, preds))| (succ, Action::from_index(a).unwrap(), preds.len()))
        .collect()
}
