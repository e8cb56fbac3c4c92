//! Neural Q-learning with softmax exploration and prioritized-sweeping
//! replays through a learned predecessor/reward model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::maze::{Action, CellId, Maze, MazeError, Side, TaskId, Zone};
use crate::net::{LayeredNet, Loss, NetKind, NetParams};
use crate::queue::PrioritizedQueue;
use crate::state::{decode_position, DecodedState, RewardMemory, StateVector};
use crate::world_model::WorldModel;

/// Which Q networks a replayed predecessor updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayTargets {
    /// Only the action whose predecessor model proposed the state.
    Matching,
    /// All four actions, each toward its own predicted reward.
    AllActions,
}

/// Linear ramp of the inverse temperature over the first trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaAnneal {
    pub start: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Softmax inverse temperature.
    pub beta: f64,
    pub beta_anneal: Option<BetaAnneal>,
    /// Q updates allowed per stop at a reward site; 0 is plain Q-learning.
    pub budget: usize,
    pub reward_magnitude: f64,
    pub replay_targets: ReplayTargets,
    /// Keep one queue entry per decoded (cell, memory), at its max priority.
    pub coalesce: bool,
    /// Replace predicted predecessors by the exact encoding they decode to.
    pub snap: bool,
    pub q_net: NetParams,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.9,
            beta: 20.0,
            beta_anneal: None,
            budget: 20,
            reward_magnitude: 0.8,
            replay_targets: ReplayTargets::Matching,
            coalesce: false,
            snap: false,
            q_net: NetKind::Q.default_params(),
        }
    }
}

impl AgentConfig {
    /// Defaults with Q networks that can learn the alternation task: the Q
    /// bundle's learning rate and slopes, but a wider hidden layer, a larger
    /// init bound and cross-entropy loss. With the bundle as is, the small
    /// symmetric init keeps the hidden units nearly identical and the nets
    /// never separate the two alternation memories at T2.
    pub fn calibrated() -> Self {
        AgentConfig {
            q_net: NetParams { hidden: 40, init_bound: 1.0, loss: Loss::CrossEntropy, ..NetKind::Q.default_params() },
            ..Default::default()
        }
    }

    pub fn beta_at(&self, trial: usize) -> f64 {
        match self.beta_anneal {
            Some(BetaAnneal { start, trials }) if trial < trials => {
                start + (self.beta - start) * trial as f64 / trials as f64
            }
            _ => self.beta,
        }
    }
}

/// One single-output Q network per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QBank {
    nets: Vec<LayeredNet>,
}

impl QBank {
    pub fn new<R: Rng + ?Sized>(params: NetParams, input_dim: usize, rng: &mut R) -> QBank {
        QBank { nets: Action::ALL.iter().map(|_| LayeredNet::new(params, input_dim, 1, rng)).collect() }
    }

    pub fn from_nets(nets: Vec<LayeredNet>) -> QBank {
        assert_eq!(nets.len(), 4, "one network per action");
        QBank { nets }
    }

    pub fn net(&self, action: Action) -> &LayeredNet {
        &self.nets[action.index()]
    }

    pub fn value(&self, action: Action, state: &StateVector) -> f64 {
        self.nets[action.index()].value(state.as_slice())
    }

    /// Largest Q over `actions`; 0 when there are none.
    pub fn max_value(&self, state: &StateVector, actions: &[Action]) -> f64 {
        actions.iter().map(|&a| self.value(a, state)).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))).unwrap_or(0.0)
    }

    /// Highest-valued action among `actions` (first on ties).
    pub fn greedy(&self, state: &StateVector, actions: &[Action]) -> Option<Action> {
        let mut best: Option<(Action, f64)> = None;
        for &a in actions {
            let v = self.value(a, state);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
    }

    /// One backprop step of `Q_action(state)` toward `target`. Returns
    /// `|Q_before − target|` with the target as given (before clamping).
    pub fn update(&mut self, action: Action, state: &StateVector, target: f64) -> f64 {
        let net = &mut self.nets[action.index()];
        let before = net.value(state.as_slice());
        net.backprop(state.as_slice(), &[target]).expect("state dimension matches the Q bank");
        (before - target).abs()
    }

    /// Online temporal-difference step: target `reward + γ·max Q(next)`
    /// over `valid_next`. Returns the priority of `state`.
    pub fn online_update(
        &mut self,
        state: &StateVector,
        action: Action,
        reward: f64,
        next: &StateVector,
        valid_next: &[Action],
        gamma: f64,
    ) -> f64 {
        let target = reward + gamma * self.max_value(next, valid_next);
        self.update(action, state, target)
    }
}

/// Softmax probabilities of `beta·q`.
pub fn softmax(q: &[f64], beta: f64) -> Vec<f64> {
    let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = q.iter().map(|&v| (beta * (v - m)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Samples an action from the softmax over the valid actions only.
pub fn select_action<R: Rng + ?Sized>(
    q: &QBank,
    state: &StateVector,
    valid: &[Action],
    beta: f64,
    rng: &mut R,
) -> Action {
    assert!(!valid.is_empty(), "no valid action");
    let values: Vec<f64> = valid.iter().map(|&a| q.value(a, state)).collect();
    let probs = softmax(&values, beta);
    let mut u: f64 = rng.gen();
    for (&a, p) in valid.iter().zip(&probs) {
        if u < *p {
            return a;
        }
        u -= p;
    }
    *valid.last().unwrap()
}

/// What a replay sweep needs from a model of the environment.
pub trait SweepModel {
    /// Predicted states from which `action` leads to `state`.
    fn predecessors(&self, state: &StateVector, action: Action) -> Vec<StateVector>;
    /// Predicted reward for taking `action` in `state`.
    fn reward(&self, state: &StateVector, action: Action) -> f64;
    /// Actions the bootstrap max ranges over at `state`.
    fn actions_at(&self, state: &StateVector) -> Vec<Action>;
    /// Identity used for queue coalescing and event logging.
    fn decode(&self, state: &StateVector) -> Option<DecodedState> {
        DecodedState::of(state)
    }
    /// Exact encoding of the state `state` decodes to, if any.
    fn snap(&self, _state: &StateVector) -> Option<StateVector> {
        None
    }
}

impl<T: SweepModel + ?Sized> SweepModel for &T {
    fn predecessors(&self, state: &StateVector, action: Action) -> Vec<StateVector> {
        (**self).predecessors(state, action)
    }

    fn reward(&self, state: &StateVector, action: Action) -> f64 {
        (**self).reward(state, action)
    }

    fn actions_at(&self, state: &StateVector) -> Vec<Action> {
        (**self).actions_at(state)
    }

    fn decode(&self, state: &StateVector) -> Option<DecodedState> {
        (**self).decode(state)
    }

    fn snap(&self, state: &StateVector) -> Option<StateVector> {
        (**self).snap(state)
    }
}

/// A learned world model queried on a maze's geometry.
pub struct MazeModel<'a> {
    pub world: &'a WorldModel,
    pub maze: &'a Maze,
}

impl SweepModel for MazeModel<'_> {
    fn predecessors(&self, state: &StateVector, action: Action) -> Vec<StateVector> {
        self.world.predict_predecessors(state, action)
    }

    fn reward(&self, state: &StateVector, action: Action) -> f64 {
        self.world.predict_reward(state, action)
    }

    fn actions_at(&self, state: &StateVector) -> Vec<Action> {
        match decode_position(state) {
            Some(cell) if cell.0 < self.maze.n_cells() && self.maze.is_open(cell) => {
                self.maze.valid_actions(cell, None)
            }
            _ => Action::ALL.to_vec(),
        }
    }

    fn snap(&self, state: &StateVector) -> Option<StateVector> {
        let d = DecodedState::of(state)?;
        let memory = match (d.mem_l_halves, d.mem_r_halves) {
            (2, 1) => RewardMemory::new(Some(Side::Left), Some(Side::Right)),
            (1, 2) => RewardMemory::new(Some(Side::Right), Some(Side::Left)),
            (2, _) => RewardMemory::new(Some(Side::Left), None),
            (_, 2) => RewardMemory::new(Some(Side::Right), None),
            _ => RewardMemory::default(),
        };
        self.maze.encode_state(d.cell, &memory).ok()
    }
}

/// Queue of states awaiting replay, keyed by decoded state when coalescing.
pub type ReplayQueue = PrioritizedQueue<StateVector, Option<DecodedState>>;

/// Queues `state`, coalescing on its decoded identity when asked to.
pub fn enqueue(queue: &mut ReplayQueue, state: StateVector, priority: f64, key: Option<Option<DecodedState>>) {
    match key {
        Some(k) => {
            queue.push_keyed(k, state, priority);
        }
        None => queue.push(state, priority),
    }
}

/// One pop of a replay sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEvent {
    /// Index of the reward stop within the run.
    pub stop: usize,
    pub trial: usize,
    pub task: TaskId,
    /// Position of this pop within its stop.
    pub replay_index: usize,
    pub popped: Option<DecodedState>,
    pub priority: f64,
    pub agent_cell: CellId,
    pub updates: usize,
}

/// Pops and updates until the queue empties or `budget` Q updates are
/// spent. Each pop is returned as `(decoded state, priority, updates)`.
pub fn replay_sweep<M: SweepModel + ?Sized>(
    q: &mut QBank,
    model: &M,
    queue: &mut ReplayQueue,
    config: &AgentConfig,
) -> Vec<(Option<DecodedState>, f64, usize)> {
    let mut pops = Vec::new();
    let mut spent = 0;
    while spent < config.budget {
        let Some((phi, priority)) = queue.pop() else {
            break;
        };
        let bootstrap_actions = model.actions_at(&phi);
        let mut updates = 0;
        'actions: for k in Action::ALL {
            for p in model.predecessors(&phi, k) {
                let p = if config.snap { model.snap(&p).unwrap_or(p) } else { p };
                let targets: Vec<Action> = match config.replay_targets {
                    ReplayTargets::Matching => vec![k],
                    ReplayTargets::AllActions => Action::ALL.to_vec(),
                };
                for a in targets {
                    if spent >= config.budget {
                        break 'actions;
                    }
                    let target = model.reward(&p, a) + config.gamma * q.max_value(&phi, &bootstrap_actions);
                    let prio = q.update(a, &p, target);
                    let key = config.coalesce.then(|| model.decode(&p));
                    enqueue(queue, p.clone(), prio, key);
                    spent += 1;
                    updates += 1;
                }
            }
        }
        pops.push((model.decode(&phi), priority, updates));
    }
    pops
}

/// Outcome of one lap, from departure to arrival at a reward site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub task: TaskId,
    /// Arm taken at T2; `None` if the trial ended without passing T2.
    pub choice: Option<Side>,
    pub correct: bool,
    pub rewarded: bool,
    pub steps: usize,
}

/// Version of the [`RunLog`] layout; logs of different versions do not compare.
pub const LOG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema: u32,
    pub seed: u64,
    pub with_replays: bool,
    pub trials: Vec<TrialRecord>,
    /// Online |δ| of every step.
    pub deltas: Vec<f64>,
    pub events: Vec<ReplayEvent>,
}

impl RunLog {
    /// 1 for an erroneous T2 choice, 0 otherwise, per trial.
    pub fn t2_errors(&self) -> Vec<f64> {
        self.trials.iter().map(|t| if t.correct { 0.0 } else { 1.0 }).collect()
    }
}

/// Ordered (task, trials) blocks.
pub type Schedule = Vec<(TaskId, usize)>;

/// Walks the schedule lap by lap with an online Q update every step and,
/// when `model` is given and the budget is positive, a replay sweep at every
/// rewarded arrival. Returns the log and the trained Q bank.
pub fn run_schedule<R: Rng + ?Sized>(
    maze: &Maze,
    schedule: &[(TaskId, usize)],
    config: &AgentConfig,
    q: &mut QBank,
    world: Option<&WorldModel>,
    seed: u64,
    rng: &mut R,
) -> Result<RunLog, MazeError> {
    let mazes = schedule.iter().map(|&(t, _)| Ok((t, maze.for_task(t)?))).collect::<Result<Vec<_>, MazeError>>()?;
    let model_for = |task: TaskId| {
        let world = world?;
        let (_, m) = mazes.iter().find(|(t, _)| *t == task)?;
        Some(MazeModel { world, maze: m })
    };
    run_schedule_with(maze, schedule, config, q, model_for, seed, rng)
}

/// [`run_schedule`] with the replay model built per task block by
/// `model_for`; `None` disables replays for that block.
pub fn run_schedule_with<M, F, R>(
    maze: &Maze,
    schedule: &[(TaskId, usize)],
    config: &AgentConfig,
    q: &mut QBank,
    model_for: F,
    seed: u64,
    rng: &mut R,
) -> Result<RunLog, MazeError>
where
    M: SweepModel,
    F: Fn(TaskId) -> Option<M>,
    R: Rng + ?Sized,
{
    let mut log = RunLog {
        schema: LOG_SCHEMA,
        seed,
        with_replays: false,
        trials: Vec::new(),
        deltas: Vec::new(),
        events: Vec::new(),
    };
    let mut queue = ReplayQueue::new();
    let mut memory = RewardMemory::default();
    let mut cell = maze.start();
    let mut prev: Option<CellId> = None;
    let mut stop = 0;
    let mut trial = 0;
    for &(task, n_trials) in schedule {
        let m = maze.for_task(task)?;
        if !m.is_open(cell) || prev.is_some_and(|p| !m.is_open(p)) {
            cell = m.start();
            prev = None;
        }
        let model = model_for(task);
        log.with_replays |= model.is_some() && config.budget > 0;
        let mut choice: Option<(Side, bool)> = None;
        let mut steps = 0;
        let mut done = 0;
        while done < n_trials {
            let valid = m.valid_actions(cell, prev);
            let phi = m.encode_state(cell, &memory)?;
            let a = select_action(q, &phi, &valid, config.beta_at(trial), rng);
            let step = m.step(task, &memory, cell, prev, a, config.reward_magnitude)?;
            if cell == m.t2() {
                let side = match m.zone(step.next) {
                    Zone::Left => Side::Left,
                    Zone::Right => Side::Right,
                    Zone::Central => unreachable!("T2 only opens onto the arms"),
                };
                choice = Some((side, task.rewards(side, &memory)));
            }
            memory = memory.update(step.rewarded_side);
            let next_phi = m.encode_state(step.next, &memory)?;
            let valid_next = m.valid_actions(step.next, Some(cell));
            let delta = q.online_update(&phi, a, step.reward, &next_phi, &valid_next, config.gamma);
            log.deltas.push(delta);
            let key = config.coalesce.then(|| DecodedState::of(&phi));
            enqueue(&mut queue, phi, delta, key);
            steps += 1;
            prev = Some(cell);
            cell = step.next;

            if step.reward > 0.0 && config.budget > 0 {
                if let Some(model) = &model {
                    for (i, (popped, priority, updates)) in
                        replay_sweep(q, model, &mut queue, config).into_iter().enumerate()
                    {
                        log.events.push(ReplayEvent {
                            stop,
                            trial,
                            task,
                            replay_index: i,
                            popped,
                            priority,
                            agent_cell: cell,
                            updates,
                        });
                    }
                    stop += 1;
                }
            }
            if m.site_side(cell).is_some() {
                log.trials.push(TrialRecord {
                    trial,
                    task,
                    choice: choice.map(|c| c.0),
                    correct: choice.is_none_or(|c| c.1),
                    rewarded: step.reward > 0.0,
                    steps,
                });
                trial += 1;
                done += 1;
                steps = 0;
                choice = None;
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bank(seed: u64) -> QBank {
        QBank::new(NetKind::Q.default_params(), 34, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn softmax_hand_values() {
        let p = softmax(&[0.5, 0.6], 20.0);
        assert!((p[1] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
        assert_eq!(softmax(&[0.3; 4], 20.0), vec![0.25; 4]);
        let p = softmax(&[0.1, 0.2], 1e6);
        assert!(p[1] > 1.0 - 1e-12);
    }

    #[test]
    fn select_only_valid() {
        let q = bank(1);
        let s = StateVector::zeros(34);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = select_action(&q, &s, &[Action::East, Action::West], 20.0, &mut rng);
            assert!(matches!(a, Action::East | Action::West));
        }
    }

    #[test]
    fn priority_is_pre_update_gap() {
        let mut q = bank(3);
        let s = StateVector::new((0..34).map(|i| (i % 3) as f64 / 3.0).collect());
        let next = StateVector::zeros(34);
        let before = q.value(Action::North, &s);
        let target = 0.8 + 0.9 * q.max_value(&next, &[Action::East, Action::South]);
        let p = q.online_update(&s, Action::North, 0.8, &next, &[Action::East, Action::South], 0.9);
        assert_eq!(p, (before - target).abs());
        assert_ne!(q.value(Action::North, &s), before);
    }

    #[test]
    fn matched_target_gives_zero_priority() {
        let mut q = bank(4);
        let s = StateVector::zeros(34);
        let v = q.value(Action::West, &s);
        assert_eq!(q.update(Action::West, &s, v), 0.0);
    }

    #[test]
    fn annealed_beta() {
        let c = AgentConfig { beta_anneal: Some(BetaAnneal { start: 0.0, trials: 10 }), ..Default::default() };
        assert_eq!(c.beta_at(0), 0.0);
        assert_eq!(c.beta_at(5), 10.0);
        assert_eq!(c.beta_at(10), 20.0);
    }

    #[test]
    fn zero_budget_leaves_queue() {
        struct NoModel;
        impl SweepModel for NoModel {
            fn predecessors(&self, _: &StateVector, _: Action) -> Vec<StateVector> {
                panic!("not queried")
            }
            fn reward(&self, _: &StateVector, _: Action) -> f64 {
                0.0
            }
            fn actions_at(&self, _: &StateVector) -> Vec<Action> {
                Action::ALL.to_vec()
            }
        }
        let mut q = bank(5);
        let mut queue = ReplayQueue::new();
        queue.push(StateVector::zeros(34), 1.0);
        let cfg = AgentConfig { budget: 0, ..Default::default() };
        assert!(replay_sweep(&mut q, &NoModel, &mut queue, &cfg).is_empty());
        assert_eq!(queue.len(), 1);
    }

    #[test]
    fn q_learning_laps_have_lap_length() {
        let maze = Maze::default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut q = bank(6);
        let cfg = AgentConfig { budget: 0, ..Default::default() };
        let log = run_schedule(&maze, &[(TaskId::Right, 5)], &cfg, &mut q, None, 6, &mut rng).unwrap();
        assert_eq!(log.trials.len(), 5);
        // after the first (shorter, from S) trial, a trial is a full lap
        for t in &log.trials[1..] {
            assert_eq!(t.steps, maze.lap_length());
        }
        assert!(log.events.is_empty());
    }
}
