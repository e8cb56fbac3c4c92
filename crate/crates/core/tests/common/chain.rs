//! Replay machinery against a prioritized-sweeping oracle and value
//! iteration on a five-state deterministic chain with one-hot states.
//!
//! The oracle is a plain list-based sweep. Driven by a lookup table it must
//! reproduce value iteration; driven by a clone of the Q bank it must pop
//! exactly what the library pops. (A sigmoid Q network shares its output
//! bias across states, so it cannot carry a lookup table's values and pop
//! orders are only comparable on the same Q function.)
//!
//! From state i, East moves to i+1 and North jumps to i+2; state 4 is
//! terminal. Entering it pays 0.8 by East and 0.75 by North, which makes the
//! greedy policy non-trivial: North from 0, 1 and 2, East from 3.

use std::collections::HashMap;

use dynaq_core::dynaq::{replay_sweep, AgentConfig, QBank, ReplayQueue, SweepModel};
use dynaq_core::maze::{Action, CellId};
use dynaq_core::state::{DecodedState, StateVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const N: usize = 5;
pub const GAMMA: f64 = 0.9;

pub fn one_hot(i: usize) -> StateVector {
    let mut v = vec![0.0; N + 2];
    v[i] = 1.0;
    StateVector::new(v)
}

pub fn index(s: &StateVector) -> usize {
    s.as_slice()[..N].iter().position(|&x| x == 1.0).expect("one-hot state")
}

pub fn successor(i: usize, a: Action) -> Option<usize> {
    let j = match a {
        Action::East => i + 1,
        Action::North => i + 2,
        _ => return None,
    };
    (i < N - 1 && j < N).then_some(j)
}

pub fn reward(i: usize, a: Action) -> f64 {
    match (successor(i, a), a) {
        (Some(4), Action::East) => 0.8,
        (Some(4), Action::North) => 0.75,
        _ => 0.0,
    }
}

pub fn actions(i: usize) -> Vec<Action> {
    Action::ALL.into_iter().filter(|&a| successor(i, a).is_some()).collect()
}

pub struct Chain;

impl SweepModel for Chain {
    fn predecessors(&self, state: &StateVector, action: Action) -> Vec<StateVector> {
        let j = index(state);
        (0..N).filter(|&i| successor(i, action) == Some(j)).map(one_hot).collect()
    }

    fn reward(&self, state: &StateVector, action: Action) -> f64 {
        reward(index(state), action)
    }

    fn actions_at(&self, state: &StateVector) -> Vec<Action> {
        actions(index(state))
    }

    fn decode(&self, state: &StateVector) -> Option<DecodedState> {
        Some(DecodedState { cell: CellId(index(state)), mem_l_halves: 0, mem_r_halves: 0 })
    }
}

pub fn config(budget: usize) -> AgentConfig {
    AgentConfig { gamma: GAMMA, budget, ..AgentConfig::calibrated() }
}

pub fn bank(seed: u64) -> QBank {
    QBank::new(config(0).q_net, N + 2, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub trait Values {
    fn value(&self, i: usize, a: Action) -> f64;
    fn update(&mut self, i: usize, a: Action, target: f64);
}

impl Values for QBank {
    fn value(&self, i: usize, a: Action) -> f64 {
        QBank::value(self, a, &one_hot(i))
    }

    fn update(&mut self, i: usize, a: Action, target: f64) {
        QBank::update(self, a, &one_hot(i), target);
    }
}

/// Lookup table, zero until written; updates overwrite.
impl Values for HashMap<(usize, Action), f64> {
    fn value(&self, i: usize, a: Action) -> f64 {
        *self.get(&(i, a)).unwrap_or(&0.0)
    }

    fn update(&mut self, i: usize, a: Action, target: f64) {
        self.insert((i, a), target);
    }
}

/// Textbook prioritized sweeping over an explicit list: pop the largest
/// priority (earliest on ties), back every predecessor up through `q` and
/// queue it with its pre-update error.
pub fn oracle_sweep(queue: &mut Vec<(usize, f64)>, budget: usize, q: &mut dyn Values) -> Vec<usize> {
    let mut order = Vec::new();
    let mut spent = 0;
    while spent < budget && !queue.is_empty() {
        let mut best = 0;
        for (k, &(_, p)) in queue.iter().enumerate() {
            if p > queue[best].1 {
                best = k;
            }
        }
        let (j, _) = queue.remove(best);
        order.push(j);
        'outer: for a in Action::ALL {
            for i in (0..N).filter(|&i| successor(i, a) == Some(j)) {
                if spent >= budget {
                    break 'outer;
                }
                // the max over the popped state is re-read for every backup
                let bootstrap = actions(j).into_iter().map(|b| q.value(j, b)).fold(0.0, f64::max);
                let target = reward(i, a) + GAMMA * bootstrap;
                let priority = (q.value(i, a) - target).abs();
                q.update(i, a, target);
                queue.push((i, priority));
                spent += 1;
            }
        }
    }
    order
}

pub fn value_iteration() -> [f64; N] {
    let mut v = [0.0; N];
    for _ in 0..100 {
        for i in (0..N).rev() {
            v[i] = actions(i)
                .into_iter()
                .map(|a| reward(i, a) + GAMMA * v[successor(i, a).unwrap()])
                .fold(0.0, f64::max);
        }
    }
    v
}

pub fn library_pops(q: &mut QBank, queue: &mut ReplayQueue, budget: usize) -> Vec<usize> {
    replay_sweep(q, &Chain, queue, &config(budget))
        .into_iter()
        .map(|(d, _, _)| d.expect("chain states decode").cell.0)
        .collect()
}
