//! Replay sweep against the prioritized-sweeping oracle and value iteration.

mod common;

use std::collections::HashMap;

use common::chain::*;
use dynaq_core::dynaq::{enqueue, replay_sweep, ReplayQueue};
use dynaq_core::maze::Action;

#[test]
fn pop_order_matches_oracle_on_the_same_q_bank() {
    for seed in 0..20 {
        let mut q = bank(seed);
        let mut oracle_q = q.clone();
        let mut queue = ReplayQueue::new();
        let mut list = Vec::new();
        // arrival at the goal, plus the stale entries of the lap
        for (i, p) in [(4, 0.3), (2, 0.05), (1, 0.05), (3, 0.01)] {
            enqueue(&mut queue, one_hot(i), p, None);
            list.push((i, p));
        }
        for round in 0..5 {
            let got = library_pops(&mut q, &mut queue, 12);
            let want = oracle_sweep(&mut list, 12, &mut oracle_q);
            assert_eq!(got, want, "seed {seed} round {round}");
        }
        assert_eq!(q, oracle_q);
    }
}

#[test]
fn tabular_oracle_converges_to_value_iteration() {
    let v = value_iteration();
    let mut table: HashMap<(usize, Action), f64> = HashMap::new();
    let mut list = vec![(4, 1.0)];
    oracle_sweep(&mut list, 1000, &mut table);
    assert!(list.iter().all(|&(_, p)| p == 0.0), "sweep left work undone");
    for i in 0..N - 1 {
        for a in actions(i) {
            let want = reward(i, a) + GAMMA * v[successor(i, a).unwrap()];
            assert!((table[&(i, a)] - want).abs() < 1e-12, "Q({i}, {a})");
        }
    }
}

#[test]
fn greedy_policy_matches_value_iteration() {
    let v = value_iteration();
    assert!((v[3] - 0.8).abs() < 1e-12 && (v[2] - 0.75).abs() < 1e-12);
    let vi_policy: Vec<Action> = (0..N - 1)
        .map(|i| {
            let mut best = actions(i)[0];
            for a in actions(i) {
                let score = |a: Action| reward(i, a) + GAMMA * v[successor(i, a).unwrap()];
                if score(a) > score(best) {
                    best = a;
                }
            }
            best
        })
        .collect();
    assert_eq!(vi_policy, vec![Action::North, Action::North, Action::North, Action::East]);

    for seed in 0..5 {
        let mut q = bank(seed);
        let mut queue = ReplayQueue::new();
        for _ in 0..3000 {
            for j in 1..N {
                enqueue(&mut queue, one_hot(j), 1.0, None);
            }
            replay_sweep(&mut q, &Chain, &mut queue, &config(64));
            while queue.pop().is_some() {}
        }
        let policy: Vec<Action> = (0..N - 1).map(|i| q.greedy(&one_hot(i), &actions(i)).unwrap()).collect();
        assert_eq!(policy, vi_policy, "seed {seed}");
        for (i, vi) in v.iter().enumerate().take(N - 1) {
            let qmax = q.max_value(&one_hot(i), &actions(i));
            assert!((qmax - vi).abs() < 0.02, "seed {seed} state {i}: {qmax} vs {vi}");
        }
    }
}
