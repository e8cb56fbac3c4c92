use dynaq_core::dynaq::{softmax, AgentConfig, QBank};
use dynaq_core::maze::{Action, CellId, Maze, Side, TaskId};
use dynaq_core::queue::PrioritizedQueue;
use dynaq_core::state::{decode_position, DecodedState, RewardMemory, MEMORY_LEVELS};
use dynaq_core::world_model::{collect_dataset, task_memories, DatasetMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn side() -> impl Strategy<Value = Option<Side>> {
    prop_oneof![Just(None), Just(Some(Side::Left)), Just(Some(Side::Right))]
}

proptest! {
    #[test]
    fn queue_pops_descending_with_fifo_ties(prios in prop::collection::vec(0u8..6, 0..80)) {
        let mut q: PrioritizedQueue<usize> = PrioritizedQueue::new();
        for (i, &p) in prios.iter().enumerate() {
            q.push(i, p as f64);
        }
        let mut last: Option<(f64, usize)> = None;
        let mut n = 0;
        while let Some((i, p)) = q.pop() {
            if let Some((lp, li)) = last {
                prop_assert!(p < lp || (p == lp && i > li));
            }
            last = Some((p, i));
            n += 1;
        }
        prop_assert_eq!(n, prios.len());
    }

    #[test]
    fn keyed_queue_holds_each_key_once_at_its_max(pushes in prop::collection::vec((0u8..5, 0u8..10), 0..60)) {
        let mut q: PrioritizedQueue<u8, u8> = PrioritizedQueue::new();
        let mut best = std::collections::BTreeMap::new();
        for &(k, p) in &pushes {
            q.push_keyed(k, k, p as f64);
            let e = best.entry(k).or_insert(p);
            *e = (*e).max(p);
        }
        prop_assert_eq!(q.len(), best.len());
        let mut seen = std::collections::BTreeMap::new();
        while let Some((k, p)) = q.pop() {
            prop_assert!(seen.insert(k, p).is_none());
        }
        for (k, p) in best {
            prop_assert_eq!(seen[&k], p as f64);
        }
    }

    #[test]
    fn softmax_is_a_distribution(q in prop::collection::vec(-1.0f64..2.0, 1..5), beta in 0.0f64..200.0) {
        let p = softmax(&q, beta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let top = q.iter().cloned().fold(f64::MIN, f64::max);
        let i = q.iter().position(|&x| x == top).unwrap();
        prop_assert!(p.iter().all(|&x| x <= p[i] + 1e-12));
    }

    #[test]
    fn encoded_states_decode_back(cell in 0usize..32, last in side(), pen in side()) {
        let m = Maze::default_layout();
        let mem = RewardMemory::new(last, pen);
        let s = m.encode_state(CellId(cell), &mem).unwrap();
        prop_assert_eq!(s.len(), 34);
        prop_assert!(s.place().iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(MEMORY_LEVELS.contains(&s.mem_l()) && MEMORY_LEVELS.contains(&s.mem_r()));
        prop_assert_eq!(decode_position(&s), Some(CellId(cell)));
        let d = DecodedState::of(&s).unwrap();
        prop_assert_eq!((d.mem_l_halves as f64 / 2.0, d.mem_r_halves as f64 / 2.0), mem.levels());
    }

    #[test]
    fn memory_levels_are_consistent(last in side(), pen in side(), reward in side()) {
        let (l, r) = RewardMemory::new(last, pen).update(reward).levels();
        prop_assert!(l != r || l == 0.0);
        if let Some(s) = reward {
            let top = if s == Side::Left { l } else { r };
            prop_assert_eq!(top, 1.0);
        }
    }

    #[test]
    fn random_walks_stay_legal(seed in any::<u64>(), task in 1u8..=5) {
        let task = TaskId::from_number(task).unwrap();
        let m = Maze::default_layout().for_task(task).unwrap();
        let q = QBank::new(AgentConfig::default().q_net, 34, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let (mut cell, mut prev, mut mem) = (m.start(), None, RewardMemory::default());
        for _ in 0..200 {
            let valid = m.valid_actions(cell, prev);
            prop_assert!(!valid.is_empty());
            let phi = m.encode_state(cell, &mem).unwrap();
            let a = dynaq_core::dynaq::select_action(&q, &phi, &valid, 20.0, &mut rng);
            let step = m.step(task, &mem, cell, prev, a, 0.8).unwrap();
            prop_assert!(m.is_forward_move(cell, step.next));
            prop_assert_eq!(m.predecessor(step.next, a), Some(cell));
            mem = mem.update(step.rewarded_side);
            prev = Some(cell);
            cell = step.next;
        }
    }
}

#[test]
fn dataset_predecessors_step_into_their_successors() {
    let m = Maze::default_layout();
    let data = collect_dataset(&m, &TaskId::ALL, DatasetMode::Exhaustive, 0.8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    for s in data.iter().filter(|s| !s.is_null()) {
        let mt = m.for_task(s.task).unwrap();
        let from = decode_position(&s.pred).unwrap();
        let to = decode_position(&s.succ).unwrap();
        assert_eq!(mt.neighbor(from, s.action), Some(to));
        assert!(mt.is_forward_move(from, to));
        let mem = DecodedState::of(&s.succ).unwrap();
        let levels = (mem.mem_l_halves as f64 / 2.0, mem.mem_r_halves as f64 / 2.0);
        assert!(task_memories(s.task).iter().any(|m| m.levels() == levels));
    }
    // a null transition means no move, or no memory state, leads there
    for s in data.iter().filter(|s| s.is_null()) {
        assert_eq!(s.reward, 0.0);
        assert!(!data.iter().any(|o| !o.is_null() && o.action == s.action && o.succ == s.succ));
    }
    // every task's states appear with every action
    for task in TaskId::ALL {
        for a in Action::ALL {
            assert!(data.iter().any(|s| s.task == task && s.action == a));
        }
    }
}
