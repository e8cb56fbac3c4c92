//! Classification of replayed states into forward/backward sequences and
//! random reactivations, and the per-task summary table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynaq::ReplayEvent;
use crate::maze::{CellId, Maze, TaskId, Zone};

/// Shortest run of adjacent reactivations that counts as a sequence.
pub const MIN_SEQUENCE_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Each cell follows the previous one along the direction of travel.
    Forward,
    /// Each cell precedes the previous one: travel retraced.
    Backward,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Zone of a sequence relative to where the agent is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelativeSide {
    Same,
    Opposite,
    Central,
}

impl RelativeSide {
    pub fn name(self) -> &'static str {
        match self {
            RelativeSide::Same => "same",
            RelativeSide::Opposite => "opposite",
            RelativeSide::Central => "central",
        }
    }
}

/// A maximal run of one stop's reactivations forming an adjacent chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplaySequence {
    pub stop: usize,
    pub task: TaskId,
    /// Index of the first event within the stop.
    pub start: usize,
    pub cells: Vec<CellId>,
    pub direction: Direction,
    pub agent_cell: CellId,
}

impl ReplaySequence {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn step_direction(maze: &Maze, from: CellId, to: CellId) -> Option<Direction> {
    if !maze.adjacent(from, to) {
        None
    } else if maze.is_forward_move(from, to) {
        Some(Direction::Forward)
    } else if maze.is_forward_move(to, from) {
        Some(Direction::Backward)
    } else {
        None
    }
}

/// Sequences within one stop's reactivations, given in pop order. Chains are
/// taken greedily: from each unconsumed event the longest single-direction
/// run of adjacent cells is claimed if it reaches [`MIN_SEQUENCE_LEN`].
/// Undecodable (null) states never join a chain.
pub fn detect_in_stop(cells: &[Option<CellId>], maze: &Maze) -> Vec<(usize, usize, Direction)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let Some(first) = cells[i] else {
            i += 1;
            continue;
        };
        let mut end = i + 1;
        let mut dir: Option<Direction> = None;
        let mut prev = first;
        while end < cells.len() {
            let Some(next) = cells[end] else { break };
            match step_direction(maze, prev, next) {
                Some(d) if dir.is_none_or(|cur| cur == d) => {
                    dir = Some(d);
                    prev = next;
                    end += 1;
                }
                _ => break,
            }
        }
        match dir {
            Some(d) if end - i >= MIN_SEQUENCE_LEN => {
                out.push((i, end - i, d));
                i = end;
            }
            _ => i += 1,
        }
    }
    out
}

/// Sequences over a whole log. Events must be grouped by stop and ordered by
/// replay index within a stop; detection never spans two stops.
pub fn detect_sequences(events: &[ReplayEvent], maze: &Maze) -> Vec<ReplaySequence> {
    let mut out = Vec::new();
    for group in events.chunk_by(|a, b| a.stop == b.stop) {
        let cells: Vec<Option<CellId>> = group.iter().map(|e| e.popped.map(|d| d.cell)).collect();
        for (start, len, direction) in detect_in_stop(&cells, maze) {
            out.push(ReplaySequence {
                stop: group[0].stop,
                task: group[0].task,
                start,
                cells: cells[start..start + len].iter().map(|c| c.expect("chains hold decoded cells")).collect(),
                direction,
                agent_cell: group[0].agent_cell,
            });
        }
    }
    out
}

/// Majority zone of the cells relative to the agent's zone; ties and a
/// central majority give `Central`.
pub fn classify_side(cells: &[CellId], agent_cell: CellId, maze: &Maze) -> RelativeSide {
    let mut counts = [0usize; 3];
    for &c in cells {
        counts[zone_index(maze.zone(c))] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&0);
    if counts.iter().filter(|&&n| n == top).count() > 1 || counts[2] == top {
        return RelativeSide::Central;
    }
    let majority = if counts[0] == top { Zone::Left } else { Zone::Right };
    if maze.zone(agent_cell) == majority {
        RelativeSide::Same
    } else {
        RelativeSide::Opposite
    }
}

fn zone_index(z: Zone) -> usize {
    match z {
        Zone::Left => 0,
        Zone::Right => 1,
        Zone::Central => 2,
    }
}

/// Event counts for one task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskReplayCounts {
    pub total: usize,
    pub random: usize,
    /// Events inside sequences, by direction and relative side.
    pub in_sequences: BTreeMap<(Direction, RelativeSide), usize>,
    /// Number of sequences, by direction and relative side.
    pub sequences: BTreeMap<(Direction, RelativeSide), usize>,
}

impl TaskReplayCounts {
    pub fn direction_events(&self, d: Direction) -> usize {
        self.in_sequences.iter().filter(|((dir, _), _)| *dir == d).map(|(_, n)| n).sum()
    }

    pub fn side_events(&self, s: RelativeSide) -> usize {
        self.in_sequences.iter().filter(|((_, side), _)| *side == s).map(|(_, n)| n).sum()
    }

    fn fraction(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            n as f64 / self.total as f64
        }
    }

    pub fn random_fraction(&self) -> f64 {
        self.fraction(self.random)
    }

    pub fn direction_fraction(&self, d: Direction) -> f64 {
        self.fraction(self.direction_events(d))
    }
}

/// Per-task breakdown of reactivations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplaySummary {
    pub tasks: BTreeMap<TaskId, TaskReplayCounts>,
}

impl ReplaySummary {
    /// Folds one run's events into the summary.
    pub fn add_run(&mut self, events: &[ReplayEvent], maze: &Maze) {
        for e in events {
            self.tasks.entry(e.task).or_default().total += 1;
        }
        for seq in detect_sequences(events, maze) {
            let side = classify_side(&seq.cells, seq.agent_cell, maze);
            let t = self.tasks.entry(seq.task).or_default();
            *t.in_sequences.entry((seq.direction, side)).or_default() += seq.len();
            *t.sequences.entry((seq.direction, side)).or_default() += 1;
        }
        for t in self.tasks.values_mut() {
            let seq_events: usize = t.in_sequences.values().sum();
            t.random = t.total - seq_events;
        }
    }

    pub fn of_runs<'a>(runs: impl IntoIterator<Item = &'a [ReplayEvent]>, maze: &Maze) -> ReplaySummary {
        let mut s = ReplaySummary::default();
        for events in runs {
            s.add_run(events, maze);
        }
        s
    }

    pub fn task(&self, task: TaskId) -> Option<&TaskReplayCounts> {
        self.tasks.get(&task)
    }

    /// CSV with columns `task,direction,side,count,proportion`; random
    /// reactivations have direction `random` and side `none`. Proportions
    /// are of all reactivations of the task.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,direction,side,count,proportion\n");
        for (task, t) in &self.tasks {
            let _ = writeln!(out, "{},random,none,{},{}", task.number(), t.random, t.random_fraction());
            for d in [Direction::Backward, Direction::Forward] {
                for s in [RelativeSide::Same, RelativeSide::Opposite, RelativeSide::Central] {
                    let n = t.in_sequences.get(&(d, s)).copied().unwrap_or(0);
                    let _ = writeln!(out, "{},{},{},{},{}", task.number(), d.name(), s.name(), n, t.fraction(n));
                }
            }
        }
        out
    }
}
