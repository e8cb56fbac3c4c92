//! Discrete double T-maze: layout parsing, lap circulation, blocking and the
//! task contingencies.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{PlaceKernel, RewardMemory, StateVector};

/// Number of open positions every layout must have.
pub const MAZE_CELLS: usize = 32;

const DEFAULT_LAYOUT: &str = include_str!("../data/double_t.maze");

#[derive(Debug, Error)]
pub enum MazeError {
    #[error("io error reading maze file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("layout has {found} open cells, expected {MAZE_CELLS}")]
    CellCount { found: usize },
    #[error("layout is missing marker '{0}'")]
    MissingMarker(char),
    #[error("marker '{0}' appears more than once")]
    DuplicateMarker(char),
    #[error("cell {0} is not reachable from the start cell")]
    Unreachable(CellId),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("cell {0} is blocked or out of range")]
    BlockedCell(CellId),
    #[error("action {action} is not valid from cell {cell}")]
    InvalidAction { cell: CellId, action: Action },
}

/// The four movement actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    North,
    South,
    East,
    West,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

    pub fn index(self) -> usize {
        match self {
            Action::North => 0,
            Action::South => 1,
            Action::East => 2,
            Action::West => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// (row, col) displacement.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Action::North => (-1, 0),
            Action::South => (1, 0),
            Action::East => (0, 1),
            Action::West => (0, -1),
        }
    }

    pub fn reverse(self) -> Action {
        match self {
            Action::North => Action::South,
            Action::South => Action::North,
            Action::East => Action::West,
            Action::West => Action::East,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Action::North => 'N',
            Action::South => 'S',
            Action::East => 'E',
            Action::West => 'W',
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Coarse region of the maze used to classify replayed sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Left,
    Right,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub usize);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

/// Reward contingency of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    /// 1: always right, left side blocked.
    RightBlocked,
    /// 2: always left, right side blocked.
    LeftBlocked,
    /// 3: always right.
    Right,
    /// 4: always left.
    Left,
    /// 5: alternate sides lap by lap.
    Alternation,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [
        TaskId::RightBlocked,
        TaskId::LeftBlocked,
        TaskId::Right,
        TaskId::Left,
        TaskId::Alternation,
    ];

    pub fn from_number(n: u8) -> Option<TaskId> {
        match n {
            1 => Some(TaskId::RightBlocked),
            2 => Some(TaskId::LeftBlocked),
            3 => Some(TaskId::Right),
            4 => Some(TaskId::Left),
            5 => Some(TaskId::Alternation),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            TaskId::RightBlocked => 1,
            TaskId::LeftBlocked => 2,
            TaskId::Right => 3,
            TaskId::Left => 4,
            TaskId::Alternation => 5,
        }
    }

    /// Side whose arm is closed off during this task.
    pub fn blocked_side(self) -> Option<Side> {
        match self {
            TaskId::RightBlocked => Some(Side::Left),
            TaskId::LeftBlocked => Some(Side::Right),
            _ => None,
        }
    }

    /// Whether arriving at `side`'s reward site pays off, given the reward
    /// history. The first lap of the alternation task pays on both sides.
    pub fn rewards(self, side: Side, memory: &RewardMemory) -> bool {
        match self {
            TaskId::RightBlocked | TaskId::Right => side == Side::Right,
            TaskId::LeftBlocked | TaskId::Left => side == Side::Left,
            TaskId::Alternation => match memory.last() {
                Some(last) => side != last,
                None => true,
            },
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Outcome of one move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: CellId,
    pub reward: f64,
    pub rewarded_side: Option<Side>,
}

/// A validated 32-position maze, optionally with one arm blocked.
///
/// Travel follows a fixed circulation: up the stem from T1 to T2, out along
/// either arm, back down to T1. Moves against it (including reversals) are
/// never offered by [`Maze::valid_actions`].
#[derive(Debug, Clone)]
pub struct Maze {
    rows: usize,
    cols: usize,
    coords: Vec<Coord>,
    grid: Vec<Option<CellId>>,
    neighbors: Vec<[Option<CellId>; 4]>,
    forward: Vec<[bool; 4]>,
    reward_sites: [CellId; 2],
    start: CellId,
    t1: CellId,
    t2: CellId,
    zones: Vec<Zone>,
    arms: [Vec<CellId>; 2],
    stem: Vec<CellId>,
    blocked: Vec<bool>,
    blocked_side: Option<Side>,
    dist: Vec<Vec<Option<u32>>>,
    kernel: PlaceKernel,
}

impl Maze {
    /// The built-in double T-maze layout.
    pub fn default_layout() -> Maze {
        Maze::parse(DEFAULT_LAYOUT).expect("built-in layout is valid")
    }

    pub fn default_layout_text() -> &'static str {
        DEFAULT_LAYOUT
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Maze, MazeError> {
        let text = std::fs::read_to_string(path)?;
        Maze::parse(&text)
    }

    /// Parses the ASCII layout format: `#` wall, `.` open, `S` start,
    /// `L`/`R` reward sites, `1`/`2` junctions, `%` comment lines. An
    /// optional `[zones]` block of the same shape assigns `l`/`r`/`c` zones.
    pub fn parse(text: &str) -> Result<Maze, MazeError> {
        let mut layout: Vec<(usize, Vec<char>)> = Vec::new();
        let mut zone_rows: Vec<(usize, Vec<char>)> = Vec::new();
        let mut in_zones = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.starts_with('%') || line.is_empty() {
                continue;
            }
            if line == "[zones]" {
                if in_zones {
                    return Err(MazeError::Parse { line: i + 1, msg: "duplicate [zones] block".into() });
                }
                in_zones = true;
                continue;
            }
            let chars: Vec<char> = line.chars().collect();
            if in_zones {
                zone_rows.push((i + 1, chars));
            } else {
                layout.push((i + 1, chars));
            }
        }
        if layout.is_empty() {
            return Err(MazeError::Parse { line: 0, msg: "empty layout".into() });
        }
        let cols = layout[0].1.len();
        for (line, row) in &layout {
            if row.len() != cols {
                return Err(MazeError::Parse { line: *line, msg: "rows must have equal length".into() });
            }
        }
        let rows = layout.len();

        let mut coords = Vec::new();
        let mut grid = vec![None; rows * cols];
        let mut start = None;
        let mut t1 = None;
        let mut t2 = None;
        let mut left = None;
        let mut right = None;
        for (r, (line, row)) in layout.iter().enumerate() {
            for (c, &ch) in row.iter().enumerate() {
                let marker = match ch {
                    '#' => continue,
                    '.' => None,
                    'S' => Some(&mut start),
                    '1' => Some(&mut t1),
                    '2' => Some(&mut t2),
                    'L' => Some(&mut left),
                    'R' => Some(&mut right),
                    other => {
                        return Err(MazeError::Parse {
                            line: *line,
                            msg: format!("unexpected character '{other}'"),
                        })
                    }
                };
                let id = CellId(coords.len());
                coords.push(Coord { row: r, col: c });
                grid[r * cols + c] = Some(id);
                if let Some(slot) = marker {
                    if slot.replace(id).is_some() {
                        return Err(MazeError::DuplicateMarker(ch));
                    }
                }
            }
        }
        if coords.len() != MAZE_CELLS {
            return Err(MazeError::CellCount { found: coords.len() });
        }
        let start = start.ok_or(MazeError::MissingMarker('S'))?;
        let t1 = t1.ok_or(MazeError::MissingMarker('1'))?;
        let t2 = t2.ok_or(MazeError::MissingMarker('2'))?;
        let left = left.ok_or(MazeError::MissingMarker('L'))?;
        let right = right.ok_or(MazeError::MissingMarker('R'))?;

        let neighbors: Vec<[Option<CellId>; 4]> = coords
            .iter()
            .map(|&co| {
                let mut n = [None; 4];
                for a in Action::ALL {
                    let (dr, dc) = a.delta();
                    let r = co.row as isize + dr;
                    let c = co.col as isize + dc;
                    if r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols {
                        n[a.index()] = grid[r as usize * cols + c as usize];
                    }
                }
                n
            })
            .collect();

        let mut maze = Maze {
            rows,
            cols,
            coords,
            grid,
            neighbors,
            forward: Vec::new(),
            reward_sites: [left, right],
            start,
            t1,
            t2,
            zones: Vec::new(),
            arms: [Vec::new(), Vec::new()],
            stem: Vec::new(),
            blocked: vec![false; MAZE_CELLS],
            blocked_side: None,
            dist: Vec::new(),
            kernel: PlaceKernel::default(),
        };
        maze.build_circulation()?;
        maze.zones = if zone_rows.is_empty() {
            maze.derived_zones()
        } else {
            maze.parse_zones(&zone_rows)?
        };
        maze.refresh_distances();
        maze.check_reachability()?;
        Ok(maze)
    }

    fn build_circulation(&mut self) -> Result<(), MazeError> {
        let n = self.coords.len();
        // Stem: shortest path T1 -> T2.
        let mut prev = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([self.t1]);
        seen[self.t1.0] = true;
        while let Some(c) = queue.pop_front() {
            for nb in self.neighbors[c.0].iter().flatten() {
                if !seen[nb.0] {
                    seen[nb.0] = true;
                    prev[nb.0] = Some(c);
                    queue.push_back(*nb);
                }
            }
        }
        if !seen[self.t2.0] {
            return Err(MazeError::Topology("T2 not connected to T1".into()));
        }
        let mut path = vec![self.t2];
        while let Some(p) = prev[path.last().unwrap().0] {
            path.push(p);
        }
        path.reverse();
        let stem: Vec<CellId> = path[1..path.len() - 1].to_vec();

        let mut on_loop = vec![true; n];
        for c in &stem {
            on_loop[c.0] = false;
        }
        on_loop[self.t1.0] = false;
        on_loop[self.t2.0] = false;

        // Each arm is a corridor from a T2 neighbour to a T1 neighbour.
        let mut arm_of = vec![None; n];
        let mut arms: Vec<Vec<CellId>> = Vec::new();
        for &entry in self.neighbors[self.t2.0].iter().flatten() {
            if !on_loop[entry.0] || arm_of[entry.0].is_some() {
                continue;
            }
            let idx = arms.len();
            let mut arm = vec![entry];
            arm_of[entry.0] = Some(idx);
            let mut cur = entry;
            loop {
                let next: Vec<CellId> = self.neighbors[cur.0]
                    .iter()
                    .flatten()
                    .copied()
                    .filter(|c| on_loop[c.0] && arm_of[c.0].is_none())
                    .collect();
                match next.len() {
                    0 => break,
                    1 => {
                        arm_of[next[0].0] = Some(idx);
                        arm.push(next[0]);
                        cur = next[0];
                    }
                    _ => return Err(MazeError::Topology(format!("arm branches at cell {cur}"))),
                }
            }
            let tail = *arm.last().unwrap();
            if !self.neighbors[tail.0].contains(&Some(self.t1)) {
                return Err(MazeError::Topology(format!("arm from {entry} does not return to T1")));
            }
            arms.push(arm);
        }
        if arms.len() != 2 {
            return Err(MazeError::Topology(format!("expected 2 arms, found {}", arms.len())));
        }
        if let Some(stray) = (0..n).find(|&c| on_loop[c] && arm_of[c].is_none()) {
            return Err(MazeError::Topology(format!("cell {stray} is on neither arm nor stem")));
        }
        let [left_site, right_site] = self.reward_sites;
        let side_of = |arm: &Vec<CellId>| -> Result<Side, MazeError> {
            match (arm.contains(&left_site), arm.contains(&right_site)) {
                (true, false) => Ok(Side::Left),
                (false, true) => Ok(Side::Right),
                _ => Err(MazeError::Topology("each arm must hold exactly one reward site".into())),
            }
        };
        let first = side_of(&arms[0])?;
        let second = side_of(&arms[1])?;
        if first == second {
            return Err(MazeError::Topology("both reward sites on one arm".into()));
        }
        let (a0, a1) = (arms.remove(0), arms.remove(0));
        self.arms = if first == Side::Left { [a0, a1] } else { [a1, a0] };

        let mut forward = vec![[false; 4]; n];
        let mut link = |from: CellId, to: CellId, neighbors: &[[Option<CellId>; 4]]| {
            let a = Action::ALL
                .iter()
                .position(|a| neighbors[from.0][a.index()] == Some(to))
                .expect("linked cells are adjacent");
            forward[from.0][a] = true;
        };
        let mut chain = vec![self.t1];
        chain.extend(stem.iter().copied());
        chain.push(self.t2);
        for w in chain.windows(2) {
            link(w[0], w[1], &self.neighbors);
        }
        for arm in &self.arms {
            link(self.t2, arm[0], &self.neighbors);
            for w in arm.windows(2) {
                link(w[0], w[1], &self.neighbors);
            }
            link(*arm.last().unwrap(), self.t1, &self.neighbors);
        }
        self.forward = forward;
        self.stem = stem;
        Ok(())
    }

    fn derived_zones(&self) -> Vec<Zone> {
        let mut zones = vec![Zone::Central; self.coords.len()];
        for (side, zone) in [(Side::Left, Zone::Left), (Side::Right, Zone::Right)] {
            for c in &self.arms[side.index()] {
                zones[c.0] = zone;
            }
        }
        zones
    }

    fn parse_zones(&self, rows: &[(usize, Vec<char>)]) -> Result<Vec<Zone>, MazeError> {
        if rows.len() != self.rows {
            return Err(MazeError::Parse {
                line: rows.first().map_or(0, |r| r.0),
                msg: "zone block must match the layout height".into(),
            });
        }
        let mut zones = vec![Zone::Central; self.coords.len()];
        for (r, (line, row)) in rows.iter().enumerate() {
            if row.len() != self.cols {
                return Err(MazeError::Parse { line: *line, msg: "zone row width differs from layout".into() });
            }
            for (c, &ch) in row.iter().enumerate() {
                let cell = self.grid[r * self.cols + c];
                match (cell, ch) {
                    (None, '#') => {}
                    (Some(id), 'l') => zones[id.0] = Zone::Left,
                    (Some(id), 'r') => zones[id.0] = Zone::Right,
                    (Some(id), 'c') => zones[id.0] = Zone::Central,
                    _ => {
                        return Err(MazeError::Parse {
                            line: *line,
                            msg: format!("zone character '{ch}' does not match the layout"),
                        })
                    }
                }
            }
        }
        Ok(zones)
    }

    fn refresh_distances(&mut self) {
        let n = self.coords.len();
        self.dist = (0..n)
            .map(|src| {
                let mut d = vec![None; n];
                if self.blocked[src] {
                    return d;
                }
                d[src] = Some(0);
                let mut queue = VecDeque::from([src]);
                while let Some(c) = queue.pop_front() {
                    let dc = d[c].unwrap();
                    for nb in self.neighbors[c].iter().flatten() {
                        if !self.blocked[nb.0] && d[nb.0].is_none() {
                            d[nb.0] = Some(dc + 1);
                            queue.push_back(nb.0);
                        }
                    }
                }
                d
            })
            .collect();
    }

    fn check_reachability(&self) -> Result<(), MazeError> {
        if self.blocked[self.start.0] {
            return Err(MazeError::BlockedCell(self.start));
        }
        for j in [self.t1, self.t2] {
            if self.blocked[j.0] {
                return Err(MazeError::BlockedCell(j));
            }
        }
        for side in [Side::Left, Side::Right] {
            if Some(side) == self.blocked_side {
                continue;
            }
            let site = self.reward_site(side);
            if self.blocked[site.0] || self.dist[self.start.0][site.0].is_none() {
                return Err(MazeError::Unreachable(site));
            }
        }
        // Every cell the circulation can lead to must offer a way on.
        let reach = self.reachable_from_start();
        for (c, &r) in reach.iter().enumerate() {
            if r && self.valid_actions(CellId(c), None).is_empty() {
                return Err(MazeError::Topology(format!("dead end at cell {c}")));
            }
        }
        Ok(())
    }

    /// Cells reachable from the start by legal moves under the current blocking.
    pub fn reachable_from_start(&self) -> Vec<bool> {
        let mut seen = vec![false; self.coords.len()];
        seen[self.start.0] = true;
        let mut queue = VecDeque::from([self.start]);
        while let Some(c) = queue.pop_front() {
            for a in self.valid_actions(c, None) {
                let nb = self.neighbor(c, a).unwrap();
                if !seen[nb.0] {
                    seen[nb.0] = true;
                    queue.push_back(nb);
                }
            }
        }
        seen
    }

    /// Copy of this maze with every cell of `side`'s arm blocked.
    pub fn with_blocked_side(&self, side: Side) -> Result<Maze, MazeError> {
        let cells = self.arms[side.index()].clone();
        self.with_blocked_cells(side, &cells)
    }

    /// Copy of this maze with the given cells removed from adjacency. The
    /// reachability check on `side`'s reward site is waived.
    pub fn with_blocked_cells(&self, side: Side, cells: &[CellId]) -> Result<Maze, MazeError> {
        let mut m = self.clone();
        m.blocked = vec![false; self.coords.len()];
        for c in cells {
            if c.0 >= self.coords.len() {
                return Err(MazeError::BlockedCell(*c));
            }
            m.blocked[c.0] = true;
        }
        m.blocked_side = Some(side);
        m.refresh_distances();
        m.check_reachability()?;
        Ok(m)
    }

    /// Unblocked copy.
    pub fn unblocked(&self) -> Maze {
        let mut m = self.clone();
        m.blocked = vec![false; self.coords.len()];
        m.blocked_side = None;
        m.refresh_distances();
        m
    }

    /// The maze as seen during `task`: blocked arm applied for tasks 1 and 2.
    pub fn for_task(&self, task: TaskId) -> Result<Maze, MazeError> {
        match task.blocked_side() {
            Some(side) => self.unblocked().with_blocked_side(side),
            None => Ok(self.unblocked()),
        }
    }

    pub fn with_kernel(mut self, kernel: PlaceKernel) -> Maze {
        self.kernel = kernel;
        self
    }

    pub fn kernel(&self) -> PlaceKernel {
        self.kernel
    }

    pub fn n_cells(&self) -> usize {
        self.coords.len()
    }

    /// Length of an encoded state: place cells plus the two memory components.
    pub fn state_dim(&self) -> usize {
        self.coords.len() + 2
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coord(&self, cell: CellId) -> Coord {
        self.coords[cell.0]
    }

    pub fn cell_at(&self, row: usize, col: usize) -> Option<CellId> {
        if row < self.rows && col < self.cols {
            self.grid[row * self.cols + col]
        } else {
            None
        }
    }

    pub fn start(&self) -> CellId {
        self.start
    }

    pub fn t1(&self) -> CellId {
        self.t1
    }

    pub fn t2(&self) -> CellId {
        self.t2
    }

    pub fn reward_site(&self, side: Side) -> CellId {
        self.reward_sites[side.index()]
    }

    /// Which side's reward site `cell` is, if any.
    pub fn site_side(&self, cell: CellId) -> Option<Side> {
        [Side::Left, Side::Right].into_iter().find(|&s| self.reward_site(s) == cell)
    }

    pub fn zone(&self, cell: CellId) -> Zone {
        self.zones[cell.0]
    }

    /// Cells of one arm, ordered in the direction of travel (T2 to T1).
    pub fn arm(&self, side: Side) -> &[CellId] {
        &self.arms[side.index()]
    }

    /// Stem cells strictly between T1 and T2, bottom to top.
    pub fn stem(&self) -> &[CellId] {
        &self.stem
    }

    pub fn blocked_side(&self) -> Option<Side> {
        self.blocked_side
    }

    pub fn is_open(&self, cell: CellId) -> bool {
        cell.0 < self.coords.len() && !self.blocked[cell.0]
    }

    pub fn open_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.coords.len()).map(CellId).filter(|c| !self.blocked[c.0])
    }

    /// Geometric neighbour, ignoring blocking and circulation.
    pub fn neighbor(&self, cell: CellId, action: Action) -> Option<CellId> {
        self.neighbors[cell.0][action.index()]
    }

    /// Whether two cells share a wall-free edge (ignores travel direction).
    pub fn adjacent(&self, a: CellId, b: CellId) -> bool {
        self.neighbors[a.0].contains(&Some(b))
    }

    /// Whether `from -> to` is a single legal move along the circulation.
    pub fn is_forward_move(&self, from: CellId, to: CellId) -> bool {
        Action::ALL
            .iter()
            .any(|a| self.forward[from.0][a.index()] && self.neighbors[from.0][a.index()] == Some(to))
    }

    /// Geodesic distance through open cells.
    pub fn geodesic(&self, a: CellId, b: CellId) -> Option<u32> {
        self.dist[a.0][b.0]
    }

    /// Actions that lead to an open cell, follow the lap circulation and do
    /// not step back onto `prev`.
    pub fn valid_actions(&self, cell: CellId, prev: Option<CellId>) -> Vec<Action> {
        if !self.is_open(cell) {
            return Vec::new();
        }
        Action::ALL
            .into_iter()
            .filter(|a| {
                let Some(nb) = self.neighbors[cell.0][a.index()] else {
                    return false;
                };
                self.forward[cell.0][a.index()] && !self.blocked[nb.0] && Some(nb) != prev
            })
            .collect()
    }

    /// Cells from which `action` leads into `cell` by a legal move.
    pub fn predecessor(&self, cell: CellId, action: Action) -> Option<CellId> {
        let from = self.neighbors[cell.0][action.reverse().index()]?;
        (self.is_open(from) && self.is_open(cell) && self.forward[from.0][action.index()]).then_some(from)
    }

    /// Moves the agent and applies the task's reward rule.
    pub fn step(
        &self,
        task: TaskId,
        memory: &RewardMemory,
        cell: CellId,
        prev: Option<CellId>,
        action: Action,
        reward_magnitude: f64,
    ) -> Result<Step, MazeError> {
        if !self.is_open(cell) {
            return Err(MazeError::BlockedCell(cell));
        }
        if !self.valid_actions(cell, prev).contains(&action) {
            return Err(MazeError::InvalidAction { cell, action });
        }
        let next = self.neighbors[cell.0][action.index()].expect("valid action has a neighbour");
        let rewarded_side = self.site_side(next).filter(|&s| task.rewards(s, memory));
        Ok(Step {
            next,
            reward: if rewarded_side.is_some() { reward_magnitude } else { 0.0 },
            rewarded_side,
        })
    }

    /// Place-cell population code of `cell` followed by the memory pair.
    pub fn encode_state(&self, cell: CellId, memory: &RewardMemory) -> Result<StateVector, MazeError> {
        if !self.is_open(cell) {
            return Err(MazeError::BlockedCell(cell));
        }
        let mut v = Vec::with_capacity(self.state_dim());
        for other in 0..self.coords.len() {
            v.push(match self.dist[cell.0][other] {
                Some(d) => self.kernel.activation(d as f64),
                None => 0.0,
            });
        }
        let (l, r) = memory.levels();
        v.push(l);
        v.push(r);
        Ok(StateVector::new(v))
    }

    /// Shortest lap length in moves from one reward site to the next.
    pub fn lap_length(&self) -> usize {
        // site -> end of its arm -> T1 -> stem -> T2 -> other arm up to its site
        let side = Side::Right;
        let arm = self.arm(side);
        let pos = arm.iter().position(|&c| c == self.reward_site(side)).unwrap();
        let to_t1 = arm.len() - pos;
        let other = self.arm(side.opposite());
        let opos = other.iter().position(|&c| c == self.reward_site(side.opposite())).unwrap();
        to_t1 + self.stem.len() + 1 + opos + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flood_fill(m: &Maze, from: CellId) -> Vec<bool> {
        let mut seen = vec![false; m.n_cells()];
        let mut stack = vec![from];
        while let Some(c) = stack.pop() {
            if seen[c.0] || !m.is_open(c) {
                continue;
            }
            seen[c.0] = true;
            for a in Action::ALL {
                if let Some(nb) = m.neighbor(c, a) {
                    stack.push(nb);
                }
            }
        }
        seen
    }

    #[test]
    fn default_layout_shape() {
        let m = Maze::default_layout();
        assert_eq!(m.n_cells(), 32);
        assert_eq!(m.state_dim(), 34);
        assert_ne!(m.reward_site(Side::Left), m.reward_site(Side::Right));
        assert_ne!(m.t1(), m.t2());
        assert_eq!(m.stem().len(), 6);
        assert_eq!(m.arm(Side::Left).len(), 12);
        assert_eq!(m.arm(Side::Right).len(), 12);
    }

    #[test]
    fn wrong_cell_count_rejected() {
        let text = Maze::default_layout_text().replacen("L##.##R", "L##.###", 1).replacen("[zones]", "", 1);
        let text: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        match Maze::parse(&text) {
            Err(MazeError::CellCount { found: 31 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unequal_rows_rejected() {
        let err = Maze::parse("...2...\nL##.##R.\n").unwrap_err();
        assert!(matches!(err, MazeError::Parse { .. }));
    }

    #[test]
    fn adjacency_symmetric() {
        let m = Maze::default_layout();
        for c in m.open_cells() {
            for a in Action::ALL {
                if let Some(nb) = m.neighbor(c, a) {
                    assert_eq!(m.neighbor(nb, a.reverse()), Some(c));
                }
            }
        }
    }

    #[test]
    fn blocked_left_arm_unreachable() {
        let m = Maze::default_layout().with_blocked_side(Side::Left).unwrap();
        let seen = flood_fill(&m, m.start());
        for &c in m.arm(Side::Left) {
            assert!(!seen[c.0]);
        }
        assert!(seen[m.reward_site(Side::Right).0]);
        assert!(!m.is_open(m.reward_site(Side::Left)));
    }

    #[test]
    fn valid_actions_examples() {
        let m = Maze::default_layout();
        let s1 = m.stem()[2];
        let below = m.stem()[1];
        assert_eq!(m.valid_actions(s1, Some(below)), vec![Action::North]);
        let top = *m.stem().last().unwrap();
        assert_eq!(m.valid_actions(m.t2(), Some(top)), vec![Action::East, Action::West]);
        assert_eq!(m.valid_actions(m.start(), None), vec![Action::North]);
        // Arriving at T1 from an arm only the stem is offered.
        let left_tail = *m.arm(Side::Left).last().unwrap();
        assert_eq!(m.valid_actions(m.t1(), Some(left_tail)), vec![Action::North]);
    }

    #[test]
    fn valid_actions_never_empty() {
        for task in TaskId::ALL {
            let m = Maze::default_layout().for_task(task).unwrap();
            let reach = m.reachable_from_start();
            for c in m.open_cells().filter(|c| reach[c.0]) {
                let arrivals = Action::ALL.iter().filter_map(|&a| m.neighbor(c, a)).filter(|&p| m.is_forward_move(p, c));
                for prev in std::iter::once(None).chain(arrivals.map(Some)) {
                    assert!(!m.valid_actions(c, prev).is_empty(), "cell {c} prev {prev:?}");
                }
            }
        }
    }

    #[test]
    fn step_rewards_right_in_task_three() {
        let m = Maze::default_layout();
        let site = m.reward_site(Side::Right);
        let before = m.arm(Side::Right)[2];
        assert_eq!(m.arm(Side::Right)[3], site);
        let a = Action::ALL.into_iter().find(|&a| m.neighbor(before, a) == Some(site)).unwrap();
        let mem = RewardMemory::default();
        let s = m.step(TaskId::Right, &mem, before, None, a, 0.8).unwrap();
        assert_eq!(s.next, site);
        assert_eq!(s.reward, 0.8);
        assert_eq!(s.rewarded_side, Some(Side::Right));
    }

    #[test]
    fn alternation_withholds_repeat_side() {
        let m = Maze::default_layout();
        let site = m.reward_site(Side::Left);
        let before = m.arm(Side::Left)[2];
        let mem = RewardMemory::default().update(Some(Side::Left));
        let a = Action::ALL.into_iter().find(|&a| m.neighbor(before, a) == Some(site)).unwrap();
        let s = m.step(TaskId::Alternation, &mem, before, None, a, 0.8).unwrap();
        assert_eq!(s.reward, 0.0);
        assert_eq!(s.rewarded_side, None);
        // First alternation lap pays either side.
        let s = m.step(TaskId::Alternation, &RewardMemory::default(), before, None, a, 0.8).unwrap();
        assert_eq!(s.reward, 0.8);
    }

    #[test]
    fn invalid_moves_are_errors() {
        let m = Maze::default_layout();
        let s1 = m.stem()[2];
        assert!(matches!(
            m.step(TaskId::Right, &RewardMemory::default(), s1, None, Action::East, 0.8),
            Err(MazeError::InvalidAction { .. })
        ));
        let below = m.stem()[1];
        assert!(m.step(TaskId::Right, &RewardMemory::default(), s1, Some(below), Action::South, 0.8).is_err());
    }

    #[test]
    fn lap_length_default() {
        assert_eq!(Maze::default_layout().lap_length(), 20);
    }

    #[test]
    fn zones_from_file() {
        let m = Maze::default_layout();
        assert_eq!(m.zone(m.t2()), Zone::Central);
        assert_eq!(m.zone(m.reward_site(Side::Left)), Zone::Left);
        assert_eq!(m.zone(m.reward_site(Side::Right)), Zone::Right);
        for &c in m.stem() {
            assert_eq!(m.zone(c), Zone::Central);
        }
    }
}
