//! State vectors: place-cell activity plus the two reward-memory components.

use serde::{Deserialize, Serialize};

use crate::maze::{CellId, Side};

/// The three levels a memory component can take.
pub const MEMORY_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];

/// Linear place-field kernel over geodesic distance: peak 1 at the cell,
/// zero from `radius` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaceKernel {
    pub radius: f64,
}

impl Default for PlaceKernel {
    fn default() -> Self {
        PlaceKernel { radius: 3.0 }
    }
}

impl PlaceKernel {
    pub fn activation(&self, distance: f64) -> f64 {
        ((self.radius - distance) / self.radius).max(0.0)
    }
}

/// Sides of the last two rewards. L/R levels are derived from it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RewardMemory {
    last: Option<Side>,
    penultimate: Option<Side>,
}

impl RewardMemory {
    pub fn new(last: Option<Side>, penultimate: Option<Side>) -> Self {
        RewardMemory { last, penultimate }
    }

    pub fn last(&self) -> Option<Side> {
        self.last
    }

    pub fn penultimate(&self) -> Option<Side> {
        self.penultimate
    }

    /// Shifts the history on a rewarded event; unrewarded steps leave it as is.
    pub fn update(self, rewarded: Option<Side>) -> RewardMemory {
        match rewarded {
            None => self,
            Some(side) => RewardMemory { last: Some(side), penultimate: self.last },
        }
    }

    /// (L, R): 1 for the side of the last reward, 0.5 for the side of the
    /// penultimate one, 0 otherwise.
    pub fn levels(&self) -> (f64, f64) {
        let level = |side: Side| {
            if self.last == Some(side) {
                1.0
            } else if self.penultimate == Some(side) {
                0.5
            } else {
                0.0
            }
        };
        (level(Side::Left), level(Side::Right))
    }
}

/// A 34-dimensional state: `n_cells` place activities then L and R.
///
/// Also used for raw network outputs during replay, which need not be exact
/// encodings of any position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        StateVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn place(&self) -> &[f64] {
        &self.0[..self.0.len() - 2]
    }

    pub fn mem_l(&self) -> f64 {
        self.0[self.0.len() - 2]
    }

    pub fn mem_r(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn l1_distance(&self, other: &StateVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn is_null(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// Memory components snapped to the nearest of {0, 0.5, 1}.
    pub fn memory_levels(&self) -> (f64, f64) {
        (nearest_level(self.mem_l()), nearest_level(self.mem_r()))
    }
}

fn nearest_level(x: f64) -> f64 {
    let mut best = MEMORY_LEVELS[0];
    for &l in &MEMORY_LEVELS[1..] {
        if (x - l).abs() < (x - best).abs() {
            best = l;
        }
    }
    best
}

/// Argmax over the place components, lowest id on ties. `None` marks the
/// null state (no positive place activity).
pub fn decode_position(state: &StateVector) -> Option<CellId> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in state.place().iter().enumerate() {
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| CellId(i))
}

/// Position plus snapped memory levels, the unit replay analysis and
/// world-model checks compare on. Memory levels are kept as halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DecodedState {
    pub cell: CellId,
    pub mem_l_halves: u8,
    pub mem_r_halves: u8,
}

impl DecodedState {
    pub fn of(state: &StateVector) -> Option<DecodedState> {
        let cell = decode_position(state)?;
        let (l, r) = state.memory_levels();
        Some(DecodedState { cell, mem_l_halves: (l * 2.0).round() as u8, mem_r_halves: (r * 2.0).round() as u8 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let k = PlaceKernel::default();
        assert_eq!(k.activation(0.0), 1.0);
        assert!((k.activation(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(k.activation(3.0), 0.0);
        assert_eq!(k.activation(7.0), 0.0);
    }

    #[test]
    fn memory_table_rows() {
        use Side::*;
        // last right, penultimate left, then a left reward
        let m = RewardMemory::new(Some(Right), Some(Left)).update(Some(Left));
        assert_eq!(m.levels(), (1.0, 0.5));
        let m = RewardMemory::new(Some(Right), Some(Right)).update(Some(Right));
        assert_eq!(m.levels(), (0.0, 1.0));
        let m = RewardMemory::new(Some(Left), None);
        assert_eq!(m.update(None), m);
        assert_eq!(RewardMemory::default().levels(), (0.0, 0.0));
    }

    #[test]
    fn decode_null_and_ties() {
        assert_eq!(decode_position(&StateVector::zeros(34)), None);
        let mut v = vec![0.0; 34];
        v[5] = 0.7;
        v[3] = 0.7;
        assert_eq!(decode_position(&StateVector::new(v)), Some(CellId(3)));
    }

    #[test]
    fn snapped_levels() {
        let mut v = vec![0.0; 34];
        v[0] = 1.0;
        v[32] = 0.62;
        v[33] = 0.2;
        let s = StateVector::new(v);
        assert_eq!(s.memory_levels(), (0.5, 0.0));
        let d = DecodedState::of(&s).unwrap();
        assert_eq!((d.mem_l_halves, d.mem_r_halves), (1, 0));
    }
}
