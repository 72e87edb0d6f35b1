//! Piecewise-constant value function on a 2-d grid.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mdp::State;

use super::{validate_fit_input, Checkpoint, ValueApproximator};

/// Square cells of side `cell` tiling the box `[lo, hi]`; every state within
/// a cell shares one value. Unvisited cells predict 0.
#[derive(Debug, Clone)]
pub struct GridApprox {
    lo: [f64; 2],
    hi: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    counts: Vec<u64>,
}

impl GridApprox {
    pub fn new(lo: [f64; 2], hi: [f64; 2], cell: f64) -> Result<Self> {
        if !(cell > 0.0) || hi[0] <= lo[0] || hi[1] <= lo[1] {
            return Err(Error::InvalidConfig(format!(
                "bad grid geometry: lo={lo:?} hi={hi:?} cell={cell}"
            )));
        }
        let nx = ((hi[0] - lo[0]) / cell).ceil() as usize;
        let ny = ((hi[1] - lo[1]) / cell).ceil() as usize;
        Ok(Self {
            lo,
            hi,
            cell,
            nx,
            ny,
            values: vec![0.0; nx * ny],
            counts: vec![0; nx * ny],
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Cell index of a point; points on/beyond the upper boundary fall into
    /// the last cell of their row/column.
    pub fn cell_index(&self, x: f64, y: f64) -> usize {
        let ix = (((x - self.lo[0]) / self.cell).floor() as isize).clamp(0, self.nx as isize - 1);
        let iy = (((y - self.lo[1]) / self.cell).floor() as isize).clamp(0, self.ny as isize - 1);
        iy as usize * self.nx + ix as usize
    }

    fn index_of(&self, state: &State) -> usize {
        let [x, y] = state
            .coords()
            .expect("grid approximator takes coordinate states");
        self.cell_index(x, y)
    }

    pub(super) fn from_checkpoint(
        lo: [f64; 2],
        hi: [f64; 2],
        cell: f64,
        counts: &[u64],
        params: &[f64],
    ) -> Result<Self> {
        let mut grid = Self::new(lo, hi, cell)?;
        if params.len() != grid.values.len() || counts.len() != grid.counts.len() {
            return Err(Error::Checkpoint("grid checkpoint length mismatch".into()));
        }
        grid.values.copy_from_slice(params);
        grid.counts.copy_from_slice(counts);
        Ok(grid)
    }
}

impl ValueApproximator for GridApprox {
    fn predict(&self, state: &State) -> f64 {
        self.values[self.index_of(state)]
    }

    fn fit(&mut self, states: &[State], targets: &[f64], _budget: usize) -> Result<()> {
        validate_fit_input(states, targets)?;
        let mut sums: HashMap<usize, (f64, u64)> = HashMap::new();
        for (state, &target) in states.iter().zip(targets) {
            let entry = sums.entry(self.index_of(state)).or_insert((0.0, 0));
            entry.0 += target;
            entry.1 += 1;
        }
        for (idx, (sum, n)) in sums {
            self.values[idx] = sum / n as f64;
            self.counts[idx] += n;
        }
        Ok(())
    }

    fn clone_fresh(&self, _seed: u64) -> Box<dyn ValueApproximator> {
        Box::new(GridApprox::new(self.lo, self.hi, self.cell).expect("geometry already validated"))
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::Grid {
            lo: self.lo,
            hi: self.hi,
            cell: self.cell,
            counts: self.counts.clone(),
            params: self.values.clone(),
        }
    }
}
