//! Uniform opinion grid on `[-1, 1]` and uniform time grid on `[0, T]`.
//!
//! Every continuum integral in the crate (masses, costs, nonlocal operators)
//! goes through the trapezoid weights defined here.

use crate::error::{check_len, Error, Result};

/// Relative slack applied when computing `Q = floor(T / ds)` so that a
/// horizon which is an exact multiple of `ds` up to rounding is not cut short.
const STEP_COUNT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    cells: usize,
    dw: f64,
    ds: f64,
    steps: usize,
    nodes: Vec<f64>,
}

impl Mesh {
    /// Builds a mesh with `cells` spatial cells (`cells + 1` nodes) and
    /// `floor(horizon / ds)` time steps.
    pub fn new(cells: usize, ds: f64, horizon: f64) -> Result<Self> {
        if cells < 2 {
            return Err(Error::invalid("L", format!("need at least 2 cells, got {cells}")));
        }
        if !(ds > 0.0) || !ds.is_finite() {
            return Err(Error::invalid("ds", format!("must be positive, got {ds}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("T", format!("must be positive, got {horizon}")));
        }
        if horizon < ds * (1.0 - STEP_COUNT_SLACK) {
            return Err(Error::invalid("T", format!("horizon {horizon} shorter than ds {ds}")));
        }
        let steps = ((horizon / ds) * (1.0 + STEP_COUNT_SLACK)).floor() as usize;
        let l = cells as f64;
        // (2i - L) / L is exactly mirror-symmetric and hits -1 and 1 exactly.
        let nodes = (0..=cells)
            .map(|i| (2.0 * i as f64 - l) / l)
            .collect();
        Ok(Self {
            cells,
            dw: 2.0 / l,
            ds,
            steps,
            nodes,
        })
    }

    /// Mesh with time step `ds = ds_factor * dw`.
    pub fn with_ds_factor(cells: usize, ds_factor: f64, horizon: f64) -> Result<Self> {
        if cells < 2 {
            return Err(Error::invalid("L", format!("need at least 2 cells, got {cells}")));
        }
        Self::new(cells, ds_factor * 2.0 / cells as f64, horizon)
    }

    /// Number of spatial cells `L`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn node_count(&self) -> usize {
        self.cells + 1
    }

    pub fn dw(&self) -> f64 {
        self.dw
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    /// Number of time steps `Q`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time_node_count(&self) -> usize {
        self.steps + 1
    }

    /// Final time `T = Q * ds`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.ds
    }

    pub fn time(&self, t: usize) -> f64 {
        t as f64 * self.ds
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Coordinate of the half node `w_{i+1/2}`, `i = 0..L-1`.
    pub fn half_node(&self, i: usize) -> f64 {
        let l = self.cells as f64;
        (2.0 * i as f64 + 1.0 - l) / l
    }

    pub fn half_nodes(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.half_node(i)).collect()
    }

    /// Trapezoid weight of node `i`: `dw` inside, `dw / 2` at the two ends.
    ///
    /// This is also the width of the control volume owned by node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.dw
        } else {
            self.dw
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.weight(i)).collect()
    }

    /// Trapezoid weight of time node `t` over `[0, T]`.
    pub fn time_weight(&self, t: usize) -> f64 {
        if t == 0 || t == self.steps {
            0.5 * self.ds
        } else {
            self.ds
        }
    }

    /// `dw * (f_0/2 + f_1 + ... + f_{L-1} + f_L/2)`.
    pub fn quad_trapezoid(&self, f: &[f64]) -> Result<f64> {
        check_len(self.node_count(), f.len())?;
        Ok(self.quad_unchecked(f))
    }

    pub(crate) fn quad_unchecked(&self, f: &[f64]) -> f64 {
        let n = f.len();
        let interior: f64 = f[1..n - 1].iter().sum();
        self.dw * (0.5 * (f[0] + f[n - 1]) + interior)
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&w| f(w)).collect()
    }

    /// Index of the node nearest to `w`, clamped to the grid.
    pub fn nearest_node(&self, w: f64) -> usize {
        let x = ((w + 1.0) / self.dw).round();
        (x.max(0.0) as usize).min(self.cells)
    }
}
