use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::geometry::{Grid, NodeClass};

/// Interpolation weights closer than this to 0 or 1 (in cell units) are snapped.
const SNAP: f64 = 1e-11;

impl Grid {
    /// Multilinear interpolation weights at `x`, appended to `out` as `(node, weight)`.
    /// Weights are nonnegative and sum to one; zero-weight corners are skipped.
    pub fn stencil(&self, x: &[f64], out: &mut Vec<(usize, f64)>) -> Result<()> {
        let n = self.dim();
        let mut base = 0usize;
        let mut frac = [0.0f64; 8];
        let mut step = [0usize; 8];
        debug_assert!(n <= 8);
        for i in 0..n {
            let t = x[i] / self.h - self.origin[i] as f64;
            let mut k = t.floor();
            let mut f = t - k;
            if f > 1.0 - SNAP {
                k += 1.0;
                f = 0.0;
            } else if f < SNAP {
                f = 0.0;
            }
            let shape = self.shape[i] as f64;
            if k < 0.0 || k >= shape || (f > 0.0 && k + 1.0 >= shape) {
                return Err(LabError::StencilEscape { point: x.to_vec() });
            }
            base += k as usize * self.strides()[i];
            frac[i] = f;
            step[i] = self.strides()[i];
        }
        for mask in 0..1usize << n {
            let mut w = 1.0;
            let mut id = base;
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    w *= frac[i];
                    id += step[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w == 0.0 {
                continue;
            }
            if self.class[id] == NodeClass::Exterior {
                return Err(LabError::StencilEscape { point: x.to_vec() });
            }
            out.push((id, w));
        }
        Ok(())
    }
}

/// Values on the nodes of a grid. Exterior nodes carry zero and are never read
/// through interpolation.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::Dimension {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    /// Samples `f` on every classified node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        let mut x = vec![0.0; grid.dim()];
        for (id, v) in values.iter_mut().enumerate() {
            if grid.is_classified(id) {
                grid.coords_into(id, &mut x);
                *v = f(&x);
            }
        }
        GridFunction { grid, values }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut st = Vec::with_capacity(1 << self.grid.dim());
        self.grid.stencil(x, &mut st)?;
        Ok(st.iter().map(|&(i, w)| w * self.values[i]).sum())
    }

    /// Largest absolute value over interior nodes.
    pub fn interior_sup_abs(&self) -> f64 {
        self.grid
            .interior
            .iter()
            .map(|&i| self.values[i].abs())
            .fold(0.0, f64::max)
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
            || (self.grid.origin == other.grid.origin
                && self.grid.shape == other.grid.shape
                && self.grid.h == other.grid.h)
    }
}
