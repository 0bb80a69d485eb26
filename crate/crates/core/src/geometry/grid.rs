//! Structured rectangular grids and their finite-difference stencils.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Nodal scalar values in grid order.
pub type ScalarField = Vec<f64>;

/// Nodal symmetric `(0,2)` tensors in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField2 {
    pub n: usize,
    pub values: Vec<DMatrix<f64>>,
}

impl TensorField2 {
    pub fn at(&self, node: usize) -> &DMatrix<f64> {
        &self.values[node]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisTopology {
    Periodic,
    Boundary,
}

/// Weighted node list; weights already include the `1/h` factors.
pub type Stencil = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartGrid {
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    topology: Vec<AxisTopology>,
    origin: Vec<f64>,
    strides: Vec<usize>,
}

impl ChartGrid {
    pub fn new(
        nodes: Vec<usize>,
        spacing: Vec<f64>,
        topology: Vec<AxisTopology>,
        origin: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let n = nodes.len();
        if n == 0 || spacing.len() != n || topology.len() != n || origin.len() != n {
            return Err(GeometryError::Validation(
                "grid axes, spacing, topology and origin must have the same nonzero length".into(),
            ));
        }
        for a in 0..n {
            if nodes[a] < 5 {
                return Err(GeometryError::Validation(format!(
                    "axis {a} has {} nodes, at least 5 required",
                    nodes[a]
                )));
            }
            if !(spacing[a] > 0.0 && spacing[a].is_finite()) {
                return Err(GeometryError::Validation(format!(
                    "axis {a} spacing {} must be positive",
                    spacing[a]
                )));
            }
        }
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * nodes[a + 1];
        }
        Ok(Self {
            nodes,
            spacing,
            topology,
            origin,
            strides,
        })
    }

    /// Grid covering `[lower, upper]` per axis; periodic axes exclude the upper end.
    pub fn from_bounds(
        lower: &[f64],
        upper: &[f64],
        nodes: &[usize],
        topology: &[AxisTopology],
    ) -> Result<Self, GeometryError> {
        let n = nodes.len();
        if lower.len() != n || upper.len() != n || topology.len() != n {
            return Err(GeometryError::Validation("grid bound lengths differ".into()));
        }
        let spacing = (0..n)
            .map(|a| {
                let len = upper[a] - lower[a];
                match topology[a] {
                    AxisTopology::Periodic => len / nodes[a] as f64,
                    AxisTopology::Boundary => len / (nodes[a].max(2) - 1) as f64,
                }
            })
            .collect();
        Self::new(nodes.to_vec(), spacing, topology.to_vec(), lower.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn topology(&self) -> &[AxisTopology] {
        &self.topology
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.topology[axis] == AxisTopology::Periodic
    }

    pub fn has_boundary(&self) -> bool {
        self.topology.contains(&AxisTopology::Boundary)
    }

    /// Period of a periodic axis.
    pub fn period(&self, axis: usize) -> f64 {
        self.nodes[axis] as f64 * self.spacing[axis]
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|a| (node / self.strides[a]) % self.nodes[a])
            .collect()
    }

    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.nodes[axis]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.origin[a] + self.axis_index(node, a) as f64 * self.spacing[a])
            .collect()
    }

    /// Node lies on a face of some non-periodic axis.
    pub fn is_boundary(&self, node: usize) -> bool {
        (0..self.dim()).any(|a| {
            !self.is_periodic(a) && {
                let i = self.axis_index(node, a);
                i == 0 || i + 1 == self.nodes[a]
            }
        })
    }

    /// Faces containing the node, as `(axis, is_low_side)`.
    pub fn faces(&self, node: usize) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        for a in 0..self.dim() {
            if self.is_periodic(a) {
                continue;
            }
            let i = self.axis_index(node, a);
            if i == 0 {
                out.push((a, true));
            }
            if i + 1 == self.nodes[a] {
                out.push((a, false));
            }
        }
        out
    }

    /// Number of nodes to the nearest non-periodic face (`usize::MAX` if none).
    pub fn boundary_distance(&self, node: usize) -> usize {
        (0..self.dim())
            .filter(|&a| !self.is_periodic(a))
            .map(|a| {
                let i = self.axis_index(node, a);
                i.min(self.nodes[a] - 1 - i)
            })
            .min()
            .unwrap_or(usize::MAX)
    }

    /// Node shifted by `offset` along `axis`; wraps on periodic axes.
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        let i = self.axis_index(node, axis) as isize;
        let nn = self.nodes[axis] as isize;
        let j = i + offset;
        let j = if self.is_periodic(axis) {
            j.rem_euclid(nn)
        } else if (0..nn).contains(&j) {
            j
        } else {
            return None;
        };
        Some((node as isize + (j - i) * self.strides[axis] as isize) as usize)
    }

    fn with_axis(&self, node: usize, axis: usize, j: usize) -> usize {
        let i = self.axis_index(node, axis);
        node + j * self.strides[axis] - i * self.strides[axis]
    }

    /// 1-D first-derivative weights as `(axis position, weight)`.
    fn first_1d(&self, node: usize, axis: usize) -> Vec<(usize, f64)> {
        let i = self.axis_index(node, axis);
        let nn = self.nodes[axis];
        let h = self.spacing[axis];
        let w = 1.0 / (2.0 * h);
        if self.is_periodic(axis) {
            vec![((i + nn - 1) % nn, -w), ((i + 1) % nn, w)]
        } else if i == 0 {
            vec![(0, -3.0 * w), (1, 4.0 * w), (2, -w)]
        } else if i + 1 == nn {
            vec![(nn - 1, 3.0 * w), (nn - 2, -4.0 * w), (nn - 3, w)]
        } else {
            vec![(i - 1, -w), (i + 1, w)]
        }
    }

    fn second_1d(&self, node: usize, axis: usize) -> Vec<(usize, f64)> {
        let i = self.axis_index(node, axis);
        let nn = self.nodes[axis];
        let h = self.spacing[axis];
        let w = 1.0 / (h * h);
        if self.is_periodic(axis) {
            vec![((i + nn - 1) % nn, w), (i, -2.0 * w), ((i + 1) % nn, w)]
        } else if i == 0 {
            vec![(0, 2.0 * w), (1, -5.0 * w), (2, 4.0 * w), (3, -w)]
        } else if i + 1 == nn {
            vec![(nn - 1, 2.0 * w), (nn - 2, -5.0 * w), (nn - 3, 4.0 * w), (nn - 4, -w)]
        } else {
            vec![(i - 1, w), (i, -2.0 * w), (i + 1, w)]
        }
    }

    /// Second-order stencil for `∂_axis` at `node`.
    pub fn first_stencil(&self, node: usize, axis: usize) -> Stencil {
        self.first_1d(node, axis)
            .into_iter()
            .map(|(j, w)| (self.with_axis(node, axis, j), w))
            .collect()
    }

    /// Second-order stencil for `∂_a∂_b` at `node`.
    pub fn second_stencil(&self, node: usize, a: usize, b: usize) -> Stencil {
        if a == b {
            return self
                .second_1d(node, a)
                .into_iter()
                .map(|(j, w)| (self.with_axis(node, a, j), w))
                .collect();
        }
        let mut out = Vec::with_capacity(9);
        for (ja, wa) in self.first_1d(node, a) {
            let na = self.with_axis(node, a, ja);
            for (jb, wb) in self.first_1d(node, b) {
                out.push((self.with_axis(na, b, jb), wa * wb));
            }
        }
        out
    }

    /// Applies `∂_axis` to a nodal field.
    pub fn derivative(&self, field: &[f64], axis: usize) -> Vec<f64> {
        (0..self.len())
            .map(|node| {
                self.first_stencil(node, axis)
                    .iter()
                    .map(|&(j, w)| w * field[j])
                    .sum()
            })
            .collect()
    }

    /// Nodal coordinate gradient `(∂_1 v, …, ∂_n v)`.
    pub fn gradient_at(&self, field: &[f64], node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| {
                self.first_stencil(node, a)
                    .iter()
                    .map(|&(j, w)| w * field[j])
                    .sum()
            })
            .collect()
    }

    /// Sample an analytic function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        (0..self.len()).map(|node| f(&self.coords(node))).collect()
    }

    /// Same topology and bounds with a different node count per axis.
    pub fn refined(&self, nodes: &[usize]) -> Result<Self, GeometryError> {
        let upper: Vec<f64> = (0..self.dim())
            .map(|a| match self.topology[a] {
                AxisTopology::Periodic => self.origin[a] + self.period(a),
                AxisTopology::Boundary => {
                    self.origin[a] + (self.nodes[a] - 1) as f64 * self.spacing[a]
                }
            })
            .collect();
        Self::from_bounds(&self.origin, &upper, nodes, &self.topology)
    }
}
