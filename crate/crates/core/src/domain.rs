//! Geometry of the truncated one-dimensional problem: the interval `(a, b)`,
//! the exterior collar carried by the grid, and the exterior coefficient β.

use crate::error::{Error, Result};

/// Model for the exterior datum beyond the collar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMode {
    /// The datum vanishes beyond the collar.
    Zero,
    /// The datum equals the given constant beyond the collar.
    Constant(f64),
}

impl TailMode {
    pub fn value(&self) -> f64 {
        match *self {
            TailMode::Zero => 0.0,
            TailMode::Constant(c) => c,
        }
    }
}

/// The interval `Ω = (a, b)`, the collar width and the fractional order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub a: f64,
    pub b: f64,
    pub collar_width: f64,
    pub s: f64,
    pub tail_mode: TailMode,
}

impl DomainSpec {
    pub fn new(a: f64, b: f64, collar_width: f64, s: f64, tail_mode: TailMode) -> Result<Self> {
        let spec = Self {
            a,
            b,
            collar_width,
            s,
            tail_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::Domain(format!(
                "need finite a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(self.collar_width.is_finite() && self.collar_width > 0.0) {
            return Err(Error::Domain(format!(
                "collar width must be positive, got {}",
                self.collar_width
            )));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::Domain(format!(
                "s must lie in (0, 1), got {}",
                self.s
            )));
        }
        if let TailMode::Constant(c) = self.tail_mode {
            if !c.is_finite() {
                return Err(Error::Domain("constant tail value must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Orders above 0.8 run, but the near-diagonal quadrature has not been
    /// validated there.
    pub fn is_validated_order(&self) -> bool {
        self.s <= 0.8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Collar,
}

/// Uniform cell-centred grid over the interval plus the collar.
///
/// Nodes are stored in increasing order: left collar, interior, right
/// collar. Node `i` sits at `a + (i - m + 1/2) h` where `m` is the number of
/// collar nodes on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    h: f64,
    a: f64,
    n_interior: usize,
    n_side: usize,
    nodes: Vec<f64>,
}

impl Grid1D {
    /// Grid with `n_interior` cells in `(a, b)` and as many whole cells of the
    /// same width as fit in the collar on each side (at least one).
    pub fn new(spec: &DomainSpec, n_interior: usize) -> Result<Self> {
        spec.validate()?;
        if n_interior < 2 {
            return Err(Error::Domain(format!(
                "need at least two interior nodes, got {n_interior}"
            )));
        }
        let h = spec.length() / n_interior as f64;
        let n_side = ((spec.collar_width / h) * (1.0 + 1e-12)).floor().max(1.0) as usize;
        let total = n_interior + 2 * n_side;
        let nodes = (0..total)
            .map(|i| spec.a + (i as f64 - n_side as f64 + 0.5) * h)
            .collect();
        Ok(Self {
            h,
            a: spec.a,
            n_interior,
            n_side,
            nodes,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Total number of collar nodes (both sides).
    pub fn n_collar(&self) -> usize {
        2 * self.n_side
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        if i >= self.n_side && i < self.n_side + self.n_interior {
            NodeKind::Interior
        } else {
            NodeKind::Collar
        }
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[self.n_side..self.n_side + self.n_interior]
    }

    pub fn collar_nodes(&self) -> Vec<f64> {
        self.collar_indices().map(|i| self.nodes[i]).collect()
    }

    pub fn interior_indices(&self) -> std::ops::Range<usize> {
        self.n_side..self.n_side + self.n_interior
    }

    /// Node indices of the collar, left side first.
    pub fn collar_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_side).chain(self.n_side + self.n_interior..self.len())
    }

    /// Node index of the `k`-th collar node.
    pub fn collar_node_index(&self, k: usize) -> usize {
        if k < self.n_side {
            k
        } else {
            k + self.n_interior
        }
    }

    /// Left edge of the collar; the tail model applies below it.
    pub fn outer_left(&self) -> f64 {
        self.a - self.n_side as f64 * self.h
    }

    /// Right edge of the collar; the tail model applies above it.
    pub fn outer_right(&self) -> f64 {
        self.a + (self.n_interior + self.n_side) as f64 * self.h
    }

    /// Lattice distance between nodes `i` and `j`.
    pub(crate) fn distance(&self, i: usize, j: usize) -> f64 {
        i.abs_diff(j) as f64 * self.h
    }

    /// Checks that the grid was built for `spec`.
    pub fn check_against(&self, spec: &DomainSpec) -> Result<()> {
        let h = spec.length() / self.n_interior as f64;
        if (h - self.h).abs() > 1e-12 * h || (self.a - spec.a).abs() > 1e-12 * spec.length() {
            return Err(Error::Consistency(format!(
                "grid spacing {} / origin {} do not match domain ({}, {})",
                self.h, self.a, spec.a, spec.b
            )));
        }
        if self.outer_right() > spec.b + spec.collar_width + 1e-9 * h && self.n_side > 1 {
            return Err(Error::Consistency("collar exceeds the collar width".into()));
        }
        Ok(())
    }

    /// Samples `f` at the interior nodes.
    pub fn sample_interior(&self, f: impl Fn(f64) -> f64) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(
            self.n_interior,
            self.interior_nodes().iter().map(|&x| f(x)),
        )
    }

    /// Samples `f` at the collar nodes.
    pub fn sample_collar(&self, f: impl Fn(f64) -> f64) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(
            self.n_collar(),
            self.collar_indices().map(|i| f(self.nodes[i])),
        )
    }

    /// Samples `f` at all nodes.
    pub fn sample_all(&self, f: impl Fn(f64) -> f64) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(self.len(), self.nodes.iter().map(|&x| f(x)))
    }

    /// Maps the `k`-th collar node to its mirror image about the midpoint.
    pub fn mirror_collar(&self, k: usize) -> usize {
        self.n_collar() - 1 - k
    }
}

/// Non-negative exterior coefficient sampled on the collar nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaField {
    values: Vec<f64>,
}

impl BetaField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "β must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn zero(grid: &Grid1D) -> Self {
        Self {
            values: vec![0.0; grid.n_collar()],
        }
    }

    pub fn constant(grid: &Grid1D, value: f64) -> Result<Self> {
        Self::new(vec![value; grid.n_collar()])
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.collar_nodes().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Collar positions with β > 0.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&k| self.values[k] > 0.0)
            .collect()
    }

    /// Discrete integral `Σ β h`.
    pub fn l1_norm(&self, h: f64) -> f64 {
        self.values.iter().sum::<f64>() * h
    }
}
