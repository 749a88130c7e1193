//! Weighted grid routing graph: an undirected 4-neighbor lattice with a
//! nonnegative cost per edge. Immutable once built; routing workers share it
//! read-only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice vertex. Ordering is lexicographic by `(row, col)` and is the
/// global tie-breaking order used everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId {
    pub row: usize,
    pub col: usize,
}

impl VertexId {
    pub fn new(row: usize, col: usize) -> Self {
        VertexId { row, col }
    }
}

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Canonical undirected lattice edge: endpoints are 4-neighbors and the lower
/// endpoint (lexicographically) comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    a: VertexId,
    b: VertexId,
}

impl EdgeId {
    /// Builds the canonical edge between two 4-neighbor vertices.
    pub fn new(u: VertexId, v: VertexId) -> Result<Self> {
        let dr = u.row.abs_diff(v.row);
        let dc = u.col.abs_diff(v.col);
        if dr + dc != 1 {
            return Err(Error::InvalidArgument(format!(
                "{u} and {v} are not 4-neighbors"
            )));
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        Ok(EdgeId { a, b })
    }

    pub fn endpoints(&self) -> (VertexId, VertexId) {
        (self.a, self.b)
    }

    /// The endpoint other than `v`, if `v` is an endpoint.
    pub fn other(&self, v: VertexId) -> Option<VertexId> {
        if v == self.a {
            Some(self.b)
        } else if v == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

impl std::fmt::Display for EdgeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

/// Weighted `rows x cols` grid graph. Edge weights are stored densely, indexed
/// by [`GridGraph::edge_index`]: horizontal edges first (row-major), then
/// vertical edges (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGraph {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl GridGraph {
    /// Builds a grid where every edge carries `default_weight`.
    pub fn build(rows: usize, cols: usize, default_weight: f64) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidInstance(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if !default_weight.is_finite() || default_weight < 0.0 {
            return Err(Error::InvalidInstance(format!(
                "edge weight must be finite and >= 0, got {default_weight}"
            )));
        }
        let num_edges = rows * (cols - 1) + cols * (rows - 1);
        Ok(GridGraph {
            rows,
            cols,
            weights: vec![default_weight; num_edges],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_vertices(&self) -> usize {
        self.rows * self.cols
    }

    pub fn num_edges(&self) -> usize {
        self.weights.len()
    }

    pub fn in_bounds(&self, v: VertexId) -> bool {
        v.row < self.rows && v.col < self.cols
    }

    /// Dense vertex index, row-major.
    pub fn vertex_index(&self, v: VertexId) -> usize {
        v.row * self.cols + v.col
    }

    pub fn vertex_at(&self, idx: usize) -> VertexId {
        VertexId::new(idx / self.cols, idx % self.cols)
    }

    /// Dense edge index for a canonical in-bounds edge.
    pub fn edge_index(&self, e: EdgeId) -> Result<usize> {
        let (a, b) = e.endpoints();
        if !self.in_bounds(a) || !self.in_bounds(b) {
            return Err(Error::InvalidArgument(format!("edge {e} out of bounds")));
        }
        if a.row == b.row {
            // horizontal: a.col + 1 == b.col
            Ok(a.row * (self.cols - 1) + a.col)
        } else {
            // vertical: a.row + 1 == b.row
            Ok(self.rows * (self.cols - 1) + a.row * self.cols + a.col)
        }
    }

    pub fn edge_at(&self, idx: usize) -> EdgeId {
        let h = self.rows * (self.cols - 1);
        if idx < h {
            let row = idx / (self.cols - 1);
            let col = idx % (self.cols - 1);
            EdgeId {
                a: VertexId::new(row, col),
                b: VertexId::new(row, col + 1),
            }
        } else {
            let rest = idx - h;
            let row = rest / self.cols;
            let col = rest % self.cols;
            EdgeId {
                a: VertexId::new(row, col),
                b: VertexId::new(row + 1, col),
            }
        }
    }

    pub fn weight(&self, e: EdgeId) -> Result<f64> {
        Ok(self.weights[self.edge_index(e)?])
    }

    pub fn weight_by_index(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub(crate) fn set_weight(&mut self, e: EdgeId, w: f64) -> Result<()> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidInstance(format!(
                "edge weight must be finite and >= 0, got {w}"
            )));
        }
        let idx = self.edge_index(e)?;
        self.weights[idx] = w;
        Ok(())
    }

    /// Lattice neighbors of `v` with their connecting edges, in lexicographic
    /// order of the neighbor vertex.
    pub fn neighbors(&self, v: VertexId) -> Result<Vec<(VertexId, EdgeId)>> {
        if !self.in_bounds(v) {
            return Err(Error::InvalidArgument(format!("vertex {v} out of bounds")));
        }
        let mut out = Vec::with_capacity(4);
        // (row-1,col) < (row,col-1) < (row,col+1) < (row+1,col)
        if v.row > 0 {
            out.push(VertexId::new(v.row - 1, v.col));
        }
        if v.col > 0 {
            out.push(VertexId::new(v.row, v.col - 1));
        }
        if v.col + 1 < self.cols {
            out.push(VertexId::new(v.row, v.col + 1));
        }
        if v.row + 1 < self.rows {
            out.push(VertexId::new(v.row + 1, v.col));
        }
        Ok(out
            .into_iter()
            .map(|u| (u, EdgeId::new(v, u).expect("lattice neighbor")))
            .collect())
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.num_vertices()).map(|i| self.vertex_at(i))
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.num_edges()).map(|i| self.edge_at(i))
    }
}
