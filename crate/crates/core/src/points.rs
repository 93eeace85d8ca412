//! Point configurations in `R^d`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Euclidean distance between two points of equal dimension.
#[inline]
pub fn distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// A list of points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet<S> {
    dim: usize,
    coords: Vec<S>,
}

impl<S: Scalar> PointSet<S> {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        PointSet {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[S]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut out = PointSet::new(dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::invalid(format!(
                    "point has {} coordinates, expected {dim}",
                    r.len()
                )));
            }
            out.coords.extend_from_slice(r);
        }
        Ok(out)
    }

    /// Points on the first axis at the given coordinates, zero elsewhere.
    pub fn on_axis(dim: usize, xs: &[S]) -> Self {
        let mut out = PointSet::new(dim);
        for &x in xs {
            out.coords.push(x);
            out.coords.extend(std::iter::repeat(S::zero()).take(dim - 1));
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[S] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn point_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[S]) {
        assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn truncate(&mut self, len: usize) {
        self.coords.truncate(len * self.dim);
    }

    pub fn swap_remove(&mut self, i: usize) {
        let last = self.len() - 1;
        if i != last {
            for a in 0..self.dim {
                self.coords.swap(i * self.dim + a, last * self.dim + a);
            }
        }
        self.truncate(last);
    }

    #[inline]
    pub fn dist(&self, i: usize, k: usize) -> S {
        distance(self.point(i), self.point(k))
    }

    pub fn iter(&self) -> impl Iterator<Item = &[S]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        self.iter().map(|p| p.to_vec()).collect()
    }

    /// Sub-configuration picking the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut out = PointSet::new(self.dim);
        for &i in idx {
            out.push(self.point(i));
        }
        out
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }
}

/// Phase points `z_i = (x_i, v_i)`. Velocities are optional; when absent,
/// one-particle densities are evaluated on their spatial marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfiguration<S> {
    pub positions: PointSet<S>,
    pub velocities: Option<PointSet<S>>,
}

impl<S: Scalar> PhaseConfiguration<S> {
    pub fn positions_only(positions: PointSet<S>) -> Self {
        PhaseConfiguration {
            positions,
            velocities: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions.dim()
    }
}
