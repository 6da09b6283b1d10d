use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional offsets, in spacings, below which a point counts as a node.
const LATTICE_SNAP: f64 = 1e-9;

/// Uniform tensor lattice `origin + i ⊙ h`, flattened in row-major order
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub h: Vec<f64>,
    pub shape: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, h: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let g = Self { origin, h, shape };
        g.validate()?;
        Ok(g)
    }

    /// Lattice covering `[lo, hi]` per axis with spacing `h`; `hi` is rounded
    /// to the nearest lattice point.
    pub fn covering(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let shape = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b - a) / h).round() as usize + 1)
            .collect();
        Self::new(lo.to_vec(), vec![h; lo.len()], shape)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.origin.len();
        if n == 0 || self.h.len() != n || self.shape.len() != n {
            return Err(Error::InvalidParameter("grid origin, h, and shape must share a positive length".into()));
        }
        if self.h.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidParameter("grid spacing must be positive".into()));
        }
        if self.shape.iter().any(|&s| s < 2) {
            return Err(Error::InvalidParameter("grid needs at least two points per axis".into()));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut st = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            st[k] = st[k + 1] * self.shape[k + 1];
        }
        st
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (k, &i) in idx.iter().enumerate() {
            f = f * self.shape[k] + i;
        }
        f
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let n = self.dim();
        let mut idx = vec![0; n];
        for k in (0..n).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn coord(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| self.origin[k] + i as f64 * self.h[k])
            .collect()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.coord(&self.multi(flat))
    }

    /// Nearest multi-index to `x`, if `x` is a lattice point within `rel_tol`
    /// spacings and inside the hull.
    pub fn index_of(&self, x: &[f64], rel_tol: f64) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let t = (x[k] - self.origin[k]) / self.h[k];
            let r = t.round();
            if (t - r).abs() > rel_tol || r < 0.0 || r as usize >= self.shape[k] {
                return None;
            }
            idx.push(r as usize);
        }
        Some(idx)
    }

    pub fn lower(&self) -> &[f64] {
        &self.origin
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.origin[k] + (self.shape[k] - 1) as f64 * self.h[k])
            .collect()
    }

    pub fn upper_axis(&self, k: usize) -> f64 {
        self.origin[k] + (self.shape[k] - 1) as f64 * self.h[k]
    }

    pub fn in_hull(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|k| {
            let eps = 1e-12 * self.h[k];
            x[k] >= self.origin[k] - eps && x[k] <= self.upper_axis(k) + eps
        })
    }

    /// Smallest distance from `x` to the hull boundary (negative outside).
    pub fn hull_margin(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|k| (x[k] - self.origin[k]).min(self.upper_axis(k) - x[k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Same spacing and origins differing by whole spacings.
    pub fn same_lattice(&self, other: &Grid) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        (0..self.dim()).all(|k| {
            let h = self.h[k];
            if ((h - other.h[k]) / h).abs() > 1e-12 {
                return false;
            }
            let d = (other.origin[k] - self.origin[k]) / h;
            (d - d.round()).abs() < 1e-8
        })
    }

    /// Smallest lattice (same spacing) whose hull contains both hulls.
    pub fn union(&self, other: &Grid) -> Result<Grid> {
        if !self.same_lattice(other) {
            return Err(Error::IncompatibleGrids("spacings differ or origins are not lattice-aligned".into()));
        }
        let n = self.dim();
        let mut origin = Vec::with_capacity(n);
        let mut shape = Vec::with_capacity(n);
        for k in 0..n {
            let h = self.h[k];
            let lo = self.origin[k].min(other.origin[k]);
            let hi = self.upper_axis(k).max(other.upper_axis(k));
            // snap lo onto self's lattice
            let off = ((lo - self.origin[k]) / h).round();
            let lo = self.origin[k] + off * h;
            origin.push(lo);
            shape.push(((hi - lo) / h).round() as usize + 1);
        }
        Grid::new(origin, self.h.clone(), shape)
    }

    /// Locate `x` for multilinear interpolation: per-axis lower index and
    /// fractional offset. `x` must be in the hull.
    #[inline]
    pub(crate) fn locate_axis(&self, k: usize, xk: f64) -> (usize, f64) {
        let t = (xk - self.origin[k]) / self.h[k];
        let last = self.shape[k] - 2;
        let mut i = t.floor();
        if i < 0.0 {
            i = 0.0;
        }
        let mut i = i as usize;
        if i > last {
            i = last;
        }
        let mut frac = (t - i as f64).clamp(0.0, 1.0);
        // lattice points reached through shifted origins land on the node
        if frac < LATTICE_SNAP {
            frac = 0.0;
        } else if frac > 1.0 - LATTICE_SNAP {
            frac = 1.0;
        }
        (i, frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_coordinate_roundtrip() {
        let g = Grid::new(vec![-1.0, 2.0], vec![0.25, 0.5], vec![5, 3]).unwrap();
        assert_eq!(g.len(), 15);
        for f in 0..g.len() {
            let idx = g.multi(f);
            assert_eq!(g.flat(&idx), f);
            let x = g.coord(&idx);
            assert_eq!(g.index_of(&x, 1e-9).unwrap(), idx);
        }
        assert_eq!(g.upper(), vec![0.0, 3.0]);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Grid::new(vec![0.0], vec![0.0], vec![3]).is_err());
        assert!(Grid::new(vec![0.0], vec![0.1], vec![1]).is_err());
        assert!(Grid::new(vec![0.0, 1.0], vec![0.1], vec![3, 3]).is_err());
    }

    #[test]
    fn union_of_shifted_lattices() {
        let a = Grid::new(vec![0.0], vec![0.1], vec![11]).unwrap();
        let b = Grid::new(vec![-0.3], vec![0.1], vec![11]).unwrap();
        let u = a.union(&b).unwrap();
        assert!((u.origin[0] + 0.3).abs() < 1e-12);
        assert_eq!(u.shape[0], 14);
        let c = Grid::new(vec![0.05], vec![0.1], vec![11]).unwrap();
        assert!(a.union(&c).is_err());
    }
}
