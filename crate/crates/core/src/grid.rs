//! Uniform node grids over a design box D and pixel domains Ω ⊂⊂ D.

use crate::error::{Error, Result};

/// Uniform grid over the cube D = [lower, upper]ⁿ with equal spacing on
/// every axis. Nodes are indexed row-major, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxGrid {
    n: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    cells: usize,
    h: f64,
}

impl BoxGrid {
    pub fn new(n: usize, lower: f64, upper: f64, cells: usize) -> Result<Self> {
        Self::with_corners(n, [lower; 2], [upper; 2], cells)
    }

    /// Box with per-axis corners; all edges must have the same length.
    pub fn with_corners(n: usize, lower: [f64; 2], upper: [f64; 2], cells: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::Parameter(format!("grid dimension must be 1 or 2, got {n}")));
        }
        if cells < 4 {
            return Err(Error::Parameter(format!("need at least 4 cells per axis, got {cells}")));
        }
        let len = upper[0] - lower[0];
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::Parameter("box upper corner must exceed lower corner".into()));
        }
        let (mut lower, mut upper) = (lower, upper);
        if n == 2 {
            let len1 = upper[1] - lower[1];
            if ((len1 - len) / len).abs() > 1e-12 {
                return Err(Error::Parameter("box edges must have equal length".into()));
            }
        } else {
            lower[1] = 0.0;
            upper[1] = 0.0;
        }
        upper[0] = lower[0] + len;
        if n == 2 {
            upper[1] = lower[1] + len;
        }
        Ok(Self { n, lower, upper, cells, h: len / cells as f64 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lower(&self) -> [f64; 2] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 2] {
        self.upper
    }

    pub fn edge_length(&self) -> f64 {
        self.upper[0] - self.lower[0]
    }

    pub fn diameter(&self) -> f64 {
        self.edge_length() * (self.n as f64).sqrt()
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        self.cells + 1
    }

    pub fn node_count(&self) -> usize {
        self.side().pow(self.n as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn box_volume(&self) -> f64 {
        self.edge_length().powi(self.n as i32)
    }

    pub fn index(&self, multi: [usize; 2]) -> usize {
        match self.n {
            1 => multi[0],
            _ => multi[0] * self.side() + multi[1],
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.n {
            1 => [idx, 0],
            _ => [idx / self.side(), idx % self.side()],
        }
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 2];
        for d in 0..self.n {
            x[d] = self.lower[d] + m[d] as f64 * self.h;
        }
        x
    }

    /// Node strictly inside D (not on ∂D).
    pub fn is_interior(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.n).all(|d| m[d] >= 1 && m[d] < self.cells)
    }

    /// Axis neighbours that exist on the grid.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.multi_index(idx);
        (0..self.n).flat_map(move |d| {
            let mut out = [None, None];
            if m[d] > 0 {
                let mut k = m;
                k[d] -= 1;
                out[0] = Some(self.index(k));
            }
            if m[d] < self.cells {
                let mut k = m;
                k[d] += 1;
                out[1] = Some(self.index(k));
            }
            out.into_iter().flatten()
        })
    }

    /// Integer offset between two nodes, per axis.
    pub fn offset(&self, a: usize, b: usize) -> [i64; 2] {
        let ma = self.multi_index(a);
        let mb = self.multi_index(b);
        [ma[0] as i64 - mb[0] as i64, ma[1] as i64 - mb[1] as i64]
    }

    /// Nearest node to a thin-space point (clamped to the grid).
    pub fn nearest_node(&self, x: [f64; 2]) -> usize {
        let mut m = [0usize; 2];
        for d in 0..self.n {
            let f = ((x[d] - self.lower[d]) / self.h).round();
            m[d] = f.clamp(0.0, self.cells as f64) as usize;
        }
        self.index(m)
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0..self.n).all(|d| x[d] >= self.lower[d] && x[d] <= self.upper[d])
    }

    /// Closed ball of radius r around x lies in D.
    pub fn contains_ball(&self, x: [f64; 2], r: f64) -> bool {
        let tol = 1e-12 * self.edge_length();
        (0..self.n).all(|d| x[d] - r >= self.lower[d] - tol && x[d] + r <= self.upper[d] + tol)
    }

    /// Same grid scaled about the origin by t.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::with_corners(
            self.n,
            [self.lower[0] * t, self.lower[1] * t],
            [self.upper[0] * t, self.upper[1] * t],
            self.cells,
        )
    }

    /// Multilinear interpolation of a node function; None outside D.
    pub fn interpolate(&self, values: &[f64], x: [f64; 2]) -> Option<f64> {
        if !self.contains(x) {
            return None;
        }
        let mut lo = [0usize; 2];
        let mut t = [0.0; 2];
        for d in 0..self.n {
            let f = (x[d] - self.lower[d]) / self.h;
            let i = (f.floor().max(0.0) as usize).min(self.cells - 1);
            lo[d] = i;
            t[d] = f - i as f64;
        }
        let v = |a: usize, b: usize| values[self.index([lo[0] + a, lo[1] + b])];
        Some(if self.n == 1 {
            (1.0 - t[0]) * v(0, 0) + t[0] * v(1, 0)
        } else {
            (1.0 - t[0]) * (1.0 - t[1]) * v(0, 0)
                + t[0] * (1.0 - t[1]) * v(1, 0)
                + (1.0 - t[0]) * t[1] * v(0, 1)
                + t[0] * t[1] * v(1, 1)
        })
    }

    pub fn compatible(&self, other: &BoxGrid) -> bool {
        self.n == other.n
            && self.cells == other.cells
            && ((self.h - other.h) / self.h).abs() < 1e-12
            && (0..self.n).all(|d| (self.lower[d] - other.lower[d]).abs() < 1e-9 * self.edge_length())
    }
}

/// Pixel domain: a node mask on a [`BoxGrid`]. Each node stands for the
/// cell of side h centred on it.
#[derive(Clone, Debug, PartialEq)]
pub struct ThinDomain {
    grid: BoxGrid,
    mask: Vec<bool>,
}

impl ThinDomain {
    /// Mask nodes must be interior nodes of the grid (one-layer margin).
    pub fn new(grid: BoxGrid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.node_count() {
            return Err(Error::DimensionMismatch { expected: grid.node_count(), found: mask.len() });
        }
        if let Some(bad) = (0..mask.len()).find(|&i| mask[i] && !grid.is_interior(i)) {
            return Err(Error::Domain(format!(
                "mask node {bad} touches the design box boundary (margin required)"
            )));
        }
        Ok(Self { grid, mask })
    }

    pub fn empty(grid: BoxGrid) -> Self {
        let mask = vec![false; grid.node_count()];
        Self { grid, mask }
    }

    /// Interior nodes where `pred(x)` holds.
    pub fn from_predicate(grid: BoxGrid, pred: impl Fn([f64; 2]) -> bool) -> Self {
        let mask = (0..grid.node_count())
            .map(|i| grid.is_interior(i) && pred(grid.coords(i)))
            .collect();
        Self { grid, mask }
    }

    /// Nodes whose cell centre lies in the open interval (a, b), 1D grids.
    pub fn interval(grid: BoxGrid, a: f64, b: f64) -> Self {
        let tol = 1e-9 * grid.h();
        Self::from_predicate(grid, |x| x[0] > a + tol && x[0] < b - tol)
    }

    /// Nodes with cell centre in the closed disk |x − c| ≤ r.
    pub fn ball(grid: BoxGrid, center: [f64; 2], r: f64) -> Self {
        let tol = 1e-9 * grid.h();
        let n = grid.n();
        Self::from_predicate(grid, |x| {
            let d2: f64 = (0..n).map(|d| (x[d] - center[d]).powi(2)).sum();
            d2.sqrt() <= r + tol
        })
    }

    /// Contiguous run of `len` nodes starting at node index `start`, 1D grids.
    pub fn node_run(grid: BoxGrid, runs: &[(usize, usize)]) -> Result<Self> {
        let mut mask = vec![false; grid.node_count()];
        for &(start, len) in runs {
            for i in start..start + len {
                if i >= mask.len() {
                    return Err(Error::Domain(format!("node run exceeds grid: {start}+{len}")));
                }
                mask[i] = true;
            }
        }
        Self::new(grid, mask)
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains_node(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|m| *m)
    }

    /// Ω-node grid indices, ascending.
    pub fn nodes(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    /// ℒ_n(Ω) as h^n times the node count.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn with_flipped(&self, idx: usize) -> Result<Self> {
        if !self.grid.is_interior(idx) {
            return Err(Error::Domain(format!("node {idx} is not flippable (margin)")));
        }
        let mut mask = self.mask.clone();
        mask[idx] = !mask[idx];
        Ok(Self { grid: self.grid.clone(), mask })
    }

    pub fn set(&mut self, idx: usize, value: bool) -> Result<()> {
        if value && !self.grid.is_interior(idx) {
            return Err(Error::Domain(format!("node {idx} lies in the margin")));
        }
        self.mask[idx] = value;
        Ok(())
    }

    pub fn union(&self, other: &ThinDomain) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Compat("union of masks on different grids".into()));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        Ok(Self { grid: self.grid.clone(), mask })
    }

    pub fn is_disjoint(&self, other: &ThinDomain) -> bool {
        !self.mask.iter().zip(&other.mask).any(|(a, b)| *a && *b)
    }

    pub fn is_subset_of(&self, other: &ThinDomain) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }

    /// Mask cells with at least one axis neighbour outside Ω.
    pub fn is_boundary_node(&self, idx: usize) -> bool {
        self.mask[idx] && self.grid.neighbors(idx).any(|j| !self.mask[j])
    }

    /// Connected components under axis adjacency, as lists of grid indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.mask.len()];
        let mut comps = Vec::new();
        for start in 0..self.mask.len() {
            if !self.mask[start] || label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(i) = stack.pop() {
                members.push(i);
                for j in self.grid.neighbors(i) {
                    if self.mask[j] && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    /// Same mask on the grid scaled by t about the origin.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Ok(Self { grid: self.grid.scaled(t)?, mask: self.mask.clone() })
    }

    /// Mask shifted by an integer node offset; nodes leaving the interior
    /// are an error.
    pub fn shifted(&self, by: [i64; 2]) -> Result<Self> {
        let mut mask = vec![false; self.mask.len()];
        for i in self.nodes() {
            let m = self.grid.multi_index(i);
            let mut k = [0usize; 2];
            for d in 0..self.grid.n() {
                let v = m[d] as i64 + by[d];
                if v < 0 || v > self.grid.cells() as i64 {
                    return Err(Error::Domain("shift leaves the grid".into()));
                }
                k[d] = v as usize;
            }
            mask[self.grid.index(k)] = true;
        }
        Self::new(self.grid.clone(), mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_counts() {
        let g = BoxGrid::new(2, -1.0, 1.0, 8).unwrap();
        assert_eq!(g.node_count(), 81);
        assert!((g.h() - 0.25).abs() < 1e-15);
        let idx = g.index([3, 5]);
        assert_eq!(g.multi_index(idx), [3, 5]);
        assert_eq!(g.coords(idx), [-0.25, 0.25]);
        assert_eq!(g.neighbors(idx).count(), 4);
        assert_eq!(g.neighbors(0).count(), 2);
        assert!(BoxGrid::new(1, 0.0, 1.0, 3).is_err());
        assert!(BoxGrid::with_corners(2, [0.0, 0.0], [1.0, 2.0], 8).is_err());
    }

    #[test]
    fn margin_is_enforced() {
        let g = BoxGrid::new(1, -1.0, 1.0, 8).unwrap();
        let mut mask = vec![false; 9];
        mask[0] = true;
        assert!(matches!(ThinDomain::new(g.clone(), mask), Err(Error::Domain(_))));
        let full = ThinDomain::from_predicate(g, |_| true);
        assert_eq!(full.count(), 7);
    }

    #[test]
    fn measure_counts_cells_and_is_additive() {
        let g = BoxGrid::new(1, -1.0, 1.0, 200).unwrap();
        let full = ThinDomain::from_predicate(g.clone(), |_| true);
        // every node except the two on ∂D, one cell each
        assert!((full.measure() - (2.0 - g.h())).abs() < 1e-12);
        assert_eq!(ThinDomain::empty(g.clone()).measure(), 0.0);
        let a = ThinDomain::interval(g.clone(), -0.8, -0.2);
        let b = ThinDomain::interval(g.clone(), 0.1, 0.7);
        assert!(a.is_disjoint(&b));
        let u = a.union(&b).unwrap();
        assert!((u.measure() - a.measure() - b.measure()).abs() < 1e-14);
    }

    #[test]
    fn components_split_two_intervals() {
        let g = BoxGrid::new(1, -1.0, 1.0, 40).unwrap();
        let d = ThinDomain::interval(g.clone(), -0.8, -0.2)
            .union(&ThinDomain::interval(g, 0.2, 0.8))
            .unwrap();
        let comps = d.components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len() + comps[1].len(), d.count());
    }
}
