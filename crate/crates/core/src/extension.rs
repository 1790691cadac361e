//! Weighted extension problem div(yᵃ∇g) = 0 on the slab D × [0, Y].
//!
//! Finite volumes on a tensor grid: uniform in x, graded y_j = Y (j/J)^γ in y.
//! The y-edge conductance h^n (1−a)/(y_{j+1}^{1−a} − y_j^{1−a}) is the exact
//! harmonic mean of yᵃ for profiles affine in y^{1−a}. The x-edge conductance
//! is h^{n−2} ∫ yᵃ dy over the dual y-cell. The discrete energy Σ c (Δg)²
//! approximates the half-space integral ∫ yᵃ|∇g|².

use crate::constants::FracParams;
use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::linsolve::{pcg, BandCholesky, LinePreconditioner, SparseSym};

/// Factor-size budget for the banded direct solver (f64 entries).
const BAND_BUDGET: usize = 40_000_000;
const SOLVE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SlabGrid {
    base: BoxGrid,
    y: Vec<f64>,
    a: f64,
    gamma: f64,
    /// y_j^{1−a}
    eta: Vec<f64>,
    /// ∫ yᵃ over the dual cell of layer j
    dual_weight: Vec<f64>,
}

impl SlabGrid {
    pub fn new(base: BoxGrid, layers: usize, height: f64, gamma: f64, a: f64) -> Result<Self> {
        if layers < 2 {
            return Err(Error::Parameter(format!("need at least 2 y-layers, got {layers}")));
        }
        if !(height >= base.diameter() * (1.0 - 1e-12)) {
            return Err(Error::Parameter(format!(
                "slab height {height} below the box diameter {}",
                base.diameter()
            )));
        }
        if !(gamma >= 1.0) {
            return Err(Error::Parameter(format!("grading exponent {gamma} < 1")));
        }
        if !(a > -1.0 && a < 1.0) {
            return Err(Error::Parameter(format!("weight exponent {a} outside (-1, 1)")));
        }
        let y: Vec<f64> =
            (0..=layers).map(|j| height * (j as f64 / layers as f64).powf(gamma)).collect();
        let eta: Vec<f64> = y.iter().map(|v| v.powf(1.0 - a)).collect();
        let prim = |v: f64| v.powf(1.0 + a) / (1.0 + a);
        let mid = |j: usize| 0.5 * (y[j] + y[j + 1]);
        let dual_weight = (0..=layers)
            .map(|j| {
                let lo = if j == 0 { 0.0 } else { mid(j - 1) };
                let hi = if j == layers { y[layers] } else { mid(j) };
                prim(hi) - prim(lo)
            })
            .collect();
        Ok(Self { base, y, a, gamma, eta, dual_weight })
    }

    /// Grading γ = 2/(1−a) = 1/s.
    pub fn graded(base: BoxGrid, layers: usize, height: f64, params: &FracParams) -> Result<Self> {
        Self::new(base, layers, height, 1.0 / params.s(), params.a())
    }

    /// Height 2·diam(D) and γ = 1/s.
    pub fn with_defaults(base: BoxGrid, layers: usize, params: &FracParams) -> Result<Self> {
        let height = 2.0 * base.diameter();
        Self::graded(base, layers, height, params)
    }

    pub fn base(&self) -> &BoxGrid {
        &self.base
    }

    pub fn layers(&self) -> usize {
        self.y.len() - 1
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn height(&self) -> f64 {
        self.y[self.layers()]
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn node_count(&self) -> usize {
        self.base.node_count() * self.y.len()
    }

    /// Slab node index, x-major with y fastest.
    pub fn index(&self, xnode: usize, j: usize) -> usize {
        xnode * self.y.len() + j
    }

    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.y.len(), idx % self.y.len())
    }

    /// Conductance of the y-edge between layers j and j+1.
    pub fn y_conductance(&self, j: usize) -> f64 {
        self.base.cell_volume() * (1.0 - self.a) / (self.eta[j + 1] - self.eta[j])
    }

    /// Conductance of an x-edge on layer j.
    pub fn x_conductance(&self, j: usize) -> f64 {
        self.base.h().powi(self.base.n() as i32 - 2) * self.dual_weight[j]
    }

    /// Nodes fixed by the boundary conditions: y = 0, y = Y, and ∂D × [0, Y].
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (x, j) = self.split(idx);
        j == 0 || j == self.layers() || !self.base.is_interior(x)
    }

    /// (neighbour, conductance) pairs.
    pub fn neighbors(&self, idx: usize) -> Vec<(usize, f64)> {
        let (x, j) = self.split(idx);
        let mut out = Vec::with_capacity(6);
        let cx = self.x_conductance(j);
        for xn in self.base.neighbors(x) {
            out.push((self.index(xn, j), cx));
        }
        if j > 0 {
            out.push((idx - 1, self.y_conductance(j - 1)));
        }
        if j < self.layers() {
            out.push((idx + 1, self.y_conductance(j)));
        }
        out
    }

    /// Visit every edge once as (u, v, conductance).
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        for idx in 0..self.node_count() {
            for (nb, c) in self.neighbors(idx) {
                if nb > idx {
                    f(idx, nb, c);
                }
            }
        }
    }

    /// Layer interval containing y, with the interpolation weight in η.
    fn locate_y(&self, y: f64) -> Option<(usize, f64)> {
        if !(0.0..=self.height()).contains(&y) {
            return None;
        }
        let j = match self.y.binary_search_by(|p| p.total_cmp(&y)) {
            Ok(j) => j.min(self.layers() - 1),
            Err(j) => j - 1,
        };
        let e = y.powf(1.0 - self.a);
        Some((j, (e - self.eta[j]) / (self.eta[j + 1] - self.eta[j])))
    }
}

/// Grid function on a slab; y = 0 holds the trace.
#[derive(Clone, Debug)]
pub struct ExtensionField {
    slab: SlabGrid,
    values: Vec<f64>,
}

impl ExtensionField {
    pub fn from_values(slab: SlabGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != slab.node_count() {
            return Err(Error::DimensionMismatch { expected: slab.node_count(), found: values.len() });
        }
        Ok(Self { slab, values })
    }

    /// Field sampled from a closed form f(x, y) at every slab node.
    pub fn from_fn(slab: SlabGrid, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let values = (0..slab.node_count())
            .map(|idx| {
                let (x, j) = slab.split(idx);
                f(slab.base.coords(x), slab.y[j])
            })
            .collect();
        Self { slab, values }
    }

    pub fn zero(slab: SlabGrid) -> Self {
        let values = vec![0.0; slab.node_count()];
        Self { slab, values }
    }

    pub fn slab(&self) -> &SlabGrid {
        &self.slab
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, xnode: usize, j: usize) -> f64 {
        self.values[self.slab.index(xnode, j)]
    }

    pub fn trace(&self) -> Vec<f64> {
        (0..self.slab.base.node_count()).map(|x| self.value(x, 0)).collect()
    }

    /// Half-space weighted Dirichlet energy Σ c (Δg)².
    pub fn energy(&self) -> f64 {
        let mut e = 0.0;
        self.slab.for_each_edge(|u, v, c| e += c * (self.values[u] - self.values[v]).powi(2));
        e
    }

    /// Energy on the edges with an endpoint in `set`.
    pub fn energy_touching(&self, set: &[bool]) -> f64 {
        let mut e = 0.0;
        self.slab.for_each_edge(|u, v, c| {
            if set[u] || set[v] {
                e += c * (self.values[u] - self.values[v]).powi(2);
            }
        });
        e
    }

    /// Interpolated value at (x, y): multilinear in x, linear in y^{1−a}.
    pub fn sample(&self, x: [f64; 2], y: f64) -> Option<f64> {
        let base = &self.slab.base;
        if !base.contains(x) {
            return None;
        }
        let (j, ty) = self.slab.locate_y(y)?;
        let n = base.n();
        let mut lo = [0usize; 2];
        let mut t = [0.0; 2];
        for d in 0..n {
            let f = (x[d] - base.lower()[d]) / base.h();
            let i = (f.floor() as usize).min(base.cells() - 1);
            lo[d] = i;
            t[d] = f - i as f64;
        }
        let corners: &[([usize; 2], f64)] = &if n == 1 {
            [([0, 0], 1.0 - t[0]), ([1, 0], t[0]), ([0, 0], 0.0), ([0, 0], 0.0)]
        } else {
            [
                ([0, 0], (1.0 - t[0]) * (1.0 - t[1])),
                ([1, 0], t[0] * (1.0 - t[1])),
                ([0, 1], (1.0 - t[0]) * t[1]),
                ([1, 1], t[0] * t[1]),
            ]
        };
        let mut acc = 0.0;
        for &(off, w) in corners {
            if w == 0.0 {
                continue;
            }
            let xnode = base.index([lo[0] + off[0], lo[1] + off[1]]);
            let v0 = self.value(xnode, j);
            let v1 = self.value(xnode, j + 1);
            acc += w * (v0 + ty * (v1 - v0));
        }
        Some(acc)
    }

    pub fn neumann_trace(&self) -> NeumannTrace {
        let s = &self.slab;
        let (e1, e2) = (s.eta[1], s.eta[2]);
        let k = 1.0 - s.a;
        let nx = s.base.node_count();
        let first: Vec<f64> = (0..nx).map(|x| (self.value(x, 0) - self.value(x, 1)) * k / e1).collect();
        let second: Vec<f64> =
            (0..nx).map(|x| (self.value(x, 1) - self.value(x, 2)) * k / (e2 - e1)).collect();
        let scale = first.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let flagged = first
            .iter()
            .zip(&second)
            .map(|(p, q)| {
                let mag = p.abs().max(q.abs());
                mag > 1e-8 * scale && (p - q).abs() > 0.25 * mag
            })
            .collect();
        NeumannTrace { values: first, flagged }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { slab: self.slab.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }
}

/// −yᵃ∂_y g at y = 0 per x node, with entries whose first- and second-layer
/// fluxes disagree by more than 25% flagged.
#[derive(Clone, Debug)]
pub struct NeumannTrace {
    pub values: Vec<f64>,
    pub flagged: Vec<bool>,
}

enum Factor {
    Band(BandCholesky),
    Iterative(LinePreconditioner),
}

/// Reusable solver for the energy minimization with a fixed free node set.
pub struct SlabSolver {
    slab: SlabGrid,
    free: Vec<bool>,
    unknowns: Vec<usize>,
    matrix: SparseSym,
    factor: Factor,
}

impl SlabSolver {
    pub fn new(slab: SlabGrid, free: Vec<bool>) -> Result<Self> {
        if free.len() != slab.node_count() {
            return Err(Error::DimensionMismatch { expected: slab.node_count(), found: free.len() });
        }
        let unknowns: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
        let mut pos = vec![usize::MAX; free.len()];
        for (k, &u) in unknowns.iter().enumerate() {
            pos[u] = k;
        }
        let mut matrix = SparseSym { row_start: vec![0], ..Default::default() };
        let mut link = Vec::with_capacity(unknowns.len());
        for &u in &unknowns {
            let mut d = 0.0;
            for (nb, c) in slab.neighbors(u) {
                d += c;
                if free[nb] {
                    matrix.cols.push(pos[nb]);
                    matrix.vals.push(-c);
                }
            }
            matrix.diag.push(d);
            matrix.row_start.push(matrix.cols.len());
            let (_, j) = slab.split(u);
            link.push(j > 0 && free[u - 1]);
        }
        let n = unknowns.len();
        let bw = matrix.bandwidth();
        let factor = if BandCholesky::storage(n, bw) <= BAND_BUDGET && n.saturating_mul(bw * bw) < 4_000_000_000 {
            Factor::Band(BandCholesky::factor(&matrix)?)
        } else {
            Factor::Iterative(LinePreconditioner::new(&matrix, &link))
        };
        Ok(Self { slab, free, unknowns, matrix, factor })
    }

    pub fn slab(&self) -> &SlabGrid {
        &self.slab
    }

    pub fn free(&self) -> &[bool] {
        &self.free
    }

    /// Overwrite the free entries of `values` with the energy minimizer given
    /// the fixed entries.
    pub fn solve_in_place(&self, values: &mut [f64]) -> Result<()> {
        if values.len() != self.free.len() {
            return Err(Error::DimensionMismatch { expected: self.free.len(), found: values.len() });
        }
        let b: Vec<f64> = self
            .unknowns
            .iter()
            .map(|&u| {
                self.slab
                    .neighbors(u)
                    .into_iter()
                    .filter(|(nb, _)| !self.free[*nb])
                    .map(|(nb, c)| c * values[nb])
                    .sum()
            })
            .collect();
        let x = match &self.factor {
            Factor::Band(f) => f.solve(&b),
            Factor::Iterative(p) => pcg(&self.matrix, p, &b, 1e-12, 20_000)?.0,
        };
        let res = self.matrix.relative_residual(&x, &b);
        if !(res <= SOLVE_TOL) {
            return Err(Error::Convergence {
                iterations: 0,
                detail: format!("extension solve relative residual {res:e}"),
            });
        }
        for (k, &u) in self.unknowns.iter().enumerate() {
            values[u] = x[k];
        }
        Ok(())
    }
}

/// Extension operator for traces with zero lateral and top data.
pub struct Extender {
    solver: SlabSolver,
}

impl Extender {
    pub fn new(slab: SlabGrid) -> Result<Self> {
        let free = (0..slab.node_count()).map(|i| !slab.is_boundary(i)).collect();
        Ok(Self { solver: SlabSolver::new(slab, free)? })
    }

    pub fn slab(&self) -> &SlabGrid {
        self.solver.slab()
    }

    /// `trace` is a full base-grid vector; it must vanish on ∂D.
    pub fn extend(&self, trace: &[f64]) -> Result<ExtensionField> {
        let slab = self.solver.slab();
        let base = slab.base();
        if trace.len() != base.node_count() {
            return Err(Error::DimensionMismatch { expected: base.node_count(), found: trace.len() });
        }
        if (0..trace.len()).any(|x| !base.is_interior(x) && trace[x] != 0.0) {
            return Err(Error::Precondition("trace must vanish on the design box boundary".into()));
        }
        let mut values = vec![0.0; slab.node_count()];
        if trace.iter().all(|v| *v == 0.0) {
            return ExtensionField::from_values(slab.clone(), values);
        }
        for (x, &t) in trace.iter().enumerate() {
            values[slab.index(x, 0)] = t;
        }
        self.solver.solve_in_place(&mut values)?;
        ExtensionField::from_values(slab.clone(), values)
    }
}

pub fn extend(trace: &[f64], slab: &SlabGrid) -> Result<ExtensionField> {
    Extender::new(slab.clone())?.extend(trace)
}

/// Solve with Dirichlet data f(x, y) on the whole slab boundary.
pub fn extend_with_boundary(slab: &SlabGrid, f: impl Fn([f64; 2], f64) -> f64) -> Result<ExtensionField> {
    let free: Vec<bool> = (0..slab.node_count()).map(|i| !slab.is_boundary(i)).collect();
    let mut values: Vec<f64> = (0..slab.node_count())
        .map(|idx| {
            if free[idx] {
                0.0
            } else {
                let (x, j) = slab.split(idx);
                f(slab.base().coords(x), slab.y()[j])
            }
        })
        .collect();
    SlabSolver::new(slab.clone(), free)?.solve_in_place(&mut values)?;
    ExtensionField::from_values(slab.clone(), values)
}

pub fn extension_energy(field: &ExtensionField) -> f64 {
    field.energy()
}

/// Slab nodes in the open half ball |(x − x0, y)| < r, y ≥ 0; the y = 0 nodes
/// are included, so the replacement satisfies the natural (even-reflection)
/// condition there.
pub fn ball_nodes(slab: &SlabGrid, center: [f64; 2], radius: f64) -> Result<Vec<bool>> {
    let base = slab.base();
    if !(radius > 0.0) {
        return Err(Error::Geometry(format!("radius {radius} must be positive")));
    }
    let inner = base.h();
    let inside = (0..base.n()).all(|d| {
        center[d] - radius > base.lower()[d] + inner * 0.5 && center[d] + radius < base.upper()[d] - inner * 0.5
    });
    if !inside || radius >= slab.height() {
        return Err(Error::Geometry(format!(
            "ball of radius {radius} at {center:?} leaves the slab footprint"
        )));
    }
    Ok((0..slab.node_count())
        .map(|idx| {
            let (x, j) = slab.split(idx);
            let p = base.coords(x);
            let d2: f64 = (0..base.n()).map(|d| (p[d] - center[d]).powi(2)).sum::<f64>() + slab.y()[j].powi(2);
            d2 < radius * radius
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct Replacement {
    pub field: ExtensionField,
    /// energy on edges touching the ball, before and after
    pub energy_before: f64,
    pub energy_after: f64,
    pub ball: Vec<bool>,
}

/// Harmonic replacement of one or more component fields in the same ball.
pub struct HarmonicReplacer {
    solver: SlabSolver,
}

impl HarmonicReplacer {
    pub fn new(slab: &SlabGrid, center: [f64; 2], radius: f64) -> Result<Self> {
        let ball = ball_nodes(slab, center, radius)?;
        if !ball.iter().any(|b| *b) {
            return Err(Error::Resolution(format!("ball of radius {radius} contains no slab node")));
        }
        Ok(Self { solver: SlabSolver::new(slab.clone(), ball)? })
    }

    pub fn ball(&self) -> &[bool] {
        self.solver.free()
    }

    pub fn replace(&self, field: &ExtensionField) -> Result<Replacement> {
        if field.slab() != self.solver.slab() {
            return Err(Error::Compat("field lives on a different slab".into()));
        }
        let mut values = field.values.clone();
        self.solver.solve_in_place(&mut values)?;
        let out = ExtensionField { slab: field.slab.clone(), values };
        let ball = self.solver.free().to_vec();
        Ok(Replacement {
            energy_before: field.energy_touching(&ball),
            energy_after: out.energy_touching(&ball),
            field: out,
            ball,
        })
    }
}

pub fn harmonic_replacement(field: &ExtensionField, center: [f64; 2], radius: f64) -> Result<Replacement> {
    HarmonicReplacer::new(field.slab(), center, radius)?.replace(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::one_plane_solution;

    fn slab1(cells: usize, layers: usize, s: f64) -> SlabGrid {
        let base = BoxGrid::new(1, -2.0, 2.0, cells).unwrap();
        let p = FracParams::new(1, s, 1.0).unwrap();
        SlabGrid::graded(base, layers, 4.0, &p).unwrap()
    }

    fn bump(slab: &SlabGrid) -> Vec<f64> {
        let base = slab.base();
        (0..base.node_count())
            .map(|i| {
                let x = base.coords(i)[0];
                if x.abs() < 1.0 {
                    (1.0 - x * x).powi(2) * (1.0 + 0.5 * x)
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn zero_trace_gives_zero_field() {
        let slab = slab1(32, 16, 0.5);
        let f = extend(&vec![0.0; 33], &slab).unwrap();
        assert!(f.values().iter().all(|v| *v == 0.0));
        assert_eq!(f.energy(), 0.0);
    }

    #[test]
    fn linear_and_quadratic() {
        let slab = slab1(64, 32, 0.3);
        let ext = Extender::new(slab.clone()).unwrap();
        let u = bump(&slab);
        let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| x * (i as f64 * 0.1).cos()).collect();
        let (gu, gv) = (ext.extend(&u).unwrap(), ext.extend(&v).unwrap());
        let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| 2.0 * p - 3.0 * q).collect();
        let gw = ext.extend(&w).unwrap();
        let scale = gw.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..gw.values().len() {
            let want = 2.0 * gu.values()[k] - 3.0 * gv.values()[k];
            assert!((gw.values()[k] - want).abs() < 1e-10 * scale);
        }
        let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let e = gu.energy();
        assert!((ext.extend(&u2).unwrap().energy() - 4.0 * e).abs() < 1e-12 * e);
    }

    #[test]
    fn maximum_principle_and_comparison() {
        let slab = slab1(64, 32, 0.7);
        let ext = Extender::new(slab.clone()).unwrap();
        let u = bump(&slab);
        let g = ext.extend(&u).unwrap();
        let max = g.values().iter().cloned().fold(0.0, f64::max);
        assert!(g.values().iter().all(|&v| v >= -1e-12 * max));
        let v: Vec<f64> = u.iter().map(|x| x * 1.3).collect();
        let gv = ext.extend(&v).unwrap();
        assert!(g.values().iter().zip(gv.values()).all(|(a, b)| *a <= *b + 1e-14));
    }

    #[test]
    fn weight_power_has_unit_flux() {
        // g = y^{1−a}/(1−a), so −yᵃ∂_y g = −1
        let slab = slab1(16, 16, 0.3);
        let k = 1.0 - slab.a();
        let g = ExtensionField::from_fn(slab, |_, y| y.powf(k) / k);
        let nt = g.neumann_trace();
        assert!(nt.values.iter().all(|v| (v + 1.0).abs() < 1e-12));
        assert!(nt.flagged.iter().all(|f| !f));
    }

    #[test]
    fn dirichlet_one_plane_data_recovers_the_profile() {
        let s = 0.5;
        let err = |cells: usize, layers: usize| {
            let slab = slab1(cells, layers, s);
            let g = extend_with_boundary(&slab, |x, y| one_plane_solution(x[0], y, s)).unwrap();
            let mut e = 0.0f64;
            for idx in 0..slab.node_count() {
                let (x, j) = slab.split(idx);
                let (t, y) = (slab.base().coords(x)[0], slab.y()[j]);
                if t.abs() <= 1.0 && y <= 1.0 {
                    e = e.max((g.values()[idx] - one_plane_solution(t, y, s)).abs());
                }
            }
            e
        };
        // the profile is only C^{0,s} at the origin, so expect rate ≈ s
        let e: Vec<f64> = [32, 64, 128].iter().map(|&c| err(c, c / 2)).collect();
        assert!(e[1] < e[0] && e[2] < e[1], "{e:?}");
        assert!((e[0] / e[2]).log2() / 2.0 > 0.4, "{e:?}");
    }

    #[test]
    fn replacement_lowers_local_energy_and_is_idempotent() {
        let slab = slab1(64, 32, 0.5);
        let g = extend(&bump(&slab), &slab).unwrap();
        let rep = harmonic_replacement(&g, [0.2, 0.0], 0.5).unwrap();
        assert!(rep.energy_after < rep.energy_before);
        let again = harmonic_replacement(&rep.field, [0.2, 0.0], 0.5).unwrap();
        let scale = rep.field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(
            again.field.values().iter().zip(rep.field.values()).all(|(a, b)| (a - b).abs() < 1e-10 * scale)
        );
        assert!(matches!(harmonic_replacement(&g, [1.8, 0.0], 0.5), Err(Error::Geometry(_))));
    }

    #[test]
    fn iterative_path_matches_direct_in_2d() {
        let base = BoxGrid::new(2, -1.0, 1.0, 12).unwrap();
        let p = FracParams::new(2, 0.5, 1.0).unwrap();
        let slab = SlabGrid::graded(base.clone(), 10, 3.0, &p).unwrap();
        let trace: Vec<f64> = (0..base.node_count())
            .map(|i| {
                let x = base.coords(i);
                (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0)
            })
            .map(|v| v * v)
            .collect();
        let free: Vec<bool> = (0..slab.node_count()).map(|i| !slab.is_boundary(i)).collect();
        let direct = SlabSolver::new(slab.clone(), free.clone()).unwrap();
        assert!(matches!(direct.factor, Factor::Band(_)));
        let mut v1: Vec<f64> = vec![0.0; slab.node_count()];
        for (x, t) in trace.iter().enumerate() {
            v1[slab.index(x, 0)] = *t;
        }
        let mut v2 = v1.clone();
        direct.solve_in_place(&mut v1).unwrap();
        let iterative = SlabSolver {
            factor: Factor::Iterative(LinePreconditioner::new(&direct.matrix, &link_of(&direct))),
            ..SlabSolver::new(slab.clone(), free).unwrap()
        };
        iterative.solve_in_place(&mut v2).unwrap();
        assert!(v1.iter().zip(&v2).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    fn link_of(s: &SlabSolver) -> Vec<bool> {
        s.unknowns.iter().map(|&u| s.slab.split(u).1 > 0 && s.free[u - 1]).collect()
    }
}
