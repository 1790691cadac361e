//! Free-boundary measurements on a configuration G = (g¹, …, g^m) of
//! extended eigenfunctions: density ratios, non-degeneracy, the Weiss energy
//! and its monotonicity audit, flatness against the one-plane profile,
//! boundary slopes, point classification and support coincidence.
//!
//! Conventions used throughout:
//! - ball and sphere integrals over ℝ^{n+1} are twice the half-space ones
//!   (even reflection in y);
//! - free-boundary points sit on the cell interface, h/2 outward from the
//!   centre of a mask cell that touches the complement;
//! - W is normalized by Λ̃ωₙ when read as a density, so that the one-plane
//!   profile gives exactly 1/2.

use std::f64::consts::PI;

use serde::Serialize;

use crate::constants::{extension_constant, one_plane_solution, unit_ball_volume, FracParams};
use crate::eigen::EigenBundle;
use crate::error::{Error, Result};
use crate::extension::{Extender, ExtensionField, HarmonicReplacer, SlabGrid};
use crate::grid::{BoxGrid, ThinDomain};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Resolution floor, in cells, for ball-based quantities.
pub const MIN_RADIUS_CELLS: f64 = 3.0;
/// Floor for the Weiss energy, whose shell quadrature needs more cells.
pub const WEISS_MIN_RADIUS_CELLS: f64 = 5.0;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FbPoint {
    /// mask cell the point is attached to
    pub cell: usize,
    pub x: [f64; 2],
    /// outward unit normal
    pub normal: [f64; 2],
}

impl FbPoint {
    pub fn inward(&self) -> [f64; 2] {
        [-self.normal[0], -self.normal[1]]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeBoundarySet {
    pub points: Vec<FbPoint>,
}

impl FreeBoundarySet {
    pub fn from_mask(mask: &ThinDomain) -> Self {
        let grid = mask.grid();
        let n = grid.n();
        let chi: Vec<f64> = mask.mask().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        // 3-cell box smoothing of the indicator
        let smooth: Vec<f64> = (0..chi.len())
            .map(|i| {
                let m = grid.multi_index(i);
                let mut acc = 0.0;
                let mut cnt = 0.0;
                let r1 = if n == 2 { -1i64..=1 } else { 0..=0 };
                for d0 in -1i64..=1 {
                    for d1 in r1.clone() {
                        let k0 = m[0] as i64 + d0;
                        let k1 = m[1] as i64 + d1;
                        if k0 < 0 || k1 < 0 || k0 > grid.cells() as i64 || k1 > grid.cells() as i64 {
                            continue;
                        }
                        acc += chi[grid.index([k0 as usize, k1 as usize])];
                        cnt += 1.0;
                    }
                }
                acc / cnt
            })
            .collect();
        let mut points = Vec::new();
        for i in 0..chi.len() {
            if !mask.is_boundary_node(i) {
                continue;
            }
            let m = grid.multi_index(i);
            let mut grad = [0.0; 2];
            let mut fallback = [0.0; 2];
            for d in 0..n {
                let mut lo = m;
                let mut hi = m;
                lo[d] -= 1;
                hi[d] += 1;
                let (il, ih) = (grid.index(lo), grid.index(hi));
                grad[d] = (smooth[ih] - smooth[il]) / 2.0;
                fallback[d] = chi[il] - chi[ih];
            }
            let mut normal = [-grad[0], -grad[1]];
            let mut len = (normal[0].powi(2) + normal[1].powi(2)).sqrt();
            if len < 1e-12 {
                normal = fallback;
                len = (normal[0].powi(2) + normal[1].powi(2)).sqrt();
            }
            if len < 1e-12 {
                // isolated or symmetric configuration: pick the first open axis side
                normal = [0.0; 2];
                for d in 0..n {
                    let mut hi = m;
                    hi[d] += 1;
                    if chi[grid.index(hi)] == 0.0 {
                        normal[d] = 1.0;
                        break;
                    }
                    let mut lo = m;
                    lo[d] -= 1;
                    if chi[grid.index(lo)] == 0.0 {
                        normal[d] = -1.0;
                        break;
                    }
                }
                len = 1.0;
            }
            normal = [normal[0] / len, normal[1] / len];
            let c = grid.coords(i);
            let h2 = 0.5 * grid.h();
            let x = [c[0] + h2 * normal[0], if n == 2 { c[1] + h2 * normal[1] } else { 0.0 }];
            points.push(FbPoint { cell: i, x, normal });
        }
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance_to(&self, x: [f64; 2]) -> f64 {
        self.points
            .iter()
            .map(|p| ((p.x[0] - x[0]).powi(2) + (p.x[1] - x[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

fn dist(a: [f64; 2], b: [f64; 2], n: usize) -> f64 {
    (0..n).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>().sqrt()
}

fn check_ball(grid: &BoxGrid, x0: [f64; 2], r: f64, floor_cells: f64) -> Result<()> {
    if !(r >= floor_cells * grid.h() * (1.0 - 1e-9)) {
        return Err(Error::Resolution(format!(
            "radius {r} below {floor_cells} cells (h = {})",
            grid.h()
        )));
    }
    if !grid.contains_ball(x0, r) {
        return Err(Error::Geometry(format!("ball of radius {r} at {x0:?} leaves the design box")));
    }
    Ok(())
}

/// Fraction of the cell of side h centred at c inside the thin ball.
fn thin_cell_fraction(c: [f64; 2], h: f64, x0: [f64; 2], r: f64, n: usize) -> f64 {
    let half = 0.5 * h;
    let mut near = 0.0;
    let mut far = 0.0;
    for d in 0..n {
        let lo = c[d] - half - x0[d];
        let hi = c[d] + half - x0[d];
        let nd = if lo > 0.0 { lo } else if hi < 0.0 { -hi } else { 0.0 };
        near += nd * nd;
        far += lo.abs().max(hi.abs()).powi(2);
    }
    if far.sqrt() <= r {
        return 1.0;
    }
    if near.sqrt() >= r {
        return 0.0;
    }
    let q: usize = if n == 1 { 64 } else { 16 };
    let mut inside = 0usize;
    let total = q.pow(n as u32);
    for k in 0..total {
        let mut d2 = 0.0;
        let mut rem = k;
        for d in 0..n {
            let idx = rem % q;
            rem /= q;
            let p = c[d] - half + (idx as f64 + 0.5) * h / q as f64;
            d2 += (p - x0[d]).powi(2);
        }
        if d2 < r * r {
            inside += 1;
        }
    }
    inside as f64 / total as f64
}

/// ℒₙ(B_r(x0) ∩ Ω) by cell fractions.
pub fn positivity_measure(mask: &ThinDomain, x0: [f64; 2], r: f64) -> f64 {
    let grid = mask.grid();
    let n = grid.n();
    let h = grid.h();
    mask.nodes()
        .into_iter()
        .map(|i| thin_cell_fraction(grid.coords(i), h, x0, r, n))
        .sum::<f64>()
        * grid.cell_volume()
}

/// |B_r(x0) ∩ Ω| / (ωₙ rⁿ).
pub fn density_ratio(mask: &ThinDomain, x0: [f64; 2], r: f64) -> Result<f64> {
    let grid = mask.grid();
    check_ball(grid, x0, r, MIN_RADIUS_CELLS)?;
    let n = grid.n();
    Ok(positivity_measure(mask, x0, r) / (unit_ball_volume(n) * r.powi(n as i32)))
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyReport {
    /// ĉ(X₀) = min_r r^{−s} sup_{𝓑_r(X₀)} |G|
    pub constants: Vec<f64>,
    pub on_free_boundary: Vec<bool>,
    pub min: f64,
    pub median: f64,
}

/// `modulus` is |G| on the full base grid.
pub fn nondegeneracy_scan(
    modulus: &[f64],
    grid: &BoxGrid,
    points: &[[f64; 2]],
    fb: &FreeBoundarySet,
    radii: &[f64],
    s: f64,
) -> Result<NondegeneracyReport> {
    let n = grid.n();
    let mut constants = Vec::with_capacity(points.len());
    for &x0 in points {
        let mut c = f64::INFINITY;
        for &r in radii {
            check_ball(grid, x0, r, MIN_RADIUS_CELLS)?;
            let sup = (0..grid.node_count())
                .filter(|&i| dist(grid.coords(i), x0, n) <= r * (1.0 + 1e-12))
                .map(|i| modulus[i].abs())
                .fold(0.0, f64::max);
            c = c.min(sup / r.powf(s));
        }
        constants.push(c);
    }
    let on_free_boundary = points.iter().map(|&p| fb.distance_to(p) <= grid.h()).collect();
    let mut sorted = constants.clone();
    sorted.sort_by(f64::total_cmp);
    let min = sorted.first().copied().unwrap_or(f64::NAN);
    let median = if sorted.is_empty() { f64::NAN } else { sorted[sorted.len() / 2] };
    Ok(NondegeneracyReport { constants, on_free_boundary, min, median })
}

/// Extended configuration G with its thin positivity set {|G| > 0} ∩ ℝⁿ.
#[derive(Clone, Debug)]
pub struct ExtendedSystem {
    components: Vec<ExtensionField>,
    positivity: ThinDomain,
    /// per slab cell, Σᵢ ∫_cell yᵃ|∇gⁱ|² (half space)
    cell_energy: Vec<f64>,
}

impl ExtendedSystem {
    pub fn new(components: Vec<ExtensionField>, positivity: ThinDomain) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Precondition("configuration needs at least one component".into()))?;
        if components.iter().any(|c| c.slab() != first.slab()) {
            return Err(Error::Compat("components live on different slabs".into()));
        }
        if first.slab().base() != positivity.grid() {
            return Err(Error::Compat("positivity mask and slab base grids differ".into()));
        }
        let cell_energy = cell_energies(&components);
        Ok(Self { components, positivity, cell_energy })
    }

    /// Extend every eigenfunction of the bundle on `slab`.
    pub fn from_bundle(bundle: &EigenBundle, slab: &SlabGrid) -> Result<Self> {
        if slab.base() != bundle.domain().grid() {
            return Err(Error::Compat("slab base grid differs from the bundle grid".into()));
        }
        let ext = Extender::new(slab.clone())?;
        let fields: Vec<Vec<f64>> = (0..bundle.m()).map(|i| bundle.full_field(i)).collect();
        #[cfg(feature = "parallel")]
        let comps: Result<Vec<ExtensionField>> = fields.par_iter().map(|f| ext.extend(f)).collect();
        #[cfg(not(feature = "parallel"))]
        let comps: Result<Vec<ExtensionField>> = fields.iter().map(|f| ext.extend(f)).collect();
        Self::new(comps?, bundle.domain().clone())
    }

    /// c·U(⟨x − x0, ν⟩, y) sampled on the slab, ν the inward unit normal.
    pub fn one_plane(slab: &SlabGrid, x0: [f64; 2], nu: [f64; 2], c: f64, s: f64) -> Result<Self> {
        let n = slab.base().n();
        let t = move |x: [f64; 2]| (0..n).map(|d| (x[d] - x0[d]) * nu[d]).sum::<f64>();
        let field = ExtensionField::from_fn(slab.clone(), |x, y| c * one_plane_solution(t(x), y, s));
        let mask = ThinDomain::from_predicate(slab.base().clone(), |x| t(x) > 0.0);
        Self::new(vec![field], mask)
    }

    pub fn components(&self) -> &[ExtensionField] {
        &self.components
    }

    pub fn positivity(&self) -> &ThinDomain {
        &self.positivity
    }

    pub fn slab(&self) -> &SlabGrid {
        self.components[0].slab()
    }

    pub fn grid(&self) -> &BoxGrid {
        self.slab().base()
    }

    /// |G| on the thin grid.
    pub fn modulus_trace(&self) -> Vec<f64> {
        let traces: Vec<Vec<f64>> = self.components.iter().map(|c| c.trace()).collect();
        (0..self.grid().node_count())
            .map(|i| traces.iter().map(|t| t[i] * t[i]).sum::<f64>().sqrt())
            .collect()
    }

    /// G(x, y) by interpolation, one entry per component.
    pub fn sample(&self, x: [f64; 2], y: f64) -> Option<Vec<f64>> {
        self.components.iter().map(|c| c.sample(x, y)).collect()
    }
}

fn cell_energies(components: &[ExtensionField]) -> Vec<f64> {
    let slab = components[0].slab();
    let base = slab.base();
    let n = base.n();
    let h = base.h();
    let cells = base.cells();
    let layers = slab.layers();
    let a = slab.a();
    let eta = slab.eta();
    let y = slab.y();
    let ncell = cells.pow(n as u32);
    let mut out = vec![0.0; ncell * layers];
    let prim = |v: f64| v.powf(1.0 + a) / (1.0 + a);
    for c in 0..ncell {
        let m = if n == 1 { [c, 0] } else { [c / cells, c % cells] };
        let corners: Vec<usize> = if n == 1 {
            vec![base.index(m), base.index([m[0] + 1, 0])]
        } else {
            vec![
                base.index(m),
                base.index([m[0] + 1, m[1]]),
                base.index([m[0], m[1] + 1]),
                base.index([m[0] + 1, m[1] + 1]),
            ]
        };
        // edges along each axis, as corner pairs
        let edges: &[(usize, usize)] = if n == 1 { &[(0, 1)] } else { &[(0, 1), (2, 3), (0, 2), (1, 3)] };
        for j in 0..layers {
            let wy = prim(y[j + 1]) - prim(y[j]);
            let cy = base.cell_volume() * (1.0 - a) / (eta[j + 1] - eta[j]);
            let mut e = 0.0;
            for g in components {
                let v = g.values();
                let mut ysum = 0.0;
                for &x in &corners {
                    ysum += (v[slab.index(x, j + 1)] - v[slab.index(x, j)]).powi(2);
                }
                e += cy * ysum / corners.len() as f64;
                let mut xsum = 0.0;
                for &(p, q) in edges {
                    for l in [j, j + 1] {
                        xsum += (v[slab.index(corners[q], l)] - v[slab.index(corners[p], l)]).powi(2);
                    }
                }
                // per axis: mean over its 2^{n-1} edges and 2 layers
                e += h.powi(n as i32 - 2) * wy * xsum / (2.0 * edges.len() as f64 / n as f64);
            }
            out[c * layers + j] = e;
        }
    }
    out
}

/// Weighted fraction of a slab cell inside the half ball around (x0, 0).
fn slab_cell_fraction(lo: [f64; 2], h: f64, y0: f64, y1: f64, a: f64, x0: [f64; 2], r: f64, n: usize) -> f64 {
    let mut near = 0.0;
    let mut far = 0.0;
    for d in 0..n {
        let l = lo[d] - x0[d];
        let u = lo[d] + h - x0[d];
        let nd = if l > 0.0 { l } else if u < 0.0 { -u } else { 0.0 };
        near += nd * nd;
        far += l.abs().max(u.abs()).powi(2);
    }
    near += y0 * y0;
    far += y1 * y1;
    if far.sqrt() <= r {
        return 1.0;
    }
    if near.sqrt() >= r {
        return 0.0;
    }
    let q = 8usize;
    let qy = 8usize;
    let mut inside = 0.0;
    let mut total = 0.0;
    let nx = q.pow(n as u32);
    for ky in 0..qy {
        let ya = y0 + (y1 - y0) * ky as f64 / qy as f64;
        let yb = y0 + (y1 - y0) * (ky + 1) as f64 / qy as f64;
        let w = (yb.powf(1.0 + a) - ya.powf(1.0 + a)) / (1.0 + a);
        let ym = 0.5 * (ya + yb);
        for k in 0..nx {
            let mut d2 = ym * ym;
            let mut rem = k;
            for d in 0..n {
                let idx = rem % q;
                rem /= q;
                let p = lo[d] + (idx as f64 + 0.5) * h / q as f64;
                d2 += (p - x0[d]).powi(2);
            }
            total += w;
            if d2 < r * r {
                inside += w;
            }
        }
    }
    inside / total
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WeissValue {
    pub r: f64,
    pub w: f64,
    /// ∫_{B_r} |y|ᵃ|∇G|² over ℝ^{n+1}
    pub volume: f64,
    /// ℒₙ(𝓑_r ∩ {|G| > 0})
    pub positivity: f64,
    /// ∫_{∂B_r} |y|ᵃ|G|² over ℝ^{n+1}
    pub sphere: f64,
}

impl WeissValue {
    /// W / (Λ̃ ωₙ): 1/2 on one-plane configurations.
    pub fn density(&self, params: &FracParams) -> f64 {
        self.w / (params.lambda_tilde() * unit_ball_volume(params.n()))
    }
}

const SPHERE_POINTS: usize = 256;
const SPHERE_AZIMUTH: usize = 128;

fn sphere_integral(sys: &ExtendedSystem, x0: [f64; 2], r: f64) -> Result<f64> {
    let slab = sys.slab();
    let a = slab.a();
    let n = slab.base().n();
    let p = 1.0 / (1.0 + a);
    let g2 = |x: [f64; 2], y: f64| -> Result<f64> {
        let v = sys
            .sample(x, y)
            .ok_or_else(|| Error::Geometry(format!("sphere of radius {r} leaves the slab")))?;
        Ok(v.iter().map(|t| t * t).sum())
    };
    // χ = elevation above the thin space, χ = (π/2) w^p removes sin^a χ
    let mut acc = 0.0;
    let dw = 1.0 / SPHERE_POINTS as f64;
    for k in 0..SPHERE_POINTS {
        let w = (k as f64 + 0.5) * dw;
        let chi = 0.5 * PI * w.powf(p);
        let jac = chi.sin().powf(a) * 0.5 * PI * p * w.powf(p - 1.0) * dw;
        let (cx, sy) = (chi.cos(), chi.sin());
        if n == 1 {
            // both ends of the upper half circle
            let right = g2([x0[0] + r * cx, 0.0], r * sy)?;
            let left = g2([x0[0] - r * cx, 0.0], r * sy)?;
            acc += jac * (right + left);
        } else {
            let mut ring = 0.0;
            for l in 0..SPHERE_AZIMUTH {
                let om = 2.0 * PI * (l as f64 + 0.5) / SPHERE_AZIMUTH as f64;
                ring += g2([x0[0] + r * cx * om.cos(), x0[1] + r * cx * om.sin()], r * sy)?;
            }
            acc += jac * cx * ring * 2.0 * PI / SPHERE_AZIMUTH as f64;
        }
    }
    Ok(2.0 * r.powf(n as f64 + a) * acc)
}

fn volume_integral(sys: &ExtendedSystem, x0: [f64; 2], r: f64) -> f64 {
    let slab = sys.slab();
    let base = slab.base();
    let n = base.n();
    let h = base.h();
    let cells = base.cells();
    let layers = slab.layers();
    let y = slab.y();
    let lo = base.lower();
    let range = |d: usize| {
        let a = ((x0[d] - r - lo[d]) / h).floor().max(0.0) as usize;
        let b = (((x0[d] + r - lo[d]) / h).ceil() as usize).min(cells);
        a..b
    };
    let r0 = range(0);
    let r1 = if n == 2 { range(1) } else { 0..1 };
    let mut acc = 0.0;
    for i0 in r0 {
        for i1 in r1.clone() {
            let c = if n == 1 { i0 } else { i0 * cells + i1 };
            let cl = [lo[0] + i0 as f64 * h, lo[1] + i1 as f64 * h];
            for j in 0..layers {
                if y[j] >= r {
                    break;
                }
                let f = slab_cell_fraction(cl, h, y[j], y[j + 1], slab.a(), x0, r, n);
                if f > 0.0 {
                    acc += f * sys.cell_energy[c * layers + j];
                }
            }
        }
    }
    2.0 * acc
}

/// W(X₀, G, r) = r^{−n} 𝒥(G, B_r) − s r^{−n−1} ∫_{∂B_r} |y|ᵃ|G|², with
/// 𝒥 = ∫_{B_r} |y|ᵃ|∇G|² + Λ̃ ℒₙ(𝓑_r ∩ {|G| > 0}).
pub fn weiss_energy(sys: &ExtendedSystem, x0: [f64; 2], r: f64, params: &FracParams) -> Result<WeissValue> {
    let grid = sys.grid();
    check_ball(grid, x0, r, WEISS_MIN_RADIUS_CELLS)?;
    if r >= sys.slab().height() {
        return Err(Error::Geometry("Weiss ball exceeds the slab height".into()));
    }
    let n = grid.n() as i32;
    let volume = volume_integral(sys, x0, r);
    let positivity = positivity_measure(sys.positivity(), x0, r);
    let sphere = sphere_integral(sys, x0, r)?;
    let w = r.powi(-n) * (volume + params.lambda_tilde() * positivity)
        - params.s() * r.powi(-n - 1) * sphere;
    Ok(WeissValue { r, w, volume, positivity, sphere })
}

#[derive(Clone, Debug, Serialize)]
pub struct WeissCurve {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub details: Vec<WeissValue>,
    /// C̃ [|G|]_{C^{0,s}} used for the monotonicity margin
    pub correction_scale: f64,
}

pub fn weiss_curve(
    sys: &ExtendedSystem,
    x0: [f64; 2],
    radii: &[f64],
    params: &FracParams,
    lambdas: &[f64],
) -> Result<WeissCurve> {
    let details: Vec<WeissValue> =
        radii.iter().map(|&r| weiss_energy(sys, x0, r, params)).collect::<Result<_>>()?;
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let holder = holder_seminorm(sys, x0, rmax, params.s());
    Ok(WeissCurve {
        center: x0,
        radii: radii.to_vec(),
        values: details.iter().map(|d| d.w).collect(),
        details,
        correction_scale: weiss_constant(params, lambdas) * holder,
    })
}

/// C̃ = (2ωₙ/d_s) Σ λᵢ, the constant of the monotonicity margin.
pub fn weiss_constant(params: &FracParams, lambdas: &[f64]) -> f64 {
    let d = extension_constant(params.s()).expect("params validated");
    2.0 * unit_ball_volume(params.n()) / d * lambdas.iter().sum::<f64>()
}

/// C̃ = (2/d_s) Σ λᵢ, the constant of the almost-minimality inequality.
pub fn almost_minimality_constant(params: &FracParams, lambdas: &[f64]) -> f64 {
    let d = extension_constant(params.s()).expect("params validated");
    2.0 / d * lambdas.iter().sum::<f64>()
}

/// Discrete [|G|]_{C^{0,s}} near X₀: thin-space pairs within r0 plus
/// vertical pairs above each thin node.
pub fn holder_seminorm(sys: &ExtendedSystem, x0: [f64; 2], r0: f64, s: f64) -> f64 {
    let grid = sys.grid();
    let slab = sys.slab();
    let n = grid.n();
    let modulus = |x: usize, j: usize| -> f64 {
        sys.components.iter().map(|c| c.value(x, j).powi(2)).sum::<f64>().sqrt()
    };
    let near: Vec<usize> = (0..grid.node_count()).filter(|&i| dist(grid.coords(i), x0, n) <= r0).collect();
    let mut best = 0.0f64;
    for (k, &i) in near.iter().enumerate() {
        let gi = modulus(i, 0);
        for &j in &near[k + 1..] {
            let d = dist(grid.coords(i), grid.coords(j), n);
            best = best.max((gi - modulus(j, 0)).abs() / d.powf(s));
        }
        for (l, &yl) in slab.y().iter().enumerate().skip(1) {
            if yl > r0 {
                break;
            }
            best = best.max((modulus(i, l) - gi).abs() / yl.powf(s));
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityAudit {
    /// smallest σ ≥ 0 making W(r) + 2σ(C̃/s)[|G|] r^s nondecreasing
    pub sigma_fit: f64,
    /// index k of the radius pair (k, k+1) that sets σ_fit, if any
    pub binding_pair: Option<usize>,
    pub correction_scale: f64,
}

pub fn weiss_monotonicity_audit(curve: &WeissCurve, s: f64) -> Result<MonotonicityAudit> {
    monotonicity_sigma(&curve.radii, &curve.values, curve.correction_scale, s)
}

/// σ_fit for a sampled curve with margin scale K₀ = C̃[|G|].
pub fn monotonicity_sigma(radii: &[f64], values: &[f64], scale: f64, s: f64) -> Result<MonotonicityAudit> {
    if radii.len() < 4 || radii.len() != values.len() {
        return Err(Error::Precondition("monotonicity audit needs at least 4 radii".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("radii must be strictly increasing".into()));
    }
    let k = 2.0 * scale / s;
    let mut sigma = 0.0f64;
    let mut binding = None;
    for i in 0..radii.len() - 1 {
        let drop = values[i] - values[i + 1];
        if drop > 0.0 {
            let need = if k > 0.0 { drop / (k * (radii[i + 1].powf(s) - radii[i].powf(s))) } else { f64::INFINITY };
            if need > sigma {
                sigma = need;
                binding = Some(i);
            }
        }
    }
    Ok(MonotonicityAudit { sigma_fit: sigma, binding_pair: binding, correction_scale: scale })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlatnessMode {
    /// sample the blow-up over the unit half ball
    Extension,
    /// sample only the thin space
    Trace,
}

#[derive(Clone, Debug, Serialize)]
pub struct Flatness {
    /// sup_{B₁} |G_{X₀,r} − c U(⟨x,ν⟩, y) f|
    pub epsilon: f64,
    /// ε / c
    pub relative: f64,
    pub nu: [f64; 2],
    pub f: Vec<f64>,
}

fn unit_samples(n: usize, mode: FlatnessMode) -> Vec<([f64; 2], f64)> {
    let mut pts = Vec::new();
    match (n, mode) {
        (1, FlatnessMode::Extension) => {
            pts.push(([0.0, 0.0], 0.0));
            for k in 1..=16 {
                let rho = k as f64 / 16.0;
                for l in 0..=16 {
                    let phi = PI * l as f64 / 16.0;
                    pts.push(([rho * phi.cos(), 0.0], rho * phi.sin()));
                }
            }
        }
        (1, FlatnessMode::Trace) => {
            for k in -32..=32 {
                pts.push(([k as f64 / 32.0, 0.0], 0.0));
            }
        }
        (_, FlatnessMode::Extension) => {
            for i in -8i32..=8 {
                for j in -8i32..=8 {
                    for l in 0..=8 {
                        let p = [i as f64 / 8.0, j as f64 / 8.0];
                        let y = l as f64 / 8.0;
                        if p[0] * p[0] + p[1] * p[1] + y * y <= 1.0 + 1e-12 {
                            pts.push((p, y));
                        }
                    }
                }
            }
        }
        (_, FlatnessMode::Trace) => {
            for i in -16i32..=16 {
                for j in -16i32..=16 {
                    let p = [i as f64 / 16.0, j as f64 / 16.0];
                    if p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-12 {
                        pts.push((p, 0.0));
                    }
                }
            }
        }
    }
    pts
}

/// Distance of the blow-up G_{X₀,r} from the one-plane family.
pub fn flatness(
    sys: &ExtendedSystem,
    x0: [f64; 2],
    r: f64,
    params: &FracParams,
    mode: FlatnessMode,
) -> Result<Flatness> {
    let n = params.n();
    let s = params.s();
    let c = params.slope_const();
    let grid = sys.grid();
    if !grid.contains_ball(x0, r) || r >= sys.slab().height() {
        return Err(Error::Geometry(format!("blow-up window of radius {r} at {x0:?} leaves the slab")));
    }
    let scale = r.powf(-s);
    let samples: Vec<([f64; 2], f64, Vec<f64>)> = unit_samples(n, mode)
        .into_iter()
        .map(|(p, y)| {
            let x = [x0[0] + r * p[0], x0[1] + r * p[1]];
            let g = sys
                .sample(x, r * y)
                .ok_or_else(|| Error::Geometry("blow-up sample outside the slab".into()))?;
            Ok((p, y, g.into_iter().map(|v| v * scale).collect()))
        })
        .collect::<Result<_>>()?;
    let m = sys.components.len();
    let eval = |nu: [f64; 2]| -> (f64, Vec<f64>) {
        let u: Vec<f64> = samples
            .iter()
            .map(|(p, y, _)| c * one_plane_solution(p[0] * nu[0] + p[1] * nu[1], *y, s))
            .collect();
        let mut f = vec![0.0; m];
        for ((_, _, g), uk) in samples.iter().zip(&u) {
            for (fi, gi) in f.iter_mut().zip(g) {
                *fi += gi * uk;
            }
        }
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            f.iter_mut().for_each(|v| *v /= norm);
        } else {
            f = vec![0.0; m];
            f[0] = 1.0;
        }
        let eps = samples
            .iter()
            .zip(&u)
            .map(|((_, _, g), uk)| g.iter().zip(&f).map(|(gi, fi)| (gi - uk * fi).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        (eps, f)
    };
    let mut best = (f64::INFINITY, vec![], [0.0; 2]);
    let consider = |nu: [f64; 2], best: &mut (f64, Vec<f64>, [f64; 2])| {
        let (e, f) = eval(nu);
        if e < best.0 {
            *best = (e, f, nu);
        }
    };
    if n == 1 {
        consider([1.0, 0.0], &mut best);
        consider([-1.0, 0.0], &mut best);
    } else {
        let coarse = 180;
        for k in 0..coarse {
            let th = 2.0 * PI * k as f64 / coarse as f64;
            consider([th.cos(), th.sin()], &mut best);
        }
        let th0 = best.2[1].atan2(best.2[0]);
        let step = 2.0 * PI / coarse as f64;
        for k in -8i32..=8 {
            let th = th0 + step * k as f64 / 8.0;
            consider([th.cos(), th.sin()], &mut best);
        }
    }
    let (epsilon, f, nu) = best;
    Ok(Flatness { epsilon, relative: epsilon / c, nu, f })
}

/// Least-squares α in |G|(x0 + tν, 0) ≈ α t^s over t ∈ [3h, 10h].
pub fn boundary_slope(modulus: &[f64], grid: &BoxGrid, x0: [f64; 2], inward: [f64; 2], s: f64) -> Result<f64> {
    let h = grid.h();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut count = 0;
    for k in 0..=14 {
        let t = 3.0 * h + 0.5 * h * k as f64;
        let x = [x0[0] + t * inward[0], x0[1] + t * inward[1]];
        let Some(g) = grid.interpolate(modulus, x) else { continue };
        if g <= 0.0 {
            continue;
        }
        let ts = t.powf(s);
        num += g * ts;
        den += ts * ts;
        count += 1;
    }
    if count < 4 {
        return Err(Error::Resolution(format!("only {count} in-domain slope samples at {x0:?}")));
    }
    Ok(num / den)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyConfig {
    pub tol: f64,
    pub delta: f64,
    pub flatness_threshold: f64,
    /// density radius in cells
    pub density_cells: f64,
    /// finest flatness radius in cells
    pub flatness_cells: f64,
    pub flatness_mode: FlatnessMode,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tol: 0.1,
            delta: 0.05,
            flatness_threshold: 0.2,
            density_cells: 5.0,
            flatness_cells: 5.0,
            flatness_mode: FlatnessMode::Extension,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Regular,
    Singular,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointClassification {
    pub x: [f64; 2],
    pub density: f64,
    pub label: Label,
    pub flatness: f64,
    pub slope: Option<f64>,
}

pub fn classify(
    sys: &ExtendedSystem,
    point: &FbPoint,
    params: &FracParams,
    cfg: &ClassifyConfig,
) -> Result<PointClassification> {
    let h = sys.grid().h();
    let density = density_ratio(sys.positivity(), point.x, cfg.density_cells * h)?;
    let flat = flatness(sys, point.x, cfg.flatness_cells * h, params, cfg.flatness_mode)?;
    let slope = boundary_slope(&sys.modulus_trace(), sys.grid(), point.x, point.inward(), params.s()).ok();
    let label = label_for(density, flat.relative, cfg);
    Ok(PointClassification { x: point.x, density, label, flatness: flat.relative, slope })
}

pub fn label_for(density: f64, relative_flatness: f64, cfg: &ClassifyConfig) -> Label {
    if (density - 0.5).abs() < cfg.tol && relative_flatness < cfg.flatness_threshold {
        Label::Regular
    } else if density >= 0.5 + cfg.delta {
        Label::Singular
    } else {
        Label::Undetermined
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportReport {
    /// fraction of Ω cells where |vⁱ| < 1e−10 ‖vⁱ‖_∞
    pub fractions: Vec<f64>,
    /// some component of Ω has fewer than 3 cells
    pub low_resolution: bool,
}

pub fn support_coincidence(bundle: &EigenBundle) -> SupportReport {
    let fractions = bundle
        .vectors()
        .iter()
        .map(|v| {
            let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            v.iter().filter(|x| x.abs() < 1e-10 * sup).count() as f64 / v.len() as f64
        })
        .collect();
    let low_resolution = bundle.domain().components().iter().any(|c| c.len() < 3);
    SupportReport { fractions, low_resolution }
}

#[derive(Clone, Debug, Serialize)]
pub struct AlmostMinimalityBall {
    pub center: [f64; 2],
    pub r: f64,
    pub j_original: f64,
    pub j_competitor: f64,
    pub l1_distance: f64,
    pub sigma_needed: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlmostMinimalityAudit {
    pub balls: Vec<AlmostMinimalityBall>,
    /// max over balls of σ_needed
    pub sigma: f64,
}

/// Harmonic-replacement competitor audit of 𝒥(G) ≤ 𝒥(G̃) + σ C̃ ‖G̃ − G‖_{L¹}.
pub fn almost_minimality_audit(
    sys: &ExtendedSystem,
    params: &FracParams,
    lambdas: &[f64],
    balls: &[([f64; 2], f64)],
) -> Result<AlmostMinimalityAudit> {
    let slab = sys.slab();
    let grid = sys.grid();
    let ct = almost_minimality_constant(params, lambdas);
    let lt = params.lambda_tilde();
    let mut out = Vec::with_capacity(balls.len());
    for &(center, r) in balls {
        let rep = HarmonicReplacer::new(slab, center, r)?;
        let ball = rep.ball().to_vec();
        let replaced: Vec<_> = sys.components.iter().map(|c| rep.replace(c)).collect::<Result<_>>()?;
        let e0: f64 = replaced.iter().map(|x| x.energy_before).sum();
        let e1: f64 = replaced.iter().map(|x| x.energy_after).sum();
        let thin: Vec<usize> = (0..grid.node_count()).filter(|&x| ball[slab.index(x, 0)]).collect();
        let mut pos0 = 0usize;
        let mut pos1 = 0usize;
        let mut l1 = 0.0;
        let scale = sys.modulus_trace().iter().cloned().fold(0.0, f64::max);
        for &x in &thin {
            let idx = slab.index(x, 0);
            let g1 = replaced.iter().map(|c| c.field.values()[idx].powi(2)).sum::<f64>().sqrt();
            if sys.positivity().contains_node(x) {
                pos0 += 1;
            }
            if g1 > 1e-14 * scale {
                pos1 += 1;
            }
            l1 += sys
                .components
                .iter()
                .zip(&replaced)
                .map(|(c, rr)| (c.values()[idx] - rr.field.values()[idx]).powi(2))
                .sum::<f64>()
                .sqrt();
        }
        let cell = grid.cell_volume();
        let j0 = 2.0 * e0 + lt * pos0 as f64 * cell;
        let j1 = 2.0 * e1 + lt * pos1 as f64 * cell;
        let l1 = l1 * cell;
        let sigma_needed = if l1 > 0.0 { ((j0 - j1) / (ct * l1)).max(0.0) } else { 0.0 };
        out.push(AlmostMinimalityBall {
            center,
            r,
            j_original: j0,
            j_competitor: j1,
            l1_distance: l1,
            sigma_needed,
        });
    }
    let sigma = out.iter().map(|b| b.sigma_needed).fold(0.0, f64::max);
    Ok(AlmostMinimalityAudit { balls: out, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(cells: usize) -> BoxGrid {
        BoxGrid::new(1, -2.0, 2.0, cells).unwrap()
    }

    #[test]
    fn half_line_density_is_half() {
        let grid = line(256);
        let h = grid.h();
        let mask = ThinDomain::from_predicate(grid, |x| x[0] > 0.0);
        let fb = FreeBoundarySet::from_mask(&mask);
        let p = fb.points[0];
        assert!((p.x[0] - 0.5 * h).abs() < 1e-12 && p.normal[0] == -1.0);
        for r in [8.0 * h, 32.0 * h, 0.3] {
            let d = density_ratio(&mask, p.x, r).unwrap();
            assert!((d - 0.5).abs() < 1e-3, "{d}");
        }
        assert!(matches!(density_ratio(&mask, [0.0, 0.0], 0.01), Err(Error::Resolution(_))));
        assert!(matches!(density_ratio(&mask, [1.5, 0.0], 1.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn half_plane_density_is_half() {
        let grid = BoxGrid::new(2, -1.0, 1.0, 64).unwrap();
        let mask = ThinDomain::from_predicate(grid, |x| x[0] + 0.3 * x[1] > 0.01);
        let d = density_ratio(&mask, [0.01, 0.0], 0.5).unwrap();
        assert!((d - 0.5).abs() < 0.02, "{d}");
    }

    #[test]
    fn free_boundary_normals_point_out() {
        let grid = line(64);
        let mask = ThinDomain::interval(grid, -1.0, 1.0);
        let fb = FreeBoundarySet::from_mask(&mask);
        assert_eq!(fb.len(), 2);
        for p in &fb.points {
            assert!((p.x[0].abs() - 1.0 + 1.0 / 32.0).abs() < 1e-12, "{:?}", p.x);
            assert_eq!(p.normal[0].signum(), p.x[0].signum());
        }
    }

    #[test]
    fn exact_power_slope() {
        let grid = line(512);
        let s = 0.3;
        let g: Vec<f64> = (0..grid.node_count()).map(|i| grid.coords(i)[0].max(0.0).powf(s)).collect();
        let a = boundary_slope(&g, &grid, [0.0, 0.0], [1.0, 0.0], s).unwrap();
        assert!((a - 1.0).abs() < 2e-3, "{a}");
        let thin = |x: f64| if x.abs() < 0.01 { x.abs().powf(s) } else { 0.0 };
        let g: Vec<f64> = (0..grid.node_count()).map(|i| thin(grid.coords(i)[0])).collect();
        assert!(matches!(boundary_slope(&g, &grid, [0.0, 0.0], [1.0, 0.0], s), Err(Error::Resolution(_))));
    }

    #[test]
    fn monotonicity_fit() {
        let r = [0.1, 0.2, 0.3, 0.4];
        let up = monotonicity_sigma(&r, &[1.0, 1.1, 1.2, 1.3], 1.0, 0.5).unwrap();
        assert_eq!(up.sigma_fit, 0.0);
        assert!(up.binding_pair.is_none());
        let w = [1.0, 0.99, 1.2, 1.3];
        let down = monotonicity_sigma(&r, &w, 1.0, 0.5).unwrap();
        let want = 0.01 / (4.0 * (0.2f64.sqrt() - 0.1f64.sqrt()));
        assert!((down.sigma_fit - want).abs() < 1e-14);
        assert_eq!(down.binding_pair, Some(0));
        assert!(monotonicity_sigma(&r[..3], &w[..3], 1.0, 0.5).is_err());
    }

    #[test]
    fn labels() {
        let cfg = ClassifyConfig::default();
        assert_eq!(label_for(0.5, 0.01, &cfg), Label::Regular);
        assert_eq!(label_for(0.5, 0.5, &cfg), Label::Undetermined);
        assert_eq!(label_for(0.8, 0.5, &cfg), Label::Singular);
        assert_eq!(label_for(0.3, 0.0, &cfg), Label::Undetermined);
    }

    fn plane_system(s: f64, cells: usize, layers: usize) -> (ExtendedSystem, FracParams) {
        let params = FracParams::new(1, s, 1.0).unwrap();
        let slab = SlabGrid::graded(line(cells), layers, 4.0, &params).unwrap();
        let sys = ExtendedSystem::one_plane(&slab, [0.0, 0.0], [1.0, 0.0], params.slope_const(), s).unwrap();
        (sys, params)
    }

    #[test]
    fn one_plane_weiss_density() {
        for s in [0.3, 0.5, 0.7] {
            let (sys, params) = plane_system(s, 512, 64);
            for r in [0.25, 0.5] {
                let w = weiss_energy(&sys, [0.0, 0.0], r, &params).unwrap();
                let d = w.density(&params);
                assert!((d - 0.5).abs() < 0.03, "s={s} r={r} {w:?}");
            }
        }
    }

    #[test]
    fn one_plane_is_flat() {
        let (sys, params) = plane_system(0.5, 512, 64);
        let f = flatness(&sys, [0.0, 0.0], 0.1, &params, FlatnessMode::Extension).unwrap();
        assert!(f.relative < 0.05, "{f:?}");
        assert_eq!(f.nu, [1.0, 0.0]);
    }
}
