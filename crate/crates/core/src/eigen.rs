//! Lowest Dirichlet eigenpairs of the discrete form, Gram–Schmidt in L²,
//! and the shape objective Σλᵢ + Λ|Ω|.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constants::FracParams;
use crate::error::{Error, Result};
use crate::form::StiffnessForm;
use crate::grid::ThinDomain;

/// Above this many Ω nodes the block shift-invert iteration replaces the
/// full dense decomposition.
pub const DENSE_LIMIT: usize = 700;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const CLUSTER_GAP: f64 = 1e-10;
const SUBSPACE_SEED: u64 = 0x5eed_f4ac_1ab0_0001;

#[derive(Clone, Debug)]
pub struct EigenBundle {
    domain: ThinDomain,
    nodes: Vec<usize>,
    lambdas: Vec<f64>,
    /// Ω-vectors, L²-orthonormal with weight h^n
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    gram: DMatrix<f64>,
    clustered: bool,
}

impl EigenBundle {
    /// Reassemble a bundle from stored parts; recomputes the Gram matrix.
    pub fn from_parts(
        domain: ThinDomain,
        lambdas: Vec<f64>,
        vectors: Vec<Vec<f64>>,
        residuals: Vec<f64>,
    ) -> Result<Self> {
        let nodes = domain.nodes();
        if lambdas.len() != vectors.len() || residuals.len() != vectors.len() {
            return Err(Error::DimensionMismatch { expected: lambdas.len(), found: vectors.len() });
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != nodes.len()) {
            return Err(Error::DimensionMismatch { expected: nodes.len(), found: v.len() });
        }
        let mass = domain.grid().cell_volume();
        let gram = gram_matrix(&vectors, mass);
        let clustered = is_clustered(&lambdas);
        Ok(Self { domain, nodes, lambdas, vectors, residuals, gram, clustered })
    }

    pub fn domain(&self) -> &ThinDomain {
        &self.domain
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn m(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Some computed eigenvalues are closer than 1e−10 relative; the vectors
    /// then only span the invariant subspace.
    pub fn clustered(&self) -> bool {
        self.clustered
    }

    pub fn orthonormality_defect(&self) -> f64 {
        (&self.gram - DMatrix::identity(self.m(), self.m())).amax()
    }

    /// Eigenfunction i (0-based) on the full grid, zero off Ω.
    pub fn full_field(&self, i: usize) -> Vec<f64> {
        let mut full = vec![0.0; self.domain.grid().node_count()];
        for (&node, &v) in self.nodes.iter().zip(&self.vectors[i]) {
            full[node] = v;
        }
        full
    }

    /// |V| = (Σ (vⁱ)²)^{1/2} on the full grid.
    pub fn modulus_field(&self) -> Vec<f64> {
        let mut full = vec![0.0; self.domain.grid().node_count()];
        for (k, &node) in self.nodes.iter().enumerate() {
            full[node] = self.vectors.iter().map(|v| v[k] * v[k]).sum::<f64>().sqrt();
        }
        full
    }
}

fn gram_matrix(vectors: &[Vec<f64>], mass: f64) -> DMatrix<f64> {
    let m = vectors.len();
    DMatrix::from_fn(m, m, |i, j| mass * dot(&vectors[i], &vectors[j]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn is_clustered(lambdas: &[f64]) -> bool {
    lambdas.windows(2).any(|w| (w[1] - w[0]).abs() < CLUSTER_GAP * w[1].abs())
}

/// Flip v so that its entry of largest magnitude is positive (first one wins
/// ties).
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best * (1.0 + 1e-12) {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The m smallest eigenpairs of K v = λ h^n v.
pub fn lowest_eigenpairs(form: &StiffnessForm, m: usize) -> Result<EigenBundle> {
    lowest_eigenpairs_warm(form, m, None)
}

/// As [`lowest_eigenpairs`], optionally seeding the block iteration with
/// vectors from a nearby domain (ignored on the dense path).
pub fn lowest_eigenpairs_warm(
    form: &StiffnessForm,
    m: usize,
    warm: Option<&[Vec<f64>]>,
) -> Result<EigenBundle> {
    let dim = form.dim();
    if m == 0 || m > dim {
        return Err(Error::Parameter(format!("requested {m} eigenpairs on a {dim}-node domain")));
    }
    let mass = form.mass();
    let a = form.matrix() / mass;
    let (lambdas, q) = if dim <= DENSE_LIMIT {
        dense_lowest(a.clone(), m)
    } else {
        subspace_lowest(&a, m, warm)?
    };
    let k = form.matrix();
    let mut vectors = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    let scale = 1.0 / mass.sqrt();
    for (i, &lambda) in lambdas.iter().enumerate() {
        let mut v: Vec<f64> = q.column(i).iter().map(|x| x * scale).collect();
        normalize_sign(&mut v);
        let vv = nalgebra::DVector::from_column_slice(&v);
        let kv = k * &vv;
        let r = (&kv - &vv * (lambda * mass)).norm() / kv.norm();
        if !(r <= RESIDUAL_TOL) {
            return Err(Error::Convergence {
                iterations: 0,
                detail: format!("eigenpair {} residual {r:e} exceeds {RESIDUAL_TOL:e}", i + 1),
            });
        }
        residuals.push(r);
        vectors.push(v);
    }
    let gram = gram_matrix(&vectors, mass);
    let clustered = is_clustered(&lambdas);
    Ok(EigenBundle {
        domain: form.domain().clone(),
        nodes: form.nodes().to_vec(),
        lambdas,
        vectors,
        residuals,
        gram,
        clustered,
    })
}

fn dense_lowest(a: DMatrix<f64>, m: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let evd = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]).selfadjoint_eigendecomposition(faer::Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(i).total_cmp(&s.read(j)));
    let lambdas = order[..m].iter().map(|&i| s.read(i)).collect();
    let q = DMatrix::from_fn(n, m, |r, c| u.read(r, order[c]));
    (lambdas, q)
}

/// Block inverse iteration with Rayleigh–Ritz on A (symmetric positive
/// definite).
fn subspace_lowest(
    a: &DMatrix<f64>,
    m: usize,
    warm: Option<&[Vec<f64>]>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    const MAX_ITER: usize = 500;
    let dim = a.nrows();
    let p = (2 * m).max(m + 6).min(dim);
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Precondition("stiffness matrix is not positive definite".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSPACE_SEED);
    let mut x = DMatrix::from_fn(dim, p, |_, _| rng.gen::<f64>() - 0.5);
    if let Some(w) = warm {
        for (c, v) in w.iter().take(p).enumerate() {
            if v.len() == dim {
                for r in 0..dim {
                    x[(r, c)] = v[r];
                }
            }
        }
    }
    for iter in 1..=MAX_ITER {
        let y = chol.solve(&x);
        let q = y.qr().q();
        let h = q.transpose() * a * &q;
        let (theta, z) = dense_lowest(h, p);
        x = &q * z;
        if iter % 2 == 0 || iter == MAX_ITER {
            let ax = a * &x;
            let converged = (0..m).all(|i| {
                let col = x.column(i);
                let r = (ax.column(i) - col * theta[i]).norm() / ax.column(i).norm();
                r < 1e-11
            });
            if converged {
                return Ok((theta[..m].to_vec(), x.columns(0, m).into_owned()));
            }
        }
    }
    Err(Error::Convergence {
        iterations: MAX_ITER,
        detail: "block inverse iteration stalled".into(),
    })
}

/// L²-orthonormalize ṽ¹..ṽ^m in order against the lumped mass h^n.
pub fn gram_schmidt(v_tilde: &[Vec<f64>], mass: f64) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(v_tilde.len());
    for (i, v) in v_tilde.iter().enumerate() {
        if let Some(first) = out.first() {
            if first.len() != v.len() {
                return Err(Error::DimensionMismatch { expected: first.len(), found: v.len() });
            }
        }
        let norm0 = (mass * dot(v, v)).sqrt();
        let mut w = v.clone();
        // two passes of modified Gram–Schmidt for stability
        for _ in 0..2 {
            for u in &out {
                let c = mass * dot(&w, u);
                w.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = (mass * dot(&w, &w)).sqrt();
        if !(norm0 > 0.0) || (norm / norm0).powi(2) < 1e-10 {
            return Err(Error::Rank { index: i + 1 });
        }
        w.iter_mut().for_each(|x| *x /= norm);
        out.push(w);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SupBoundReport {
    /// ‖vⁱ‖_∞ / (prefactor·λᵢ)^{n/(4s)}
    pub ratios: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub pass: Vec<bool>,
}

pub fn sup_bound_check(bundle: &EigenBundle, params: &FracParams, prefactor: f64) -> SupBoundReport {
    let p = params.n() as f64 / (4.0 * params.s());
    let mut out = SupBoundReport { ratios: vec![], sup_norms: vec![], pass: vec![] };
    for (v, &l) in bundle.vectors.iter().zip(&bundle.lambdas) {
        let sup = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let ratio = sup / (prefactor * l).powf(p);
        out.sup_norms.push(sup);
        out.ratios.push(ratio);
        out.pass.push(ratio <= 1.0);
    }
    out
}

/// Per eigenfunction and connected component of Ω, max |vⁱ| on the
/// component divided by ‖vⁱ‖_∞.
pub fn component_activity(bundle: &EigenBundle) -> Vec<Vec<f64>> {
    let comps = bundle.domain.components();
    let pos: std::collections::HashMap<usize, usize> =
        bundle.nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    bundle
        .vectors
        .iter()
        .map(|v| {
            let sup = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            comps
                .iter()
                .map(|c| c.iter().map(|n| v[pos[n]].abs()).fold(0.0, f64::max) / sup)
                .collect()
        })
        .collect()
}

/// Σ_{i≤m} λᵢ(Ω) + Λ|Ω|.
pub fn objective(domain: &ThinDomain, params: &FracParams, m: usize) -> Result<f64> {
    let form = StiffnessForm::assemble(domain, params)?;
    let bundle = lowest_eigenpairs(&form, m)?;
    Ok(bundle.lambda_sum() + params.lambda_penalty() * domain.measure())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGrid;

    fn interval_bundle(cells: usize, s: f64, m: usize) -> EigenBundle {
        let grid = BoxGrid::new(1, -2.0, 2.0, cells).unwrap();
        let dom = ThinDomain::interval(grid, -1.0, 1.0);
        let p = FracParams::new(1, s, 1.0).unwrap();
        lowest_eigenpairs(&StiffnessForm::assemble(&dom, &p).unwrap(), m).unwrap()
    }

    #[test]
    fn ascending_orthonormal_and_positive_ground_state() {
        let b = interval_bundle(128, 0.5, 4);
        assert!(b.lambdas().windows(2).all(|w| w[0] < w[1]));
        assert!(b.orthonormality_defect() < 1e-10);
        assert!(b.vectors()[0].iter().all(|&x| x > 0.0));
        assert!(b.residuals().iter().all(|&r| r <= RESIDUAL_TOL));
        assert!(!b.clustered());
    }

    #[test]
    fn half_laplacian_ground_state_on_interval() {
        // Richardson extrapolation over h, h/2, h/4 with the observed rate,
        // against λ₁ of (−Δ)^{1/2} on (−1,1), 1.1577738836977.
        let l: Vec<f64> =
            [128, 256, 512].iter().map(|&c| interval_bundle(c, 0.5, 1).lambdas()[0]).collect();
        let ratio = (l[0] - l[1]) / (l[1] - l[2]);
        assert!(ratio > 1.5, "{l:?}");
        let extrapolated = l[2] - (l[1] - l[2]) / (ratio - 1.0);
        let rel = (extrapolated - 1.157_773_883_697_7).abs() / 1.157_773_883_697_7;
        assert!(rel < 5e-4, "{l:?} -> {extrapolated}");
    }

    #[test]
    fn dense_and_block_paths_agree() {
        let grid = BoxGrid::new(1, -2.0, 2.0, 400).unwrap();
        let dom = ThinDomain::interval(grid, -1.0, 1.0);
        let form = StiffnessForm::assemble(&dom, &FracParams::new(1, 0.3, 1.0).unwrap()).unwrap();
        let a = form.matrix() / form.mass();
        let (ld, _) = dense_lowest(a.clone(), 3);
        let (lb, _) = subspace_lowest(&a, 3, None).unwrap();
        for (x, y) in ld.iter().zip(&lb) {
            assert!((x - y).abs() < 1e-9 * x);
        }
    }

    #[test]
    fn too_many_pairs_is_a_parameter_error() {
        let grid = BoxGrid::new(1, -1.0, 1.0, 8).unwrap();
        let dom = ThinDomain::node_run(grid, &[(3, 2)]).unwrap();
        let form = StiffnessForm::assemble(&dom, &FracParams::new(1, 0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(lowest_eigenpairs(&form, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn gram_schmidt_contracts() {
        let b = interval_bundle(64, 0.5, 3);
        let mass = b.domain().grid().cell_volume();
        let w = gram_schmidt(b.vectors(), mass).unwrap();
        for (x, y) in w.iter().zip(b.vectors()) {
            let d = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
        let dup = vec![b.vectors()[0].clone(), b.vectors()[0].clone()];
        assert!(matches!(gram_schmidt(&dup, mass), Err(Error::Rank { index: 2 })));
    }

    #[test]
    fn sup_bound_report_shape() {
        let b = interval_bundle(64, 0.5, 3);
        let p = FracParams::new(1, 0.5, 1.0).unwrap();
        let r = sup_bound_check(&b, &p, 1e6);
        assert!(r.pass.iter().all(|x| *x));
        assert!(r.ratios.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn objective_rejects_empty_mask() {
        let grid = BoxGrid::new(1, -1.0, 1.0, 8).unwrap();
        let p = FracParams::new(1, 0.5, 1.0).unwrap();
        assert!(matches!(objective(&ThinDomain::empty(grid), &p, 1), Err(Error::Domain(_))));
    }
}
