//! Closed-form constants of the fractional problem and the one-plane
//! reference solution.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::gamma;

/// Dimension, fractional exponent and volume penalty of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracParams {
    n: usize,
    s: f64,
    lambda_penalty: f64,
}

impl FracParams {
    pub fn new(n: usize, s: f64, lambda_penalty: f64) -> Result<Self> {
        check_n_s(n, s)?;
        if !(lambda_penalty.is_finite() && lambda_penalty > 0.0) {
            return Err(Error::Parameter(format!(
                "volume penalty must be positive, got {lambda_penalty}"
            )));
        }
        Ok(Self { n, s, lambda_penalty })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Weight exponent a = 1 − 2s of the extension operator.
    pub fn a(&self) -> f64 {
        1.0 - 2.0 * self.s
    }

    pub fn lambda_penalty(&self) -> f64 {
        self.lambda_penalty
    }

    /// Penalty of the extended functional, 2Λ / d_s.
    pub fn lambda_tilde(&self) -> f64 {
        2.0 * self.lambda_penalty / extension_constant_unchecked(self.s)
    }

    pub fn with_lambda(&self, lambda_penalty: f64) -> Result<Self> {
        Self::new(self.n, self.s, lambda_penalty)
    }

    pub fn constants(&self) -> ConstantTable {
        ConstantTable {
            c_ns: normalization_constant_unchecked(self.n, self.s),
            d_s: extension_constant_unchecked(self.s),
            omega_n: unit_ball_volume(self.n),
            slope_const: self.lambda_penalty.sqrt() / gamma(1.0 + self.s),
        }
    }

    /// Amplitude √Λ/Γ(1+s) of the regular blow-up profile.
    pub fn slope_const(&self) -> f64 {
        self.constants().slope_const
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantTable {
    pub c_ns: f64,
    pub d_s: f64,
    pub omega_n: f64,
    pub slope_const: f64,
}

fn check_n_s(n: usize, s: f64) -> Result<()> {
    if !(n == 1 || n == 2) {
        return Err(Error::Parameter(format!("dimension must be 1 or 2, got {n}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("exponent s must lie in (0,1), got {s}")));
    }
    Ok(())
}

/// C(n,s) = 2^{2s} s Γ(n/2+s) / (π^{n/2} Γ(1−s)).
pub fn normalization_constant(n: usize, s: f64) -> Result<f64> {
    check_n_s(n, s)?;
    Ok(normalization_constant_unchecked(n, s))
}

fn normalization_constant_unchecked(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    4f64.powf(s) * s * gamma(nf / 2.0 + s) / (PI.powf(nf / 2.0) * gamma(1.0 - s))
}

/// d_s = 2^{2s−1} Γ(s) / Γ(1−s).
pub fn extension_constant(s: f64) -> Result<f64> {
    check_n_s(1, s)?;
    Ok(extension_constant_unchecked(s))
}

fn extension_constant_unchecked(s: f64) -> f64 {
    2f64.powf(2.0 * s - 1.0) * gamma(s) / gamma(1.0 - s)
}

pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        _ => PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0),
    }
}

/// U(t,z) = ((√(t²+z²)+t)/2)^s.
pub fn one_plane_solution(t: f64, z: f64, s: f64) -> f64 {
    let rho = t.hypot(z);
    let base = 0.5 * (rho + t);
    if base <= 0.0 {
        return 0.0;
    }
    // Cancellation for t < 0: (ρ+t)/2 = z²/(2(ρ−t)).
    let base = if t < 0.0 { 0.5 * z * z / (rho - t) } else { base };
    base.powf(s)
}

/// Polar form r^s cos^{2s}(θ/2), θ ∈ [−π, π]. On θ = ±π the Cartesian
/// value (zero) is returned.
pub fn one_plane_solution_polar(r: f64, theta: f64, s: f64) -> f64 {
    if theta.abs() >= PI {
        return 0.0;
    }
    r.powf(s) * (0.5 * theta).cos().powf(2.0 * s)
}

/// Uniform (t,z) sample grid used by [`la_residual`].
#[derive(Clone, Debug)]
pub struct PlaneGrid {
    pub t0: f64,
    pub z0: f64,
    pub h: f64,
    pub nt: usize,
    pub nz: usize,
}

impl PlaneGrid {
    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z0 + j as f64 * self.h
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nt * self.nz);
        for i in 0..self.nt {
            for j in 0..self.nz {
                out.push(f(self.t(i), self.z(j)));
            }
        }
        out
    }
}

/// Conservative finite-difference residual of div(|z|^a ∇u) at interior
/// nodes of `grid`; `field` is row-major with z fastest. Entries on the
/// grid outline are zero.
pub fn la_residual(field: &[f64], grid: &PlaneGrid, s: f64) -> Result<Vec<f64>> {
    check_n_s(1, s)?;
    if field.len() != grid.nt * grid.nz {
        return Err(Error::DimensionMismatch { expected: grid.nt * grid.nz, found: field.len() });
    }
    if grid.nt < 3 || grid.nz < 3 {
        return Err(Error::Precondition("residual grid needs at least 3x3 nodes".into()));
    }
    let zmin = grid.z0.min(grid.z(grid.nz - 1));
    let zmax = grid.z0.max(grid.z(grid.nz - 1));
    let dist = if zmin > 0.0 {
        zmin
    } else if zmax < 0.0 {
        -zmax
    } else {
        0.0
    };
    if dist < grid.h * (1.0 - 1e-12) {
        return Err(Error::Precondition(
            "grid must stay at least one spacing away from z = 0".into(),
        ));
    }
    let a = 1.0 - 2.0 * s;
    let h2 = grid.h * grid.h;
    let at = |i: usize, j: usize| field[i * grid.nz + j];
    let mut res = vec![0.0; field.len()];
    for i in 1..grid.nt - 1 {
        for j in 1..grid.nz - 1 {
            let wz = grid.z(j).abs().powf(a);
            let w_up = (0.5 * (grid.z(j) + grid.z(j + 1))).abs().powf(a);
            let w_dn = (0.5 * (grid.z(j) + grid.z(j - 1))).abs().powf(a);
            let u = at(i, j);
            let flux_t = wz * (at(i + 1, j) - 2.0 * u + at(i - 1, j));
            let flux_z = w_up * (at(i, j + 1) - u) - w_dn * (u - at(i, j - 1));
            res[i * grid.nz + j] = (flux_t + flux_z) / h2;
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization_constant_reference_values() {
        // 30-digit reference evaluation of the Gamma expression.
        let c = normalization_constant(1, 0.5).unwrap();
        assert!((c - std::f64::consts::FRAC_1_PI).abs() < 1e-14);
        let c = normalization_constant(2, 0.5).unwrap();
        assert!((c - 0.5 * std::f64::consts::FRAC_1_PI).abs() < 1e-14);
        let c = normalization_constant(1, 0.3).unwrap();
        assert!((c - 0.230_096_381_681_632_10).abs() < 1e-13);
        let c = normalization_constant(2, 0.7).unwrap();
        assert!((c - 0.178_600_382_438_444_73).abs() < 1e-13);
        assert!(normalization_constant(1, 1e-6).unwrap() < 1e-5);
        assert!(normalization_constant(3, 0.5).is_err());
        assert!(normalization_constant(1, 1.0).is_err());
    }

    #[test]
    fn extension_constant_reference_values() {
        assert!((extension_constant(0.5).unwrap() - 1.0).abs() < 1e-14);
        let d14 = extension_constant(0.25).unwrap();
        let d34 = extension_constant(0.75).unwrap();
        assert!((d14 - 2.092_099_240_106_203_3).abs() < 1e-13);
        assert!((d34 - 0.477_988_797_486_124_99).abs() < 1e-13);
        assert!((d14 * d34 - 1.0).abs() < 1e-13);
        assert!(extension_constant(-0.1).is_err());
    }

    #[test]
    fn lambda_tilde_identity_and_slope() {
        let p = FracParams::new(1, 0.5, 1.0).unwrap();
        let t = p.constants();
        assert!((p.lambda_tilde() * t.d_s - 2.0 * p.lambda_penalty()).abs() < 1e-15);
        assert!((t.slope_const - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-13);
        assert_eq!(t.omega_n, 2.0);
        assert_eq!(FracParams::new(2, 0.3, 1.0).unwrap().constants().omega_n, PI);
        assert!(FracParams::new(1, 0.5, 0.0).is_err());
    }

    #[test]
    fn one_plane_solution_special_values() {
        assert_eq!(one_plane_solution(1.0, 0.0, 0.3), 1.0);
        assert!((one_plane_solution(0.0, 2.0, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(one_plane_solution(-5.0, 0.0, 0.37), 0.0);
        for &t in &[0.1, 0.7, 3.0] {
            assert!((one_plane_solution(t, 0.0, 0.42) - t.powf(0.42)).abs() < 1e-15);
        }
    }

    #[test]
    fn la_residual_vanishes_on_constants_and_degenerate_profile() {
        let g = PlaneGrid { t0: -1.0, z0: 0.05, h: 0.05, nt: 41, nz: 20 };
        let ones = vec![1.0; g.nt * g.nz];
        assert!(la_residual(&ones, &g, 0.3).unwrap().iter().all(|r| *r == 0.0));
        // |z|^{1−a}/(1−a) has zero weighted flux divergence in the continuum;
        // the discrete residual is pure quadrature error.
        for s in [0.3, 0.5, 0.8] {
            let a = 1.0 - 2.0 * s;
            let field = g.sample(|_, z| z.abs().powf(1.0 - a) / (1.0 - a));
            let res = la_residual(&field, &g, s).unwrap();
            let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            assert!(worst < 0.2, "s={s}: {worst}");
        }
        let touching = PlaneGrid { t0: -1.0, z0: 0.0, h: 0.05, nt: 5, nz: 5 };
        assert!(matches!(
            la_residual(&[0.0; 25], &touching, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    fn one_plane_residual_sup(h: f64, s: f64) -> f64 {
        let nt = (2.0 / h).round() as usize + 1;
        let nz = (1.0 / h).round() as usize;
        let g = PlaneGrid { t0: -1.0, z0: h, h, nt, nz };
        let field = g.sample(|t, z| one_plane_solution(t, z, s));
        let res = la_residual(&field, &g, s).unwrap();
        let mut worst = 0.0f64;
        for i in 1..nt - 1 {
            for j in 1..nz - 1 {
                let (t, z) = (g.t(i), g.z(j));
                if t > 0.0 && t.hypot(z) >= 0.25 && z >= 0.25 {
                    worst = worst.max(res[i * nz + j].abs());
                }
            }
        }
        worst
    }

    #[test]
    fn one_plane_residual_converges_at_first_order_or_better() {
        for s in [0.3, 0.5, 0.7] {
            let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&h| one_plane_residual_sup(h, s)).collect();
            let r1 = (e[0] / e[1]).log2();
            let r2 = (e[1] / e[2]).log2();
            assert!(r1 >= 1.0 && r2 >= 1.0, "s={s}: {e:?}");
        }
    }

    proptest! {
        #[test]
        fn one_plane_is_s_homogeneous(t in -5.0..5.0f64, z in -5.0..5.0f64, lam in 0.01..50.0f64, s in 0.05..0.95f64) {
            let lhs = one_plane_solution(lam * t, lam * z, s);
            let rhs = lam.powf(s) * one_plane_solution(t, z, s);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300) + 1e-300);
        }

        #[test]
        fn polar_and_cartesian_agree(r in 0.001..10.0f64, theta in -3.1..3.1f64, s in 0.05..0.95f64) {
            let c = one_plane_solution(r * theta.cos(), r * theta.sin(), s);
            let p = one_plane_solution_polar(r, theta, s);
            prop_assert!((c - p).abs() <= 1e-12 * p.abs().max(1e-300));
        }

        #[test]
        fn one_plane_even_in_z(t in -5.0..5.0f64, z in 0.0..5.0f64, s in 0.05..0.95f64) {
            prop_assert_eq!(one_plane_solution(t, z, s), one_plane_solution(t, -z, s));
        }

        #[test]
        fn gamma_rearrangement_identity(s in 0.02..0.98f64) {
            let d = extension_constant(s).unwrap();
            let lhs = d * gamma(1.0 - s);
            let rhs = 2f64.powf(2.0 * s - 1.0) * gamma(s);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs);
        }

        #[test]
        fn normalization_positive_and_finite(n in 1usize..=2, s in 0.05..0.95f64) {
            let c = normalization_constant(n, s).unwrap();
            prop_assert!(c.is_finite() && c > 0.0);
            let c2 = normalization_constant(n, s + 1e-6).unwrap();
            prop_assert!((c2 - c).abs() < 1e-4);
        }
    }
}
