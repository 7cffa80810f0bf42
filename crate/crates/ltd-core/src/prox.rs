//! Closed-form proximal and projection operators used by the block updates:
//! group capped-L1 on mode-3 tubes, group capped-Lp on lateral slices, the
//! unit-tube projection, the non-negative projection, and the tensor
//! orthogonal Procrustes solution.
//!
//! Every prox here returns an exact global minimizer of its one-dimensional
//! objective. The capped penalties are non-convex, so each operator compares
//! the candidate stationary points of both branches (including zero) and ties
//! resolve to the smaller, sparser candidate.

use crate::error::{LtdError, Result};
use crate::tensor::{Matrix, Tensor3};
use crate::tsvd::fourier_polar;

/// Parameters of the capped-Lp penalty `ψ(x) = min(x^p / ν^p, 1)` and its
/// prox weight.
#[derive(Debug, Clone, Copy)]
pub struct CapLpParams {
    lambda_hat: f64,
    p: f64,
    nu: f64,
    literal_inner_weight: bool,
}

impl CapLpParams {
    /// Requires `lambda_hat >= 0`, `0 < p < 1`, `nu > 0`.
    pub fn new(lambda_hat: f64, p: f64, nu: f64) -> Result<Self> {
        if !(lambda_hat >= 0.0 && lambda_hat.is_finite()) {
            return Err(LtdError::InvalidInput(format!(
                "capped-Lp weight must be non-negative, got {lambda_hat}"
            )));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(LtdError::InvalidInput(format!(
                "capped-Lp exponent must lie in (0, 1), got {p}"
            )));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(LtdError::InvalidInput(format!(
                "capped-Lp cap location must be positive, got {nu}"
            )));
        }
        Ok(Self {
            lambda_hat,
            p,
            nu,
            literal_inner_weight: false,
        })
    }

    /// Use `lambda_hat` directly as the inner Lp prox weight instead of the
    /// consistent `lambda_hat / nu^p`. The two conventions coincide at
    /// `nu = 1`.
    pub fn with_literal_inner_weight(mut self) -> Self {
        self.literal_inner_weight = true;
        self
    }

    pub fn lambda_hat(&self) -> f64 {
        self.lambda_hat
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `λ ψ(u) + (u - z)² / 2`, the objective the prox minimizes.
    pub fn objective(&self, u: f64, z: f64) -> f64 {
        let psi = (u.powf(self.p) / self.nu.powf(self.p)).min(1.0);
        self.lambda_hat * psi + 0.5 * (u - z) * (u - z)
    }
}

// ---------------------------------------------------------------------------
// Capped L1
// ---------------------------------------------------------------------------

/// Exact scalar prox of `λ min(s, 1) + (s - e)² / 2` over `s >= 0`.
///
/// Candidates: the linear-branch minimizer `clamp(e - λ, 0, 1)` and the
/// flat-branch minimizer `max(1, e)`; ties pick the smaller.
fn capl1_scalar(e: f64, lambda: f64) -> f64 {
    let s_lin = (e - lambda).clamp(0.0, 1.0);
    let f_lin = lambda * s_lin + 0.5 * (s_lin - e) * (s_lin - e);
    let s_flat = e.max(1.0);
    let f_flat = lambda + 0.5 * (s_flat - e) * (s_flat - e);
    if f_lin <= f_flat {
        s_lin
    } else {
        s_flat
    }
}

/// Group capped-L1 prox applied tube-wise: each mode-3 tube keeps its
/// direction and its norm moves to the scalar prox. Tubes with norm at most
/// `lambda_hat` (in the shrinkage regime) become exactly zero.
pub fn prox_group_capl1(e_hat: &Tensor3, lambda_hat: f64) -> Tensor3 {
    let (n1, n2, _) = e_hat.dims();
    let mut out = e_hat.clone();
    for i in 0..n1 {
        for j in 0..n2 {
            let e = e_hat.tube_norm(i, j);
            if e == 0.0 {
                continue;
            }
            let s = capl1_scalar(e, lambda_hat);
            let scale = s / e;
            if scale != 1.0 {
                let mut buf = vec![0.0; e_hat.n3()];
                e_hat.copy_tube_into(i, j, &mut buf);
                buf.iter_mut().for_each(|v| *v *= scale);
                out.set_tube(i, j, &buf);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Capped Lp
// ---------------------------------------------------------------------------

/// Interior minimizer of `w u^p + (u - z)² / 2` over `u >= 0` for `0 < p < 1`.
///
/// Below the jump threshold `π₂ = π₁ + w p π₁^{p-1}` (with
/// `π₁ = (2 w (1 - p))^{1/(2-p)}`) the prox is 0; above it the stationary
/// point `π★ ∈ (π₁, z)` solves `g(π) = π + w p π^{p-1} - z = 0`, found by
/// bisection (`g` is strictly increasing there).
fn lp_prox(z: f64, w: f64, p: f64) -> f64 {
    if w == 0.0 {
        return z;
    }
    let pi1 = (2.0 * w * (1.0 - p)).powf(1.0 / (2.0 - p));
    let pi2 = pi1 + w * p * pi1.powf(p - 1.0);
    if z <= pi2 {
        // At z == pi2 both 0 and pi1 minimize; resolve to the sparser 0.
        return 0.0;
    }
    let g = |u: f64| u + w * p * u.powf(p - 1.0) - z;
    let (mut lo, mut hi) = (pi1, z);
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact scalar prox of `λ ψ(u) + (u - z)² / 2` over `u >= 0` with
/// `ψ(u) = min(u^p / ν^p, 1)`.
///
/// Compares the capped branch candidate `min(lp_prox(z), ν)`, the flat branch
/// candidate `max(z, ν)` and 0, and returns the best; ties resolve to the
/// smaller candidate.
pub fn prox_caplp_scalar(z: f64, params: &CapLpParams) -> f64 {
    debug_assert!(z >= 0.0);
    let w = if params.literal_inner_weight {
        params.lambda_hat
    } else {
        params.lambda_hat / params.nu.powf(params.p)
    };
    let u1 = lp_prox(z, w, params.p).min(params.nu);
    let u2 = z.max(params.nu);
    let mut best = 0.0;
    let mut best_f = params.objective(0.0, z);
    for u in [u1, u2] {
        let f = params.objective(u, z);
        if f < best_f || (f == best_f && u < best) {
            best = u;
            best_f = f;
        }
    }
    best
}

/// Group capped-Lp prox applied per lateral slice: slice `j` keeps its
/// direction while its Frobenius norm moves to [`prox_caplp_scalar`].
pub fn prox_group_caplp(z_hat: &Tensor3, params: &CapLpParams) -> Tensor3 {
    let (n1, n2, n3) = z_hat.dims();
    let mut out = z_hat.clone();
    for j in 0..n2 {
        let norm = z_hat.lateral_slice_norm(j);
        if norm == 0.0 {
            continue;
        }
        let scale = prox_caplp_scalar(norm, params) / norm;
        if scale != 1.0 {
            for k in 0..n3 {
                let slice = out.frontal_slice_mut(k);
                for i in 0..n1 {
                    slice[i * n2 + j] *= scale;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Normalize every mode-3 tube to unit Euclidean norm.
///
/// A zero tube has no nearest unit tube; that is an error here. The solver
/// guards against it by falling back to the previous iterate's tube.
pub fn project_unit_tubes(c_hat: &Tensor3) -> Result<Tensor3> {
    let (n1, n2, n3) = c_hat.dims();
    let mut out = c_hat.clone();
    let mut buf = vec![0.0; n3];
    for i in 0..n1 {
        for j in 0..n2 {
            let norm = c_hat.tube_norm(i, j);
            if norm == 0.0 {
                return Err(LtdError::DegenerateTube { i, j });
            }
            c_hat.copy_tube_into(i, j, &mut buf);
            buf.iter_mut().for_each(|v| *v /= norm);
            out.set_tube(i, j, &buf);
        }
    }
    Ok(out)
}

/// Entry-wise projection onto the non-negative orthant.
pub fn project_nonneg(b_hat: &Matrix) -> Matrix {
    b_hat.map(|v| v.max(0.0))
}

/// Tensor orthogonal Procrustes: the maximizer of `⟨d, g⟩` over
/// `dᵀ * d = identity`, namely `u * vᵀ` from the T-SVD of `g`.
///
/// Requires the lateral width of `g` not to exceed its first dimension. For
/// rank-deficient `g` the maximizer is not unique; the SVD-derived factor is
/// returned.
pub fn procrustes_orth(g: &Tensor3) -> Result<Tensor3> {
    let (n1, r, _) = g.dims();
    if r > n1 {
        return Err(LtdError::DimensionMismatch(format!(
            "orthogonal factor needs width <= height, got {:?}",
            g.dims()
        )));
    }
    fourier_polar(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::tprod;
    use crate::tensor::{conj_transpose, identity_tensor};

    fn random_tensor(n1: usize, n2: usize, n3: usize, seed: u64) -> Tensor3 {
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let vals = (0..n1 * n2 * n3)
            .map(|_| {
                state = state
                    .wrapping_mul(2862933555777941757)
                    .wrapping_add(3037000493);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Tensor3::from_values(n1, n2, n3, vals).unwrap()
    }

    #[test]
    fn capl1_zero_tensor_stays_zero() {
        let z = Tensor3::zeros(2, 3, 4);
        assert_eq!(prox_group_capl1(&z, 0.7).frobenius_norm(), 0.0);
    }

    #[test]
    fn capl1_small_tube_is_zeroed_exactly() {
        // A tube with norm lambda/2 falls inside the shrink-to-zero region.
        let mut t = Tensor3::zeros(1, 1, 2);
        t.set(0, 0, 0, 0.18);
        t.set(0, 0, 1, 0.24); // norm 0.3 = 0.6 / 2
        let out = prox_group_capl1(&t, 0.6);
        assert_eq!(out.frobenius_norm(), 0.0);
    }

    #[test]
    fn capl1_large_tube_unchanged() {
        let mut t = Tensor3::zeros(1, 1, 2);
        t.set(0, 0, 0, 3.0);
        t.set(0, 0, 1, 4.0); // norm 5 > 1 + lambda
        let out = prox_group_capl1(&t, 0.6);
        assert!(out.dist_sqr(&t) < 1e-24);
    }

    #[test]
    fn capl1_identity_when_weight_zero() {
        let t = random_tensor(3, 2, 4, 40);
        let out = prox_group_capl1(&t, 0.0);
        assert!(out.dist_sqr(&t).sqrt() < 1e-12);
    }

    #[test]
    fn caplp_scalar_trivials() {
        let params = CapLpParams::new(0.5, 0.5, 1.0).unwrap();
        assert_eq!(prox_caplp_scalar(0.0, &params), 0.0);
        // Deep flat region: identity.
        let z = 50.0;
        assert_eq!(prox_caplp_scalar(z, &params), z);
        // Zero weight: identity everywhere.
        let free = CapLpParams::new(0.0, 0.5, 1.0).unwrap();
        for z in [0.0, 0.3, 0.9, 2.0] {
            assert_eq!(prox_caplp_scalar(z, &free), z);
        }
    }

    #[test]
    fn caplp_params_validation() {
        assert!(CapLpParams::new(-1.0, 0.5, 1.0).is_err());
        assert!(CapLpParams::new(1.0, 0.0, 1.0).is_err());
        assert!(CapLpParams::new(1.0, 1.0, 1.0).is_err());
        assert!(CapLpParams::new(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn group_caplp_zero_and_flat() {
        let params = CapLpParams::new(0.5, 0.5, 1.0).unwrap();
        let z = Tensor3::zeros(2, 3, 2);
        assert_eq!(prox_group_caplp(&z, &params).frobenius_norm(), 0.0);

        // All slice norms far beyond the cap: unchanged.
        let big = random_tensor(3, 2, 2, 41).map(|v| v * 100.0);
        let out = prox_group_caplp(&big, &params);
        assert!(out.dist_sqr(&big).sqrt() < 1e-12);
    }

    #[test]
    fn group_caplp_slice_norms_match_scalar_prox() {
        let params = CapLpParams::new(0.4, 0.5, 1.0).unwrap();
        let z = random_tensor(4, 3, 2, 42);
        let out = prox_group_caplp(&z, &params);
        for j in 0..3 {
            let expected = prox_caplp_scalar(z.lateral_slice_norm(j), &params);
            assert!(
                (out.lateral_slice_norm(j) - expected).abs() < 1e-10,
                "slice {j}"
            );
        }
    }

    #[test]
    fn unit_tube_projection() {
        let mut t = Tensor3::zeros(1, 1, 2);
        t.set(0, 0, 0, 3.0);
        t.set(0, 0, 1, 4.0);
        let out = project_unit_tubes(&t).unwrap();
        assert!((out.get(0, 0, 0) - 0.6).abs() < 1e-15);
        assert!((out.get(0, 0, 1) - 0.8).abs() < 1e-15);

        let r = random_tensor(3, 4, 5, 43);
        let out = project_unit_tubes(&r).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert!((out.tube_norm(i, j) - 1.0).abs() < 1e-12);
            }
        }
        // Already unit: unchanged.
        let again = project_unit_tubes(&out).unwrap();
        assert!(again.dist_sqr(&out).sqrt() < 1e-12);
    }

    #[test]
    fn unit_tube_projection_rejects_zero_tube() {
        let t = Tensor3::zeros(2, 2, 3);
        assert!(matches!(
            project_unit_tubes(&t),
            Err(LtdError::DegenerateTube { .. })
        ));
    }

    #[test]
    fn nonneg_projection() {
        let m = Matrix::from_values(2, 2, vec![-1.0, 2.0, -0.5, 0.0]).unwrap();
        let out = project_nonneg(&m);
        assert_eq!(out.values(), &[0.0, 2.0, 0.0, 0.0]);
        let neg = Matrix::from_values(2, 2, vec![-1.0, -2.0, -0.5, -3.0]).unwrap();
        assert_eq!(project_nonneg(&neg).frobenius_norm(), 0.0);
        let pos = Matrix::from_values(2, 2, vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        assert_eq!(project_nonneg(&pos), pos);
    }

    #[test]
    fn procrustes_returns_orthogonal_factor() {
        let g = random_tensor(4, 2, 3, 44);
        let d = procrustes_orth(&g).unwrap();
        let gram = tprod(&conj_transpose(&d), &d).unwrap();
        let id = identity_tensor(2, 3);
        assert!(gram.dist_sqr(&id).sqrt() / id.frobenius_norm() < 1e-8);
    }

    #[test]
    fn procrustes_of_orthogonal_input_is_identity_map() {
        let d0 = procrustes_orth(&random_tensor(4, 3, 2, 45)).unwrap();
        let again = procrustes_orth(&d0).unwrap();
        assert!(again.dist_sqr(&d0).sqrt() < 1e-8);
    }

    #[test]
    fn procrustes_of_scaled_identity() {
        let g = identity_tensor(3, 2).map(|v| 2.5 * v);
        let d = procrustes_orth(&g).unwrap();
        assert!(d.dist_sqr(&identity_tensor(3, 2)).sqrt() < 1e-10);
    }

    #[test]
    fn procrustes_rejects_wide_input() {
        let g = random_tensor(2, 4, 3, 46);
        assert!(procrustes_orth(&g).is_err());
    }
}
