//! Proximal alternating minimization for the layered decomposition.
//!
//! The objective couples a spectral layer and a spatial layer:
//!
//! ```text
//! F = λ1/2 ‖B‖² + λ2 ‖E1‖ₜ + λ3/2 ‖H − C ×₃ B − E1‖²
//!   + λ4 Σⱼ ψ(‖Z(:,j,:)‖) + λ5 ‖E2‖ₜ + λ6/2 ‖C − D * Zᵀ − E2‖²
//! ```
//!
//! with `‖·‖ₜ` the sum of capped tube norms `min(‖tube‖, 1)`, `ψ` the
//! capped-Lp penalty, `B ≥ 0`, unit mode-3 tubes in `C`, and `Dᵀ * D`
//! the identity tensor. Each outer iteration updates the six blocks in the
//! order `C, B, E1, D, Z, E2`; every block subproblem (augmented with a
//! proximal term `ρᵢ/2 ‖· − previous‖²`) is solved exactly, which yields the
//! sufficient-decrease property
//! `F(W⁺) + min(ρᵢ/2) ‖W⁺ − W‖² ≤ F(W)`.
//!
//! [`solve_ltd`] runs fixed-size factors. [`solve_ltd_rr`] additionally
//! removes lateral slices of `Z` that the prox zeroed (parking the matching
//! slices of `D`) and re-admits parked slices that later become active again,
//! at most five per iteration.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{LtdError, Result};
use crate::fourier::tprod;
use crate::fusion::FusionMode;
use crate::prox::{
    procrustes_orth, project_nonneg, prox_group_capl1, prox_group_caplp, CapLpParams,
};
use crate::tensor::{
    conj_transpose, mode3_gram, mode3_product, mode3_unfold, spectral_norm, Matrix, Tensor3,
};

/// All weights and knobs of one solver run.
#[derive(Debug, Clone)]
pub struct LtdParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    pub lambda6: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub rho4: f64,
    pub rho5: f64,
    pub rho6: f64,
    /// Width of the spectral factor (columns of `B`, tubes of `C`).
    pub b: usize,
    /// Capped-Lp exponent.
    pub p: f64,
    /// Capped-Lp cap location.
    pub nu: f64,
    pub max_iter: usize,
    /// Stop when `‖W⁺ − W‖ / max(1, ‖W‖)` falls below this.
    pub rel_tol: f64,
    pub seed: u64,
    pub rank_reduction: bool,
    pub fusion_mode: FusionMode,
    pub normalize_input: bool,
}

impl Default for LtdParams {
    fn default() -> Self {
        Self {
            lambda1: 1e-2,
            lambda2: 5.0,
            lambda3: 1e-1,
            lambda4: 5e-1,
            lambda5: 1e-1,
            lambda6: 1e-2,
            rho1: 1e-2,
            rho2: 1e-2,
            rho3: 1e-2,
            rho4: 1e-2,
            rho5: 1e-2,
            rho6: 1e-2,
            b: 4,
            p: 0.5,
            nu: 1.0,
            max_iter: 100,
            rel_tol: 1e-3,
            seed: 0,
            rank_reduction: true,
            fusion_mode: FusionMode::Single,
            normalize_input: true,
        }
    }
}

impl LtdParams {
    /// Set all six proximal weights at once.
    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho1 = rho;
        self.rho2 = rho;
        self.rho3 = rho;
        self.rho4 = rho;
        self.rho5 = rho;
        self.rho6 = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda4,
            self.lambda5,
            self.lambda6,
        ];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(LtdError::InvalidInput(
                "regularization weights must be finite and non-negative".into(),
            ));
        }
        if self.rhos().iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(LtdError::InvalidInput(
                "proximal weights must be finite and positive".into(),
            ));
        }
        if self.b < 1 {
            return Err(LtdError::InvalidInput(
                "spectral factor width must be at least 1".into(),
            ));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(LtdError::InvalidInput(format!(
                "capped-Lp exponent must lie in (0, 1), got {}",
                self.p
            )));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(LtdError::InvalidInput(format!(
                "capped-Lp cap location must be positive, got {}",
                self.nu
            )));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(LtdError::InvalidInput(
                "stopping tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn rhos(&self) -> [f64; 6] {
        [
            self.rho1, self.rho2, self.rho3, self.rho4, self.rho5, self.rho6,
        ]
    }

    pub fn min_rho(&self) -> f64 {
        self.rhos().into_iter().fold(f64::INFINITY, f64::min)
    }

    fn caplp(&self) -> Result<CapLpParams> {
        CapLpParams::new(
            self.lambda4 / (self.lambda6 + self.rho5),
            self.p,
            self.nu,
        )
    }
}

/// One iterate of the six-block splitting.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Spectral coefficient tensor, `n1 x n2 x b`, unit mode-3 tubes.
    pub c: Tensor3,
    /// Non-negative spectral basis, `n3 x b`.
    pub basis: Matrix,
    /// Spectral anomaly residual, `n1 x n2 x n3`.
    pub e1: Tensor3,
    /// Orthogonal spatial dictionary, `n1 x r x b`.
    pub d: Tensor3,
    /// Spatial coefficients, `n2 x r x b`, group-sparse in lateral slices.
    pub z: Tensor3,
    /// Spatial anomaly residual, `n1 x n2 x b`.
    pub e2: Tensor3,
    /// Current lateral width of `d` and `z`.
    pub rank: usize,
    /// Lateral slices of `d` removed by rank reduction, kept for re-admission.
    pub parked_d: Tensor3,
    /// Completed outer iterations.
    pub iter: usize,
}

impl SolverState {
    /// Frobenius norm of the whole iterate.
    pub fn norm(&self) -> f64 {
        (self.c.frobenius_norm_sqr()
            + self.basis.frobenius_norm_sqr()
            + self.e1.frobenius_norm_sqr()
            + self.d.frobenius_norm_sqr()
            + self.z.frobenius_norm_sqr()
            + self.e2.frobenius_norm_sqr())
        .sqrt()
    }

    /// Frobenius distance to another iterate of identical shape.
    pub fn dist(&self, other: &SolverState) -> f64 {
        (self.c.dist_sqr(&other.c)
            + self.basis.dist_sqr(&other.basis)
            + self.e1.dist_sqr(&other.e1)
            + self.d.dist_sqr(&other.d)
            + self.z.dist_sqr(&other.z)
            + self.e2.dist_sqr(&other.e2))
        .sqrt()
    }
}

/// Objective, step norm, rank and per-iteration wall time of one iteration.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord {
    pub objective: f64,
    pub step_norm: f64,
    pub rank: usize,
    pub seconds: f64,
    /// True when lateral slices were removed or re-admitted this iteration;
    /// monotone-descent comparisons are only meaningful between iterations
    /// without such events.
    pub rank_event: bool,
}

pub type Trace = Vec<TraceRecord>;

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// Sum of capped tube norms `min(‖x(i,j,:)‖, 1)`.
pub fn capped_l1_norm(x: &Tensor3) -> f64 {
    let (n1, n2, _) = x.dims();
    let mut acc = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            acc += x.tube_norm(i, j).min(1.0);
        }
    }
    acc
}

/// Sum of capped lateral-slice penalties `min(‖z(:,j,:)‖^p / ν^p, 1)`.
pub fn capped_lp_norm(z: &Tensor3, p: f64, nu: f64) -> f64 {
    (0..z.n2())
        .map(|j| (z.lateral_slice_norm(j).powf(p) / nu.powf(p)).min(1.0))
        .sum()
}

/// Value of the unconstrained objective at `state` (the indicator terms are
/// zero whenever the state invariants hold).
pub fn objective(state: &SolverState, h: &Tensor3, params: &LtdParams) -> Result<f64> {
    let recon = mode3_product(&state.c, &state.basis)?;
    let r1 = h
        .lin_comb(1.0, &recon, -1.0)?
        .lin_comb(1.0, &state.e1, -1.0)?;
    let dzt = tprod(&state.d, &conj_transpose(&state.z))?;
    let r2 = state
        .c
        .lin_comb(1.0, &dzt, -1.0)?
        .lin_comb(1.0, &state.e2, -1.0)?;
    Ok(0.5 * params.lambda1 * state.basis.frobenius_norm_sqr()
        + params.lambda2 * capped_l1_norm(&state.e1)
        + 0.5 * params.lambda3 * r1.frobenius_norm_sqr()
        + params.lambda4 * capped_lp_norm(&state.z, params.p, params.nu)
        + params.lambda5 * capped_l1_norm(&state.e2)
        + 0.5 * params.lambda6 * r2.frobenius_norm_sqr())
}

// ---------------------------------------------------------------------------
// Block updates
// ---------------------------------------------------------------------------

/// Normalize every tube; a zero tube falls back to the previous iterate's
/// tube (which is unit by invariant) instead of aborting the run.
fn normalize_tubes_guarded(c_hat: &Tensor3, fallback: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = c_hat.dims();
    let mut out = c_hat.clone();
    let mut buf = vec![0.0; n3];
    let mut degenerate = 0usize;
    for i in 0..n1 {
        for j in 0..n2 {
            let norm = c_hat.tube_norm(i, j);
            if norm == 0.0 {
                fallback.copy_tube_into(i, j, &mut buf);
                degenerate += 1;
            } else {
                c_hat.copy_tube_into(i, j, &mut buf);
                buf.iter_mut().for_each(|v| *v /= norm);
            }
            out.set_tube(i, j, &buf);
        }
    }
    if degenerate > 0 {
        log::warn!("{degenerate} degenerate tubes kept their previous value");
    }
    out
}

/// Prox-linear step on `C` followed by the unit-tube projection.
pub fn update_c(state: &SolverState, h: &Tensor3, params: &LtdParams) -> Result<Tensor3> {
    let recon = mode3_product(&state.c, &state.basis)?;
    let r1 = recon
        .lin_comb(1.0, &state.e1, 1.0)?
        .lin_comb(1.0, h, -1.0)?;
    let g1 = mode3_product(&r1, &state.basis.transpose())?;
    let dzt = tprod(&state.d, &conj_transpose(&state.z))?;
    let r2 = state
        .c
        .lin_comb(1.0, &dzt, -1.0)?
        .lin_comb(1.0, &state.e2, -1.0)?;
    let grad = g1.lin_comb(params.lambda3, &r2, params.lambda6)?;
    let lip = params.lambda3 * spectral_norm(&state.basis).powi(2) + params.lambda6;
    let c_hat = state.c.lin_comb(1.0, &grad, -1.0 / (lip + params.rho1))?;
    Ok(normalize_tubes_guarded(&c_hat, &state.c))
}

/// Prox-linear step on `B` followed by the non-negative projection.
pub fn update_basis(state: &SolverState, h: &Tensor3, params: &LtdParams) -> Result<Matrix> {
    let recon = mode3_product(&state.c, &state.basis)?;
    let r1 = recon
        .lin_comb(1.0, &state.e1, 1.0)?
        .lin_comb(1.0, h, -1.0)?;
    let grad = state
        .basis
        .lin_comb(params.lambda1, &mode3_gram(&r1, &state.c)?, params.lambda3)?;
    let lip = params.lambda1 + params.lambda3 * spectral_norm(&mode3_unfold(&state.c)).powi(2);
    let b_hat = state
        .basis
        .lin_comb(1.0, &grad, -1.0 / (lip + params.rho2))?;
    Ok(project_nonneg(&b_hat))
}

/// Exact prox step on the spectral anomaly `E1`.
pub fn update_e1(state: &SolverState, h: &Tensor3, params: &LtdParams) -> Result<Tensor3> {
    let recon = mode3_product(&state.c, &state.basis)?;
    let denom = params.lambda3 + params.rho3;
    let e1_hat = h
        .lin_comb(1.0, &recon, -1.0)?
        .lin_comb(params.lambda3 / denom, &state.e1, params.rho3 / denom)?;
    Ok(prox_group_capl1(&e1_hat, params.lambda2 / denom))
}

/// Orthogonal Procrustes step on the dictionary `D`.
pub fn update_d(state: &SolverState, params: &LtdParams) -> Result<Tensor3> {
    let target = state.c.lin_comb(1.0, &state.e2, -1.0)?;
    let g = tprod(&target, &state.z)?.lin_comb(params.lambda6, &state.d, params.rho4)?;
    procrustes_orth(&g)
}

/// Exact group capped-Lp prox step on the coefficients `Z`.
pub fn update_z(state: &SolverState, params: &LtdParams) -> Result<Tensor3> {
    let target = state.c.lin_comb(1.0, &state.e2, -1.0)?;
    let denom = params.lambda6 + params.rho5;
    let z_hat = tprod(&conj_transpose(&target), &state.d)?
        .lin_comb(params.lambda6 / denom, &state.z, params.rho5 / denom)?;
    Ok(prox_group_caplp(&z_hat, &params.caplp()?))
}

/// Exact prox step on the spatial anomaly `E2`.
pub fn update_e2(state: &SolverState, params: &LtdParams) -> Result<Tensor3> {
    let dzt = tprod(&state.d, &conj_transpose(&state.z))?;
    let denom = params.lambda6 + params.rho6;
    let e2_hat = state
        .c
        .lin_comb(1.0, &dzt, -1.0)?
        .lin_comb(params.lambda6 / denom, &state.e2, params.rho6 / denom)?;
    Ok(prox_group_capl1(&e2_hat, params.lambda5 / denom))
}

/// One full outer iteration: update `C, B, E1, D, Z, E2` in order, each block
/// seeing the blocks already updated this iteration.
pub fn pam_step(state: &SolverState, h: &Tensor3, params: &LtdParams) -> Result<SolverState> {
    let mut next = state.clone();
    next.c = update_c(&next, h, params)?;
    next.basis = update_basis(&next, h, params)?;
    next.e1 = update_e1(&next, h, params)?;
    next.d = update_d(&next, params)?;
    next.z = update_z(&next, params)?;
    next.e2 = update_e2(&next, params)?;
    next.iter += 1;
    Ok(next)
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Deterministic seeded initialization.
///
/// `B⁰` collects `b` distinct pixel spectra of `H` (clamped non-negative plus
/// a small floor); each tube of `C⁰` is the normalized positive part of
/// `B⁰ᵀ h(i,j,:)`; the dictionary starts from the orthogonal polar factor of
/// a seeded random tensor at full width `r⁰ = min(n1, n2)`; `Z⁰ = C⁰ᵀ * D⁰`;
/// both anomaly blocks start at zero.
pub fn init_state(h: &Tensor3, params: &LtdParams) -> Result<SolverState> {
    params.validate()?;
    let (n1, n2, n3) = h.dims();
    if h.frobenius_norm_sqr() == 0.0 {
        return Err(LtdError::InvalidInput("input tensor is all zero".into()));
    }
    if params.b > n1 * n2 {
        return Err(LtdError::InvalidInput(format!(
            "cannot sample {} distinct pixel spectra from a {}x{} frame",
            params.b, n1, n2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut picks: Vec<usize> = Vec::with_capacity(params.b);
    while picks.len() < params.b {
        let cand = rng.random_range(0..n1 * n2);
        if !picks.contains(&cand) {
            picks.push(cand);
        }
    }
    let mut basis = Matrix::zeros(n3, params.b);
    let mut tube = vec![0.0; n3];
    for (l, &pix) in picks.iter().enumerate() {
        let (i, j) = (pix / n2, pix % n2);
        h.copy_tube_into(i, j, &mut tube);
        for k in 0..n3 {
            basis.set(k, l, tube[k].max(0.0) + 1e-6);
        }
    }

    let mut c = Tensor3::zeros(n1, n2, params.b);
    let mut coeff = vec![0.0; params.b];
    for i in 0..n1 {
        for j in 0..n2 {
            h.copy_tube_into(i, j, &mut tube);
            for (l, cl) in coeff.iter_mut().enumerate() {
                let dot: f64 = (0..n3).map(|k| basis.get(k, l) * tube[k]).sum();
                *cl = dot.max(1e-12);
            }
            let norm = coeff.iter().map(|v| v * v).sum::<f64>().sqrt();
            coeff.iter_mut().for_each(|v| *v /= norm);
            c.set_tube(i, j, &coeff);
        }
    }

    let r0 = n1.min(n2);
    let mut d_raw = Tensor3::zeros(n1, r0, params.b);
    d_raw
        .values_mut()
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-1.0..1.0));
    let d = procrustes_orth(&d_raw)?;
    let z = tprod(&conj_transpose(&c), &d)?;

    Ok(SolverState {
        c,
        basis,
        e1: Tensor3::zeros(n1, n2, n3),
        d,
        z,
        e2: Tensor3::zeros(n1, n2, params.b),
        rank: r0,
        parked_d: Tensor3::zeros(n1, 0, params.b),
        iter: 0,
    })
}

// ---------------------------------------------------------------------------
// Rank adjustment
// ---------------------------------------------------------------------------

/// Remove the lateral slices of `Z` with exactly zero norm, parking the
/// matching slices of `D`. Returns the number removed. If every slice is
/// zero, nothing is removed.
pub fn rank_reduce_step(state: &mut SolverState) -> usize {
    let width = state.z.n2();
    let zero: Vec<usize> = (0..width)
        .filter(|&j| state.z.lateral_slice_norm(j) == 0.0)
        .collect();
    if zero.is_empty() || zero.len() == width {
        return 0;
    }
    let keep: Vec<usize> = (0..width).filter(|j| !zero.contains(j)).collect();
    let newly_parked = state.d.select_lateral(&zero);
    state.parked_d = state
        .parked_d
        .concat_lateral(&newly_parked)
        .expect("parked slices share dimensions");
    state.d = state.d.select_lateral(&keep);
    state.z = state.z.select_lateral(&keep);
    state.rank = keep.len();
    zero.len()
}

/// Re-admit parked dictionary slices whose coefficients would be nonzero
/// under the current iterate: compute the capped-Lp prox of
/// `λ6 (C − E2)ᵀ * D_parked / (λ6 + ρ5)` and restore the (at most five)
/// slices of largest norm, ties to the lower index. Returns the number
/// restored.
pub fn validate_restore_step(state: &mut SolverState, params: &LtdParams) -> Result<usize> {
    let parked = state.parked_d.clone();
    if parked.n2() == 0 {
        return Ok(0);
    }
    let target = state.c.lin_comb(1.0, &state.e2, -1.0)?;
    let scale = params.lambda6 / (params.lambda6 + params.rho5);
    let z_sub_hat = tprod(&conj_transpose(&target), &parked)?.map(|v| v * scale);
    let z_sub = prox_group_caplp(&z_sub_hat, &params.caplp()?);

    let mut candidates: Vec<(usize, f64)> = (0..z_sub.n2())
        .map(|j| (j, z_sub.lateral_slice_norm(j)))
        .filter(|&(_, n)| n > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut selected: Vec<usize> = candidates.iter().take(5).map(|&(j, _)| j).collect();
    if selected.is_empty() {
        return Ok(0);
    }
    selected.sort_unstable();

    state.z = state.z.concat_lateral(&z_sub.select_lateral(&selected))?;
    state.d = state.d.concat_lateral(&parked.select_lateral(&selected))?;
    let remaining: Vec<usize> = (0..parked.n2())
        .filter(|j| !selected.contains(j))
        .collect();
    state.parked_d = parked.select_lateral(&remaining);
    state.rank += selected.len();
    Ok(selected.len())
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

fn run(
    h: &Tensor3,
    params: &LtdParams,
    adjust_rank: bool,
) -> Result<(SolverState, Trace)> {
    let mut state = init_state(h, params)?;
    let mut trace: Trace = Vec::with_capacity(params.max_iter);
    for _ in 0..params.max_iter {
        let started = Instant::now();
        let prev_norm = state.norm();
        let mut next = pam_step(&state, h, params)?;
        let step_norm = state.dist(&next);

        let mut rank_event = false;
        if adjust_rank {
            if next.iter >= 2 && next.parked_d.n2() > 0 {
                rank_event |= validate_restore_step(&mut next, params)? > 0;
            }
            rank_event |= rank_reduce_step(&mut next) > 0;
        }

        let f = objective(&next, h, params)?;
        if !f.is_finite() {
            return Err(LtdError::NumericFailure(
                "objective became non-finite".into(),
            ));
        }
        trace.push(TraceRecord {
            objective: f,
            step_norm,
            rank: next.rank,
            seconds: started.elapsed().as_secs_f64(),
            rank_event,
        });
        state = next;
        if step_norm / prev_norm.max(1.0) < params.rel_tol {
            break;
        }
    }
    Ok((state, trace))
}

/// Fixed-width solver: iterates [`pam_step`] until the relative step norm
/// falls below `rel_tol` or `max_iter` is reached.
pub fn solve_ltd(h: &Tensor3, params: &LtdParams) -> Result<(SolverState, Trace)> {
    run(h, params, false)
}

/// Rank-adaptive solver: after each [`pam_step`], re-admits parked slices
/// that have become active (from the third iteration on) and removes slices
/// of `Z` zeroed by the prox.
pub fn solve_ltd_rr(h: &Tensor3, params: &LtdParams) -> Result<(SolverState, Trace)> {
    run(h, params, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{group_support, identity_tensor};

    fn random_tensor(n1: usize, n2: usize, n3: usize, seed: u64) -> Tensor3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..n1 * n2 * n3)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Tensor3::from_values(n1, n2, n3, vals).unwrap()
    }

    fn small_params() -> LtdParams {
        LtdParams {
            b: 2,
            max_iter: 20,
            rel_tol: 0.0,
            ..LtdParams::default()
        }
    }

    #[test]
    fn init_is_deterministic_and_feasible() {
        let h = random_tensor(5, 4, 6, 9).map(|v| v + 2.0);
        let params = small_params();
        let s1 = init_state(&h, &params).unwrap();
        let s2 = init_state(&h, &params).unwrap();
        assert_eq!(s1.c, s2.c);
        assert_eq!(s1.basis, s2.basis);
        assert_eq!(s1.d, s2.d);
        assert_eq!(s1.z, s2.z);

        assert_eq!(s1.rank, 4); // min(n1, n2)
        for i in 0..5 {
            for j in 0..4 {
                assert!((s1.c.tube_norm(i, j) - 1.0).abs() < 1e-10);
            }
        }
        assert!(s1.basis.values().iter().all(|&v| v >= 0.0));
        let gram = tprod(&conj_transpose(&s1.d), &s1.d).unwrap();
        let id = identity_tensor(4, 2);
        assert!(gram.dist_sqr(&id).sqrt() <= 1e-8 * id.frobenius_norm().max(1.0));
        assert_eq!(s1.e1.frobenius_norm(), 0.0);
        assert_eq!(s1.e2.frobenius_norm(), 0.0);
        assert_eq!(s1.parked_d.n2(), 0);
    }

    #[test]
    fn init_rejects_zero_input() {
        let h = Tensor3::zeros(3, 3, 3);
        assert!(init_state(&h, &small_params()).is_err());
    }

    #[test]
    fn zero_weights_make_every_feasible_state_a_fixed_point() {
        let h = random_tensor(4, 3, 5, 10).map(|v| v + 1.5);
        let params = LtdParams {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            lambda5: 0.0,
            lambda6: 0.0,
            ..small_params()
        };
        let state = init_state(&h, &params).unwrap();
        let next = pam_step(&state, &h, &params).unwrap();
        assert!(state.dist(&next) < 1e-9, "step {}", state.dist(&next));
    }

    #[test]
    fn max_iter_zero_returns_init_state() {
        let h = random_tensor(4, 3, 5, 11).map(|v| v + 1.5);
        let params = LtdParams {
            max_iter: 0,
            ..small_params()
        };
        let (state, trace) = solve_ltd(&h, &params).unwrap();
        let init = init_state(&h, &params).unwrap();
        assert!(trace.is_empty());
        assert_eq!(state.iter, 0);
        assert!(state.dist(&init) == 0.0);
    }

    #[test]
    fn pam_preserves_constraints() {
        let h = random_tensor(5, 5, 6, 12).map(|v| v + 1.0);
        let params = small_params();
        let mut state = init_state(&h, &params).unwrap();
        for _ in 0..3 {
            state = pam_step(&state, &h, &params).unwrap();
        }
        for i in 0..5 {
            for j in 0..5 {
                assert!((state.c.tube_norm(i, j) - 1.0).abs() < 1e-10);
            }
        }
        assert!(state.basis.values().iter().all(|&v| v >= 0.0));
        let gram = tprod(&conj_transpose(&state.d), &state.d).unwrap();
        let id = identity_tensor(state.rank, 2);
        assert!(gram.dist_sqr(&id).sqrt() <= 1e-8 * id.frobenius_norm());
    }

    #[test]
    fn rank_reduce_parks_zero_slices() {
        let h = random_tensor(4, 4, 5, 13).map(|v| v + 1.2);
        let params = small_params();
        let mut state = init_state(&h, &params).unwrap();

        // No zero slices: nothing happens.
        assert_eq!(rank_reduce_step(&mut state), 0);
        assert_eq!(state.rank, 4);

        // Zero out slice 2 of z.
        let width = state.z.n2();
        for k in 0..state.z.n3() {
            let n1 = state.z.n1();
            let slice = state.z.frontal_slice_mut(k);
            for i in 0..n1 {
                slice[i * width + 2] = 0.0;
            }
        }
        assert_eq!(rank_reduce_step(&mut state), 1);
        assert_eq!(state.rank, 3);
        assert_eq!(state.parked_d.n2(), 1);
        assert_eq!(state.d.n2(), 3);
        assert_eq!(state.z.n2(), 3);

        // All-zero z: guarded, nothing removed.
        state.z = Tensor3::zeros(4, 3, 2);
        assert_eq!(rank_reduce_step(&mut state), 0);
        assert_eq!(state.rank, 3);
    }

    #[test]
    fn validate_restore_caps_at_five_largest() {
        let h = random_tensor(8, 8, 5, 14).map(|v| v + 1.2);
        let params = LtdParams {
            lambda4: 1e-6, // prox keeps every candidate nonzero
            ..small_params()
        };
        let mut state = init_state(&h, &params).unwrap();

        // Manually shrink to rank 1 and park 7 slices.
        let parked: Vec<usize> = (1..8).collect();
        state.parked_d = state.d.select_lateral(&parked);
        state.d = state.d.select_lateral(&[0]);
        state.z = state.z.select_lateral(&[0]);
        state.rank = 1;

        let restored = validate_restore_step(&mut state, &params).unwrap();
        assert_eq!(restored, 5);
        assert_eq!(state.rank, 6);
        assert_eq!(state.parked_d.n2(), 2);

        // The restored coefficients are the five largest candidate norms.
        let target = state.c.lin_comb(1.0, &state.e2, -1.0).unwrap();
        let scale = params.lambda6 / (params.lambda6 + params.rho5);
        let full = tprod(&conj_transpose(&target), &state.parked_d)
            .unwrap()
            .map(|v| v * scale);
        let leftover_max = (0..full.n2())
            .map(|j| prox_caplp_norm(&full, j, &params))
            .fold(0.0f64, f64::max);
        let restored_min = (1..6)
            .map(|j| state.z.lateral_slice_norm(j))
            .fold(f64::INFINITY, f64::min);
        assert!(restored_min >= leftover_max - 1e-12);
    }

    fn prox_caplp_norm(z_hat: &Tensor3, j: usize, params: &LtdParams) -> f64 {
        let cap = CapLpParams::new(
            params.lambda4 / (params.lambda6 + params.rho5),
            params.p,
            params.nu,
        )
        .unwrap();
        crate::prox::prox_caplp_scalar(z_hat.lateral_slice_norm(j), &cap)
    }

    #[test]
    fn validate_restore_with_zero_prox_restores_nothing() {
        let h = random_tensor(4, 4, 5, 15).map(|v| v + 1.2);
        let params = LtdParams {
            lambda4: 1e9, // prox zeroes everything
            ..small_params()
        };
        let mut state = init_state(&h, &params).unwrap();
        state.parked_d = state.d.select_lateral(&[3]);
        state.d = state.d.select_lateral(&[0, 1, 2]);
        state.z = state.z.select_lateral(&[0, 1, 2]);
        state.rank = 3;
        assert_eq!(validate_restore_step(&mut state, &params).unwrap(), 0);
        assert_eq!(state.rank, 3);
        assert_eq!(state.parked_d.n2(), 1);
    }

    #[test]
    fn zero_group_weight_keeps_full_rank() {
        let h = random_tensor(6, 5, 4, 16).map(|v| v + 1.2);
        let params = LtdParams {
            lambda4: 0.0,
            max_iter: 6,
            ..small_params()
        };
        let (state, trace) = solve_ltd_rr(&h, &params).unwrap();
        assert_eq!(state.rank, 5);
        assert!(trace.iter().all(|r| r.rank == 5 && !r.rank_event));
        assert_eq!(group_support(&state.z, 0.0).len(), 5);
    }

    #[test]
    fn objective_matches_naive_term_sum() {
        let h = random_tensor(4, 3, 5, 17).map(|v| v + 1.0);
        let params = small_params();
        let mut state = init_state(&h, &params).unwrap();
        state = pam_step(&state, &h, &params).unwrap();

        // Independent naive evaluation.
        let recon = mode3_product(&state.c, &state.basis).unwrap();
        let mut t3 = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                for k in 0..5 {
                    let r = h.get(i, j, k) - recon.get(i, j, k) - state.e1.get(i, j, k);
                    t3 += r * r;
                }
            }
        }
        let dzt = tprod(&state.d, &conj_transpose(&state.z)).unwrap();
        let mut t6 = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                for k in 0..2 {
                    let r = state.c.get(i, j, k) - dzt.get(i, j, k) - state.e2.get(i, j, k);
                    t6 += r * r;
                }
            }
        }
        let mut t2 = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                t2 += state.e1.tube_norm(i, j).min(1.0);
            }
        }
        let mut t5 = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                t5 += state.e2.tube_norm(i, j).min(1.0);
            }
        }
        let mut t4 = 0.0;
        for j in 0..state.z.n2() {
            t4 += (state.z.lateral_slice_norm(j).powf(0.5)).min(1.0);
        }
        let naive = 0.5 * params.lambda1 * state.basis.frobenius_norm_sqr()
            + params.lambda2 * t2
            + 0.5 * params.lambda3 * t3
            + params.lambda4 * t4
            + params.lambda5 * t5
            + 0.5 * params.lambda6 * t6;
        let fast = objective(&state, &h, &params).unwrap();
        assert!(
            (naive - fast).abs() <= 1e-10 * naive.abs().max(1.0),
            "naive {naive} vs {fast}"
        );
    }
}
