//! Tensor singular value decomposition under the t-product.
//!
//! `tsvd` factors `x = u * s * vᵀ` with `u`, `v` orthogonal under the
//! t-product and `s` f-diagonal (every frontal slice diagonal). All work is a
//! complex matrix SVD per Fourier slice; conjugate symmetry of real input
//! halves the number of slices computed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LtdError, Result};
use crate::fourier::{dft3, idft3, mirror_conjugate, FTensor3};
use crate::tensor::Tensor3;

/// Factors of a t-product SVD. Economy factors have lateral width
/// `q = min(n1, n2)`; full factors are square with `s` of shape `n1 x n2`.
#[derive(Debug, Clone)]
pub struct TSvdFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub economy: bool,
}

struct SliceSvd {
    u: DMatrix<Complex64>,
    sigma: Vec<f64>,
    v: DMatrix<Complex64>,
}

/// One-sided Jacobi SVD of a tall complex matrix (`nrows >= ncols`).
///
/// Repeatedly applies two-column unitary rotations until all column pairs of
/// the working matrix are orthogonal; the column norms are then the singular
/// values and the accumulated rotations form `v`. Jacobi attains high
/// relative accuracy on rank-deficient input, where bidiagonalization-based
/// routines can silently misalign factor pairs.
fn jacobi_svd_tall(a: &DMatrix<Complex64>, want_uv: bool) -> Result<SliceSvd> {
    let m = a.nrows();
    let n = a.ncols();
    debug_assert!(m >= n);
    let mut w = a.clone();
    let mut v = if want_uv {
        DMatrix::<Complex64>::identity(n, n)
    } else {
        DMatrix::<Complex64>::zeros(0, 0)
    };

    let tol = 1e-15;
    let max_sweeps = 64;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let mut app = 0.0f64;
                let mut aqq = 0.0f64;
                let mut apq = Complex64::ZERO;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    app += wp.norm_sqr();
                    aqq += wq.norm_sqr();
                    apq += wp.conj() * wq;
                }
                let mag = apq.norm();
                if mag <= tol * (app * aqq).sqrt() || mag == 0.0 {
                    continue;
                }
                rotated = true;
                // Phase that makes the 2x2 Gram real, then a real Jacobi
                // rotation that diagonalizes it.
                let phase = apq / mag; // e^{i phi}
                let tau = (aqq - app) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let phase_conj = phase.conj();
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = phase_conj * w[(i, q)];
                    w[(i, p)] = cs * wp - sn * wq;
                    w[(i, q)] = sn * wp + cs * wq;
                }
                if want_uv {
                    for i in 0..n {
                        let vp = v[(i, p)];
                        let vq = phase_conj * v[(i, q)];
                        v[(i, p)] = cs * vp - sn * vq;
                        v[(i, q)] = sn * vp + cs * vq;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        // Jacobi converges in practice well before the sweep cap; reaching it
        // with substantial coupling left is a numerical failure.
        let mut worst = 0.0f64;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = Complex64::ZERO;
                for i in 0..m {
                    app += w[(i, p)].norm_sqr();
                    aqq += w[(i, q)].norm_sqr();
                    apq += w[(i, p)].conj() * w[(i, q)];
                }
                if app > 0.0 && aqq > 0.0 {
                    worst = worst.max(apq.norm() / (app * aqq).sqrt());
                }
            }
        }
        if worst > 1e-10 {
            return Err(LtdError::NumericFailure(
                "Jacobi SVD did not converge".into(),
            ));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|c| w.column(c).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).expect("finite").then(x.cmp(&y)));
    let sigma: Vec<f64> = order.iter().map(|&c| norms[c]).collect();

    if !want_uv {
        return Ok(SliceSvd {
            u: DMatrix::zeros(0, 0),
            sigma,
            v: DMatrix::zeros(0, 0),
        });
    }

    let mut u = DMatrix::<Complex64>::zeros(m, n);
    let mut null_cols = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        if sigma[dst] > 0.0 {
            let col = w.column(src) / Complex64::new(sigma[dst], 0.0);
            u.set_column(dst, &col);
        } else {
            null_cols.push(dst);
        }
    }
    if !null_cols.is_empty() {
        // Zero singular values leave their left vectors unconstrained; fill
        // with an orthonormal completion of the nonzero columns.
        let filled = complete_unitary(&u.columns(0, n - null_cols.len()).into_owned());
        for (offset, &dst) in null_cols.iter().enumerate() {
            u.set_column(dst, &filled.column(n - null_cols.len() + offset));
        }
    }
    let mut v_sorted = DMatrix::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.set_column(dst, &v.column(src));
    }
    Ok(SliceSvd {
        u,
        sigma,
        v: v_sorted,
    })
}

/// Thin SVD of one Fourier slice; singular values sorted descending.
fn slice_svd(slice: &[Complex64], n1: usize, n2: usize) -> Result<SliceSvd> {
    let a = DMatrix::from_row_slice(n1, n2, slice);
    if n1 >= n2 {
        jacobi_svd_tall(&a, true)
    } else {
        // SVD of the adjoint swaps the roles of u and v.
        let SliceSvd { u, sigma, v } = jacobi_svd_tall(&a.adjoint(), true)?;
        Ok(SliceSvd {
            u: v,
            sigma,
            v: u,
        })
    }
}

/// Singular values only (sorted descending) of one Fourier slice.
fn slice_singular_values(slice: &[Complex64], n1: usize, n2: usize) -> Result<Vec<f64>> {
    let a = DMatrix::from_row_slice(n1, n2, slice);
    let res = if n1 >= n2 {
        jacobi_svd_tall(&a, false)?
    } else {
        jacobi_svd_tall(&a.adjoint(), false)?
    };
    Ok(res.sigma)
}

/// Extend a matrix with orthonormal columns to a square unitary matrix.
///
/// Greedy Gram-Schmidt over standard basis vectors, re-orthogonalized once;
/// deterministic.
fn complete_unitary(thin: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = thin.nrows();
    let q = thin.ncols();
    let mut cols: Vec<DVector<Complex64>> = (0..q).map(|c| thin.column(c).into_owned()).collect();
    while cols.len() < n {
        let mut best: Option<(f64, DVector<Complex64>)> = None;
        for i in 0..n {
            let mut v = DVector::<Complex64>::zeros(n);
            v[i] = Complex64::ONE;
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dotc(&v);
                    v -= c * proj;
                }
            }
            let nv = v.norm();
            if best.as_ref().is_none_or(|(bn, _)| nv > *bn) {
                best = Some((nv, v));
            }
        }
        let (nv, v) = best.expect("n > 0");
        cols.push(v / Complex64::new(nv, 0.0));
    }
    DMatrix::from_columns(&cols)
}

fn write_slice(dst: &mut FTensor3, k: usize, m: &DMatrix<Complex64>) {
    let (rows, cols) = (m.nrows(), m.ncols());
    let s = dst.frontal_slice_mut(k);
    for i in 0..rows {
        for j in 0..cols {
            s[i * cols + j] = m[(i, j)];
        }
    }
}

/// T-SVD of `x`. With `economy` the factors are truncated to width
/// `q = min(n1, n2)`; otherwise `u` and `v` are completed to square
/// orthogonal tensors.
pub fn tsvd(x: &Tensor3, economy: bool) -> Result<TSvdFactors> {
    let (n1, n2, n3) = x.dims();
    let q = n1.min(n2);
    let xf = dft3(x);
    let half = n3 / 2;

    let per_slice: Vec<Result<SliceSvd>> = (0..=half)
        .into_par_iter()
        .map(|k| slice_svd(xf.frontal_slice(k), n1, n2))
        .collect();

    let (u_cols, v_cols, s_rows, s_cols) = if economy {
        (q, q, q, q)
    } else {
        (n1, n2, n1, n2)
    };
    let mut uf = FTensor3::zeros(n1, u_cols, n3);
    let mut sf = FTensor3::zeros(s_rows, s_cols, n3);
    let mut vf = FTensor3::zeros(n2, v_cols, n3);

    for (k, res) in per_slice.into_iter().enumerate() {
        let SliceSvd { u, sigma, v } = res?;
        let (u, v) = if economy {
            (u, v)
        } else {
            (complete_unitary(&u), complete_unitary(&v))
        };
        write_slice(&mut uf, k, &u);
        write_slice(&mut vf, k, &v);
        let s = sf.frontal_slice_mut(k);
        for (i, &sv) in sigma.iter().enumerate() {
            s[i * s_cols + i] = Complex64::new(sv, 0.0);
        }
    }
    mirror_conjugate(&mut uf);
    mirror_conjugate(&mut sf);
    mirror_conjugate(&mut vf);

    Ok(TSvdFactors {
        u: idft3(&uf),
        s: idft3(&sf),
        v: idft3(&vf),
        economy,
    })
}

/// Tensor tubal rank: the number of singular tubes of `x` with norm above
/// `tol`. The default tolerance is `1e-8` times the largest singular value.
pub fn tubal_rank(x: &Tensor3, tol: Option<f64>) -> Result<usize> {
    let (n1, n2, n3) = x.dims();
    let q = n1.min(n2);
    if q == 0 || n3 == 0 {
        return Ok(0);
    }
    let xf = dft3(x);
    let half = n3 / 2;
    let per_slice: Vec<Result<Vec<f64>>> = (0..=half)
        .into_par_iter()
        .map(|k| slice_singular_values(xf.frontal_slice(k), n1, n2))
        .collect();

    let mut acc = vec![0.0f64; q];
    let mut sigma_max = 0.0f64;
    for (k, res) in per_slice.into_iter().enumerate() {
        let sigma = res?;
        // Mirrored slices have identical singular values.
        let weight = if k == 0 || (n3 % 2 == 0 && k == half) {
            1.0
        } else {
            2.0
        };
        for (i, &sv) in sigma.iter().enumerate() {
            acc[i] += weight * sv * sv;
            sigma_max = sigma_max.max(sv);
        }
    }
    let tol = tol.unwrap_or(1e-8 * sigma_max);
    let count = acc
        .iter()
        .filter(|&&a| (a / n3 as f64).sqrt() > tol)
        .count();
    Ok(count)
}

/// Best tubal-rank-`r` approximation: per Fourier slice, keep the `r` leading
/// singular triplets and reconstruct.
pub fn low_tubal_rank_approx(x: &Tensor3, r: usize) -> Result<Tensor3> {
    let (n1, n2, n3) = x.dims();
    let q = n1.min(n2);
    if r >= q {
        return Ok(x.clone());
    }
    let xf = dft3(x);
    let half = n3 / 2;
    let per_slice: Vec<Result<DMatrix<Complex64>>> = (0..=half)
        .into_par_iter()
        .map(|k| {
            let SliceSvd { u, sigma, v } = slice_svd(xf.frontal_slice(k), n1, n2)?;
            let ur = u.columns(0, r).into_owned();
            let vr = v.columns(0, r).into_owned();
            let mut scaled = ur;
            for c in 0..r {
                let s = Complex64::new(sigma[c], 0.0);
                for i in 0..n1 {
                    scaled[(i, c)] *= s;
                }
            }
            Ok(scaled * vr.adjoint())
        })
        .collect();

    let mut outf = FTensor3::zeros(n1, n2, n3);
    for (k, res) in per_slice.into_iter().enumerate() {
        write_slice(&mut outf, k, &res?);
    }
    mirror_conjugate(&mut outf);
    Ok(idft3(&outf))
}

/// Modified Gram-Schmidt orthonormalization of the columns of `y`, two
/// passes. Columns that vanish are replaced from the standard basis.
fn mgs_orthonormalize(y: &mut DMatrix<Complex64>) {
    let (m, n) = (y.nrows(), y.ncols());
    for c in 0..n {
        for _ in 0..2 {
            for prev in 0..c {
                let proj = y.column(prev).dotc(&y.column(c));
                let prev_col = y.column(prev).into_owned();
                let mut col = y.column_mut(c);
                col.axpy(-proj, &prev_col, Complex64::ONE);
            }
        }
        let norm = y.column(c).norm();
        if norm > 1e-300 {
            let mut col = y.column_mut(c);
            col.unscale_mut(norm);
        } else {
            // Degenerate direction; restart from a basis vector.
            let mut col = y.column_mut(c);
            for i in 0..m {
                col[i] = if i == c % m { Complex64::ONE } else { Complex64::ZERO };
            }
        }
    }
}

/// Project a tensor close to the set of unit-tube tensors of tubal rank `r`
/// by alternating the tube normalization with a warm-started per-slice
/// subspace projection. Returns the refined tensor (exactly unit tubes) and
/// the final tube-norm deviation of its rank-`r` truncation.
///
/// The subspace iteration reuses the previous iterate's left subspace per
/// Fourier slice and refreshes it with an exact SVD every 128 iterations, so
/// each alternation costs `O(n1 n2 r)` per slice instead of a full SVD.
pub fn unit_tube_low_rank_refine(
    start: &Tensor3,
    r: usize,
    max_iter: usize,
) -> Result<(Tensor3, f64)> {
    let (n1, n2, n3) = start.dims();
    let q = n1.min(n2);
    let unit_normalize = |t: &Tensor3| -> Tensor3 {
        let mut out = t.clone();
        let mut buf = vec![0.0; n3];
        for i in 0..n1 {
            for j in 0..n2 {
                let norm = t.tube_norm(i, j);
                if norm > 1e-12 {
                    t.copy_tube_into(i, j, &mut buf);
                    buf.iter_mut().for_each(|v| *v /= norm);
                } else {
                    buf.iter_mut().for_each(|v| *v = 0.0);
                    buf[0] = 1.0;
                }
                out.set_tube(i, j, &buf);
            }
        }
        out
    };
    if r >= q {
        return Ok((unit_normalize(start), 0.0));
    }

    let half = n3 / 2;
    let mut subspaces: Vec<Option<DMatrix<Complex64>>> = vec![None; half + 1];
    let mut current = start.clone();
    let mut deviation = f64::INFINITY;
    for it in 0..max_iter {
        let normalized = unit_normalize(&current);
        let nf = dft3(&normalized);
        let mut outf = FTensor3::zeros(n1, n2, n3);
        let refresh = it % 128 == 0;
        for k in 0..=half {
            let a = DMatrix::from_row_slice(n1, n2, nf.frontal_slice(k));
            let qk = if refresh || subspaces[k].is_none() {
                let SliceSvd { u, .. } = slice_svd(nf.frontal_slice(k), n1, n2)?;
                u.columns(0, r).into_owned()
            } else {
                let prev = subspaces[k].take().expect("warm subspace");
                let mut y = &a * (a.adjoint() * prev);
                mgs_orthonormalize(&mut y);
                y
            };
            let approx = &qk * (qk.adjoint() * &a);
            subspaces[k] = Some(qk);
            write_slice(&mut outf, k, &approx);
        }
        mirror_conjugate(&mut outf);
        current = idft3(&outf);

        deviation = 0.0;
        for i in 0..n1 {
            for j in 0..n2 {
                deviation = deviation.max((current.tube_norm(i, j) - 1.0).abs());
            }
        }
        if deviation < 1e-12 && it >= 4 {
            break;
        }
    }
    Ok((unit_normalize(&current), deviation))
}

/// Orthogonal polar factor `u * vᵀ` of the T-SVD, computed slice-wise.
pub(crate) fn fourier_polar(g: &Tensor3) -> Result<Tensor3> {
    let (n1, n2, n3) = g.dims();
    let gf = dft3(g);
    let half = n3 / 2;
    let per_slice: Vec<Result<DMatrix<Complex64>>> = (0..=half)
        .into_par_iter()
        .map(|k| {
            let SliceSvd { u, v, .. } = slice_svd(gf.frontal_slice(k), n1, n2)?;
            Ok(u * v.adjoint())
        })
        .collect();
    let mut outf = FTensor3::zeros(n1, n2, n3);
    for (k, res) in per_slice.into_iter().enumerate() {
        write_slice(&mut outf, k, &res?);
    }
    mirror_conjugate(&mut outf);
    Ok(idft3(&outf))
}
