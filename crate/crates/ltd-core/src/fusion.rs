//! Detection-map construction and spectral-spatial fusion.
//!
//! The spectral map collapses the spectral anomaly tensor to per-pixel tube
//! norms, the spatial map does the same for the spatial anomaly tensor. The
//! two maps are fused by Hadamard product and sharpened with a guided image
//! filter, either once (self-guided) or in a nested chain guided by the
//! product, the spectral map and the spatial map in turn.

use crate::error::{LtdError, Result};
use crate::tensor::Tensor3;

/// Which form of the fusion step to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// One self-guided filter pass over the Hadamard product.
    #[default]
    Single,
    /// Three chained passes guided by the product, then `T1`, then `T2`.
    Nested,
}

/// Dense 2-D map of per-pixel scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Map2D {
    n1: usize,
    n2: usize,
    values: Vec<f64>,
}

impl Map2D {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        Self {
            n1,
            n2,
            values: vec![0.0; n1 * n2],
        }
    }

    pub fn from_values(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n1 * n2 {
            return Err(LtdError::DimensionMismatch(format!(
                "expected {} values for a {}x{} map, got {}",
                n1 * n2,
                n1,
                n2,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LtdError::InvalidInput(
                "map contains non-finite entries".into(),
            ));
        }
        Ok(Self { n1, n2, values })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n2 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n2 + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Map2D {
        Map2D {
            n1: self.n1,
            n2: self.n2,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entry-wise product.
    pub fn hadamard(&self, other: &Map2D) -> Result<Map2D> {
        if self.dims() != other.dims() {
            return Err(LtdError::DimensionMismatch(format!(
                "hadamard of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(Map2D {
            n1: self.n1,
            n2: self.n2,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }
}

/// Guided-filter window half-width and regularization.
#[derive(Debug, Clone, Copy)]
pub struct GuidedFilterParams {
    pub radius: usize,
    pub eps: f64,
}

impl Default for GuidedFilterParams {
    fn default() -> Self {
        Self {
            radius: 2,
            eps: 1e-2,
        }
    }
}

/// Per-pixel Euclidean norm of the mode-3 tubes of the spectral anomaly.
pub fn spectral_map(e1: &Tensor3) -> Map2D {
    tube_norm_map(e1)
}

/// Per-pixel Euclidean norm of the mode-3 tubes of the spatial anomaly.
pub fn spatial_map(e2: &Tensor3) -> Map2D {
    tube_norm_map(e2)
}

fn tube_norm_map(t: &Tensor3) -> Map2D {
    let (n1, n2, _) = t.dims();
    let mut out = Map2D::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            out.set(i, j, t.tube_norm(i, j));
        }
    }
    out
}

/// Windowed mean with edge-clipped windows, computed through an integral
/// image in `O(n1 n2)`. The divisor is the actual (clipped) window size.
pub fn box_filter(m: &Map2D, radius: usize) -> Map2D {
    let (n1, n2) = m.dims();
    let mut integral = vec![0.0f64; (n1 + 1) * (n2 + 1)];
    let w = n2 + 1;
    for i in 0..n1 {
        for j in 0..n2 {
            integral[(i + 1) * w + (j + 1)] =
                m.get(i, j) + integral[i * w + (j + 1)] + integral[(i + 1) * w + j]
                    - integral[i * w + j];
        }
    }
    let mut out = Map2D::zeros(n1, n2);
    for i in 0..n1 {
        let r0 = i.saturating_sub(radius);
        let r1 = (i + radius + 1).min(n1);
        for j in 0..n2 {
            let c0 = j.saturating_sub(radius);
            let c1 = (j + radius + 1).min(n2);
            let sum = integral[r1 * w + c1] - integral[r0 * w + c1] - integral[r1 * w + c0]
                + integral[r0 * w + c0];
            out.set(i, j, sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    out
}

/// Guided image filter: fit a local linear model of `input` on `guide` per
/// window and average the coefficients.
///
/// `a = cov(guide, input) / (var(guide) + eps)`, `b = mean(input) - a *
/// mean(guide)`, output `= mean(a) * guide + mean(b)`, all means box-filtered.
/// Exactly linear in `input` for a fixed guide and constant-preserving.
pub fn guided_filter(
    input: &Map2D,
    guide: &Map2D,
    params: &GuidedFilterParams,
) -> Result<Map2D> {
    if input.dims() != guide.dims() {
        return Err(LtdError::DimensionMismatch(format!(
            "guided filter input {:?} vs guide {:?}",
            input.dims(),
            guide.dims()
        )));
    }
    let r = params.radius;
    let mean_i = box_filter(guide, r);
    let mean_p = box_filter(input, r);
    let corr_ii = box_filter(&guide.hadamard(guide)?, r);
    let corr_ip = box_filter(&guide.hadamard(input)?, r);

    let (n1, n2) = input.dims();
    let mut a = Map2D::zeros(n1, n2);
    let mut b = Map2D::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let var = corr_ii.get(i, j) - mean_i.get(i, j) * mean_i.get(i, j);
            let cov = corr_ip.get(i, j) - mean_i.get(i, j) * mean_p.get(i, j);
            let ak = cov / (var + params.eps);
            a.set(i, j, ak);
            b.set(i, j, mean_p.get(i, j) - ak * mean_i.get(i, j));
        }
    }
    let mean_a = box_filter(&a, r);
    let mean_b = box_filter(&b, r);
    let mut out = Map2D::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            out.set(i, j, mean_a.get(i, j) * guide.get(i, j) + mean_b.get(i, j));
        }
    }
    Ok(out)
}

/// Min-max rescaling to `[0, 1]`; an all-constant map becomes all zero.
pub fn minmax_normalize(m: &Map2D) -> Map2D {
    let (lo, hi) = m.min_max();
    if hi <= lo {
        return Map2D::zeros(m.n1, m.n2);
    }
    m.map(|v| (v - lo) / (hi - lo))
}

/// Fuse the spectral and spatial detection maps.
///
/// The Hadamard product and the guides are min-max scaled to `[0, 1]` first so
/// `eps` has a consistent meaning across inputs; the result is normalized to
/// `[0, 1]`.
pub fn fuse(
    t1: &Map2D,
    t2: &Map2D,
    mode: FusionMode,
    params: &GuidedFilterParams,
) -> Result<Map2D> {
    let product = minmax_normalize(&t1.hadamard(t2)?);
    let fused = match mode {
        FusionMode::Single => guided_filter(&product, &product, params)?,
        FusionMode::Nested => {
            let stage1 = guided_filter(&product, &product, params)?;
            let stage2 = guided_filter(&stage1, &minmax_normalize(t1), params)?;
            guided_filter(&stage2, &minmax_normalize(t2), params)?
        }
    };
    Ok(minmax_normalize(&fused))
}
