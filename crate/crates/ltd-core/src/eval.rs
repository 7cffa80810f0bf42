//! Detection-quality metrics: ROC curve, AUC, anomaly/background
//! separability summaries, and the classical RX baseline detector.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{LtdError, Result};
use crate::fusion::Map2D;
use crate::tensor::Tensor3;

/// Binary per-pixel reference labels (true = anomaly).
#[derive(Debug, Clone)]
pub struct GroundTruth {
    n1: usize,
    n2: usize,
    labels: Vec<bool>,
}

impl GroundTruth {
    pub fn new(n1: usize, n2: usize, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != n1 * n2 {
            return Err(LtdError::DimensionMismatch(format!(
                "expected {} labels for a {}x{} mask, got {}",
                n1 * n2,
                n1,
                n2,
                labels.len()
            )));
        }
        Ok(Self { n1, n2, labels })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.labels.len() - self.positives()
    }

    fn require_both_classes(&self) -> Result<()> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(LtdError::InvalidInput(
                "ground truth must contain both classes".into(),
            ));
        }
        Ok(())
    }
}

/// Five-number summary of a score sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Per-class summaries of min-max normalized scores.
#[derive(Debug, Clone, Copy)]
pub struct SeparabilityStats {
    pub background: FiveNumberSummary,
    pub anomaly: FiveNumberSummary,
}

/// Full evaluation of one score map against a reference mask.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
    pub separability: SeparabilityStats,
}

fn check_dims(score: &Map2D, gt: &GroundTruth) -> Result<()> {
    if score.dims() != gt.dims() {
        return Err(LtdError::DimensionMismatch(format!(
            "score map {:?} vs ground truth {:?}",
            score.dims(),
            gt.dims()
        )));
    }
    Ok(())
}

/// ROC curve as `(false-positive rate, true-positive rate)` pairs.
///
/// Thresholds sweep the distinct score values in descending order plus a
/// `+inf` sentinel, declaring a pixel positive when its score is at least the
/// threshold. Tied scores share one threshold, so tie ordering cannot affect
/// the curve. The curve starts at `(0, 0)` and ends at `(1, 1)`.
pub fn roc_curve(score: &Map2D, gt: &GroundTruth) -> Result<Vec<(f64, f64)>> {
    check_dims(score, gt)?;
    gt.require_both_classes()?;
    let pos = gt.positives() as f64;
    let neg = gt.negatives() as f64;

    let mut order: Vec<usize> = (0..score.values().len()).collect();
    order.sort_by(|&a, &b| {
        score.values()[b]
            .partial_cmp(&score.values()[a])
            .expect("scores are finite")
    });

    let mut points = Vec::with_capacity(order.len() + 2);
    points.push((0.0, 0.0));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut idx = 0;
    while idx < order.len() {
        let threshold = score.values()[order[idx]];
        // Consume the whole tie group at this threshold.
        while idx < order.len() && score.values()[order[idx]] == threshold {
            if gt.labels()[order[idx]] {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        points.push((fp as f64 / neg, tp as f64 / pos));
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve.
pub fn auc(roc: &[(f64, f64)]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// Type-7 quantile (linear interpolation of order statistics) of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

fn five_number(sorted: &[f64]) -> FiveNumberSummary {
    FiveNumberSummary {
        min: sorted[0],
        q1: quantile_sorted(sorted, 0.25),
        median: quantile_sorted(sorted, 0.5),
        q3: quantile_sorted(sorted, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

/// Five-number summaries per class of the globally min-max normalized scores.
pub fn separability_stats(score: &Map2D, gt: &GroundTruth) -> Result<SeparabilityStats> {
    check_dims(score, gt)?;
    gt.require_both_classes()?;
    let (lo, hi) = score.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut background: Vec<f64> = Vec::with_capacity(gt.negatives());
    let mut anomaly: Vec<f64> = Vec::with_capacity(gt.positives());
    for (v, &label) in score.values().iter().zip(gt.labels()) {
        let s = (v - lo) / span;
        if label {
            anomaly.push(s);
        } else {
            background.push(s);
        }
    }
    background.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    anomaly.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(SeparabilityStats {
        background: five_number(&background),
        anomaly: five_number(&anomaly),
    })
}

/// ROC, AUC, and separability in one pass.
pub fn evaluate(score: &Map2D, gt: &GroundTruth) -> Result<EvalReport> {
    let roc = roc_curve(score, gt)?;
    let area = auc(&roc);
    let separability = separability_stats(score, gt)?;
    Ok(EvalReport {
        roc,
        auc: area,
        separability,
    })
}

/// RX detector: Mahalanobis distance of every pixel spectrum to the global
/// mean under the global covariance, diagonally regularized by
/// `1e-6 * trace / n3`.
pub fn rx_baseline(h: &Tensor3) -> Result<Map2D> {
    let (n1, n2, n3) = h.dims();
    let pixels = n1 * n2;
    let mut mean = vec![0.0f64; n3];
    let mut tube = vec![0.0f64; n3];
    for i in 0..n1 {
        for j in 0..n2 {
            h.copy_tube_into(i, j, &mut tube);
            for (m, t) in mean.iter_mut().zip(&tube) {
                *m += t;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= pixels as f64);

    let mut cov = DMatrix::<f64>::zeros(n3, n3);
    for i in 0..n1 {
        for j in 0..n2 {
            h.copy_tube_into(i, j, &mut tube);
            for a in 0..n3 {
                let da = tube[a] - mean[a];
                for b in a..n3 {
                    let v = da * (tube[b] - mean[b]);
                    cov[(a, b)] += v;
                }
            }
        }
    }
    for a in 0..n3 {
        for b in a..n3 {
            let v = cov[(a, b)] / pixels as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let trace: f64 = (0..n3).map(|a| cov[(a, a)]).sum();
    if trace == 0.0 {
        // Every pixel equals the mean; all distances are zero.
        return Ok(Map2D::zeros(n1, n2));
    }
    let ridge = 1e-6 * trace / n3 as f64;
    for a in 0..n3 {
        cov[(a, a)] += ridge;
    }
    let chol = Cholesky::new(cov).ok_or_else(|| {
        LtdError::NumericFailure("covariance is singular after regularization".into())
    })?;

    let mut out = Map2D::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            h.copy_tube_into(i, j, &mut tube);
            let d = DVector::from_iterator(n3, tube.iter().zip(&mean).map(|(&t, &m)| t - m));
            let solved = chol.solve(&d);
            out.set(i, j, d.dot(&solved));
        }
    }
    Ok(out)
}
