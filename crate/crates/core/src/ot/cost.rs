//! Feature cost, order prior and the banded temporal regularizer.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::model::FeatureTrajectory;

/// One vector per skill, `K × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    vectors: Array2<f64>,
}

impl Prototypes {
    pub fn new(vectors: Array2<f64>) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::invalid("prototypes must be non-empty"));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prototypes"));
        }
        Ok(Self { vectors })
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn k(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Unit-norm copy; zero rows are left at zero.
    pub fn normalized(&self) -> Prototypes {
        let mut v = self.vectors.clone();
        for mut row in v.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row /= norm;
            }
        }
        Prototypes { vectors: v }
    }

    pub(crate) fn vectors_mut(&mut self) -> &mut Array2<f64> {
        &mut self.vectors
    }
}

/// `C[t,k] = 1 - cos(x_t, p_k)` clipped to `[0, 2]`. A zero vector has cosine 0 with anything.
pub fn build_cost_matrix(traj: &FeatureTrajectory, protos: &Prototypes) -> Result<Array2<f64>> {
    if traj.dim() != protos.dim() {
        return Err(Error::DimensionMismatch {
            expected: protos.dim(),
            found: traj.dim(),
        });
    }
    let x = traj.features();
    let p = protos.vectors();
    let x_norm: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let p_norm: Vec<f64> = p.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let dots = x.dot(&p.t());
    let mut cost = Array2::zeros(dots.dim());
    for ((t, k), c) in cost.indexed_iter_mut() {
        let denom = x_norm[t] * p_norm[k];
        let cos = if denom > 0.0 { dots[[t, k]] / denom } else { 0.0 };
        *c = (1.0 - cos).clamp(0.0, 2.0);
    }
    Ok(cost)
}

/// Diagonal progress prior `P[t,k] = |t/(n-1) - k/(K-1)|` (denominators floored at 1).
pub fn order_prior(n: usize, k_skills: usize) -> Array2<f64> {
    let tn = (n.max(2) - 1) as f64;
    let kn = (k_skills.max(2) - 1) as f64;
    Array2::from_shape_fn((n, k_skills), |(t, k)| (t as f64 / tn - k as f64 / kn).abs())
}

/// Temporal band half-width `max(1, ceil(radius * n))`.
pub fn band_width(n: usize, radius_gw: f64) -> usize {
    ((radius_gw * n as f64).ceil() as usize).max(1)
}

/// Dense 0/1 band matrix with zero diagonal. Quadratic in `n`; used as a reference.
pub fn temporal_band(n: usize, width: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(a, b)| {
        let d = a.abs_diff(b);
        if d > 0 && d <= width {
            1.0
        } else {
            0.0
        }
    })
}

/// `A·Γ·B` with `A` the band matrix and `B = 1 - I`, in `O(nK)` via prefix sums.
fn band_disagreement(gamma: ArrayView2<'_, f64>, width: usize) -> Array2<f64> {
    let (n, k) = gamma.dim();
    let row_sums: Vec<f64> = gamma.rows().into_iter().map(|r| r.sum()).collect();
    // Y = Γ·B, Y[t,k] = rowsum(t) - Γ[t,k]
    let mut prefix = Array2::<f64>::zeros((n + 1, k));
    for t in 0..n {
        for j in 0..k {
            prefix[[t + 1, j]] = prefix[[t, j]] + row_sums[t] - gamma[[t, j]];
        }
    }
    Array2::from_shape_fn((n, k), |(t, j)| {
        let lo = t.saturating_sub(width);
        let hi = (t + width).min(n - 1);
        let own = row_sums[t] - gamma[[t, j]];
        prefix[[hi + 1, j]] - prefix[[lo, j]] - own
    })
}

/// Gradient of the temporal regularizer, `(2/n)·A·Γ·B`.
pub fn gw_gradient(gamma: ArrayView2<'_, f64>, radius_gw: f64) -> Array2<f64> {
    let n = gamma.nrows();
    let w = band_width(n, radius_gw);
    band_disagreement(gamma, w) * (2.0 / n as f64)
}

/// Banded label-disagreement energy
/// `(1/n)·Σ_{0<|t-t'|≤w} Σ_{k≠k'} Γ[t,k]·Γ[t',k']`.
pub fn temporal_regularity(gamma: ArrayView2<'_, f64>, radius_gw: f64) -> f64 {
    temporal_bilinear(gamma, gamma, gamma.nrows(), radius_gw)
}

/// Bilinear form `(1/n)·⟨X, A·Y·B⟩`; symmetric in `X`, `Y`.
pub(crate) fn temporal_bilinear(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    n: usize,
    radius_gw: f64,
) -> f64 {
    let w = band_width(n, radius_gw);
    let ay = band_disagreement(y, w);
    (&x * &ay).sum() / n as f64
}
