//! Log-domain entropic Sinkhorn with optional KL-relaxed marginals.
//!
//! Row target is uniform `1/n` over frames, column target uniform `1/K` over
//! skills. A balanced marginal is enforced exactly; an unbalanced one is
//! relaxed with weight `λ`, which turns its dual update into a damped one with
//! exponent `λ / (λ + ε)`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Marginal tolerance the extra iterations aim for when both sides are balanced.
const BALANCED_TOL: f64 = 1e-10;
const MAX_EXTRA_ITERS: usize = 5_000;
const SCALING_ITERS: usize = 20;
const SCALING_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub eps: f64,
    pub lambda_frames: f64,
    pub lambda_actions: f64,
    pub ub_frames: bool,
    pub ub_actions: bool,
    pub n_inner: usize,
}

impl SinkhornParams {
    pub fn balanced(eps: f64, n_inner: usize) -> Self {
        Self {
            eps,
            lambda_frames: 0.05,
            lambda_actions: 0.05,
            ub_frames: false,
            ub_actions: false,
            n_inner,
        }
    }
}

/// Soft frame-to-skill assignment, `n × K`, non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    gamma: Array2<f64>,
}

impl TransportPlan {
    pub fn new(gamma: Array2<f64>) -> Result<Self> {
        if gamma.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("transport plan entries must be finite and non-negative"));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> ArrayView2<'_, f64> {
        self.gamma.view()
    }

    pub fn n_frames(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn k(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn row_sums(&self) -> Array1<f64> {
        self.gamma.sum_axis(ndarray::Axis(1))
    }

    pub fn col_sums(&self) -> Array1<f64> {
        self.gamma.sum_axis(ndarray::Axis(0))
    }

    pub(crate) fn from_raw(gamma: Array2<f64>) -> Self {
        Self { gamma }
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.gamma
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct Duals<'a> {
    cost: ArrayView2<'a, f64>,
    eps: f64,
    f: Array1<f64>,
    g: Array1<f64>,
    log_p: f64,
    log_q: f64,
}

impl Duals<'_> {
    /// `lse_t((f_t - C_tk)/ε)` for column `k`.
    fn col_lse(&self, k: usize) -> f64 {
        let col = self.cost.column(k);
        log_sum_exp(self.f.iter().zip(col).map(|(&f, &c)| (f - c) / self.eps))
    }

    fn row_lse(&self, t: usize) -> f64 {
        let row = self.cost.row(t);
        log_sum_exp(self.g.iter().zip(row).map(|(&g, &c)| (g - c) / self.eps))
    }

    fn update_g(&mut self, damping: f64) {
        for k in 0..self.g.len() {
            self.g[k] = damping * self.eps * (self.log_q - self.col_lse(k));
        }
    }

    fn update_f(&mut self, damping: f64) {
        for t in 0..self.f.len() {
            self.f[t] = damping * self.eps * (self.log_p - self.row_lse(t));
        }
    }

    fn finite(&self) -> bool {
        self.f.iter().chain(self.g.iter()).all(|v| v.is_finite())
    }

    /// Largest deviation of the column masses from `1/K`.
    fn col_violation(&self) -> f64 {
        let q = self.log_q.exp();
        (0..self.g.len())
            .map(|k| ((self.g[k] / self.eps + self.col_lse(k)).exp() - q).abs())
            .fold(0.0, f64::max)
    }

    /// Plan from the current duals. When one marginal was updated last it is
    /// rebuilt as that marginal times a softmax, so it holds to rounding.
    fn plan(&self, last: Last) -> Array2<f64> {
        let (n, k) = self.cost.dim();
        let mut gamma = match last {
            Last::Rows => {
                let p = 1.0 / n as f64;
                let mut gamma = Array2::zeros((n, k));
                for t in 0..n {
                    let lse = self.row_lse(t);
                    for j in 0..k {
                        gamma[[t, j]] = p * ((self.g[j] - self.cost[[t, j]]) / self.eps - lse).exp();
                    }
                }
                gamma
            }
            Last::Cols => {
                let q = 1.0 / k as f64;
                let mut gamma = Array2::zeros((n, k));
                for j in 0..k {
                    let lse = self.col_lse(j);
                    for t in 0..n {
                        gamma[[t, j]] = q * ((self.f[t] - self.cost[[t, j]]) / self.eps - lse).exp();
                    }
                }
                gamma
            }
            Last::Neither => Array2::from_shape_fn((n, k), |(t, j)| {
                ((self.f[t] + self.g[j] - self.cost[[t, j]]) / self.eps).exp()
            }),
        };
        gamma.mapv_inplace(|v| v.max(f64::MIN_POSITIVE));
        gamma
    }
}

/// Project onto the uniform transportation polytope: shrink overfull rows and
/// columns, then spread the missing mass as a rank-one correction. Moves the
/// plan by at most twice the marginal violation in L1.
fn round_to_marginals(gamma: &mut Array2<f64>) {
    let (n, k) = gamma.dim();
    let (p, q) = (1.0 / n as f64, 1.0 / k as f64);
    for mut row in gamma.rows_mut() {
        let s = row.sum();
        if s > p {
            row *= p / s;
        }
    }
    for mut col in gamma.columns_mut() {
        let s = col.sum();
        if s > q {
            col *= q / s;
        }
    }
    let err_r: Vec<f64> = gamma.rows().into_iter().map(|r| (p - r.sum()).max(0.0)).collect();
    let err_c: Vec<f64> = gamma.columns().into_iter().map(|c| (q - c.sum()).max(0.0)).collect();
    let mass: f64 = err_r.iter().sum();
    if mass > 0.0 {
        for t in 0..n {
            for j in 0..k {
                gamma[[t, j]] += err_r[t] * err_c[j] / mass;
            }
        }
    }
    gamma.mapv_inplace(|v| v.max(f64::MIN_POSITIVE));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Last {
    Rows,
    Cols,
    Neither,
}

/// Approximate minimizer of `⟨C,Γ⟩ - ε·H(Γ)` plus KL penalties on relaxed marginals.
pub fn sinkhorn_solve(cost: ArrayView2<'_, f64>, params: &SinkhornParams) -> Result<TransportPlan> {
    let (n, k) = cost.dim();
    if n == 0 || k == 0 {
        return Err(Error::invalid("cost matrix must be non-empty"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    if !(params.eps > 0.0 && params.eps.is_finite()) {
        return Err(Error::invalid("eps must be positive"));
    }
    let eps = params.eps;
    let damp_rows = if params.ub_frames {
        params.lambda_frames / (params.lambda_frames + eps)
    } else {
        1.0
    };
    let damp_cols = if params.ub_actions {
        params.lambda_actions / (params.lambda_actions + eps)
    } else {
        1.0
    };
    let mut duals = Duals {
        cost,
        eps,
        f: Array1::zeros(n),
        g: Array1::zeros(k),
        log_p: -(n as f64).ln(),
        log_q: -(k as f64).ln(),
    };
    // The marginal updated last is satisfied exactly on exit; make that a balanced one.
    let cols_last = params.ub_frames && !params.ub_actions;
    let step = |d: &mut Duals<'_>| {
        if cols_last {
            d.update_f(damp_rows);
            d.update_g(damp_cols);
        } else {
            d.update_g(damp_cols);
            d.update_f(damp_rows);
        }
    };
    let balanced = !params.ub_frames && !params.ub_actions;
    if balanced {
        // anneal from the cost scale down to eps, warm-starting the duals
        let spread = cost.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        let mut e = spread.max(eps);
        while e > eps {
            duals.eps = e;
            for _ in 0..SCALING_ITERS {
                step(&mut duals);
            }
            e *= SCALING_FACTOR;
        }
        duals.eps = eps;
    }
    for _ in 0..params.n_inner {
        step(&mut duals);
        if !duals.finite() {
            return Err(Error::Diverged);
        }
    }
    if balanced {
        let mut extra = 0;
        while duals.col_violation() > BALANCED_TOL && extra < MAX_EXTRA_ITERS {
            for _ in 0..10 {
                step(&mut duals);
            }
            extra += 10;
            if !duals.finite() {
                return Err(Error::Diverged);
            }
        }
    }
    let last = if !params.ub_frames && !cols_last {
        Last::Rows
    } else if !params.ub_actions {
        Last::Cols
    } else {
        Last::Neither
    };
    let unconverged = balanced && duals.col_violation() > BALANCED_TOL;
    let mut gamma = duals.plan(last);
    if unconverged {
        round_to_marginals(&mut gamma);
    }
    if gamma.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged);
    }
    Ok(TransportPlan::from_raw(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_skill_is_row_marginal() {
        let cost = array![[0.3], [1.2], [0.0], [2.0]];
        let plan = sinkhorn_solve(cost.view(), &SinkhornParams::balanced(0.01, 50)).unwrap();
        for v in plan.gamma().iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_cost_is_uniform() {
        let cost = Array2::zeros((2, 2));
        let plan = sinkhorn_solve(cost.view(), &SinkhornParams::balanced(0.1, 10)).unwrap();
        for v in plan.gamma().iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_cost() {
        let cost = array![[0.0, f64::NAN]];
        assert!(matches!(
            sinkhorn_solve(cost.view(), &SinkhornParams::balanced(0.1, 10)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn tiny_eps_stays_finite_and_positive() {
        let cost = array![[0.0, 2.0, 1.0], [2.0, 0.0, 1.5], [1.0, 1.0, 0.0], [2.0, 2.0, 2.0]];
        let plan = sinkhorn_solve(cost.view(), &SinkhornParams::balanced(0.001, 100)).unwrap();
        assert!(plan.gamma().iter().all(|&v| v > 0.0 && v.is_finite()));
        for s in plan.row_sums() {
            assert!((s - 0.25).abs() < 1e-6);
        }
        for s in plan.col_sums() {
            assert!((s - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn relaxed_columns_leave_rows_exact() {
        let cost = array![[0.0, 1.0], [0.1, 1.0], [0.0, 0.9]];
        let params = SinkhornParams {
            ub_actions: true,
            ..SinkhornParams::balanced(0.05, 100)
        };
        let plan = sinkhorn_solve(cost.view(), &params).unwrap();
        for s in plan.row_sums() {
            assert!((s - 1.0 / 3.0).abs() < 1e-12);
        }
        // relaxed: most mass follows the cheap column instead of splitting 1/2, 1/2
        assert!(plan.col_sums()[0] > 0.6);
    }

    #[test]
    fn relaxed_rows_leave_columns_exact() {
        let cost = array![[0.0, 1.0], [0.1, 1.0], [2.0, 2.0]];
        let params = SinkhornParams {
            ub_frames: true,
            ..SinkhornParams::balanced(0.05, 100)
        };
        let plan = sinkhorn_solve(cost.view(), &params).unwrap();
        for s in plan.col_sums() {
            assert!((s - 0.5).abs() < 1e-12);
        }
    }
}
