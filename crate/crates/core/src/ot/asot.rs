//! Fused feature/temporal transport per episode, solved by conditional gradient.
//!
//! Each outer iteration linearizes the temporal regularizer at the current
//! plan, solves the resulting entropic problem with Sinkhorn, and moves toward
//! that solution with an exact line search on the (quadratic) objective.

use ndarray::{Array2, ArrayView2};

use super::config::{Mode, SolverConfig};
use super::cost::{build_cost_matrix, gw_gradient, order_prior, temporal_bilinear, Prototypes};
use super::sinkhorn::{sinkhorn_solve, SinkhornParams, TransportPlan};
use crate::error::{Error, Result};
use crate::model::{FeatureTrajectory, FrameLabeling};

#[derive(Debug, Clone)]
pub struct AsotSolution {
    pub plan: TransportPlan,
    /// Objective `(1-α)·⟨C + ρP, Γ⟩ + α·R(Γ)` after the warm start and after each outer step.
    pub objective: Vec<f64>,
}

struct Objective<'a> {
    base: ArrayView2<'a, f64>,
    alpha: f64,
    radius: f64,
}

impl Objective<'_> {
    fn value(&self, gamma: ArrayView2<'_, f64>) -> f64 {
        let n = gamma.nrows();
        (1.0 - self.alpha) * (&self.base * &gamma).sum()
            + self.alpha * temporal_bilinear(gamma, gamma, n, self.radius)
    }
}

pub fn solve_asot(
    traj: &FeatureTrajectory,
    protos: &Prototypes,
    cfg: &SolverConfig,
    mode: Mode,
) -> Result<AsotSolution> {
    let p = cfg.params(mode);
    let cost = build_cost_matrix(traj, protos)?;
    let n = traj.n_frames();
    let base = cost + order_prior(n, protos.k()) * cfg.rho;
    let sk = SinkhornParams {
        eps: p.eps,
        lambda_frames: p.lambda_frames,
        lambda_actions: p.lambda_actions,
        ub_frames: cfg.ub_frames,
        ub_actions: cfg.ub_actions,
        n_inner: cfg.n_inner,
    };
    let obj = Objective {
        base: base.view(),
        alpha: p.alpha,
        radius: cfg.radius_gw,
    };

    let mut gamma = sinkhorn_solve(base.view(), &sk)?.into_inner();
    let mut history = vec![obj.value(gamma.view())];
    for _ in 0..cfg.n_outer {
        let grad = gw_gradient(gamma.view(), cfg.radius_gw);
        let linear = &base * (1.0 - p.alpha) + &grad * p.alpha;
        let target = sinkhorn_solve(linear.view(), &sk)?.into_inner();
        let dir: Array2<f64> = &target - &gamma;
        // F(Γ + sD) = F(Γ) + s·⟨∇F(Γ), D⟩ + s²·α·R(D)
        let slope = (&linear * &dir).sum();
        let curvature = p.alpha * temporal_bilinear(dir.view(), dir.view(), n, cfg.radius_gw);
        let step = if curvature > 0.0 {
            (-slope / (2.0 * curvature)).clamp(0.0, 1.0)
        } else if slope + curvature < 0.0 {
            1.0
        } else {
            0.0
        };
        if step > 0.0 {
            let candidate = &gamma + &(&dir * step);
            let value = obj.value(candidate.view());
            if value <= *history.last().expect("non-empty") {
                gamma = candidate;
            }
        }
        if gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged);
        }
        history.push(obj.value(gamma.view()));
    }
    Ok(AsotSolution {
        plan: TransportPlan::from_raw(gamma),
        objective: history,
    })
}

/// Per-frame argmax over skills; ties go to the lowest skill id.
pub fn hard_assign(plan: &TransportPlan) -> FrameLabeling {
    let labels = plan
        .gamma()
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    FrameLabeling::new(labels, plan.k()).expect("argmax is within range")
}
