//! Prototype initialization (k-means++ then Lloyd) and dataset-level training.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::asot::{hard_assign, solve_asot};
use super::config::{Mode, SolverConfig};
use super::cost::Prototypes;
use crate::error::{Error, Result};
use crate::model::{standardize_features, Dataset, FrameLabeling};

const LLOYD_ITERS: usize = 25;
const KMEANS_RESTARTS: usize = 10;

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn stack_frames(dataset: &Dataset) -> Array2<f64> {
    let views: Vec<_> = dataset.episodes().iter().map(|e| e.features()).collect();
    ndarray::concatenate(Axis(0), &views).expect("episodes share dim")
}

/// One k-means++ seeding plus Lloyd refinement. Returns the centers, their
/// inertia and whether seeding had to duplicate a center.
fn kmeans_once(frames: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, f64, bool) {
    let n = frames.nrows();
    let mut centers = Array2::<f64>::zeros((k, frames.ncols()));
    centers.row_mut(0).assign(&frames.row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = frames
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, centers.row(0)))
        .collect();
    let mut duplicated = false;
    for c in 1..k {
        let pick = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            Err(_) => {
                // every frame coincides with an existing center
                duplicated = true;
                rng.random_range(0..n)
            }
        };
        centers.row_mut(c).assign(&frames.row(pick));
        for (d, r) in nearest.iter_mut().zip(frames.rows()) {
            *d = d.min(sq_dist(r, centers.row(c)));
        }
    }

    let mut assign = vec![usize::MAX; n];
    let mut inertia = 0.0;
    for iter in 0..=LLOYD_ITERS {
        let mut changed = false;
        inertia = 0.0;
        for (t, r) in frames.rows().into_iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (j, c) in centers.rows().into_iter().enumerate() {
                let d = sq_dist(r, c);
                if d < best.0 {
                    best = (d, j);
                }
            }
            inertia += best.0;
            if assign[t] != best.1 {
                assign[t] = best.1;
                changed = true;
            }
        }
        if !changed || iter == LLOYD_ITERS {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centers.dim());
        let mut counts = vec![0usize; k];
        for (t, r) in frames.rows().into_iter().enumerate() {
            let mut s = sums.row_mut(assign[t]);
            s += &r;
            counts[assign[t]] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                let mean = &sums.row(j) / counts[j] as f64;
                centers.row_mut(j).assign(&mean);
            }
        }
    }
    (centers, inertia, duplicated)
}

/// k-means over every frame of the dataset: the lowest-inertia result of
/// several k-means++ seedings, each refined by Lloyd iterations.
///
/// When the data has fewer distinct points than `k`, the remaining centroids
/// duplicate existing ones and a warning is logged.
pub fn init_prototypes(dataset: &Dataset, k: usize, seed: u64) -> Result<Prototypes> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let frames = stack_frames(dataset);
    let n = frames.nrows();
    if n < k {
        return Err(Error::invalid(format!("{n} frames cannot seed {k} prototypes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Array2<f64>, f64, bool)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = kmeans_once(&frames, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (centers, _, duplicated) = best.expect("at least one restart");
    if duplicated {
        log::warn!("fewer distinct frames than {k} prototypes; some prototypes are duplicates");
    }
    Prototypes::new(centers)
}

/// Learn unit-norm skill prototypes over the whole dataset.
///
/// Starts from the normalized k-means centroids. Each epoch visits the episodes
/// in a seeded shuffled order, crops each to a random window of at most
/// `n_frames`, solves the train-mode transport problem and takes one gradient
/// step on `⟨C, Γ⟩` with decoupled weight decay, then renormalizes.
pub fn fit(dataset: &Dataset, cfg: &SolverConfig) -> Result<Prototypes> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("dataset has no episodes"));
    }
    let mut protos = init_prototypes(dataset, cfg.k_skills, cfg.seed)?.normalized();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..cfg.n_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let ep = &dataset.episodes()[i];
            let n = ep.n_frames();
            let window = if n > cfg.n_frames {
                let start = rng.random_range(0..=n - cfg.n_frames);
                ep.window(start, cfg.n_frames)
            } else {
                ep.clone()
            };
            let sol = solve_asot(&window, &protos, cfg, Mode::Train)?;
            gradient_step(&mut protos, &window, sol.plan.gamma(), cfg);
        }
        log::debug!("epoch {epoch} done");
    }
    Ok(protos)
}

/// Gradient of `⟨C, Γ⟩` w.r.t. unit prototypes is `-Σ_t Γ[t,k]·(x̂_t - (x̂_t·p_k)·p_k)`.
fn gradient_step(
    protos: &mut Prototypes,
    traj: &crate::model::FeatureTrajectory,
    gamma: ndarray::ArrayView2<'_, f64>,
    cfg: &SolverConfig,
) {
    if cfg.learning_rate == 0.0 {
        return;
    }
    let x = traj.features();
    let k = protos.k();
    let p = protos.vectors().to_owned();
    let mut grad = Array2::<f64>::zeros(p.dim());
    for (t, row) in x.rows().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            continue;
        }
        let unit = &row / norm;
        for j in 0..k {
            let w = gamma[[t, j]];
            let proj = unit.dot(&p.row(j));
            let tangent: Array1<f64> = &unit - &(&p.row(j) * proj);
            let mut g = grad.row_mut(j);
            g.scaled_add(-w, &tangent);
        }
    }
    let v = protos.vectors_mut();
    let lr = cfg.learning_rate;
    for j in 0..k {
        let mut row = v.row_mut(j);
        let decay = &row * (lr * cfg.weight_decay);
        row.scaled_add(-lr, &grad.row(j));
        row -= &decay;
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 && norm.is_finite() {
            row /= norm;
        } else {
            row.assign(&p.row(j));
        }
    }
}

/// Result of segmenting a dataset.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub prototypes: Prototypes,
    pub labels: Vec<FrameLabeling>,
}

/// Eval-mode labels for every episode; episodes are solved in parallel and
/// collected in order.
pub fn label_dataset(
    dataset: &Dataset,
    protos: &Prototypes,
    cfg: &SolverConfig,
) -> Result<Vec<FrameLabeling>> {
    dataset
        .episodes()
        .par_iter()
        .map(|ep| Ok(hard_assign(&solve_asot(ep, protos, cfg, Mode::Eval)?.plan)))
        .collect()
}

/// Full segmentation stage: optional standardization, training, then eval-mode labeling.
pub fn segment_dataset(dataset: &Dataset, cfg: &SolverConfig) -> Result<Segmentation> {
    let standardized;
    let data = if cfg.std_feats {
        standardized = standardize_features(dataset);
        &standardized
    } else {
        dataset
    };
    let prototypes = fit(data, cfg)?;
    let labels = label_dataset(data, &prototypes, cfg)?;
    Ok(Segmentation { prototypes, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureTrajectory;
    use ndarray::array;

    fn dataset(rows: Vec<Array2<f64>>) -> Dataset {
        let eps = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| FeatureTrajectory::new(r, i).unwrap())
            .collect();
        Dataset::new(eps, None).unwrap()
    }

    fn two_clouds() -> Dataset {
        let a = Array2::from_shape_fn((20, 2), |(t, j)| {
            let jitter = 0.1 * ((t * 7 + j * 3) as f64).sin();
            if j == 0 { 5.0 + jitter } else { 5.0 - jitter }
        });
        let b = Array2::from_shape_fn((15, 2), |(t, j)| {
            let jitter = 0.1 * ((t * 5 + j) as f64).cos();
            if j == 0 { -5.0 + jitter } else { 1.0 + jitter }
        });
        dataset(vec![a, b])
    }

    #[test]
    fn kmeans_finds_both_clouds() {
        let p = init_prototypes(&two_clouds(), 2, 3).unwrap();
        let v = p.vectors();
        let in_a = |r: ndarray::ArrayView1<f64>| (4.8..=5.2).contains(&r[0]) && (4.8..=5.2).contains(&r[1]);
        let in_b = |r: ndarray::ArrayView1<f64>| (-5.2..=-4.8).contains(&r[0]) && (0.8..=1.2).contains(&r[1]);
        assert!((in_a(v.row(0)) && in_b(v.row(1))) || (in_a(v.row(1)) && in_b(v.row(0))));
    }

    #[test]
    fn identical_frames_give_that_frame() {
        let ds = dataset(vec![array![[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]]]);
        let p = init_prototypes(&ds, 1, 0).unwrap();
        assert_eq!(p.vectors(), array![[1.5, -2.0]]);
        // duplicate-tolerant fallback
        let p = init_prototypes(&ds, 3, 0).unwrap();
        assert_eq!(p.k(), 3);
        assert!(p.vectors().rows().into_iter().all(|r| r == array![1.5, -2.0]));
    }

    #[test]
    fn init_is_deterministic() {
        let ds = two_clouds();
        assert_eq!(init_prototypes(&ds, 2, 11).unwrap(), init_prototypes(&ds, 2, 11).unwrap());
    }

    #[test]
    fn too_few_frames_is_error() {
        let ds = dataset(vec![array![[1.0, 0.0]]]);
        assert!(init_prototypes(&ds, 2, 0).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let ds = two_clouds();
        let cfg = SolverConfig {
            k_skills: 2,
            learning_rate: 0.0,
            n_epochs: 2,
            ..Default::default()
        };
        let fitted = fit(&ds, &cfg).unwrap();
        let init = init_prototypes(&ds, 2, cfg.seed).unwrap().normalized();
        assert_eq!(fitted, init);
    }

    #[test]
    fn single_cluster_converges_to_mean_direction() {
        let x = Array2::from_shape_fn((60, 3), |(t, j)| {
            let base = [2.0, 1.0, 0.5][j];
            base + 0.2 * ((t * 13 + j * 7) as f64).sin()
        });
        let mean = x.mean_axis(Axis(0)).unwrap();
        let ds = dataset(vec![x]);
        let cfg = SolverConfig {
            k_skills: 1,
            learning_rate: 0.1,
            n_epochs: 20,
            n_frames: 25,
            ..Default::default()
        };
        let p = fit(&ds, &cfg).unwrap();
        let v = p.vectors().row(0).to_owned();
        let cos = v.dot(&mean) / (v.dot(&v).sqrt() * mean.dot(&mean).sqrt());
        assert!(cos.clamp(-1.0, 1.0).acos() < 0.1);
        assert!((v.dot(&v) - 1.0).abs() < 1e-12);
    }
}
