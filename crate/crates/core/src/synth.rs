//! Synthetic datasets with known skills, durations and feature clusters.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, FeatureTrajectory, FrameLabeling};

/// Generator settings. Episodes draw a template by weight and expand every
/// symbol into a segment of uniform random length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub k_skills: usize,
    pub dim: usize,
    pub templates: Vec<Vec<usize>>,
    /// One positive weight per template; all ones when omitted.
    #[serde(default)]
    pub template_weights: Vec<f64>,
    pub duration_min: usize,
    pub duration_max: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub drift_sigma: f64,
    pub n_episodes: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    fn weights(&self) -> Vec<f64> {
        if self.template_weights.is_empty() {
            vec![1.0; self.templates.len()]
        } else {
            self.template_weights.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_min == 0 || self.duration_min > self.duration_max {
            return Err(Error::InvalidDurationRange);
        }
        if self.k_skills == 0 || self.dim == 0 {
            return Err(Error::Config("k_skills and dim must be positive".into()));
        }
        if self.dim < 2 && self.k_skills >= 3 {
            return Err(Error::CannotSeparate);
        }
        if self.n_episodes == 0 {
            return Err(Error::Config("n_episodes must be positive".into()));
        }
        if self.templates.is_empty() {
            return Err(Error::Config("at least one template is required".into()));
        }
        for (i, t) in self.templates.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Config(format!("template {i} is empty")));
            }
            if t.iter().any(|&s| s >= self.k_skills) {
                return Err(Error::Config(format!("template {i} uses a skill ≥ k_skills")));
            }
            if t.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config(format!("template {i} repeats a skill back to back")));
            }
        }
        let w = self.weights();
        if w.len() != self.templates.len() || w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config("template_weights must be positive, one per template".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.drift_sigma >= 0.0) {
            return Err(Error::Config("noise and drift must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub spec: SynthSpec,
    /// Unit skill means, `K × dim`.
    pub means: Array2<f64>,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-9 {
            return v / norm;
        }
    }
}

/// Unit means; pairwise angle at least 60° when `dim ≥ k`.
fn skill_means(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Result<Array2<f64>> {
    const MAX_TRIES: usize = 100_000;
    let mut means = Array2::zeros((k, dim));
    for i in 0..k {
        let mut accepted = false;
        for _ in 0..MAX_TRIES {
            let v = random_unit(rng, dim);
            let ok = dim < k || (0..i).all(|j| means.row(j).dot(&v) <= 0.5);
            if ok {
                means.row_mut(i).assign(&v);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::CannotSeparate);
        }
    }
    Ok(means)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = skill_means(&mut rng, spec.k_skills, spec.dim)?;
    let picker = WeightedIndex::new(spec.weights()).map_err(|e| Error::Config(e.to_string()))?;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let drift = Normal::new(0.0, spec.drift_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let mut episodes = Vec::with_capacity(spec.n_episodes);
    let mut truth = Vec::with_capacity(spec.n_episodes);
    for ep in 0..spec.n_episodes {
        let template = &spec.templates[picker.sample(&mut rng)];
        let mut rows: Vec<f64> = Vec::new();
        let mut labels = Vec::new();
        for &skill in template {
            let len = rng.random_range(spec.duration_min..=spec.duration_max);
            let mut offset = Array1::<f64>::zeros(spec.dim);
            for _ in 0..len {
                for o in offset.iter_mut() {
                    *o += drift.sample(&mut rng);
                }
                for d in 0..spec.dim {
                    rows.push(means[[skill, d]] + noise.sample(&mut rng) + offset[d]);
                }
                labels.push(skill);
            }
        }
        let n = labels.len();
        let features = Array2::from_shape_vec((n, spec.dim), rows).expect("row-major frames");
        episodes.push(FeatureTrajectory::new(features, ep)?);
        truth.push(FrameLabeling::new(labels, spec.k_skills)?);
    }
    Ok(SynthOutput {
        dataset: Dataset::new(episodes, Some(truth))?,
        spec: spec.clone(),
        means,
    })
}

/// Best global mIoU over every one-to-one partial mapping from predicted
/// clusters to truth classes, by exhaustive search on explicit frame sets.
pub fn oracle_best_miou(output: &SynthOutput, pred: &[FrameLabeling]) -> Result<f64> {
    let truth = output
        .dataset
        .ground_truth()
        .ok_or_else(|| Error::invalid("synthetic output has no ground truth"))?;
    if truth.len() != pred.len() {
        return Err(Error::invalid("prediction and truth episode counts differ"));
    }
    let k_pred = pred.iter().map(FrameLabeling::k_skills).max().unwrap_or(0);
    let k_truth = truth.iter().map(FrameLabeling::k_skills).max().unwrap_or(0);
    if k_pred > 6 || k_truth > 6 {
        return Err(Error::OracleTooLarge);
    }
    // frame sets keyed by (episode, frame)
    let mut pred_sets = vec![BTreeSet::new(); k_pred];
    let mut truth_sets = vec![BTreeSet::new(); k_truth];
    for (e, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != t.len() {
            return Err(Error::invalid(format!("episode {e} length mismatch")));
        }
        for (f, (&a, &b)) in p.labels().iter().zip(t.labels()).enumerate() {
            pred_sets[a].insert((e, f));
            truth_sets[b].insert((e, f));
        }
    }

    let mut best = 0.0f64;
    let mut assignment = vec![None; k_pred];
    let mut used = vec![false; k_truth];
    search(0, &mut assignment, &mut used, &pred_sets, &truth_sets, &mut best);
    Ok(best)
}

fn search(
    p: usize,
    assignment: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    pred_sets: &[BTreeSet<(usize, usize)>],
    truth_sets: &[BTreeSet<(usize, usize)>],
    best: &mut f64,
) {
    if p == assignment.len() {
        let mut total = 0.0;
        let mut classes = 0;
        for (g, tset) in truth_sets.iter().enumerate() {
            let mut predicted: BTreeSet<(usize, usize)> = BTreeSet::new();
            for (q, a) in assignment.iter().enumerate() {
                if *a == Some(g) {
                    predicted.extend(pred_sets[q].iter().copied());
                }
            }
            let union = tset.union(&predicted).count();
            if union == 0 {
                continue;
            }
            total += tset.intersection(&predicted).count() as f64 / union as f64;
            classes += 1;
        }
        if classes > 0 {
            *best = best.max(total / classes as f64);
        }
        return;
    }
    assignment[p] = None;
    search(p + 1, assignment, used, pred_sets, truth_sets, best);
    for g in 0..used.len() {
        if !used[g] {
            used[g] = true;
            assignment[p] = Some(g);
            search(p + 1, assignment, used, pred_sets, truth_sets, best);
            used[g] = false;
        }
    }
    assignment[p] = None;
}
