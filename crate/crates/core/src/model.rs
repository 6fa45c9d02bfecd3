//! Shared data types: trajectories, labelings, segments, symbol sequences
//! and derivation trees, plus the elementary transformations between them.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One episode of observation features, `n_frames × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrajectory {
    features: Array2<f64>,
    episode_id: usize,
}

impl FeatureTrajectory {
    pub fn new(features: Array2<f64>, episode_id: usize) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::EmptyEpisode);
        }
        if d == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "episode {episode_id} contains non-finite features"
            )));
        }
        Ok(Self {
            features,
            episode_id,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn episode_id(&self) -> usize {
        self.episode_id
    }

    pub fn n_frames(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Contiguous frame window `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> FeatureTrajectory {
        let end = (start + len).min(self.n_frames());
        FeatureTrajectory {
            features: self
                .features
                .slice(ndarray::s![start..end, ..])
                .to_owned(),
            episode_id: self.episode_id,
        }
    }

    pub fn into_features(self) -> Array2<f64> {
        self.features
    }
}

/// Per-frame skill ids. Ids are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLabeling {
    labels: Vec<usize>,
    k_skills: usize,
}

impl FrameLabeling {
    pub fn new(labels: Vec<usize>, k_skills: usize) -> Result<Self> {
        if k_skills == 0 {
            return Err(Error::invalid("k_skills must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k_skills) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {k_skills} skills"
            )));
        }
        Ok(Self { labels, k_skills })
    }

    /// Labeling whose skill count is one past the largest label seen.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k_skills = labels.iter().max().map_or(1, |m| m + 1);
        Self { labels, k_skills }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k_skills(&self) -> usize {
        self.k_skills
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Widen the skill count; never shrinks it.
    pub fn with_k(mut self, k_skills: usize) -> Self {
        self.k_skills = self.k_skills.max(k_skills);
        self
    }
}

/// A batch of episodes sharing one feature dimension, optionally with truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    episodes: Vec<FeatureTrajectory>,
    dim: usize,
    ground_truth: Option<Vec<FrameLabeling>>,
}

impl Dataset {
    pub fn new(
        episodes: Vec<FeatureTrajectory>,
        ground_truth: Option<Vec<FrameLabeling>>,
    ) -> Result<Self> {
        let dim = episodes
            .first()
            .map(FeatureTrajectory::dim)
            .ok_or_else(|| Error::invalid("dataset has no episodes"))?;
        for ep in &episodes {
            if ep.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ep.dim(),
                });
            }
        }
        if let Some(truth) = &ground_truth {
            if truth.len() != episodes.len() {
                return Err(Error::invalid(format!(
                    "{} ground-truth labelings for {} episodes",
                    truth.len(),
                    episodes.len()
                )));
            }
            for (i, (ep, lab)) in episodes.iter().zip(truth).enumerate() {
                if ep.n_frames() != lab.len() {
                    return Err(Error::invalid(format!(
                        "episode {i}: {} frames but {} labels",
                        ep.n_frames(),
                        lab.len()
                    )));
                }
            }
        }
        Ok(Self {
            episodes,
            dim,
            ground_truth,
        })
    }

    pub fn episodes(&self) -> &[FeatureTrajectory] {
        &self.episodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ground_truth(&self) -> Option<&[FrameLabeling]> {
        self.ground_truth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn total_frames(&self) -> usize {
        self.episodes.iter().map(FeatureTrajectory::n_frames).sum()
    }
}

/// Maximal constant run of one label, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub label: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Run-length-collapsed symbol sequence of one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSequence {
    pub symbols: Vec<usize>,
    pub episode_id: usize,
}

/// One node of a per-episode derivation tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TreeNode {
    Leaf(usize),
    /// `rule` is `None` for the synthetic episode root.
    Internal {
        rule: Option<u32>,
        children: Vec<TreeNode>,
    },
}

impl TreeNode {
    pub fn frontier(&self, out: &mut Vec<usize>) {
        match self {
            TreeNode::Leaf(t) => out.push(*t),
            TreeNode::Internal { children, .. } => {
                for c in children {
                    c.frontier(out);
                }
            }
        }
    }
}

/// Derivation tree of one episode under an induced grammar.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpisodeTree {
    pub root: TreeNode,
}

impl EpisodeTree {
    /// Leaf symbols read left to right.
    pub fn frontier(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.root.frontier(&mut out);
        out
    }
}

/// Labels of the maximal constant runs, in order.
pub fn run_length_collapse(labels: &FrameLabeling) -> Result<Vec<usize>> {
    Ok(segments_of(labels)?.into_iter().map(|s| s.label).collect())
}

/// Segments tiling the episode, one per maximal constant run.
pub fn segments_of(labels: &FrameLabeling) -> Result<Vec<Segment>> {
    segments_of_slice(labels.labels())
}

pub(crate) fn segments_of_slice(labels: &[usize]) -> Result<Vec<Segment>> {
    let (&first, _) = labels.split_first().ok_or(Error::EmptyEpisode)?;
    let mut out = Vec::new();
    let mut current = Segment {
        label: first,
        start: 0,
        end: 0,
    };
    for (t, &l) in labels.iter().enumerate().skip(1) {
        if l == current.label {
            current.end = t;
        } else {
            out.push(current);
            current = Segment {
                label: l,
                start: t,
                end: t,
            };
        }
    }
    out.push(current);
    Ok(out)
}

/// Inverse of [`segments_of`].
pub fn labels_from_segments(segments: &[Segment]) -> Vec<usize> {
    let mut out = Vec::with_capacity(segments.last().map_or(0, |s| s.end + 1));
    for s in segments {
        out.extend(std::iter::repeat_n(s.label, s.len()));
    }
    out
}

/// Collapse one labeling into the symbol sequence of its episode.
pub fn skill_sequence(labels: &FrameLabeling, episode_id: usize) -> Result<SkillSequence> {
    Ok(SkillSequence {
        symbols: run_length_collapse(labels)?,
        episode_id,
    })
}

/// Zero-mean, unit-variance features per dimension, pooled over every frame
/// of every episode. Population standard deviation; constant dimensions map to 0.
pub fn standardize_features(dataset: &Dataset) -> Dataset {
    let dim = dataset.dim();
    let total = dataset.total_frames() as f64;
    let mut mean = ndarray::Array1::<f64>::zeros(dim);
    for ep in dataset.episodes() {
        mean += &ep.features().sum_axis(Axis(0));
    }
    mean /= total;
    let mut var = ndarray::Array1::<f64>::zeros(dim);
    for ep in dataset.episodes() {
        for row in ep.features().rows() {
            for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
    }
    var /= total;
    let scale = var.mapv(|v| {
        let sd = v.sqrt();
        if sd > 1e-12 {
            1.0 / sd
        } else {
            0.0
        }
    });
    let episodes = dataset
        .episodes()
        .iter()
        .map(|ep| {
            let mut f = ep.features().to_owned();
            for mut row in f.rows_mut() {
                for ((x, &m), &s) in row.iter_mut().zip(&mean).zip(&scale) {
                    *x = (*x - m) * s;
                }
            }
            FeatureTrajectory {
                features: f,
                episode_id: ep.episode_id(),
            }
        })
        .collect();
    Dataset {
        episodes,
        dim,
        ground_truth: dataset.ground_truth.clone(),
    }
}
