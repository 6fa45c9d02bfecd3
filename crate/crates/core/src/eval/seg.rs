//! Frame- and segment-level scores under a cluster-to-class mapping.

use serde::{Deserialize, Serialize};

use super::hungarian::{hungarian, Mapping};
use crate::error::{Error, Result};
use crate::model::{segments_of, FrameLabeling, Segment};

/// Frame co-occurrence counts, predicted clusters × truth classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyMatrix {
    counts: Vec<Vec<u64>>,
    n_truth: usize,
}

impl ContingencyMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n_truth = counts.first().map_or(0, Vec::len);
        if counts.is_empty() || n_truth == 0 {
            return Err(Error::invalid("contingency matrix must be non-empty"));
        }
        if counts.iter().any(|r| r.len() != n_truth) {
            return Err(Error::invalid("ragged contingency matrix"));
        }
        Ok(Self { counts, n_truth })
    }

    pub fn n_pred(&self) -> usize {
        self.counts.len()
    }

    pub fn n_truth(&self) -> usize {
        self.n_truth
    }

    pub fn get(&self, pred: usize, truth: usize) -> u64 {
        self.counts[pred][truth]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }
}

fn check_aligned(pred: &[FrameLabeling], truth: &[FrameLabeling]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predicted episodes vs {} truth episodes",
            pred.len(),
            truth.len()
        )));
    }
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != t.len() {
            return Err(Error::invalid(format!(
                "episode {i}: {} predicted frames vs {} truth frames",
                p.len(),
                t.len()
            )));
        }
    }
    Ok(())
}

/// Counts summed over the given episodes.
pub fn contingency(pred: &[FrameLabeling], truth: &[FrameLabeling]) -> Result<ContingencyMatrix> {
    check_aligned(pred, truth)?;
    let n_pred = pred.iter().map(FrameLabeling::k_skills).max().unwrap_or(1);
    let n_truth = truth.iter().map(FrameLabeling::k_skills).max().unwrap_or(1);
    let mut counts = vec![vec![0u64; n_truth]; n_pred];
    for (p, t) in pred.iter().zip(truth) {
        for (&a, &b) in p.labels().iter().zip(t.labels()) {
            counts[a][b] += 1;
        }
    }
    ContingencyMatrix::from_counts(counts)
}

fn mapped<'a>(
    pred: &'a FrameLabeling,
    mapping: &'a Mapping,
) -> impl Iterator<Item = Option<usize>> + 'a {
    pred.labels().iter().map(|&p| mapping.get(p))
}

/// Fraction of frames whose mapped prediction equals the truth.
pub fn mof(pred: &[FrameLabeling], truth: &[FrameLabeling], mapping: &Mapping) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        for (m, &g) in mapped(p, mapping).zip(t.labels()) {
            hit += usize::from(m == Some(g));
            total += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Mean over truth classes of frame-set IoU; classes absent on both sides are skipped.
pub fn miou(pred: &[FrameLabeling], truth: &[FrameLabeling], mapping: &Mapping) -> f64 {
    let n_classes = truth.iter().map(FrameLabeling::k_skills).max().unwrap_or(0);
    let mut inter = vec![0usize; n_classes];
    let mut truth_n = vec![0usize; n_classes];
    let mut pred_n = vec![0usize; n_classes];
    for (p, t) in pred.iter().zip(truth) {
        for (m, &g) in mapped(p, mapping).zip(t.labels()) {
            truth_n[g] += 1;
            if let Some(m) = m.filter(|&m| m < n_classes) {
                pred_n[m] += 1;
                inter[m] += usize::from(m == g);
            }
        }
    }
    let ious: Vec<f64> = (0..n_classes)
        .filter_map(|c| {
            let union = truth_n[c] + pred_n[c] - inter[c];
            (union > 0).then(|| inter[c] as f64 / union as f64)
        })
        .collect();
    if ious.is_empty() {
        0.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

/// True-positive, predicted and truth segment counts for one episode.
fn segment_matches(pred: &[Segment], truth: &[Segment], mapping: &Mapping) -> (usize, usize, usize) {
    let mut claimed = vec![false; truth.len()];
    let mut tp = 0;
    for ps in pred {
        let Some(label) = mapping.get(ps.label) else {
            continue;
        };
        for (j, ts) in truth.iter().enumerate() {
            if claimed[j] || ts.label != label {
                continue;
            }
            let lo = ps.start.max(ts.start);
            let hi = ps.end.min(ts.end);
            let inter = if hi >= lo { hi - lo + 1 } else { 0 };
            let union = ps.len() + ts.len() - inter;
            // IoU > 1/2, exactly
            if 2 * inter > union {
                claimed[j] = true;
                tp += 1;
                break;
            }
        }
    }
    (tp, pred.len(), truth.len())
}

fn f1_from_counts(tp: usize, n_pred: usize, n_truth: usize) -> f64 {
    if tp == 0 || n_pred == 0 || n_truth == 0 {
        return 0.0;
    }
    let precision = tp as f64 / n_pred as f64;
    let recall = tp as f64 / n_truth as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Segment F1 with a strict 50% IoU threshold, pooled over the given episodes.
/// Predicted segments are matched greedily in temporal order.
pub fn f1_at_50(pred: &[Vec<Segment>], truth: &[Vec<Segment>], mapping: &Mapping) -> f64 {
    let (mut tp, mut np, mut nt) = (0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        let (a, b, c) = segment_matches(p, t, mapping);
        tp += a;
        np += b;
        nt += c;
    }
    f1_from_counts(tp, np, nt)
}

/// Segmentation scores under per-episode and global alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegMetricsReport {
    pub mof_per: f64,
    pub mof_full: f64,
    pub f1_per: f64,
    pub f1_full: f64,
    pub miou_per: f64,
    pub miou_full: f64,
    pub avg_miou: f64,
}

impl SegMetricsReport {
    /// Fills in `avg_miou` as the mean of the per-episode and global mIoU.
    pub fn new(mof: (f64, f64), f1: (f64, f64), miou: (f64, f64)) -> Self {
        Self {
            mof_per: mof.0,
            mof_full: mof.1,
            f1_per: f1.0,
            f1_full: f1.1,
            miou_per: miou.0,
            miou_full: miou.1,
            avg_miou: (miou.0 + miou.1) / 2.0,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "avg_miou = {:.6}\nf1_per = {:.6}\nf1_full = {:.6}\nmiou_per = {:.6}\nmiou_full = {:.6}\nmof_per = {:.6}\nmof_full = {:.6}\n",
            self.avg_miou, self.f1_per, self.f1_full, self.miou_per, self.miou_full, self.mof_per, self.mof_full
        )
    }

    /// Percent table: Avg. mIoU, F1, mIoU, MoF.
    pub fn to_table(&self) -> String {
        let pct = |v: f64| format!("{:.1}%", 100.0 * v);
        let header = ["Avg. mIoU", "F1 Per", "F1 Full", "mIoU Per", "mIoU Full", "MoF Per", "MoF Full"];
        let values = [
            self.avg_miou,
            self.f1_per,
            self.f1_full,
            self.miou_per,
            self.miou_full,
            self.mof_per,
            self.mof_full,
        ];
        let mut out = String::new();
        for h in header {
            out.push_str(&format!("{h:>10} "));
        }
        out.push('\n');
        for v in values {
            out.push_str(&format!("{:>10} ", pct(v)));
        }
        out.push('\n');
        out
    }
}

/// Global ("Full") scores under one dataset-wide Hungarian mapping and
/// per-episode ("Per") scores under a fresh mapping per episode, averaged
/// uniformly over episodes.
pub fn evaluate_segmentation(pred: &[FrameLabeling], truth: &[FrameLabeling]) -> Result<SegMetricsReport> {
    check_aligned(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::invalid("no episodes to evaluate"));
    }
    let pred_segs = pred.iter().map(segments_of).collect::<Result<Vec<_>>>()?;
    let truth_segs = truth.iter().map(segments_of).collect::<Result<Vec<_>>>()?;

    let global = hungarian(&contingency(pred, truth)?);
    let full = (
        mof(pred, truth, &global),
        f1_at_50(&pred_segs, &truth_segs, &global),
        miou(pred, truth, &global),
    );

    let mut per = (0.0, 0.0, 0.0);
    for i in 0..pred.len() {
        let (p, t) = (&pred[i..=i], &truth[i..=i]);
        let local = hungarian(&contingency(p, t)?);
        per.0 += mof(p, t, &local);
        per.1 += f1_at_50(&pred_segs[i..=i], &truth_segs[i..=i], &local);
        per.2 += miou(p, t, &local);
    }
    let n = pred.len() as f64;
    Ok(SegMetricsReport::new(
        (per.0 / n, full.0),
        (per.1 / n, full.1),
        (per.2 / n, full.2),
    ))
}
