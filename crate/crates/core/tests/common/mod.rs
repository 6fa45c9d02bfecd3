//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

/// Every one-to-one partial matching that fully matches the smaller side,
/// as `pred → truth` vectors.
pub fn full_matchings(n_pred: usize, n_truth: usize) -> Vec<Vec<Option<usize>>> {
    fn go(
        p: usize,
        n_pred: usize,
        n_truth: usize,
        cur: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        if p == n_pred {
            let matched = cur.iter().flatten().count();
            if matched == n_pred.min(n_truth) {
                out.push(cur.clone());
            }
            return;
        }
        for g in 0..n_truth {
            if !used[g] {
                used[g] = true;
                cur.push(Some(g));
                go(p + 1, n_pred, n_truth, cur, used, out);
                cur.pop();
                used[g] = false;
            }
        }
        cur.push(None);
        go(p + 1, n_pred, n_truth, cur, used, out);
        cur.pop();
    }
    let mut out = Vec::new();
    go(0, n_pred, n_truth, &mut Vec::new(), &mut vec![false; n_truth], &mut out);
    out
}

fn pairs(m: &[Option<usize>]) -> Vec<(usize, usize)> {
    m.iter()
        .enumerate()
        .filter_map(|(p, g)| g.map(|g| (p, g)))
        .collect()
}

/// Maximum total weight, and the optimal matching with the lexicographically
/// smallest pair list.
pub fn brute_force_matching(weights: &[Vec<u64>]) -> (u64, Vec<Option<usize>>) {
    let n_pred = weights.len();
    let n_truth = weights.first().map_or(0, Vec::len);
    let mut best: Option<(u64, Vec<Option<usize>>)> = None;
    for m in full_matchings(n_pred, n_truth) {
        let total: u64 = pairs(&m).iter().map(|&(p, g)| weights[p][g]).sum();
        let better = match &best {
            None => true,
            Some((bt, bm)) => total > *bt || (total == *bt && pairs(&m) < pairs(bm)),
        };
        if better {
            best = Some((total, m));
        }
    }
    best.expect("at least one matching")
}

pub fn counts(pred: &[Vec<usize>], truth: &[Vec<usize>], n_pred: usize, n_truth: usize) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; n_truth]; n_pred];
    for (p, t) in pred.iter().zip(truth) {
        for (&a, &b) in p.iter().zip(t) {
            c[a][b] += 1;
        }
    }
    c
}

type Frame = (usize, usize);

fn frames_where(eps: &[Vec<usize>], f: impl Fn(usize) -> bool) -> BTreeSet<Frame> {
    eps.iter()
        .enumerate()
        .flat_map(|(e, l)| l.iter().enumerate().map(move |(t, &x)| ((e, t), x)))
        .filter(|&(_, x)| f(x))
        .map(|(ft, _)| ft)
        .collect()
}

pub fn oracle_mof(pred: &[Vec<usize>], truth: &[Vec<usize>], m: &[Option<usize>]) -> f64 {
    let all = frames_where(truth, |_| true);
    let mut hits = 0;
    for g in 0..=truth.iter().flatten().copied().max().unwrap_or(0) {
        let t = frames_where(truth, |x| x == g);
        let p = frames_where(pred, |x| m.get(x).copied().flatten() == Some(g));
        hits += t.intersection(&p).count();
    }
    hits as f64 / all.len() as f64
}

pub fn oracle_miou(pred: &[Vec<usize>], truth: &[Vec<usize>], m: &[Option<usize>], n_truth: usize) -> f64 {
    let mut ious = Vec::new();
    for g in 0..n_truth {
        let t = frames_where(truth, |x| x == g);
        let p = frames_where(pred, |x| m.get(x).copied().flatten() == Some(g));
        let union: BTreeSet<_> = t.union(&p).collect();
        if union.is_empty() {
            continue;
        }
        ious.push(t.intersection(&p).count() as f64 / union.len() as f64);
    }
    if ious.is_empty() {
        0.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    }
}

/// Maximal runs as (label, frame set).
pub fn runs(labels: &[usize]) -> Vec<(usize, BTreeSet<usize>)> {
    let mut out: Vec<(usize, BTreeSet<usize>)> = Vec::new();
    for (t, &l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some((last, set)) if *last == l => {
                set.insert(t);
            }
            _ => out.push((l, BTreeSet::from([t]))),
        }
    }
    out
}

pub fn oracle_f1(pred: &[Vec<usize>], truth: &[Vec<usize>], m: &[Option<usize>]) -> f64 {
    let (mut tp, mut np, mut nt) = (0usize, 0usize, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        let ps = runs(p);
        let ts = runs(t);
        np += ps.len();
        nt += ts.len();
        let mut claimed = vec![false; ts.len()];
        for (pl, pset) in &ps {
            let Some(target) = m.get(*pl).copied().flatten() else {
                continue;
            };
            for (j, (tl, tset)) in ts.iter().enumerate() {
                if claimed[j] || *tl != target {
                    continue;
                }
                let inter = pset.intersection(tset).count() as f64;
                let union = pset.union(tset).count() as f64;
                if inter / union > 0.5 {
                    claimed[j] = true;
                    tp += 1;
                    break;
                }
            }
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / np as f64;
    let recall = tp as f64 / nt as f64;
    2.0 * precision * recall / (precision + recall)
}

/// `[mof_per, mof_full, f1_per, f1_full, miou_per, miou_full, avg_miou]`
pub fn oracle_report(pred: &[Vec<usize>], truth: &[Vec<usize>], n_pred: usize, n_truth: usize) -> [f64; 7] {
    let (_, global) = brute_force_matching(&counts(pred, truth, n_pred, n_truth));
    let full = [
        oracle_mof(pred, truth, &global),
        oracle_f1(pred, truth, &global),
        oracle_miou(pred, truth, &global, n_truth),
    ];
    let mut per = [0.0; 3];
    for i in 0..pred.len() {
        let (p, t) = (&pred[i..=i], &truth[i..=i]);
        let (_, local) = brute_force_matching(&counts(p, t, n_pred, n_truth));
        per[0] += oracle_mof(p, t, &local);
        per[1] += oracle_f1(p, t, &local);
        per[2] += oracle_miou(p, t, &local, n_truth);
    }
    let n = pred.len() as f64;
    let per = per.map(|v| v / n);
    [
        per[0],
        full[0],
        per[1],
        full[1],
        per[2],
        full[2],
        (per[2] + full[2]) / 2.0,
    ]
}
