//! The command-line operations, usable as a library. Each writes its
//! artifacts to disk and returns a short summary for the caller to print.
//!
//! Files written by these functions depend only on the inputs and the seed.
//! Wall time is reported in the returned summaries, never in files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{evaluate_segmentation, hierarchy_from_labels, SegMetricsReport, TreeMetricsReport};
use crate::grammar::{to_dot, Grammar};
use crate::io::{self, Manifest, MANIFEST_FILE};
use crate::model::{EpisodeTree, FrameLabeling};
use crate::ot::{segment_dataset, SolverConfig};
use crate::synth::{generate, SynthSpec};

pub const RUN_FILE: &str = "run.toml";
pub const GRAMMAR_FILE: &str = "grammar.txt";
pub const SUMMARY_FILE: &str = "summary.toml";

/// Settings shared by the segmenting commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides the config's seed.
    pub seed: Option<u64>,
    /// Worker threads for episode-parallel stages.
    pub threads: usize,
    /// Also write one DOT file per episode tree.
    pub dot: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: None,
            threads: 1,
            dot: false,
        }
    }
}

/// Config from a file, or the defaults, with the seed override applied.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SolverConfig> {
    let mut cfg = match path {
        Some(p) => SolverConfig::load(p)?,
        None => SolverConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return Err(Error::invalid("threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(f)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSummary {
    pub episodes: usize,
    pub frames: usize,
}

impl fmt::Display for SynthSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "episodes = {}\nframes = {}", self.episodes, self.frames)
    }
}

/// Generate a synthetic dataset into `out_dir`.
pub fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<SynthSummary> {
    let mut spec = SynthSpec::load(spec_path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let out = generate(&spec)?;
    let names = (0..spec.k_skills).map(|k| format!("skill_{k}")).collect();
    io::save_dataset(out_dir, &out.dataset, Some(names))?;
    write_text(&out_dir.join("synth.toml"), &spec.to_toml_string())?;
    Ok(SynthSummary {
        episodes: out.dataset.len(),
        frames: out.dataset.total_frames(),
    })
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord<'a> {
    episodes: usize,
    frames: usize,
    seed: u64,
    config: &'a SolverConfig,
}

#[derive(Debug, Clone)]
pub struct SegmentSummary {
    pub episodes: usize,
    pub frames: usize,
    pub seed: u64,
    pub labels: Vec<FrameLabeling>,
    pub elapsed: Duration,
}

impl fmt::Display for SegmentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "episodes = {}\nframes = {}\nseed = {}\nwall_time_s = {:.3}",
            self.episodes,
            self.frames,
            self.seed,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Fit prototypes on the dataset and write one label file per episode plus
/// a run record to `out_dir`.
pub fn cmd_segment(
    dataset_dir: &Path,
    config: Option<&Path>,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<SegmentSummary> {
    let started = Instant::now();
    let cfg = load_config(config, opts.seed)?;
    let (dataset, _) = io::load_dataset(dataset_dir)?;
    log::info!(
        "segmenting {} episodes ({} frames) into {} skills",
        dataset.len(),
        dataset.total_frames(),
        cfg.k_skills
    );
    let seg = with_threads(opts.threads, || segment_dataset(&dataset, &cfg))?;
    io::write_label_dir(out_dir, &seg.labels)?;
    let record = RunRecord {
        episodes: dataset.len(),
        frames: dataset.total_frames(),
        seed: cfg.seed,
        config: &cfg,
    };
    write_text(
        &out_dir.join(RUN_FILE),
        &toml::to_string(&record).expect("run record serializes"),
    )?;
    Ok(SegmentSummary {
        episodes: record.episodes,
        frames: record.frames,
        seed: cfg.seed,
        labels: seg.labels,
        elapsed: started.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InduceSummary {
    pub episodes: usize,
    pub rules: usize,
    pub grammar_size: usize,
    pub unique_trees: usize,
}

impl fmt::Display for InduceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "episodes = {}\nrules = {}\ngrammar_size = {}\nunique_trees = {}",
            self.episodes, self.rules, self.grammar_size, self.unique_trees
        )
    }
}

fn skill_names_near(dir: &Path) -> Option<Vec<String>> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return None;
    }
    Manifest::load(dir).ok().and_then(|(m, _)| m.skill_names)
}

fn write_hierarchy(
    grammar: &Grammar,
    trees: &[EpisodeTree],
    grammar_path: &Path,
    dot_dir: Option<&Path>,
    names: Option<&[String]>,
) -> Result<()> {
    if let Some(parent) = grammar_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_text(grammar_path, &grammar.to_text())?;
    if let Some(dir) = dot_dir {
        create_dir(dir)?;
        for (i, tree) in trees.iter().enumerate() {
            write_text(&dir.join(format!("{}.dot", io::episode_stem(i))), &to_dot(tree, names))?;
        }
    }
    Ok(())
}

fn induce_labels(labels: &[FrameLabeling]) -> Result<(Grammar, Vec<EpisodeTree>, InduceSummary)> {
    let (grammar, trees) = hierarchy_from_labels(labels)?;
    let summary = InduceSummary {
        episodes: trees.len(),
        rules: grammar.rules.len(),
        grammar_size: grammar.size(),
        unique_trees: crate::eval::unique_tree_count(&trees),
    };
    Ok((grammar, trees, summary))
}

/// Induce a grammar from a directory of label files.
pub fn cmd_induce(labels_dir: &Path, grammar_path: &Path, dot_dir: Option<&Path>) -> Result<InduceSummary> {
    let labels = io::read_label_dir(labels_dir)?;
    let (grammar, trees, summary) = induce_labels(&labels)?;
    let names = skill_names_near(labels_dir);
    write_hierarchy(&grammar, &trees, grammar_path, dot_dir, names.as_deref())?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Seg,
    Tree,
    Both,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seg" => Ok(EvalMode::Seg),
            "tree" => Ok(EvalMode::Tree),
            "both" => Ok(EvalMode::Both),
            other => Err(Error::invalid(format!("unknown eval mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeComparison {
    pub truth: TreeMetricsReport,
    pub predicted: TreeMetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub segmentation: Option<SegMetricsReport>,
    pub trees: Option<TreeComparison>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = &self.segmentation {
            write!(f, "{}", s.to_table())?;
        }
        if let Some(t) = &self.trees {
            if self.segmentation.is_some() {
                writeln!(f)?;
            }
            write!(
                f,
                "{}",
                TreeMetricsReport::table(&[("Truth", &t.truth), ("Predicted", &t.predicted)])
            )?;
        }
        Ok(())
    }
}

/// Truth labels from a dataset directory, a manifest file or a label directory.
pub fn load_truth(path: &Path) -> Result<Vec<FrameLabeling>> {
    let is_manifest = path.join(MANIFEST_FILE).is_file()
        || (path.is_file() && path.extension().is_some_and(|e| e == "toml"));
    if is_manifest {
        let (manifest, root) = Manifest::load(path)?;
        manifest
            .read_truth(&root)?
            .ok_or_else(|| Error::invalid(format!("{} has no truth labels", path.display())))
    } else {
        io::read_label_dir(path)
    }
}

pub fn evaluate(pred: &[FrameLabeling], truth: &[FrameLabeling], mode: EvalMode) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predicted episodes but {} truth episodes",
            pred.len(),
            truth.len()
        )));
    }
    let segmentation = match mode {
        EvalMode::Seg | EvalMode::Both => Some(evaluate_segmentation(pred, truth)?),
        EvalMode::Tree => None,
    };
    let trees = match mode {
        EvalMode::Tree | EvalMode::Both => {
            let (_, truth_trees) = crate::eval::ground_truth_hierarchy(truth)?;
            let (_, pred_trees) = hierarchy_from_labels(pred)?;
            Some(TreeComparison {
                truth: TreeMetricsReport::from_trees(&truth_trees),
                predicted: TreeMetricsReport::from_trees(&pred_trees),
            })
        }
        EvalMode::Seg => None,
    };
    Ok(EvalReport { segmentation, trees })
}

pub fn cmd_eval(pred_dir: &Path, truth: &Path, mode: EvalMode) -> Result<EvalReport> {
    let pred = io::read_label_dir(pred_dir)?;
    let truth = load_truth(truth)?;
    evaluate(&pred, &truth, mode)
}

#[derive(Debug, Clone, Serialize)]
struct PipelineRecord<'a> {
    episodes: usize,
    frames: usize,
    seed: u64,
    grammar: &'a InduceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    segmentation: Option<SegMetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trees: Option<TreeComparison>,
    config: &'a SolverConfig,
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub segment: SegmentSummary,
    pub grammar: InduceSummary,
    pub eval: Option<EvalReport>,
    pub summary_path: PathBuf,
    pub elapsed: Duration,
}

impl fmt::Display for PipelineSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.grammar)?;
        if let Some(e) = &self.eval {
            write!(f, "{e}")?;
        }
        write!(
            f,
            "summary = {}\nwall_time_s = {:.3}",
            self.summary_path.display(),
            self.elapsed.as_secs_f64()
        )
    }
}

/// Segment, induce and (when truth labels exist) evaluate in one run.
///
/// Layout of `out_dir`: `labels/` with one file per episode and the run
/// record, `grammar.txt`, optional `trees/*.dot`, and `summary.toml`.
pub fn cmd_pipeline(
    dataset_dir: &Path,
    config: Option<&Path>,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<PipelineSummary> {
    let started = Instant::now();
    let cfg = load_config(config, opts.seed)?;
    let (_, manifest) = io::load_dataset(dataset_dir)?;
    create_dir(out_dir)?;

    let segment = cmd_segment(dataset_dir, config, &out_dir.join("labels"), opts)?;
    let (grammar, trees, grammar_summary) = induce_labels(&segment.labels)?;
    let dot_dir = out_dir.join("trees");
    write_hierarchy(
        &grammar,
        &trees,
        &out_dir.join(GRAMMAR_FILE),
        opts.dot.then_some(dot_dir.as_path()),
        manifest.skill_names.as_deref(),
    )?;

    let (_, root) = Manifest::load(dataset_dir)?;
    let eval = match manifest.read_truth(&root)? {
        Some(truth) => Some(evaluate(&segment.labels, &truth, EvalMode::Both)?),
        None => None,
    };
    let record = PipelineRecord {
        episodes: segment.episodes,
        frames: segment.frames,
        seed: cfg.seed,
        grammar: &grammar_summary,
        segmentation: eval.and_then(|e| e.segmentation),
        trees: eval.and_then(|e| e.trees),
        config: &cfg,
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_text(
        &summary_path,
        &toml::to_string(&record).expect("summary serializes"),
    )?;
    Ok(PipelineSummary {
        segment,
        grammar: grammar_summary,
        eval,
        summary_path,
        elapsed: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(rows: &[&[usize]]) -> Vec<FrameLabeling> {
        rows.iter().map(|r| FrameLabeling::from_labels(r.to_vec())).collect()
    }

    #[test]
    fn identical_prediction_scores_one() {
        let truth = labels(&[&[0, 0, 1, 1, 0, 1], &[0, 1, 1, 0, 1]]);
        let r = evaluate(&truth, &truth, EvalMode::Both).unwrap();
        let s = r.segmentation.unwrap();
        for v in [s.mof_per, s.mof_full, s.f1_per, s.f1_full, s.miou_per, s.miou_full, s.avg_miou] {
            assert_eq!(v, 1.0);
        }
        let t = r.trees.unwrap();
        assert_eq!(t.truth, t.predicted);
        assert_eq!(t.truth.unique_trees, 1);
    }

    #[test]
    fn misaligned_episodes_fail() {
        let a = labels(&[&[0, 1]]);
        let b = labels(&[&[0, 1], &[1]]);
        assert!(evaluate(&a, &b, EvalMode::Seg).is_err());
        assert!(evaluate(&a, &labels(&[&[0, 1, 1]]), EvalMode::Seg).is_err());
    }

    #[test]
    fn eval_modes_parse() {
        assert_eq!("seg".parse::<EvalMode>().unwrap(), EvalMode::Seg);
        assert_eq!("both".parse::<EvalMode>().unwrap(), EvalMode::Both);
        assert!("all".parse::<EvalMode>().is_err());
    }

    #[test]
    fn induce_writes_grammar_and_dots() {
        let dir = tempfile::tempdir().unwrap();
        let lab = dir.path().join("labels");
        io::write_label_dir(&lab, &labels(&[&[0, 0, 1, 0, 1], &[0, 1, 0, 1, 1]])).unwrap();
        let g = dir.path().join("g.txt");
        let dots = dir.path().join("dots");
        let s = cmd_induce(&lab, &g, Some(&dots)).unwrap();
        assert_eq!(s.episodes, 2);
        assert_eq!(s.unique_trees, 1);
        assert!(fs::read_to_string(&g).unwrap().starts_with("S0 -> "));
        assert!(dots.join("ep_00001.dot").is_file());
    }

    #[test]
    fn single_episode_grammar_is_terminal() {
        let dir = tempfile::tempdir().unwrap();
        io::write_label_dir(dir.path(), &labels(&[&[0, 0, 0]])).unwrap();
        let g = dir.path().join("g.txt");
        cmd_induce(dir.path(), &g, None).unwrap();
        assert_eq!(fs::read_to_string(&g).unwrap(), "S0 -> t0\n");
    }

    #[test]
    fn seed_override_applies() {
        assert_eq!(load_config(None, Some(9)).unwrap().seed, 9);
        assert!(matches!(
            load_config(Some(Path::new("/nonexistent/cfg.toml")), None),
            Err(Error::Io { .. })
        ));
    }
}
