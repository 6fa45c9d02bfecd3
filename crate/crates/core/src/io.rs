//! On-disk formats: binary feature files, plain-text label files and the
//! dataset manifest.
//!
//! A feature file is a 16-byte header (`HISD`, then little-endian `u32`
//! version, frame count and dimension) followed by row-major little-endian
//! `f32` values. A label file holds one decimal skill id per line.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, FeatureTrajectory, FrameLabeling};

pub const MAGIC: &[u8; 4] = b"HISD";
pub const VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const LABELS_EXT: &str = "labels";

/// `ep_00042`
pub fn episode_stem(index: usize) -> String {
    format!("ep_{index:05}")
}

pub fn write_features(path: &Path, features: &Array2<f64>) -> Result<()> {
    let (n, d) = features.dim();
    let mut bytes = Vec::with_capacity(16 + 4 * n * d);
    bytes.extend_from_slice(MAGIC);
    for v in [VERSION, n as u32, d as u32] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for &x in features.iter() {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "missing HISD header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != VERSION {
        return Err(Error::format(path, format!("unsupported version {}", word(4))));
    }
    let (n, d) = (word(8) as usize, word(12) as usize);
    if bytes.len() != 16 + 4 * n * d {
        return Err(Error::format(
            path,
            format!("expected {} payload bytes, found {}", 4 * n * d, bytes.len() - 16),
        ));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Array2::from_shape_vec((n, d), values).expect("size checked"))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: not a skill id: {l:?}", i + 1)))
        })
        .collect()
}

/// Every `*.labels` file in a directory, in file-name order.
pub fn label_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == LABELS_EXT) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Read a directory of label files. Episodes must be non-empty; the skill
/// count is shared across episodes.
pub fn read_label_dir(dir: &Path) -> Result<Vec<FrameLabeling>> {
    let files = label_files(dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no .{LABELS_EXT} files in {}", dir.display())));
    }
    let raw = files
        .iter()
        .map(|p| read_labels(p))
        .collect::<Result<Vec<_>>>()?;
    labelings(raw, None)
}

pub fn write_label_dir(dir: &Path, labels: &[FrameLabeling]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, l) in labels.iter().enumerate() {
        write_labels(&dir.join(format!("{}.{LABELS_EXT}", episode_stem(i))), l.labels())?;
    }
    Ok(())
}

fn labelings(raw: Vec<Vec<usize>>, k: Option<usize>) -> Result<Vec<FrameLabeling>> {
    if raw.iter().any(Vec::is_empty) {
        return Err(Error::EmptyEpisode);
    }
    let seen = raw.iter().flatten().max().map_or(1, |m| m + 1);
    let k = k.unwrap_or(seen);
    raw.into_iter().map(|l| FrameLabeling::new(l, k)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub features_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    pub n_frames: usize,
}

/// `manifest.toml`: paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skill_names: Option<Vec<String>>,
    pub episodes: Vec<EpisodeRecord>,
}

impl Manifest {
    /// Load from a dataset directory or directly from a manifest file.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| Error::format(&file, e.message()))?;
        let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, root))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Truth labels, present only when every episode lists a label file.
    pub fn read_truth(&self, root: &Path) -> Result<Option<Vec<FrameLabeling>>> {
        let Some(paths) = self
            .episodes
            .iter()
            .map(|e| e.labels_path.as_ref())
            .collect::<Option<Vec<_>>>()
        else {
            return Ok(None);
        };
        let mut raw = Vec::with_capacity(paths.len());
        for (p, rec) in paths.iter().zip(&self.episodes) {
            let full = root.join(p);
            let l = read_labels(&full)?;
            if l.len() != rec.n_frames {
                return Err(Error::format(
                    full,
                    format!("{} labels for {} frames", l.len(), rec.n_frames),
                ));
            }
            raw.push(l);
        }
        let k = self.skill_names.as_ref().map(Vec::len).filter(|&k| k > 0);
        labelings(raw, k).map(Some)
    }
}

/// Load a dataset directory (or manifest file), checking headers against the manifest.
pub fn load_dataset(path: &Path) -> Result<(Dataset, Manifest)> {
    let (manifest, root) = Manifest::load(path)?;
    if manifest.episodes.is_empty() {
        return Err(Error::invalid("manifest lists no episodes"));
    }
    let mut episodes = Vec::with_capacity(manifest.episodes.len());
    for (i, rec) in manifest.episodes.iter().enumerate() {
        let full = root.join(&rec.features_path);
        let features = read_features(&full)?;
        if features.nrows() != rec.n_frames {
            return Err(Error::format(
                full,
                format!("header has {} frames, manifest {}", features.nrows(), rec.n_frames),
            ));
        }
        if features.ncols() != manifest.dim {
            return Err(Error::DimensionMismatch {
                expected: manifest.dim,
                found: features.ncols(),
            });
        }
        episodes.push(FeatureTrajectory::new(features, i)?);
    }
    let truth = manifest.read_truth(&root)?;
    Ok((Dataset::new(episodes, truth)?, manifest))
}

/// Write feature files, label files (when truth exists) and the manifest.
pub fn save_dataset(dir: &Path, dataset: &Dataset, skill_names: Option<Vec<String>>) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let truth = dataset.ground_truth();
    let mut records = Vec::with_capacity(dataset.len());
    for (i, ep) in dataset.episodes().iter().enumerate() {
        let stem = episode_stem(i);
        let features_path = PathBuf::from(format!("{stem}.feat"));
        write_features(&dir.join(&features_path), &ep.features().to_owned())?;
        let labels_path = match truth {
            Some(t) => {
                let p = PathBuf::from(format!("{stem}.{LABELS_EXT}"));
                write_labels(&dir.join(&p), t[i].labels())?;
                Some(p)
            }
            None => None,
        };
        records.push(EpisodeRecord {
            features_path,
            labels_path,
            n_frames: ep.n_frames(),
        });
    }
    let manifest = Manifest {
        dim: dataset.dim(),
        skill_names,
        episodes: records,
    };
    manifest.save(dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn feature_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.feat");
        write_features(&p, &array![[1.0, 2.0, 3.0], [4.0, 5.0, 0.5]]).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(&bytes[..4], b"HISD");
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(read_features(&p).unwrap(), array![[1.0, 2.0, 3.0], [4.0, 5.0, 0.5]]);
    }

    #[test]
    fn rejects_bad_feature_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.feat");
        fs::write(&p, b"NOPE").unwrap();
        assert!(matches!(read_features(&p), Err(Error::Format { .. })));
        let mut bytes = b"HISD".to_vec();
        for v in [1u32, 2, 2] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0; 8]);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_features(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn label_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.labels");
        write_labels(&p, &[0, 0, 2, 1]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "0\n0\n2\n1\n");
        assert_eq!(read_labels(&p).unwrap(), vec![0, 0, 2, 1]);
        fs::write(&p, "0\nx\n").unwrap();
        assert!(read_labels(&p).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let eps = vec![
            FeatureTrajectory::new(array![[1.0, 0.0], [0.0, 1.0]], 0).unwrap(),
            FeatureTrajectory::new(array![[0.5, 0.25]], 1).unwrap(),
        ];
        let truth = vec![
            FrameLabeling::new(vec![0, 1], 3).unwrap(),
            FrameLabeling::new(vec![2], 3).unwrap(),
        ];
        let ds = Dataset::new(eps, Some(truth)).unwrap();
        let names = Some(vec!["a".into(), "b".into(), "c".into()]);
        save_dataset(dir.path(), &ds, names).unwrap();
        let (back, manifest) = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(manifest.episodes[1].n_frames, 1);
        assert_eq!(read_label_dir(dir.path()).unwrap().len(), 2);
    }

    #[test]
    fn manifest_frame_count_must_match_header() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            vec![FeatureTrajectory::new(array![[1.0], [2.0]], 0).unwrap()],
            None,
        )
        .unwrap();
        let mut m = save_dataset(dir.path(), &ds, None).unwrap();
        m.episodes[0].n_frames = 3;
        m.save(dir.path()).unwrap();
        assert!(load_dataset(dir.path()).is_err());
        assert!(matches!(
            load_dataset(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }
}
