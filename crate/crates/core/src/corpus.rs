//! Corpus domain types and their on-disk formats.
//!
//! Files are resolved relative to the manifest's directory:
//!
//! * the manifest, UTF-8 JSON `{version: 1, dim, normalized?, videos: [...]}`;
//! * `.emb` tensor containers: `"IVSM"`, `u32` version, `u32` rows, `u32` cols,
//!   then `rows * cols` little-endian `f32` values in row-major order;
//! * transcripts as JSON lines `{start_s, end_s, text, vec_row}` whose
//!   `vec_row` indexes a companion `.emb` file with the same stem;
//! * score tracks as JSON with run-length-encoded frame labels.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const EMB_MAGIC: [u8; 4] = *b"IVSM";
pub const EMB_VERSION: u32 = 1;
const EMB_HEADER_LEN: u64 = 16;

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_SEGMENT_LEN: usize = 32;
pub const DEFAULT_DIM: usize = 512;

/// Reads an `.emb` tensor container.
pub fn read_emb(path: &Path) -> Result<Array2<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let actual = bytes.len() as u64;
    if actual < EMB_HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_owned(),
            expected: EMB_HEADER_LEN,
            actual,
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != EMB_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_owned(),
            expected: EMB_MAGIC,
            found: magic,
        });
    }
    let version = word(4);
    if version != EMB_VERSION {
        return Err(Error::BadVersion {
            path: path.to_owned(),
            found: version,
        });
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let expected = EMB_HEADER_LEN + (rows as u64) * (cols as u64) * 4;
    if actual < expected {
        return Err(Error::Truncated {
            path: path.to_owned(),
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::TrailingBytes {
            path: path.to_owned(),
            expected,
            actual,
        });
    }
    let data: Vec<f32> = bytes[EMB_HEADER_LEN as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked above"))
}

pub fn write_emb(path: &Path, m: &Array2<f32>) -> Result<()> {
    let (rows, cols) = m.dim();
    let mut buf = Vec::with_capacity(EMB_HEADER_LEN as usize + rows * cols * 4);
    buf.extend_from_slice(&EMB_MAGIC);
    buf.extend_from_slice(&EMB_VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEmbedding {
    pub index: usize,
    /// Half-open frame range `[start_frame, end_frame)`.
    pub start_frame: usize,
    pub end_frame: usize,
    pub vec: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptSentence {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
    pub vec: Vec<f32>,
}

/// A video as fixed-length segment embeddings plus optional frame features
/// and transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedVideo {
    pub video_id: String,
    pub task_id: String,
    pub fps: f64,
    pub n_frames: usize,
    pub segment_len: usize,
    pub segments: Vec<SegmentEmbedding>,
    /// `n_frames x D_f`, only needed for ground-truth localization and the
    /// frame-level baseline.
    pub frame_features: Option<Array2<f32>>,
    pub transcript: Vec<TranscriptSentence>,
}

impl EmbeddedVideo {
    /// Builds a video from an `n_segments x D` matrix, one row per segment.
    pub fn from_segment_matrix(
        video_id: impl Into<String>,
        task_id: impl Into<String>,
        fps: f64,
        n_frames: usize,
        segment_len: usize,
        matrix: &Array2<f32>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if segment_len == 0 {
            return Err(Error::Invalid(format!("video {video_id}: segment_len must be positive")));
        }
        let expected = n_frames / segment_len;
        if matrix.nrows() != expected {
            return Err(Error::Invalid(format!(
                "video {video_id}: {} segment rows but floor({n_frames}/{segment_len}) = {expected}",
                matrix.nrows()
            )));
        }
        let segments = matrix
            .rows()
            .into_iter()
            .enumerate()
            .map(|(index, row)| SegmentEmbedding {
                index,
                start_frame: index * segment_len,
                end_frame: (index + 1) * segment_len,
                vec: row.to_vec(),
            })
            .collect();
        let video = EmbeddedVideo {
            video_id,
            task_id: task_id.into(),
            fps,
            n_frames,
            segment_len,
            segments,
            frame_features: None,
            transcript: Vec::new(),
        };
        video.validate()?;
        Ok(video)
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn dim(&self) -> usize {
        self.segments.first().map_or(0, |s| s.vec.len())
    }

    /// Frames covered by full segments; the tail remainder is never summarized.
    pub fn summarizable_frames(&self) -> usize {
        self.n_segments() * self.segment_len
    }

    /// Segment `i`'s time span `[a, b)` in seconds.
    pub fn segment_span_s(&self, i: usize) -> (f64, f64) {
        let s = &self.segments[i];
        (s.start_frame as f64 / self.fps, s.end_frame as f64 / self.fps)
    }

    pub fn segment_matrix(&self) -> Array2<f32> {
        let dim = self.dim();
        let flat: Vec<f32> = self.segments.iter().flat_map(|s| s.vec.iter().copied()).collect();
        Array2::from_shape_vec((self.n_segments(), dim), flat).expect("uniform dims")
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.video_id;
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Invalid(format!("video {id}: fps must be positive")));
        }
        if self.n_frames == 0 || self.segment_len == 0 {
            return Err(Error::Invalid(format!(
                "video {id}: n_frames and segment_len must be positive"
            )));
        }
        let expected = self.n_frames / self.segment_len;
        if expected == 0 {
            return Err(Error::Invalid(format!(
                "video {id}: {} frames do not fill one {}-frame segment",
                self.n_frames, self.segment_len
            )));
        }
        if self.segments.len() != expected {
            return Err(Error::Invalid(format!(
                "video {id}: {} segments but floor({}/{}) = {expected}",
                self.segments.len(),
                self.n_frames,
                self.segment_len
            )));
        }
        let dim = self.dim();
        for (i, s) in self.segments.iter().enumerate() {
            if s.index != i
                || s.start_frame != i * self.segment_len
                || s.end_frame != s.start_frame + self.segment_len
            {
                return Err(Error::Invalid(format!("video {id}: segment {i} is out of place")));
            }
            if s.vec.len() != dim {
                return Err(Error::DimMismatch {
                    video_id: id.clone(),
                    expected: dim,
                    found: s.vec.len(),
                });
            }
            if s.vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    video_id: id.clone(),
                    what: format!("segment {i}"),
                });
            }
        }
        if let Some(ff) = &self.frame_features {
            if ff.nrows() != self.n_frames {
                return Err(Error::Invalid(format!(
                    "video {id}: {} frame feature rows for {} frames",
                    ff.nrows(),
                    self.n_frames
                )));
            }
            if ff.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    video_id: id.clone(),
                    what: "frame features".into(),
                });
            }
        }
        for (k, s) in self.transcript.iter().enumerate() {
            if !(s.start_s >= 0.0 && s.start_s <= s.end_s) {
                return Err(Error::Invalid(format!(
                    "video {id}: sentence {k} has bad timing [{}, {}]",
                    s.start_s, s.end_s
                )));
            }
            if s.vec.len() != dim {
                return Err(Error::DimMismatch {
                    video_id: id.clone(),
                    expected: dim,
                    found: s.vec.len(),
                });
            }
            if s.vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    video_id: id.clone(),
                    what: format!("sentence {k}"),
                });
            }
        }
        Ok(())
    }
}

/// All videos of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGroup {
    pub task_id: String,
    pub videos: Vec<EmbeddedVideo>,
}

/// Groups videos by `task_id`, keeping first-appearance order of tasks.
pub fn group_by_task(videos: Vec<EmbeddedVideo>) -> Vec<TaskGroup> {
    let mut groups: Vec<TaskGroup> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for v in videos {
        match index.get(&v.task_id) {
            Some(&g) => groups[g].videos.push(v),
            None => {
                index.insert(v.task_id.clone(), groups.len());
                groups.push(TaskGroup {
                    task_id: v.task_id.clone(),
                    videos: vec![v],
                });
            }
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dim: usize,
    /// Whether the upstream extractor already L2-normalized the embeddings.
    /// Similarity stages normalize regardless.
    #[serde(default)]
    pub normalized: bool,
    pub videos: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub task_id: String,
    pub fps: f64,
    pub n_frames: usize,
    pub segment_len: usize,
    pub segments_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_file: Option<PathBuf>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let m: Manifest = read_json(path)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::BadVersion {
                path: path.to_owned(),
                found: m.version,
            });
        }
        Ok(m)
    }
}

fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

/// One JSON line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
    pub vec_row: usize,
}

/// The `.emb` file holding a transcript's sentence vectors.
pub fn transcript_companion(path: &Path) -> PathBuf {
    path.with_extension("emb")
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptSentence>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let vecs = read_emb(&transcript_companion(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: TranscriptLine = serde_json::from_str(&line).map_err(|e| Error::json(path, e))?;
        if l.vec_row >= vecs.nrows() {
            return Err(Error::Invalid(format!(
                "{}: vec_row {} out of range ({} rows)",
                path.display(),
                l.vec_row,
                vecs.nrows()
            )));
        }
        out.push(TranscriptSentence {
            start_s: l.start_s,
            end_s: l.end_s,
            text: l.text,
            vec: vecs.row(l.vec_row).to_vec(),
        });
    }
    Ok(out)
}

pub fn write_transcript(path: &Path, sentences: &[TranscriptSentence], dim: usize) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (row, s) in sentences.iter().enumerate() {
        let line = TranscriptLine {
            start_s: s.start_s,
            end_s: s.end_s,
            text: s.text.clone(),
            vec_row: row,
        };
        let json = serde_json::to_string(&line).map_err(|e| Error::json(path, e))?;
        writeln!(w, "{json}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let flat: Vec<f32> = sentences.iter().flat_map(|s| s.vec.iter().copied()).collect();
    let m = Array2::from_shape_vec((sentences.len(), dim), flat)
        .map_err(|_| Error::Invalid("sentence vectors do not match dim".into()))?;
    write_emb(&transcript_companion(path), &m)
}

fn load_video(entry: &ManifestEntry, dir: &Path, dim: usize) -> Result<EmbeddedVideo> {
    let id = &entry.video_id;
    let seg_path = dir.join(&entry.segments_file);
    let matrix = read_emb(&seg_path)?;
    if matrix.ncols() != dim {
        return Err(Error::DimMismatch {
            video_id: id.clone(),
            expected: dim,
            found: matrix.ncols(),
        });
    }
    let mut video = EmbeddedVideo::from_segment_matrix(
        id.clone(),
        entry.task_id.clone(),
        entry.fps,
        entry.n_frames,
        entry.segment_len,
        &matrix,
    )?;
    if let Some(f) = &entry.frames_file {
        video.frame_features = Some(read_emb(&dir.join(f))?);
    }
    if let Some(t) = &entry.transcript_file {
        video.transcript = read_transcript(&dir.join(t))?;
    }
    video.validate()?;
    Ok(video)
}

/// Loads and validates every video named by the manifest, grouped by task.
pub fn read_corpus(manifest_path: &Path) -> Result<Vec<TaskGroup>> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = base_dir(manifest_path);
    let mut seen = BTreeSet::new();
    let mut videos = Vec::with_capacity(manifest.videos.len());
    for entry in &manifest.videos {
        if !seen.insert(entry.video_id.clone()) {
            return Err(Error::Invalid(format!("duplicate video_id {}", entry.video_id)));
        }
        videos.push(load_video(entry, &dir, manifest.dim)?);
    }
    Ok(group_by_task(videos))
}

/// Writes a corpus as a manifest plus per-video tensor files into `dir`.
/// File names derive from video ids. Returns the manifest path.
pub fn write_corpus(dir: &Path, groups: &[TaskGroup], normalized: bool) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = groups
        .iter()
        .flat_map(|g| &g.videos)
        .map(EmbeddedVideo::dim)
        .next()
        .unwrap_or(0);
    let mut entries = Vec::new();
    for v in groups.iter().flat_map(|g| &g.videos) {
        let segments_file = PathBuf::from(format!("{}.segments.emb", v.video_id));
        write_emb(&dir.join(&segments_file), &v.segment_matrix())?;
        let frames_file = match &v.frame_features {
            Some(ff) => {
                let f = PathBuf::from(format!("{}.frames.emb", v.video_id));
                write_emb(&dir.join(&f), ff)?;
                Some(f)
            }
            None => None,
        };
        let transcript_file = if v.transcript.is_empty() {
            None
        } else {
            let f = PathBuf::from(format!("{}.transcript.jsonl", v.video_id));
            write_transcript(&dir.join(&f), &v.transcript, dim)?;
            Some(f)
        };
        entries.push(ManifestEntry {
            video_id: v.video_id.clone(),
            task_id: v.task_id.clone(),
            fps: v.fps,
            n_frames: v.n_frames,
            segment_len: v.segment_len,
            segments_file,
            frames_file,
            transcript_file,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        dim,
        normalized,
        videos: entries,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Per-segment scores plus per-frame binary labels: the canonical summary
/// representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrack {
    pub video_id: String,
    pub segment_scores: Vec<f32>,
    pub frame_labels: Vec<u8>,
}

impl ScoreTrack {
    /// Expands per-segment selections to frames; tail frames past the last
    /// full segment stay 0.
    pub fn from_segment_selection(
        video_id: impl Into<String>,
        segment_scores: &[f64],
        selected: &[bool],
        segment_len: usize,
        n_frames: usize,
    ) -> Self {
        debug_assert_eq!(segment_scores.len(), selected.len());
        let mut frame_labels = vec![0u8; n_frames];
        for (i, &sel) in selected.iter().enumerate() {
            if sel {
                frame_labels[i * segment_len..(i + 1) * segment_len].fill(1);
            }
        }
        ScoreTrack {
            video_id: video_id.into(),
            segment_scores: segment_scores.iter().map(|&s| s as f32).collect(),
            frame_labels,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frame_labels.len()
    }

    pub fn selected_frames(&self) -> usize {
        self.frame_labels.iter().filter(|&&l| l == 1).count()
    }

    /// Scores in `[0, 1]` and binary labels.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.segment_scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Invalid(format!(
                "track {}: segment score {s} outside [0, 1]",
                self.video_id
            )));
        }
        if self.frame_labels.iter().any(|&l| l > 1) {
            return Err(Error::Invalid(format!(
                "track {}: frame labels must be 0 or 1",
                self.video_id
            )));
        }
        Ok(())
    }

    /// Checks the track shape against its video.
    pub fn check_against(&self, video: &EmbeddedVideo) -> Result<()> {
        if self.segment_scores.len() != video.n_segments() {
            return Err(Error::LengthMismatch {
                expected: video.n_segments(),
                found: self.segment_scores.len(),
            });
        }
        if self.frame_labels.len() != video.n_frames {
            return Err(Error::LengthMismatch {
                expected: video.n_frames,
                found: self.frame_labels.len(),
            });
        }
        Ok(())
    }

    /// True when every segment's frames share a label and the tail is 0.
    /// Holds for predicted summaries, not for ground truth built from
    /// localized intervals.
    pub fn is_segment_uniform(&self, segment_len: usize) -> bool {
        let full = self.segment_scores.len() * segment_len;
        if full > self.frame_labels.len() {
            return false;
        }
        let (covered, tail) = self.frame_labels.split_at(full);
        covered
            .chunks(segment_len)
            .all(|c| c.iter().all(|&l| l == c[0]))
            && tail.iter().all(|&l| l == 0)
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreTrackFile {
    video_id: String,
    n_frames: usize,
    segment_scores: Vec<f32>,
    frame_labels: Vec<(u8, usize)>,
}

fn run_length_encode(labels: &[u8]) -> Vec<(u8, usize)> {
    let mut runs: Vec<(u8, usize)> = Vec::new();
    for &l in labels {
        match runs.last_mut() {
            Some((v, n)) if *v == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    runs
}

pub fn write_score_track(track: &ScoreTrack, path: &Path) -> Result<()> {
    track.validate()?;
    let file = ScoreTrackFile {
        video_id: track.video_id.clone(),
        n_frames: track.n_frames(),
        segment_scores: track.segment_scores.clone(),
        frame_labels: run_length_encode(&track.frame_labels),
    };
    let mut text = serde_json::to_string(&file).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_score_track(path: &Path) -> Result<ScoreTrack> {
    let file: ScoreTrackFile = read_json(path)?;
    let mut frame_labels = Vec::with_capacity(file.n_frames);
    for (value, count) in file.frame_labels {
        frame_labels.extend(std::iter::repeat_n(value, count));
    }
    if frame_labels.len() != file.n_frames {
        return Err(Error::Invalid(format!(
            "{}: run-length labels cover {} frames but n_frames is {}",
            path.display(),
            frame_labels.len(),
            file.n_frames
        )));
    }
    let track = ScoreTrack {
        video_id: file.video_id,
        segment_scores: file.segment_scores,
        frame_labels,
    };
    track.validate()?;
    Ok(track)
}

/// File name used for a video's score track inside an output directory.
pub fn track_file_name(video_id: &str) -> String {
    format!("{video_id}.track.json")
}

/// Reads every `*.track.json` in `dir`, keyed by video id.
pub fn read_track_dir(dir: &Path) -> Result<std::collections::BTreeMap<String, ScoreTrack>> {
    let mut out = std::collections::BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_track = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(".track.json"));
        if is_track {
            let t = read_score_track(&path)?;
            out.insert(t.video_id.clone(), t);
        }
    }
    Ok(out)
}
