//! Prediction CSV files.
//!
//! Wide form, one row per sample:
//!
//! ```text
//! # classes=3
//! sample_id,truth,resnet,vgg,densenet
//! s0,0,0,1,0
//! ```
//!
//! The `# classes=C` line is optional; without it `C` is one more than the
//! largest label. Confidences, when present, live in one file per model named
//! `<model_name>.csv` with header `sample_id,p_0,...,p_{C-1}`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use focalprune_core::PredictionDataset;
use sha2::{Digest, Sha256};

/// A load failure pinned to a file and, when known, a line.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
}

/// A validated dataset plus the SHA-256 of the bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: PredictionDataset,
    pub content_hash: String,
}

fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads, validates and hashes a prediction file and optional confidences.
/// `classes` overrides both inference and the header directive.
pub fn load_predictions(
    path: &Path,
    confidence_dir: Option<&Path>,
    classes: Option<u32>,
) -> Result<LoadedDataset, LoadError> {
    let bytes = read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let mut dataset = parse_predictions(&bytes, path, classes)?;
    if let Some(dir) = confidence_dir {
        let mut conf = Vec::new();
        for name in dataset.model_names() {
            let file = dir.join(format!("{name}.csv"));
            let bytes = read(&file)?;
            hasher.update(&bytes);
            conf.push(parse_confidences(&bytes, &file, &dataset, name)?);
        }
        dataset = dataset
            .with_confidences(conf.concat())
            .map_err(|e| LoadError::File {
                path: dir.to_path_buf(),
                message: e.to_string(),
            })?;
    }
    Ok(LoadedDataset {
        dataset,
        content_hash: hex::encode(hasher.finalize()),
    })
}

fn classes_directive(line: &str) -> Option<&str> {
    let body = line.trim().strip_prefix('#')?.trim();
    body.strip_prefix("classes")
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('='))
        .map(str::trim)
}

/// Parses the wide prediction format from memory; `path` is only used in
/// error messages.
pub fn parse_predictions(
    bytes: &[u8],
    path: &Path,
    classes_override: Option<u32>,
) -> Result<PredictionDataset, LoadError> {
    let line_err = |line: u64, message: String| LoadError::Line {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = std::str::from_utf8(bytes).map_err(|_| LoadError::File {
        path: path.to_path_buf(),
        message: "file is not valid UTF-8".into(),
    })?;

    let mut declared = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(value) = classes_directive(line) {
            let c = value
                .parse::<u32>()
                .map_err(|_| line_err(i as u64 + 1, format!("bad classes directive {value:?}")))?;
            declared = Some(c);
        }
    }
    let classes = classes_override.or(declared);

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| line_err(1, e.to_string()))?
        .clone();
    let header_line = reader.position().line().max(1);
    if header.len() < 4 || &header[0] != "sample_id" || &header[1] != "truth" {
        return Err(line_err(
            header_line,
            "header must be sample_id,truth,<model>,<model>,... with at least two models".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();

    let mut ids = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut truth = Vec::new();
    let mut predictions = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            line_err(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(line_err(line, "empty sample_id".into()));
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(line_err(
                line,
                format!("duplicate sample_id {id:?} (first on line {first})"),
            ));
        }
        let mut labels = record
            .iter()
            .skip(1)
            .zip(std::iter::once("truth").chain(names.iter().map(String::as_str)));
        let mut parse = |expected: &str| -> Result<u32, LoadError> {
            let (raw, column) = labels.next().expect("record width checked by csv");
            debug_assert_eq!(column, expected);
            let label = raw.parse::<u32>().map_err(|_| {
                line_err(
                    line,
                    format!("non-integer label {raw:?} in column {column:?}"),
                )
            })?;
            if let Some(c) = classes {
                if label >= c {
                    return Err(line_err(
                        line,
                        format!(
                            "label out of range: {label} in column {column:?} with {c} classes"
                        ),
                    ));
                }
            }
            Ok(label)
        };
        truth.push(parse("truth")?);
        for (m, name) in names.iter().enumerate() {
            predictions[m].push(parse(name)?);
        }
        ids.push(id);
    }
    PredictionDataset::new(names, Some(ids), truth, predictions, classes).map_err(|e| {
        LoadError::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })
}

fn parse_confidences(
    bytes: &[u8],
    path: &Path,
    ds: &PredictionDataset,
    model: &str,
) -> Result<Vec<f64>, LoadError> {
    let line_err = |line: u64, message: String| LoadError::Line {
        path: path.to_path_buf(),
        line,
        message,
    };
    let c = ds.num_classes() as usize;
    let m = ds
        .model_names()
        .iter()
        .position(|n| n == model)
        .expect("model exists");
    let index: HashMap<&str, usize> = ds
        .sample_ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| line_err(1, e.to_string()))?
        .clone();
    let expected: Vec<String> = std::iter::once("sample_id".to_string())
        .chain((0..c).map(|k| format!("p_{k}")))
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(line_err(
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }
    let mut out = vec![f64::NAN; ds.num_samples() * c];
    let mut filled = vec![false; ds.num_samples()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            line_err(
                e.position().map_or(0, |p| p.line()),
                format!("malformed row: {e}"),
            )
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = &record[0];
        let s = *index
            .get(id)
            .ok_or_else(|| line_err(line, format!("unknown sample_id {id:?}")))?;
        if std::mem::replace(&mut filled[s], true) {
            return Err(line_err(line, format!("duplicate sample_id {id:?}")));
        }
        let row: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| line_err(line, format!("non-numeric probability {v:?}")))
            })
            .collect::<Result<_, _>>()?;
        let predicted = ds.predictions(m)[s];
        focalprune_core::data::check_confidence_row(&row, predicted)
            .map_err(|msg| line_err(line, msg))?;
        out[s * c..(s + 1) * c].copy_from_slice(&row);
    }
    if let Some(s) = filled.iter().position(|f| !f) {
        return Err(LoadError::File {
            path: path.to_path_buf(),
            message: format!("missing confidences for sample_id {:?}", ds.sample_ids()[s]),
        });
    }
    Ok(out)
}

/// Canonical wide CSV: classes directive, header, one row per sample.
pub fn to_canonical_csv(ds: &PredictionDataset) -> String {
    let mut out = String::new();
    writeln!(out, "# classes={}", ds.num_classes()).unwrap();
    out.push_str("sample_id,truth");
    for name in ds.model_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (s, id) in ds.sample_ids().iter().enumerate() {
        write!(out, "{id},{}", ds.truth()[s]).unwrap();
        for m in 0..ds.num_models() {
            write!(out, ",{}", ds.predictions(m)[s]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Confidence file content for one model, if the dataset has confidences.
pub fn confidence_csv(ds: &PredictionDataset, model: usize) -> Option<String> {
    if !ds.has_confidences() {
        return None;
    }
    let mut out = String::from("sample_id");
    for k in 0..ds.num_classes() {
        write!(out, ",p_{k}").unwrap();
    }
    out.push('\n');
    for (s, id) in ds.sample_ids().iter().enumerate() {
        out.push_str(id);
        for p in ds.confidence_row(model, s).unwrap() {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
    }
    Some(out)
}

/// Writes the canonical CSV and, when present, one confidence file per model.
pub fn write_dataset(
    ds: &PredictionDataset,
    path: &Path,
    confidence_dir: Option<&Path>,
) -> std::io::Result<()> {
    fs::write(path, to_canonical_csv(ds))?;
    if let Some(dir) = confidence_dir {
        fs::create_dir_all(dir)?;
        for (m, name) in ds.model_names().iter().enumerate() {
            if let Some(text) = confidence_csv(ds, m) {
                fs::write(dir.join(format!("{name}.csv")), text)?;
            }
        }
    }
    Ok(())
}

/// SHA-256 hex digest of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
