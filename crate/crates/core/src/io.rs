//! On-disk interchange formats: BEMB embeddings (+ `.meta.json` sidecar),
//! the CSV embedding fallback, annotation CSVs and the registry JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotationEvent, AnnotationTable, EmbeddingSet, ModelRegistry, RegistryEntry, Training};

pub const BEMB_MAGIC: [u8; 4] = *b"BEMB";
pub const BEMB_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    model: String,
    event_ids: Vec<String>,
}

/// `<dir>/<stem>.meta.json` next to a BEMB file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Reads a BEMB file (with its sidecar) or a CSV with header `id,e0,...`.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(&BEMB_MAGIC) {
        return parse_bemb(path, &bytes);
    }
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return parse_embedding_csv(path, &bytes);
    }
    Err(Error::MagicMismatch { path: path.to_path_buf() })
}

fn parse_bemb(path: &Path, bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MagicMismatch { path: path.to_path_buf() });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != BEMB_VERSION {
        return Err(Error::InvariantViolation(format!("unsupported BEMB version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = count
        .checked_mul(dim)
        .ok_or_else(|| Error::InvariantViolation("count × dim overflows".into()))?;
    if !payload.len().is_multiple_of(4) || payload.len() / 4 != expected {
        return Err(Error::DimensionMismatch { expected, found: payload.len() / 4 });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let data = Array2::from_shape_vec((count, dim), values).expect("length checked above");
    if let Some(row) = crate::model::first_non_finite_row(data.view()) {
        return Err(Error::NonFiniteValue { row });
    }

    let sidecar: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    if sidecar.event_ids.len() != count {
        return Err(Error::IdCountMismatch { expected: count, found: sidecar.event_ids.len() });
    }
    EmbeddingSet::new(sidecar.model, data, sidecar.event_ids)
}

fn parse_embedding_csv(path: &Path, bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader.headers()?.clone();
    if header.get(0).map(str::trim) != Some("id") {
        return Err(Error::ParseError { line: 1, message: "first column must be `id`".into() });
    }
    let dim = header.len() - 1;
    for (j, name) in header.iter().skip(1).enumerate() {
        if name.trim() != format!("e{j}") {
            return Err(Error::ParseError { line: 1, message: format!("expected column e{j}, found {name:?}") });
        }
    }

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        if record.len() != dim + 1 {
            return Err(Error::DimensionMismatch { expected: dim + 1, found: record.len() });
        }
        ids.push(record[0].trim().to_owned());
        for field in record.iter().skip(1) {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|e| Error::ParseError { line, message: format!("{field:?}: {e}") })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row });
            }
            values.push(v);
        }
    }
    let data = Array2::from_shape_vec((ids.len(), dim), values).expect("row lengths checked");
    let model = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    EmbeddingSet::new(model, data, ids)
}

/// Writes BEMB plus the `.meta.json` sidecar.
pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let data = set.data();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * data.len());
    buf.extend_from_slice(&BEMB_MAGIC);
    buf.extend_from_slice(&BEMB_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    let dim = u32::try_from(set.dim()).map_err(|_| Error::InvariantViolation("dim exceeds u32".into()))?;
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.extend_from_slice(&(set.count() as u64).to_le_bytes());
    for v in data.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;

    let sidecar = Sidecar { model: set.model_name().to_owned(), event_ids: set.event_ids().to_vec() };
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads `file,start_s,end_s,label`, optionally preceded by an `event_id`
/// column. Without one, ids are derived as `<file>:<start_s>:<end_s>` from the
/// raw field text.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationTable> {
    let bytes = fs::read(path)?;
    parse_annotations(&bytes)
}

pub fn parse_annotations(bytes: &[u8]) -> Result<AnnotationTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let has_id = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["file", "start_s", "end_s", "label"] => false,
        ["event_id", "file", "start_s", "end_s", "label"] => true,
        _ => {
            return Err(Error::ParseError {
                line: 1,
                message: format!("expected header file,start_s,end_s,label (optionally led by event_id), got {header:?}"),
            })
        }
    };
    let offset = usize::from(has_id);

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::ParseError { line, message: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::ParseError {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let time = |idx: usize| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .map_err(|e| Error::ParseError { line, message: format!("{:?}: {e}", &record[idx]) })
        };
        let file = record[offset].to_owned();
        let start_s = time(offset + 1)?;
        let end_s = time(offset + 2)?;
        let event_id = if has_id {
            record[0].to_owned()
        } else {
            format!("{}:{}:{}", file, &record[offset + 1], &record[offset + 2])
        };
        rows.push(AnnotationEvent { event_id, file, start_s, end_s, label: record[offset + 3].to_owned() });
    }
    AnnotationTable::new(rows)
}

/// Always writes the `event_id` column so ids survive a round trip.
pub fn save_annotations(table: &AnnotationTable, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["event_id", "file", "start_s", "end_s", "label"])?;
    for ev in table.rows() {
        writer.write_record([
            ev.event_id.as_str(),
            ev.file.as_str(),
            &ev.start_s.to_string(),
            &ev.end_s.to_string(),
            ev.label.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawEntry {
    name: String,
    abbrev: String,
    training: Training,
    dimension: usize,
    #[serde(default)]
    domains: Vec<String>,
    is_bird_trained: Option<bool>,
}

/// Registry JSON: an array of entries. `is_bird_trained` may be omitted, in
/// which case it is derived from `domains`.
pub fn load_registry(path: impl AsRef<Path>) -> Result<ModelRegistry> {
    parse_registry(&fs::read(path)?)
}

pub fn parse_registry(bytes: &[u8]) -> Result<ModelRegistry> {
    let raw: Vec<RawEntry> = serde_json::from_slice(bytes)?;
    let entries = raw
        .into_iter()
        .map(|r| {
            let mut entry = RegistryEntry::new(r.name, r.abbrev, r.training, r.dimension, r.domains);
            if let Some(flag) = r.is_bird_trained {
                entry.is_bird_trained = flag;
            }
            entry
        })
        .collect();
    ModelRegistry::new(entries)
}

pub fn save_registry(registry: &ModelRegistry, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&serde_json::to_vec_pretty(registry.entries())?)?;
    Ok(())
}
